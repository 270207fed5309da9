#pragma once

#include "fmarket/rational.hpp"

#include <cstddef>
#include <deque>
#include <string>
#include <vector>

namespace fmarket {

template <class T>
struct BasicFlowEdge {
  std::size_t from, to;
  T cap;
  T flow = 0;
  std::string label;

  T residual() const { return cap - flow; }
};

/// Directed capacitated multigraph. Node 0 is the source, node 1 the sink.
template <class T>
struct BasicFlowNetwork {
  static constexpr std::size_t source = 0;
  static constexpr std::size_t sink = 1;

  std::vector<std::string> node_names{"s", "t"};
  std::vector<BasicFlowEdge<T>> edges;

  std::size_t add_node(std::string name) {
    node_names.push_back(std::move(name));
    return node_names.size() - 1;
  }
  std::size_t add_edge(std::size_t a, std::size_t b, T cap, std::string label = {}) {
    edges.push_back({a, b, std::move(cap), T(0), std::move(label)});
    return edges.size() - 1;
  }
  std::size_t num_nodes() const { return node_names.size(); }

  T value() const {
    T v = 0;
    for (const auto& e : edges) {
      if (e.from == source) v += e.flow;
      if (e.to == source) v -= e.flow;
    }
    return v;
  }
};

using FlowEdge = BasicFlowEdge<Rational>;
using FlowNetwork = BasicFlowNetwork<Rational>;

/// Edmonds-Karp; writes the flow into net.edges and returns its value. With T = double,
/// residuals below tol count as saturated.
template <class T>
T max_flow(BasicFlowNetwork<T>& net, const T& tol = T(0)) {
  for (auto& e : net.edges) e.flow = 0;
  const std::size_t n = net.num_nodes();
  // arc k: edge k/2, forward if k even
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < net.edges.size(); ++i) {
    adj[net.edges[i].from].push_back(2 * i);
    adj[net.edges[i].to].push_back(2 * i + 1);
  }
  auto res = [&](std::size_t arc) {
    const auto& e = net.edges[arc / 2];
    return arc % 2 == 0 ? e.cap - e.flow : e.flow;
  };
  auto head = [&](std::size_t arc) {
    const auto& e = net.edges[arc / 2];
    return arc % 2 == 0 ? e.to : e.from;
  };
  T total = 0;
  for (;;) {
    std::vector<std::size_t> via(n, SIZE_MAX);
    std::vector<bool> seen(n, false);
    const std::size_t src = BasicFlowNetwork<T>::source, snk = BasicFlowNetwork<T>::sink;
    std::deque<std::size_t> q{src};
    seen[src] = true;
    while (!q.empty() && !seen[snk]) {
      std::size_t x = q.front();
      q.pop_front();
      for (auto arc : adj[x]) {
        std::size_t y = head(arc);
        if (seen[y] || res(arc) <= tol) continue;
        seen[y] = true;
        via[y] = arc;
        q.push_back(y);
      }
    }
    if (!seen[snk]) break;
    T bottleneck = -1;
    for (std::size_t y = snk; y != src;) {
      std::size_t arc = via[y];
      T r = res(arc);
      if (bottleneck < 0 || r < bottleneck) bottleneck = r;
      y = arc % 2 == 0 ? net.edges[arc / 2].from : net.edges[arc / 2].to;
    }
    for (std::size_t y = snk; y != src;) {
      std::size_t arc = via[y];
      auto& e = net.edges[arc / 2];
      if (arc % 2 == 0) {
        e.flow += bottleneck;
        y = e.from;
      } else {
        e.flow -= bottleneck;
        y = e.to;
      }
    }
    total += bottleneck;
  }
  return total;
}

/// Nodes reachable from `seeds` through arcs with positive residual capacity.
template <class T>
std::vector<bool> residual_reachable(const BasicFlowNetwork<T>& net, const std::vector<std::size_t>& seeds) {
  std::vector<bool> seen(net.num_nodes(), false);
  std::deque<std::size_t> q;
  for (auto s : seeds)
    if (!seen[s]) {
      seen[s] = true;
      q.push_back(s);
    }
  while (!q.empty()) {
    std::size_t x = q.front();
    q.pop_front();
    for (const auto& e : net.edges) {
      if (e.from == x && e.flow < e.cap && !seen[e.to]) {
        seen[e.to] = true;
        q.push_back(e.to);
      }
      if (e.to == x && e.flow > 0 && !seen[e.from]) {
        seen[e.from] = true;
        q.push_back(e.from);
      }
    }
  }
  return seen;
}

/// Conservation at every node except source and sink, and 0 <= flow <= cap on every edge.
template <class T>
bool flow_is_feasible(const BasicFlowNetwork<T>& net) {
  std::vector<T> bal(net.num_nodes(), T(0));
  for (const auto& e : net.edges) {
    if (e.flow < 0 || e.flow > e.cap) return false;
    bal[e.from] -= e.flow;
    bal[e.to] += e.flow;
  }
  for (std::size_t x = 2; x < net.num_nodes(); ++x)
    if (bal[x] != 0) return false;
  return true;
}

}  // namespace fmarket
