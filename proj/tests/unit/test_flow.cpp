#include "fmarket/flow.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace fmarket;

namespace {

/// Minimum s-t cut by enumerating every subset of inner nodes on the source side.
Rational min_cut(const FlowNetwork& net) {
  const std::size_t inner = net.num_nodes() - 2;
  Rational best = -1;
  for (std::uint32_t mask = 0; mask < (1u << inner); ++mask) {
    auto side = [&](std::size_t v) { return v == FlowNetwork::source || (v >= 2 && (mask >> (v - 2)) & 1); };
    Rational cut = 0;
    for (const auto& e : net.edges)
      if (side(e.from) && !side(e.to)) cut += e.cap;
    if (best < 0 || cut < best) best = cut;
  }
  return best;
}

}  // namespace

TEST(MaxFlow, EmptyNetwork) {
  FlowNetwork net;
  EXPECT_EQ(max_flow(net), 0);
}

TEST(MaxFlow, SinglePathBottleneck) {
  FlowNetwork net;
  auto a = net.add_node("a"), b = net.add_node("b");
  net.add_edge(FlowNetwork::source, a, 3);
  net.add_edge(a, b, 2);
  net.add_edge(b, FlowNetwork::sink, 5);
  EXPECT_EQ(max_flow(net), 2);
  EXPECT_TRUE(flow_is_feasible(net));
}

// Two goods, two buyers with use/room arcs in both directions.
TEST(MaxFlow, RepairShapedNetwork) {
  FlowNetwork net;
  auto g1 = net.add_node("g1"), g2 = net.add_node("g2"), b1 = net.add_node("b1"), b2 = net.add_node("b2");
  net.add_edge(FlowNetwork::source, g1, Rational(1, 5));
  net.add_edge(g1, b1, Rational(6, 10));
  net.add_edge(b1, g1, Rational(4, 10));
  net.add_edge(b1, g2, Rational(2, 10));
  net.add_edge(g2, b1, Rational(2, 10));
  net.add_edge(g2, b2, Rational(1, 10));
  net.add_edge(b2, g2, Rational(9, 10));
  net.add_edge(b1, FlowNetwork::sink, Rational(1, 10));
  net.add_edge(b2, FlowNetwork::sink, Rational(1, 10));
  EXPECT_EQ(max_flow(net), Rational(1, 5));
  EXPECT_EQ(net.value(), Rational(1, 5));
  EXPECT_TRUE(flow_is_feasible(net));
  auto reach = residual_reachable(net, {FlowNetwork::source});
  EXPECT_FALSE(reach[FlowNetwork::sink]);
}

TEST(MaxFlow, MatchesMinCutOnRandomGraphs) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> cap(0, 6), nodes(0, 5);
  for (int t = 0; t < 300; ++t) {
    FlowNetwork net;
    std::size_t k = nodes(rng);
    for (std::size_t i = 0; i < k; ++i) net.add_node("v" + std::to_string(i));
    std::uniform_int_distribution<std::size_t> pick(0, net.num_nodes() - 1);
    int edges = 2 + t % 12;
    for (int e = 0; e < edges; ++e) {
      std::size_t a = pick(rng), b = pick(rng);
      if (a == b) continue;
      net.add_edge(a, b, Rational(cap(rng), 1 + t % 4));
    }
    Rational v = max_flow(net);
    EXPECT_EQ(v, min_cut(net));
    EXPECT_EQ(v, net.value());
    EXPECT_TRUE(flow_is_feasible(net));
    EXPECT_FALSE(residual_reachable(net, {FlowNetwork::source})[FlowNetwork::sink]);
  }
}

TEST(MaxFlow, DoubleToleranceSaturates) {
  BasicFlowNetwork<double> net;
  auto a = net.add_node("a");
  net.add_edge(0, a, 1.0);
  net.add_edge(a, 1, 1.0 + 1e-15);
  EXPECT_NEAR(max_flow(net, 1e-12), 1.0, 1e-12);
}
