#pragma once

#include "fmarket/circuit.hpp"
#include "fmarket/rational.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fmarket {

// ======================================================================
// GCircuit -> Pure-Circuit
// ======================================================================

struct PureBuilder {
  PureCircuitInstance inst;

  std::size_t node() { return inst.n++; }
  std::vector<std::size_t> nodes(std::size_t k) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(node());
    return out;
  }
  void add(const PureGate& g) { inst.gates.push_back(g); }
};

struct GadgetStage {
  std::string label;
  std::vector<std::size_t> nodes;
  std::size_t gates = 0;
  std::size_t units = 0;  // comparators count as one unit
};

struct GadgetTrace {
  std::string kind;
  std::vector<GadgetStage> stages;
  std::vector<std::size_t> outputs;
  std::size_t gate_count = 0;
  std::size_t unit_count = 0;
  std::size_t unit_bound = 0;

  void absorb(const GadgetTrace& sub, const std::string& prefix) {
    for (auto s : sub.stages) {
      s.label = prefix + s.label;
      stages.push_back(std::move(s));
    }
    gate_count += sub.gate_count;
    unit_count += sub.unit_count;
  }
  void stage(std::string label, std::vector<std::size_t> nodes, std::size_t gates, std::size_t units) {
    stages.push_back({std::move(label), std::move(nodes), gates, units});
    gate_count += gates;
    unit_count += units;
  }
};

inline std::size_t pow4(std::size_t M) { return M * M * M * M; }

/// Binary PURIFY tree rooted at root with k leaves (k-1 gates).
inline std::vector<std::size_t> purify_tree(PureBuilder& b, std::size_t root, std::size_t k) {
  std::deque<std::size_t> q{root};
  if (k == 0) return {};
  while (q.size() < k) {
    std::size_t x = q.front();
    q.pop_front();
    std::size_t l = b.node(), r = b.node();
    b.add(purify_gate(x, l, r));
    q.push_back(l);
    q.push_back(r);
  }
  return {q.begin(), q.end()};
}

struct SortResult {
  std::vector<std::size_t> wires;
  std::size_t comparators = 0;
};

/// Bubble-sort network; each comparator is (AND = min, OR = max), 0s end up on the left.
inline SortResult sort_network(PureBuilder& b, std::vector<std::size_t> w) {
  SortResult r;
  const std::size_t n = w.size();
  for (std::size_t c = n; c-- > 1;)
    for (std::size_t j = 0; j < c; ++j) {
      std::size_t lo = b.node(), hi = b.node();
      b.add(and_gate(w[j], w[j + 1], lo));
      b.add(or_gate(w[j], w[j + 1], hi));
      w[j] = lo;
      w[j + 1] = hi;
      ++r.comparators;
    }
  r.wires = std::move(w);
  return r;
}

/// Sorted pure vector with `ones` 1-bits on the right.
inline std::vector<std::size_t> hardcoded_vector(PureBuilder& b, std::size_t ones, std::size_t M) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < M; ++i) {
    std::size_t x = b.node();
    b.add(const_gate(i >= M - ones, x));
    out.push_back(x);
  }
  return out;
}

/// C_1 = floor(c M), clamped to [0, M].
inline std::size_t unary_ones(const Rational& c, std::size_t M) {
  Integer f = floor_int(c * Rational(static_cast<long>(M)));
  if (f < 0) return 0;
  if (f > Integer(M)) return M;
  return static_cast<std::size_t>(f.convert_to<long>());
}

inline GadgetTrace build_formatting_subgadget(PureBuilder& b, const std::vector<std::size_t>& r) {
  const std::size_t M = r.size();
  GadgetTrace tr;
  tr.kind = "formatting";
  std::vector<std::size_t> t;
  std::size_t before = b.inst.gates.size();
  for (auto ri : r) {
    auto leaves = purify_tree(b, ri, M);
    t.insert(t.end(), leaves.begin(), leaves.end());
  }
  std::size_t pg = b.inst.gates.size() - before;
  tr.stage("purification", t, pg, pg);
  auto s = sort_network(b, t);
  tr.stage("sorting", s.wires, 2 * s.comparators, s.comparators);
  std::vector<std::size_t> w;
  for (std::size_t i = 1; i <= M; ++i) w.push_back(s.wires[i * M - 1]);
  tr.stage("selection", w, 0, 0);
  tr.outputs = w;
  tr.unit_bound = pow4(M) / 2 + 2 * M * M;
  return tr;
}

/// Gadget for one GCircuit gate over unary vectors of length M.
inline GadgetTrace build_gate_gadget(PureBuilder& b, GKind kind, const std::vector<std::size_t>& u,
                                     const std::vector<std::size_t>& v, const Rational& c, std::size_t M) {
  GadgetTrace tr;
  tr.kind = gkind_name(kind);
  switch (kind) {
    case GKind::Const: {
      auto w = hardcoded_vector(b, unary_ones(c, M), M);
      tr.stage("hardcoded", w, M, M);
      tr.outputs = w;
      tr.unit_bound = M;
      break;
    }
    case GKind::Add:
    case GKind::Or:
    case GKind::And:
    case GKind::Sub: {
      std::vector<std::size_t> r;
      std::size_t g = 0;
      std::vector<std::size_t> rhs = v;
      if (kind == GKind::Sub) {
        std::vector<std::size_t> inv;
        for (std::size_t i = 0; i < M; ++i) {
          std::size_t x = b.node();
          b.add(not_gate(v[i], x));
          inv.push_back(x);
        }
        tr.stage("invert", inv, M, M);
        rhs = inv;
      }
      for (std::size_t i = 0; i < M; ++i) {
        std::size_t x = b.node();
        if (kind == GKind::Add)
          b.add(or_gate(u[i], v[M - 1 - i], x));
        else if (kind == GKind::Or)
          b.add(or_gate(u[i], v[i], x));
        else
          b.add(and_gate(u[i], rhs[i], x));
        r.push_back(x);
        ++g;
      }
      tr.stage("combine", r, g, g);
      auto f = build_formatting_subgadget(b, r);
      tr.absorb(f, "formatting/");
      tr.outputs = f.outputs;
      tr.unit_bound = pow4(M);
      break;
    }
    case GKind::Scale: {
      auto cv = hardcoded_vector(b, unary_ones(c, M), M);
      tr.stage("hardcoded", cv, M, M);
      std::vector<std::size_t> r;
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < M; ++j) {
          std::size_t x = b.node();
          b.add(and_gate(u[i], cv[j], x));
          r.push_back(x);
        }
      tr.stage("outer-product", r, M * M, M * M);
      auto s = sort_network(b, r);
      tr.stage("sorting", s.wires, 2 * s.comparators, s.comparators);
      std::vector<std::size_t> w;
      for (std::size_t i = 1; i <= M; ++i) w.push_back(s.wires[i * M - 1]);
      tr.stage("selection", w, 0, 0);
      tr.outputs = w;
      tr.unit_bound = 2 * pow4(M);
      break;
    }
    case GKind::Less: {
      if (M < 5) throw std::invalid_argument("build_gate_gadget: G_< needs M >= 5");
      auto sub = build_gate_gadget(b, GKind::Sub, v, u, 0, M);
      tr.absorb(sub, "subtract/");
      std::size_t pick = sub.outputs[M - 5];
      std::size_t before = b.inst.gates.size();
      auto t = purify_tree(b, pick, M);
      std::size_t pg = b.inst.gates.size() - before;
      tr.stage("purification", t, pg, pg);
      auto s = sort_network(b, t);
      tr.stage("sorting", s.wires, 2 * s.comparators, s.comparators);
      tr.outputs = s.wires;
      tr.unit_bound = 2 * pow4(M);
      break;
    }
    case GKind::Not: {
      std::vector<std::size_t> w(M);
      for (std::size_t i = 0; i < M; ++i) w[i] = b.node();
      for (std::size_t i = 0; i < M; ++i) b.add(not_gate(u[i], w[M - 1 - i]));
      tr.stage("mirror-not", w, M, M);
      tr.outputs = w;
      tr.unit_bound = M;
      break;
    }
    case GKind::Copy: {
      auto first = build_gate_gadget(b, GKind::Not, u, {}, 0, M);
      auto second = build_gate_gadget(b, GKind::Not, first.outputs, {}, 0, M);
      tr.absorb(first, "not1/");
      tr.absorb(second, "not2/");
      tr.outputs = second.outputs;
      tr.unit_bound = 2 * M;
      break;
    }
    default: throw std::invalid_argument(std::string("build_gate_gadget: unsupported kind ") + gkind_name(kind));
  }
  return tr;
}

// ---------------------------------------------------------------- simulation

struct CyclicDependency : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Topological evaluation. Forced outputs are taken; otherwise single outputs become bot
/// and PURIFY(bot) yields (0, bot). Each node is evaluated once.
inline TernaryAssignment forward_simulate_pure(const PureCircuitInstance& inst,
                                               const std::map<std::size_t, Tern>& frontier) {
  std::vector<std::optional<Tern>> val(inst.n);
  for (const auto& [x, t] : frontier) {
    if (x >= inst.n) throw std::invalid_argument("forward_simulate_pure: frontier node out of range");
    val[x] = t;
  }
  std::vector<std::vector<std::size_t>> readers(inst.n);
  std::vector<std::size_t> missing(inst.gates.size(), 0);
  for (std::size_t g = 0; g < inst.gates.size(); ++g)
    for (auto x : inst.gates[g].inputs()) {
      readers[x].push_back(g);
      if (!val[x]) ++missing[g];
    }
  std::vector<std::size_t> ready;
  for (std::size_t g = 0; g < inst.gates.size(); ++g)
    if (missing[g] == 0) ready.push_back(g);
  std::vector<bool> done(inst.gates.size(), false);
  auto set = [&](std::size_t x, Tern t) {
    if (val[x]) return;
    val[x] = t;
    for (auto g : readers[x])
      if (--missing[g] == 0) ready.push_back(g);
  };
  while (!ready.empty()) {
    std::size_t gi = ready.back();
    ready.pop_back();
    if (done[gi]) continue;
    done[gi] = true;
    const auto& g = inst.gates[gi];
    if (g.kind == PureKind::Purify) {
      Tern in = *val[g.u];
      if (pure(in)) {
        set(g.v, in);
        set(g.w, in);
      } else {
        set(g.v, Tern::Zero);
        set(g.w, Tern::Bot);
      }
      continue;
    }
    Tern a = g.u == nil ? Tern::Bot : *val[g.u];
    Tern c = g.v == nil ? Tern::Bot : *val[g.v];
    set(g.w, forced_output(g.kind, a, c).value_or(Tern::Bot));
  }
  TernaryAssignment out(inst.n, Tern::Bot);
  for (std::size_t x = 0; x < inst.n; ++x) {
    if (!val[x]) throw CyclicDependency("forward_simulate_pure: node " + std::to_string(x) + " never evaluated");
    out[x] = *val[x];
  }
  return out;
}

inline std::size_t count_ones(const TernaryAssignment& a, const std::vector<std::size_t>& vec) {
  std::size_t k = 0;
  for (auto x : vec)
    if (a[x] == Tern::One) ++k;
  return k;
}

inline std::size_t count_bots(const TernaryAssignment& a, const std::vector<std::size_t>& vec) {
  std::size_t k = 0;
  for (auto x : vec)
    if (a[x] == Tern::Bot) ++k;
  return k;
}

/// 0s, then at most... any bots, then 1s.
inline bool is_sorted_unary(const TernaryAssignment& a, const std::vector<std::size_t>& vec) {
  int phase = 0;
  for (auto x : vec) {
    int r = a[x] == Tern::Zero ? 0 : a[x] == Tern::Bot ? 1 : 2;
    if (r < phase) return false;
    phase = r;
  }
  return true;
}

// ---------------------------------------------------------------- basis lowering, fan-out, trimming

/// NOT = PURIFY + NAND, AND = NAND + NOT, OR = NOT, NOT, NAND. Node ids are preserved.
inline PureCircuitInstance lower_to_basis(const PureCircuitInstance& in) {
  PureBuilder b;
  b.inst.n = in.n;
  auto lower_not = [&](std::size_t u, std::size_t w) {
    std::size_t a = b.node(), c = b.node();
    b.add(purify_gate(u, a, c));
    b.add(nand_gate(a, c, w));
  };
  for (const auto& g : in.gates) {
    switch (g.kind) {
      case PureKind::Not: lower_not(g.u, g.w); break;
      case PureKind::And: {
        std::size_t t = b.node();
        b.add(nand_gate(g.u, g.v, t));
        lower_not(t, g.w);
        break;
      }
      case PureKind::Or: {
        std::size_t nu = b.node(), nv = b.node();
        lower_not(g.u, nu);
        lower_not(g.v, nv);
        b.add(nand_gate(nu, nv, g.w));
        break;
      }
      default: b.add(g);
    }
  }
  return b.inst;
}

/// Every node read by k > 1 gates is routed through a PURIFY tree with k leaves.
inline PureCircuitInstance eliminate_fanout(const PureCircuitInstance& in) {
  PureBuilder b;
  b.inst.n = in.n;
  std::vector<std::vector<std::pair<std::size_t, int>>> uses(in.n);
  for (std::size_t g = 0; g < in.gates.size(); ++g) {
    const auto& gt = in.gates[g];
    if (gt.kind == PureKind::Purify || gt.kind == PureKind::Not) {
      uses[gt.u].push_back({g, 0});
    } else if (gt.kind == PureKind::Nand || gt.kind == PureKind::And || gt.kind == PureKind::Or) {
      uses[gt.u].push_back({g, 0});
      uses[gt.v].push_back({g, 1});
    }
  }
  std::vector<PureGate> gates = in.gates;
  for (std::size_t x = 0; x < in.n; ++x) {
    if (uses[x].size() <= 1) continue;
    auto leaves = purify_tree(b, x, uses[x].size());
    for (std::size_t k = 0; k < leaves.size(); ++k) {
      auto [g, slot] = uses[x][k];
      (slot == 0 ? gates[g].u : gates[g].v) = leaves[k];
    }
  }
  std::vector<PureGate> tree = std::move(b.inst.gates);
  b.inst.gates = std::move(gates);
  b.inst.gates.insert(b.inst.gates.end(), tree.begin(), tree.end());
  return b.inst;
}

struct TrimStep {
  enum Kind { RemoveGate, ReplacePurify } kind;
  PureGate gate;            // the removed gate (original node ids)
  std::size_t kept = nil;   // ReplacePurify: output that survives
  std::size_t dropped = nil;
};

struct TrimLog {
  std::size_t original_nodes = 0;
  std::size_t total_nodes = 0;  // including copy-gadget nodes
  std::vector<TrimStep> steps;
  std::vector<std::size_t> new_id;  // pre-trim id -> strict id, nil if removed
  std::vector<std::size_t> old_id;  // strict id -> pre-trim id, nil for copy-gadget nodes
};

/// Removes or rewires gates until every node is read exactly once.
inline std::pair<PureCircuitInstance, TrimLog> trim_to_strict(const PureCircuitInstance& in) {
  TrimLog log;
  log.original_nodes = in.n;
  std::vector<PureGate> gates = in.gates;
  std::vector<bool> alive(gates.size(), true);
  std::size_t n = in.n;
  std::vector<std::size_t> producer(n, nil), readers(n, 0);
  auto recount = [&]() {
    producer.assign(n, nil);
    readers.assign(n, 0);
    for (std::size_t g = 0; g < gates.size(); ++g) {
      if (!alive[g]) continue;
      for (auto x : gates[g].outputs()) producer[x] = g;
      for (auto x : gates[g].inputs()) ++readers[x];
    }
  };
  recount();
  std::vector<bool> node_alive(n, true);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t x = 0; x < n; ++x) {
      if (!node_alive[x] || readers[x] != 0 || producer[x] == nil) continue;
      std::size_t g = producer[x];
      const PureGate gt = gates[g];
      if (gt.kind != PureKind::Purify) {
        alive[g] = false;
        node_alive[x] = false;
        for (auto y : gt.inputs()) --readers[y];
        producer[x] = nil;
        log.steps.push_back({TrimStep::RemoveGate, gt, nil, nil});
        changed = true;
        continue;
      }
      std::size_t other = x == gt.v ? gt.w : gt.v;
      if (readers[other] == 0) {
        alive[g] = false;
        node_alive[gt.v] = node_alive[gt.w] = false;
        producer[gt.v] = producer[gt.w] = nil;
        --readers[gt.u];
        log.steps.push_back({TrimStep::RemoveGate, gt, nil, nil});
      } else {
        alive[g] = false;
        node_alive[x] = false;
        producer[x] = nil;
        log.steps.push_back({TrimStep::ReplacePurify, gt, other, x});
        std::size_t a = n++, c = n++, d = n++, e = n++, f = n++;
        for (int k = 0; k < 5; ++k) node_alive.push_back(true);
        std::size_t base = gates.size();
        gates.push_back(purify_gate(gt.u, a, c));
        gates.push_back(nand_gate(a, c, d));
        gates.push_back(purify_gate(d, e, f));
        gates.push_back(nand_gate(e, f, other));
        for (int k = 0; k < 4; ++k) alive.push_back(true);
        producer.resize(n, nil);
        readers.resize(n, 0);
        producer[a] = producer[c] = base;
        producer[d] = base + 1;
        producer[e] = producer[f] = base + 2;
        producer[other] = base + 3;
        readers[a] = readers[c] = readers[d] = readers[e] = readers[f] = 1;
      }
      changed = true;
    }
  }
  PureCircuitInstance out;
  log.new_id.assign(n, nil);
  for (std::size_t x = 0; x < n; ++x)
    if (node_alive[x]) {
      log.new_id[x] = out.n++;
      log.old_id.push_back(x < in.n ? x : nil);
    }
  for (std::size_t g = 0; g < gates.size(); ++g) {
    if (!alive[g]) continue;
    PureGate t = gates[g];
    for (std::size_t* p : {&t.u, &t.v, &t.w})
      if (*p != nil) *p = log.new_id[*p];
    out.gates.push_back(t);
  }
  log.total_nodes = n;
  return {out, log};
}

/// Lifts an assignment of the strict instance back to the pre-trim node ids.
inline TernaryAssignment extend_assignment(const TrimLog& log, const TernaryAssignment& strict) {
  std::vector<std::optional<Tern>> val(log.total_nodes);
  for (std::size_t x = 0; x < log.total_nodes; ++x)
    if (log.new_id[x] != nil) val[x] = strict[log.new_id[x]];
  auto get = [&](std::size_t x) { return x == nil ? Tern::Bot : val[x].value_or(Tern::Bot); };
  for (auto it = log.steps.rbegin(); it != log.steps.rend(); ++it) {
    const auto& g = it->gate;
    if (it->kind == TrimStep::ReplacePurify) {
      Tern in = get(g.u);
      val[it->dropped] = pure(in) ? in : Tern::Zero;
      continue;
    }
    if (g.kind == PureKind::Purify) {
      Tern in = get(g.u);
      val[g.v] = pure(in) ? in : Tern::Zero;
      val[g.w] = pure(in) ? in : Tern::Bot;
    } else {
      val[g.w] = forced_output(g.kind, get(g.u), get(g.v)).value_or(Tern::Bot);
    }
  }
  TernaryAssignment out(log.original_nodes, Tern::Bot);
  for (std::size_t x = 0; x < log.original_nodes; ++x) out[x] = val[x].value_or(Tern::Bot);
  return out;
}

// ---------------------------------------------------------------- full reduction

struct UnaryEncoding {
  std::size_t M = 0;
  Integer kappa;
  std::vector<std::vector<std::size_t>> vars;  // pre-trim node ids per GCircuit variable
  TrimLog trim;
};

struct PureReduction {
  PureCircuitInstance extended;  // {NOT, OR, AND, PURIFY, CONST} basis, before lowering
  PureCircuitInstance strict;    // {NAND, PURIFY, CONST}, every node read exactly once
  UnaryEncoding enc;
  std::vector<GadgetTrace> traces;
};

/// M = ceil(max(7/eps, (9/delta)^(1/3))).
inline std::size_t unary_length(const Rational& eps, const Rational& delta) {
  if (eps <= 0 || eps > 1 || delta <= 0 || delta > 1)
    throw std::invalid_argument("unary_length: eps and delta must lie in (0,1]");
  Integer a = ceil_int(Rational(7) / eps);
  Rational r = Rational(9) / delta;
  Integer k = 1;
  while (Rational(k * k * k) < r) ++k;
  Integer M = a > k ? a : k;
  return static_cast<std::size_t>(M.convert_to<long>());
}

inline PureReduction gcircuit_to_pure(const GCircuitInstance& gc, const Rational& eps, const Rational& delta) {
  auto st = validate_gcircuit(gc);
  if (!st.ok) throw std::invalid_argument("gcircuit_to_pure: " + st.violations.front());
  PureReduction red;
  const std::size_t M = unary_length(eps, delta);
  red.enc.M = M;
  red.enc.kappa = Integer(320) * Integer(pow4(M));
  PureBuilder b;
  // placeholders for every variable vector, resolved after all gadgets exist
  std::vector<std::vector<std::size_t>> placeholder(gc.n);
  for (std::size_t x = 0; x < gc.n; ++x) placeholder[x] = b.nodes(M);
  std::vector<std::vector<std::size_t>> produced(gc.n);
  for (const auto& g : gc.gates) {
    const auto& u = g.u == nil ? std::vector<std::size_t>{} : placeholder[g.u];
    const auto& v = g.v == nil ? std::vector<std::size_t>{} : placeholder[g.v];
    auto tr = build_gate_gadget(b, g.kind, u, v, g.c, M);
    produced[g.w] = tr.outputs;
    red.traces.push_back(std::move(tr));
  }
  // rename placeholders to the gadget outputs, then compact ids
  std::vector<std::size_t> alias(b.inst.n);
  for (std::size_t x = 0; x < b.inst.n; ++x) alias[x] = x;
  for (std::size_t x = 0; x < gc.n; ++x)
    for (std::size_t i = 0; i < M; ++i) alias[placeholder[x][i]] = produced[x][i];
  std::vector<std::size_t> compact(b.inst.n, nil);
  std::vector<bool> is_placeholder(b.inst.n, false);
  for (std::size_t x = 0; x < gc.n; ++x)
    for (auto p : placeholder[x]) is_placeholder[p] = true;
  std::size_t next = 0;
  for (std::size_t x = 0; x < b.inst.n; ++x)
    if (!is_placeholder[x]) compact[x] = next++;
  auto map_id = [&](std::size_t x) { return x == nil ? nil : compact[alias[x]]; };
  PureCircuitInstance ext;
  ext.n = next;
  for (auto g : b.inst.gates) {
    g.u = map_id(g.u);
    g.v = map_id(g.v);
    g.w = map_id(g.w);
    ext.gates.push_back(g);
  }
  for (auto& tr : red.traces) {
    for (auto& s : tr.stages)
      for (auto& x : s.nodes) x = map_id(x);
    for (auto& x : tr.outputs) x = map_id(x);
  }
  red.enc.vars.resize(gc.n);
  for (std::size_t x = 0; x < gc.n; ++x)
    for (auto p : produced[x]) red.enc.vars[x].push_back(map_id(p));
  red.extended = ext;
  auto lowered = eliminate_fanout(lower_to_basis(ext));
  auto [strict, log] = trim_to_strict(lowered);
  red.strict = std::move(strict);
  red.enc.trim = std::move(log);
  return red;
}

struct UnaryDecode {
  RealAssignment values;
  Rational satisfied_fraction;
};

inline UnaryDecode decode_pure_to_gcircuit(const TernaryAssignment& strict_assignment, const UnaryEncoding& enc,
                                           const GCircuitInstance& gc, const Rational& eps) {
  TernaryAssignment full = extend_assignment(enc.trim, strict_assignment);
  UnaryDecode out;
  for (const auto& vec : enc.vars)
    out.values.push_back(Rational(Integer(count_ones(full, vec)), Integer(enc.M)));
  out.satisfied_fraction = gcircuit_satisfied_fraction(gc, out.values, eps);
  return out;
}

/// Decode of a single unary vector: U_1 / M.
inline Rational decode_unary(const std::vector<Tern>& bits) {
  if (bits.empty()) return 0;
  std::size_t ones = 0;
  for (auto t : bits)
    if (t == Tern::One) ++ones;
  return Rational(Integer(ones), Integer(bits.size()));
}

// ======================================================================
// GCircuit+ -> GCircuit
// ======================================================================

namespace lowering {

enum class Role { Core, Wrap };

struct TaggedGate {
  GGate g;
  std::size_t tag;  // index of the originating GCircuit+ gate
  Role role = Role::Core;
};

struct Work {
  std::vector<VarBounds> bounds;
  std::vector<TaggedGate> gates;

  std::size_t var(const Rational& lo, const Rational& hi) {
    bounds.push_back({lo, hi});
    return bounds.size() - 1;
  }
  void emit(GKind k, std::size_t u, std::size_t v, std::size_t w, const Rational& c, std::size_t tag,
            Role role = Role::Core) {
    gates.push_back({GGate{k, u, v, w, c}, tag, role});
  }
};

inline Work from_instance(const GCircuitPlusInstance& gcp) {
  Work w;
  w.bounds = gcp.bounds;
  for (std::size_t t = 0; t < gcp.gates.size(); ++t) w.gates.push_back({gcp.gates[t], t, Role::Core});
  return w;
}

inline Rational max_abs_bound(const std::vector<VarBounds>& b) {
  Rational m = 0;
  for (const auto& x : b) m = rmax(m, rmax(rabs(x.lo), rabs(x.hi)));
  return m;
}

/// Stage 1: G_xc constants to the nearest multiple of grid.
inline Rational round_constants(Work& w, const Rational& grid) {
  Rational rho = 0;
  for (auto& tg : w.gates) {
    if (tg.g.kind != GKind::Scale) continue;
    Rational c = tg.g.c;
    Rational cr = Rational(floor_int(c / grid + Rational(1, 2))) * grid;
    const auto& ub = w.bounds[tg.g.u];
    rho = rmax(rho, rabs(c - cr) * rmax(rabs(ub.lo), rabs(ub.hi)));
    tg.g.c = cr;
  }
  return rho;
}

inline VarBounds scaled(const VarBounds& b, const Rational& k) {
  Rational a = b.lo * k, c = b.hi * k;
  return {rmin(a, c), rmax(a, c)};
}

/// Stage 2: G_xc with c outside [0,1] becomes doublings, sums, G_x(1/q) and a final 0 - t.
inline void expand_scales(Work& w) {
  std::vector<TaggedGate> old = std::move(w.gates);
  w.gates.clear();
  for (const auto& tg : old) {
    const GGate& g = tg.g;
    if (g.kind != GKind::Scale || (g.c >= 0 && g.c <= 1)) {
      w.gates.push_back(tg);
      continue;
    }
    bool neg = g.c < 0;
    Rational a = rabs(g.c);
    Integer p = num(a), q = den(a);
    VarBounds ub = w.bounds[g.u];
    // doubling chain d_i = 2^i u and the running sum of the set bits of p
    std::size_t d = g.u;
    VarBounds db = ub;
    std::optional<std::size_t> acc;
    VarBounds accb{0, 0};
    Integer bits = p;
    int i = 0;
    while (bits > 0) {
      if (i > 0) {
        VarBounds nb{db.lo * 2, db.hi * 2};
        std::size_t nd = w.var(nb.lo, nb.hi);
        w.emit(GKind::Add, d, d, nd, 0, tg.tag);
        d = nd;
        db = nb;
      }
      if ((bits & 1) != 0) {
        if (!acc) {
          acc = d;
          accb = db;
        } else {
          VarBounds nb{accb.lo + db.lo, accb.hi + db.hi};
          std::size_t ns = w.var(nb.lo, nb.hi);
          w.emit(GKind::Add, *acc, d, ns, 0, tg.tag);
          acc = ns;
          accb = nb;
        }
      }
      bits >>= 1;
      ++i;
    }
    Rational invq = Rational(1) / Rational(q);
    if (!neg) {
      w.emit(GKind::Scale, *acc, nil, g.w, invq, tg.tag);
    } else {
      VarBounds tb = scaled(accb, invq);
      std::size_t t = w.var(tb.lo, tb.hi);
      w.emit(GKind::Scale, *acc, nil, t, invq, tg.tag);
      std::size_t zero = w.var(0, 1);
      w.emit(GKind::Const, nil, nil, zero, 0, tg.tag);
      w.emit(GKind::Sub, zero, t, g.w, 0, tg.tag);
    }
  }
}

/// Stage 3: G_or, G_not, G_and in terms of G_c, G_-, G_+ and G_<.
inline void expand_logic(Work& w) {
  std::vector<TaggedGate> old = std::move(w.gates);
  w.gates.clear();
  std::size_t tag = 0;
  auto half = [&]() {
    std::size_t h = w.var(0, 1);
    w.emit(GKind::Const, nil, nil, h, Rational(1, 2), tag);
    return h;
  };
  auto emit_not = [&](std::size_t u, std::size_t out) {
    std::size_t one = w.var(0, 1);
    w.emit(GKind::Const, nil, nil, one, 1, tag);
    std::size_t t = w.var(0, 1);
    w.emit(GKind::Sub, one, u, t, 0, tag);
    w.emit(GKind::Less, half(), t, out, 0, tag);
  };
  auto emit_or = [&](std::size_t u, std::size_t v, std::size_t out) {
    std::size_t a = w.var(0, 1), b = w.var(0, 1), s = w.var(0, 1);
    w.emit(GKind::Less, half(), u, a, 0, tag);
    w.emit(GKind::Less, half(), v, b, 0, tag);
    w.emit(GKind::Add, a, b, s, 0, tag);
    w.emit(GKind::Less, half(), s, out, 0, tag);
  };
  for (const auto& tg : old) {
    const GGate& g = tg.g;
    tag = tg.tag;
    switch (g.kind) {
      case GKind::Or: emit_or(g.u, g.v, g.w); break;
      case GKind::Not: emit_not(g.u, g.w); break;
      case GKind::And: {
        std::size_t nu = w.var(0, 1), nv = w.var(0, 1), o = w.var(0, 1);
        emit_not(g.u, nu);
        emit_not(g.v, nv);
        emit_or(nu, nv, o);
        emit_not(o, g.w);
        break;
      }
      default: w.gates.push_back(tg);
    }
  }
}

/// Stage 4: divide everything by m; each gate writes w' in [-1,1] and w = min(max(w', w_l/m), w_u/m).
inline void rescale(Work& w, const Rational& m) {
  std::vector<TaggedGate> old = std::move(w.gates);
  std::vector<VarBounds> original = w.bounds;
  w.gates.clear();
  for (auto& b : w.bounds) b = {b.lo / m, b.hi / m};
  for (const auto& tg : old) {
    GGate g = tg.g;
    std::size_t wout = g.w;
    std::size_t wp = w.var(-1, 1);
    g.w = wp;
    if (g.kind == GKind::Const || g.kind == GKind::Min || g.kind == GKind::Max) g.c = g.c / m;
    if (g.kind == GKind::Less) {
      std::size_t t = w.var(0, 1);
      g.w = t;
      w.gates.push_back({g, tg.tag, Role::Core});
      w.emit(GKind::Scale, t, nil, wp, Rational(1) / m, tg.tag);
    } else {
      w.gates.push_back({g, tg.tag, Role::Core});
    }
    std::size_t y = w.var(-1, 1);
    w.emit(GKind::Max, wp, nil, y, original[wout].lo / m, tg.tag, Role::Wrap);
    w.emit(GKind::Min, y, nil, wout, original[wout].hi / m, tg.tag, Role::Wrap);
  }
}

/// Stage 5: min/max through saturating additions of k = (1 -/+ c)/2.
inline void remove_minmax(Work& w) {
  std::vector<TaggedGate> old = std::move(w.gates);
  w.gates.clear();
  for (const auto& tg : old) {
    const GGate& g = tg.g;
    if (g.kind != GKind::Min && g.kind != GKind::Max) {
      w.gates.push_back(tg);
      continue;
    }
    bool isMin = g.kind == GKind::Min;
    Rational k = isMin ? (1 - g.c) / 2 : (1 + g.c) / 2;
    std::size_t kv = w.var(-1, 1);
    w.emit(GKind::Const, nil, nil, kv, k, tg.tag, tg.role);
    GKind first = isMin ? GKind::Add : GKind::Sub;
    GKind second = isMin ? GKind::Sub : GKind::Add;
    std::size_t a = w.var(-1, 1), b = w.var(-1, 1), d = w.var(-1, 1);
    w.emit(first, g.u, kv, a, 0, tg.tag, tg.role);
    w.emit(first, a, kv, b, 0, tg.tag, tg.role);
    w.emit(second, b, kv, d, 0, tg.tag, tg.role);
    w.emit(second, d, kv, g.w, 0, tg.tag, tg.role);
  }
}

/// Stage 6: v -> (v+, v-) in [0,1]^2, every gate followed by a one-sidedness gate.
struct Split {
  Work out;
  std::vector<std::pair<std::size_t, std::size_t>> pm;  // per stage-5 variable
};

inline Split split_signs(const Work& w) {
  Split s;
  Work& o = s.out;
  for (std::size_t x = 0; x < w.bounds.size(); ++x) {
    std::size_t p = o.var(0, 1), n = o.var(0, 1);
    s.pm.push_back({p, n});
  }
  auto fresh = [&]() { return o.var(0, 1); };
  for (const auto& tg : w.gates) {
    const GGate& g = tg.g;
    std::size_t tag = tg.tag;
    Role role = tg.role;
    auto E = [&](GKind k, std::size_t u, std::size_t v, std::size_t out, const Rational& c = 0) {
      o.emit(k, u, v, out, c, tag, role);
    };
    std::size_t tp = fresh(), tn = fresh();
    auto [up, un] = g.u == nil ? std::pair<std::size_t, std::size_t>{nil, nil} : s.pm[g.u];
    auto [vp, vn] = g.v == nil ? std::pair<std::size_t, std::size_t>{nil, nil} : s.pm[g.v];
    // a + b - c - d with saturation at [0,1] after every step
    auto chain = [&](std::size_t a, std::size_t b, std::size_t c, std::size_t d, std::size_t out) {
      std::size_t s1 = fresh(), s2 = fresh();
      E(GKind::Add, a, b, s1);
      E(GKind::Sub, s1, c, s2);
      E(GKind::Sub, s2, d, out);
    };
    switch (g.kind) {
      case GKind::Const:
        E(GKind::Const, nil, nil, tp, g.c >= 0 ? g.c : Rational(0));
        E(GKind::Const, nil, nil, tn, g.c < 0 ? Rational(-g.c) : Rational(0));
        break;
      case GKind::Scale:
        E(GKind::Scale, up, nil, tp, g.c);
        E(GKind::Scale, un, nil, tn, g.c);
        break;
      case GKind::Copy:
        E(GKind::Copy, up, nil, tp);
        E(GKind::Copy, un, nil, tn);
        break;
      case GKind::Add:
        chain(up, vp, un, vn, tp);
        chain(un, vn, up, vp, tn);
        break;
      case GKind::Sub:
        chain(up, vn, un, vp, tp);
        chain(un, vp, up, vn, tn);
        break;
      case GKind::Less: {
        auto shifted = [&](std::size_t p, std::size_t n) {
          std::size_t h = fresh(), a = fresh(), b = fresh(), c = fresh(), r = fresh();
          E(GKind::Const, nil, nil, h, Rational(1, 2));
          E(GKind::Scale, n, nil, a, Rational(1, 2));
          E(GKind::Sub, h, a, b);
          E(GKind::Scale, p, nil, c, Rational(1, 2));
          E(GKind::Add, b, c, r);
          return r;
        };
        std::size_t uu = shifted(up, un), vv = shifted(vp, vn);
        E(GKind::Less, uu, vv, tp);
        E(GKind::Const, nil, nil, tn, 0);
        break;
      }
      default: throw std::logic_error("split_signs: unexpected gate kind");
    }
    auto [wp, wn] = s.pm[g.w];
    E(GKind::Sub, tp, tn, wp);
    E(GKind::Sub, tn, tp, wn);
  }
  return s;
}

}  // namespace lowering

struct PlusTranslation {
  Rational m;                 // rescale factor
  Rational grid;              // rounding grid for G_xc constants
  Rational rho;               // additive error from rounding
  Rational K;                 // error factor: eps = rho + K eps'
  Rational eps;               // target accuracy on the GCircuit+ side
  Rational eps_prime;         // accuracy required on the GCircuit side
  Rational delta_prime;       // delta / max gates per original gate
  Rational clamp_slack;       // max excess of a decoded value beyond its bounds, in units of eps'
  std::vector<Rational> gate_factor;                       // per original gate
  std::vector<std::pair<std::size_t, std::size_t>> split;  // original variable -> (plus, minus)
  std::vector<std::size_t> gate_tag;                       // final gate -> original gate
  std::vector<std::size_t> stage_gate_counts;              // after stages 1..6
  std::vector<std::size_t> gates_per_original;
};

struct PlusLowering {
  GCircuitInstance gc;
  PlusTranslation map;
};

namespace detail {

/// Weighted path counts from every node to `target` inside the gates of one tag.
/// G_< edges are cut: its output does not depend continuously on its inputs.
inline std::map<std::size_t, Rational> gains_to(const std::vector<const lowering::TaggedGate*>& gates,
                                                std::size_t target) {
  std::map<std::size_t, const GGate*> producer;
  for (auto* tg : gates) producer[tg->g.w] = &tg->g;
  std::map<std::size_t, Rational> gain;
  // reverse topological order via DFS post-order from the target
  std::vector<std::size_t> order;
  std::map<std::size_t, int> state;
  std::vector<std::pair<std::size_t, bool>> st{{target, false}};
  while (!st.empty()) {
    auto [x, expanded] = st.back();
    st.pop_back();
    if (expanded) {
      order.push_back(x);
      continue;
    }
    if (state[x]) continue;
    state[x] = 1;
    st.push_back({x, true});
    auto it = producer.find(x);
    if (it == producer.end() || it->second->kind == GKind::Less) continue;
    for (auto y : {it->second->u, it->second->v})
      if (y != nil && !state[y]) st.push_back({y, false});
  }
  std::reverse(order.begin(), order.end());
  gain[target] = 1;
  for (auto x : order) {
    auto it = producer.find(x);
    if (it == producer.end() || it->second->kind == GKind::Less) continue;
    const GGate& g = *it->second;
    Rational gx = gain[x];
    if (gx == 0) continue;
    Rational coef = g.kind == GKind::Scale ? g.c : Rational(1);
    if (g.kind == GKind::Const) continue;
    if (g.u != nil) gain[g.u] += gx * coef;
    if (g.v != nil) gain[g.v] += gx * coef;
  }
  return gain;
}

}  // namespace detail

/// Lowers a GCircuit+ instance to GCircuit. An assignment satisfying every GCircuit gate at
/// map.eps_prime decodes (v = m (v+ - v-), clamped to bounds) to one satisfying every
/// GCircuit+ gate at eps. Requires eps < 1/8.
inline PlusLowering gcircuitplus_to_gcircuit(const GCircuitPlusInstance& gcp, const Rational& eps,
                                             const Rational& delta) {
  auto st = validate_gcircuitplus(gcp);
  if (!st.ok) throw std::invalid_argument("gcircuitplus_to_gcircuit: " + st.violations.front());
  if (eps <= 0 || eps >= Rational(1, 8)) throw std::invalid_argument("gcircuitplus_to_gcircuit: eps must lie in (0, 1/8)");
  using namespace lowering;
  PlusLowering out;
  PlusTranslation& tr = out.map;
  tr.eps = eps;
  Work w = from_instance(gcp);
  const std::size_t n0 = gcp.n;

  Rational B = rmax(Rational(1), max_abs_bound(gcp.bounds));
  // grid 2^-k with 2^k >= 2B/eps keeps rho <= eps/4
  Rational grid = 1;
  while (grid > eps / (2 * B)) grid /= 2;
  tr.grid = grid;
  tr.rho = round_constants(w, grid);
  tr.stage_gate_counts.push_back(w.gates.size());
  expand_scales(w);
  tr.stage_gate_counts.push_back(w.gates.size());
  expand_logic(w);
  tr.stage_gate_counts.push_back(w.gates.size());

  Rational m = rmax(Rational(1), max_abs_bound(w.bounds));
  m = rmax(m, rmax(rabs(gcp.L), rabs(gcp.U)));
  for (const auto& tg : w.gates)
    if (tg.g.kind == GKind::Const || tg.g.kind == GKind::Min || tg.g.kind == GKind::Max) m = rmax(m, rabs(tg.g.c));
  tr.m = m;
  rescale(w, m);
  tr.stage_gate_counts.push_back(w.gates.size());
  remove_minmax(w);
  tr.stage_gate_counts.push_back(w.gates.size());
  Split sp = split_signs(w);
  tr.stage_gate_counts.push_back(sp.out.gates.size());

  out.gc.n = sp.out.bounds.size();
  for (const auto& tg : sp.out.gates) {
    out.gc.gates.push_back(tg.g);
    tr.gate_tag.push_back(tg.tag);
  }
  for (std::size_t x = 0; x < n0; ++x) tr.split.push_back(sp.pm[x]);

  // ---- error factor by weighted path counting, per original gate
  const std::size_t T = gcp.gates.size();
  std::vector<std::vector<const TaggedGate*>> by_tag(T), wrap_by_tag(T);
  for (const auto& tg : sp.out.gates) {
    by_tag[tg.tag].push_back(&tg);
    if (tg.role == Role::Wrap) wrap_by_tag[tg.tag].push_back(&tg);
  }
  tr.gates_per_original.assign(T, 0);
  for (std::size_t t = 0; t < T; ++t) tr.gates_per_original[t] = by_tag[t].size();

  auto produced_in = [](const std::vector<const TaggedGate*>& gs) {
    std::map<std::size_t, bool> p;
    for (auto* g : gs) p[g->g.w] = true;
    return p;
  };
  // total gain (plus and minus side) over gate outputs and over external inputs
  struct GainSum {
    Rational gates = 0, inputs = 0;
  };
  auto gain_sum = [&](const std::vector<const TaggedGate*>& gs, const std::vector<std::size_t>& targets) {
    auto prod = produced_in(gs);
    GainSum s;
    for (auto target : targets) {
      auto gain = detail::gains_to(gs, target);
      for (const auto& [x, gx] : gain) {
        if (prod.count(x))
          s.gates += gx;
        else
          s.inputs += gx;
      }
    }
    return s;
  };

  // clamp slack: error accumulated inside the bound-enforcing wrapper of each variable
  Rational C = 0;
  for (std::size_t t = 0; t < T; ++t) {
    auto [wp, wn] = tr.split[gcp.gates[t].w];
    auto s = gain_sum(wrap_by_tag[t], {wp, wn});
    C = rmax(C, s.gates + s.inputs);
  }
  tr.clamp_slack = C;
  Rational K = 1;
  tr.gate_factor.assign(T, Rational(0));
  for (std::size_t t = 0; t < T; ++t) {
    auto [wp, wn] = tr.split[gcp.gates[t].w];
    auto s = gain_sum(by_tag[t], {wp, wn});
    Rational f = m * (s.gates + s.inputs * (1 + C));
    // comparison margins: 2m (1 + perturbation of u' - v')
    for (auto* tg : by_tag[t]) {
      if (tg->g.kind != GKind::Less) continue;
      auto s2 = gain_sum(by_tag[t], {tg->g.u, tg->g.v});
      Rational e = s2.gates + s2.inputs * (1 + C);
      f = rmax(f, 2 * m * (1 + e));
    }
    tr.gate_factor[t] = f;
    K = rmax(K, f);
  }
  tr.K = K;
  tr.eps_prime = (eps - tr.rho) / K;
  std::size_t mx = 1;
  for (auto c : tr.gates_per_original) mx = std::max(mx, c);
  tr.delta_prime = delta / Rational(static_cast<long>(mx));
  return out;
}

inline RealAssignment decode_split(const PlusTranslation& tr, const GCircuitPlusInstance& gcp,
                                   const RealAssignment& a) {
  RealAssignment out;
  for (std::size_t x = 0; x < gcp.n; ++x) {
    auto [p, n] = tr.split[x];
    out.push_back(clamp(tr.m * (a[p] - a[n]), gcp.bounds[x].lo, gcp.bounds[x].hi));
  }
  return out;
}

}  // namespace fmarket
