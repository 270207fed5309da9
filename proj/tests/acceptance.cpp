// Acceptance suite: one PASS/FAIL line per criterion with its runtime. Exit status 1 if any fails.

#include "fmarket/equivalence.hpp"
#include "fmarket/hardness.hpp"
#include "fmarket/oracles.hpp"
#include "fmarket/repair.hpp"
#include "support/circuits.hpp"
#include "support/gcplus_harness.hpp"
#include "support/markets.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

using namespace fmarket;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  std::string first_failure;

  void fail(const std::string& why) {
    if (pass) first_failure = why;
    pass = false;
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// ---------------------------------------------------------------- 1

Outcome demand_oracle() {
  Outcome o;
  std::mt19937_64 rng(101);
  // slopes and prices in [1/4, 4]
  const std::vector<Rational> values{Rational(1, 4), Rational(1, 2), Rational(3, 4), 1,     Rational(3, 2),
                                     2,              Rational(5, 2), 3,              Rational(7, 2), 4};
  const std::vector<Rational> lengths{Rational(1, 4), Rational(1, 2), 1, Rational(3, 2), 2};
  const std::vector<Rational> budgets{Rational(1, 2), 1, Rational(3, 2), 2};
  const Rational unit(1, 1000);
  Rational worst_gap = 0;
  for (int t = 0; t < 200; ++t) {
    Buyer b;
    b.budget = harness::pick_of(rng, budgets);
    const std::size_t goods = 1 + harness::below(rng, 3);
    PriceVector p;
    for (std::size_t j = 0; j < goods; ++j) {
      p.push_back(harness::pick_of(rng, values));
      bool unbounded = harness::below(rng, 2) == 0;
      b.utilities[j] = harness::random_utility(rng, 1 + harness::below(rng, 3), values, lengths, unbounded);
    }
    Rational greedy = optimal_bundle(b, p, b.budget).utility;
    Rational dp = dp_optimal_bundle(b, p, b.budget, unit);
    Rational bound = dp_discretization_bound(b, p, unit);
    if (greedy < dp) o.fail("market " + std::to_string(t) + ": greedy below DP");
    if (dp < greedy - bound) o.fail("market " + std::to_string(t) + ": DP outside the discretization bound");
    worst_gap = rmax(worst_gap, greedy - dp);
  }
  o.detail = "200 markets, max greedy-DP gap " + fmt(to_double(worst_gap));
  return o;
}

// ---------------------------------------------------------------- 2

Outcome gadget_audit() {
  Outcome o;
  std::mt19937_64 rng(202);
  auto hp = solve_params(Rational(1, 10), Rational(1, 2), HardnessMode::Pcp);
  std::size_t max_ratio_num = 0, max_ratio_den = 1, max_per_good = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 3 * (1 + harness::below(rng, 6));  // 3..18
    auto inst = harness::random_strict(rng, n);
    auto rm = reduce_pure_to_market(inst, hp);
    auto r = is_simple(rm.market, SimpleBounds{std::nullopt, 12, std::nullopt});
    if (!r.ok) o.fail("instance " + std::to_string(t) + ": " + r.violations.front());
    if (rm.market.num_buyers() > 8 * n) o.fail("instance " + std::to_string(t) + ": more than 8n buyers");
    if (rm.market.num_buyers() * max_ratio_den > max_ratio_num * n) {
      max_ratio_num = rm.market.num_buyers();
      max_ratio_den = n;
    }
    max_per_good = std::max(max_per_good, degrees(rm.market).max_buyers_per_good);
  }
  o.detail = "100 instances, max buyers/n " + fmt(double(max_ratio_num) / double(max_ratio_den)) +
             ", max buyers per good " + std::to_string(max_per_good);
  return o;
}

// ---------------------------------------------------------------- 3

Outcome gadget_semantics() {
  Outcome o;
  PureCircuitInstance inst{3, {purify_gate(0, 1, 2), nand_gate(1, 2, 0)}};
  auto hp = solve_params(Rational(1, 10), Rational(1, 2), HardnessMode::Pcp);
  auto rm = reduce_pure_to_market(inst, hp);
  const std::size_t budget = 1000000;
  std::size_t used = 0;
  SearchConfig cfg;
  cfg.max_evaluations = budget;
  // on failure: a finer seed grid, more seeds and another RNG stream
  for (int round = 0; round < 4 && used < budget; ++round) {
    cfg.max_evaluations = budget - used;
    auto r = search_equilibrium(rm.market, hp.eps_m, hp.delta_m, cfg);
    if (r) {
      used += r->evaluations;
      auto rep = verify_equilibrium(rm.market, r->p, r->x, hp.eps_m, hp.delta_m);
      auto a = decode_prices(r->p, rm.map, hp);
      if (!rep.accepted) {
        o.fail("returned candidate does not verify");
      } else if (satisfaction_fraction(inst, a) != 1) {
        o.fail("decoded assignment violates a gate");
      }
      std::ostringstream d;
      d << "delta_m " << fmt(to_double(hp.delta_m)) << ", " << used << " evaluations, refinements " << round
        << ", decode";
      for (auto t : a) d << " " << tern_name(t);
      o.detail = d.str();
      return o;
    }
    used = budget - std::min(budget, cfg.max_evaluations);
    cfg.random_seeds *= 2;
    cfg.rng_seed += 1;
    cfg.grid.clear();
    for (int k = 1; k <= 4 * (round + 2); ++k) cfg.grid.push_back(Rational(k, round + 2));
  }
  o.fail("no verified equilibrium within 10^6 evaluations");
  return o;
}

// ---------------------------------------------------------------- 4, 5

std::map<std::size_t, Tern> sorted_vector(const std::vector<std::size_t>& nodes, std::size_t ones, std::size_t bots) {
  std::map<std::size_t, Tern> f;
  const std::size_t M = nodes.size();
  for (std::size_t i = 0; i < M; ++i) f[nodes[i]] = i < M - ones - bots ? Tern::Zero : i < M - ones ? Tern::Bot : Tern::One;
  return f;
}

bool all_gates_hold(const PureCircuitInstance& inst, const TernaryAssignment& a) {
  for (const auto& g : inst.gates)
    if (!check_pure_gate(g, a)) return false;
  return true;
}

Outcome formatting_bound() {
  Outcome o;
  const std::size_t M = 7;
  PureBuilder b;
  auto r = b.nodes(M);
  auto tr = build_formatting_subgadget(b, r);
  std::size_t cases = 0;
  for (std::size_t bots = 0; bots <= 2; ++bots)
    for (std::size_t ones = 0; ones + bots <= M; ++ones) {
      ++cases;
      auto a = forward_simulate_pure(b.inst, sorted_vector(r, ones, bots));
      std::size_t W1 = count_ones(a, tr.outputs), Wb = count_bots(a, tr.outputs);
      std::string tag = "R1=" + std::to_string(ones) + " Rbot=" + std::to_string(bots);
      if (W1 < ones || W1 > ones + bots) o.fail(tag + ": W1=" + std::to_string(W1));
      if (Wb > 1) o.fail(tag + ": W_bot=" + std::to_string(Wb));
      if (!is_sorted_unary(a, tr.outputs)) o.fail(tag + ": output not sorted");
      if (!all_gates_hold(b.inst, a)) o.fail(tag + ": simulation violates a gate");
    }
  o.detail = std::to_string(cases) + " sorted inputs, M=7";
  return o;
}

struct Interval {
  Rational lo, hi;
};

Outcome gate_gadget_bounds() {
  Outcome o;
  const std::size_t M = 7;
  const Rational Mr(static_cast<long>(M));
  std::size_t cases = 0;
  auto run = [&](GKind k, const Rational& c, const std::function<std::optional<Interval>(long, long)>& want,
                 const std::string& name) {
    PureBuilder b;
    auto u = b.nodes(M), v = b.nodes(M);
    auto tr = build_gate_gadget(b, k, u, v, c, M);
    const bool binary = garity(k) >= 2;
    for (std::size_t U = 0; U <= M; ++U)
      for (std::size_t V = 0; V <= (binary ? M : 0); ++V) {
        auto f = sorted_vector(u, U, 0);
        auto g = sorted_vector(v, V, 0);
        f.insert(g.begin(), g.end());
        auto a = forward_simulate_pure(b.inst, f);
        ++cases;
        std::string tag = name + " U1=" + std::to_string(U) + " V1=" + std::to_string(V);
        if (!all_gates_hold(b.inst, a)) o.fail(tag + ": simulation violates a gate");
        auto iv = want(static_cast<long>(U), static_cast<long>(V));
        if (!iv) continue;
        Rational W1(static_cast<long>(count_ones(a, tr.outputs)));
        if (W1 < iv->lo || W1 > iv->hi)
          o.fail(tag + ": W1=" + to_string(W1) + " outside [" + to_string(iv->lo) + ", " + to_string(iv->hi) + "]");
      }
  };
  auto L = [](long x) { return Rational(x); };
  const long m = static_cast<long>(M);
  run(GKind::Add, 0, [&](long U, long V) { Rational t = L(std::min(U + V, m)); return Interval{t - 2, t + 4}; }, "G_+");
  run(GKind::Sub, 0, [&](long U, long V) { Rational t = L(std::max(U - V, 0L)); return Interval{t - 2, t + 3}; }, "G_-");
  for (long k = 0; k <= m; ++k) {
    Rational c(k, m);
    run(GKind::Scale, c, [&](long U, long) { Rational t = rmin(c * U, Mr); return Interval{t - 2, t + 3}; },
        "G_x" + to_string(c));
  }
  run(GKind::Not, 0, [&](long U, long) { return Interval{L(m - U - 1), L(m - U + 1)}; }, "G_not");
  run(GKind::Copy, 0, [&](long U, long) { return Interval{L(U - 2), L(U + 2)}; }, "G_=");
  run(GKind::Or, 0, [&](long U, long V) { Rational t = L(std::max(U, V)); return Interval{t, t + 4}; }, "G_or");
  run(GKind::And, 0, [&](long U, long V) { Rational t = L(std::min(U, V)); return Interval{t, t + 4}; }, "G_and");
  run(GKind::Less, 0,
      [&](long U, long V) -> std::optional<Interval> {
        if (U <= V - 7) return Interval{Mr, Mr};
        if (U >= V) return Interval{0, 0};
        return std::nullopt;
      },
      "G_<");
  o.detail = std::to_string(cases) + " input pairs over 15 gadgets, M=7";
  return o;
}

// ---------------------------------------------------------------- 6

Outcome repair_pipeline() {
  Outcome o;
  std::mt19937_64 rng(606);
  const Rational eps_c(1, 20), delta_c(1, 400);
  int cases = 0, generated = 0;
  std::size_t rounds = 0, replaced = 0;
  Rational worst_ratio = 1, worst_cert = 1;
  while (cases < 50 && generated < 5000) {
    ++generated;
    Market raw = harness::random_reducible_market(rng, 4, 4, 2);
    auto rp = measure_reducible(raw);
    rp.require_unsatiated = true;
    if (!is_reducible(raw, rp).ok) continue;
    const Market m = preprocess_reducible(raw, Rational(1, 10)).market;
    if (m.num_goods() == 0) continue;
    auto s = search_equilibrium(m, Rational(1, 100), Rational(1, 100));
    if (!s) continue;
    ++cases;
    std::string tag = "case " + std::to_string(cases);
    ConstantLedger L = make_ledger(m, eps_c, delta_c);
    Allocation x = s->x;
    // one broken buyer
    const std::size_t i0 = harness::below(rng, m.num_buyers());
    {
      const Buyer& b = m.buyers[i0];
      std::vector<Rational> row(m.num_goods(), Rational(0));
      std::size_t last = b.utilities.rbegin()->first;
      row[last] = b.budget / s->p[last];
      if (optimality_ratio(b, s->p, row) < L.broken_threshold())
        x[i0] = row;
      else
        for (auto& v : x[i0]) v /= 2;
    }
    // one good off by eps_c units: another buyer moves that much money elsewhere
    const std::size_t j0 = harness::below(rng, m.num_goods());
    for (std::size_t i = 0; i < m.num_buyers(); ++i) {
      if (i == i0 || x[i][j0] <= 0 || m.buyers[i].utilities.size() < 2) continue;
      std::size_t j1 = j0;
      for (const auto& [j, u] : m.buyers[i].utilities)
        if (j != j0) j1 = j;
      Rational units = rmin(x[i][j0], eps_c);
      x[i][j0] -= units;
      x[i][j1] += units * s->p[j0] / s->p[j1];
      break;
    }
    RepairTrace tr;
    RepairOutcome out;
    try {
      out = repair_steps(m, s->p, x, L, &tr);
    } catch (const std::exception& e) {
      o.fail(tag + ": " + e.what());
      continue;
    }
    for (const auto& v : tr.violations) o.fail(tag + ": " + v);
    auto rep = verify_equilibrium(m, out.p, out.x, 0, 1 - *out.ledger.g2_cert());
    if (!rep.accepted || rep.min_eps != 0) o.fail(tag + ": output does not verify at eps = 0");
    for (const auto& g : rep.goods)
      if (g.demand != 1) o.fail(tag + ": demand " + to_string(g.demand) + " differs from 1");
    for (const auto& b : rep.buyers) {
      if (b.ratio < *out.ledger.g2_cert()) o.fail(tag + ": buyer below the certified g''");
      worst_ratio = rmin(worst_ratio, b.ratio);
    }
    worst_cert = rmin(worst_cert, *out.ledger.g2_cert());
    rounds = std::max(rounds, out.ledger.rounds);
    replaced += out.replaced.size();
  }
  if (cases < 50) o.fail("only " + std::to_string(cases) + " searchable markets generated");
  o.detail = std::to_string(cases) + " markets, min buyer ratio " + fmt(to_double(worst_ratio)) + ", min certified g'' " +
             fmt(to_double(worst_cert)) + ", max pump rounds " + std::to_string(rounds) + ", Step-2 replacements " +
             std::to_string(replaced);
  return o;
}

// ---------------------------------------------------------------- 7

Outcome plus_lowering() {
  Outcome o;
  std::mt19937_64 rng(707);
  const Rational eps(1, 10);
  for (int t = 0; t < 20; ++t) {
    auto gcp = harness::random_gcircuitplus(rng, 1 + harness::below(rng, 5));
    std::string tag = "instance " + std::to_string(t);
    if (!validate_gcircuitplus(gcp).ok) {
      o.fail(tag + ": generator produced an invalid instance");
      continue;
    }
    auto low = gcircuitplus_to_gcircuit(gcp, eps, Rational(1, 10));
    if (!validate_gcircuit(low.gc).ok) o.fail(tag + ": output is not a plain GCircuit");
    for (int rep = 0; rep < 5; ++rep) {
      auto a = harness::perturbed_run(low.gc, low.map.eps_prime, rng);
      if (gcircuit_satisfied_fraction(low.gc, a, low.map.eps_prime) != 1) o.fail(tag + ": GCircuit checker rejects");
      auto d = decode_split(low.map, gcp, a);
      for (std::size_t g = 0; g < gcp.gates.size(); ++g)
        if (!check_gcircuitplus_gate(gcp.gates[g], gcp.bounds, d, eps))
          o.fail(tag + ": GCircuit+ checker rejects gate " + std::to_string(g));
    }
  }
  o.detail = "20 instances, 5 perturbed runs each";
  return o;
}

// ---------------------------------------------------------------- 8

Outcome exchange_transfer() {
  Outcome o;
  std::mt19937_64 rng(808);
  int cases = 0, generated = 0, accepted = 0, rejected = 0;
  const std::vector<std::pair<Rational, Rational>> tolerances{
      {Rational(1, 100), Rational(1, 100)}, {Rational(1, 1000), Rational(1, 1000)}, {0, 0}};
  while (cases < 20 && generated < 2000) {
    ++generated;
    Market m = harness::random_simple_market(rng, 4, 4);
    if (m.num_goods() == 0 || m.num_goods() > 5 || !is_simple(m).ok) continue;
    auto s = search_equilibrium(m, Rational(1, 100), Rational(1, 100));
    if (!s) continue;
    ++cases;
    auto em = fisher_to_exchange(m);
    auto pn = normalize_prices(s->p, Rational(static_cast<long>(m.num_buyers())));
    // the searched allocation, and a copy where one buyer spends only half its budget
    Allocation half = s->x;
    for (auto& v : half[harness::below(rng, m.num_buyers())]) v /= 2;
    for (const Allocation* x : {&s->x, &half})
      for (const auto& [e, d] : tolerances) {
        auto fr = verify_equilibrium(m, s->p, *x, e, d);
        auto er = verify_exchange_equilibrium(em, pn, *x, e, d);
        accepted += fr.accepted;
        rejected += !fr.accepted;
        if (fr.accepted != er.accepted)
          o.fail("case " + std::to_string(cases) + ": verdicts differ at eps " + to_string(e));
      }
  }
  if (cases < 20) o.fail("only " + std::to_string(cases) + " searchable markets generated");
  o.detail = std::to_string(cases) + " markets x 2 allocations x 3 tolerances, " + std::to_string(accepted) + " accepted, " +
             std::to_string(rejected) + " rejected, verdicts identical";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all{
      {1, "demand oracle vs DP", 10, demand_oracle},
      {2, "gadget structural audit", 5, gadget_audit},
      {3, "gadget market semantics", 600, gadget_semantics},
      {4, "formatting sub-gadget bound", 30, formatting_bound},
      {5, "gate-gadget decoded bounds", 120, gate_gadget_bounds},
      {6, "repair pipeline end to end", 60, repair_pipeline},
      {7, "GCircuit+ lowering", 5, plus_lowering},
      {8, "exchange transfer", 10, exchange_transfer},
  };
  int failed = 0;
  for (const auto& c : all) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.limit_s) o.fail("runtime over the " + fmt(c.limit_s) + " s limit");
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << c.id << "  " << c.name << "  " << fmt(secs) << " s (limit "
              << fmt(c.limit_s) << " s)  " << o.detail;
    if (!o.pass) std::cout << "  first failure: " << o.first_failure;
    std::cout << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
