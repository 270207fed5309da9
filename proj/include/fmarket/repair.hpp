#pragma once

#include "fmarket/circuit.hpp"
#include "fmarket/flow.hpp"
#include "fmarket/market.hpp"

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fmarket {

struct RoundLimitExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotReducible : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct LedgerEntry {
  std::string name;
  Rational value;
  std::string note;
};

/// Concrete constants of the repair pipeline. The symbolic functions use c; the
/// certified ones use losses measured while running.
struct ConstantLedger {
  std::size_t d = 1;
  std::size_t max_segments = 0;
  Rational e_min = 1, e_max = 1, kappa = 1;
  Rational c2 = 1, c3 = 2, c = 3;
  Rational eps_c, delta_c;
  Rational P_min, P_max;

  std::optional<Rational> g_cert, f_cert;
  std::size_t rounds = 0, round_ceiling = 0, shift_iterations = 0;
  std::size_t gates_per_buyer = 0, gates_per_good = 0;

  Rational window_ratio() const { return 1 + c3 * eps_c; }
  Rational pump_factor() const { return 1 + eps_c; }
  Rational burn_cap() const { return eps_c; }
  Rational over_threshold() const { return 1 + c2 * eps_c; }
  Rational under_threshold() const { return 1 - c * eps_c; }
  Rational broken_threshold() const { return 1 - c * eps_c; }

  Rational f() const { return c * eps_c + c * (delta_c / eps_c); }
  Rational g() const { return (1 - c * (delta_c / eps_c)) * (1 - c * eps_c); }
  Rational g1() const { return (1 - f()) / (1 + f()) * g(); }
  Rational g2() const { return (1 - f()) / (1 + f()) * g1(); }

  std::optional<Rational> g1_cert() const {
    if (!g_cert || !f_cert) return std::nullopt;
    return (1 - *f_cert) / (1 + *f_cert) * *g_cert;
  }
  std::optional<Rational> g2_cert() const {
    auto a = g1_cert();
    if (!a) return std::nullopt;
    return (1 - *f_cert) / (1 + *f_cert) * *a;
  }

  std::vector<LedgerEntry> entries() const {
    std::vector<LedgerEntry> out{
        {"d", Rational(Integer(d)), "max goods per buyer and buyers per good"},
        {"e_min", e_min, "smallest budget"},
        {"e_max", e_max, "largest budget"},
        {"kappa", kappa, "largest slope"},
        {"max_segments", Rational(Integer(max_segments)), "segments per utility"},
        {"c2", c2, "over-clearing threshold 1 + c2*eps_c"},
        {"c3", c3, "window ratio 1 + c3*eps_c, must exceed the pump factor"},
        {"c", c, "c3 + 1/e_min; also the Step-2 and Step-4 thresholds 1 - c*eps_c"},
        {"eps_c", eps_c, "burn cap"},
        {"delta_c", delta_c, ""},
        {"window_ratio", window_ratio(), ""},
        {"pump_factor", pump_factor(), ""},
        {"P_min", P_min, "e_min/(8 d kappa)"},
        {"P_max", P_max, "2 d e_max"},
        {"f", f(), "c eps_c + c delta_c/eps_c"},
        {"g", g(), "(1 - c delta_c/eps_c)(1 - c eps_c)"},
        {"g1", g1(), "(1-f)/(1+f) g"},
        {"g2", g2(), "(1-f)/(1+f) g1"},
        {"round_ceiling", Rational(Integer(round_ceiling)), "pump rounds allowed before RoundLimitExceeded"},
        {"rounds", Rational(Integer(rounds)), "pump rounds used"},
        {"shift_iterations", Rational(Integer(shift_iterations)), "shift-and-burn iterations used"},
        {"gates_per_buyer", Rational(Integer(gates_per_buyer)), "encoding gates owned by one buyer, worst case"},
        {"gates_per_good", Rational(Integer(gates_per_good)), "encoding gates owned by one good, worst case"},
    };
    if (g_cert) out.push_back({"g_cert", *g_cert, "measured optimality bound at Step-5 entry"});
    if (f_cert) out.push_back({"f_cert", *f_cert, "measured clearing deviation at Step-5 entry"});
    if (auto a = g1_cert()) out.push_back({"g1_cert", *a, ""});
    if (auto a = g2_cert()) out.push_back({"g2_cert", *a, "certified final optimality ratio"});
    return out;
  }
};

inline ConstantLedger make_ledger(const Market& m, const Rational& eps_c, const Rational& delta_c) {
  if (eps_c <= 0 || eps_c >= 1) throw std::invalid_argument("make_ledger: eps_c must lie in (0,1)");
  if (delta_c < 0) throw std::invalid_argument("make_ledger: delta_c must be non-negative");
  ReducibleParams rp = measure_reducible(m);
  ConstantLedger L;
  L.d = rp.d;
  L.max_segments = rp.max_segments;
  L.e_min = rp.e_min;
  L.e_max = rp.e_max;
  L.kappa = rp.kappa;
  L.c = L.c3 + 1 / L.e_min;
  L.eps_c = eps_c;
  L.delta_c = delta_c;
  L.P_min = L.e_min / (8 * Rational(Integer(L.d)) * L.kappa);
  L.P_max = 2 * Rational(Integer(L.d)) * L.e_max;
  return L;
}

// ---------------------------------------------------------------------------
// Step 1: GCircuit+ encoding

struct SpendVar {
  std::size_t buyer, good, seg, var;
};

struct GCPlusEncoding {
  GCircuitPlusInstance gc;
  std::vector<std::size_t> price_var;  // per good
  std::vector<SpendVar> spend_vars;
  std::vector<std::size_t> segment_count;  // M_i
  std::size_t comparator_count = 0;
  Rational P_min, P_max, eps_c;
  std::vector<std::size_t> gates_per_buyer, gates_per_good;

  std::optional<std::size_t> spend_var(std::size_t i, std::size_t j, std::size_t k) const {
    for (const auto& s : spend_vars)
      if (s.buyer == i && s.good == j && s.seg == k) return s.var;
    return std::nullopt;
  }
};

namespace detail {

struct EncBuilder {
  GCircuitPlusInstance& gc;
  Rational eps;

  std::size_t var(Rational lo, Rational hi) {
    gc.bounds.push_back({std::move(lo), std::move(hi)});
    return gc.n++;
  }
  void gate(GKind k, std::size_t u, std::size_t v, std::size_t w, Rational c = 0) {
    gc.gates.push_back({k, u, v, w, std::move(c)});
  }
  const VarBounds& b(std::size_t x) const { return gc.bounds[x]; }

  std::size_t constant(const Rational& c) {
    std::size_t w = var(c - eps, c + eps);
    gate(GKind::Const, nil, nil, w, c);
    return w;
  }
  std::size_t add(std::size_t u, std::size_t v) {
    std::size_t w = var(b(u).lo + b(v).lo - eps, b(u).hi + b(v).hi + eps);
    gate(GKind::Add, u, v, w);
    return w;
  }
  std::size_t sub(std::size_t u, std::size_t v) {
    std::size_t w = var(b(u).lo - b(v).hi - eps, b(u).hi - b(v).lo + eps);
    gate(GKind::Sub, u, v, w);
    return w;
  }
  std::size_t scale(std::size_t u, const Rational& c) {
    Rational a = b(u).lo * c, z = b(u).hi * c;
    std::size_t w = var(rmin(a, z) - eps, rmax(a, z) + eps);
    gate(GKind::Scale, u, nil, w, c);
    return w;
  }
  std::size_t less(std::size_t u, std::size_t v) {
    std::size_t w = var(0, 1);
    gate(GKind::Less, u, v, w);
    return w;
  }
  std::size_t max0(std::size_t u) {
    std::size_t w = var(rmax(b(u).lo, 0) - eps, rmax(b(u).hi, 0) + eps);
    gate(GKind::Max, u, nil, w, 0);
    return w;
  }
  std::size_t sum(const std::vector<std::size_t>& xs) {
    if (xs.empty()) return constant(0);
    std::size_t acc = xs[0];
    for (std::size_t t = 1; t < xs.size(); ++t) acc = add(acc, xs[t]);
    return acc;
  }
};

}  // namespace detail

/// Builds the Step-1 constraint system. Sums run over positive-slope segments only.
inline GCPlusEncoding encode_market(const Market& m, const Rational& eps_c) {
  if (eps_c <= 0) throw std::invalid_argument("encode_market: eps_c must be positive");
  ReducibleParams rp = measure_reducible(m);
  auto rep = is_reducible(m, rp);
  if (!rep.ok) throw NotReducible("encode_market: " + (rep.violations.empty() ? std::string("not reducible") : rep.violations[0]));
  GCPlusEncoding enc;
  enc.eps_c = eps_c;
  enc.P_min = rp.e_min / (8 * Rational(Integer(rp.d)) * rp.kappa);
  enc.P_max = 2 * Rational(Integer(rp.d)) * rp.e_max;
  auto& gc = enc.gc;
  detail::EncBuilder B{gc, eps_c};

  for (std::size_t j = 0; j < m.num_goods(); ++j) enc.price_var.push_back(B.var(enc.P_min, enc.P_max));
  std::vector<std::vector<std::size_t>> per_buyer(m.num_buyers()), per_good(m.num_goods());
  for (std::size_t i = 0; i < m.num_buyers(); ++i) {
    for (const auto& [j, u] : m.buyers[i].utilities)
      for (std::size_t k = 0; k < u.size(); ++k) {
        if (u[k].slope <= 0) continue;
        if (u[k].infinite()) throw NotReducible("encode_market: infinite segment; apply preprocess_reducible first");
        std::size_t q = B.var(0, *u[k].length * enc.P_max);
        per_buyer[i].push_back(enc.spend_vars.size());
        per_good[j].push_back(q);
        enc.spend_vars.push_back({i, j, k, q});
      }
    enc.segment_count.push_back(per_buyer[i].size());
  }

  for (std::size_t j = 0; j < m.num_goods(); ++j) {
    std::size_t before = gc.gates.size();
    std::size_t s = B.sum(per_good[j]);
    std::size_t dj = B.sub(s, enc.price_var[j]);
    B.gate(GKind::Add, enc.price_var[j], dj, enc.price_var[j]);
    enc.gates_per_good.push_back(gc.gates.size() - before);
  }

  for (std::size_t i = 0; i < m.num_buyers(); ++i) {
    std::size_t before = gc.gates.size();
    const Buyer& b = m.buyers[i];
    const auto& segs = per_buyer[i];
    std::vector<std::size_t> qs;
    for (auto t : segs) qs.push_back(enc.spend_vars[t].var);
    std::size_t total = B.sum(qs);
    std::size_t e = B.constant(b.budget);
    std::size_t one = B.constant(1);
    std::size_t bi = B.sub(B.scale(B.less(total, e), 2), one);
    std::size_t weighted = B.scale(bi, Rational(Integer(segs.size() + 1)));
    for (std::size_t a = 0; a < segs.size(); ++a) {
      const auto& sa = enc.spend_vars[segs[a]];
      const Rational& s1 = b.utilities.at(sa.good)[sa.seg].slope;
      std::vector<std::size_t> terms;
      for (std::size_t z = 0; z < segs.size(); ++z) {
        if (z == a) continue;
        const auto& sz = enc.spend_vars[segs[z]];
        const Rational& s2 = b.utilities.at(sz.good)[sz.seg].slope;
        std::size_t lhs = B.scale(enc.price_var[sz.good], s1);
        std::size_t rhs = B.scale(enc.price_var[sa.good], s2);
        std::size_t cmp = B.sub(B.scale(B.less(lhs, rhs), 2), one);
        terms.push_back(B.max0(cmp));
        ++enc.comparator_count;
      }
      terms.push_back(weighted);
      std::size_t g = B.sum(terms);
      std::size_t t1 = B.add(sa.var, g);
      std::size_t cap = B.scale(enc.price_var[sa.good], *b.utilities.at(sa.good)[sa.seg].length);
      std::size_t over = B.var(0, rmax(B.b(t1).hi - B.b(cap).lo, 0) + eps_c);
      B.gate(GKind::Sub, t1, cap, over);
      std::size_t capped = B.sub(t1, over);
      B.gate(GKind::Max, capped, nil, sa.var, 0);
    }
    enc.gates_per_buyer.push_back(gc.gates.size() - before);
  }

  gc.L = -1;
  gc.U = 1;
  for (const auto& bd : gc.bounds) {
    gc.L = rmin(gc.L, bd.lo);
    gc.U = rmax(gc.U, bd.hi);
  }
  gc.b = 0;
  for (const auto& g : gc.gates) {
    gc.L = rmin(gc.L, g.c);
    gc.U = rmax(gc.U, g.c);
    gc.b = rmax(gc.b, rabs(g.c));
  }
  return enc;
}

/// Gate count of one buyer block for M positive segments (matches encode_market).
inline std::size_t buyer_gate_bound(std::size_t M) {
  std::size_t sum_gates = M == 0 ? 1 : M - 1;
  std::size_t per_seg = M == 0 ? 0 : 6 * (M - 1) + (M - 1) + 5;
  return sum_gates + 6 + M * per_seg;
}

/// Gate count of one good block with r interested positive segments.
inline std::size_t good_gate_bound(std::size_t r) { return (r == 0 ? 1 : r - 1) + 2; }

// ---------------------------------------------------------------------------
// Slot model: every segment plus one unbounded zero-slope overflow slot per good.

namespace detail {

inline const SplcUtility* util_of(const Buyer& b, std::size_t j) {
  auto it = b.utilities.find(j);
  return it == b.utilities.end() ? nullptr : &it->second;
}

inline std::size_t real_segs(const Buyer& b, std::size_t j) {
  auto u = util_of(b, j);
  return u ? u->size() : 0;
}

inline Rational slot_slope(const Buyer& b, const SegmentRef& s) {
  auto u = util_of(b, s.good);
  return u && s.seg < u->size() ? (*u)[s.seg].slope : Rational(0);
}

inline std::optional<Rational> slot_len(const Buyer& b, const SegmentRef& s) {
  auto u = util_of(b, s.good);
  if (u && s.seg < u->size()) return (*u)[s.seg].length;
  return std::nullopt;
}

using SlotMoney = std::vector<std::vector<Rational>>;  // [good][slot]

inline SlotMoney to_slots(const Buyer& b, const std::vector<Rational>& row, const PriceVector& p) {
  SlotMoney out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) {
    std::size_t K = real_segs(b, j);
    out[j].assign(K + 1, Rational(0));
    Rational left = row[j];
    for (std::size_t k = 0; k < K && left > 0; ++k) {
      auto len = slot_len(b, {j, k});
      Rational take = len ? rmin(left, *len) : left;
      out[j][k] = take * p[j];
      left -= take;
    }
    if (left > 0) out[j][K] = left * p[j];
  }
  return out;
}

inline std::vector<Rational> from_slots(const SlotMoney& s, const PriceVector& p) {
  std::vector<Rational> row(s.size(), Rational(0));
  for (std::size_t j = 0; j < s.size(); ++j) {
    Rational money = 0;
    for (const auto& v : s[j]) money += v;
    row[j] = money / p[j];
  }
  return row;
}

inline Rational slots_total(const SlotMoney& s) {
  Rational t = 0;
  for (const auto& g : s)
    for (const auto& v : g) t += v;
  return t;
}

/// All slots in decreasing bang-per-buck order, ties by (good, slot).
inline std::vector<SegmentRef> slot_order(const Buyer& b, const PriceVector& p) {
  std::vector<SegmentRef> out;
  for (std::size_t j = 0; j < p.size(); ++j)
    for (std::size_t k = 0; k <= real_segs(b, j); ++k) out.push_back({j, k});
  std::sort(out.begin(), out.end(), [&](const SegmentRef& x, const SegmentRef& y) {
    return bpb_before(x, slot_slope(b, x), p[x.good], y, slot_slope(b, y), p[y.good]);
  });
  return out;
}

inline Rational slot_bpb(const Buyer& b, const SegmentRef& s, const PriceVector& p) {
  return slot_slope(b, s) / p[s.good];
}

inline bool slot_full(const Buyer& b, const SegmentRef& s, const SlotMoney& money, const PriceVector& p) {
  auto len = slot_len(b, s);
  return len && money[s.good][s.seg] >= p[s.good] * *len;
}

inline Rational slot_room(const Buyer& b, const SegmentRef& s, const SlotMoney& money, const PriceVector& p,
                          const Rational& big) {
  auto len = slot_len(b, s);
  return len ? p[s.good] * *len - money[s.good][s.seg] : big;
}

inline Rational marginal_from_slots(const Buyer& b, const SlotMoney& money, const PriceVector& p) {
  for (const auto& s : slot_order(b, p))
    if (!slot_full(b, s, money, p)) return slot_bpb(b, s, p);
  return 0;
}

inline std::size_t fallback_good(const Buyer& b) { return b.utilities.empty() ? 0 : b.utilities.begin()->first; }

/// Removes `amount` money worst-bang-per-buck first; skip(j) excludes goods. Returns what was removed.
inline Rational remove_worst_first(const Buyer& b, SlotMoney& money, const PriceVector& p, Rational amount,
                                   const std::function<bool(std::size_t)>& skip = {}) {
  Rational removed = 0;
  auto order = slot_order(b, p);
  for (auto it = order.rbegin(); it != order.rend() && amount > 0; ++it) {
    if (skip && skip(it->good)) continue;
    Rational& v = money[it->good][it->seg];
    Rational take = rmin(v, amount);
    v -= take;
    amount -= take;
    removed += take;
  }
  return removed;
}

/// Adds money best-bang-per-buck first over positive slopes; leftover goes to overflow.
inline void add_best_first(const Buyer& b, SlotMoney& money, const PriceVector& p, Rational amount) {
  for (const auto& s : slot_order(b, p)) {
    if (amount <= 0) return;
    if (slot_slope(b, s) <= 0) continue;
    auto len = slot_len(b, s);
    Rational take = len ? rmin(amount, p[s.good] * *len - money[s.good][s.seg]) : amount;
    if (take <= 0) continue;
    money[s.good][s.seg] += take;
    amount -= take;
  }
  if (amount > 0) {
    std::size_t j = fallback_good(b);
    money[j].back() += amount;
  }
}

inline void check_positive_prices(const PriceVector& p, const char* who) {
  for (const auto& v : p)
    if (v <= 0) throw std::invalid_argument(std::string(who) + ": prices must be positive");
}

}  // namespace detail

/// Adds money greedily or removes it worst-first until the row spends exactly `budget`.
inline std::vector<Rational> adjust_to_budget(const Buyer& b, const PriceVector& p, const std::vector<Rational>& row,
                                              const Rational& budget) {
  auto money = detail::to_slots(b, row, p);
  Rational spend = detail::slots_total(money);
  if (spend < budget) detail::add_best_first(b, money, p, budget - spend);
  if (spend > budget) detail::remove_worst_first(b, money, p, spend - budget);
  return detail::from_slots(money, p);
}

/// Greedy optimum that spends the whole budget (surplus of a satiated buyer sits on its first good).
inline std::vector<Rational> full_budget_bundle(const Buyer& b, const PriceVector& p, const Rational& budget) {
  return adjust_to_budget(b, p, std::vector<Rational>(p.size(), Rational(0)), budget);
}

struct DecodedSolution {
  PriceVector p;
  Allocation x;
  SpendingProfile spend;
};

inline DecodedSolution decode_gcplus_solution(const Market& m, const GCPlusEncoding& enc, const RealAssignment& sol) {
  if (sol.size() != enc.gc.n) throw std::invalid_argument("decode_gcplus_solution: assignment length mismatch");
  DecodedSolution out;
  for (std::size_t j = 0; j < m.num_goods(); ++j) {
    std::size_t v = enc.price_var[j];
    out.p.push_back(clamp(sol[v], enc.gc.bounds[v].lo, enc.gc.bounds[v].hi));
  }
  out.x = zero_allocation(m);
  for (const auto& s : enc.spend_vars) {
    Rational q = clamp(sol[s.var], 0, enc.gc.bounds[s.var].hi);
    out.x[s.buyer][s.good] += q / out.p[s.good];
  }
  for (std::size_t i = 0; i < m.num_buyers(); ++i)
    out.x[i] = adjust_to_budget(m.buyers[i], out.p, out.x[i], m.buyers[i].budget);
  out.spend = spending_profile(m, out.p, out.x);
  return out;
}

/// utility / optimum at p with the buyer's own budget; 1 when the optimum is 0.
inline Rational optimality_ratio(const Buyer& b, const PriceVector& p, const std::vector<Rational>& row) {
  Rational opt = optimal_bundle(b, p, b.budget).utility;
  if (opt == 0) return 1;
  return rmin(Rational(1), bundle_utility(b, row) / opt);
}

// ---------------------------------------------------------------------------
// Step 2

/// Total quantity of each good.
inline std::vector<Rational> demands(const Allocation& x, std::size_t goods) {
  std::vector<Rational> d(goods, Rational(0));
  for (const auto& row : x)
    for (std::size_t j = 0; j < goods; ++j) d[j] += row[j];
  return d;
}


/// Spends the whole budget: slots more than a factor (1 + tau) above the marginal bang-per-buck
/// are bought fully, and the rest goes to slots within that factor either way, first up to
/// `room` money per good. Utility is at least opt / (1 + tau)^2.
inline std::vector<Rational> placed_bundle(const Buyer& b, const PriceVector& p, const Rational& tau,
                                           std::vector<Rational> room) {
  auto order = detail::slot_order(b, p);
  std::vector<SegmentRef> pos;
  for (const auto& s : order)
    if (detail::slot_slope(b, s) > 0) pos.push_back(s);
  Rational left = b.budget, alpha = 0;
  bool runs_out = false;
  for (const auto& s : pos) {
    alpha = detail::slot_bpb(b, s, p);
    auto len = detail::slot_len(b, s);
    if (!len || p[s.good] * *len >= left) {
      runs_out = true;
      break;
    }
    left -= p[s.good] * *len;
  }
  if (!runs_out) return full_budget_bundle(b, p, b.budget);
  detail::SlotMoney money(p.size());
  for (std::size_t j = 0; j < p.size(); ++j) money[j].assign(detail::real_segs(b, j) + 1, Rational(0));
  left = b.budget;
  std::vector<SegmentRef> flex;
  for (const auto& s : pos) {
    Rational bpb = detail::slot_bpb(b, s, p);
    if (bpb > alpha * (1 + tau)) {
      Rational cost = p[s.good] * *detail::slot_len(b, s);
      money[s.good][s.seg] = cost;
      room[s.good] -= cost;
      left -= cost;
    } else if (bpb * (1 + tau) >= alpha) {
      flex.push_back(s);
    }
  }
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& s : flex) {
      if (left <= 0) break;
      Rational take = detail::slot_room(b, s, money, p, left);
      if (pass == 0) take = rmin(take, rmax(Rational(0), room[s.good]));
      take = rmin(take, left);
      if (take <= 0) continue;
      money[s.good][s.seg] += take;
      room[s.good] -= take;
      left -= take;
    }
  if (left > 0) detail::add_best_first(b, money, p, left);
  return detail::from_slots(money, p);
}


/// Replaces every buyer below ratio theta or off budget by a placed_bundle that steers its
/// near-marginal money toward goods the other buyers leave short.
inline Allocation fix_broken_buyers(const Market& m, const PriceVector& p, const Allocation& x, const Rational& theta,
                                    std::vector<std::size_t>* replaced = nullptr, const Rational& tau = 0) {
  if (theta <= 0 || theta > 1) throw std::invalid_argument("fix_broken_buyers: theta must lie in (0,1]");
  detail::check_positive_prices(p, "fix_broken_buyers");
  Allocation out = x;
  for (std::size_t i = 0; i < m.num_buyers(); ++i) {
    const Buyer& b = m.buyers[i];
    if (optimality_ratio(b, p, x[i]) >= theta && row_spend(x[i], p) == b.budget) continue;
    auto D = demands(out, p.size());
    std::vector<Rational> room(p.size());
    for (std::size_t j = 0; j < p.size(); ++j) room[j] = p[j] * rmax(Rational(0), 1 - (D[j] - out[i][j]));
    out[i] = placed_bundle(b, p, tau, std::move(room));
    if (replaced) replaced->push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Step 3

struct Window {
  Rational lo, hi;
};

inline Rational marginal_bpb(const Buyer& b, const PriceVector& p, const std::vector<Rational>& row) {
  detail::check_positive_prices(p, "marginal_bpb");
  return detail::marginal_from_slots(b, detail::to_slots(b, row, p), p);
}

inline Window window(const Buyer& b, const PriceVector& p, const std::vector<Rational>& row, const Rational& c3,
                     const Rational& eps_c) {
  Rational mb = marginal_bpb(b, p, row);
  return {mb / (1 + c3 * eps_c), mb};
}

/// No money on any slot whose bang-per-buck lies strictly below the window.
inline bool buyer_invariant(const Buyer& b, const PriceVector& p, const std::vector<Rational>& row, const Rational& c3,
                            const Rational& eps_c) {
  auto money = detail::to_slots(b, row, p);
  Rational lo = detail::marginal_from_slots(b, money, p) / (1 + c3 * eps_c);
  for (const auto& s : detail::slot_order(b, p))
    if (money[s.good][s.seg] > 0 && detail::slot_bpb(b, s, p) < lo) return false;
  return true;
}

inline bool check_invariant(const Market& m, const PriceVector& p, const Allocation& x, const Rational& c3,
                            const Rational& eps_c) {
  for (std::size_t i = 0; i < m.num_buyers(); ++i)
    if (!buyer_invariant(m.buyers[i], p, x[i], c3, eps_c)) return false;
  return true;
}

inline Allocation establish_invariant(const Market& m, const PriceVector& p, const Allocation& x, const Rational& c3,
                                      const Rational& eps_c, std::size_t* moves_out = nullptr) {
  detail::check_positive_prices(p, "establish_invariant");
  Allocation out = x;
  Rational ratio = 1 + c3 * eps_c;
  std::size_t moves_total = 0;
  for (std::size_t i = 0; i < m.num_buyers(); ++i) {
    const Buyer& b = m.buyers[i];
    auto money = detail::to_slots(b, x[i], p);
    auto order = detail::slot_order(b, p);
    const std::size_t limit = 2 * order.size() + 2;
    std::size_t moves = 0;
    auto step = [&](const SegmentRef& from, const SegmentRef& to, const Rational& amount) {
      money[from.good][from.seg] -= amount;
      money[to.good][to.seg] += amount;
      if (++moves > limit) throw std::logic_error("establish_invariant: move bound exceeded");
    };
    for (;;) {
      bool changed = false;
      Rational mb = detail::marginal_from_slots(b, money, p);
      // fill unfilled slots above the window from the worst funded slot below them
      for (std::size_t a = 0; a < order.size(); ++a) {
        const auto& s = order[a];
        if (!(detail::slot_bpb(b, s, p) > mb)) break;
        while (!detail::slot_full(b, s, money, p)) {
          std::size_t src = order.size();
          for (std::size_t z = order.size(); z-- > a + 1;)
            if (money[order[z].good][order[z].seg] > 0) {
              src = z;
              break;
            }
          if (src == order.size()) break;
          Rational need = detail::slot_room(b, s, money, p, 0);
          step(order[src], s, rmin(need, money[order[src].good][order[src].seg]));
          changed = true;
        }
      }
      // drain money below the window onto the marginal slot
      for (;;) {
        Rational lo = detail::marginal_from_slots(b, money, p) / ratio;
        std::size_t src = order.size();
        for (std::size_t z = order.size(); z-- > 0;)
          if (money[order[z].good][order[z].seg] > 0 && detail::slot_bpb(b, order[z], p) < lo) {
            src = z;
            break;
          }
        if (src == order.size()) break;
        std::size_t dst = 0;
        while (detail::slot_full(b, order[dst], money, p)) ++dst;
        Rational room = detail::slot_room(b, order[dst], money, p, money[order[src].good][order[src].seg]);
        step(order[src], order[dst], rmin(room, money[order[src].good][order[src].seg]));
        changed = true;
      }
      if (!changed) break;
    }
    moves_total += moves;
    out[i] = detail::from_slots(money, p);
  }
  if (moves_out) *moves_out = moves_total;
  return out;
}

using BurnLedger = std::vector<Rational>;

enum class FlowEdgeKind { Source, Burn, Use, Room };

struct FlowEdgeInfo {
  FlowEdgeKind kind;
  std::size_t buyer = nil, good = nil, seg = nil;
};

struct RepairFlow {
  FlowNetwork net;
  std::vector<FlowEdgeInfo> info;  // parallel to net.edges
  std::size_t goods = 0, buyers = 0;

  std::size_t good_node(std::size_t j) const { return 2 + j; }
  std::size_t buyer_node(std::size_t i) const { return 2 + goods + i; }
};

inline RepairFlow build_flow_network(const Market& m, const PriceVector& p, const Allocation& x,
                                     const ConstantLedger& L) {
  detail::check_positive_prices(p, "build_flow_network");
  RepairFlow rf;
  rf.goods = m.num_goods();
  rf.buyers = m.num_buyers();
  for (std::size_t j = 0; j < rf.goods; ++j) rf.net.add_node("g" + std::to_string(j));
  for (std::size_t i = 0; i < rf.buyers; ++i) rf.net.add_node("b" + std::to_string(i));
  auto edge = [&](std::size_t a, std::size_t z, Rational cap, std::string label, FlowEdgeInfo info) {
    rf.net.add_edge(a, z, std::move(cap), std::move(label));
    rf.info.push_back(info);
  };
  Rational big = 0;
  for (const auto& b : m.buyers) big += b.budget;
  auto D = demands(x, rf.goods);
  Rational over = L.over_threshold();
  for (std::size_t j = 0; j < rf.goods; ++j)
    if (D[j] > over)
      edge(FlowNetwork::source, rf.good_node(j), p[j] * (D[j] - over), "s->g" + std::to_string(j),
           {FlowEdgeKind::Source, nil, j, nil});
  for (std::size_t i = 0; i < rf.buyers; ++i) {
    const Buyer& b = m.buyers[i];
    Rational spend = row_spend(x[i], p);
    edge(rf.buyer_node(i), FlowNetwork::sink, rmax(Rational(0), spend - (b.budget - L.eps_c)),
         "b" + std::to_string(i) + "->t", {FlowEdgeKind::Burn, i, nil, nil});
    auto money = detail::to_slots(b, x[i], p);
    Window w = window(b, p, x[i], L.c3, L.eps_c);
    for (const auto& s : detail::slot_order(b, p)) {
      Rational bpb = detail::slot_bpb(b, s, p);
      if (bpb < w.lo || bpb > w.hi) continue;
      std::string tag = std::to_string(i) + "#" + std::to_string(s.good) + "." + std::to_string(s.seg);
      Rational used = money[s.good][s.seg];
      edge(rf.good_node(s.good), rf.buyer_node(i), used, "use " + tag, {FlowEdgeKind::Use, i, s.good, s.seg});
      edge(rf.buyer_node(i), rf.good_node(s.good), detail::slot_room(b, s, money, p, big), "room " + tag,
           {FlowEdgeKind::Room, i, s.good, s.seg});
    }
  }
  return rf;
}

struct Snapshot {
  std::string step;
  PriceVector p;
  Allocation x;
  BurnLedger burn;
  std::optional<FlowNetwork> flow;
};

/// Optional recorder: snapshots after each sub-step plus any invariant failures.
struct RepairTrace {
  std::vector<Snapshot> snapshots;
  std::vector<std::string> violations;
  bool keep_snapshots = true;

  void snap(std::string step, const PriceVector& p, const Allocation& x, const BurnLedger& burn,
            const FlowNetwork* net = nullptr) {
    if (!keep_snapshots) return;
    Snapshot s{std::move(step), p, x, burn, std::nullopt};
    if (net) s.flow = *net;
    snapshots.push_back(std::move(s));
  }
  void fail(const std::string& what) { violations.push_back(what); }
};

namespace detail {

inline void check_budgets(const Market& m, const PriceVector& p, const Allocation& x, const BurnLedger& burn,
                          const Rational& cap, const std::string& where, RepairTrace& tr) {
  for (std::size_t i = 0; i < m.num_buyers(); ++i) {
    if (row_spend(x[i], p) + burn[i] != m.buyers[i].budget)
      tr.fail(where + ": buyer " + std::to_string(i) + " spend + burn differs from budget");
    if (burn[i] < 0 || burn[i] > cap) tr.fail(where + ": buyer " + std::to_string(i) + " burn outside [0, eps_c]");
  }
}

}  // namespace detail

struct ShiftResult {
  Allocation x;
  BurnLedger burn;
  RepairFlow last;
  std::size_t iterations = 0;
};

inline ShiftResult shift_and_burn(const Market& m, const PriceVector& p, const Allocation& x, const BurnLedger& burn,
                                  const ConstantLedger& L, RepairTrace* tr = nullptr) {
  ShiftResult r{x, burn, {}, 0};
  std::size_t total_slots = 0;
  for (const auto& b : m.buyers) total_slots += detail::slot_order(b, p).size();
  for (;;) {
    std::vector<Rational> before_mb;
    for (std::size_t i = 0; i < m.num_buyers(); ++i) before_mb.push_back(marginal_bpb(m.buyers[i], p, r.x[i]));
    auto D_before = demands(r.x, m.num_goods());
    RepairFlow rf = build_flow_network(m, p, r.x, L);
    max_flow(rf.net);
    std::vector<std::vector<Rational>> shift(m.num_buyers(), std::vector<Rational>(m.num_goods(), Rational(0)));
    std::vector<bool> sourced(m.num_goods(), false);
    for (std::size_t e = 0; e < rf.net.edges.size(); ++e) {
      const auto& in = rf.info[e];
      const Rational& f = rf.net.edges[e].flow;
      switch (in.kind) {
        case FlowEdgeKind::Source: sourced[in.good] = true; break;
        case FlowEdgeKind::Burn: r.burn[in.buyer] += f; break;
        case FlowEdgeKind::Use: shift[in.buyer][in.good] -= f; break;
        case FlowEdgeKind::Room: shift[in.buyer][in.good] += f; break;
      }
    }
    for (std::size_t i = 0; i < m.num_buyers(); ++i)
      for (std::size_t j = 0; j < m.num_goods(); ++j) r.x[i][j] += shift[i][j] / p[j];
    ++r.iterations;
    if (tr) {
      std::string where = "shift-and-burn " + std::to_string(r.iterations);
      if (!flow_is_feasible(rf.net)) tr->fail(where + ": flow violates conservation or capacity");
      auto D = demands(r.x, m.num_goods());
      for (std::size_t j = 0; j < m.num_goods(); ++j) {
        if (!sourced[j] && D[j] != D_before[j]) tr->fail(where + ": demand of unsourced good " + std::to_string(j) + " moved");
        if (sourced[j] && (D[j] > D_before[j] || D[j] < L.over_threshold()))
          tr->fail(where + ": sourced good " + std::to_string(j) + " left [threshold, previous demand]");
      }
      for (std::size_t i = 0; i < m.num_buyers(); ++i)
        if (r.burn[i] < burn[i]) tr->fail(where + ": burn decreased for buyer " + std::to_string(i));
      if (!check_invariant(m, p, r.x, L.c3, L.eps_c)) tr->fail(where + ": window invariant broken");
      detail::check_budgets(m, p, r.x, r.burn, L.burn_cap(), where, *tr);
      tr->snap(where, p, r.x, r.burn, &rf.net);
    }
    r.last = std::move(rf);
    bool dropped = false;
    for (std::size_t i = 0; i < m.num_buyers(); ++i) {
      Rational now = marginal_bpb(m.buyers[i], p, r.x[i]);
      if (now > before_mb[i] && tr) tr->fail("shift-and-burn: marginal bang-per-buck rose for buyer " + std::to_string(i));
      if (now < before_mb[i]) dropped = true;
    }
    if (!dropped) return r;
    if (r.iterations > total_slots + 1) throw std::logic_error("shift_and_burn: iteration bound exceeded");
  }
}

struct RestrictedGraph {
  std::vector<bool> goods, buyers;
};

inline RestrictedGraph restricted_flow_graph(const RepairFlow& rf, const Allocation& x, const Rational& over_threshold) {
  RestrictedGraph g{std::vector<bool>(rf.goods, false), std::vector<bool>(rf.buyers, false)};
  auto D = demands(x, rf.goods);
  std::vector<std::vector<Rational>> use_cap(rf.goods, std::vector<Rational>(rf.buyers, Rational(0))), use_flow = use_cap,
                                     room_cap = use_cap, room_flow = use_cap;
  std::vector<std::vector<bool>> use_edge(rf.goods, std::vector<bool>(rf.buyers, false)), room_edge = use_edge;
  for (std::size_t e = 0; e < rf.net.edges.size(); ++e) {
    const auto& in = rf.info[e];
    const auto& ed = rf.net.edges[e];
    if (in.kind == FlowEdgeKind::Use) {
      use_edge[in.good][in.buyer] = true;
      use_cap[in.good][in.buyer] += ed.cap;
      use_flow[in.good][in.buyer] += ed.flow;
    } else if (in.kind == FlowEdgeKind::Room) {
      room_edge[in.good][in.buyer] = true;
      room_cap[in.good][in.buyer] += ed.cap;
      room_flow[in.good][in.buyer] += ed.flow;
    }
  }
  std::vector<std::size_t> queue;
  for (std::size_t j = 0; j < rf.goods; ++j)
    if (D[j] > over_threshold) {
      g.goods[j] = true;
      queue.push_back(j);
    }
  while (!queue.empty()) {
    std::size_t j = queue.back();
    queue.pop_back();
    for (std::size_t i = 0; i < rf.buyers; ++i) {
      if (g.buyers[i] || !use_edge[j][i] || !(use_flow[j][i] < use_cap[j][i])) continue;
      g.buyers[i] = true;
      for (std::size_t k = 0; k < rf.goods; ++k)
        if (!g.goods[k] && room_edge[k][i] && room_flow[k][i] < room_cap[k][i]) {
          g.goods[k] = true;
          queue.push_back(k);
        }
    }
  }
  return g;
}

struct PumpResult {
  PriceVector p;
  Allocation x;
};

inline PumpResult pump_and_shift(const Market& m, const PriceVector& p, const Allocation& x,
                                 const std::vector<bool>& pumped, const Rational& eps_c) {
  detail::check_positive_prices(p, "pump_and_shift");
  PumpResult r{p, x};
  for (std::size_t j = 0; j < p.size(); ++j)
    if (pumped[j]) r.p[j] = p[j] * (1 + eps_c);
  for (std::size_t i = 0; i < m.num_buyers(); ++i) {
    const Buyer& b = m.buyers[i];
    auto money = detail::to_slots(b, x[i], p);
    auto target = money;  // money that buys the old quantity at the new prices
    for (std::size_t j = 0; j < p.size(); ++j)
      for (auto& v : target[j]) v = v / p[j] * r.p[j];
    auto order = detail::slot_order(b, r.p);
    bool done = false;
    for (std::size_t a = 0; a < order.size() && !done; ++a) {
      const auto& s = order[a];
      Rational bpb = detail::slot_bpb(b, s, r.p);
      while (money[s.good][s.seg] < target[s.good][s.seg]) {
        std::size_t src = order.size();
        for (std::size_t z = order.size(); z-- > 0;)
          if (money[order[z].good][order[z].seg] > 0) {
            src = z;
            break;
          }
        if (src == order.size() || !(detail::slot_bpb(b, order[src], r.p) < bpb)) {
          done = true;
          break;
        }
        Rational amt = rmin(target[s.good][s.seg] - money[s.good][s.seg], money[order[src].good][order[src].seg]);
        money[order[src].good][order[src].seg] -= amt;
        money[s.good][s.seg] += amt;
      }
    }
    r.x[i] = detail::from_slots(money, r.p);
  }
  return r;
}

struct Step3Result {
  PriceVector p;
  Allocation x;
  BurnLedger burn;
  std::size_t rounds = 0, shift_iterations = 0, round_ceiling = 0;
};

/// Pump rounds after which every good is priced at least 2|B| e_max and cannot over-clear.
inline std::size_t step3_round_ceiling(const Market& m, const PriceVector& p, const ConstantLedger& L) {
  Rational pmin = p.empty() ? Rational(1) : p[0];
  for (const auto& v : p) pmin = rmin(pmin, v);
  Rational top = 2 * Rational(Integer(std::max<std::size_t>(1, m.num_buyers()))) * L.e_max;
  if (pmin >= top) return 1;
  double r = std::log(to_double(top / pmin)) / std::log1p(to_double(L.eps_c));
  return static_cast<std::size_t>(std::ceil(r)) + 2;
}

inline Step3Result step3(const Market& m, const PriceVector& p, const Allocation& x, const ConstantLedger& L,
                         RepairTrace* tr = nullptr) {
  detail::check_positive_prices(p, "step3");
  Step3Result r{p, x, BurnLedger(m.num_buyers(), Rational(0)), 0, 0, step3_round_ceiling(m, p, L)};
  for (std::size_t i = 0; i < m.num_buyers(); ++i) r.burn[i] = m.buyers[i].budget - row_spend(x[i], p);
  const Rational over = L.over_threshold();
  for (;;) {
    ShiftResult s = shift_and_burn(m, r.p, r.x, r.burn, L, tr);
    r.x = std::move(s.x);
    r.burn = std::move(s.burn);
    r.shift_iterations += s.iterations;
    auto D = demands(r.x, m.num_goods());
    bool any = false;
    for (const auto& v : D)
      if (v > over) any = true;
    if (!any) return r;
    if (r.rounds >= r.round_ceiling)
      throw RoundLimitExceeded("step3: over-clearing survives " + std::to_string(r.rounds) + " pump rounds");
    RestrictedGraph g = restricted_flow_graph(s.last, r.x, over);
    if (tr)
      for (std::size_t i = 0; i < m.num_buyers(); ++i)
        if (g.buyers[i] && r.burn[i] != L.eps_c)
          tr->fail("restricted flow graph: buyer " + std::to_string(i) + " has not fully burned");
    PumpResult pr = pump_and_shift(m, r.p, r.x, g.goods, L.eps_c);
    ++r.rounds;
    if (tr) {
      std::string where = "pump-and-shift " + std::to_string(r.rounds);
      auto D2 = demands(pr.x, m.num_goods());
      for (std::size_t i = 0; i < m.num_buyers(); ++i) {
        if (row_spend(pr.x[i], pr.p) != row_spend(r.x[i], r.p))
          tr->fail(where + ": buyer " + std::to_string(i) + " spend changed");
        for (std::size_t j = 0; j < m.num_goods(); ++j)
          if (pr.x[i][j] > r.x[i][j]) tr->fail(where + ": buyer " + std::to_string(i) + " demand rose");
      }
      for (std::size_t j = 0; j < m.num_goods(); ++j)
        if (D[j] <= over && D2[j] > over) tr->fail(where + ": good " + std::to_string(j) + " started over-clearing");
      if (!check_invariant(m, pr.p, pr.x, L.c3, L.eps_c)) tr->fail(where + ": window invariant broken");
      detail::check_budgets(m, pr.p, pr.x, r.burn, L.burn_cap(), where, *tr);
      tr->snap(where, pr.p, pr.x, r.burn);
    }
    r.p = std::move(pr.p);
    r.x = std::move(pr.x);
  }
}

// ---------------------------------------------------------------------------
// Step 4

struct Step4Result {
  Allocation x;
  std::vector<Rational> removed;  // phase-3 money taken from each buyer
  Rational P = 0, Q = 0;
  Rational unfunded = 0;  // part of Q no buyer could pay from goods outside the deficit set
  bool phase2 = false, phase3 = false;
};

inline Step4Result step4(const Market& m, const PriceVector& p, const Allocation& x, const BurnLedger& burn_in,
                         const Rational& threshold) {
  detail::check_positive_prices(p, "step4");
  const std::size_t n = m.num_goods(), nb = m.num_buyers();
  Step4Result r{x, std::vector<Rational>(nb, Rational(0))};
  BurnLedger burn = burn_in;
  auto D = demands(r.x, n);
  auto next_burner = [&]() -> std::size_t {
    for (std::size_t i = 0; i < nb; ++i)
      if (burn[i] > 0) return i;
    return nil;
  };
  for (std::size_t j = 0; j < n; ++j)
    while (D[j] < threshold) {
      std::size_t i = next_burner();
      if (i == nil) break;
      Rational amt = rmin(burn[i], p[j] * (threshold - D[j]));
      r.x[i][j] += amt / p[j];
      D[j] += amt / p[j];
      burn[i] -= amt;
    }
  for (const auto& v : burn) r.P += v;
  if (r.P > 0) {
    r.phase2 = true;
    Rational share = r.P / Rational(Integer(n));
    for (std::size_t j = 0; j < n; ++j) {
      Rational need = share;
      for (std::size_t i = 0; i < nb && need > 0; ++i) {
        Rational take = rmin(burn[i], need);
        if (take <= 0) continue;
        r.x[i][j] += take / p[j];
        burn[i] -= take;
        need -= take;
      }
    }
    D = demands(r.x, n);
  }
  std::vector<Rational> deficit(n, Rational(0));
  std::vector<bool> under(n, false);
  for (std::size_t j = 0; j < n; ++j)
    if (D[j] < threshold) {
      under[j] = true;
      deficit[j] = threshold - D[j];
      r.Q += p[j] * deficit[j];
    }
  if (r.Q > 0) {
    r.phase3 = true;
    Rational per = r.Q / Rational(Integer(nb)), carry = 0;
    std::vector<Rational> pool(nb, Rational(0));
    for (std::size_t i = 0; i < nb; ++i) {
      auto money = detail::to_slots(m.buyers[i], r.x[i], p);
      Rational got = detail::remove_worst_first(m.buyers[i], money, p, per + carry,
                                                [&](std::size_t j) { return under[j]; });
      carry = per + carry - got;
      pool[i] = got;
      r.removed[i] = got;
      r.x[i] = detail::from_slots(money, p);
    }
    r.unfunded = carry;
    for (std::size_t j = 0; j < n; ++j) {
      Rational need = p[j] * deficit[j];
      for (std::size_t i = 0; i < nb && need > 0; ++i) {
        Rational take = rmin(pool[i], need);
        if (take <= 0) continue;
        r.x[i][j] += take / p[j];
        pool[i] -= take;
        need -= take;
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Step 5

struct Step5Result {
  PriceVector p;
  Allocation x1, x2, x;
  Rational D;
};

inline Step5Result step5(const Market& m, const PriceVector& p, const Allocation& x, const Rational& f) {
  detail::check_positive_prices(p, "step5");
  if (f < 0 || f >= 1) throw std::invalid_argument("step5: f must lie in [0,1)");
  const std::size_t n = m.num_goods();
  auto Dj = demands(x, n);
  for (std::size_t j = 0; j < n; ++j)
    if (Dj[j] <= 0 || rabs(Dj[j] - 1) > f) throw std::invalid_argument("step5: good " + std::to_string(j) + " does not f-clear");
  for (std::size_t i = 0; i < m.num_buyers(); ++i)
    if (row_spend(x[i], p) != m.buyers[i].budget)
      throw std::invalid_argument("step5: buyer " + std::to_string(i) + " does not meet its budget");
  Step5Result r;
  r.x1 = x;
  for (auto& row : r.x1)
    for (std::size_t j = 0; j < n; ++j) row[j] = (1 - f) / Dj[j] * row[j];
  Rational P = 0, S = 0;
  for (const auto& v : p) P += v;
  r.x2 = r.x1;
  for (std::size_t i = 0; i < m.num_buyers(); ++i) {
    Rational Si = m.buyers[i].budget - row_spend(r.x1[i], p);
    S += Si;
    for (std::size_t j = 0; j < n; ++j) r.x2[i][j] += Si / P;
  }
  r.D = 1 - f + S / P;
  r.p = p;
  for (auto& v : r.p) v *= r.D;
  r.x = r.x2;
  for (auto& row : r.x)
    for (auto& v : row) v /= r.D;
  return r;
}

/// Units of each segment implied by a row; prefix-feasible by construction.
inline bool prefix_feasible(const Buyer& b, const std::vector<std::vector<Rational>>& seg_units) {
  for (const auto& [j, u] : b.utilities) {
    if (j >= seg_units.size()) continue;
    for (std::size_t k = 1; k < u.size() && k < seg_units[j].size(); ++k)
      if (seg_units[j][k] > 0 && (u[k - 1].infinite() || seg_units[j][k - 1] < *u[k - 1].length)) return false;
  }
  return true;
}

inline std::vector<std::vector<Rational>> segment_units(const Buyer& b, const std::vector<Rational>& row) {
  std::vector<std::vector<Rational>> out(row.size());
  for (const auto& [j, u] : b.utilities) {
    if (j >= row.size()) continue;
    for (std::size_t k = 0; k < u.size(); ++k) out[j].push_back(segment_fill(u, k, row[j]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

struct RepairOutcome {
  PriceVector p;
  Allocation x;
  EquilibriumReport report;
  ConstantLedger ledger;
  std::vector<std::size_t> replaced;  // Step-2 buyers
  Rational certified_delta;           // 1 - g2_cert
};

/// Steps 2-5 on a reducible market from any positive price vector and allocation.
inline RepairOutcome repair_steps(const Market& m, const PriceVector& p0, const Allocation& x0, ConstantLedger L,
                                  RepairTrace* tr = nullptr) {
  detail::check_positive_prices(p0, "repair_steps");
  const std::size_t nb = m.num_buyers(), n = m.num_goods();
  RepairOutcome out;
  BurnLedger zero(nb, Rational(0));

  Allocation x2 =
      fix_broken_buyers(m, p0, x0, rmax(L.broken_threshold(), Rational(1, 1000000)), &out.replaced, L.eps_c / 2);
  if (tr) {
    detail::check_budgets(m, p0, x2, zero, L.burn_cap(), "step 2", *tr);
    tr->snap("step 2", p0, x2, zero);
  }
  Allocation xi = establish_invariant(m, p0, x2, L.c3, L.eps_c);
  if (tr) {
    if (!check_invariant(m, p0, xi, L.c3, L.eps_c)) tr->fail("establish_invariant: invariant fails");
    detail::check_budgets(m, p0, xi, zero, L.burn_cap(), "invariant", *tr);
    tr->snap("invariant", p0, xi, zero);
  }

  Step3Result s3 = step3(m, p0, xi, L, tr);
  L.rounds = s3.rounds;
  L.round_ceiling = s3.round_ceiling;
  L.shift_iterations = s3.shift_iterations;
  std::vector<Rational> spend3(nb);
  for (std::size_t i = 0; i < nb; ++i) spend3[i] = row_spend(s3.x[i], s3.p);

  std::vector<Rational> ratio3(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    ratio3[i] = optimality_ratio(m.buyers[i], s3.p, s3.x[i]);
    Rational bound = spend3[i] / m.buyers[i].budget / L.window_ratio();
    if (tr && ratio3[i] < bound) tr->fail("step 3: buyer " + std::to_string(i) + " below the window bound");
  }
  Step4Result s4 = step4(m, s3.p, s3.x, s3.burn, L.under_threshold());
  Rational g = 1;
  for (std::size_t i = 0; i < nb; ++i) {
    Rational actual = optimality_ratio(m.buyers[i], s3.p, s4.x[i]);
    if (tr && s4.removed[i] == 0 && actual < ratio3[i])
      tr->fail("step 4: buyer " + std::to_string(i) + " lost utility without giving up money");
    g = rmin(g, actual);
  }
  if (tr) {
    detail::check_budgets(m, s3.p, s4.x, zero, L.burn_cap(), "step 4", *tr);
    tr->snap("step 4", s3.p, s4.x, zero);
  }
  Rational f = 0;
  for (const auto& v : demands(s4.x, n)) f = rmax(f, rabs(v - 1));
  L.g_cert = g;
  L.f_cert = f;

  Step5Result s5 = step5(m, s3.p, s4.x, f);
  if (tr) {
    for (const auto& v : demands(s5.x1, n))
      if (v != 1 - f) tr->fail("step 5.1: demand differs from 1 - f");
    auto D2 = demands(s5.x2, n);
    for (const auto& v : D2)
      if (v != s5.D) tr->fail("step 5.2: demands differ from the common D");
    if (s5.D < 1 - f || s5.D > 1 + f) tr->fail("step 5.2: D outside [1-f, 1+f]");
    detail::check_budgets(m, s3.p, s5.x2, zero, L.burn_cap(), "step 5.2", *tr);
    for (const auto& v : demands(s5.x, n))
      if (v != 1) tr->fail("step 5.3: demand differs from 1");
    detail::check_budgets(m, s5.p, s5.x, zero, L.burn_cap(), "step 5.3", *tr);
    for (std::size_t i = 0; i < nb; ++i)
      if (!prefix_feasible(m.buyers[i], segment_units(m.buyers[i], s5.x[i])))
        tr->fail("step 5.3: buyer " + std::to_string(i) + " not prefix-feasible");
    tr->snap("step 5.1", s3.p, s5.x1, zero);
    tr->snap("step 5.2", s3.p, s5.x2, zero);
    tr->snap("step 5.3", s5.p, s5.x, zero);
  }
  out.p = s5.p;
  out.x = s5.x;
  out.certified_delta = 1 - *L.g2_cert();
  out.report = verify_equilibrium(m, out.p, out.x, 0, out.certified_delta);
  out.ledger = std::move(L);
  return out;
}

struct FullRepair {
  RepairOutcome reduced;  // on the preprocessed market
  PriceVector p;          // original goods
  Allocation x;
};

/// decode -> Steps 2-5 -> reinsert_removed.
inline FullRepair repair_full(const Preprocessed& pre, const GCPlusEncoding& enc, const RealAssignment& sol,
                              const Rational& eps_c, const Rational& delta_c, RepairTrace* tr = nullptr) {
  const Market& m = pre.market;
  auto dec = decode_gcplus_solution(m, enc, sol);
  if (tr) tr->snap("step 1", dec.p, dec.x, BurnLedger(m.num_buyers(), Rational(0)));
  ConstantLedger L = make_ledger(m, eps_c, delta_c);
  std::size_t gb = 0, gg = 0;
  for (auto v : enc.gates_per_buyer) gb = std::max(gb, v);
  for (auto v : enc.gates_per_good) gg = std::max(gg, v);
  L.gates_per_buyer = gb;
  L.gates_per_good = gg;
  FullRepair out;
  out.reduced = repair_steps(m, dec.p, dec.x, L, tr);
  std::tie(out.p, out.x) = reinsert_removed(pre, out.reduced.p, out.reduced.x);
  return out;
}

}  // namespace fmarket
