#pragma once

#include "fmarket/rational.hpp"

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace fmarket {

/// One linear piece of an SPLC utility. An empty length is the +inf marker.
struct Segment {
  Rational slope;
  std::optional<Rational> length;

  bool infinite() const { return !length.has_value(); }
};

using SplcUtility = std::vector<Segment>;

struct Buyer {
  Rational budget;
  std::map<std::size_t, SplcUtility> utilities;  // good index -> utility
};

struct Market {
  std::vector<std::string> goods;
  std::vector<Buyer> buyers;

  std::size_t num_goods() const { return goods.size(); }
  std::size_t num_buyers() const { return buyers.size(); }
};

using PriceVector = std::vector<Rational>;
using Allocation = std::vector<std::vector<Rational>>;                   // [buyer][good]
using SpendingProfile = std::vector<std::vector<std::vector<Rational>>>;  // [buyer][good][segment]

struct InfiniteOptimum : std::runtime_error {
  InfiniteOptimum() : std::runtime_error("infinite optimum: zero-priced good with an uncapped positive segment") {}
};

inline Allocation zero_allocation(const Market& m) {
  return Allocation(m.num_buyers(), std::vector<Rational>(m.num_goods(), Rational(0)));
}

/// Structural problems (bad good keys, non-decreasing slopes, misplaced infinite segment).
inline std::vector<std::string> market_problems(const Market& m) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < m.buyers.size(); ++i) {
    const auto& b = m.buyers[i];
    std::string who = "buyer " + std::to_string(i);
    if (b.budget <= 0) out.push_back(who + ": budget must be positive");
    for (const auto& [j, u] : b.utilities) {
      std::string where = who + ", good " + std::to_string(j);
      if (j >= m.goods.size()) {
        out.push_back(where + ": unknown good");
        continue;
      }
      for (std::size_t k = 0; k < u.size(); ++k) {
        if (u[k].slope < 0) out.push_back(where + ": negative slope");
        if (u[k].length && *u[k].length <= 0) out.push_back(where + ": non-positive length");
        if (u[k].infinite() && k + 1 != u.size()) out.push_back(where + ": only the last segment may be infinite");
        if (k > 0 && !(u[k].slope < u[k - 1].slope)) out.push_back(where + ": slopes must strictly decrease");
      }
    }
  }
  return out;
}

inline Rational eval_utility(const SplcUtility& u, const Rational& x) {
  if (x < 0) throw std::invalid_argument("eval_utility: negative quantity");
  Rational left = x, total = 0;
  for (const auto& s : u) {
    if (left <= 0) break;
    Rational take = s.infinite() ? left : rmin(left, *s.length);
    total += s.slope * take;
    left -= take;
  }
  return total;
}

inline Rational bundle_utility(const Buyer& b, const std::vector<Rational>& row) {
  Rational total = 0;
  for (const auto& [j, u] : b.utilities)
    if (j < row.size()) total += eval_utility(u, row[j]);
  return total;
}

inline Rational row_spend(const std::vector<Rational>& row, const PriceVector& p) {
  Rational s = 0;
  for (std::size_t j = 0; j < row.size() && j < p.size(); ++j) s += p[j] * row[j];
  return s;
}

/// Units of segment k used by quantity x under prefix filling.
inline Rational segment_fill(const SplcUtility& u, std::size_t k, const Rational& x) {
  Rational prefix = 0;
  for (std::size_t t = 0; t < k; ++t) {
    if (u[t].infinite()) return 0;
    prefix += *u[t].length;
  }
  Rational used = x - prefix;
  if (used <= 0) return 0;
  if (u[k].length && used > *u[k].length) used = *u[k].length;
  return used;
}

/// Money per segment implied by an allocation row (prefix filling).
inline std::vector<std::vector<Rational>> spending_row(const Buyer& b, const std::vector<Rational>& row,
                                                       const PriceVector& p) {
  std::vector<std::vector<Rational>> out(row.size());
  for (const auto& [j, u] : b.utilities) {
    if (j >= row.size()) continue;
    out[j].assign(u.size(), Rational(0));
    for (std::size_t k = 0; k < u.size(); ++k) out[j][k] = p[j] * segment_fill(u, k, row[j]);
  }
  return out;
}

inline SpendingProfile spending_profile(const Market& m, const PriceVector& p, const Allocation& x) {
  SpendingProfile sp(m.num_buyers());
  for (std::size_t i = 0; i < m.num_buyers(); ++i) sp[i] = spending_row(m.buyers[i], x[i], p);
  return sp;
}

struct SegmentRef {
  std::size_t good;
  std::size_t seg;
};

/// Strictly-better bang-per-buck, ties broken by (good, segment). Prices must be positive.
inline bool bpb_before(const SegmentRef& a, const Rational& sa, const Rational& pa, const SegmentRef& b,
                       const Rational& sb, const Rational& pb) {
  Rational lhs = sa * pb, rhs = sb * pa;
  if (lhs != rhs) return lhs > rhs;
  return std::tie(a.good, a.seg) < std::tie(b.good, b.seg);
}

/// Positive-slope segments of a buyer with positive price, in greedy order.
inline std::vector<SegmentRef> greedy_order(const Buyer& b, const PriceVector& p) {
  std::vector<SegmentRef> segs;
  for (const auto& [j, u] : b.utilities)
    for (std::size_t k = 0; k < u.size(); ++k)
      if (u[k].slope > 0 && p[j] > 0) segs.push_back({j, k});
  std::sort(segs.begin(), segs.end(), [&](const SegmentRef& x, const SegmentRef& y) {
    return bpb_before(x, b.utilities.at(x.good)[x.seg].slope, p[x.good], y, b.utilities.at(y.good)[y.seg].slope,
                      p[y.good]);
  });
  return segs;
}

struct Bundle {
  std::vector<Rational> x;                  // per good
  std::vector<std::vector<Rational>> spend;  // per good, per segment
  Rational utility;
  Rational money;
};

/// Greedy demand: fills segments in decreasing bang-per-buck order until the budget runs out.
inline Bundle optimal_bundle(const Buyer& b, const PriceVector& p, const Rational& budget) {
  Bundle out;
  out.x.assign(p.size(), Rational(0));
  out.spend.assign(p.size(), {});
  out.utility = 0;
  out.money = 0;
  for (const auto& [j, u] : b.utilities) {
    if (j >= p.size()) throw std::invalid_argument("optimal_bundle: utility for unknown good");
    out.spend[j].assign(u.size(), Rational(0));
    if (p[j] == 0) {
      for (const auto& s : u) {
        if (s.slope <= 0) continue;
        if (s.infinite()) throw InfiniteOptimum();
        out.x[j] += *s.length;
        out.utility += s.slope * *s.length;
      }
    }
  }
  Rational left = budget;
  for (const auto& r : greedy_order(b, p)) {
    if (left <= 0) break;
    const auto& s = b.utilities.at(r.good)[r.seg];
    Rational price = p[r.good];
    Rational cost = s.infinite() ? left : rmin(left, price * *s.length);
    Rational q = cost / price;
    out.x[r.good] += q;
    out.spend[r.good][r.seg] = cost;
    out.utility += s.slope * q;
    out.money += cost;
    left -= cost;
  }
  return out;
}

struct GoodReport {
  Rational demand;
  Rational gap;
};

struct BuyerReport {
  Rational budget;
  Rational spend;
  Rational utility;
  std::optional<Rational> optimum;  // empty: unbounded
  Rational ratio;                   // utility / optimum; 1 when optimum is 0; 0 when unbounded
  bool within_budget = true;
};

struct EquilibriumReport {
  bool accepted = false;
  bool feasible = true;  // dimensions, non-negativity, budgets
  Rational eps;
  Rational delta;
  Rational min_eps;
  Rational min_delta;
  std::vector<GoodReport> goods;
  std::vector<BuyerReport> buyers;
  std::vector<std::string> violations;
};

namespace detail {

inline EquilibriumReport verify_with_budgets(const Market& m, const std::vector<Rational>& budgets,
                                             const PriceVector& p, const Allocation& x, const Rational& eps,
                                             const Rational& delta) {
  EquilibriumReport r;
  r.eps = eps;
  r.delta = delta;
  r.min_eps = 0;
  r.min_delta = 0;
  const std::size_t n = m.num_goods();
  if (p.size() != n || x.size() != m.num_buyers()) {
    r.feasible = false;
    r.violations.push_back("dimension mismatch between market, prices and allocation");
    return r;
  }
  for (std::size_t j = 0; j < n; ++j)
    if (p[j] < 0) {
      r.feasible = false;
      r.violations.push_back("good " + m.goods[j] + ": negative price");
    }
  r.goods.assign(n, GoodReport{Rational(0), Rational(0)});
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != n) {
      r.feasible = false;
      r.violations.push_back("buyer " + std::to_string(i) + ": allocation row has wrong length");
      return r;
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (x[i][j] < 0) {
        r.feasible = false;
        r.violations.push_back("buyer " + std::to_string(i) + ", good " + m.goods[j] + ": negative quantity");
      }
      r.goods[j].demand += x[i][j];
    }
  }
  if (!r.feasible) return r;
  for (std::size_t j = 0; j < n; ++j) {
    r.goods[j].gap = rabs(r.goods[j].demand - 1);
    r.min_eps = rmax(r.min_eps, r.goods[j].gap);
    if (r.goods[j].gap > eps)
      r.violations.push_back("good " + m.goods[j] + ": demand " + to_string(r.goods[j].demand) +
                             " misses supply by " + to_string(r.goods[j].gap));
  }
  for (std::size_t i = 0; i < m.num_buyers(); ++i) {
    const Buyer& b = m.buyers[i];
    BuyerReport br;
    br.budget = budgets[i];
    br.spend = row_spend(x[i], p);
    br.utility = bundle_utility(b, x[i]);
    br.within_budget = br.spend <= br.budget;
    std::string who = "buyer " + std::to_string(i);
    if (!br.within_budget) {
      r.feasible = false;
      r.violations.push_back(who + ": spends " + to_string(br.spend) + " above budget " + to_string(br.budget));
    }
    try {
      br.optimum = optimal_bundle(b, p, br.budget).utility;
      br.ratio = *br.optimum == 0 ? Rational(1) : rmin(Rational(1), br.utility / *br.optimum);
    } catch (const InfiniteOptimum&) {
      br.optimum.reset();
      br.ratio = 0;
    }
    Rational need = 1 - br.ratio;
    r.min_delta = rmax(r.min_delta, need);
    if (need > delta) {
      if (br.optimum)
        r.violations.push_back(who + ": utility " + to_string(br.utility) + " below (1-delta) of optimum " +
                               to_string(*br.optimum));
      else
        r.violations.push_back(who + ": optimum is unbounded (zero price on an uncapped good)");
    }
    r.buyers.push_back(br);
  }
  r.accepted = r.feasible && r.min_eps <= eps && r.min_delta <= delta;
  return r;
}

}  // namespace detail

inline EquilibriumReport verify_equilibrium(const Market& m, const PriceVector& p, const Allocation& x,
                                            const Rational& eps, const Rational& delta) {
  std::vector<Rational> budgets;
  for (const auto& b : m.buyers) budgets.push_back(b.budget);
  return detail::verify_with_budgets(m, budgets, p, x, eps, delta);
}

struct StructureReport {
  bool ok = true;
  std::vector<std::string> violations;

  void fail(std::string s) {
    ok = false;
    violations.push_back(std::move(s));
  }
};

inline bool nonzero_utility(const SplcUtility& u) {
  for (const auto& s : u)
    if (s.slope > 0) return true;
  return false;
}

inline bool unsatiated_on(const SplcUtility& u) {
  return !u.empty() && u.back().infinite() && u.back().slope > 0;
}

/// Linear capped: one positive piece, optionally followed by a zero-slope tail, or nothing.
inline bool linear_capped(const SplcUtility& u) {
  if (u.empty()) return true;
  if (u.size() == 1) return true;
  return u.size() == 2 && u[1].slope == 0 && !u[0].infinite();
}

struct DegreeInfo {
  std::size_t max_goods_per_buyer = 0;
  std::size_t max_buyers_per_good = 0;
};

inline DegreeInfo degrees(const Market& m) {
  DegreeInfo d;
  std::vector<std::size_t> per_good(m.num_goods(), 0);
  for (const auto& b : m.buyers) {
    std::size_t cnt = 0;
    for (const auto& [j, u] : b.utilities)
      if (nonzero_utility(u)) {
        ++cnt;
        if (j < per_good.size()) ++per_good[j];
      }
    d.max_goods_per_buyer = std::max(d.max_goods_per_buyer, cnt);
  }
  for (auto c : per_good) d.max_buyers_per_good = std::max(d.max_buyers_per_good, c);
  return d;
}

struct SimpleBounds {
  std::optional<std::size_t> max_goods_per_buyer;
  std::optional<std::size_t> max_buyers_per_good;
  std::optional<Rational> max_slope_ratio;
};

inline StructureReport is_simple(const Market& m, const SimpleBounds& bounds = {}) {
  StructureReport r;
  for (auto& s : market_problems(m)) r.fail(s);
  for (std::size_t i = 0; i < m.num_buyers(); ++i) {
    const Buyer& b = m.buyers[i];
    std::string who = "buyer " + std::to_string(i);
    if (b.budget != 1) r.fail(who + ": CEEI requires budget 1, got " + to_string(b.budget));
    bool unsatiated = false;
    std::optional<Rational> lo, hi;
    for (const auto& [j, u] : b.utilities) {
      if (!linear_capped(u)) r.fail(who + ", good " + std::to_string(j) + ": utility is not linear capped");
      if (unsatiated_on(u)) unsatiated = true;
      for (const auto& s : u)
        if (s.slope > 0) {
          lo = lo ? rmin(*lo, s.slope) : s.slope;
          hi = hi ? rmax(*hi, s.slope) : s.slope;
        }
    }
    if (!unsatiated) r.fail(who + ": sufficient condition fails (no uncapped positive-slope good)");
    if (bounds.max_slope_ratio && lo && *hi / *lo > *bounds.max_slope_ratio)
      r.fail(who + ": slope ratio " + to_string(*hi / *lo) + " exceeds " + to_string(*bounds.max_slope_ratio));
  }
  DegreeInfo d = degrees(m);
  if (bounds.max_goods_per_buyer && d.max_goods_per_buyer > *bounds.max_goods_per_buyer)
    r.fail("a buyer has non-zero utility for " + std::to_string(d.max_goods_per_buyer) + " goods");
  if (bounds.max_buyers_per_good && d.max_buyers_per_good > *bounds.max_buyers_per_good)
    r.fail("a good has " + std::to_string(d.max_buyers_per_good) + " interested buyers");
  return r;
}

struct ReducibleParams {
  std::size_t d = 0;
  Rational e_min, e_max, kappa;
  std::size_t max_segments = 0;
  bool require_unsatiated = true;
};

inline StructureReport is_reducible(const Market& m, const ReducibleParams& rp) {
  StructureReport r;
  for (auto& s : market_problems(m)) r.fail(s);
  DegreeInfo d = degrees(m);
  if (d.max_goods_per_buyer > rp.d)
    r.fail("degree: a buyer values " + std::to_string(d.max_goods_per_buyer) + " goods, bound " + std::to_string(rp.d));
  if (d.max_buyers_per_good > rp.d)
    r.fail("degree: a good has " + std::to_string(d.max_buyers_per_good) + " buyers, bound " + std::to_string(rp.d));
  for (std::size_t i = 0; i < m.num_buyers(); ++i) {
    const Buyer& b = m.buyers[i];
    std::string who = "buyer " + std::to_string(i);
    if (b.budget < rp.e_min || b.budget > rp.e_max)
      r.fail(who + ": budget " + to_string(b.budget) + " outside [e_min, e_max]");
    bool unsatiated = false;
    for (const auto& [j, u] : b.utilities) {
      std::string where = who + ", good " + std::to_string(j);
      if (u.size() > rp.max_segments) r.fail(where + ": too many segments");
      for (const auto& s : u)
        if (s.slope != 0 && (s.slope < 1 || s.slope > rp.kappa))
          r.fail(where + ": slope " + to_string(s.slope) + " outside [1, kappa]");
      if (unsatiated_on(u)) unsatiated = true;
    }
    if (rp.require_unsatiated && !unsatiated) r.fail(who + ": sufficient condition fails");
  }
  return r;
}

/// Smallest reducible parameters a market satisfies (slopes are assumed already normalized).
inline ReducibleParams measure_reducible(const Market& m) {
  ReducibleParams rp;
  DegreeInfo d = degrees(m);
  rp.d = std::max<std::size_t>(1, std::max(d.max_goods_per_buyer, d.max_buyers_per_good));
  rp.e_min = m.buyers.empty() ? Rational(1) : m.buyers[0].budget;
  rp.e_max = rp.e_min;
  rp.kappa = 1;
  for (const auto& b : m.buyers) {
    rp.e_min = rmin(rp.e_min, b.budget);
    rp.e_max = rmax(rp.e_max, b.budget);
    for (const auto& [j, u] : b.utilities) {
      rp.max_segments = std::max(rp.max_segments, u.size());
      for (const auto& s : u) rp.kappa = rmax(rp.kappa, s.slope);
    }
  }
  rp.require_unsatiated = false;
  return rp;
}

struct RemovedGood {
  std::size_t original;  // index in the input market
  Rational r;            // total interested length
  std::vector<std::pair<std::size_t, Rational>> interest;  // buyer -> positive-slope length
};

struct Preprocessed {
  Market market;
  std::vector<std::size_t> kept;  // reduced good index -> original index
  std::vector<RemovedGood> removed;
  std::size_t original_goods = 0;
};

/// Cuts each utility at two units of the good.
inline SplcUtility truncate_utility(const SplcUtility& u, const Rational& cap = 2) {
  SplcUtility out;
  Rational used = 0;
  for (const auto& s : u) {
    if (used >= cap) break;
    Rational len = s.infinite() ? cap - used : rmin(*s.length, cap - used);
    out.push_back({s.slope, len});
    used += len;
  }
  return out;
}

inline Rational interested_length(const SplcUtility& u) {
  Rational t = 0;
  for (const auto& s : u)
    if (s.slope > 0 && s.length) t += *s.length;
  return t;
}

inline Preprocessed preprocess_reducible(const Market& m, const Rational& delta) {
  if (delta <= 0 || delta >= 1) throw std::invalid_argument("preprocess_reducible: delta must lie in (0,1)");
  Preprocessed out;
  out.original_goods = m.num_goods();
  std::vector<Buyer> truncated = m.buyers;
  for (auto& b : truncated)
    for (auto& [j, u] : b.utilities) u = truncate_utility(u);
  std::vector<Rational> total(m.num_goods(), Rational(0));
  for (const auto& b : truncated)
    for (const auto& [j, u] : b.utilities) total[j] += interested_length(u);
  std::vector<std::optional<std::size_t>> remap(m.num_goods());
  for (std::size_t j = 0; j < m.num_goods(); ++j) {
    if (total[j] > 1 + delta) {
      remap[j] = out.kept.size();
      out.kept.push_back(j);
      out.market.goods.push_back(m.goods[j]);
    } else {
      RemovedGood g{j, total[j], {}};
      for (std::size_t i = 0; i < truncated.size(); ++i) {
        auto it = truncated[i].utilities.find(j);
        if (it != truncated[i].utilities.end()) {
          Rational len = interested_length(it->second);
          if (len > 0) g.interest.push_back({i, len});
        }
      }
      out.removed.push_back(std::move(g));
    }
  }
  for (const auto& b : truncated) {
    Buyer nb{b.budget, {}};
    for (const auto& [j, u] : b.utilities)
      if (remap[j]) nb.utilities[*remap[j]] = u;
    out.market.buyers.push_back(std::move(nb));
  }
  return out;
}

/// Expands a solution of the reduced market back to the original goods.
inline std::pair<PriceVector, Allocation> reinsert_removed(const Preprocessed& pre, const PriceVector& p,
                                                           const Allocation& x) {
  PriceVector P(pre.original_goods, Rational(0));
  Allocation X(x.size(), std::vector<Rational>(pre.original_goods, Rational(0)));
  for (std::size_t j = 0; j < pre.kept.size(); ++j) {
    P[pre.kept[j]] = p[j];
    for (std::size_t i = 0; i < x.size(); ++i) X[i][pre.kept[j]] = x[i][j];
  }
  for (const auto& g : pre.removed) {
    if (g.r == 0) {
      if (!X.empty()) X[0][g.original] = 1;
      continue;
    }
    for (const auto& [i, len] : g.interest) X[i][g.original] = len / g.r;
  }
  return {P, X};
}

struct ExchangeBuyer {
  std::vector<Rational> endowment;  // per good
  std::map<std::size_t, SplcUtility> utilities;
};

struct ExchangeMarket {
  std::vector<std::string> goods;
  std::vector<ExchangeBuyer> buyers;
};

inline ExchangeMarket fisher_to_exchange(const Market& m) {
  ExchangeMarket em;
  em.goods = m.goods;
  Rational share = m.buyers.empty() ? Rational(0) : Rational(1) / Rational(m.num_buyers());
  for (const auto& b : m.buyers) em.buyers.push_back({std::vector<Rational>(m.num_goods(), share), b.utilities});
  return em;
}

/// Buyer i -> i' edge when i' owns a good that i values.
inline bool economy_graph_strongly_connected(const ExchangeMarket& em) {
  std::size_t n = em.buyers.size();
  if (n <= 1) return true;
  std::vector<std::vector<std::size_t>> adj(n), radj(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      if (i == k) continue;
      for (const auto& [j, u] : em.buyers[i].utilities)
        if (nonzero_utility(u) && j < em.buyers[k].endowment.size() && em.buyers[k].endowment[j] > 0) {
          adj[i].push_back(k);
          radj[k].push_back(i);
          break;
        }
    }
  auto reach_all = [&](const std::vector<std::vector<std::size_t>>& g) {
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> st{0};
    seen[0] = true;
    while (!st.empty()) {
      auto v = st.back();
      st.pop_back();
      for (auto w : g[v])
        if (!seen[w]) {
          seen[w] = true;
          st.push_back(w);
        }
    }
    return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
  };
  return reach_all(adj) && reach_all(radj);
}

inline Market exchange_as_fisher(const ExchangeMarket& em, const PriceVector& p) {
  Market m;
  m.goods = em.goods;
  for (const auto& b : em.buyers) m.buyers.push_back({row_spend(b.endowment, p), b.utilities});
  return m;
}

inline EquilibriumReport verify_exchange_equilibrium(const ExchangeMarket& em, const PriceVector& p,
                                                     const Allocation& x, const Rational& eps,
                                                     const Rational& delta) {
  Market m = exchange_as_fisher(em, p);
  std::vector<Rational> budgets;
  for (const auto& b : m.buyers) budgets.push_back(b.budget);
  return detail::verify_with_budgets(m, budgets, p, x, eps, delta);
}

/// Scales prices so they sum to target.
inline PriceVector normalize_prices(const PriceVector& p, const Rational& target) {
  Rational s = 0;
  for (const auto& v : p) s += v;
  if (s == 0) return p;
  PriceVector out;
  for (const auto& v : p) out.push_back(v * target / s);
  return out;
}

}  // namespace fmarket
