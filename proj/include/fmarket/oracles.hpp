#pragma once

#include "fmarket/circuit.hpp"
#include "fmarket/flow.hpp"
#include "fmarket/market.hpp"
#include "fmarket/rational.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

namespace fmarket {

struct NotFound : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- DP demand oracle

/// Best utility when money is spent in multiples of `unit`. Each segment is an independent
/// linear item capped at price*length; concavity makes this relaxation exact up to rounding.
/// The argmax is found in doubles, the returned utility is recomputed exactly.
inline Rational dp_optimal_bundle(const Buyer& b, const PriceVector& p, const Rational& budget, const Rational& unit) {
  if (unit <= 0) throw std::invalid_argument("dp_optimal_bundle: unit must be positive");
  Rational steps_r = budget / unit;
  if (den(steps_r) != 1) throw std::invalid_argument("dp_optimal_bundle: unit must divide the budget");
  const long N = steps_r.convert_to<long>();
  Rational free_utility = 0;
  struct Item {
    Rational rate;  // utility per unit of money step
    long cap;       // money steps
  };
  std::vector<Item> items;
  for (const auto& [j, u] : b.utilities)
    for (const auto& s : u) {
      if (s.slope <= 0) continue;
      if (p[j] == 0) {
        if (s.infinite()) throw InfiniteOptimum();
        free_utility += s.slope * *s.length;
        continue;
      }
      long cap = N;
      if (!s.infinite()) {
        Integer c = floor_int(p[j] * *s.length / unit);
        if (c < cap) cap = c.convert_to<long>();
      }
      items.push_back({s.slope / p[j] * unit, cap});
    }
  const std::size_t K = items.size();
  std::vector<std::vector<long>> choice(K, std::vector<long>(N + 1, 0));
  std::vector<double> dp(N + 1, 0.0), next(N + 1);
  for (std::size_t k = 0; k < K; ++k) {
    const double r = to_double(items[k].rate);
    const long c = items[k].cap;
    // next[b] = r b + max_{b-c <= i <= b} (dp[i] - r i), sliding-window maximum
    std::deque<long> win;
    for (long bb = 0; bb <= N; ++bb) {
      double val = dp[bb] - r * static_cast<double>(bb);
      while (!win.empty() && dp[win.back()] - r * static_cast<double>(win.back()) <= val) win.pop_back();
      win.push_back(bb);
      while (win.front() < bb - c) win.pop_front();
      long i = win.front();
      next[bb] = dp[i] + r * static_cast<double>(bb - i);
      choice[k][bb] = bb - i;
    }
    dp.swap(next);
  }
  Rational total = free_utility;
  long bb = N;
  for (std::size_t k = K; k-- > 0;) {
    long m = choice[k][bb];
    total += items[k].rate * Rational(m);
    bb -= m;
  }
  return total;
}

/// Lower bound guaranteed for dp_optimal_bundle: optimum - (max slope/price) * unit * segments.
inline Rational dp_discretization_bound(const Buyer& b, const PriceVector& p, const Rational& unit) {
  Rational best = 0;
  std::size_t segs = 0;
  for (const auto& [j, u] : b.utilities)
    for (const auto& s : u)
      if (s.slope > 0 && p[j] > 0) {
        best = rmax(best, s.slope / p[j]);
        ++segs;
      }
  return best * unit * Rational(static_cast<long>(segs));
}

// ---------------------------------------------------------------- Pure-Circuit brute force

inline TernaryAssignment brute_force_pure_solve(const PureCircuitInstance& inst) {
  if (inst.n > 12) throw std::invalid_argument("brute_force_pure_solve: at most 12 nodes");
  TernaryAssignment a(inst.n, Tern::Zero);
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < inst.n; ++i) total *= 3;
  for (std::uint64_t code = 0; code < total; ++code) {
    std::uint64_t c = code;
    for (std::size_t i = 0; i < inst.n; ++i) {
      a[i] = static_cast<Tern>(c % 3);
      c /= 3;
    }
    bool ok = true;
    for (const auto& g : inst.gates)
      if (!check_pure_gate(g, a)) {
        ok = false;
        break;
      }
    if (ok) return a;
  }
  throw NotFound("brute_force_pure_solve: no satisfying assignment");
}

// ---------------------------------------------------------------- equilibrium search

namespace detail {

template <class T>
T convert(const Rational& r) {
  if constexpr (std::is_same_v<T, Rational>)
    return r;
  else
    return to_double(r);
}

/// Money per (buyer, good). Segments more than a factor (1 + tau) above the buyer's marginal
/// bang-per-buck are bought fully; the rest of the budget goes to segments within that factor,
/// routed by max-flow so that no good exceeds one unit where possible.
template <class T>
std::vector<std::vector<T>> tolerant_spending(const Market& m, const std::vector<T>& p, const T& tau, const T& tol) {
  const std::size_t B = m.num_buyers(), G = m.num_goods();
  std::vector<std::vector<T>> money(B, std::vector<T>(G, T(0)));
  std::vector<T> forced(G, T(0));
  struct Flex {
    std::size_t good;
    T cap;  // money
  };
  std::vector<std::vector<Flex>> flex(B);
  std::vector<T> rest(B, T(0));
  for (std::size_t i = 0; i < B; ++i) {
    const Buyer& b = m.buyers[i];
    struct S {
      std::size_t good;
      T bpb;
      std::optional<T> cost;
    };
    std::vector<S> segs;
    for (const auto& [j, u] : b.utilities)
      for (const auto& s : u) {
        if (s.slope <= 0 || !(p[j] > 0)) continue;
        std::optional<T> cost;
        if (!s.infinite()) cost = p[j] * convert<T>(*s.length);
        segs.push_back({j, convert<T>(s.slope) / p[j], cost});
      }
    std::stable_sort(segs.begin(), segs.end(), [](const S& x, const S& y) { return x.bpb > y.bpb; });
    T left = convert<T>(b.budget);
    T alpha = 0;
    for (const auto& s : segs) {
      if (!(left > tol)) break;
      alpha = s.bpb;
      if (!s.cost || *s.cost >= left) {
        left = 0;
        break;
      }
      left -= *s.cost;
    }
    if (left > tol) {
      // satiable: everything is bought, remaining money stays unspent
      for (const auto& s : segs) money[i][s.good] += *s.cost;
      for (const auto& s : segs) forced[s.good] += *s.cost;
      continue;
    }
    T spent = 0;
    for (const auto& s : segs) {
      if (s.bpb > alpha * (T(1) + tau) * (T(1) + tol)) {
        money[i][s.good] += *s.cost;
        forced[s.good] += *s.cost;
        spent += *s.cost;
      } else if (s.bpb * (T(1) + tau) * (T(1) + tol) >= alpha) {
        flex[i].push_back({s.good, s.cost ? *s.cost : convert<T>(b.budget)});
      }
    }
    rest[i] = convert<T>(b.budget) - spent;
  }
  BasicFlowNetwork<T> net;
  std::vector<std::size_t> bn(B), gn(G);
  for (std::size_t i = 0; i < B; ++i) bn[i] = net.add_node("b" + std::to_string(i));
  for (std::size_t j = 0; j < G; ++j) gn[j] = net.add_node("g" + std::to_string(j));
  std::vector<std::vector<std::size_t>> edge_of(B);
  for (std::size_t i = 0; i < B; ++i) {
    if (rest[i] > tol) net.add_edge(BasicFlowNetwork<T>::source, bn[i], rest[i]);
    for (const auto& f : flex[i]) edge_of[i].push_back(net.add_edge(bn[i], gn[f.good], f.cap));
  }
  for (std::size_t j = 0; j < G; ++j) {
    T room = p[j] - forced[j];
    if (room > tol) net.add_edge(gn[j], BasicFlowNetwork<T>::sink, room);
  }
  max_flow(net, tol);
  for (std::size_t i = 0; i < B; ++i) {
    T placed = 0;
    for (std::size_t k = 0; k < flex[i].size(); ++k) {
      T f = net.edges[edge_of[i][k]].flow;
      money[i][flex[i][k].good] += f;
      placed += f;
    }
    T left = rest[i] - placed;
    for (std::size_t k = 0; k < flex[i].size() && left > tol; ++k) {
      T room = flex[i][k].cap - net.edges[edge_of[i][k]].flow;
      T add = room < left ? room : left;
      if (add > T(0)) {
        money[i][flex[i][k].good] += add;
        left -= add;
      }
    }
  }
  return money;
}

}  // namespace detail

struct SearchConfig {
  std::vector<Rational> grid;  // per-good seed prices; the product grid is sampled
  std::size_t refinement_rounds = 3;
  std::size_t random_seeds = 6;
  std::uint64_t rng_seed = 1;
  std::size_t iterations = 4000;
  std::size_t max_evaluations = 1000000;
  std::vector<std::int64_t> denominators{100, 1000, 10000, 100000, 1000000, 10000000};
  Rational dp_unit = Rational(1, 1000);
};

struct SearchResult {
  PriceVector p;
  Allocation x;
  EquilibriumReport report;
  std::size_t evaluations = 0;
};

/// Exact allocation at rational prices with tie tolerance tau.
inline Allocation tolerant_allocation(const Market& m, const PriceVector& p, const Rational& tau) {
  auto money = detail::tolerant_spending<Rational>(m, p, tau, Rational(0));
  Allocation x = zero_allocation(m);
  for (std::size_t i = 0; i < m.num_buyers(); ++i)
    for (std::size_t j = 0; j < m.num_goods(); ++j)
      if (p[j] > 0) x[i][j] = money[i][j] / p[j];
  return x;
}

/// Grid seeds, multiplicative tatonnement and coordinate descent on the clearing error in
/// doubles; candidates are rounded to rationals and accepted only by verify_equilibrium.
inline std::optional<SearchResult> search_equilibrium(const Market& m, const Rational& eps, const Rational& delta,
                                                      const SearchConfig& cfg = {}) {
  const std::size_t G = m.num_goods();
  if (G == 0 || G > 5) throw std::invalid_argument("search_equilibrium: between 1 and 5 goods");
  std::size_t evals = 0;
  const double tau = std::min(0.5, to_double(delta) / 2);
  const double tol = 1e-12;
  double total_budget = 0;
  for (const auto& b : m.buyers) total_budget += to_double(b.budget);
  // clearing error at tie tolerance t; *spent receives the money actually spent
  auto error = [&](const std::vector<double>& p, double t, std::vector<double>* z, double* spent) {
    ++evals;
    auto money = detail::tolerant_spending<double>(m, p, t, tol);
    double worst = 0, total = 0;
    if (z) z->assign(G, 0.0);
    for (std::size_t j = 0; j < G; ++j) {
      double d = 0;
      for (std::size_t i = 0; i < m.num_buyers(); ++i) d += money[i][j];
      total += d;
      d = d / p[j] - 1;
      if (z) (*z)[j] = d;
      worst = std::max(worst, std::abs(d));
    }
    if (spent) *spent = total;
    return worst;
  };
  std::vector<std::vector<double>> seeds;
  seeds.push_back(std::vector<double>(G, total_budget / static_cast<double>(G)));
  if (!cfg.grid.empty()) {
    std::vector<std::size_t> idx(G, 0);
    for (std::size_t k = 0; k < 64; ++k) {
      std::vector<double> s(G);
      for (std::size_t j = 0; j < G; ++j) s[j] = to_double(cfg.grid[idx[j]]);
      seeds.push_back(s);
      std::size_t j = 0;
      while (j < G && ++idx[j] == cfg.grid.size()) idx[j++] = 0;
      if (j == G) break;
    }
  }
  std::mt19937_64 rng(cfg.rng_seed);
  std::uniform_real_distribution<double> unif(0.25, 4.0);
  for (std::size_t k = 0; k < cfg.random_seeds; ++k) {
    std::vector<double> s(G);
    for (auto& v : s) v = unif(rng) * total_budget / static_cast<double>(G);
    seeds.push_back(s);
  }
  auto try_exact = [&](const std::vector<double>& p) -> std::optional<SearchResult> {
    for (auto md : cfg.denominators) {
      PriceVector pr(G);
      bool ok = true;
      for (std::size_t j = 0; j < G; ++j) {
        pr[j] = approximate(p[j], md);
        if (pr[j] <= 0) ok = false;
      }
      if (!ok) continue;
      for (const Rational& t : {Rational(0), delta / 2}) {
        ++evals;
        Allocation x = tolerant_allocation(m, pr, t);
        auto rep = verify_equilibrium(m, pr, x, eps, delta);
        if (rep.accepted) return SearchResult{pr, x, rep, evals};
        if (delta == 0) break;
      }
    }
    return std::nullopt;
  };
  const double target = to_double(eps) / 4;
  // tie tolerance homotopy: wide windows first, so that the error has no flat plateaus
  std::vector<double> taus;
  for (double t = 0.25; t > tau; t /= 5) taus.push_back(t);
  taus.push_back(tau);
  for (std::size_t round = 0; round <= cfg.refinement_rounds; ++round) {
    const std::size_t iters = cfg.iterations << round;
    for (const auto& seed : seeds) {
      if (evals >= cfg.max_evaluations) return std::nullopt;
      std::vector<double> p = seed;
      for (double t : taus) {
        std::vector<double> z, best = p;
        double spent = 0;
        double best_err = error(p, t, &z, &spent);
        for (std::size_t it = 0; it < iters && best_err > target && evals < cfg.max_evaluations; ++it) {
          double eta = 0.5 / (1.0 + static_cast<double>(it) / 200.0);
          double sum = 0;
          for (std::size_t j = 0; j < G; ++j) {
            p[j] *= std::exp(eta * std::clamp(z[j], -1.0, 1.0));
            sum += p[j];
          }
          if (spent > 0) {
            for (auto& v : p) v *= spent / sum;
          }
          double e = error(p, t, &z, &spent);
          if (e < best_err) {
            best_err = e;
            best = p;
          }
        }
        // coordinate descent polish
        double step = 0.05;
        p = best;
        while (step > 1e-13 && best_err > target / 16 && evals < cfg.max_evaluations) {
          bool improved = false;
          for (std::size_t j = 0; j < G; ++j)
            for (double dir : {1.0, -1.0}) {
              std::vector<double> q = p;
              q[j] *= 1 + dir * step;
              double e = error(q, t, nullptr, nullptr);
              if (e < best_err) {
                best_err = e;
                p = q;
                improved = true;
              }
            }
          if (!improved) step /= 2;
        }
      }
      if (auto r = try_exact(p)) return r;
    }
  }
  return std::nullopt;
}

}  // namespace fmarket
