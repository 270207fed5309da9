#pragma once

#include "fmarket/market.hpp"

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace harness {

using namespace fmarket;

inline Rational pick_of(std::mt19937_64& rng, const std::vector<Rational>& xs) {
  return xs[std::uniform_int_distribution<std::size_t>(0, xs.size() - 1)(rng)];
}

inline std::size_t below(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

/// Random SPLC utility with strictly decreasing slopes drawn from `slopes`.
inline SplcUtility random_utility(std::mt19937_64& rng, std::size_t segs, const std::vector<Rational>& slopes,
                                  const std::vector<Rational>& lengths, bool last_infinite) {
  std::vector<Rational> s;
  while (s.size() < segs) {
    Rational v = pick_of(rng, slopes);
    if (s.empty() || v < s.back()) s.push_back(v);
    if (s.size() < segs && s.back() == slopes.front()) break;
    if (s.size() < segs && std::find(slopes.begin(), slopes.end(), s.back()) == slopes.begin()) break;
  }
  std::sort(s.begin(), s.end(), [](const Rational& a, const Rational& b) { return a > b; });
  SplcUtility u;
  for (std::size_t k = 0; k < s.size(); ++k) {
    bool inf = last_infinite && k + 1 == s.size();
    u.push_back({s[k], inf ? std::nullopt : std::optional<Rational>(pick_of(rng, lengths))});
  }
  return u;
}

/// Degree <= 2 market; every good is valued by at least one buyer and every buyer has an
/// unbounded utility for its first good.
inline Market random_reducible_market(std::mt19937_64& rng, std::size_t max_buyers, std::size_t max_goods,
                                      std::size_t max_segs) {
  static const std::vector<Rational> slopes{1, Rational(3, 2), 2, 3};
  static const std::vector<Rational> lengths{Rational(1, 2), 1, Rational(3, 2), 2};
  static const std::vector<Rational> budgets{1, Rational(3, 2), 2};
  std::size_t nb = 1 + below(rng, max_buyers), ng = 1 + below(rng, max_goods);
  Market m;
  for (std::size_t j = 0; j < ng; ++j) m.goods.push_back("g" + std::to_string(j));
  m.buyers.resize(nb);
  std::vector<std::size_t> per_good(ng, 0);
  auto give = [&](std::size_t i, std::size_t j) {
    if (m.buyers[i].utilities.count(j) || m.buyers[i].utilities.size() >= 2 || per_good[j] >= 2) return false;
    bool first = m.buyers[i].utilities.empty();
    m.buyers[i].utilities[j] = random_utility(rng, 1 + below(rng, max_segs), slopes, lengths, first);
    ++per_good[j];
    return true;
  };
  for (std::size_t i = 0; i < nb; ++i) m.buyers[i].budget = pick_of(rng, budgets);
  for (std::size_t j = 0; j < ng; ++j)
    for (std::size_t tries = 0; tries < 16 && per_good[j] == 0; ++tries) give(below(rng, nb), j);
  for (std::size_t i = 0; i < nb; ++i)
    for (std::size_t tries = 0; tries < 16 && m.buyers[i].utilities.empty(); ++tries) give(i, below(rng, ng));
  for (std::size_t t = 0; t < nb; ++t) give(below(rng, nb), below(rng, ng));
  std::erase_if(m.buyers, [](const Buyer& b) { return b.utilities.empty(); });
  return m;
}

/// CEEI market with linear capped utilities: every buyer has budget 1, one uncapped good and
/// at most one capped good, and every good has at most two interested buyers.
inline Market random_simple_market(std::mt19937_64& rng, std::size_t max_buyers, std::size_t max_goods) {
  static const std::vector<Rational> slopes{Rational(1, 2), 1, Rational(3, 2), 2, 3};
  static const std::vector<Rational> caps{Rational(1, 4), Rational(1, 2), 1, Rational(3, 2)};
  std::size_t nb = 1 + below(rng, max_buyers), ng = 1 + below(rng, max_goods);
  Market m;
  for (std::size_t j = 0; j < ng; ++j) m.goods.push_back("g" + std::to_string(j));
  std::vector<std::size_t> per_good(ng, 0);
  for (std::size_t i = 0; i < nb; ++i) {
    Buyer b;
    b.budget = 1;
    std::size_t j = (i < ng && per_good[i] < 2) ? i : below(rng, ng);
    if (per_good[j] >= 2) continue;
    b.utilities[j] = {{pick_of(rng, slopes), std::nullopt}};
    ++per_good[j];
    std::size_t k = below(rng, ng);
    if (k != j && per_good[k] < 2 && below(rng, 2) == 0) {
      SplcUtility u{{pick_of(rng, slopes), pick_of(rng, caps)}};
      if (below(rng, 2) == 0) u.push_back({0, std::nullopt});
      b.utilities[k] = u;
      ++per_good[k];
    }
    m.buyers.push_back(std::move(b));
  }
  // goods nobody values would have zero price; drop them
  std::vector<std::size_t> keep(ng, SIZE_MAX);
  Market out;
  for (std::size_t j = 0; j < ng; ++j)
    if (per_good[j] > 0) {
      keep[j] = out.goods.size();
      out.goods.push_back(m.goods[j]);
    }
  for (auto& b : m.buyers) {
    Buyer c{b.budget, {}};
    for (auto& [j, u] : b.utilities) c.utilities[keep[j]] = std::move(u);
    out.buyers.push_back(std::move(c));
  }
  return out;
}

}  // namespace harness
