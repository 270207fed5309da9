#include "fmarket/oracles.hpp"
#include "support/markets.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace fmarket;

namespace {

Segment seg(Rational s, std::optional<Rational> l = std::nullopt) { return {std::move(s), std::move(l)}; }

}  // namespace

TEST(DpOracle, TwoGoodExample) {
  Buyer b{2, {{0, {seg(3, Rational(1, 2)), seg(1)}}, {1, {seg(2, 1)}}}};
  PriceVector p{1, 2};
  // 1/2 unit of good 0 at slope 3, then good 1 at bpb 1 ties with good 0's tail
  EXPECT_EQ(optimal_bundle(b, p, 2).utility, Rational(3, 2) + Rational(3, 2));
  EXPECT_EQ(dp_optimal_bundle(b, p, 2, Rational(1, 100)), 3);
}

TEST(DpOracle, ZeroBudget) {
  Buyer b{0, {{0, {seg(1)}}}};
  EXPECT_EQ(dp_optimal_bundle(b, {1}, 0, Rational(1, 10)), 0);
}

TEST(DpOracle, UnitMustDivideBudget) {
  Buyer b{1, {{0, {seg(1)}}}};
  EXPECT_THROW(dp_optimal_bundle(b, {1}, 1, Rational(2, 3)), std::invalid_argument);
}

TEST(DpOracle, BracketsGreedy) {
  std::mt19937_64 rng(11);
  const std::vector<Rational> slopes{1, Rational(3, 2), 2, 3}, lengths{Rational(1, 2), 1, Rational(3, 2), 2};
  const std::vector<Rational> prices{Rational(1, 2), 1, Rational(3, 2), 2};
  const Rational unit(1, 20);
  for (int t = 0; t < 200; ++t) {
    Buyer b;
    b.budget = Rational(1 + harness::below(rng, 4), 2);
    std::size_t goods = 1 + harness::below(rng, 3);
    PriceVector p;
    for (std::size_t j = 0; j < goods; ++j) {
      p.push_back(harness::pick_of(rng, prices));
      b.utilities[j] = harness::random_utility(rng, 1 + harness::below(rng, 3), slopes, lengths, false);
    }
    Rational greedy = optimal_bundle(b, p, b.budget).utility;
    Rational dp = dp_optimal_bundle(b, p, b.budget, unit);
    EXPECT_LE(dp, greedy);
    EXPECT_GE(dp, greedy - dp_discretization_bound(b, p, unit));
  }
}

TEST(BruteForce, ThreeNodeInstance) {
  PureCircuitInstance inst{3, {purify_gate(0, 1, 2), nand_gate(1, 2, 0)}};
  auto a = brute_force_pure_solve(inst);
  ASSERT_EQ(a.size(), 3u);
  for (const auto& g : inst.gates) EXPECT_TRUE(check_pure_gate(g, a));
}

TEST(BruteForce, EmptyInstance) { EXPECT_TRUE(brute_force_pure_solve({0, {}}).empty()); }

TEST(BruteForce, TooLarge) { EXPECT_THROW(brute_force_pure_solve({13, {}}), std::invalid_argument); }

TEST(Search, SingleBuyerSingleGood) {
  Market m;
  m.goods = {"g"};
  m.buyers.push_back({1, {{0, {seg(1)}}}});
  auto r = search_equilibrium(m, Rational(1, 100), Rational(1, 100));
  ASSERT_TRUE(r.has_value());
  EXPECT_TRUE(r->report.accepted);
  EXPECT_EQ(r->p[0], 1);
}

TEST(Search, TwoBuyersEqualIncomes) {
  Market m;
  m.goods = {"a", "b"};
  m.buyers.push_back({1, {{0, {seg(2)}}, {1, {seg(1)}}}});
  m.buyers.push_back({1, {{0, {seg(1)}}, {1, {seg(2)}}}});
  auto r = search_equilibrium(m, Rational(1, 100), Rational(1, 100));
  ASSERT_TRUE(r.has_value());
  EXPECT_TRUE(r->report.accepted);
  EXPECT_TRUE(verify_equilibrium(m, r->p, r->x, Rational(1, 100), Rational(1, 100)).accepted);
}

TEST(Search, RejectsTooManyGoods) {
  Market m;
  m.goods.assign(6, "g");
  m.buyers.push_back({1, {{0, {seg(1)}}}});
  EXPECT_THROW(search_equilibrium(m, Rational(1, 10), Rational(1, 10)), std::invalid_argument);
}

TEST(TolerantAllocation, SpendsBudgetOnTies) {
  Market m;
  m.goods = {"a", "b"};
  m.buyers.push_back({2, {{0, {seg(1)}}, {1, {seg(1)}}}});
  auto x = tolerant_allocation(m, {1, 1}, Rational(1, 10));
  EXPECT_EQ(x[0][0] + x[0][1], 2);
}
