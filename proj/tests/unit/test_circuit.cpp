#include "fmarket/circuit.hpp"
#include "fmarket/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace fmarket;

namespace {

const Tern Z = Tern::Zero, O = Tern::One, B = Tern::Bot;
const std::vector<Tern> all3{Z, O, B};

GGate gg(GKind k, std::size_t u, std::size_t v, std::size_t w, Rational c = 0) { return {k, u, v, w, std::move(c)}; }

}  // namespace

TEST(PureGate, NandTruthTable) {
  auto g = nand_gate(0, 1, 2);
  EXPECT_TRUE(check_pure_gate(g, {O, O, Z}));
  EXPECT_FALSE(check_pure_gate(g, {O, O, O}));
  EXPECT_FALSE(check_pure_gate(g, {O, O, B}));
  EXPECT_TRUE(check_pure_gate(g, {Z, B, O}));
  EXPECT_FALSE(check_pure_gate(g, {Z, B, Z}));
  EXPECT_FALSE(check_pure_gate(g, {Z, B, B}));
  // 1 and ⊥: any output
  for (Tern w : all3) EXPECT_TRUE(check_pure_gate(g, {O, B, w}));
}

TEST(PureGate, PurifyTruthTable) {
  auto g = purify_gate(0, 1, 2);
  EXPECT_FALSE(check_pure_gate(g, {B, B, B}));
  EXPECT_TRUE(check_pure_gate(g, {B, Z, B}));
  EXPECT_TRUE(check_pure_gate(g, {B, B, O}));
  EXPECT_TRUE(check_pure_gate(g, {Z, Z, Z}));
  EXPECT_FALSE(check_pure_gate(g, {Z, Z, O}));
  EXPECT_TRUE(check_pure_gate(g, {O, O, O}));
  EXPECT_FALSE(check_pure_gate(g, {O, B, O}));
}

TEST(PureGate, EveryInputHasASatisfyingOutput) {
  for (auto k : {PureKind::Nand, PureKind::Or, PureKind::And, PureKind::Not, PureKind::Purify})
    for (Tern a : all3)
      for (Tern b : all3) {
        bool found = false;
        for (Tern x : all3)
          for (Tern y : all3) {
            PureGate g{k, 0, k == PureKind::Not ? nil : std::size_t(1), 2};
            if (k == PureKind::Purify) {
              found = found || check_pure_gate(g, {a, x, y});
            } else {
              found = found || check_pure_gate(g, {a, b, x});
            }
          }
        EXPECT_TRUE(found) << pure_kind_name(k);
      }
}

TEST(PureGate, NamesRoundTrip) {
  for (auto k : {PureKind::Nand, PureKind::Purify, PureKind::Not, PureKind::Or, PureKind::And, PureKind::Const0,
                 PureKind::Const1})
    EXPECT_EQ(parse_pure_kind(pure_kind_name(k)), k);
  for (Tern t : all3) EXPECT_EQ(parse_tern(tern_name(t)), t);
  EXPECT_THROW(parse_tern("2"), std::invalid_argument);
}

TEST(Satisfaction, Fractions) {
  PureCircuitInstance inst{3, {purify_gate(0, 1, 2), nand_gate(1, 2, 0)}};
  EXPECT_EQ(satisfaction_fraction(inst, {B, O, B}), 1);
  EXPECT_EQ(satisfaction_fraction(inst, {O, O, O}), Rational(1, 2));
  PureCircuitInstance four{4, {not_gate(0, 1), not_gate(1, 2), not_gate(2, 3), not_gate(3, 0)}};
  EXPECT_EQ(satisfaction_fraction(four, {Z, O, Z, B}), Rational(3, 4));
  auto a = brute_force_pure_solve(inst);
  EXPECT_EQ(satisfaction_fraction(inst, a), 1);
}

TEST(Structure, StrictExample) {
  PureCircuitInstance inst{3, {purify_gate(0, 1, 2), nand_gate(1, 2, 0)}};
  EXPECT_TRUE(validate_structure(inst, true).ok);
}

TEST(Structure, TwoProducersRejected) {
  PureCircuitInstance inst{3, {not_gate(0, 1), not_gate(2, 1), not_gate(1, 0)}};
  EXPECT_FALSE(validate_structure(inst, false).ok);
}

TEST(Structure, UnusedNodeRejectedInStrictMode) {
  PureCircuitInstance inst{2, {not_gate(0, 1), const_gate(true, 0)}};
  EXPECT_TRUE(validate_structure(inst, false).ok);
  EXPECT_FALSE(validate_structure(inst, true).ok);
}

TEST(GCircuit, AddWithinEps) {
  EXPECT_TRUE(check_gcircuit_gate(gg(GKind::Add, 0, 1, 2), {Rational(3, 10), Rational(2, 5), Rational(3, 4)}, Rational(1, 20)));
  EXPECT_FALSE(check_gcircuit_gate(gg(GKind::Add, 0, 1, 2), {Rational(3, 10), Rational(2, 5), Rational(3, 4)}, Rational(1, 25)));
}

TEST(GCircuit, LessRequiresOne) {
  auto g = gg(GKind::Less, 0, 1, 2);
  Rational e(1, 10);
  EXPECT_TRUE(check_gcircuit_gate(g, {Rational(1, 5), Rational(1, 2), Rational(9, 10)}, e));
  EXPECT_FALSE(check_gcircuit_gate(g, {Rational(1, 5), Rational(1, 2), Rational(4, 5)}, e));
  // middle band is unconstrained
  EXPECT_TRUE(check_gcircuit_gate(g, {Rational(1, 2), Rational(11, 20), Rational(1, 3)}, e));
}

TEST(GCircuit, ScaleSaturates) {
  auto g = gg(GKind::Scale, 0, nil, 1, 3);
  EXPECT_TRUE(check_gcircuit_gate(g, {Rational(1, 2), 1}, 0));
  EXPECT_FALSE(check_gcircuit_gate(g, {Rational(1, 2), Rational(3, 2)}, 0));
}

// Logical gates are left out: their trigger regions grow with eps (see LogicalNotEpsMonotone).
TEST(GCircuit, EpsMonotone) {
  std::mt19937_64 rng(9);
  const std::vector<GKind> kinds{GKind::Const, GKind::Scale, GKind::Copy, GKind::Add, GKind::Sub, GKind::Less};
  const std::vector<Rational> eps{0, Rational(1, 20), Rational(1, 10), Rational(1, 4)};
  std::uniform_int_distribution<int> v(0, 10);
  for (int t = 0; t < 2000; ++t) {
    GKind k = kinds[t % kinds.size()];
    GGate g = gg(k, garity(k) >= 1 ? 0 : nil, garity(k) >= 2 ? 1 : nil, 2, Rational(v(rng), 10));
    RealAssignment a{Rational(v(rng), 10), Rational(v(rng), 10), Rational(v(rng), 10)};
    for (std::size_t e = 0; e < eps.size(); ++e)
      if (check_gcircuit_gate(g, a, eps[e]))
        for (std::size_t f = e; f < eps.size(); ++f) EXPECT_TRUE(check_gcircuit_gate(g, a, eps[f])) << gkind_name(k);
  }
}

TEST(GCircuit, LogicalNotEpsMonotone) {
  // u = 9/10 lies in the unconstrained band at eps = 0 but triggers the OR row at eps = 1/10
  auto g = gg(GKind::Or, 0, 1, 2);
  RealAssignment a{Rational(9, 10), 0, Rational(1, 2)};
  EXPECT_TRUE(check_gcircuit_gate(g, a, 0));
  EXPECT_FALSE(check_gcircuit_gate(g, a, Rational(1, 10)));
}

TEST(GCircuitPlus, AddSaturatesAtUpperBound) {
  std::vector<VarBounds> b{{0, 2}, {0, 2}, {0, 2}};
  EXPECT_TRUE(check_gcircuitplus_gate(gg(GKind::Add, 0, 1, 2), b, {Rational(3, 2), Rational(3, 2), 2}, 0));
  EXPECT_FALSE(check_gcircuitplus_gate(gg(GKind::Add, 0, 1, 2), b, {Rational(3, 2), Rational(3, 2), Rational(3, 2)}, 0));
}

TEST(GCircuitPlus, MaxWithConstant) {
  std::vector<VarBounds> b{{-1, 1}, {-1, 1}};
  EXPECT_TRUE(check_gcircuitplus_gate(gg(GKind::Max, 0, nil, 1, 0), b, {Rational(-1, 2), 0}, 0));
  EXPECT_FALSE(check_gcircuitplus_gate(gg(GKind::Max, 0, nil, 1, 0), b, {Rational(-1, 2), Rational(-1, 2)}, 0));
}

TEST(GCircuitPlus, NegativeScaleAllowed) {
  GCircuitPlusInstance gc{2, {gg(GKind::Const, nil, nil, 0, Rational(1, 2)), gg(GKind::Scale, 0, nil, 1, -2)}, {{-1, 1}, {-2, 2}}, -2, 2, 0};
  EXPECT_TRUE(validate_gcircuitplus(gc).ok);
  EXPECT_TRUE(check_gcircuitplus_gate(gc.gates[0], gc.bounds, {Rational(1, 2), -1}, 0));
}

TEST(GCircuitPlus, BoundViolationThrows) {
  std::vector<VarBounds> b{{0, 1}, {0, 1}};
  EXPECT_THROW(check_gcircuitplus_gate(gg(GKind::Copy, 0, nil, 1), b, {Rational(3, 2), 1}, 0), BoundViolation);
}

TEST(GCircuitPlus, AgreesWithGCircuitOnUnitBounds) {
  std::mt19937_64 rng(21);
  const std::vector<GKind> kinds{GKind::Const, GKind::Scale, GKind::Copy, GKind::Add, GKind::Sub,
                                 GKind::Less,  GKind::Or,    GKind::And,  GKind::Not};
  std::uniform_int_distribution<int> v(0, 8);
  std::vector<VarBounds> unit(3, VarBounds{0, 1});
  for (int t = 0; t < 3000; ++t) {
    GKind k = kinds[t % kinds.size()];
    GGate g = gg(k, garity(k) >= 1 ? 0 : nil, garity(k) >= 2 ? 1 : nil, 2, Rational(v(rng), 8));
    RealAssignment a{Rational(v(rng), 8), Rational(v(rng), 8), Rational(v(rng), 8)};
    Rational e(v(rng) % 3, 16);
    EXPECT_EQ(check_gcircuit_gate(g, a, e), check_gcircuitplus_gate(g, unit, a, e)) << gkind_name(k);
  }
}
