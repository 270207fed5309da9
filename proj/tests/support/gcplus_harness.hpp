#pragma once

#include "fmarket/equivalence.hpp"

#include <random>
#include <vector>

namespace harness {

using namespace fmarket;

inline Rational pick(std::mt19937_64& rng, const std::vector<Rational>& xs) {
  return xs[std::uniform_int_distribution<std::size_t>(0, xs.size() - 1)(rng)];
}

inline VarBounds random_bounds(std::mt19937_64& rng) {
  static const std::vector<Rational> grid{-2, Rational(-3, 2), -1, Rational(-1, 2), 0, Rational(1, 2), 1, Rational(3, 2), 2};
  if (std::uniform_int_distribution<int>(0, 2)(rng) == 0) return {0, 1};
  for (;;) {
    Rational a = pick(rng, grid), b = pick(rng, grid);
    if (a < b) return {a, b};
  }
}

/// Acyclic instance: gate t writes variable t and reads earlier variables only.
inline GCircuitPlusInstance random_gcircuitplus(std::mt19937_64& rng, std::size_t gates) {
  static const std::vector<Rational> scales{-2, Rational(-3, 2), -1, Rational(-1, 2), 0, Rational(1, 3), Rational(1, 2),
                                            Rational(3, 4), 1, Rational(3, 2), 2};
  static const std::vector<Rational> consts{-2, Rational(-3, 2), -1, Rational(-1, 2), 0, Rational(1, 4), Rational(1, 2), 1,
                                            Rational(3, 2), 2};
  GCircuitPlusInstance g;
  g.L = -2;
  g.U = 2;
  g.n = gates;
  auto any_var = [&](std::size_t t) { return std::uniform_int_distribution<std::size_t>(0, t - 1)(rng); };
  auto unit_var = [&](std::size_t t) -> std::size_t {
    std::vector<std::size_t> c;
    for (std::size_t x = 0; x < t; ++x)
      if (g.bounds[x].lo == 0 && g.bounds[x].hi == 1) c.push_back(x);
    if (c.empty()) return nil;
    return c[std::uniform_int_distribution<std::size_t>(0, c.size() - 1)(rng)];
  };
  for (std::size_t t = 0; t < gates; ++t) {
    int k = t == 0 ? 0 : std::uniform_int_distribution<int>(0, 10)(rng);
    GGate gt{GKind::Const, nil, nil, t, 0};
    VarBounds wb = random_bounds(rng);
    switch (k) {
      case 0: {
        std::vector<Rational> inside;
        for (const auto& c : consts)
          if (c >= wb.lo && c <= wb.hi) inside.push_back(c);
        gt.c = pick(rng, inside);
        break;
      }
      case 1: gt = {GKind::Scale, any_var(t), nil, t, pick(rng, scales)}; break;
      case 2:
        gt = {GKind::Copy, any_var(t), nil, t, 0};
        wb = g.bounds[gt.u];
        break;
      case 3: gt = {GKind::Add, any_var(t), any_var(t), t, 0}; break;
      case 4: gt = {GKind::Sub, any_var(t), any_var(t), t, 0}; break;
      case 5:
        gt = {GKind::Less, any_var(t), any_var(t), t, 0};
        wb = {0, 1};
        break;
      case 6:
      case 7:
      case 8: {
        std::size_t u = unit_var(t), v = unit_var(t);
        if (u == nil) {
          gt = {GKind::Add, any_var(t), any_var(t), t, 0};
          break;
        }
        GKind kind = k == 6 ? GKind::Or : k == 7 ? GKind::And : GKind::Not;
        gt = {kind, u, kind == GKind::Not ? nil : v, t, 0};
        wb = {0, 1};
        break;
      }
      default:
        gt = {k == 9 ? GKind::Min : GKind::Max, any_var(t), nil, t, pick(rng, consts)};
        wb = {g.L, g.U};
    }
    g.gates.push_back(gt);
    g.bounds.push_back(wb);
  }
  return g;
}

inline Rational exact_gcircuit_value(const GGate& g, const RealAssignment& a) {
  Rational u = g.u == nil ? Rational(0) : a[g.u], v = g.v == nil ? Rational(0) : a[g.v];
  switch (g.kind) {
    case GKind::Const: return g.c;
    case GKind::Scale: return clamp(u * g.c, 0, 1);
    case GKind::Copy: return u;
    case GKind::Add: return rmin(u + v, 1);
    case GKind::Sub: return rmax(u - v, 0);
    default: return 0;
  }
}

/// Evaluates a lowered instance in gate order, moving every output by an adversarial
/// amount of at most eps (or anywhere in [0,1] inside the undetermined G_< band).
inline RealAssignment perturbed_run(const GCircuitInstance& gc, const Rational& eps, std::mt19937_64& rng) {
  static const std::vector<Rational> shifts{-1, Rational(-1, 2), 0, Rational(1, 2), 1};
  RealAssignment a(gc.n, Rational(0));
  for (const auto& g : gc.gates) {
    Rational target;
    if (g.kind == GKind::Less) {
      Rational u = a[g.u], v = a[g.v];
      if (u < v - eps)
        target = 1;
      else if (u > v + eps)
        target = 0;
      else {
        a[g.w] = pick(rng, {0, Rational(1, 3), Rational(1, 2), 1});
        continue;
      }
    } else {
      target = exact_gcircuit_value(g, a);
    }
    a[g.w] = clamp(target + eps * pick(rng, shifts), 0, 1);
  }
  return a;
}

}  // namespace harness
