#pragma once

#include "fmarket/market.hpp"
#include "fmarket/rational.hpp"

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fmarket {

constexpr std::size_t nil = std::numeric_limits<std::size_t>::max();

// ---------------------------------------------------------------- Pure-Circuit

enum class Tern : std::uint8_t { Zero = 0, One = 1, Bot = 2 };

inline bool pure(Tern t) { return t != Tern::Bot; }

inline const char* tern_name(Tern t) {
  switch (t) {
    case Tern::Zero: return "0";
    case Tern::One: return "1";
    default: return "bot";
  }
}

inline Tern parse_tern(const std::string& s) {
  if (s == "0") return Tern::Zero;
  if (s == "1") return Tern::One;
  if (s == "bot" || s == "⊥") return Tern::Bot;
  throw std::invalid_argument("bad ternary value '" + s + "'");
}

/// NAND(u,v)->w, PURIFY(u)->(v,w), NOT/AND/OR as in the extended basis,
/// CONST0/CONST1 ()->w.
enum class PureKind { Nand, Purify, Not, Or, And, Const0, Const1 };

inline const char* pure_kind_name(PureKind k) {
  switch (k) {
    case PureKind::Nand: return "NAND";
    case PureKind::Purify: return "PURIFY";
    case PureKind::Not: return "NOT";
    case PureKind::Or: return "OR";
    case PureKind::And: return "AND";
    case PureKind::Const0: return "CONST0";
    default: return "CONST1";
  }
}

inline PureKind parse_pure_kind(const std::string& s) {
  for (auto k : {PureKind::Nand, PureKind::Purify, PureKind::Not, PureKind::Or, PureKind::And, PureKind::Const0,
                 PureKind::Const1})
    if (s == pure_kind_name(k)) return k;
  throw std::invalid_argument("unknown pure gate kind '" + s + "'");
}

struct PureGate {
  PureKind kind;
  std::size_t u = nil, v = nil, w = nil;

  std::vector<std::size_t> inputs() const {
    switch (kind) {
      case PureKind::Nand:
      case PureKind::Or:
      case PureKind::And: return {u, v};
      case PureKind::Purify:
      case PureKind::Not: return {u};
      default: return {};
    }
  }
  std::vector<std::size_t> outputs() const {
    if (kind == PureKind::Purify) return {v, w};
    return {w};
  }
};

inline PureGate nand_gate(std::size_t u, std::size_t v, std::size_t w) { return {PureKind::Nand, u, v, w}; }
inline PureGate purify_gate(std::size_t u, std::size_t v, std::size_t w) { return {PureKind::Purify, u, v, w}; }
inline PureGate not_gate(std::size_t u, std::size_t w) { return {PureKind::Not, u, nil, w}; }
inline PureGate or_gate(std::size_t u, std::size_t v, std::size_t w) { return {PureKind::Or, u, v, w}; }
inline PureGate and_gate(std::size_t u, std::size_t v, std::size_t w) { return {PureKind::And, u, v, w}; }
inline PureGate const_gate(bool one, std::size_t w) { return {one ? PureKind::Const1 : PureKind::Const0, nil, nil, w}; }

struct PureCircuitInstance {
  std::size_t n = 0;
  std::vector<PureGate> gates;
};

using TernaryAssignment = std::vector<Tern>;

/// The forced output of a single-output gate, or nullopt when any value is allowed.
inline std::optional<Tern> forced_output(PureKind k, Tern a, Tern b) {
  switch (k) {
    case PureKind::Nand:
      if (a == Tern::Zero || b == Tern::Zero) return Tern::One;
      if (a == Tern::One && b == Tern::One) return Tern::Zero;
      return std::nullopt;
    case PureKind::Not:
      if (a == Tern::Zero) return Tern::One;
      if (a == Tern::One) return Tern::Zero;
      return std::nullopt;
    case PureKind::Or:
      if (a == Tern::One || b == Tern::One) return Tern::One;
      if (a == Tern::Zero && b == Tern::Zero) return Tern::Zero;
      return std::nullopt;
    case PureKind::And:
      if (a == Tern::Zero || b == Tern::Zero) return Tern::Zero;
      if (a == Tern::One && b == Tern::One) return Tern::One;
      return std::nullopt;
    case PureKind::Const0: return Tern::Zero;
    case PureKind::Const1: return Tern::One;
    default: throw std::logic_error("forced_output: PURIFY has two outputs");
  }
}

inline bool purify_ok(Tern in, Tern o1, Tern o2) {
  if (pure(in)) return o1 == in && o2 == in;
  return pure(o1) || pure(o2);
}

inline bool check_pure_gate(const PureGate& g, const TernaryAssignment& a) {
  if (g.kind == PureKind::Purify) return purify_ok(a[g.u], a[g.v], a[g.w]);
  Tern x = g.u == nil ? Tern::Bot : a[g.u];
  Tern y = g.v == nil ? Tern::Bot : a[g.v];
  auto f = forced_output(g.kind, x, y);
  return !f || a[g.w] == *f;
}

inline Rational satisfaction_fraction(const PureCircuitInstance& inst, const TernaryAssignment& a) {
  if (inst.gates.empty()) return 1;
  std::size_t ok = 0;
  for (const auto& g : inst.gates)
    if (check_pure_gate(g, a)) ++ok;
  return Rational(Integer(ok), Integer(inst.gates.size()));
}

inline StructureReport validate_structure(const PureCircuitInstance& inst, bool strict) {
  StructureReport r;
  std::vector<std::size_t> produced(inst.n, 0), consumed(inst.n, 0);
  for (std::size_t t = 0; t < inst.gates.size(); ++t) {
    const auto& g = inst.gates[t];
    auto ins = g.inputs();
    auto outs = g.outputs();
    std::vector<std::size_t> all = ins;
    all.insert(all.end(), outs.begin(), outs.end());
    bool bad = false;
    for (auto x : all)
      if (x >= inst.n) {
        r.fail("gate " + std::to_string(t) + ": node out of range");
        bad = true;
      }
    if (bad) continue;
    for (std::size_t a = 0; a < all.size(); ++a)
      for (std::size_t b = a + 1; b < all.size(); ++b)
        if (all[a] == all[b]) r.fail("gate " + std::to_string(t) + ": nodes must be distinct");
    for (auto x : ins) ++consumed[x];
    for (auto x : outs) ++produced[x];
  }
  for (std::size_t x = 0; x < inst.n; ++x) {
    if (produced[x] != 1)
      r.fail("node " + std::to_string(x) + " is the output of " + std::to_string(produced[x]) + " gates");
    if (strict && consumed[x] != 1)
      r.fail("node " + std::to_string(x) + " is the input of " + std::to_string(consumed[x]) + " gates");
  }
  return r;
}

// ---------------------------------------------------------------- GCircuit / GCircuit+

enum class GKind { Const, Scale, Copy, Add, Sub, Less, Or, And, Not, Min, Max };

inline const char* gkind_name(GKind k) {
  switch (k) {
    case GKind::Const: return "G_c";
    case GKind::Scale: return "G_xc";
    case GKind::Copy: return "G_=";
    case GKind::Add: return "G_+";
    case GKind::Sub: return "G_-";
    case GKind::Less: return "G_<";
    case GKind::Or: return "G_or";
    case GKind::And: return "G_and";
    case GKind::Not: return "G_not";
    case GKind::Min: return "G_min";
    default: return "G_max";
  }
}

inline GKind parse_gkind(const std::string& s) {
  for (auto k : {GKind::Const, GKind::Scale, GKind::Copy, GKind::Add, GKind::Sub, GKind::Less, GKind::Or, GKind::And,
                 GKind::Not, GKind::Min, GKind::Max})
    if (s == gkind_name(k)) return k;
  throw std::invalid_argument("unknown gate kind '" + s + "'");
}

inline int garity(GKind k) {
  switch (k) {
    case GKind::Const: return 0;
    case GKind::Scale:
    case GKind::Copy:
    case GKind::Not:
    case GKind::Min:
    case GKind::Max: return 1;
    default: return 2;
  }
}

inline bool gkind_has_constant(GKind k) {
  return k == GKind::Const || k == GKind::Scale || k == GKind::Min || k == GKind::Max;
}

struct GGate {
  GKind kind;
  std::size_t u = nil, v = nil, w = nil;
  Rational c = 0;
};

struct GCircuitInstance {
  std::size_t n = 0;
  std::vector<GGate> gates;
};

struct VarBounds {
  Rational lo, hi;
};

struct GCircuitPlusInstance {
  std::size_t n = 0;
  std::vector<GGate> gates;
  std::vector<VarBounds> bounds;
  Rational L = -1, U = 1, b = 0;
};

using RealAssignment = std::vector<Rational>;

struct BoundViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline bool within(const Rational& x, const Rational& target, const Rational& eps) {
  return x >= target - eps && x <= target + eps;
}

inline Rational clamp(const Rational& x, const Rational& lo, const Rational& hi) { return rmax(lo, rmin(x, hi)); }

namespace detail {

/// Logical and comparison rows shared by both circuit flavours.
inline bool check_logic(GKind k, const Rational& u, const Rational& v, const Rational& w, const Rational& eps) {
  switch (k) {
    case GKind::Less:
      if (u < v - eps) return within(w, 1, eps);
      if (u > v + eps) return within(w, 0, eps);
      return true;
    case GKind::Or:
      if (u >= 1 - eps || v >= 1 - eps) return within(w, 1, eps);
      if (u <= eps && v <= eps) return within(w, 0, eps);
      return true;
    case GKind::And:
      if (u >= 1 - eps && v >= 1 - eps) return within(w, 1, eps);
      if (u <= eps || v <= eps) return within(w, 0, eps);
      return true;
    case GKind::Not:
      if (u <= eps) return within(w, 1, eps);
      if (u >= 1 - eps) return within(w, 0, eps);
      return true;
    default: throw std::logic_error("check_logic: not a logical gate");
  }
}

inline Rational in(const RealAssignment& a, std::size_t x) { return x == nil ? Rational(0) : a[x]; }

}  // namespace detail

inline bool check_gcircuit_gate(const GGate& g, const RealAssignment& a, const Rational& eps) {
  Rational u = detail::in(a, g.u), v = detail::in(a, g.v), w = a[g.w];
  switch (g.kind) {
    case GKind::Const: return within(w, g.c, eps);
    case GKind::Scale: return within(w, clamp(u * g.c, 0, 1), eps);
    case GKind::Copy: return within(w, u, eps);
    case GKind::Add: return within(w, rmin(u + v, 1), eps);
    case GKind::Sub: return within(w, rmax(u - v, 0), eps);
    case GKind::Min: return within(w, rmin(u, g.c), eps);
    case GKind::Max: return within(w, rmax(u, g.c), eps);
    default: return detail::check_logic(g.kind, u, v, w, eps);
  }
}

inline bool check_gcircuitplus_gate(const GGate& g, const std::vector<VarBounds>& bounds, const RealAssignment& a,
                                    const Rational& eps) {
  for (auto x : {g.u, g.v, g.w})
    if (x != nil && (a[x] < bounds[x].lo || a[x] > bounds[x].hi))
      throw BoundViolation("variable " + std::to_string(x) + " = " + to_string(a[x]) + " outside its bounds");
  Rational u = detail::in(a, g.u), v = detail::in(a, g.v), w = a[g.w];
  const auto& wb = bounds[g.w];
  switch (g.kind) {
    case GKind::Const: return within(w, g.c, eps);
    case GKind::Scale: return within(w, clamp(u * g.c, wb.lo, wb.hi), eps);
    case GKind::Copy: return within(w, u, eps);
    case GKind::Add: return within(w, clamp(u + v, wb.lo, wb.hi), eps);
    case GKind::Sub: return within(w, clamp(u - v, wb.lo, wb.hi), eps);
    case GKind::Min: return within(w, rmin(u, g.c), eps);
    case GKind::Max: return within(w, rmax(u, g.c), eps);
    default: return detail::check_logic(g.kind, u, v, w, eps);
  }
}

inline Rational gcircuit_satisfied_fraction(const GCircuitInstance& gc, const RealAssignment& a, const Rational& eps) {
  if (gc.gates.empty()) return 1;
  std::size_t ok = 0;
  for (const auto& g : gc.gates)
    if (check_gcircuit_gate(g, a, eps)) ++ok;
  return Rational(Integer(ok), Integer(gc.gates.size()));
}

inline Rational gcircuitplus_satisfied_fraction(const GCircuitPlusInstance& gc, const RealAssignment& a,
                                                const Rational& eps) {
  if (gc.gates.empty()) return 1;
  std::size_t ok = 0;
  for (const auto& g : gc.gates)
    if (check_gcircuitplus_gate(g, gc.bounds, a, eps)) ++ok;
  return Rational(Integer(ok), Integer(gc.gates.size()));
}

namespace detail {

inline void check_gate_shape(const GGate& g, std::size_t t, std::size_t n, StructureReport& r,
                             std::vector<std::size_t>& produced) {
  std::string at = "gate " + std::to_string(t) + " (" + gkind_name(g.kind) + ")";
  int ar = garity(g.kind);
  bool u_ok = ar >= 1 ? g.u != nil : g.u == nil;
  bool v_ok = ar >= 2 ? g.v != nil : g.v == nil;
  if (!u_ok || !v_ok) r.fail(at + ": wrong number of inputs");
  for (auto x : {g.u, g.v})
    if (x != nil && x >= n) r.fail(at + ": input out of range");
  if (g.w == nil || g.w >= n)
    r.fail(at + ": output out of range");
  else
    ++produced[g.w];
}

}  // namespace detail

/// Arity rules, constants in [0,1], no G_min/G_max, one producer per variable.
inline StructureReport validate_gcircuit(const GCircuitInstance& gc) {
  StructureReport r;
  std::vector<std::size_t> produced(gc.n, 0);
  for (std::size_t t = 0; t < gc.gates.size(); ++t) {
    const auto& g = gc.gates[t];
    detail::check_gate_shape(g, t, gc.n, r, produced);
    if (g.kind == GKind::Min || g.kind == GKind::Max)
      r.fail("gate " + std::to_string(t) + ": G_min/G_max are not GCircuit gates");
    if ((g.kind == GKind::Const || g.kind == GKind::Scale) && (g.c < 0 || g.c > 1))
      r.fail("gate " + std::to_string(t) + ": constant outside [0,1]");
  }
  for (std::size_t x = 0; x < gc.n; ++x)
    if (produced[x] != 1)
      r.fail("variable " + std::to_string(x) + " is the output of " + std::to_string(produced[x]) + " gates");
  return r;
}

inline StructureReport validate_gcircuitplus(const GCircuitPlusInstance& gc) {
  StructureReport r;
  if (gc.bounds.size() != gc.n) {
    r.fail("bounds list length differs from variable count");
    return r;
  }
  if (!(gc.L < gc.U)) r.fail("requires L < U");
  for (std::size_t x = 0; x < gc.n; ++x) {
    const auto& b = gc.bounds[x];
    if (!(b.lo < b.hi)) r.fail("variable " + std::to_string(x) + ": lower bound must be below upper bound");
    if (b.lo < gc.L || b.hi > gc.U) r.fail("variable " + std::to_string(x) + ": bounds outside [L, U]");
  }
  std::vector<std::size_t> produced(gc.n, 0);
  auto unit = [&](std::size_t x) { return x != nil && x < gc.n && gc.bounds[x].lo == 0 && gc.bounds[x].hi == 1; };
  for (std::size_t t = 0; t < gc.gates.size(); ++t) {
    const auto& g = gc.gates[t];
    std::string at = "gate " + std::to_string(t) + " (" + gkind_name(g.kind) + ")";
    detail::check_gate_shape(g, t, gc.n, r, produced);
    if (g.w == nil || g.w >= gc.n) continue;
    switch (g.kind) {
      case GKind::Less:
        if (!unit(g.w)) r.fail(at + ": output bounds must be [0,1]");
        break;
      case GKind::Or:
      case GKind::And:
        if (!unit(g.u) || !unit(g.v) || !unit(g.w)) r.fail(at + ": logical gate bounds must be [0,1]");
        break;
      case GKind::Not:
        if (!unit(g.u) || !unit(g.w)) r.fail(at + ": logical gate bounds must be [0,1]");
        break;
      case GKind::Const:
        if (g.c < gc.bounds[g.w].lo || g.c > gc.bounds[g.w].hi) r.fail(at + ": constant outside output bounds");
        break;
      case GKind::Copy:
        if (g.u < gc.n && (gc.bounds[g.u].lo != gc.bounds[g.w].lo || gc.bounds[g.u].hi != gc.bounds[g.w].hi))
          r.fail(at + ": input and output bounds differ");
        break;
      case GKind::Scale:
      case GKind::Min:
      case GKind::Max:
        if (g.c < gc.L || g.c > gc.U) r.fail(at + ": constant outside [L, U]");
        break;
      default: break;
    }
  }
  for (std::size_t x = 0; x < gc.n; ++x)
    if (produced[x] != 1)
      r.fail("variable " + std::to_string(x) + " is the output of " + std::to_string(produced[x]) + " gates");
  return r;
}

}  // namespace fmarket
