#pragma once

#include "fmarket/circuit.hpp"
#include "fmarket/market.hpp"
#include "fmarket/rational.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fmarket {

struct InverterSpec {
  std::size_t in;
  std::size_t out;
  Rational t;
  Rational a;
};

/// Budget 1; linear uncapped on out; min{a x, a t} on in.
inline Buyer make_inverter(const InverterSpec& s) {
  if (s.in == s.out) throw std::invalid_argument("make_inverter: input and output goods coincide");
  if (s.t < 0 || s.t > 1) throw std::invalid_argument("make_inverter: t outside [0,1]");
  Buyer b{Rational(1), {}};
  b.utilities[s.out] = {Segment{Rational(1), std::nullopt}};
  b.utilities[s.in] = s.t == 0 ? SplcUtility{} : SplcUtility{Segment{s.a, s.t}};
  return b;
}

enum class HardnessMode { Pcp, InversePoly, NonzeroSpend };

inline const char* mode_name(HardnessMode m) {
  switch (m) {
    case HardnessMode::Pcp: return "pcp";
    case HardnessMode::InversePoly: return "inverse-poly";
    default: return "nonzero-spend";
  }
}

inline HardnessMode parse_mode(const std::string& s) {
  if (s == "pcp") return HardnessMode::Pcp;
  if (s == "inverse-poly") return HardnessMode::InversePoly;
  if (s == "nonzero-spend") return HardnessMode::NonzeroSpend;
  throw std::invalid_argument("unknown mode '" + s + "'");
}

struct HardnessParams {
  Rational eps_m, delta_m, a, delta_c;
  HardnessMode mode = HardnessMode::Pcp;

  Rational H() const { return Rational(9, 2); }
  Rational L() const { return Rational(100) / a; }
  Rational F() const {
    if (mode == HardnessMode::NonzeroSpend) return 20 * delta_m;
    return 32 * delta_m / delta_c;
  }
};

struct InequalityCheck {
  std::string name;
  Rational lhs;
  Rational rhs;
  std::string relation;  // "<=", ">=", ">"
  bool ok;
};

struct ParamsReport {
  bool ok = true;
  Rational F;
  std::vector<InequalityCheck> checks;
};

inline ParamsReport validate_params(const HardnessParams& hp) {
  if (hp.eps_m >= Rational(1, 9)) throw std::invalid_argument("validate_params: eps_m must be below 1/9");
  ParamsReport r;
  r.F = hp.F();
  const Rational& a = hp.a;
  const Rational& dm = hp.delta_m;
  const Rational& em = hp.eps_m;
  Rational H = hp.H();
  auto add = [&](std::string name, Rational lhs, std::string rel, Rational rhs) {
    bool ok = rel == "<=" ? lhs <= rhs : rel == ">=" ? lhs >= rhs : lhs > rhs;
    r.ok = r.ok && ok;
    r.checks.push_back({std::move(name), std::move(lhs), std::move(rhs), std::move(rel), ok});
  };
  add("a-bound", a, ">", Rational(100));
  if (a <= 0) return r;
  add("F-bound", r.F, "<=", Rational(1));
  add("NAND-upper", (r.F + 16 * dm) / (Rational(1, 9) - em), "<=", Rational(100) / a);
  add("NAND-lower", (4 - Rational(2000) / a - 100 * dm * a) / (Rational(1, 9) + em), ">=", H);
  add("PURIFY-aux-lower", (4 - Rational(1000) / a - 100 * dm * a) / (Rational(5, 9) + em), ">=", H);
  add("PURIFY-second", (1 - Rational(1000) / a - 100 * dm * a) / (Rational(1, 9) + em), ">=", H);
  return r;
}

struct Infeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// First (a, delta_m) on the logarithmic grid that passes validate_params:
/// a ascending over 10^3..10^9, delta_m descending over 10^-2..10^-12.
inline HardnessParams solve_params(const Rational& eps_m, const Rational& delta_c, HardnessMode mode) {
  if (eps_m >= Rational(1, 9) || eps_m < 0) throw Infeasible("solve_params: eps_m must lie in [0, 1/9)");
  if (delta_c <= 0 || delta_c > 1) throw Infeasible("solve_params: delta_c must lie in (0, 1]");
  for (int ea = 3; ea <= 9; ++ea)
    for (int ed = 2; ed <= 12; ++ed) {
      HardnessParams hp{eps_m, Rational(1) / rpow(Rational(10), ed), rpow(Rational(10), ea), delta_c, mode};
      if (validate_params(hp).ok) return hp;
    }
  throw Infeasible("solve_params: search grid exhausted");
}

struct DecodeMap {
  std::size_t nodes = 0;
  std::vector<std::optional<std::size_t>> node_of_good;  // empty for aux goods
  std::vector<std::optional<std::size_t>> aux_gate;       // gate index for aux goods
  std::vector<std::size_t> aux_good_of_gate;             // nil when the gate has none
  std::vector<std::vector<std::size_t>> gate_buyers;     // buyers created per gate
};

struct ReducedMarket {
  Market market;
  DecodeMap map;
};

inline ReducedMarket reduce_pure_to_market(const PureCircuitInstance& inst, const HardnessParams& hp) {
  auto st = validate_structure(inst, true);
  if (!st.ok) throw std::invalid_argument("reduce_pure_to_market: instance is not strict: " + st.violations.front());
  ReducedMarket out;
  Market& m = out.market;
  DecodeMap& dm = out.map;
  dm.nodes = inst.n;
  for (std::size_t x = 0; x < inst.n; ++x) {
    m.goods.push_back(std::to_string(x));
    dm.node_of_good.push_back(x);
    dm.aux_gate.push_back(std::nullopt);
  }
  dm.aux_good_of_gate.assign(inst.gates.size(), nil);
  dm.gate_buyers.assign(inst.gates.size(), {});
  Rational two9(2, 9), four9(4, 9);
  for (std::size_t t = 0; t < inst.gates.size(); ++t) {
    const auto& g = inst.gates[t];
    auto add = [&](std::size_t in, std::size_t outg, const Rational& thr) {
      dm.gate_buyers[t].push_back(m.buyers.size());
      m.buyers.push_back(make_inverter({in, outg, thr, hp.a}));
    };
    if (g.kind == PureKind::Nand) {
      for (int k = 0; k < 4; ++k) add(g.u, g.w, two9);
      for (int k = 0; k < 4; ++k) add(g.v, g.w, two9);
    } else if (g.kind == PureKind::Purify) {
      std::size_t aux = m.goods.size();
      m.goods.push_back("aux:" + std::to_string(t));
      dm.node_of_good.push_back(std::nullopt);
      dm.aux_gate.push_back(t);
      dm.aux_good_of_gate[t] = aux;
      for (int k = 0; k < 4; ++k) add(g.u, aux, two9);
      for (int k = 0; k < 2; ++k) add(aux, g.v, two9);
      add(aux, g.w, four9);
    } else {
      throw std::invalid_argument(std::string("reduce_pure_to_market: gate kind ") + pure_kind_name(g.kind) +
                                  " is not NAND or PURIFY");
    }
  }
  return out;
}

inline Tern decode_price(const Rational& p, const HardnessParams& hp) {
  if (p >= hp.H()) return Tern::One;
  if (p <= hp.L()) return Tern::Zero;
  return Tern::Bot;
}

inline TernaryAssignment decode_prices(const PriceVector& p, const DecodeMap& dm, const HardnessParams& hp) {
  TernaryAssignment a(dm.nodes, Tern::Bot);
  for (std::size_t j = 0; j < p.size() && j < dm.node_of_good.size(); ++j)
    if (dm.node_of_good[j]) a[*dm.node_of_good[j]] = decode_price(p[j], hp);
  return a;
}

/// Quantity of good that sits on positive-slope segments (the utility-bearing part).
inline Rational useful_quantity(const SplcUtility& u, const Rational& x) {
  Rational left = x, used = 0;
  for (const auto& s : u) {
    if (left <= 0) break;
    Rational take = s.infinite() ? left : rmin(left, *s.length);
    if (s.slope > 0) used += take;
    left -= take;
  }
  return used;
}

/// f_j: money on good j that yields no utility to the buyer spending it.
inline std::vector<Rational> wasted_spend(const Market& m, const PriceVector& p, const Allocation& x) {
  std::vector<Rational> f(m.num_goods(), Rational(0));
  for (std::size_t i = 0; i < m.num_buyers(); ++i)
    for (std::size_t j = 0; j < m.num_goods(); ++j) {
      if (x[i][j] == 0) continue;
      auto it = m.buyers[i].utilities.find(j);
      Rational useful = it == m.buyers[i].utilities.end() ? Rational(0) : useful_quantity(it->second, x[i][j]);
      f[j] += p[j] * (x[i][j] - useful);
    }
  return f;
}

struct GateAuditEntry {
  std::size_t gate;
  bool faulty;
  bool satisfied;
};

struct GateAudit {
  Rational F;
  std::vector<Rational> f;
  std::vector<bool> faulty_good;
  std::vector<GateAuditEntry> gates;
  TernaryAssignment decoded;
  std::size_t faulty_gates = 0;
  std::size_t clean_violations = 0;  // non-faulty gates whose truth table fails
};

inline GateAudit gate_audit(const PureCircuitInstance& inst, const DecodeMap& dm, const Market& m,
                            const PriceVector& p, const Allocation& x, const HardnessParams& hp) {
  GateAudit r;
  r.F = hp.F();
  r.f = wasted_spend(m, p, x);
  for (const auto& v : r.f) r.faulty_good.push_back(v >= r.F);
  r.decoded = decode_prices(p, dm, hp);
  std::vector<std::size_t> good_of_node(dm.nodes, nil);
  for (std::size_t j = 0; j < dm.node_of_good.size(); ++j)
    if (dm.node_of_good[j]) good_of_node[*dm.node_of_good[j]] = j;
  for (std::size_t t = 0; t < inst.gates.size(); ++t) {
    const auto& g = inst.gates[t];
    bool faulty = false;
    for (auto node : g.inputs()) faulty = faulty || r.faulty_good[good_of_node[node]];
    for (auto node : g.outputs()) faulty = faulty || r.faulty_good[good_of_node[node]];
    if (t < dm.aux_good_of_gate.size() && dm.aux_good_of_gate[t] != nil)
      faulty = faulty || r.faulty_good[dm.aux_good_of_gate[t]];
    bool sat = check_pure_gate(g, r.decoded);
    if (faulty) ++r.faulty_gates;
    if (!faulty && !sat) ++r.clean_violations;
    r.gates.push_back({t, faulty, sat});
  }
  return r;
}

}  // namespace fmarket
