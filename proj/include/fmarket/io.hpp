#pragma once

#include "fmarket/circuit.hpp"
#include "fmarket/equivalence.hpp"
#include "fmarket/hardness.hpp"
#include "fmarket/market.hpp"
#include "fmarket/rational.hpp"
#include "fmarket/repair.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fmarket::io {

using json = nlohmann::json;

/// Malformed input. `where` is a JSON pointer into the offending document.
struct ParseError : std::runtime_error {
  std::string where;
  ParseError(std::string w, const std::string& what) : std::runtime_error(w + ": " + what), where(std::move(w)) {}
};

namespace detail {

inline std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }
inline std::string child(const std::string& path, std::size_t i) { return path + "/" + std::to_string(i); }

inline const json& field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ParseError(path.empty() ? "/" : path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(child(path, key), "missing field");
  return *it;
}

inline const json* optional_field(const json& j, const std::string& key) {
  if (!j.is_object()) return nullptr;
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? nullptr : &*it;
}

inline const json& array(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path.empty() ? "/" : path, "expected an array");
  return j;
}

inline const json& object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ParseError(path.empty() ? "/" : path, "expected an object");
  return j;
}

inline std::size_t index(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
    throw ParseError(path, "expected a non-negative integer");
  return j.get<std::size_t>();
}

inline std::size_t node_key(const std::string& key, const std::string& path) {
  if (key.empty() || key.find_first_not_of("0123456789") != std::string::npos)
    throw ParseError(child(path, key), "expected a node index as key");
  return std::stoull(key);
}

}  // namespace detail

// ---------------------------------------------------------------- scalars

inline json to_json(const Rational& r) { return to_string(r); }

inline Rational rational_from(const json& j, const std::string& path) {
  if (j.is_number_integer()) return Rational(Integer(j.get<long long>()));
  if (!j.is_string()) throw ParseError(path, "expected a \"num/den\" string");
  try {
    return parse_rational(j.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ParseError(path, e.what());
  }
}

inline json to_json(const std::vector<Rational>& v) {
  json a = json::array();
  for (const auto& r : v) a.push_back(to_json(r));
  return a;
}

// ---------------------------------------------------------------- market

inline json to_json(const SplcUtility& u) {
  json a = json::array();
  for (const auto& s : u) a.push_back({{"slope", to_json(s.slope)}, {"length", s.length ? to_json(*s.length) : "inf"}});
  return a;
}

inline SplcUtility utility_from(const json& j, const std::string& path) {
  SplcUtility u;
  detail::array(j, path);
  for (std::size_t k = 0; k < j.size(); ++k) {
    auto p = detail::child(path, k);
    Segment s;
    s.slope = rational_from(detail::field(j[k], "slope", p), detail::child(p, "slope"));
    const json& len = detail::field(j[k], "length", p);
    if (!(len.is_string() && len.get<std::string>() == "inf")) s.length = rational_from(len, detail::child(p, "length"));
    u.push_back(std::move(s));
  }
  return u;
}

inline json utilities_json(const std::map<std::size_t, SplcUtility>& us, const std::vector<std::string>& goods) {
  json o = json::object();
  for (const auto& [j, u] : us) o[goods.at(j)] = to_json(u);
  return o;
}

inline std::map<std::size_t, SplcUtility> utilities_from(const json& j, const std::map<std::string, std::size_t>& id,
                                                         const std::string& path) {
  std::map<std::size_t, SplcUtility> out;
  detail::object(j, path);
  for (const auto& [key, val] : j.items()) {
    auto it = id.find(key);
    if (it == id.end()) throw ParseError(detail::child(path, key), "unknown good id");
    out[it->second] = utility_from(val, detail::child(path, key));
  }
  return out;
}

inline std::map<std::string, std::size_t> good_ids(const std::vector<std::string>& goods) {
  std::map<std::string, std::size_t> id;
  for (std::size_t j = 0; j < goods.size(); ++j) id[goods[j]] = j;
  return id;
}

inline std::vector<std::string> goods_from(const json& j, const std::string& path) {
  std::vector<std::string> goods;
  detail::array(j, path);
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_string()) throw ParseError(detail::child(path, k), "expected a string good id");
    goods.push_back(j[k].get<std::string>());
  }
  if (good_ids(goods).size() != goods.size()) throw ParseError(path, "duplicate good id");
  return goods;
}

inline json to_json(const Market& m) {
  json buyers = json::array();
  for (const auto& b : m.buyers)
    buyers.push_back({{"budget", to_json(b.budget)}, {"utilities", utilities_json(b.utilities, m.goods)}});
  return {{"goods", m.goods}, {"buyers", buyers}};
}

inline Market market_from(const json& j, const std::string& path = "") {
  Market m;
  m.goods = goods_from(detail::field(j, "goods", path), detail::child(path, "goods"));
  auto id = good_ids(m.goods);
  const json& bs = detail::array(detail::field(j, "buyers", path), detail::child(path, "buyers"));
  for (std::size_t i = 0; i < bs.size(); ++i) {
    auto p = detail::child(detail::child(path, "buyers"), i);
    Buyer b;
    b.budget = rational_from(detail::field(bs[i], "budget", p), detail::child(p, "budget"));
    b.utilities = utilities_from(detail::field(bs[i], "utilities", p), id, detail::child(p, "utilities"));
    m.buyers.push_back(std::move(b));
  }
  return m;
}

inline json to_json(const ExchangeMarket& em) {
  json buyers = json::array();
  for (const auto& b : em.buyers) {
    json w = json::object();
    for (std::size_t j = 0; j < b.endowment.size(); ++j) w[em.goods[j]] = to_json(b.endowment[j]);
    buyers.push_back({{"endowment", w}, {"utilities", utilities_json(b.utilities, em.goods)}});
  }
  return {{"goods", em.goods}, {"buyers", buyers}};
}

inline ExchangeMarket exchange_from(const json& j, const std::string& path = "") {
  ExchangeMarket em;
  em.goods = goods_from(detail::field(j, "goods", path), detail::child(path, "goods"));
  auto id = good_ids(em.goods);
  const json& bs = detail::array(detail::field(j, "buyers", path), detail::child(path, "buyers"));
  for (std::size_t i = 0; i < bs.size(); ++i) {
    auto p = detail::child(detail::child(path, "buyers"), i);
    ExchangeBuyer b;
    b.endowment.assign(em.goods.size(), Rational(0));
    const json& w = detail::object(detail::field(bs[i], "endowment", p), detail::child(p, "endowment"));
    for (const auto& [key, val] : w.items()) {
      auto it = id.find(key);
      auto q = detail::child(detail::child(p, "endowment"), key);
      if (it == id.end()) throw ParseError(q, "unknown good id");
      b.endowment[it->second] = rational_from(val, q);
    }
    b.utilities = utilities_from(detail::field(bs[i], "utilities", p), id, detail::child(p, "utilities"));
    em.buyers.push_back(std::move(b));
  }
  return em;
}

/// {"prices": {good: "num/den"}}; goods missing from the object are an error.
inline json prices_json(const PriceVector& p, const std::vector<std::string>& goods) {
  json o = json::object();
  for (std::size_t j = 0; j < p.size(); ++j) o[goods.at(j)] = to_json(p[j]);
  return {{"prices", o}};
}

inline PriceVector prices_from(const json& j, const std::vector<std::string>& goods, const std::string& path = "") {
  const json& o = detail::object(detail::field(j, "prices", path), detail::child(path, "prices"));
  PriceVector p;
  for (const auto& g : goods) {
    auto q = detail::child(detail::child(path, "prices"), g);
    auto it = o.find(g);
    if (it == o.end()) throw ParseError(q, "missing price");
    p.push_back(rational_from(*it, q));
  }
  auto id = good_ids(goods);
  for (const auto& [key, val] : o.items())
    if (!id.count(key)) throw ParseError(detail::child(detail::child(path, "prices"), key), "unknown good id");
  return p;
}

/// {"allocation": [{good: "num/den"}]}; absent goods mean zero.
inline json allocation_json(const Allocation& x, const std::vector<std::string>& goods) {
  json a = json::array();
  for (const auto& row : x) {
    json o = json::object();
    for (std::size_t j = 0; j < row.size(); ++j)
      if (row[j] != 0) o[goods.at(j)] = to_json(row[j]);
    a.push_back(o);
  }
  return {{"allocation", a}};
}

inline Allocation allocation_from(const json& j, const std::vector<std::string>& goods, const std::string& path = "") {
  auto base = detail::child(path, "allocation");
  const json& a = detail::array(detail::field(j, "allocation", path), base);
  auto id = good_ids(goods);
  Allocation x;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto p = detail::child(base, i);
    detail::object(a[i], p);
    std::vector<Rational> row(goods.size(), Rational(0));
    for (const auto& [key, val] : a[i].items()) {
      auto it = id.find(key);
      if (it == id.end()) throw ParseError(detail::child(p, key), "unknown good id");
      row[it->second] = rational_from(val, detail::child(p, key));
    }
    x.push_back(std::move(row));
  }
  return x;
}

inline json to_json(const EquilibriumReport& r, const std::vector<std::string>& goods) {
  json gs = json::array(), bs = json::array();
  for (std::size_t j = 0; j < r.goods.size(); ++j)
    gs.push_back({{"good", goods.at(j)}, {"demand", to_json(r.goods[j].demand)}, {"gap", to_json(r.goods[j].gap)}});
  for (const auto& b : r.buyers)
    bs.push_back({{"budget", to_json(b.budget)},
                  {"spend", to_json(b.spend)},
                  {"utility", to_json(b.utility)},
                  {"optimum", b.optimum ? to_json(*b.optimum) : json("unbounded")},
                  {"ratio", to_json(b.ratio)},
                  {"within_budget", b.within_budget}});
  return {{"accepted", r.accepted}, {"feasible", r.feasible},       {"eps", to_json(r.eps)},
          {"delta", to_json(r.delta)}, {"min_eps", to_json(r.min_eps)}, {"min_delta", to_json(r.min_delta)},
          {"goods", gs},               {"buyers", bs},                   {"violations", r.violations}};
}

inline json to_json(const StructureReport& r) { return {{"ok", r.ok}, {"violations", r.violations}}; }

inline json to_json(const Bundle& b, const std::vector<std::string>& goods) {
  json x = json::object(), spend = json::object();
  for (std::size_t j = 0; j < b.x.size(); ++j) {
    if (b.x[j] != 0) x[goods.at(j)] = to_json(b.x[j]);
    bool any = false;
    for (const auto& v : b.spend[j]) any = any || v != 0;
    if (any) spend[goods.at(j)] = to_json(b.spend[j]);
  }
  return {{"x", x}, {"spend", spend}, {"utility", to_json(b.utility)}, {"money", to_json(b.money)}};
}

// ---------------------------------------------------------------- circuits

inline json to_json(const PureCircuitInstance& c) {
  json gates = json::array();
  for (const auto& g : c.gates) {
    json o = {{"kind", pure_kind_name(g.kind)}, {"w", g.w}};
    if (g.u != nil) o["u"] = g.u;
    if (g.v != nil) o["v"] = g.v;
    gates.push_back(o);
  }
  return {{"n", c.n}, {"gates", gates}};
}

inline PureGate pure_gate_from(const json& j, const std::string& p) {
  PureGate g{};
  const json& k = detail::field(j, "kind", p);
  if (!k.is_string()) throw ParseError(detail::child(p, "kind"), "expected a gate kind");
  try {
    g.kind = parse_pure_kind(k.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ParseError(detail::child(p, "kind"), e.what());
  }
  g.w = detail::index(detail::field(j, "w", p), detail::child(p, "w"));
  if (auto u = detail::optional_field(j, "u")) g.u = detail::index(*u, detail::child(p, "u"));
  if (auto v = detail::optional_field(j, "v")) g.v = detail::index(*v, detail::child(p, "v"));
  auto need = [&](std::size_t x, const char* name) {
    if (x == nil) throw ParseError(detail::child(p, name), "missing field");
  };
  switch (g.kind) {
    case PureKind::Nand:
    case PureKind::Or:
    case PureKind::And:
    case PureKind::Purify: need(g.u, "u"); need(g.v, "v"); break;
    case PureKind::Not: need(g.u, "u"); break;
    default: break;
  }
  return g;
}

inline PureCircuitInstance pure_circuit_from(const json& j, const std::string& path = "") {
  PureCircuitInstance c;
  c.n = detail::index(detail::field(j, "n", path), detail::child(path, "n"));
  auto base = detail::child(path, "gates");
  const json& gs = detail::array(detail::field(j, "gates", path), base);
  for (std::size_t t = 0; t < gs.size(); ++t) c.gates.push_back(pure_gate_from(gs[t], detail::child(base, t)));
  return c;
}

inline json to_json(const TernaryAssignment& a) {
  json o = json::object();
  for (std::size_t x = 0; x < a.size(); ++x) o[std::to_string(x)] = tern_name(a[x]);
  return {{"assignment", o}};
}

inline TernaryAssignment ternary_from(const json& j, std::size_t n, const std::string& path = "") {
  auto base = detail::child(path, "assignment");
  const json& o = detail::object(detail::field(j, "assignment", path), base);
  TernaryAssignment a(n, Tern::Bot);
  std::vector<bool> seen(n, false);
  for (const auto& [key, val] : o.items()) {
    std::size_t x = detail::node_key(key, base);
    auto p = detail::child(base, key);
    if (x >= n) throw ParseError(p, "node out of range");
    if (!val.is_string()) throw ParseError(p, "expected \"0\", \"1\" or \"bot\"");
    try {
      a[x] = parse_tern(val.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ParseError(p, e.what());
    }
    seen[x] = true;
  }
  for (std::size_t x = 0; x < n; ++x)
    if (!seen[x]) throw ParseError(detail::child(base, std::to_string(x)), "missing value");
  return a;
}

inline json to_json(const GGate& g) {
  json o = {{"kind", gkind_name(g.kind)}, {"w", g.w}};
  if (g.u != nil) o["u"] = g.u;
  if (g.v != nil) o["v"] = g.v;
  if (gkind_has_constant(g.kind)) o["c"] = to_json(g.c);
  return o;
}

inline GGate ggate_from(const json& j, const std::string& p) {
  GGate g{};
  const json& k = detail::field(j, "kind", p);
  if (!k.is_string()) throw ParseError(detail::child(p, "kind"), "expected a gate kind");
  try {
    g.kind = parse_gkind(k.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ParseError(detail::child(p, "kind"), e.what());
  }
  g.w = detail::index(detail::field(j, "w", p), detail::child(p, "w"));
  if (garity(g.kind) >= 1) g.u = detail::index(detail::field(j, "u", p), detail::child(p, "u"));
  if (garity(g.kind) >= 2) g.v = detail::index(detail::field(j, "v", p), detail::child(p, "v"));
  if (gkind_has_constant(g.kind)) g.c = rational_from(detail::field(j, "c", p), detail::child(p, "c"));
  return g;
}

inline json to_json(const GCircuitInstance& c) {
  json gates = json::array();
  for (const auto& g : c.gates) gates.push_back(to_json(g));
  return {{"n", c.n}, {"gates", gates}};
}

inline GCircuitInstance gcircuit_from(const json& j, const std::string& path = "") {
  GCircuitInstance c;
  c.n = detail::index(detail::field(j, "n", path), detail::child(path, "n"));
  auto base = detail::child(path, "gates");
  const json& gs = detail::array(detail::field(j, "gates", path), base);
  for (std::size_t t = 0; t < gs.size(); ++t) c.gates.push_back(ggate_from(gs[t], detail::child(base, t)));
  return c;
}

inline json to_json(const GCircuitPlusInstance& c) {
  json gates = json::array(), bounds = json::array();
  for (const auto& g : c.gates) gates.push_back(to_json(g));
  for (const auto& b : c.bounds) bounds.push_back({{"lo", to_json(b.lo)}, {"hi", to_json(b.hi)}});
  return {{"n", c.n}, {"gates", gates}, {"bounds", bounds}, {"L", to_json(c.L)}, {"U", to_json(c.U)}, {"b", to_json(c.b)}};
}

inline GCircuitPlusInstance gcircuitplus_from(const json& j, const std::string& path = "") {
  GCircuitPlusInstance c;
  c.n = detail::index(detail::field(j, "n", path), detail::child(path, "n"));
  auto base = detail::child(path, "gates");
  const json& gs = detail::array(detail::field(j, "gates", path), base);
  for (std::size_t t = 0; t < gs.size(); ++t) c.gates.push_back(ggate_from(gs[t], detail::child(base, t)));
  auto bb = detail::child(path, "bounds");
  const json& bs = detail::array(detail::field(j, "bounds", path), bb);
  for (std::size_t x = 0; x < bs.size(); ++x) {
    auto p = detail::child(bb, x);
    c.bounds.push_back({rational_from(detail::field(bs[x], "lo", p), detail::child(p, "lo")),
                        rational_from(detail::field(bs[x], "hi", p), detail::child(p, "hi"))});
  }
  c.L = rational_from(detail::field(j, "L", path), detail::child(path, "L"));
  c.U = rational_from(detail::field(j, "U", path), detail::child(path, "U"));
  c.b = rational_from(detail::field(j, "b", path), detail::child(path, "b"));
  return c;
}

inline json to_json(const RealAssignment& a, bool as_assignment) {
  if (!as_assignment) return to_json(static_cast<const std::vector<Rational>&>(a));
  json o = json::object();
  for (std::size_t x = 0; x < a.size(); ++x) o[std::to_string(x)] = to_json(a[x]);
  return {{"assignment", o}};
}

inline RealAssignment real_from(const json& j, std::size_t n, const std::string& path = "") {
  auto base = detail::child(path, "assignment");
  const json& o = detail::object(detail::field(j, "assignment", path), base);
  RealAssignment a(n, Rational(0));
  std::vector<bool> seen(n, false);
  for (const auto& [key, val] : o.items()) {
    std::size_t x = detail::node_key(key, base);
    if (x >= n) throw ParseError(detail::child(base, key), "variable out of range");
    a[x] = rational_from(val, detail::child(base, key));
    seen[x] = true;
  }
  for (std::size_t x = 0; x < n; ++x)
    if (!seen[x]) throw ParseError(detail::child(base, std::to_string(x)), "missing value");
  return a;
}

// ---------------------------------------------------------------- hardness

inline json to_json(const HardnessParams& hp) {
  return {{"eps_m", to_json(hp.eps_m)}, {"delta_m", to_json(hp.delta_m)}, {"a", to_json(hp.a)},
          {"delta_c", to_json(hp.delta_c)}, {"mode", mode_name(hp.mode)},   {"H", to_json(hp.H())},
          {"L", to_json(hp.L())},         {"F", to_json(hp.F())}};
}

inline HardnessParams params_from(const json& j, const std::string& path = "") {
  HardnessParams hp;
  hp.eps_m = rational_from(detail::field(j, "eps_m", path), detail::child(path, "eps_m"));
  hp.delta_m = rational_from(detail::field(j, "delta_m", path), detail::child(path, "delta_m"));
  hp.a = rational_from(detail::field(j, "a", path), detail::child(path, "a"));
  hp.delta_c = rational_from(detail::field(j, "delta_c", path), detail::child(path, "delta_c"));
  if (auto m = detail::optional_field(j, "mode")) {
    if (!m->is_string()) throw ParseError(detail::child(path, "mode"), "expected a mode name");
    try {
      hp.mode = parse_mode(m->get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ParseError(detail::child(path, "mode"), e.what());
    }
  }
  return hp;
}

inline json to_json(const ParamsReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks)
    checks.push_back({{"name", c.name}, {"lhs", to_json(c.lhs)}, {"relation", c.relation}, {"rhs", to_json(c.rhs)},
                      {"ok", c.ok}});
  return {{"ok", r.ok}, {"F", to_json(r.F)}, {"checks", checks}};
}

inline json to_json(const DecodeMap& dm) {
  json goods = json::array();
  for (std::size_t j = 0; j < dm.node_of_good.size(); ++j) {
    json o = json::object();
    if (dm.node_of_good[j]) o["node"] = *dm.node_of_good[j];
    if (dm.aux_gate[j]) o["aux_gate"] = *dm.aux_gate[j];
    goods.push_back(o);
  }
  return {{"nodes", dm.nodes}, {"goods", goods}, {"gate_buyers", dm.gate_buyers}};
}

inline DecodeMap decode_map_from(const json& j, const std::string& path = "") {
  DecodeMap dm;
  dm.nodes = detail::index(detail::field(j, "nodes", path), detail::child(path, "nodes"));
  auto gb = detail::child(path, "goods");
  const json& gs = detail::array(detail::field(j, "goods", path), gb);
  for (std::size_t k = 0; k < gs.size(); ++k) {
    auto p = detail::child(gb, k);
    detail::object(gs[k], p);
    std::optional<std::size_t> node, aux;
    if (auto n = detail::optional_field(gs[k], "node")) node = detail::index(*n, detail::child(p, "node"));
    if (auto a = detail::optional_field(gs[k], "aux_gate")) aux = detail::index(*a, detail::child(p, "aux_gate"));
    dm.node_of_good.push_back(node);
    dm.aux_gate.push_back(aux);
  }
  auto bb = detail::child(path, "gate_buyers");
  const json& bs = detail::array(detail::field(j, "gate_buyers", path), bb);
  dm.aux_good_of_gate.assign(bs.size(), nil);
  for (std::size_t t = 0; t < bs.size(); ++t) {
    std::vector<std::size_t> row;
    const json& r = detail::array(bs[t], detail::child(bb, t));
    for (std::size_t k = 0; k < r.size(); ++k) row.push_back(detail::index(r[k], detail::child(detail::child(bb, t), k)));
    dm.gate_buyers.push_back(std::move(row));
  }
  for (std::size_t g = 0; g < dm.aux_gate.size(); ++g)
    if (dm.aux_gate[g] && *dm.aux_gate[g] < dm.aux_good_of_gate.size()) dm.aux_good_of_gate[*dm.aux_gate[g]] = g;
  return dm;
}

inline json to_json(const GateAudit& a, const std::vector<std::string>& goods) {
  json f = json::object(), gates = json::array();
  for (std::size_t j = 0; j < a.f.size(); ++j) f[goods.at(j)] = {{"wasted", to_json(a.f[j])}, {"faulty", a.faulty_good[j] != 0}};
  for (const auto& g : a.gates) gates.push_back({{"gate", g.gate}, {"faulty", g.faulty}, {"satisfied", g.satisfied}});
  return {{"F", to_json(a.F)},
          {"goods", f},
          {"gates", gates},
          {"decoded", to_json(a.decoded)["assignment"]},
          {"faulty_gates", a.faulty_gates},
          {"clean_violations", a.clean_violations}};
}

// ---------------------------------------------------------------- equivalence

inline json to_json(const TrimLog& log) {
  json steps = json::array();
  for (const auto& s : log.steps) {
    json o = {{"kind", s.kind == TrimStep::RemoveGate ? "remove" : "replace-purify"}};
    o["gate"] = to_json(PureCircuitInstance{0, {s.gate}})["gates"][0];
    if (s.kept != nil) o["kept"] = s.kept;
    if (s.dropped != nil) o["dropped"] = s.dropped;
    steps.push_back(o);
  }
  auto ids = [](const std::vector<std::size_t>& v) {
    json a = json::array();
    for (auto x : v) a.push_back(x == nil ? json(nullptr) : json(x));
    return a;
  };
  return {{"original_nodes", log.original_nodes}, {"total_nodes", log.total_nodes}, {"steps", steps},
          {"new_id", ids(log.new_id)},           {"old_id", ids(log.old_id)}};
}

inline TrimLog trim_log_from(const json& j, const std::string& path = "") {
  TrimLog log;
  log.original_nodes = detail::index(detail::field(j, "original_nodes", path), detail::child(path, "original_nodes"));
  log.total_nodes = detail::index(detail::field(j, "total_nodes", path), detail::child(path, "total_nodes"));
  auto sb = detail::child(path, "steps");
  const json& ss = detail::array(detail::field(j, "steps", path), sb);
  for (std::size_t k = 0; k < ss.size(); ++k) {
    auto p = detail::child(sb, k);
    TrimStep s{};
    const json& kind = detail::field(ss[k], "kind", p);
    if (kind == "remove")
      s.kind = TrimStep::RemoveGate;
    else if (kind == "replace-purify")
      s.kind = TrimStep::ReplacePurify;
    else
      throw ParseError(detail::child(p, "kind"), "expected \"remove\" or \"replace-purify\"");
    s.gate = pure_gate_from(detail::field(ss[k], "gate", p), detail::child(p, "gate"));
    if (auto a = detail::optional_field(ss[k], "kept")) s.kept = detail::index(*a, detail::child(p, "kept"));
    if (auto a = detail::optional_field(ss[k], "dropped")) s.dropped = detail::index(*a, detail::child(p, "dropped"));
    log.steps.push_back(s);
  }
  auto ids = [&](const char* name) {
    std::vector<std::size_t> v;
    auto b = detail::child(path, name);
    const json& a = detail::array(detail::field(j, name, path), b);
    for (std::size_t k = 0; k < a.size(); ++k) v.push_back(a[k].is_null() ? nil : detail::index(a[k], detail::child(b, k)));
    return v;
  };
  log.new_id = ids("new_id");
  log.old_id = ids("old_id");
  return log;
}

inline json to_json(const UnaryEncoding& enc) {
  return {{"M", enc.M}, {"kappa", enc.kappa.str()}, {"vars", enc.vars}, {"trim", to_json(enc.trim)}};
}

inline UnaryEncoding unary_encoding_from(const json& j, const std::string& path = "") {
  UnaryEncoding enc;
  enc.M = detail::index(detail::field(j, "M", path), detail::child(path, "M"));
  const json& k = detail::field(j, "kappa", path);
  if (!k.is_string()) throw ParseError(detail::child(path, "kappa"), "expected an integer string");
  try {
    enc.kappa = Integer(k.get<std::string>());
  } catch (const std::exception&) {
    throw ParseError(detail::child(path, "kappa"), "expected an integer string");
  }
  auto vb = detail::child(path, "vars");
  const json& vs = detail::array(detail::field(j, "vars", path), vb);
  for (std::size_t v = 0; v < vs.size(); ++v) {
    std::vector<std::size_t> nodes;
    const json& a = detail::array(vs[v], detail::child(vb, v));
    for (std::size_t k2 = 0; k2 < a.size(); ++k2) nodes.push_back(detail::index(a[k2], detail::child(detail::child(vb, v), k2)));
    enc.vars.push_back(std::move(nodes));
  }
  enc.trim = trim_log_from(detail::field(j, "trim", path), detail::child(path, "trim"));
  return enc;
}

inline json to_json(const GadgetTrace& t) {
  json stages = json::array();
  for (const auto& s : t.stages)
    stages.push_back({{"label", s.label}, {"nodes", s.nodes}, {"gates", s.gates}, {"units", s.units}});
  return {{"kind", t.kind},          {"stages", stages},         {"outputs", t.outputs},
          {"gate_count", t.gate_count}, {"unit_count", t.unit_count}, {"unit_bound", t.unit_bound}};
}

inline json to_json(const PlusTranslation& tr) {
  json split = json::array();
  for (const auto& [p, n] : tr.split) split.push_back({{"plus", p}, {"minus", n}});
  return {{"m", to_json(tr.m)},
          {"grid", to_json(tr.grid)},
          {"rho", to_json(tr.rho)},
          {"K", to_json(tr.K)},
          {"eps", to_json(tr.eps)},
          {"eps_prime", to_json(tr.eps_prime)},
          {"delta_prime", to_json(tr.delta_prime)},
          {"clamp_slack", to_json(tr.clamp_slack)},
          {"gate_factor", to_json(tr.gate_factor)},
          {"split", split},
          {"gate_tag", tr.gate_tag},
          {"stage_gate_counts", tr.stage_gate_counts},
          {"gates_per_original", tr.gates_per_original}};
}

// ---------------------------------------------------------------- repair

inline json to_json(const GCPlusEncoding& enc, const std::vector<std::string>& goods) {
  json prices = json::object(), spends = json::array();
  for (std::size_t j = 0; j < enc.price_var.size(); ++j) prices[goods.at(j)] = enc.price_var[j];
  for (const auto& s : enc.spend_vars)
    spends.push_back({{"buyer", s.buyer}, {"good", goods.at(s.good)}, {"segment", s.seg}, {"var", s.var}});
  return {{"circuit", to_json(enc.gc)},
          {"price_var", prices},
          {"spend_vars", spends},
          {"segment_count", enc.segment_count},
          {"comparator_count", enc.comparator_count},
          {"P_min", to_json(enc.P_min)},
          {"P_max", to_json(enc.P_max)},
          {"eps_c", to_json(enc.eps_c)},
          {"gates_per_buyer", enc.gates_per_buyer},
          {"gates_per_good", enc.gates_per_good}};
}

inline json to_json(const ConstantLedger& L) {
  json a = json::array();
  for (const auto& e : L.entries()) {
    json o = {{"name", e.name}, {"value", to_json(e.value)}};
    if (!e.note.empty()) o["note"] = e.note;
    a.push_back(o);
  }
  return {{"ledger", a}};
}

inline json to_json(const FlowNetwork& net) {
  json edges = json::array();
  for (const auto& e : net.edges) {
    json o = {{"from", net.node_names.at(e.from)}, {"to", net.node_names.at(e.to)}, {"cap", to_json(e.cap)},
              {"flow", to_json(e.flow)}};
    if (!e.label.empty()) o["label"] = e.label;
    edges.push_back(o);
  }
  return {{"nodes", net.node_names}, {"edges", edges}};
}

inline json to_json(const Snapshot& s, const std::vector<std::string>& goods) {
  json o = {{"step", s.step}};
  o.update(prices_json(s.p, goods));
  o.update(allocation_json(s.x, goods));
  o["burn"] = to_json(s.burn);
  if (s.flow) o["flow"] = to_json(*s.flow);
  return o;
}

// ---------------------------------------------------------------- files

inline json read_json(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw ParseError("", "cannot open '" + file + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("", "'" + file + "' is not valid JSON: " + e.what());
  }
}

/// Pretty-printed with a trailing newline; "-" or empty means standard output.
inline void write_json(const json& j, const std::string& file, std::ostream& fallback) {
  std::string text = j.dump(2) + "\n";
  if (file.empty() || file == "-") {
    fallback << text;
    return;
  }
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write '" + file + "'");
  out << text;
}

// ---------------------------------------------------------------- schemas

/// JSON Schema (draft 2020-12) fragments for every document the CLI reads or writes.
inline json schemas() {
  json rat = {{"type", "string"}, {"pattern", "^-?[0-9]+/[0-9]+$"}};
  json rat_or_inf = {{"anyOf", json::array({rat, {{"const", "inf"}}})}};
  json idx = {{"type", "integer"}, {"minimum", 0}};
  json segment = {{"type", "object"},
                  {"required", {"slope", "length"}},
                  {"properties", {{"slope", rat}, {"length", rat_or_inf}}}};
  json utilities = {{"type", "object"}, {"additionalProperties", {{"type", "array"}, {"items", segment}}}};
  json market = {{"type", "object"},
                 {"required", {"goods", "buyers"}},
                 {"properties",
                  {{"goods", {{"type", "array"}, {"items", {{"type", "string"}}}}},
                   {"buyers",
                    {{"type", "array"},
                     {"items",
                      {{"type", "object"},
                       {"required", {"budget", "utilities"}},
                       {"properties", {{"budget", rat}, {"utilities", utilities}}}}}}}}}};
  json exchange = market;
  exchange["properties"]["buyers"]["items"]["required"] = {"endowment", "utilities"};
  exchange["properties"]["buyers"]["items"]["properties"] = {
      {"endowment", {{"type", "object"}, {"additionalProperties", rat}}}, {"utilities", utilities}};
  json prices = {{"type", "object"},
                 {"required", {"prices"}},
                 {"properties", {{"prices", {{"type", "object"}, {"additionalProperties", rat}}}}}};
  json alloc = {{"type", "object"},
                {"required", {"allocation"}},
                {"properties",
                 {{"allocation",
                   {{"type", "array"}, {"items", {{"type", "object"}, {"additionalProperties", rat}}}}}}}};
  json pure_gate = {{"type", "object"},
                    {"required", {"kind", "w"}},
                    {"properties",
                     {{"kind", {{"enum", {"NAND", "PURIFY", "NOT", "OR", "AND", "CONST0", "CONST1"}}}},
                      {"u", idx},
                      {"v", idx},
                      {"w", idx}}}};
  json pure = {{"type", "object"},
               {"required", {"n", "gates"}},
               {"properties", {{"n", idx}, {"gates", {{"type", "array"}, {"items", pure_gate}}}}}};
  json ggate = {{"type", "object"},
                {"required", {"kind", "w"}},
                {"properties",
                 {{"kind",
                   {{"enum", {"G_c", "G_xc", "G_=", "G_+", "G_-", "G_<", "G_or", "G_and", "G_not", "G_min", "G_max"}}}},
                  {"u", idx},
                  {"v", idx},
                  {"w", idx},
                  {"c", rat}}}};
  json gc = {{"type", "object"},
             {"required", {"n", "gates"}},
             {"properties", {{"n", idx}, {"gates", {{"type", "array"}, {"items", ggate}}}}}};
  json gcp = gc;
  gcp["required"] = {"n", "gates", "bounds", "L", "U", "b"};
  gcp["properties"]["bounds"] = {
      {"type", "array"},
      {"items", {{"type", "object"}, {"required", {"lo", "hi"}}, {"properties", {{"lo", rat}, {"hi", rat}}}}}};
  gcp["properties"]["L"] = rat;
  gcp["properties"]["U"] = rat;
  gcp["properties"]["b"] = rat;
  json tern = {{"type", "object"},
               {"required", {"assignment"}},
               {"properties",
                {{"assignment",
                  {{"type", "object"},
                   {"propertyNames", {{"pattern", "^[0-9]+$"}}},
                   {"additionalProperties", {{"enum", {"0", "1", "bot"}}}}}}}}};
  json real = tern;
  real["properties"]["assignment"]["additionalProperties"] = rat;
  json params = {{"type", "object"},
                 {"required", {"eps_m", "delta_m", "a", "delta_c"}},
                 {"properties",
                  {{"eps_m", rat},
                   {"delta_m", rat},
                   {"a", rat},
                   {"delta_c", rat},
                   {"mode", {{"enum", {"pcp", "inverse-poly", "nonzero-spend"}}}}}}};
  json decode_map = {{"type", "object"},
                     {"required", {"nodes", "goods", "gate_buyers"}},
                     {"properties",
                      {{"nodes", idx},
                       {"goods",
                        {{"type", "array"},
                         {"items", {{"type", "object"}, {"properties", {{"node", idx}, {"aux_gate", idx}}}}}}},
                       {"gate_buyers", {{"type", "array"}, {"items", {{"type", "array"}, {"items", idx}}}}}}}};
  json ledger = {{"type", "object"},
                 {"required", {"ledger"}},
                 {"properties",
                  {{"ledger",
                    {{"type", "array"},
                     {"items",
                      {{"type", "object"},
                       {"required", {"name", "value"}},
                       {"properties", {{"name", {{"type", "string"}}}, {"value", rat}, {"note", {{"type", "string"}}}}}}}}}}}};
  json search_cfg = {{"type", "object"},
                     {"properties",
                      {{"grid", {{"type", "array"}, {"items", rat}}},
                       {"refinement_rounds", idx},
                       {"random_seeds", idx},
                       {"rng_seed", idx},
                       {"iterations", idx},
                       {"max_evaluations", idx},
                       {"dp_unit", rat}}}};
  return {{"$schema", "https://json-schema.org/draft/2020-12/schema"},
          {"$defs",
           {{"rational", rat},
            {"market", market},
            {"exchange_market", exchange},
            {"prices", prices},
            {"allocation", alloc},
            {"pure_circuit", pure},
            {"gcircuit", gc},
            {"gcircuit_plus", gcp},
            {"ternary_assignment", tern},
            {"real_assignment", real},
            {"hardness_params", params},
            {"decode_map", decode_map},
            {"ledger", ledger},
            {"search_config", search_cfg}}}};
}

}  // namespace fmarket::io
