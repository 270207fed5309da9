// fmarket-cli: file-driven front end for the fmarket library.
//
// Exit codes: 0 success or accept, 1 reject or not found, 2 usage error or malformed input.

#include "fmarket/equivalence.hpp"
#include "fmarket/hardness.hpp"
#include "fmarket/io.hpp"
#include "fmarket/market.hpp"
#include "fmarket/oracles.hpp"
#include "fmarket/repair.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <functional>
#include <iostream>

using namespace fmarket;
using io::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Rational flag(const std::string& text, const std::string& name) {
  try {
    return parse_rational(text);
  } catch (const std::invalid_argument&) {
    throw UsageError("--" + name + ": expected a rational \"num/den\", got '" + text + "'");
  }
}

/// Reads a JSON file and prefixes parse error paths with the file name.
template <class F>
auto load(const std::string& file, F&& parse) {
  json j = io::read_json(file);
  try {
    return parse(j);
  } catch (const io::ParseError& e) {
    throw io::ParseError(file + "#" + (e.where.empty() ? "/" : e.where), std::string(e.what()).substr(e.where.size() + 2));
  }
}

Market load_market(const std::string& f) {
  return load(f, [](const json& j) { return io::market_from(j); });
}

Preprocessed identity_preprocessing(const Market& m) {
  Preprocessed pre;
  pre.market = m;
  pre.original_goods = m.num_goods();
  for (std::size_t j = 0; j < m.num_goods(); ++j) pre.kept.push_back(j);
  return pre;
}

/// Map file written by reduce-pc-to-market: decode map, goods and params together.
struct MapFile {
  DecodeMap map;
  std::vector<std::string> goods;
  HardnessParams params;
};

MapFile load_map(const std::string& f) {
  return load(f, [](const json& j) {
    MapFile mf;
    mf.map = io::decode_map_from(io::detail::field(j, "decode_map", ""), "/decode_map");
    mf.goods = io::goods_from(io::detail::field(j, "goods", ""), "/goods");
    mf.params = io::params_from(io::detail::field(j, "params", ""), "/params");
    if (mf.goods.size() != mf.map.node_of_good.size()) throw io::ParseError("/goods", "length differs from decode map");
    return mf;
  });
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Fisher markets with SPLC utilities: verification, hardness gadgets, circuit reductions and repair"};
  app.require_subcommand(0, 1);
  bool schema = false;
  app.add_flag("--schema", schema, "print JSON schemas of every document and exit");

  std::string out = "-";
  int code = 0;
  std::function<void()> action;

  auto sub = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("--out", out, "output path (default: standard output)");
    return s;
  };

  // verify
  std::string market_f, prices_f, alloc_f, eps_s = "0", delta_s = "0";
  auto* verify = sub("verify", "check an (eps, delta)-approximate equilibrium");
  verify->add_option("--market", market_f)->required();
  verify->add_option("--prices", prices_f)->required();
  verify->add_option("--alloc", alloc_f)->required();
  verify->add_option("--eps", eps_s);
  verify->add_option("--delta", delta_s);
  verify->callback([&] {
    action = [&] {
      Market m = load_market(market_f);
      auto p = load(prices_f, [&](const json& j) { return io::prices_from(j, m.goods); });
      auto x = load(alloc_f, [&](const json& j) { return io::allocation_from(j, m.goods); });
      if (x.size() != m.num_buyers()) throw io::ParseError(alloc_f + "#/allocation", "one row per buyer expected");
      auto r = verify_equilibrium(m, p, x, flag(eps_s, "eps"), flag(delta_s, "delta"));
      io::write_json(io::to_json(r, m.goods), out, std::cout);
      code = r.accepted ? 0 : 1;
    };
  });

  // demand
  auto* demand = sub("demand", "greedy optimal bundle of every buyer at given prices");
  demand->add_option("--market", market_f)->required();
  demand->add_option("--prices", prices_f)->required();
  demand->callback([&] {
    action = [&] {
      Market m = load_market(market_f);
      auto p = load(prices_f, [&](const json& j) { return io::prices_from(j, m.goods); });
      json bundles = json::array();
      Allocation x;
      for (const auto& b : m.buyers) {
        Bundle bd = optimal_bundle(b, p, b.budget);
        bundles.push_back(io::to_json(bd, m.goods));
        x.push_back(bd.x);
      }
      json o = {{"bundles", bundles}};
      o.update(io::allocation_json(x, m.goods));
      io::write_json(o, out, std::cout);
    };
  });

  // reduce-pc-to-market
  std::string circuit_f, eps_m_s = "1/10", delta_c_s = "1/2", mode_s = "pcp", params_f, out_market, out_map;
  auto* reduce = sub("reduce-pc-to-market", "build the gadget market of a strict Pure-Circuit instance");
  reduce->add_option("--circuit", circuit_f)->required();
  reduce->add_option("--eps-m", eps_m_s);
  reduce->add_option("--delta-c", delta_c_s);
  reduce->add_option("--mode", mode_s, "pcp, inverse-poly or nonzero-spend");
  reduce->add_option("--params", params_f, "use these parameters instead of solving for them");
  reduce->add_option("--out-market", out_market, "market file");
  reduce->add_option("--out-map", out_map, "decode map file");
  reduce->callback([&] {
    action = [&] {
      auto c = load(circuit_f, [](const json& j) { return io::pure_circuit_from(j); });
      HardnessParams hp;
      if (!params_f.empty()) {
        hp = load(params_f, [](const json& j) { return io::params_from(j); });
      } else {
        HardnessMode mode;
        try {
          mode = parse_mode(mode_s);
        } catch (const std::invalid_argument& e) {
          throw UsageError(std::string("--mode: ") + e.what());
        }
        hp = solve_params(flag(eps_m_s, "eps-m"), flag(delta_c_s, "delta-c"), mode);
      }
      auto rm = reduce_pure_to_market(c, hp);
      json market = io::to_json(rm.market);
      json map = {{"decode_map", io::to_json(rm.map)}, {"goods", rm.market.goods}, {"params", io::to_json(hp)}};
      if (out_market.empty() && out_map.empty()) {
        io::write_json({{"market", market}, {"map", map}}, out, std::cout);
        return;
      }
      if (!out_market.empty()) io::write_json(market, out_market, std::cout);
      if (!out_map.empty()) io::write_json(map, out_map, std::cout);
    };
  });

  // decode-prices
  std::string map_f;
  auto* decode = sub("decode-prices", "read a Pure-Circuit assignment off gadget market prices");
  decode->add_option("--map", map_f)->required();
  decode->add_option("--prices", prices_f)->required();
  decode->callback([&] {
    action = [&] {
      auto mf = load_map(map_f);
      auto p = load(prices_f, [&](const json& j) { return io::prices_from(j, mf.goods); });
      io::write_json(io::to_json(decode_prices(p, mf.map, mf.params)), out, std::cout);
    };
  });

  // validate-params
  std::string delta_m_s, a_s;
  auto* validate = sub("validate-params", "check the gadget parameter inequalities");
  validate->add_option("--params", params_f, "parameter file; otherwise use the flags");
  validate->add_option("--eps-m", eps_m_s);
  validate->add_option("--delta-m", delta_m_s);
  validate->add_option("--a", a_s);
  validate->add_option("--delta-c", delta_c_s);
  validate->add_option("--mode", mode_s);
  validate->callback([&] {
    action = [&] {
      HardnessParams hp;
      if (!params_f.empty()) {
        hp = load(params_f, [](const json& j) { return io::params_from(j); });
      } else {
        if (delta_m_s.empty() || a_s.empty()) throw UsageError("validate-params: --params or --delta-m and --a required");
        hp = {flag(eps_m_s, "eps-m"), flag(delta_m_s, "delta-m"), flag(a_s, "a"), flag(delta_c_s, "delta-c"),
              HardnessMode::Pcp};
        try {
          hp.mode = parse_mode(mode_s);
        } catch (const std::invalid_argument& e) {
          throw UsageError(std::string("--mode: ") + e.what());
        }
      }
      auto r = validate_params(hp);
      io::write_json(io::to_json(r), out, std::cout);
      code = r.ok ? 0 : 1;
    };
  });

  // solve-params
  auto* solve = sub("solve-params", "find gadget parameters on a fixed grid");
  solve->add_option("--eps-m", eps_m_s);
  solve->add_option("--delta-c", delta_c_s);
  solve->add_option("--mode", mode_s);
  solve->callback([&] {
    action = [&] {
      HardnessMode mode;
      try {
        mode = parse_mode(mode_s);
      } catch (const std::invalid_argument& e) {
        throw UsageError(std::string("--mode: ") + e.what());
      }
      try {
        io::write_json(io::to_json(solve_params(flag(eps_m_s, "eps-m"), flag(delta_c_s, "delta-c"), mode)), out,
                       std::cout);
      } catch (const Infeasible& e) {
        std::cerr << e.what() << "\n";
        code = 1;
      }
    };
  });

  // gc-to-pc
  std::string eps_c_s = "1/20", delta_c2_s = "1/400", out_encoding;
  std::string geps_s = "1/10", gdelta_s = "1/10";
  auto* gc2pc = sub("gc-to-pc", "reduce a GCircuit instance to strict Pure-Circuit with unary encodings");
  gc2pc->add_option("--circuit", circuit_f)->required();
  gc2pc->add_option("--eps", geps_s);
  gc2pc->add_option("--delta", gdelta_s);
  gc2pc->add_option("--out-encoding", out_encoding, "write the unary encoding separately");
  gc2pc->callback([&] {
    action = [&] {
      auto gc = load(circuit_f, [](const json& j) { return io::gcircuit_from(j); });
      auto red = gcircuit_to_pure(gc, flag(geps_s, "eps"), flag(gdelta_s, "delta"));
      json traces = json::array();
      for (const auto& t : red.traces) traces.push_back(io::to_json(t));
      if (!out_encoding.empty()) {
        io::write_json(io::to_json(red.enc), out_encoding, std::cout);
        io::write_json({{"circuit", io::to_json(red.strict)}, {"gadgets", traces}}, out, std::cout);
        return;
      }
      io::write_json({{"circuit", io::to_json(red.strict)}, {"encoding", io::to_json(red.enc)}, {"gadgets", traces}},
                     out, std::cout);
    };
  });

  // decode-unary
  std::string encoding_f, assignment_f, gcircuit_f;
  auto* dunary = sub("decode-unary", "decode a strict Pure-Circuit assignment to GCircuit values");
  dunary->add_option("--encoding", encoding_f, "unary encoding, or a gc-to-pc output holding one")->required();
  dunary->add_option("--assignment", assignment_f)->required();
  dunary->add_option("--gcircuit", gcircuit_f)->required();
  dunary->add_option("--eps", geps_s);
  dunary->callback([&] {
    action = [&] {
      auto enc = load(encoding_f, [](const json& j) {
        if (j.is_object() && j.contains("encoding")) return io::unary_encoding_from(j["encoding"], "/encoding");
        return io::unary_encoding_from(j);
      });
      auto gc = load(gcircuit_f, [](const json& j) { return io::gcircuit_from(j); });
      std::size_t strict_nodes = 0;
      for (auto id : enc.trim.new_id)
        if (id != nil) strict_nodes = std::max(strict_nodes, id + 1);
      auto a = load(assignment_f, [&](const json& j) { return io::ternary_from(j, strict_nodes); });
      auto d = decode_pure_to_gcircuit(a, enc, gc, flag(geps_s, "eps"));
      json o = io::to_json(d.values, true);
      o["satisfied_fraction"] = io::to_json(d.satisfied_fraction);
      io::write_json(o, out, std::cout);
    };
  });

  // gcp-to-gc
  auto* gcp2gc = sub("gcp-to-gc", "lower a GCircuit+ instance to plain GCircuit");
  gcp2gc->add_option("--circuit", circuit_f)->required();
  gcp2gc->add_option("--eps", geps_s);
  gcp2gc->add_option("--delta", gdelta_s);
  gcp2gc->add_option("--assignment", assignment_f, "GCircuit assignment of the lowered circuit to decode back");
  gcp2gc->callback([&] {
    action = [&] {
      auto gcp = load(circuit_f, [](const json& j) { return io::gcircuitplus_from(j); });
      auto low = gcircuitplus_to_gcircuit(gcp, flag(geps_s, "eps"), flag(gdelta_s, "delta"));
      if (assignment_f.empty()) {
        io::write_json({{"circuit", io::to_json(low.gc)}, {"map", io::to_json(low.map)}}, out, std::cout);
        return;
      }
      auto a = load(assignment_f, [&](const json& j) { return io::real_from(j, low.gc.n); });
      auto v = decode_split(low.map, gcp, a);
      json o = io::to_json(v, true);
      o["satisfied_fraction"] = io::to_json(gcircuitplus_satisfied_fraction(gcp, v, low.map.eps));
      io::write_json(o, out, std::cout);
    };
  });

  // encode-market
  auto* encode = sub("encode-market", "build the GCircuit+ instance encoding a market");
  encode->add_option("--market", market_f)->required();
  std::string pre_delta_s;
  encode->add_option("--eps-c", eps_c_s);
  encode->add_option("--preprocess", pre_delta_s, "preprocess a reducible market with this delta first");
  encode->callback([&] {
    action = [&] {
      Market m = load_market(market_f);
      if (!pre_delta_s.empty()) m = preprocess_reducible(m, flag(pre_delta_s, "preprocess")).market;
      json o = io::to_json(encode_market(m, flag(eps_c_s, "eps-c")), m.goods);
      o["market"] = io::to_json(m);
      io::write_json(o, out, std::cout);
    };
  });

  // repair
  std::string solution_f, ledger_f, trace_dir;
  auto* repair = sub("repair", "repair an approximate solution into an exact-clearing equilibrium");
  repair->add_option("--market", market_f, "reducible, preprocessed market")->required();
  repair->add_option("--solution", solution_f,
                     "either {prices, allocation} or an encode-market circuit {assignment}")
      ->required();
  repair->add_option("--eps-c", eps_c_s);
  repair->add_option("--delta-c", delta_c2_s);
  repair->add_option("--ledger", ledger_f, "write the constant ledger here");
  repair->add_option("--trace", trace_dir, "directory for per-step snapshots");
  repair->callback([&] {
    action = [&] {
      Market m = load_market(market_f);
      Rational eps_c = flag(eps_c_s, "eps-c"), delta_c = flag(delta_c2_s, "delta-c");
      json sol = io::read_json(solution_f);
      RepairTrace tr;
      tr.keep_snapshots = !trace_dir.empty();
      PriceVector p;
      Allocation x;
      RepairOutcome ro;
      try {
        if (sol.is_object() && sol.contains("assignment")) {
          auto enc = encode_market(m, eps_c);
          auto a = load(solution_f, [&](const json& j) { return io::real_from(j, enc.gc.n); });
          auto full = repair_full(identity_preprocessing(m), enc, a, eps_c, delta_c, &tr);
          ro = full.reduced;
          p = full.p;
          x = full.x;
        } else {
          auto p0 = load(solution_f, [&](const json& j) { return io::prices_from(j, m.goods); });
          auto x0 = load(solution_f, [&](const json& j) { return io::allocation_from(j, m.goods); });
          if (x0.size() != m.num_buyers()) throw io::ParseError(solution_f + "#/allocation", "one row per buyer expected");
          ro = repair_steps(m, p0, x0, make_ledger(m, eps_c, delta_c), &tr);
          p = ro.p;
          x = ro.x;
        }
      } catch (const RoundLimitExceeded& e) {
        std::cerr << e.what() << "\n";
        code = 1;
        return;
      }
      json o = io::prices_json(p, m.goods);
      o.update(io::allocation_json(x, m.goods));
      o["report"] = io::to_json(ro.report, m.goods);
      o["certified_delta"] = io::to_json(ro.certified_delta);
      o["replaced_buyers"] = ro.replaced;
      o["trace_violations"] = tr.violations;
      io::write_json(o, out, std::cout);
      if (!ledger_f.empty()) io::write_json(io::to_json(ro.ledger), ledger_f, std::cout);
      if (!trace_dir.empty()) {
        std::filesystem::create_directories(trace_dir);
        for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
          char name[32];
          std::snprintf(name, sizeof name, "%03zu.json", k);
          io::write_json(io::to_json(tr.snapshots[k], m.goods), (std::filesystem::path(trace_dir) / name).string(),
                         std::cout);
        }
      }
      code = ro.report.accepted && tr.violations.empty() ? 0 : 1;
    };
  });

  // fisher-to-exchange
  auto* f2e = sub("fisher-to-exchange", "convert a Fisher market to an exchange market");
  f2e->add_option("--market", market_f)->required();
  f2e->add_option("--prices", prices_f, "also verify this Fisher equilibrium in the exchange market");
  f2e->add_option("--alloc", alloc_f);
  f2e->add_option("--eps", eps_s);
  f2e->add_option("--delta", delta_s);
  f2e->callback([&] {
    action = [&] {
      Market m = load_market(market_f);
      auto em = fisher_to_exchange(m);
      json o = {{"market", io::to_json(em)}, {"strongly_connected", economy_graph_strongly_connected(em)}};
      if (!prices_f.empty()) {
        if (alloc_f.empty()) throw UsageError("fisher-to-exchange: --prices needs --alloc");
        auto p = load(prices_f, [&](const json& j) { return io::prices_from(j, m.goods); });
        auto x = load(alloc_f, [&](const json& j) { return io::allocation_from(j, m.goods); });
        if (x.size() != m.num_buyers()) throw io::ParseError(alloc_f + "#/allocation", "one row per buyer expected");
        auto pn = normalize_prices(p, Rational(static_cast<long long>(m.num_buyers())));
        auto r = verify_exchange_equilibrium(em, pn, x, flag(eps_s, "eps"), flag(delta_s, "delta"));
        o.update(io::prices_json(pn, m.goods));
        o["report"] = io::to_json(r, m.goods);
        code = r.accepted ? 0 : 1;
      }
      io::write_json(o, out, std::cout);
    };
  });

  // search
  std::string config_f;
  auto* search = sub("search", "desk-scale equilibrium search");
  search->add_option("--market", market_f)->required();
  search->add_option("--eps", eps_s);
  search->add_option("--delta", delta_s);
  search->add_option("--config", config_f, "search configuration");
  search->callback([&] {
    action = [&] {
      Market m = load_market(market_f);
      SearchConfig cfg;
      if (!config_f.empty()) {
        cfg = load(config_f, [](const json& j) {
          SearchConfig c;
          io::detail::object(j, "");
          if (auto g = io::detail::optional_field(j, "grid")) {
            io::detail::array(*g, "/grid");
            for (std::size_t k = 0; k < g->size(); ++k) c.grid.push_back(io::rational_from((*g)[k], "/grid/" + std::to_string(k)));
          }
          auto count = [&](const char* key, auto& dst) {
            if (auto v = io::detail::optional_field(j, key)) dst = io::detail::index(*v, std::string("/") + key);
          };
          count("refinement_rounds", c.refinement_rounds);
          count("random_seeds", c.random_seeds);
          count("rng_seed", c.rng_seed);
          count("iterations", c.iterations);
          count("max_evaluations", c.max_evaluations);
          if (auto v = io::detail::optional_field(j, "dp_unit")) c.dp_unit = io::rational_from(*v, "/dp_unit");
          return c;
        });
      }
      auto r = search_equilibrium(m, flag(eps_s, "eps"), flag(delta_s, "delta"), cfg);
      if (!r) {
        std::cerr << "search: no equilibrium found\n";
        code = 1;
        return;
      }
      json o = io::prices_json(r->p, m.goods);
      o.update(io::allocation_json(r->x, m.goods));
      o["report"] = io::to_json(r->report, m.goods);
      o["evaluations"] = r->evaluations;
      io::write_json(o, out, std::cout);
    };
  });

  // bfsolve
  auto* bf = sub("bfsolve", "brute-force a satisfying Pure-Circuit assignment (at most 12 nodes)");
  bf->add_option("--circuit", circuit_f)->required();
  bf->callback([&] {
    action = [&] {
      auto c = load(circuit_f, [](const json& j) { return io::pure_circuit_from(j); });
      try {
        io::write_json(io::to_json(brute_force_pure_solve(c)), out, std::cout);
      } catch (const NotFound& e) {
        std::cerr << e.what() << "\n";
        code = 1;
      }
    };
  });

  // audit-gates
  auto* audit = sub("audit-gates", "wasted spending, faulty gates and decoded truth tables of a gadget market");
  audit->add_option("--circuit", circuit_f)->required();
  audit->add_option("--map", map_f)->required();
  audit->add_option("--market", market_f)->required();
  audit->add_option("--prices", prices_f)->required();
  audit->add_option("--alloc", alloc_f)->required();
  audit->callback([&] {
    action = [&] {
      auto c = load(circuit_f, [](const json& j) { return io::pure_circuit_from(j); });
      auto mf = load_map(map_f);
      Market m = load_market(market_f);
      auto p = load(prices_f, [&](const json& j) { return io::prices_from(j, m.goods); });
      auto x = load(alloc_f, [&](const json& j) { return io::allocation_from(j, m.goods); });
      if (x.size() != m.num_buyers()) throw io::ParseError(alloc_f + "#/allocation", "one row per buyer expected");
      auto a = gate_audit(c, mf.map, m, p, x, mf.params);
      io::write_json(io::to_json(a, m.goods), out, std::cout);
      code = a.clean_violations == 0 ? 0 : 1;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (schema) {
    io::write_json(io::schemas(), out, std::cout);
    return 0;
  }
  if (!action) {
    std::cerr << app.help();
    return 2;
  }
  try {
    action();
  } catch (const io::ParseError& e) {
    std::cerr << "malformed input at " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return code;
}

int main(int argc, char** argv) { return run(argc, argv); }
