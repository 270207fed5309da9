#include "fmarket/io.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <sstream>

using namespace fmarket;
using io::json;

namespace {

Market sample_market() {
  Market m;
  m.goods = {"bread", "milk"};
  m.buyers.push_back({Rational(3, 2), {{0, {{2, Rational(1, 2)}, {1, std::nullopt}}}}});
  m.buyers.push_back({1, {{0, {{1, 1}}}, {1, {{3, std::nullopt}}}}});
  return m;
}

std::string where(const std::function<void()>& f) {
  try {
    f();
  } catch (const io::ParseError& e) {
    return e.where;
  }
  return "<no error>";
}

}  // namespace

TEST(IoMarket, RoundTrip) {
  Market m = sample_market();
  json j = io::to_json(m);
  EXPECT_EQ(j["buyers"][0]["utilities"]["bread"][1]["length"], "inf");
  EXPECT_EQ(j["buyers"][0]["budget"], "3/2");
  EXPECT_EQ(io::to_json(io::market_from(j)), j);
}

TEST(IoMarket, AcceptsIntegersAndDecimals) {
  json j = json::parse(R"({"goods":["a"],"buyers":[{"budget":2,"utilities":{"a":[{"slope":"0.5","length":"inf"}]}}]})");
  Market m = io::market_from(j);
  EXPECT_EQ(m.buyers[0].budget, 2);
  EXPECT_EQ(m.buyers[0].utilities.at(0)[0].slope, Rational(1, 2));
}

TEST(IoMarket, ErrorPaths) {
  json j = io::to_json(sample_market());
  json a = j;
  a["buyers"][1].erase("budget");
  EXPECT_EQ(where([&] { io::market_from(a); }), "/buyers/1/budget");
  json b = j;
  b["buyers"][0]["utilities"]["eggs"] = json::array();
  EXPECT_EQ(where([&] { io::market_from(b); }), "/buyers/0/utilities/eggs");
  json c = j;
  c["buyers"][0]["utilities"]["bread"][0]["slope"] = "x/2";
  EXPECT_EQ(where([&] { io::market_from(c); }), "/buyers/0/utilities/bread/0/slope");
  json d = j;
  d["goods"] = {"a", "a"};
  EXPECT_EQ(where([&] { io::market_from(d); }), "/goods");
}

TEST(IoPrices, RoundTripAndMissingGood) {
  Market m = sample_market();
  PriceVector p{Rational(1, 3), 2};
  json j = io::prices_json(p, m.goods);
  EXPECT_EQ(io::prices_from(j, m.goods), p);
  j["prices"].erase("milk");
  EXPECT_NE(where([&] { io::prices_from(j, m.goods); }).find("/prices"), std::string::npos);
}

TEST(IoAllocation, RoundTrip) {
  Market m = sample_market();
  Allocation x{{Rational(1, 2), 0}, {Rational(1, 4), Rational(7, 8)}};
  EXPECT_EQ(io::allocation_from(io::allocation_json(x, m.goods), m.goods), x);
}

TEST(IoCircuit, PureRoundTrip) {
  PureCircuitInstance inst{3, {purify_gate(0, 1, 2), nand_gate(1, 2, 0)}};
  json j = io::to_json(inst);
  EXPECT_EQ(io::to_json(io::pure_circuit_from(j)), j);
  TernaryAssignment a{Tern::Bot, Tern::One, Tern::Zero};
  EXPECT_EQ(io::ternary_from(io::to_json(a), 3), a);
  json bad = io::to_json(a);
  bad["assignment"]["1"] = "2";
  EXPECT_EQ(where([&] { io::ternary_from(bad, 3); }), "/assignment/1");
}

TEST(IoCircuit, GCircuitPlusRoundTrip) {
  GCircuitPlusInstance gc{2,
                          {{GKind::Const, nil, nil, 0, Rational(1, 2)}, {GKind::Scale, 0, nil, 1, -2}},
                          {{-1, 1}, {-2, 2}},
                          -2,
                          2,
                          0};
  json j = io::to_json(gc);
  EXPECT_EQ(io::to_json(io::gcircuitplus_from(j)), j);
  RealAssignment a{Rational(1, 2), -1};
  EXPECT_EQ(io::real_from(io::to_json(a, true), 2), a);
  json missing = io::to_json(a, true);
  missing["assignment"].erase("1");
  EXPECT_EQ(where([&] { io::real_from(missing, 2); }), "/assignment/1");
}

TEST(IoHardness, ParamsAndDecodeMap) {
  auto hp = solve_params(Rational(1, 10), Rational(1, 2), HardnessMode::Pcp);
  json j = io::to_json(hp);
  auto back = io::params_from(j);
  EXPECT_EQ(back.eps_m, hp.eps_m);
  EXPECT_EQ(back.delta_m, hp.delta_m);
  EXPECT_EQ(back.a, hp.a);
  EXPECT_EQ(back.mode, hp.mode);
  PureCircuitInstance inst{3, {purify_gate(0, 1, 2), nand_gate(1, 2, 0)}};
  auto rm = reduce_pure_to_market(inst, hp);
  json dm = io::to_json(rm.map);
  EXPECT_EQ(io::to_json(io::decode_map_from(dm)), dm);
}

TEST(IoEquivalence, UnaryEncodingRoundTrip) {
  GCircuitInstance gc{2, {{GKind::Const, nil, nil, 0, Rational(1, 2)}, {GKind::Not, 0, nil, 1, 0}}};
  auto red = gcircuit_to_pure(gc, 1, 1);
  json j = io::to_json(red.enc);
  EXPECT_EQ(io::to_json(io::unary_encoding_from(j)), j);
}

TEST(IoRepair, LedgerHasFormulaEntries) {
  Market m;
  m.goods = {"g"};
  m.buyers.push_back({1, {{0, {{1, 2}}}}});
  json j = io::to_json(make_ledger(m, Rational(1, 20), Rational(1, 400)));
  bool found = false;
  for (const auto& e : j["ledger"])
    if (e["name"] == "f") {
      found = true;
      EXPECT_EQ(e["value"], "3/10");
    }
  EXPECT_TRUE(found);
}

TEST(IoFiles, WriteAndRead) {
  json j = io::to_json(sample_market());
  std::string file = ::testing::TempDir() + "fmarket_io_test.json";
  std::ostringstream unused;
  io::write_json(j, file, unused);
  EXPECT_TRUE(unused.str().empty());
  EXPECT_EQ(io::read_json(file), j);
  std::remove(file.c_str());
  std::ostringstream out;
  io::write_json(j, "-", out);
  EXPECT_EQ(json::parse(out.str()), j);
  EXPECT_THROW(io::read_json(file), io::ParseError);
}

// Every field a schema marks required is produced by the matching writer.
TEST(IoSchemas, RequiredFieldsPresent) {
  json s = io::schemas();
  ASSERT_TRUE(s.contains("$defs"));
  auto check = [&](const char* def, const json& doc) {
    for (const auto& key : s["$defs"][def]["required"]) EXPECT_TRUE(doc.contains(key.get<std::string>())) << def << " " << key;
  };
  check("market", io::to_json(sample_market()));
  check("pure_circuit", io::to_json(PureCircuitInstance{3, {purify_gate(0, 1, 2), nand_gate(1, 2, 0)}}));
  check("hardness_params", io::to_json(solve_params(Rational(1, 10), Rational(1, 2), HardnessMode::Pcp)));
  check("prices", io::prices_json({1, 2}, {"a", "b"}));
  check("allocation", io::allocation_json({{1, 2}}, {"a", "b"}));
}
