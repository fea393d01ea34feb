// Copyright 2026 The Coplan Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "coplan/cli.hpp"
#include "coplan/errors.hpp"
#include "doctest.h"
#include "toy.hpp"

namespace coplan {
namespace {

using nlohmann::json;

json ToyJson() {
  std::ifstream in(DataFile("toy.scn"));
  return json::parse(in);
}

std::string SchemaPath(const json& doc) {
  try {
    ScenarioFromJson(doc);
  } catch (const SchemaError& e) {
    return e.path();
  }
  return "<accepted>";
}

TEST_CASE("the toy scenario loads") {
  const Scenario s = LoadScenario(DataFile("toy.scn"));
  CHECK(s.retailer.demand.size() == 2);
  CHECK(s.supplier.capacity.size() == 2);
  CHECK(s.retailer.arc_costs.size() == 2);
  CHECK(s.retailer.demand == Vector{40, 60});
  CHECK(s.fee.alpha == 50.0);
  REQUIRE(s.menu);
  CHECK(s.menu->alpha == 50.0);
  CHECK_FALSE(s.dynamic);
}

TEST_CASE("schema errors carry the field path") {
  json doc = ToyJson();
  doc.erase("supplier");
  CHECK(SchemaPath(doc) == "supplier");

  doc = ToyJson();
  doc["retailer"]["colour"] = "red";
  CHECK(SchemaPath(doc) == "retailer.colour");

  doc = ToyJson();
  doc["retailer"]["demand"][1] = "sixty";
  CHECK(SchemaPath(doc).rfind("retailer.demand", 0) == 0);

  doc = ToyJson();
  doc["supplier"]["arc_costs"][0].push_back(7);
  CHECK(SchemaPath(doc) != "<accepted>");

  doc = ToyJson();
  doc["fee"]["kind"] = "bribe";
  CHECK(SchemaPath(doc).rfind("fee", 0) == 0);

  CHECK_THROWS_AS(LoadScenario(DataFile("missing.scn")), Error);
}

TEST_CASE("saving and loading is a fixed point") {
  for (const char* name : {"toy.scn", "rolling.scn"}) {
    const Scenario s = LoadScenario(DataFile(name));
    const std::string path =
        (std::filesystem::temp_directory_path() / ("coplan_roundtrip_" + std::string(name))).string();
    SaveScenario(s, path);
    const Scenario back = LoadScenario(path);
    CHECK(ScenarioToJson(back) == ScenarioToJson(s));
    std::remove(path.c_str());
  }
}

TEST_CASE("the toy report") {
  const Report r = Run(LoadScenario(DataFile("toy.scn")));
  const json& d = r.doc;
  CHECK(d["jit"]["retailer_cost"] == 220.0);
  CHECK(d["jit"]["supplier_cost"] == 610.0);
  CHECK(d["jit"]["total_cost"] == 830.0);
  CHECK(d["firstbest"]["total_cost"] == 710.0);
  CHECK(d["firstbest"]["coordination_gain"] == 120.0);
  CHECK(d["firstbest"]["cost_reduction_pct"].get<double>() == doctest::Approx(14.4578).epsilon(1e-4));
  CHECK(d["vcg"]["transfer_supplier"] == 80.0);
  CHECK(d["vcg"]["transfer_retailer"] == -150.0);
  CHECK(d["vcg"]["budget_sum"] == -70.0);
  CHECK(d["vcg"]["budget_regime"] == "deficit");
  CHECK(d["menu"]["chosen"] == 3);
  CHECK(d["menu"]["net_utility"] == 1460.0);
  CHECK(r.text.find("14.46") != std::string::npos);
  CHECK(r.text.find("-150.00") != std::string::npos);
}

TEST_CASE("only the requested analyses are reported") {
  RunOptions o;
  o.analyses = ParseAnalyses("jit");
  const Report r = Run(LoadScenario(DataFile("toy.scn")), o);
  CHECK(r.doc.contains("jit"));
  CHECK_FALSE(r.doc.contains("firstbest"));
  CHECK_FALSE(r.doc.contains("vcg"));
  CHECK_FALSE(r.doc.contains("menu"));
  CHECK_THROWS_AS(ParseAnalyses("jit,astrology"), ParameterError);
  CHECK(ParseAnalyses("all").size() == 5);
}

TEST_CASE("consensus and centralized reports agree") {
  RunOptions o;
  o.analyses = ParseAnalyses("firstbest");
  o.mode = RunMode::kCpp;
  const Report cpp = Run(LoadScenario(DataFile("toy.scn")), o);
  const json plan = cpp.doc["firstbest"]["plan"];
  CHECK(std::abs(plan[0].get<double>() - 10.0) <= 0.05);
  CHECK(std::abs(plan[1].get<double>() - 90.0) <= 0.05);
  CHECK(cpp.doc["firstbest"]["iterations"].get<int>() > 0);
}

TEST_CASE("protocol mode runs over loopback agents") {
  RunOptions o;
  o.analyses = ParseAnalyses("firstbest,menu");
  o.mode = RunMode::kProtocol;
  const Report r = Run(LoadScenario(DataFile("toy.scn")), o);
  const json plan = r.doc["firstbest"]["plan"];
  CHECK(std::abs(plan[0].get<double>() - 10.0) <= 0.05);
  CHECK(r.doc["menu"]["offer"]["accepted"] == true);
  CHECK(r.doc["menu"]["offer"]["fee"].get<double>() == doctest::Approx(80.0).epsilon(1e-3));
}

TEST_CASE("reports are byte-identical across runs") {
  const Scenario s = LoadScenario(DataFile("rolling.scn"));
  RunOptions o;
  o.mode = RunMode::kCpp;
  CHECK(Run(s, o).doc.dump() == Run(s, o).doc.dump());
  CHECK(Run(s, o).text == Run(s, o).text);
}

TEST_CASE("a menu priced above the gain is declined") {
  Scenario s = LoadScenario(DataFile("toy.scn"));
  RunOptions o;
  o.analyses = ParseAnalyses("menu");
  o.alpha = 121.0;
  const Report r = Run(s, o);
  CHECK(r.doc["menu"]["chosen"].is_null());
  CHECK(r.text.find("zero transfers") != std::string::npos);
}

TEST_CASE("the rolling scenario reports every week") {
  const Report r = Run(LoadScenario(DataFile("rolling.scn")));
  const json& weeks = r.doc["dynamic"]["weeks"];
  REQUIRE(weeks.size() == 10);
  CHECK(weeks[0]["week"] == 1);
  double sum = 0.0;
  for (const json& w : weeks) sum += w["cbt"].get<double>();
  CHECK(r.doc["dynamic"]["cumulative_cbt"].get<double>() == doctest::Approx(sum));
}

TEST_CASE("money formatting") {
  CHECK(FormatMoney(1780.0) == "1780.00");
  CHECK(FormatMoney(-150.0) == "-150.00");
  CHECK(FormatMoney(0.005) == "0.01");
  CHECK(FormatMoney(-0.001) == "0.00");
}

}  // namespace
}  // namespace coplan
