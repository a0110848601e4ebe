#include <doctest.h>

#include "dualgate/errors.hpp"
#include "dualgate/report.hpp"
#include "dualgate/svgplot.hpp"

using namespace dualgate;

TEST_CASE("CSV round trip") {
  Table t;
  t.columns = {"a", "b"};
  t.add_row({"1", "x y"});
  t.add_row({"2.5", ""});
  const Table u = Table::from_csv(t.to_csv());
  CHECK(u.columns == t.columns);
  CHECK(u.rows == t.rows);
  CHECK_THROWS_AS(t.add_row({"1"}), SchemaMismatch);
  CHECK_THROWS_AS(t.column_index("c"), SchemaMismatch);
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1.0 / 3.0) == "0.3333333333");
}

TEST_CASE("config resolution") {
  const ExperimentConfig c =
      resolve_config("ceiling", R"({"parameters": {"budget": 2}})", 3, "out");
  CHECK(c.parameters["budget"].get<double>() == 2.0);
  CHECK(c.parameters["alpha"].get<double>() == 3.0);
  CHECK(c.seed == 3);
  CHECK_THROWS_AS(resolve_config("ceiling", R"({"parameters": {"budgett": 2}})", 0, ""), ConfigError);
  CHECK_THROWS_AS(resolve_config("ceiling", R"({"parameters": {"horizons": 5}})", 0, ""), ConfigError);
  CHECK_THROWS_AS(resolve_config("ceiling", R"({"parameters": {"horizons": [1.5]}})", 0, ""), ConfigError);
  CHECK_THROWS_AS(resolve_config("ceiling", R"({"experiment": "counting"})", 0, ""), ConfigError);
  CHECK_THROWS_AS(resolve_config("ceiling", "[]", 0, ""), ConfigError);
  CHECK_THROWS_AS(resolve_config("nope", "{}", 0, ""), ConfigError);
  for (const auto& name : experiment_names()) CHECK(default_parameters(name).is_object());
}

TEST_CASE("table comparison") {
  const Table produced = Table::from_csv("k,v,w\n1,10.0,5\n2,20.0,6\n");
  const Table reference = Table::from_csv("k,v,w\n2,20.5|conditional,9|known-discrepancy\n1,10,-\n");
  const Json tol = Json::parse(R"({"keys": ["k"], "columns": {"v": {"rel": 0.01}}})");
  CompareReport r = compare_tables(produced, reference, tol);
  REQUIRE(r.cells.size() == 3);
  CHECK_FALSE(r.cells[0].within_tolerance);  // 20 vs 20.5 is 2.4%
  CHECK(r.cells[0].status == CellStatus::Conditional);
  CHECK_FALSE(r.cells[1].counts);
  CHECK(r.cells[2].within_tolerance);
  CHECK_FALSE(r.passed());
  const Json loose = Json::parse(R"({"keys": ["k"], "columns": {"v": {"rel": 0.05}}})");
  CHECK(compare_tables(produced, reference, loose).passed());
  CHECK_THROWS_AS(compare_tables(produced, Table::from_csv("k,z\n1,1\n"), tol), SchemaMismatch);
  CHECK_THROWS_AS(compare_tables(produced, Table::from_csv("k,v\n3,1\n"), tol), SchemaMismatch);
  CHECK_THROWS_AS(compare_tables(produced, Table::from_csv("k,v\n1,1|maybe\n"), tol), SchemaMismatch);
}

TEST_CASE("svg plot skips unusable points and is deterministic") {
  Plot p{"t", "x", "y", true, true, {{"s", {1.0, 0.0, 10.0}, {1.0, 2.0, -1.0}, false}}, {"note"}};
  const std::string a = render_svg(p);
  CHECK(a == render_svg(p));
  CHECK(a.find("<polyline") != std::string::npos);
  CHECK(a.find("nan") == std::string::npos);
  Plot empty{"<&>", "", "", false, false, {}, {}};
  CHECK(render_svg(empty).find("&lt;&amp;&gt;") != std::string::npos);
}
