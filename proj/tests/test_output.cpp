#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pslab/csv.hpp"
#include "pslab/figures.hpp"

using namespace pslab;

namespace {

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "pslab_test_output";
  std::filesystem::create_directories(dir);
  return dir;
}

ResultRow make_row(std::size_t n, double prev, int sc, const std::string& method,
                   bool with_metrics = true) {
  ResultRow r;
  r.n = n;
  r.exposure_probability = prev;
  r.scenario = sc;
  r.method = method;
  r.convergence_pct = with_metrics ? 100.0 : 10.0;
  if (with_metrics) {
    r.bias = 0.01;
    r.se_bias = 0.001;
    r.abs_error = 0.1;
    r.se_abs_error = 0.002;
    r.power_pct = 88.0;
    r.se_power = 1.0;
    r.coverage_pct = 94.0;
    r.se_coverage = 0.9;
  }
  r.reps = 1000;
  r.seed = 42;
  return r;
}

}  // namespace

TEST_CASE("csv round trip preserves rows and missing values") {
  const auto path = (temp_dir() / "roundtrip.csv").string();
  std::vector<ResultRow> rows;
  rows.push_back(make_row(1000, 0.5, 1, "iptw"));
  rows.push_back(make_row(100, 0.1, 3, "nn_match", false));  // all-NA metrics
  emit_csv(rows, path);

  const auto parsed = parse_csv(path);
  REQUIRE(parsed.size() == 2);
  // Sorted: n desc.
  CHECK(parsed[0].n == 1000);
  CHECK(parsed[0].method == "iptw");
  CHECK(parsed[0].bias.has_value());
  CHECK_THAT(*parsed[0].bias, Catch::Matchers::WithinAbs(0.01, 1e-12));
  CHECK(parsed[1].n == 100);
  CHECK_FALSE(parsed[1].bias.has_value());
  CHECK_FALSE(parsed[1].coverage_pct.has_value());

  // NA literals present in the file.
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find(",NA,") != std::string::npos);
  CHECK(text.find(kCsvHeader) == 0);
}

TEST_CASE("rows are ordered like the reference tables") {
  std::vector<ResultRow> rows;
  rows.push_back(make_row(100, 0.5, 2, "iptw"));
  rows.push_back(make_row(100000, 0.05, 1, "nn_match"));
  rows.push_back(make_row(100000, 0.05, 1, "ps_covariate"));
  rows.push_back(make_row(100, 0.5, 1, "regression_standardised"));
  rows.push_back(make_row(100000, 0.5, 1, "caliper_match"));
  sort_rows(rows);
  CHECK(rows[0].n == 100000);
  CHECK(rows[0].exposure_probability == 0.05);
  CHECK(rows[0].method == "ps_covariate");  // fixed method order
  CHECK(rows[1].method == "nn_match");
  CHECK(rows[2].exposure_probability == 0.5);
  CHECK(rows[3].n == 100);
  CHECK(rows[3].scenario == 1);
  CHECK(rows[4].scenario == 2);
}

TEST_CASE("empty tables produce a header-only csv") {
  const auto path = (temp_dir() / "empty.csv").string();
  emit_csv(std::vector<ResultRow>{}, path);
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == kCsvHeader);
  CHECK_FALSE(std::getline(in, line));
}

TEST_CASE("malformed csv input names the offending line") {
  const auto path = (temp_dir() / "bad.csv").string();
  {
    std::ofstream out(path);
    out << kCsvHeader << "\n";
    out << "1000,0.5,1,iptw,100,0.01,0.001,0.1,0.002,88,1,94,0.9,logit,false,1000,42\n";
    out << "1000,0.5,oops,iptw,100,0.01,0.001,0.1,0.002,88,1,94,0.9,logit,false,1000,42\n";
  }
  try {
    parse_csv(path);
    FAIL("expected a parse error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }

  {
    std::ofstream out(path);
    out << "not,a,results,file\n";
  }
  CHECK_THROWS_WITH(parse_csv(path), Catch::Matchers::ContainsSubstring("header"));
}

TEST_CASE("figures are emitted per metric and mechanism") {
  const auto dir = temp_dir() / "figs";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  std::vector<ResultRow> rows;
  for (int sc = 1; sc <= 5; ++sc) {
    for (const char* m :
         {"ps_covariate", "nn_match", "caliper_match", "iptw",
          "regression_standardised"}) {
      // Scenario 5 below the convergence threshold: a gap in every line.
      rows.push_back(make_row(1000, 0.5, sc, m, sc != 5));
    }
  }
  const auto written = emit_figures(rows, dir.string());
  CHECK(written.size() == 6);
  for (const auto& name : written) {
    CHECK(name.find("_logit.svg") != std::string::npos);
    std::ifstream in(dir / name);
    REQUIRE(in.good());
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    CHECK(text.find("<svg") == 0);
    CHECK(text.find("</svg>") != std::string::npos);
  }

  // An empty row set is an error, not silent empty output.
  CHECK_THROWS(emit_figures(std::vector<ResultRow>{}, dir.string()));
}

TEST_CASE("figure files split by outcome mechanism") {
  const auto dir = temp_dir() / "figs2";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  std::vector<ResultRow> rows;
  rows.push_back(make_row(1000, 0.5, 1, "iptw"));
  auto clog = make_row(1000, 0.5, 1, "iptw");
  clog.link = Link::cloglog;
  clog.unmeasured_confounder = true;
  rows.push_back(clog);
  const auto written = emit_figures(rows, dir.string());
  CHECK(written.size() == 12);
  bool has_cloglog_u = false;
  for (const auto& name : written)
    has_cloglog_u = has_cloglog_u || name.find("cloglog_u") != std::string::npos;
  CHECK(has_cloglog_u);
}
