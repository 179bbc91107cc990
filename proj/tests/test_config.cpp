#include <catch2/catch_amalgamated.hpp>

#include "pslab/config.hpp"

using namespace pslab;

TEST_CASE("config serialisation is a fixed point") {
  RunConfig c;
  c.n_list = {100, 10000};
  c.prevalence_list = {0.1, 0.5};
  c.scenario_list = {2, 4};
  c.dgp_list = {"logit", "cloglog_u"};
  c.reps = 77;
  c.base_seed = 123456789;
  c.threads = 3;
  c.out_dir = "somewhere";
  c.power_rule = "one_sided_05";
  c.matching_variance = "robust";
  const std::string once = serialise_config(c);
  const std::string twice = serialise_config(parse_config(once));
  CHECK(once == twice);
}

TEST_CASE("defaults pass validation") {
  RunConfig c;
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("invalid configurations are rejected with messages") {
  RunConfig c;
  c.scenario_list = {9};
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c = RunConfig{};
  c.prevalence_list = {0.3};
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c = RunConfig{};
  c.reps = 0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c = RunConfig{};
  c.threads = 0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c = RunConfig{};
  c.n_list.clear();
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c = RunConfig{};
  c.dgp_list = {"probit"};
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c = RunConfig{};
  c.power_rule = "two_sided";
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
}

TEST_CASE("grid cells expand in table order") {
  RunConfig c;
  c.n_list = {100, 1000};
  c.prevalence_list = {0.5, 0.05};
  c.scenario_list = {2, 1};
  c.dgp_list = {"logit", "cloglog"};
  c.reps = 5;
  const auto cells = c.cells();
  REQUIRE(cells.size() == 16);
  CHECK(cells[0].n == 1000);
  CHECK(cells[0].exposure_prevalence == 0.05);
  CHECK(cells[0].overlap_scenario == 1);
  CHECK(cells[0].link == Link::logit);
  CHECK(cells[1].link == Link::cloglog);
  CHECK(cells[2].overlap_scenario == 2);
  CHECK(cells[8].n == 100);
  for (const auto& cell : cells) CHECK(cell.reps == 5);
}

TEST_CASE("config knobs map onto harness settings") {
  RunConfig c;
  CHECK_THAT(c.harness().power_z, Catch::Matchers::WithinAbs(1.9599639845, 1e-9));
  CHECK(c.harness().estimator.matching_variance == VarianceRegime::model_based);
  c.power_rule = "one_sided_05";
  c.matching_variance = "robust";
  CHECK_THAT(c.harness().power_z, Catch::Matchers::WithinAbs(1.6448536270, 1e-9));
  CHECK(c.harness().estimator.matching_variance == VarianceRegime::robust);
}

TEST_CASE("dgp variants parse both ways") {
  for (const std::string name : {"logit", "cloglog", "logit_u", "cloglog_u"}) {
    CHECK(dgp_variant_name(parse_dgp_variant(name)) == name);
  }
  CHECK_THROWS_AS(parse_dgp_variant("nope"), std::invalid_argument);
}
