#pragma once

// Run configuration: grid selection plus execution knobs.  Serialised as
// JSON; command-line flags override file values.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pslab/harness.hpp"

namespace pslab {

struct DgpVariant {
  Link link = Link::logit;
  bool unmeasured_confounder = false;
};

inline std::string dgp_variant_name(const DgpVariant& v) {
  return v.unmeasured_confounder ? link_name(v.link) + "_u" : link_name(v.link);
}

inline DgpVariant parse_dgp_variant(const std::string& s) {
  if (s == "logit") return {Link::logit, false};
  if (s == "cloglog") return {Link::cloglog, false};
  if (s == "logit_u") return {Link::logit, true};
  if (s == "cloglog_u") return {Link::cloglog, true};
  throw std::invalid_argument("unknown dgp variant '" + s +
                              "' (expected logit, cloglog, logit_u, cloglog_u)");
}

struct RunConfig {
  std::vector<std::size_t> n_list = {100, 1000, 10000, 100000};
  std::vector<double> prevalence_list = {0.5, 0.1, 0.05};
  std::vector<int> scenario_list = {1, 2, 3, 4, 5};
  std::vector<std::string> dgp_list = {"logit"};
  std::size_t reps = 1000;
  std::uint64_t base_seed = 20240815;
  unsigned threads = 2;
  std::string out_dir = "out";
  std::string power_rule = "ci95";            // ci95 (1.96) or one_sided_05 (1.645)
  std::string matching_variance = "model";    // model or robust
  bool resume = false;

  HarnessConfig harness() const {
    HarnessConfig h;
    h.power_z = power_rule == "one_sided_05" ? 1.6448536269514722 : 1.959963984540054;
    h.estimator.matching_variance = matching_variance == "robust"
                                        ? VarianceRegime::robust
                                        : VarianceRegime::model_based;
    return h;
  }

  std::vector<CellSpec> cells() const {
    std::vector<CellSpec> out;
    // Row order mirrors the results table: n descending, prevalence
    // ascending, scenario ascending, dgp in list order.
    std::vector<std::size_t> ns = n_list;
    std::sort(ns.begin(), ns.end(), std::greater<>());
    std::vector<double> prevs = prevalence_list;
    std::sort(prevs.begin(), prevs.end());
    std::vector<int> scs = scenario_list;
    std::sort(scs.begin(), scs.end());
    for (std::size_t n : ns) {
      for (double p : prevs) {
        for (int s : scs) {
          for (const std::string& d : dgp_list) {
            const DgpVariant v = parse_dgp_variant(d);
            CellSpec cell;
            cell.n = n;
            cell.exposure_prevalence = p;
            cell.overlap_scenario = s;
            cell.link = v.link;
            cell.unmeasured_confounder = v.unmeasured_confounder;
            cell.reps = reps;
            out.push_back(cell);
          }
        }
      }
    }
    return out;
  }
};

// Throws std::invalid_argument with a usable message on bad input.
inline void validate(const RunConfig& c) {
  if (c.n_list.empty() || c.prevalence_list.empty() || c.scenario_list.empty() ||
      c.dgp_list.empty()) {
    throw std::invalid_argument("grid selection must be non-empty");
  }
  for (std::size_t n : c.n_list) {
    if (n < 2) throw std::invalid_argument("sample size must be at least 2");
  }
  for (double p : c.prevalence_list) {
    if (p != 0.5 && p != 0.1 && p != 0.05) {
      throw std::invalid_argument(
          "exposure prevalence must be one of 0.5, 0.1, 0.05");
    }
  }
  for (int s : c.scenario_list) {
    if (s < 1 || s > 5) {
      throw std::invalid_argument("overlap scenario must be in 1..5");
    }
  }
  for (const std::string& d : c.dgp_list) parse_dgp_variant(d);
  if (c.reps < 1) throw std::invalid_argument("reps must be at least 1");
  if (c.threads < 1) throw std::invalid_argument("threads must be at least 1");
  if (c.power_rule != "ci95" && c.power_rule != "one_sided_05") {
    throw std::invalid_argument("power_rule must be ci95 or one_sided_05");
  }
  if (c.matching_variance != "model" && c.matching_variance != "robust") {
    throw std::invalid_argument("matching_variance must be model or robust");
  }
}

inline nlohmann::json to_json(const RunConfig& c) {
  return nlohmann::json{{"n", c.n_list},
                        {"prevalence", c.prevalence_list},
                        {"scenario", c.scenario_list},
                        {"dgp", c.dgp_list},
                        {"reps", c.reps},
                        {"seed", c.base_seed},
                        {"threads", c.threads},
                        {"out_dir", c.out_dir},
                        {"power_rule", c.power_rule},
                        {"matching_variance", c.matching_variance},
                        {"resume", c.resume}};
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  if (j.contains("n")) c.n_list = j.at("n").get<std::vector<std::size_t>>();
  if (j.contains("prevalence"))
    c.prevalence_list = j.at("prevalence").get<std::vector<double>>();
  if (j.contains("scenario")) c.scenario_list = j.at("scenario").get<std::vector<int>>();
  if (j.contains("dgp")) c.dgp_list = j.at("dgp").get<std::vector<std::string>>();
  if (j.contains("reps")) c.reps = j.at("reps").get<std::size_t>();
  if (j.contains("seed")) c.base_seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("threads")) c.threads = j.at("threads").get<unsigned>();
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  if (j.contains("power_rule")) c.power_rule = j.at("power_rule").get<std::string>();
  if (j.contains("matching_variance"))
    c.matching_variance = j.at("matching_variance").get<std::string>();
  if (j.contains("resume")) c.resume = j.at("resume").get<bool>();
  return c;
}

inline std::string serialise_config(const RunConfig& c) { return to_json(c).dump(2); }

inline RunConfig parse_config(const std::string& text) {
  return config_from_json(nlohmann::json::parse(text));
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace pslab
