// Command-line front end: run simulation grids, verify against the
// bundled reference table, and plot results CSVs.
//
// Exit codes: 0 success, 1 validation error, 2 verification failure,
// 3 I/O error.

#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pslab/config.hpp"
#include "pslab/csv.hpp"
#include "pslab/figures.hpp"
#include "pslab/harness.hpp"
#include "pslab/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitVerifyFailed = 2;
constexpr int kExitIo = 3;

int cmd_run(const pslab::RunConfig& config) {
  using clock = std::chrono::steady_clock;
  try {
    pslab::validate(config);
  } catch (const std::exception& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kExitValidation;
  }

  std::error_code ec;
  std::filesystem::create_directories(config.out_dir, ec);
  if (ec) {
    std::cerr << "cannot create output directory " << config.out_dir << ": "
              << ec.message() << "\n";
    return kExitIo;
  }
  const std::string csv_path = config.out_dir + "/results.csv";

  std::vector<pslab::ResultRow> existing;
  if (config.resume && std::filesystem::exists(csv_path)) {
    try {
      existing = pslab::parse_csv(csv_path);
    } catch (const std::exception& e) {
      std::cerr << "cannot resume from " << csv_path << ": " << e.what() << "\n";
      return kExitIo;
    }
    std::cerr << "resuming: " << existing.size() << " row(s) already present\n";
  }
  const std::vector<pslab::CellSpec> cells =
      pslab::remaining_cells(existing, config.cells());
  std::cerr << "running " << cells.size() << " cell(s), " << config.reps
            << " replicates each, " << config.threads << " thread(s)\n";

  std::vector<pslab::ResultRow> rows = existing;
  const pslab::HarnessConfig harness = config.harness();
  std::size_t index = 0;
  for (const auto& cell : cells) {
    ++index;
    const auto t0 = clock::now();
    const pslab::CellMetrics cm =
        pslab::run_cell_metrics(cell, config.base_seed, config.threads, harness);
    const double secs =
        std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - t0)
            .count() /
        1000.0;
    std::fprintf(stderr, "[%zu/%zu] n=%zu prev=%g sc=%d dgp=%s: %.1fs\n", index,
                 cells.size(), cell.n, cell.exposure_prevalence, cell.overlap_scenario,
                 pslab::dgp_tag(cell.link, cell.unmeasured_confounder).c_str(), secs);
    const auto cell_rows = pslab::to_rows({cm});
    rows.insert(rows.end(), cell_rows.begin(), cell_rows.end());
    try {
      pslab::emit_csv(rows, csv_path);  // checkpoint after every cell
    } catch (const std::exception& e) {
      std::cerr << e.what() << "\n";
      return kExitIo;
    }
  }
  std::cerr << "wrote " << csv_path << "\n";
  return kExitOk;
}

int cmd_verify(const pslab::VerifyOptions& options, const std::string& report_path) {
  std::vector<pslab::VerifyCheck> checks = pslab::default_verify_checks();
  pslab::VerifyReport report;
  try {
    report = pslab::run_verify(checks, options, [](const pslab::CellSpec& cell,
                                                   std::size_t done, std::size_t) {
      std::fprintf(stderr, "verified cell %zu: n=%zu prev=%g sc=%d reps=%zu\n", done,
                   cell.n, cell.exposure_prevalence, cell.overlap_scenario, cell.reps);
    });
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  }
  const std::string text = pslab::format_report(report);
  std::cout << text;
  if (!report_path.empty()) {
    std::ofstream out(report_path, std::ios::trunc);
    if (!out) {
      std::cerr << "cannot write report: " << report_path << "\n";
      return kExitIo;
    }
    out << text;
  }
  return report.all_pass() ? kExitOk : kExitVerifyFailed;
}

// Debug dump of one generated dataset as CSV.
int cmd_dump(const pslab::ScenarioSpec& spec, const std::string& path) {
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!path.empty()) {
    file.open(path, std::ios::trunc);
    if (!file) {
      std::cerr << "cannot open for writing: " << path << "\n";
      return kExitIo;
    }
    out = &file;
  }
  try {
    pslab::SimulatedDataset data = pslab::draw_dataset(spec);
    pslab::generate_outcome(data, spec);
    *out << "e,x1,x2,x3,x4,x5" << (data.has_x6() ? ",x6" : "") << ",y\n";
    char buf[64];
    auto num = [&](double v) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), v);
      return std::string(buf, res.ptr);
    };
    for (std::size_t i = 0; i < data.n(); ++i) {
      *out << data.e[i] << ',' << data.x1[i] << ',' << num(data.x2[i]) << ','
           << num(data.x3[i]) << ',' << num(data.x4[i]) << ',' << num(data.x5[i]);
      if (data.has_x6()) *out << ',' << num(data.x6[i]);
      *out << ',' << data.y[i] << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}

int cmd_plot(const std::string& input, const std::string& out_dir) {
  std::vector<pslab::ResultRow> rows;
  if (!std::filesystem::exists(input)) {
    std::cerr << "cannot open: " << input << "\n";
    return kExitIo;
  }
  try {
    rows = pslab::parse_csv(input);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitValidation;
  }
  if (rows.empty()) {
    std::cerr << input << ": no data rows\n";
    return kExitValidation;
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    std::cerr << "cannot create output directory " << out_dir << ": " << ec.message()
              << "\n";
    return kExitIo;
  }
  try {
    const auto written = pslab::emit_figures(rows, out_dir);
    for (const auto& name : written) std::cerr << "wrote " << out_dir << "/" << name << "\n";
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo comparison of propensity-score methods and "
               "regression standardisation for marginal odds ratios"};
  app.require_subcommand(1);

  // ---- run ----
  auto* run = app.add_subcommand("run", "run a simulation grid and write results CSV");
  std::string config_path;
  pslab::RunConfig config;
  std::vector<std::size_t> n_list;
  std::vector<double> prevalence_list;
  std::vector<int> scenario_list;
  std::vector<std::string> dgp_list;
  run->add_option("--config", config_path, "JSON config file (flags override it)");
  auto* opt_n = run->add_option("--n", n_list, "sample sizes");
  auto* opt_prev = run->add_option("--prevalence", prevalence_list,
                                   "exposure prevalences (0.5, 0.1, 0.05)");
  auto* opt_sc = run->add_option("--scenario", scenario_list, "overlap scenarios (1..5)");
  auto* opt_dgp = run->add_option(
      "--dgp", dgp_list, "outcome mechanisms: logit, cloglog, logit_u, cloglog_u");
  auto* opt_reps = run->add_option("--reps", config.reps, "replicates per cell");
  auto* opt_seed = run->add_option("--seed", config.base_seed, "base seed");
  auto* opt_threads = run->add_option("--threads", config.threads, "worker threads");
  auto* opt_out = run->add_option("--out", config.out_dir, "output directory");
  auto* opt_power = run->add_option("--power-rule", config.power_rule,
                                    "power rule: ci95 or one_sided_05");
  auto* opt_var = run->add_option("--matching-variance", config.matching_variance,
                                  "matching variance regime: model or robust");
  auto* opt_resume = run->add_flag("--resume", config.resume,
                                   "skip cells already present in the output CSV");

  // ---- verify ----
  auto* verify = app.add_subcommand(
      "verify", "rerun the reference cells and compare at pinned tolerances");
  pslab::VerifyOptions vopt;
  std::string report_path;
  verify->add_option("--reference", vopt.reference_path, "reference results CSV");
  verify->add_option("--seed", vopt.base_seed, "base seed");
  verify->add_option("--threads", vopt.threads, "worker threads");
  verify->add_option("--tol-scale", vopt.tol_scale,
                     "scale factor on every tolerance (0 = exact match required)");
  verify->add_option("--report", report_path, "also write the report to this file");

  // ---- plot ----
  auto* plot = app.add_subcommand("plot", "render SVG figure panels from a results CSV");
  std::string plot_input = "out/results.csv";
  std::string plot_out = "out/figures";
  plot->add_option("--input", plot_input, "results CSV produced by run");
  plot->add_option("--out", plot_out, "output directory for SVG files");

  // ---- dump ----
  auto* dump = app.add_subcommand("dump", "write one generated dataset as CSV (debug)");
  pslab::ScenarioSpec dump_spec;
  std::string dump_out;
  std::string dump_dgp = "logit";
  dump->add_option("--n", dump_spec.n, "sample size");
  dump->add_option("--prevalence", dump_spec.exposure_prevalence, "exposure prevalence");
  dump->add_option("--scenario", dump_spec.overlap_scenario, "overlap scenario (1..5)");
  dump->add_option("--dgp", dump_dgp, "logit, cloglog, logit_u, cloglog_u");
  dump->add_option("--seed", dump_spec.base_seed, "base seed");
  dump->add_option("--replicate", dump_spec.replicate_index, "replicate index");
  dump->add_option("--out", dump_out, "output file (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  }

  if (run->parsed()) {
    if (!config_path.empty()) {
      pslab::RunConfig from_file;
      try {
        from_file = pslab::load_config_file(config_path);
      } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitIo;
      }
      // Flags win over file values.
      if (opt_n->count() == 0) n_list = from_file.n_list;
      if (opt_prev->count() == 0) prevalence_list = from_file.prevalence_list;
      if (opt_sc->count() == 0) scenario_list = from_file.scenario_list;
      if (opt_dgp->count() == 0) dgp_list = from_file.dgp_list;
      if (opt_reps->count() == 0) config.reps = from_file.reps;
      if (opt_seed->count() == 0) config.base_seed = from_file.base_seed;
      if (opt_threads->count() == 0) config.threads = from_file.threads;
      if (opt_out->count() == 0) config.out_dir = from_file.out_dir;
      if (opt_power->count() == 0) config.power_rule = from_file.power_rule;
      if (opt_var->count() == 0) config.matching_variance = from_file.matching_variance;
      if (opt_resume->count() == 0) config.resume = from_file.resume;
    }
    if (!n_list.empty()) config.n_list = n_list;
    if (!prevalence_list.empty()) config.prevalence_list = prevalence_list;
    if (!scenario_list.empty()) config.scenario_list = scenario_list;
    if (!dgp_list.empty()) config.dgp_list = dgp_list;
    return cmd_run(config);
  }
  if (verify->parsed()) {
    return cmd_verify(vopt, report_path);
  }
  if (plot->parsed()) {
    return cmd_plot(plot_input, plot_out);
  }
  if (dump->parsed()) {
    try {
      const pslab::DgpVariant v = pslab::parse_dgp_variant(dump_dgp);
      dump_spec.link = v.link;
      dump_spec.unmeasured_confounder = v.unmeasured_confounder;
      if (dump_spec.overlap_scenario < 1 || dump_spec.overlap_scenario > 5) {
        throw std::invalid_argument("overlap scenario must be in 1..5");
      }
    } catch (const std::exception& e) {
      std::cerr << e.what() << "\n";
      return kExitValidation;
    }
    return cmd_dump(dump_spec, dump_out);
  }
  return kExitValidation;
}
