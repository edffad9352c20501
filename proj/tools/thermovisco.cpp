// Command-line front end.

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "thermovisco/analysis.hpp"
#include "thermovisco/config.hpp"
#include "thermovisco/experiments.hpp"
#include "thermovisco/gamma.hpp"
#include "thermovisco/solver.hpp"

using namespace thermovisco;
using Json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitChecksFailed = 1;
constexpr int kExitExpectedBlowup = 2;
constexpr int kExitUnexpectedBlowup = 3;
constexpr int kExitConfig = 4;
constexpr int kExitInternal = 5;

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  bool plot_data = false;
  int verbosity = 0;
};

ParsedConfig load(const Common& c) {
  std::string text;
  if (!c.config_path.empty()) {
    try {
      text = read_text(c.config_path);
    } catch (const std::runtime_error& e) {
      throw ConfigError("--config", 0, e.what());
    }
  }
  return load_config(text, c.overrides);
}

void log(const Common& c, int level, const std::string& message) {
  if (c.verbosity >= level) std::cerr << message << '\n';
}

int check_gamma(const Common& c, double xi_max, int samples) {
  const SimulationConfig cfg = load(c).config;
  Json j;
  j["gamma"] = cfg.gamma.family_name();
  j["D"] = cfg.D;
  j["a"] = cfg.a;
  j["length"] = cfg.grid.length();
  Json reports = Json::array();
  reports.push_back(Json::parse(to_json(check_g1(cfg.gamma, xi_max, samples))));
  reports.push_back(Json::parse(to_json(check_g2(cfg.gamma, cfg.D, xi_max, samples))));
  reports.push_back(Json::parse(to_json(check_growth_integrability(cfg.gamma))));
  reports.push_back(Json::parse(to_json(check_aL(cfg.a, cfg.grid.length(), cfg.gamma, cfg.D))));
  j["reports"] = reports;
  const double gamma0 = cfg.gamma.value(0.0);
  const double lambda1 = poincare_lambda1(cfg.grid.length()).lambda1;
  try {
    const AdmissibleB b = admissible_B(cfg.a, cfg.D, gamma0, lambda1);
    const DecayConstants k = decay_constants(cfg.a, cfg.D, gamma0, lambda1, b.B_chosen);
    j["admissible_B"] = {{"B_lemma4", b.B_lemma4},
                         {"lo", b.lo},
                         {"hi", b.hi},
                         {"B_chosen", b.B_chosen},
                         {"c1", k.c1},
                         {"c2", k.c2},
                         {"c3", k.c3},
                         {"delta", k.delta}};
  } catch (const DomainError& e) {
    j["admissible_B"] = {{"error", e.what()}};
  }
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int simulate_command(const Common& c) {
  const ParsedConfig parsed = load(c);
  const SimulationConfig& cfg = parsed.config;
  log(c, 1, "simulating " + std::to_string(cfg.grid.n_cells()) + " cells to t = " + format_double(cfg.t_end));
  const RunResult run = simulate(cfg);

  std::string snapshot = "# " + std::string(kArtifactVersion) + "\n" + canonical_config(cfg);
  const std::string hash = stable_hash(snapshot);
  RunOptions opts;
  const std::filesystem::path dir =
      c.out_dir.empty() ? runs_root(opts) / "simulate" / hash : std::filesystem::path(c.out_dir);
  std::filesystem::create_directories(dir);
  emit_series(run.series, dir / "series.csv");
  write_text(dir / "profile.csv", format_profile_trace(run.profile));
  write_text(dir / "config.snapshot", snapshot);
  if (c.plot_data) {
    write_text(dir / "series.dat", format_plot_data(run.series));
    write_text(dir / "final_profile.dat", format_profile_plot(run.final_state, cfg));
  }
  const bool blown = run.outcome.status == StepStatus::BlownUp;
  bool expect_blowup = false;
  if (parsed.preset) expect_blowup = preset(*parsed.preset).expected == ExpectedOutcome::BlowUpDetected;

  Json j;
  j["config_hash"] = hash;
  j["status"] = to_string(run.outcome.status);
  j["reason"] = to_string(run.outcome.reason);
  j["t_final"] = run.final_state.t;
  j["accepted_steps"] = run.accepted_steps;
  j["monitor_initial"] = run.monitor_initial;
  j["monitor_max"] = std::isfinite(run.monitor_max) ? run.monitor_max : -1.0;
  j["B"] = run.B;
  write_text(dir / "reports.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << '\n' << "artifacts: " << dir.string() << '\n';
  if (!blown) return kExitOk;
  return expect_blowup ? kExitExpectedBlowup : kExitUnexpectedBlowup;
}

int run_preset_command(const Common& c, const std::string& name, bool list) {
  if (list) {
    for (const auto& n : preset_names()) std::cout << n << "  " << preset(n).description << '\n';
    return kExitOk;
  }
  ExperimentPreset p;
  try {
    p = preset(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("preset", 0, e.what());
  }
  if (!c.overrides.empty()) p.config = parse_config("", c.overrides, p.config).config;
  RunOptions opts;
  if (!c.out_dir.empty()) opts.runs_dir = c.out_dir;
  opts.plot_data = c.plot_data;
  log(c, 1, "running preset " + name);
  const PresetReport r = run_preset(p, opts);
  for (const auto& check : r.checks) {
    std::cout << (check.pass ? "PASS " : "FAIL ") << check.name << '\n';
    log(c, 1, "  " + check.json);
  }
  std::cout << "outcome: " << to_string(r.run.outcome.status) << " (" << to_string(r.run.outcome.reason)
            << ") at t = " << format_double(r.run.final_state.t) << '\n';
  if (r.artifact_dir) std::cout << "artifacts: " << r.artifact_dir->string() << '\n';
  return r.exit_code();
}

int sweep_command(const Common& c, const std::string& base, const std::vector<std::string>& axes,
                  int jobs, std::size_t max_points) {
  SweepSpec spec;
  spec.base_preset = base;
  spec.parallelism = jobs;
  spec.max_points = max_points;
  spec.output = c.out_dir.empty() ? runs_root({}) / "sweeps" / (base + ".csv") : std::filesystem::path(c.out_dir);
  for (const auto& a : axes) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) throw ConfigError(a, 0, "axis must look like key=v1,v2,...");
    SweepAxis axis;
    axis.key = a.substr(0, eq);
    std::string rest = a.substr(eq + 1);
    std::size_t pos = 0;
    while (true) {
      const auto comma = rest.find(',', pos);
      axis.values.push_back(rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    spec.axes.push_back(axis);
  }
  // Reject bad keys and values before any row runs.
  {
    const SimulationConfig base_cfg = preset(base).config;
    for (const auto& point : sweep_points(spec)) {
      std::vector<std::string> ov;
      for (std::size_t k = 0; k < spec.axes.size(); ++k) ov.push_back(spec.axes[k].key + "=" + point[k]);
      (void)parse_config("", ov, base_cfg);
    }
  }
  const SweepResult r = run_sweep(spec);
  std::cout << "points " << r.total << ", skipped " << r.skipped << ", written " << r.written
            << ", failed " << r.failed << '\n'
            << "table: " << spec.output.string() << '\n';
  return r.failed == 0 ? kExitOk : kExitChecksFailed;
}

int fit_decay_command(const std::string& series_path, const std::string& column, double floor) {
  DiagnosticsSeries series;
  try {
    series = read_series(series_path);
  } catch (const std::exception& e) {
    throw ConfigError("--series", 0, e.what());
  }
  try {
    (void)column_index(column);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("--column", 0, e.what());
  }
  try {
    const DecayFit fit = fit_decay(series, column, floor);
    const bool pass = fit.beta > 0.0 && fit.residual <= kFitResidualMax;
    std::cout << Json::parse(to_json(fit, pass)).dump(2) << '\n';
    return pass ? kExitOk : kExitChecksFailed;
  } catch (const AnalysisError& e) {
    std::cerr << "fit-decay: " << e.what() << '\n';
    return kExitChecksFailed;
  }
}

int convergence_command(const Common& c, const std::string& name, int levels) {
  ExperimentPreset p;
  try {
    p = preset(name);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("preset", 0, e.what());
  }
  if (!c.overrides.empty()) p.config = parse_config("", c.overrides, p.config).config;
  const ConvergenceReport r = convergence_study(p, levels);
  std::cout << Json::parse(to_json(r)).dump(2) << '\n';
  const bool pass = r.monotone && (r.exact || (r.min_order() >= kOrderLo && r.max_order() <= kOrderHi));
  return pass ? kExitOk : kExitChecksFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator and condition checker for a 1D thermoviscoelastic system"};
  app.require_subcommand(1);
  Common common;
  app.add_flag("-v,--verbose", common.verbosity, "More log output (repeatable)");

  auto add_config = [&common](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_path, "Config file (key = value)");
    sub->add_option("--set", common.overrides, "Override: key=value (repeatable)");
  };

  double xi_max = kDefaultXiMax;
  int samples = kDefaultSamples;
  auto* gamma_cmd = app.add_subcommand("check-gamma", "Check the structural conditions on gamma");
  add_config(gamma_cmd);
  gamma_cmd->add_option("--xi-max", xi_max, "Upper end of the sampled domain")->check(CLI::PositiveNumber);
  gamma_cmd->add_option("--samples", samples, "Sample count")->check(CLI::Range(2, 100000000));

  auto* sim_cmd = app.add_subcommand("simulate", "Run one simulation from a config");
  add_config(sim_cmd);
  sim_cmd->add_option("-o,--out", common.out_dir, "Artifact directory");
  sim_cmd->add_flag("--plot-data", common.plot_data, "Also write gnuplot data files");

  std::string preset_name;
  bool list = false;
  auto* preset_cmd = app.add_subcommand("run-preset", "Run a named preset and its checks");
  preset_cmd->add_option("name", preset_name, "Preset name");
  preset_cmd->add_flag("--list", list, "List presets");
  preset_cmd->add_option("--set", common.overrides, "Override: key=value (repeatable)");
  preset_cmd->add_option("--runs-dir", common.out_dir, "Artifacts root");
  preset_cmd->add_flag("--plot-data", common.plot_data, "Also write gnuplot data files");

  std::string sweep_base;
  std::vector<std::string> axes;
  int jobs = 1;
  std::size_t max_points = 10000;
  auto* sweep_cmd = app.add_subcommand("sweep", "Parameter sweep over a preset");
  sweep_cmd->add_option("--preset", sweep_base, "Base preset")->required();
  sweep_cmd->add_option("--axis", axes, "key=v1,v2,... (repeatable)")->required();
  sweep_cmd->add_option("-o,--out", common.out_dir, "Output CSV");
  sweep_cmd->add_option("-j,--jobs", jobs, "Worker threads")->check(CLI::Range(1, 1024));
  sweep_cmd->add_option("--max-points", max_points, "Cap on the cross-product size");

  std::string series_path;
  std::string column = "ux_linf";
  double floor = kDefaultDecayFloor;
  auto* fit_cmd = app.add_subcommand("fit-decay", "Fit an exponential rate to a series column");
  fit_cmd->add_option("--series", series_path, "series.csv")->required();
  fit_cmd->add_option("--column", column, "Column name");
  fit_cmd->add_option("--floor", floor, "Ignore samples at or below this value")->check(CLI::PositiveNumber);

  std::string conv_preset = "mms";
  int levels = 3;
  auto* conv_cmd = app.add_subcommand("convergence", "Grid-convergence study");
  conv_cmd->add_option("--preset", conv_preset, "Preset with a manufactured target");
  conv_cmd->add_option("--levels", levels, "Number of grids")->check(CLI::Range(3, 12));
  conv_cmd->add_option("--set", common.overrides, "Override: key=value (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*gamma_cmd) return check_gamma(common, xi_max, samples);
    if (*sim_cmd) return simulate_command(common);
    if (*preset_cmd) {
      if (!list && preset_name.empty()) throw ConfigError("name", 0, "preset name required (see --list)");
      return run_preset_command(common, preset_name, list);
    }
    if (*sweep_cmd) return sweep_command(common, sweep_base, axes, jobs, max_points);
    if (*fit_cmd) return fit_decay_command(series_path, column, floor);
    if (*conv_cmd) return convergence_command(common, conv_preset, levels);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
