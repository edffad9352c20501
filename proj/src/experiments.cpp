#include "thermovisco/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <json.hpp>

namespace thermovisco {
namespace {

using Json = nlohmann::ordered_json;

double safe(double x) { return std::isfinite(x) ? x : std::numeric_limits<double>::max(); }

FieldProfile flat(double mean) {
  FieldProfile p;
  p.kind = FieldProfile::Kind::Flat;
  p.mean = mean;
  return p;
}

FieldProfile cosine(double mean, double amplitude) {
  FieldProfile p;
  p.kind = FieldProfile::Kind::CosineBump;
  p.mean = mean;
  p.amplitude = amplitude;
  return p;
}

FieldProfile packet(double amplitude) {
  FieldProfile p;
  p.kind = FieldProfile::Kind::Packet;
  p.amplitude = amplitude;
  return p;
}

ExperimentPreset theorem9_global() {
  ExperimentPreset p;
  p.name = "theorem9_global";
  p.description = "saturating gamma, positive and monotone with bounded growth: global bounded run with conserved masses";
  auto& c = p.config;
  c.grid = Grid(1.0, 512);
  c.a = 1.0;
  c.D = 1.0;
  c.gamma = GammaModel::saturating_exp(1.0, 0.5, 1.0);
  c.u0 = cosine(0.0, 2.0);
  c.ut0 = cosine(0.25, 1.0);
  c.theta0 = flat(0.2);
  c.t_end = 40.0;
  c.diag_interval = 0.01;
  p.checks = {"finished",     "monitors_bounded",  "conservation", "heat_balance",
              "heat_monotone", "theta_nonnegative", "comparison"};
  p.expected = ExpectedOutcome::GlobalBounded;
  return p;
}

ExperimentPreset theorem33_decay() {
  ExperimentPreset p = theorem9_global();
  p.name = "theorem33_decay";
  p.description = "a at half the stabilization threshold: exponential decay to a flat temperature";
  auto& c = p.config;
  c.a = 0.5 * al_threshold(c.gamma.value(0.0), c.D) / (c.grid.length() * c.grid.length());
  c.u0 = cosine(0.0, 2.0);
  c.ut0 = cosine(0.0, 1.0);
  c.theta0 = cosine(0.2, 0.1);
  p.checks = {"finished",
              "conservation",
              "heat_balance",
              "heat_monotone",
              "theta_nonnegative",
              "energy_decay",
              "fit_decay:ux_linf",
              "fit_decay:vx_l2",
              "fit_decay:theta_osc",
              "flat_final",
              "theta_inf_prediction",
              "comparison"};
  p.expected = ExpectedOutcome::GlobalDecay;
  return p;
}

ExperimentPreset blowup_demo() {
  ExperimentPreset p;
  p.name = "blowup_demo";
  p.description = "power-law gamma with integrable 1/gamma and a steep displacement packet";
  auto& c = p.config;
  c.grid = Grid(1.0, 1024);
  c.a = 1.0;
  c.D = 0.1;
  c.gamma = GammaModel::power(1.0, 2.0);
  c.u0 = packet(2.0);
  c.ut0 = flat(0.0);
  c.theta0 = flat(0.1);
  c.t_end = 2.0;
  c.diag_interval = 1e-3;
  p.checks = {"blowup_detected", "monitor_growth"};
  p.expected = ExpectedOutcome::BlowUpDetected;
  return p;
}

ExperimentPreset blowup_control() {
  ExperimentPreset p = blowup_demo();
  p.name = "blowup_control";
  p.description = "blow-up data with a saturating gamma of equal gamma(0) that passes the growth-ratio check";
  p.config.gamma = GammaModel::saturating_exp(2.0, 1.0, 1.0);
  p.config.D = 1.1;
  p.checks = {"finished", "monitors_bounded", "conservation", "heat_balance", "heat_monotone"};
  p.expected = ExpectedOutcome::GlobalBounded;
  return p;
}

ExperimentPreset mms() {
  ExperimentPreset p;
  p.name = "mms";
  p.description = "manufactured cosine solution, spatial convergence order";
  auto& c = p.config;
  c.grid = Grid(1.0, 128);
  c.a = 0.5;
  c.D = 1.0;
  c.gamma = GammaModel::saturating_exp(1.0, 0.5, 1.0);
  c.scheme = Scheme::RK4;
  c.u0 = cosine(0.0, 1.0);
  c.ut0 = cosine(0.0, -1.0);
  c.theta0 = cosine(1.0, 0.1);
  c.t_end = 0.02;
  c.diag_interval = 0.02;
  p.manufactured = ManufacturedSpec{};
  p.levels = 3;
  p.checks = {"convergence_order"};
  p.expected = ExpectedOutcome::ConvergenceOrder;
  return p;
}

bool profiles_flat(const SimulationConfig& c) {
  return c.u0.kind == FieldProfile::Kind::Flat && c.ut0.kind == FieldProfile::Kind::Flat &&
         c.theta0.kind == FieldProfile::Kind::Flat;
}

ManufacturedTarget study_target(const ExperimentPreset& p) {
  if (p.manufactured) return p.manufactured->target(p.config.grid.length());
  if (!profiles_flat(p.config)) {
    throw std::invalid_argument("convergence study needs a manufactured target or flat data");
  }
  return flat_target(p.config.u0.mean, p.config.ut0.mean, p.config.theta0.mean);
}

CheckResult make_result(const std::string& name, bool pass, Json metrics, double lo, double hi) {
  Json j;
  j["check"] = name;
  j["pass"] = pass;
  j["metrics"] = std::move(metrics);
  j["window"] = {lo, hi};
  return {name, pass, j.dump()};
}

CheckResult from_json_text(const std::string& name, bool pass, const std::string& text) {
  Json j = Json::parse(text);
  j["check"] = name;
  j["pass"] = pass;
  return {name, pass, j.dump()};
}

double initial_theta_max(const SimulationConfig& c) {
  const auto th = c.theta0.sample(c.grid);
  return *std::max_element(th.begin(), th.end());
}

CheckResult fit_check(const std::string& name, std::span<const double> t,
                      std::span<const double> values, const std::string& quantity) {
  try {
    const DecayFit fit = fit_decay(t, values, kDefaultDecayFloor, quantity);
    const bool pass = fit.beta > 0.0 && fit.residual <= kFitResidualMax;
    return from_json_text(name, pass, to_json(fit, pass));
  } catch (const AnalysisError& e) {
    return make_result(name, false, Json{{"error", e.what()}}, t.empty() ? 0.0 : t.front(),
                       t.empty() ? 0.0 : t.back());
  }
}

CheckResult evaluate_check(const std::string& name, const ExperimentPreset& p,
                           const RunResult& run) {
  const auto& c = p.config;
  const auto& rows = run.series.rows;
  const double t_lo = rows.empty() ? 0.0 : rows.front().t;
  const double t_hi = rows.empty() ? 0.0 : rows.back().t;
  const bool finished = run.outcome.status == StepStatus::Finished;

  if (name == "finished") {
    return make_result(name, finished,
                       Json{{"status", to_string(run.outcome.status)},
                            {"reason", to_string(run.outcome.reason)},
                            {"t_final", run.final_state.t}},
                       t_lo, t_hi);
  }
  if (name == "monitors_bounded") {
    const double cap = std::min(c.blowup.theta_cap, c.blowup.w12_cap);
    const bool pass = finished && run.monitor_max <= cap;
    return make_result(name, pass,
                       Json{{"monitor_initial", run.monitor_initial},
                            {"monitor_max", safe(run.monitor_max)},
                            {"cap", cap}},
                       t_lo, t_hi);
  }
  if (name == "conservation") {
    const double mut0 = rows.front().mass_ut;
    const double mu0 = rows.front().mass_u;
    double ut_err = 0.0, u_err = 0.0;
    for (const auto& r : rows) {
      ut_err = std::max(ut_err, std::abs(r.mass_ut - mut0));
      u_err = std::max(u_err, std::abs(r.mass_u - mu0 - (r.t - t_lo) * mut0));
    }
    const double ut_tol = kMassUtRelTol * std::max(1.0, std::abs(mut0));
    const bool pass = ut_err <= ut_tol && u_err <= kMassUAbsTol;
    return make_result(name, pass,
                       Json{{"mass_ut_initial", mut0},
                            {"max_mass_ut_error", ut_err},
                            {"mass_ut_tolerance", ut_tol},
                            {"max_mass_u_error", u_err},
                            {"mass_u_tolerance", kMassUAbsTol}},
                       t_lo, t_hi);
  }
  if (name == "heat_balance") {
    const double th0 = rows.front().mass_theta;
    double err = 0.0;
    for (const auto& r : rows) err = std::max(err, std::abs((r.mass_theta - th0) - r.heat_in));
    const double total = rows.back().heat_in;
    const double tol = kHeatBalanceRelTol * std::abs(total) + 1e-14;
    return make_result(name, err <= tol,
                       Json{{"heat_in_total", total},
                            {"theta_mass_gain", rows.back().mass_theta - th0},
                            {"max_abs_mismatch", err},
                            {"relative_mismatch", total != 0.0 ? err / std::abs(total) : 0.0},
                            {"tolerance", kHeatBalanceRelTol}},
                       t_lo, t_hi);
  }
  if (name == "heat_monotone") {
    const bool pass = run.max_theta_mass_drop <= kHeatMonotoneTol;
    return make_result(name, pass,
                       Json{{"max_step_drop", run.max_theta_mass_drop},
                            {"tolerance", kHeatMonotoneTol}},
                       t_lo, t_hi);
  }
  if (name == "theta_nonnegative") {
    return make_result(name, run.min_theta_seen >= -1e-12,
                       Json{{"min_theta_before_clip", run.min_theta_seen}}, t_lo, t_hi);
  }
  if (name == "comparison") {
    const auto t = run.series.column("t");
    const auto h = comparison_rate(run.series, c.a);
    const auto curve = supersolution(t, h, initial_theta_max(c), c.gamma);
    const auto report = check_comparison(run.series, curve);
    return from_json_text(name, report.holds, to_json(report, curve));
  }
  if (name == "energy_decay") {
    const DecayParameters params{c.a, c.D, c.gamma.value(0.0), c.grid.length()};
    try {
      const auto report = check_energy_decay(run.series, run.B, params);
      return from_json_text(name, report.pass(), to_json(report));
    } catch (const DomainError& e) {
      return make_result(name, false, Json{{"error", e.what()}}, t_lo, t_hi);
    }
  }
  if (name.rfind("fit_decay:", 0) == 0) {
    const std::string column = name.substr(10);
    if (column == "theta_osc") {
      std::vector<double> t, osc;
      for (const auto& s : run.profile) {
        t.push_back(s.t);
        osc.push_back(s.oscillation());
      }
      return fit_check(name, t, osc, column);
    }
    const auto t = run.series.column("t");
    const auto v = run.series.column(column);
    return fit_check(name, t, v, column);
  }
  if (name == "flat_final") {
    const auto& last = run.profile.back();
    const double tol = kFlatnessRelTol * (1.0 + last.theta_mean);
    return make_result(name, last.oscillation() <= tol,
                       Json{{"theta_inf", last.theta_mean},
                            {"final_oscillation", last.oscillation()},
                            {"tolerance", tol}},
                       last.t, last.t);
  }
  if (name == "theta_inf_prediction") {
    const double theta_inf = run.profile.back().theta_mean;
    const double predicted = rows.front().mass_theta + rows.back().heat_in;
    const double measured = theta_inf * c.grid.length();
    const double rel = std::abs(measured - predicted) / std::abs(predicted);
    return make_result(name, rel <= kThetaInfRelTol,
                       Json{{"theta_inf", theta_inf},
                            {"measured_mass", measured},
                            {"predicted_mass", predicted},
                            {"relative_error", rel},
                            {"tolerance", kThetaInfRelTol}},
                       t_lo, t_hi);
  }
  if (name == "blowup_detected") {
    const bool pass = run.outcome.status == StepStatus::BlownUp && run.final_state.t < c.t_end;
    return make_result(name, pass,
                       Json{{"status", to_string(run.outcome.status)},
                            {"reason", to_string(run.outcome.reason)},
                            {"t_detect", run.final_state.t},
                            {"t_end", c.t_end}},
                       t_lo, t_hi);
  }
  if (name == "monitor_growth") {
    const double growth = run.monitor_max / run.monitor_initial;
    return make_result(name, growth >= kMonitorGrowth,
                       Json{{"monitor_initial", run.monitor_initial},
                            {"monitor_max", safe(run.monitor_max)},
                            {"growth", safe(growth)},
                            {"required", kMonitorGrowth}},
                       t_lo, t_hi);
  }
  throw std::invalid_argument("unknown check '" + name + "'");
}

std::string sanitize(std::string s) {
  for (auto& ch : s) {
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  }
  return s;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.push_back(line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string join_key(const std::vector<std::string>& params) {
  std::string k;
  for (const auto& p : params) k += p + '\x1f';
  return k;
}

}  // namespace

std::string to_string(ExpectedOutcome e) {
  switch (e) {
    case ExpectedOutcome::GlobalDecay:
      return "GlobalDecay";
    case ExpectedOutcome::GlobalBounded:
      return "GlobalBounded";
    case ExpectedOutcome::BlowUpDetected:
      return "BlowUpDetected";
    case ExpectedOutcome::ConvergenceOrder:
      return "ConvergenceOrder";
  }
  return "?";
}

ManufacturedTarget ManufacturedSpec::target(double length) const {
  return cosine_decay_target(amp_u, theta_base, amp_theta, rate, length);
}

std::vector<std::string> preset_names() {
  return {"theorem9_global", "theorem33_decay", "blowup_demo", "blowup_control", "mms"};
}

ExperimentPreset preset(const std::string& name) {
  if (name == "theorem9_global") return theorem9_global();
  if (name == "theorem33_decay") return theorem33_decay();
  if (name == "blowup_demo") return blowup_demo();
  if (name == "blowup_control") return blowup_control();
  if (name == "mms") return mms();
  throw std::invalid_argument("unknown preset '" + name + "'");
}

const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> names = {
      "finished",          "monitors_bounded",  "conservation",        "heat_balance",
      "heat_monotone",     "theta_nonnegative", "comparison",          "energy_decay",
      "fit_decay:ux_linf", "fit_decay:ux_l2",   "fit_decay:vx_linf",   "fit_decay:vx_l2",
      "fit_decay:y_B",     "fit_decay:theta_osc", "flat_final",        "theta_inf_prediction",
      "blowup_detected",   "monitor_growth",    "convergence_order"};
  return names;
}

std::vector<ConditionReport> preflight(const ExperimentPreset& p) {
  for (const auto& c : p.checks) {
    const auto& k = known_checks();
    if (std::find(k.begin(), k.end(), c) == k.end()) {
      throw std::invalid_argument("preset " + p.name + " names unknown check '" + c + "'");
    }
  }
  const auto& c = p.config;
  std::vector<ConditionReport> reports;
  auto require_pass = [&](const ConditionReport& r) {
    reports.push_back(r);
    if (r.verdict != Verdict::Pass) {
      throw std::invalid_argument("preset " + p.name + " expects " + to_string(p.expected) +
                                  " but condition " + std::string(to_string(r.condition)) +
                                  " reports " + std::string(to_string(r.verdict)));
    }
  };
  switch (p.expected) {
    case ExpectedOutcome::GlobalDecay:
      require_pass(check_g1(c.gamma));
      require_pass(check_g2(c.gamma, c.D));
      require_pass(check_aL(c.a, c.grid.length(), c.gamma, c.D));
      break;
    case ExpectedOutcome::GlobalBounded:
      require_pass(check_g1(c.gamma));
      require_pass(check_g2(c.gamma, c.D));
      break;
    case ExpectedOutcome::BlowUpDetected:
      require_pass(check_g1(c.gamma));
      require_pass(check_growth_integrability(c.gamma));
      break;
    case ExpectedOutcome::ConvergenceOrder:
      reports.push_back(check_g1(c.gamma));
      break;
  }
  return reports;
}

ParsedConfig load_config(std::string_view text, const std::vector<std::string>& overrides) {
  ParsedConfig first = parse_config(text, overrides);
  if (!first.preset) return first;
  ExperimentPreset base;
  try {
    base = preset(*first.preset);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("preset", 0, e.what());
  }
  return parse_config(text, overrides, base.config);
}

std::vector<CheckResult> evaluate_checks(const ExperimentPreset& p, const RunResult& run) {
  std::vector<CheckResult> out;
  for (const auto& name : p.checks) {
    if (name == "convergence_order") continue;
    out.push_back(evaluate_check(name, p, run));
  }
  return out;
}

double ConvergenceReport::min_order() const {
  double m = INFINITY;
  for (const auto& o : orders) {
    for (const double x : o) m = std::min(m, x);
  }
  return m;
}

double ConvergenceReport::max_order() const {
  double m = -INFINITY;
  for (const auto& o : orders) {
    for (const double x : o) m = std::max(m, x);
  }
  return m;
}

ConvergenceReport convergence_study(const ExperimentPreset& p, int levels, RunResult* finest) {
  if (levels < 3) throw std::invalid_argument("convergence study needs at least 3 levels");
  const ManufacturedTarget target = study_target(p);
  ConvergenceReport report;
  double worst = 0.0;
  for (int k = 0; k < levels; ++k) {
    SimulationConfig c = p.config;
    c.grid = Grid(p.config.grid.length(), p.config.grid.n_cells() << k);
    const ManufacturedForcing forcing(target, c);
    const RunResult run = simulate(c, &forcing);
    if (run.outcome.status != StepStatus::Finished) {
      throw SolverError("convergence level n = " + std::to_string(c.grid.n_cells()) +
                        " did not finish: " + to_string(run.outcome.reason));
    }
    const State exact = forcing.exact_state(run.final_state.t);
    ConvergenceLevel lvl;
    lvl.n_cells = c.grid.n_cells();
    lvl.steps = run.accepted_steps;
    const std::vector<double>* num[3] = {&run.final_state.u, &run.final_state.v,
                                         &run.final_state.theta};
    const std::vector<double>* ref[3] = {&exact.u, &exact.v, &exact.theta};
    for (int q = 0; q < 3; ++q) {
      std::vector<double> diff(num[q]->size());
      for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = (*num[q])[i] - (*ref[q])[i];
      lvl.err_l2[q] = l2_norm(diff, c.grid.dx());
      lvl.err_linf[q] = linf_norm(diff);
      worst = std::max(worst, lvl.err_linf[q]);
    }
    report.levels.push_back(lvl);
    if (finest != nullptr && k + 1 == levels) *finest = run;
  }
  report.exact = worst <= 1e-11;
  for (std::size_t k = 0; k + 1 < report.levels.size(); ++k) {
    const auto& a = report.levels[k];
    const auto& b = report.levels[k + 1];
    std::array<double, 6> o{};
    for (int q = 0; q < 3; ++q) {
      o[q] = std::log2(a.err_l2[q] / b.err_l2[q]);
      o[q + 3] = std::log2(a.err_linf[q] / b.err_linf[q]);
      if (!(b.err_l2[q] < a.err_l2[q]) || !(b.err_linf[q] < a.err_linf[q])) report.monotone = false;
    }
    report.orders.push_back(o);
  }
  if (report.exact) report.monotone = true;
  return report;
}

std::string to_json(const ConvergenceReport& r) {
  Json j;
  j["exact"] = r.exact;
  j["monotone"] = r.monotone;
  Json levels = Json::array();
  for (const auto& l : r.levels) {
    levels.push_back({{"n_cells", l.n_cells},
                      {"steps", l.steps},
                      {"u_l2", l.err_l2[0]},
                      {"v_l2", l.err_l2[1]},
                      {"theta_l2", l.err_l2[2]},
                      {"u_linf", l.err_linf[0]},
                      {"v_linf", l.err_linf[1]},
                      {"theta_linf", l.err_linf[2]}});
  }
  j["levels"] = levels;
  Json orders = Json::array();
  for (const auto& o : r.orders) {
    Json row;
    for (int q = 0; q < 6; ++q) {
      if (std::isfinite(o[q])) {
        row[kOrderNames[q]] = o[q];
      } else {
        row[kOrderNames[q]] = nullptr;
      }
    }
    orders.push_back(row);
  }
  j["orders"] = orders;
  return j.dump();
}

int PresetReport::exit_code() const {
  if (blowup_detected) {
    if (expected != ExpectedOutcome::BlowUpDetected) return 3;
    return pass ? 2 : 1;
  }
  return pass ? 0 : 1;
}

std::filesystem::path runs_root(const RunOptions& options) {
  if (options.runs_dir) return *options.runs_dir;
  if (const char* env = std::getenv("THERMOVISCO_RUNS_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return "runs";
}

std::string reports_json(const PresetReport& r) {
  Json j;
  j["preset"] = r.name;
  j["version"] = kArtifactVersion;
  j["config_hash"] = r.hash;
  j["expected"] = to_string(r.expected);
  j["outcome"] = {{"status", to_string(r.run.outcome.status)},
                  {"reason", to_string(r.run.outcome.reason)},
                  {"t_final", r.run.final_state.t},
                  {"accepted_steps", r.run.accepted_steps},
                  {"monitor_initial", r.run.monitor_initial},
                  {"monitor_max", safe(r.run.monitor_max)},
                  {"B", r.run.B}};
  Json conditions = Json::array();
  for (const auto& c : r.conditions) conditions.push_back(Json::parse(to_json(c)));
  j["conditions"] = conditions;
  Json checks = Json::array();
  for (const auto& c : r.checks) checks.push_back(Json::parse(c.json));
  j["checks"] = checks;
  if (r.convergence) j["convergence"] = Json::parse(to_json(*r.convergence));
  j["pass"] = r.pass;
  j["exit_code"] = r.exit_code();
  return j.dump(2) + "\n";
}

PresetReport run_preset(const ExperimentPreset& p, const RunOptions& options) {
  PresetReport r;
  r.name = p.name;
  r.expected = p.expected;
  r.conditions = preflight(p);

  const bool convergence = std::find(p.checks.begin(), p.checks.end(), "convergence_order") != p.checks.end();
  if (convergence) {
    r.convergence = convergence_study(p, p.levels, &r.run);
    const auto& cv = *r.convergence;
    const bool in_range = cv.exact || (cv.min_order() >= kOrderLo && cv.max_order() <= kOrderHi);
    const bool pass = cv.monotone && in_range;
    Json metrics = Json::parse(to_json(cv));
    metrics["required"] = {kOrderLo, kOrderHi};
    Json j;
    j["check"] = "convergence_order";
    j["pass"] = pass;
    j["metrics"] = metrics;
    j["window"] = {0.0, p.config.t_end};
    r.checks = evaluate_checks(p, r.run);
    r.checks.push_back({"convergence_order", pass, j.dump()});
  } else {
    r.run = simulate(p.config);
    r.checks = evaluate_checks(p, r.run);
  }
  r.blowup_detected = r.run.outcome.status == StepStatus::BlownUp;
  const bool outcome_ok = (p.expected == ExpectedOutcome::BlowUpDetected) == r.blowup_detected;
  r.pass = outcome_ok && std::all_of(r.checks.begin(), r.checks.end(),
                                     [](const CheckResult& c) { return c.pass; });

  const std::string snapshot = "# " + std::string(kArtifactVersion) + "\npreset = " + p.name +
                               "\n" + canonical_config(p.config);
  r.hash = stable_hash(snapshot);
  if (options.write_artifacts) {
    const auto dir = runs_root(options) / p.name / r.hash;
    std::filesystem::create_directories(dir);
    emit_series(r.run.series, dir / "series.csv");
    write_text(dir / "profile.csv", format_profile_trace(r.run.profile));
    write_text(dir / "config.snapshot", snapshot);
    write_text(dir / "reports.json", reports_json(r));
    if (options.plot_data) {
      write_text(dir / "series.dat", format_plot_data(r.run.series));
      write_text(dir / "final_profile.dat", format_profile_plot(r.run.final_state, p.config));
    }
    r.artifact_dir = dir;
  }
  return r;
}

PresetReport run_preset(const std::string& name, const RunOptions& options) {
  return run_preset(preset(name), options);
}

std::vector<std::vector<std::string>> sweep_points(const SweepSpec& spec) {
  if (spec.axes.empty()) throw std::invalid_argument("sweep needs at least one axis");
  std::size_t total = 1;
  for (const auto& axis : spec.axes) {
    if (axis.values.empty()) throw std::invalid_argument("sweep axis '" + axis.key + "' has no values");
    total *= axis.values.size();
    if (total > spec.max_points) {
      throw std::invalid_argument("sweep has more than " + std::to_string(spec.max_points) + " points");
    }
  }
  std::vector<std::vector<std::string>> points;
  points.reserve(total);
  std::vector<std::size_t> idx(spec.axes.size(), 0);
  for (std::size_t n = 0; n < total; ++n) {
    std::vector<std::string> pt;
    for (std::size_t a = 0; a < spec.axes.size(); ++a) pt.push_back(spec.axes[a].values[idx[a]]);
    points.push_back(std::move(pt));
    for (std::size_t a = spec.axes.size(); a-- > 0;) {
      if (++idx[a] < spec.axes[a].values.size()) break;
      idx[a] = 0;
    }
  }
  return points;
}

std::string sweep_header(const SweepSpec& spec) {
  std::string h;
  for (const auto& axis : spec.axes) h += axis.key + ",";
  return h + "outcome,beta,max_theta_linf,t_final,error";
}

std::string format_sweep_row(const SweepRow& row) {
  std::string s;
  for (const auto& p : row.params) s += p + ",";
  s += row.outcome + ",";
  s += row.beta ? format_double(*row.beta) : "";
  s += "," + format_double(row.max_theta_linf) + "," + format_double(row.t_final) + ",";
  s += sanitize(row.error);
  return s;
}

SweepRow run_sweep_point(const SweepSpec& spec, const std::vector<std::string>& point) {
  SweepRow row;
  row.params = point;
  try {
    const ExperimentPreset base = preset(spec.base_preset);
    std::vector<std::string> overrides;
    for (std::size_t a = 0; a < spec.axes.size(); ++a) {
      overrides.push_back(spec.axes[a].key + "=" + point[a]);
    }
    const SimulationConfig config = parse_config("", overrides, base.config).config;
    const RunResult run = simulate(config);
    for (const auto& r : run.series.rows) row.max_theta_linf = std::max(row.max_theta_linf, r.theta_linf);
    row.t_final = run.final_state.t;
    if (run.outcome.status == StepStatus::BlownUp) {
      row.outcome = "BlowUpDetected";
    } else {
      row.outcome = "GlobalBounded";
      try {
        const DecayFit fit = fit_decay(run.series, "ux_linf");
        row.beta = fit.beta;
        if (fit.beta > 0.0 && fit.residual <= kFitResidualMax) row.outcome = "GlobalDecay";
      } catch (const AnalysisError&) {
      }
    }
  } catch (const std::exception& e) {
    row.outcome = "error";
    row.error = e.what();
  }
  return row;
}

SweepResult run_sweep(const SweepSpec& spec) {
  const auto points = sweep_points(spec);
  const std::string header = sweep_header(spec);
  SweepResult result;
  result.total = points.size();

  std::set<std::string> done;
  const bool exists = std::filesystem::exists(spec.output);
  if (exists) {
    std::ifstream in(spec.output);
    std::string line;
    if (!std::getline(in, line) || line != header) {
      throw std::invalid_argument("existing sweep file '" + spec.output.string() +
                                  "' has a different header");
    }
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto fields = split_csv(line);
      fields.resize(spec.axes.size());
      done.insert(join_key(fields));
    }
  }

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!done.count(join_key(points[i]))) todo.push_back(i);
  }
  result.skipped = points.size() - todo.size();
  if (spec.output.has_parent_path()) std::filesystem::create_directories(spec.output.parent_path());
  std::ofstream out(spec.output, std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot open '" + spec.output.string() + "'");
  if (!exists) out << header << '\n' << std::flush;
  if (todo.empty()) return result;

  std::vector<std::optional<SweepRow>> rows(todo.size());
  std::mutex mutex;
  std::condition_variable ready;
  std::atomic<std::size_t> next{0};
  const int workers = std::max(1, std::min<int>(spec.parallelism, static_cast<int>(todo.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < todo.size(); k = next++) {
        SweepRow row = run_sweep_point(spec, points[todo[k]]);
        {
          std::lock_guard lock(mutex);
          rows[k] = std::move(row);
        }
        ready.notify_all();
      }
    });
  }
  for (std::size_t k = 0; k < todo.size(); ++k) {
    SweepRow row;
    {
      std::unique_lock lock(mutex);
      ready.wait(lock, [&] { return rows[k].has_value(); });
      row = *rows[k];
    }
    out << format_sweep_row(row) << '\n' << std::flush;
    ++result.written;
    if (row.outcome == "error") ++result.failed;
  }
  for (auto& t : pool) t.join();
  return result;
}

}  // namespace thermovisco
