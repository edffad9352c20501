#pragma once

// Named experiment presets, their checks and artifacts, parameter sweeps and
// grid-convergence studies.

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "thermovisco/analysis.hpp"
#include "thermovisco/config.hpp"
#include "thermovisco/gamma.hpp"
#include "thermovisco/solver.hpp"

namespace thermovisco {

inline constexpr const char* kArtifactVersion = "thermovisco 1.0.0";

enum class ExpectedOutcome { GlobalDecay, GlobalBounded, BlowUpDetected, ConvergenceOrder };

std::string to_string(ExpectedOutcome e);

/// Closed-form target for convergence presets.
struct ManufacturedSpec {
  double amp_u = 1.0;
  double theta_base = 1.0;
  double amp_theta = 0.1;
  double rate = 1.0;

  [[nodiscard]] ManufacturedTarget target(double length) const;
};

struct ExperimentPreset {
  std::string name;
  std::string description;
  SimulationConfig config;
  std::vector<std::string> checks;
  ExpectedOutcome expected = ExpectedOutcome::GlobalBounded;
  std::optional<ManufacturedSpec> manufactured;  // convergence presets only
  int levels = 3;                                 // convergence presets only
};

/// Names in a fixed order.
std::vector<std::string> preset_names();
/// Throws std::invalid_argument for unknown names.
ExperimentPreset preset(const std::string& name);
/// All check names evaluate_checks understands.
const std::vector<std::string>& known_checks();

/// Condition reports the expected outcome relies on. Throws
/// std::invalid_argument when they contradict it, or when a preset names an
/// unknown check.
std::vector<ConditionReport> preflight(const ExperimentPreset& p);

/// Parses a config file, starting from the preset it names if any.
ParsedConfig load_config(std::string_view text, const std::vector<std::string>& overrides = {});

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string json;  // {check, pass, metrics{...}, window}
};

// Pinned check tolerances.
inline constexpr double kMassUtRelTol = 1e-8;
inline constexpr double kMassUAbsTol = 1e-7;
inline constexpr double kHeatBalanceRelTol = 1e-4;
inline constexpr double kHeatMonotoneTol = 1e-12;
inline constexpr double kFitResidualMax = 0.5;
inline constexpr double kFlatnessRelTol = 1e-4;
inline constexpr double kThetaInfRelTol = 1e-3;
inline constexpr double kMonitorGrowth = 1e3;
inline constexpr double kOrderLo = 1.8;
inline constexpr double kOrderHi = 2.2;

/// Evaluates the preset's checks on a finished or terminated run.
std::vector<CheckResult> evaluate_checks(const ExperimentPreset& p, const RunResult& run);

/// Errors of one grid level against the exact target.
struct ConvergenceLevel {
  int n_cells = 0;
  double err_l2[3] = {0, 0, 0};    // u, v, theta
  double err_linf[3] = {0, 0, 0};
  long steps = 0;
};

struct ConvergenceReport {
  std::vector<ConvergenceLevel> levels;
  /// orders[k][q]: log2(err_k / err_{k+1}) for q in u_l2, v_l2, theta_l2,
  /// u_linf, v_linf, theta_linf.
  std::vector<std::array<double, 6>> orders;
  bool exact = false;          // every error at roundoff
  bool monotone = true;        // errors decrease with refinement
  [[nodiscard]] double min_order() const;
  [[nodiscard]] double max_order() const;
};

inline constexpr const char* kOrderNames[6] = {"u_l2", "v_l2", "theta_l2",
                                               "u_linf", "v_linf", "theta_linf"};

/// Runs the preset at n, 2n, ... (levels grids) against its manufactured
/// target, or against the flat exact solution when the preset has none and
/// its data are spatially flat. The finest run is copied to finest when
/// given. Throws std::invalid_argument for levels < 3.
ConvergenceReport convergence_study(const ExperimentPreset& p, int levels,
                                    RunResult* finest = nullptr);

std::string to_json(const ConvergenceReport& r);

struct RunOptions {
  std::optional<std::filesystem::path> runs_dir;  // default: THERMOVISCO_RUNS_DIR or "runs"
  bool write_artifacts = true;
  bool plot_data = false;
};

struct PresetReport {
  std::string name;
  ExpectedOutcome expected = ExpectedOutcome::GlobalBounded;
  RunResult run;
  std::optional<ConvergenceReport> convergence;
  std::vector<ConditionReport> conditions;
  std::vector<CheckResult> checks;
  bool blowup_detected = false;
  bool pass = false;  // every check passed and the outcome matches
  std::string hash;
  std::optional<std::filesystem::path> artifact_dir;

  /// 0 pass, 1 checks failed, 2 expected blow-up, 3 unexpected blow-up.
  [[nodiscard]] int exit_code() const;
};

std::filesystem::path runs_root(const RunOptions& options);

PresetReport run_preset(const ExperimentPreset& p, const RunOptions& options = {});
PresetReport run_preset(const std::string& name, const RunOptions& options = {});

/// reports.json content of a preset run.
std::string reports_json(const PresetReport& report);

struct SweepAxis {
  std::string key;                  // config key, e.g. "a" or "gamma.A"
  std::vector<std::string> values;  // as written in a config file
};

struct SweepSpec {
  std::string base_preset;
  std::vector<SweepAxis> axes;
  std::filesystem::path output;
  int parallelism = 1;
  std::size_t max_points = 10000;
};

struct SweepRow {
  std::vector<std::string> params;
  std::string outcome;  // GlobalDecay, GlobalBounded, BlowUpDetected or error
  std::optional<double> beta;
  double max_theta_linf = 0.0;
  double t_final = 0.0;
  std::string error;
};

struct SweepResult {
  std::size_t total = 0;
  std::size_t skipped = 0;  // already present in the output file
  std::size_t written = 0;
  std::size_t failed = 0;
};

/// Cross product of the axes, first axis slowest, each axis in the given
/// value order.
std::vector<std::vector<std::string>> sweep_points(const SweepSpec& spec);
std::string sweep_header(const SweepSpec& spec);
std::string format_sweep_row(const SweepRow& row);
/// One sweep point: base preset config with the point's values applied.
SweepRow run_sweep_point(const SweepSpec& spec, const std::vector<std::string>& point);

/// Appends missing rows to spec.output in point order, skipping rows already
/// present. Rows are computed by a worker pool and written by one writer.
SweepResult run_sweep(const SweepSpec& spec);

}  // namespace thermovisco
