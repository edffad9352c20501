#pragma once

// Method-of-lines integrator for
//   v_t     = (gamma(theta) v_x)_x + a v - a^2 u
//   u_t     = v - a u
//   theta_t = D theta_xx + gamma(theta) (v_x - a u_x)^2
// with zero-flux boundaries, where v = u_t + a u.

#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "thermovisco/functionals.hpp"
#include "thermovisco/gamma.hpp"
#include "thermovisco/state.hpp"

namespace thermovisco {

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Initial profile of one field.
struct FieldProfile {
  enum class Kind { Flat, CosineBump, Packet, Tabulated };
  Kind kind = Kind::Flat;
  double mean = 0.0;
  double amplitude = 0.0;
  int mode = 1;            // cosine_bump: cos(mode pi x / L)
  double center = -1.0;    // packet: negative means L/2
  double width = -1.0;     // packet half-width; negative means L/4
  std::vector<double> values;  // tabulated: one value per cell

  /// Samples on the grid nodes. Throws std::invalid_argument when the
  /// profile does not fit the grid.
  [[nodiscard]] std::vector<double> sample(const Grid& grid) const;
};

std::string to_string(FieldProfile::Kind kind);
FieldProfile::Kind profile_kind_from_string(const std::string& name);

enum class Scheme {
  RK4,   // classical explicit Runge-Kutta under the parabolic step limit
  IMEX,  // second-order implicit-explicit Runge-Kutta, implicit diffusion
};

std::string to_string(Scheme s);

struct BlowupThresholds {
  double theta_cap = 1.0e6;
  double w12_cap = 1.0e6;
  double dt_min = -1.0;  // negative: 1e-12 t_end
};

struct SimulationConfig {
  Grid grid;
  double a = 1.0;
  double D = 1.0;
  GammaModel gamma = GammaModel::constant(1.0);
  FieldProfile u0;
  FieldProfile ut0;
  FieldProfile theta0;
  double t_end = 1.0;
  double safety = 0.9;
  Scheme scheme = Scheme::IMEX;
  double dt_max = 1.0e-3;       // IMEX step ceiling
  double growth_limit = 0.05;   // IMEX: max relative heating of ||theta||_inf per step
  BlowupThresholds blowup;
  double diag_interval = 1.0e-2;
  std::optional<double> B;  // weight in y^(B); default picked from the decay analysis

  [[nodiscard]] double dt_min() const { return blowup.dt_min > 0.0 ? blowup.dt_min : 1e-12 * t_end; }
};

/// Throws std::invalid_argument naming the offending field.
void validate(const SimulationConfig& config);

/// u0, v0 = u0t + a u0, theta0 sampled on the grid.
State initial_state(const SimulationConfig& config);

/// B used for y^(B): the admissible midpoint when the decay interval exists,
/// else the global-existence bound.
double default_functional_weight(const SimulationConfig& config);

struct Derivatives {
  std::vector<double> du;
  std::vector<double> dv;
  std::vector<double> dtheta;
};

/// Smooth target (u*, theta*) with the partial derivatives the forcing needs.
struct ManufacturedTarget {
  using Field = std::function<double(double x, double t)>;
  Field u, u_t, u_tt, u_x, u_xt, u_xx, u_xxt;
  Field theta, theta_t, theta_x, theta_xx;
};

/// u* = amp_u cos(pi x / L) e^{-rate t},
/// theta* = theta_base + amp_theta cos(pi x / L) e^{-rate t}.
ManufacturedTarget cosine_decay_target(double amp_u, double theta_base, double amp_theta,
                                       double rate, double length);

/// u* = u0 + c t, theta* = theta_const: spatially flat exact solution.
ManufacturedTarget flat_target(double u0, double c, double theta_const);

struct ForcingFields {
  std::vector<double> fu;
  std::vector<double> fv;
  std::vector<double> ftheta;
};

/// Residual forcing that makes a target solve the forced system exactly.
class ManufacturedForcing {
 public:
  /// Throws std::invalid_argument if the target has nonzero u_x or theta_x
  /// at either boundary.
  ManufacturedForcing(ManufacturedTarget target, const SimulationConfig& config);

  void evaluate(double t, ForcingFields& out) const;
  [[nodiscard]] ForcingFields evaluate(double t) const;
  /// Target sampled on the nodes, with v* = u*_t + a u*.
  [[nodiscard]] State exact_state(double t) const;

 private:
  ManufacturedTarget target_;
  Grid grid_;
  double a_;
  double D_;
  GammaModel gamma_;
};

ManufacturedForcing manufactured_forcing(ManufacturedTarget target, const SimulationConfig& config);

/// Semi-discrete right-hand side on the cell-centered grid.
Derivatives discrete_rhs(const State& state, const SimulationConfig& config,
                         const ManufacturedForcing* forcing = nullptr);

/// RK4 step: safety dx^2 / (2 max(max gamma(theta), D)), clamped so the step
/// ends no later than next_stop (t_end by default).
double stable_dt(const State& state, const SimulationConfig& config,
                 std::optional<double> next_stop = std::nullopt);

enum class StepStatus { Accepted, Finished, BlownUp };
enum class BlowupReason { None, ThetaCap, W12Cap, DtUnderflow, NonFinite };

std::string to_string(StepStatus s);
std::string to_string(BlowupReason r);

struct StepOutcome {
  StepStatus status = StepStatus::Accepted;
  BlowupReason reason = BlowupReason::None;
  double dt_used = 0.0;
  double monitor_value = 0.0;  // value that tripped the detector, if any
};

/// Advances a state with the configured scheme, keeping scratch storage
/// across steps. Not thread-safe; use one per simulation.
class TimeStepper {
 public:
  explicit TimeStepper(const SimulationConfig& config, const ManufacturedForcing* forcing = nullptr);

  /// Step size the scheme would take from this state.
  [[nodiscard]] double proposed_dt(const State& state, double next_stop) const;

  /// One step ending no later than next_stop. On blow-up the state is left
  /// at its pre-step value.
  StepOutcome step(State& state, double next_stop);

  void rhs(const State& state, Derivatives& out);

  /// Smallest theta of the last accepted step, before clipping.
  [[nodiscard]] double last_min_theta() const { return min_theta_; }
  /// ||u_t||_{W^{1,2}} + ||theta||_inf of the last candidate step.
  [[nodiscard]] double last_monitor() const { return monitor_; }

 private:
  struct Stage {
    std::vector<double> u, v, theta;
  };

  void resize(std::size_t n);
  void explicit_part(double t, const Stage& y, Stage& out);
  void apply_conduction(const std::vector<double>& theta, const std::vector<double>& field,
                        std::vector<double>& out);
  void apply_heat_diffusion(const std::vector<double>& theta, std::vector<double>& out) const;
  void solve_conduction(const std::vector<double>& theta, double coeff, std::vector<double>& rhs);
  void solve_heat(double coeff, std::vector<double>& rhs);
  void implicit_stage(const std::vector<double>& theta_base, const std::vector<double>& v_base,
                      double coeff, Stage& y, Stage& rate);
  void step_rk4(State& candidate, double dt);
  void step_imex(State& candidate, double dt);
  StepOutcome check_monitors(State& candidate, const State& before, double dt);

  const SimulationConfig& config_;
  const ManufacturedForcing* forcing_;
  ForcingFields forcing_values_;
  double forcing_time_ = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> grad_u_, grad_v_, face_gamma_;
  std::vector<double> lower_, diag_, upper_, scratch_;
  Stage k_[4], stage_[2], expl_[2], impl_[2], work_;
  Derivatives deriv_;
  State before_;
  double min_theta_ = 0.0;
  double monitor_ = 0.0;
};

/// Single step of the configured scheme from a copy of state.
std::pair<State, StepOutcome> step(const State& state, const SimulationConfig& config);

struct ProfileSample {
  double t = 0.0;
  double theta_min = 0.0;
  double theta_max = 0.0;
  double theta_mean = 0.0;

  /// ||theta - mean||_inf
  [[nodiscard]] double oscillation() const {
    return std::max(theta_max - theta_mean, theta_mean - theta_min);
  }
};

struct RunResult {
  DiagnosticsSeries series;
  std::vector<ProfileSample> profile;
  State final_state;
  StepOutcome outcome;
  double B = 0.0;
  double monitor_initial = 0.0;  // ||u_t||_{W^{1,2}} + ||theta||_inf at t = 0
  double monitor_max = 0.0;      // largest monitor seen, including a tripping value
  long accepted_steps = 0;
  double min_theta_seen = 0.0;   // before clipping
  double max_theta_mass_drop = 0.0;  // largest per-step decrease of int theta
};

/// Runs to t_end or until the blow-up detector fires, recording diagnostics
/// every diag_interval in time plus the final time.
RunResult simulate(const SimulationConfig& config, const ManufacturedForcing* forcing = nullptr);

}  // namespace thermovisco
