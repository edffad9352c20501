#pragma once

// Trajectory checks: energy decay, supersolution comparison, the
// interpolation inequality and exponential rate fits.

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "thermovisco/functionals.hpp"
#include "thermovisco/gamma.hpp"

namespace thermovisco {

class AnalysisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Physical parameters the decay constants depend on.
struct DecayParameters {
  double a = 1.0;
  double D = 1.0;
  double gamma0 = 1.0;
  double length = 1.0;
};

struct EnergyDecayReport {
  bool monotone = true;
  double max_uptick = 0.0;  // largest (y_{k+1} - y_k) / y_k
  double epsilon = 1e-6;
  bool tail_bound = true;   // y(t) <= y(0) exp(-c3 t / 2) on the tail window
  double worst_tail_ratio = 0.0;  // max of y(t) / (y(0) exp(-c3 t / 2)) there
  double c3 = 0.0;
  double B = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;

  [[nodiscard]] bool pass() const { return monotone && tail_bound; }
};

/// Checks the y_B column, which must have been recorded with weight B. The
/// tail window is the second half of the time range. Throws DomainError when
/// the parameters admit no decay interval for B.
EnergyDecayReport check_energy_decay(const DiagnosticsSeries& series, double B,
                                     const DecayParameters& params, double epsilon = 1e-6);

struct DecayFit {
  double beta = 0.0;
  double C = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  double residual = 0.0;  // max |log residual|
  int samples = 0;
  std::string quantity;
};

inline constexpr double kDefaultDecayFloor = 1e-12;
inline constexpr int kMinFitSamples = 20;

/// Least-squares line through (t, log value) over the last half of the
/// samples above floor. Throws AnalysisError with fewer than 20 such samples.
DecayFit fit_decay(std::span<const double> times, std::span<const double> values,
                   double floor = kDefaultDecayFloor, std::string quantity = "");
DecayFit fit_decay(const DiagnosticsSeries& series, const std::string& column,
                   double floor = kDefaultDecayFloor);

struct SupersolutionCurve {
  std::vector<double> times;
  std::vector<double> z;        // +inf after divergence
  bool diverged = false;        // z left every finite bound
  std::optional<double> divergence_time;
  double h_integral = 0.0;      // int h over the samples
  std::optional<double> reciprocal_tail;  // int_{xi*}^inf 1/gamma when finite
  bool predicted_divergence = false;      // h_integral > reciprocal_tail
};

/// h = 2 ||v_x||_inf^2 + 2 a^2 ||u_x||_inf^2 per row.
std::vector<double> comparison_rate(const DiagnosticsSeries& series, double a);

/// Solves z' = h(t) gamma(z), z(0) = xi_star by RK4 with h linear between
/// samples. Throws std::invalid_argument for negative h or unsorted times.
SupersolutionCurve supersolution(std::span<const double> times, std::span<const double> h,
                                 double xi_star, const GammaModel& gamma, int substeps = 16);

struct ComparisonReport {
  bool holds = true;
  double worst_ratio = 0.0;  // max theta_max / (z (1 + rel) + abs)
  double worst_time = 0.0;
  int checked = 0;
};

/// theta_max(t) <= z(t) (1 + rel_tol) + abs_tol at every sample. Throws
/// AnalysisError when the time grids differ.
ComparisonReport check_comparison(std::span<const double> times,
                                  std::span<const double> theta_max,
                                  const SupersolutionCurve& curve, double rel_tol = 1e-3,
                                  double abs_tol = 1e-9);
ComparisonReport check_comparison(const DiagnosticsSeries& series, const SupersolutionCurve& curve,
                                  double rel_tol = 1e-3, double abs_tol = 1e-9);

struct GnBound {
  double lhs = 0.0;       // ||phi||_inf
  double rhs = 0.0;
  double seminorm = 0.0;  // [phi]_alpha over grid pairs
  double lp_norm = 0.0;
  bool holds = false;     // lhs <= rhs (1 + 1e-3)
};

inline constexpr std::size_t kMaxSeminormSamples = 2048;

/// Interpolation bound for the piecewise-linear function through samples at
/// x_i = i length / (n - 1). Throws std::invalid_argument for alpha outside
/// (0, 1), p < 1, fewer than 2 or more than 2048 samples.
GnBound gn_bound(std::span<const double> samples, double alpha, double p, double length);

std::string to_json(const EnergyDecayReport& report);
std::string to_json(const DecayFit& fit, bool pass);
std::string to_json(const ComparisonReport& report, const SupersolutionCurve& curve);

}  // namespace thermovisco
