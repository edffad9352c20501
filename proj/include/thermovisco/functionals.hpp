#pragma once

// Quadrature, discrete derivatives, norms and the energy-type functionals
// tracked along a run.

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include "thermovisco/gamma.hpp"
#include "thermovisco/state.hpp"

namespace thermovisco {

/// Midpoint rule on the cell-centered grid. Throws on empty input.
double integrate(std::span<const double> values, double dx);

/// Nodal first derivative: central differences with reflected ghost values,
/// which at the boundary-adjacent nodes is the quadratic fit honoring a zero
/// wall derivative.
void nodal_gradient(std::span<const double> values, double dx, std::span<double> out);
std::vector<double> nodal_gradient(std::span<const double> values, double dx);

/// Three-point second difference with reflected ghost values.
void second_difference(std::span<const double> values, double dx, std::span<double> out);

double l2_norm(std::span<const double> values, double dx);
double linf_norm(std::span<const double> values);

struct PoincareConstant {
  double lambda1 = 0.0;
};

/// lambda1 = pi^2 / length^2.
PoincareConstant poincare_lambda1(double length);

/// Weighted functional y = int v_x^2 / (gamma(theta) + D) + B int u_x^2.
double compute_y(const State& state, const Grid& grid, const GammaModel& gamma, double D, double B);

struct Masses {
  double u = 0.0;
  double ut = 0.0;
  double theta = 0.0;
};

/// int u, int u_t (with u_t = v - a u) and int theta.
Masses masses(const State& state, double a, double dx);

/// Frictional heat source gamma(theta) (v_x - a u_x)^2 at the nodes.
void heat_source(const State& state, const GammaModel& gamma, double a, double dx,
                 std::span<double> out);

/// One diagnostics row. Field order is the CSV column order.
struct DiagnosticsRow {
  double t = 0.0;
  double dt = 0.0;
  double ux_l2 = 0.0;
  double ux_linf = 0.0;
  double vx_l2 = 0.0;
  double vx_linf = 0.0;
  double theta_linf = 0.0;
  double thetax_l2 = 0.0;
  double mass_u = 0.0;
  double mass_ut = 0.0;
  double mass_theta = 0.0;
  double y_B = 0.0;
  double diss_vxx = 0.0;  // running int_0^t int v_xx^2
  double heat_in = 0.0;   // running int_0^t int gamma(theta)(v_x - a u_x)^2

  bool operator==(const DiagnosticsRow&) const = default;
};

inline constexpr std::array<std::string_view, 14> kSeriesColumns = {
    "t",      "dt",        "ux_l2",   "ux_linf",    "vx_l2", "vx_linf",  "theta_linf",
    "thetax_l2", "mass_u", "mass_ut", "mass_theta", "y_B",   "diss_vxx", "heat_in"};

double column_value(const DiagnosticsRow& row, std::size_t column);
double& column_value(DiagnosticsRow& row, std::size_t column);
/// Index into kSeriesColumns; throws std::invalid_argument for unknown names.
std::size_t column_index(std::string_view name);

struct DiagnosticsSeries {
  std::vector<DiagnosticsRow> rows;

  [[nodiscard]] std::vector<double> column(std::string_view name) const;
  bool operator==(const DiagnosticsSeries&) const = default;
};

/// Instantaneous quantities of a state: everything in a row except t, dt and
/// the two running integrals, plus the integrands of those integrals.
struct Snapshot {
  DiagnosticsRow row;
  double vxx_energy = 0.0;   // int v_xx^2
  double heat_source = 0.0;  // int gamma(theta)(v_x - a u_x)^2
  double theta_min = 0.0;
  double theta_max = 0.0;
  double theta_mean = 0.0;
  double ut_w12 = 0.0;  // ||u_t||_{W^{1,2}}
};

Snapshot take_snapshot(const State& state, const Grid& grid, const GammaModel& gamma, double a,
                       double D, double B);

/// Running trapezoid-in-time integral of a sampled rate.
class TrapezoidAccumulator {
 public:
  void add(double t, double rate);
  [[nodiscard]] double total() const { return total_; }

 private:
  bool started_ = false;
  double t_prev_ = 0.0;
  double rate_prev_ = 0.0;
  double total_ = 0.0;
};

/// Running trapezoid integral of the dissipation int v_xx^2 over the samples.
std::vector<double> dissipation_tracker(std::span<const double> times,
                                        std::span<const double> vxx_energy);

}  // namespace thermovisco
