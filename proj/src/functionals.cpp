#include "thermovisco/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace thermovisco {
namespace {

using Member = double DiagnosticsRow::*;

constexpr std::array<Member, kSeriesColumns.size()> kMembers = {
    &DiagnosticsRow::t,          &DiagnosticsRow::dt,        &DiagnosticsRow::ux_l2,
    &DiagnosticsRow::ux_linf,    &DiagnosticsRow::vx_l2,     &DiagnosticsRow::vx_linf,
    &DiagnosticsRow::theta_linf, &DiagnosticsRow::thetax_l2, &DiagnosticsRow::mass_u,
    &DiagnosticsRow::mass_ut,    &DiagnosticsRow::mass_theta, &DiagnosticsRow::y_B,
    &DiagnosticsRow::diss_vxx,   &DiagnosticsRow::heat_in};

double sum_squares(std::span<const double> values) {
  double s = 0.0;
  for (const double x : values) s += x * x;
  return s;
}

}  // namespace

double integrate(std::span<const double> values, double dx) {
  if (values.empty()) throw std::invalid_argument("integrate: empty vector");
  double s = 0.0;
  for (const double x : values) s += x;
  return s * dx;
}

void nodal_gradient(std::span<const double> values, double dx, std::span<double> out) {
  const std::size_t n = values.size();
  if (n < 2) throw std::invalid_argument("nodal_gradient needs at least two nodes");
  const double inv = 0.5 / dx;
  out[0] = (values[1] - values[0]) * inv;
  for (std::size_t i = 1; i + 1 < n; ++i) out[i] = (values[i + 1] - values[i - 1]) * inv;
  out[n - 1] = (values[n - 1] - values[n - 2]) * inv;
}

std::vector<double> nodal_gradient(std::span<const double> values, double dx) {
  std::vector<double> out(values.size());
  nodal_gradient(values, dx, out);
  return out;
}

void second_difference(std::span<const double> values, double dx, std::span<double> out) {
  const std::size_t n = values.size();
  if (n < 2) throw std::invalid_argument("second_difference needs at least two nodes");
  const double inv = 1.0 / (dx * dx);
  out[0] = (values[1] - values[0]) * inv;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    out[i] = (values[i + 1] - 2.0 * values[i] + values[i - 1]) * inv;
  }
  out[n - 1] = (values[n - 2] - values[n - 1]) * inv;
}

double l2_norm(std::span<const double> values, double dx) {
  return std::sqrt(sum_squares(values) * dx);
}

double linf_norm(std::span<const double> values) {
  double m = 0.0;
  for (const double x : values) m = std::max(m, std::abs(x));
  return m;
}

PoincareConstant poincare_lambda1(double length) {
  if (!(length > 0.0)) throw std::invalid_argument("Poincare constant needs length > 0");
  return {std::numbers::pi * std::numbers::pi / (length * length)};
}

double compute_y(const State& state, const Grid& grid, const GammaModel& gamma, double D,
                 double B) {
  const double dx = grid.dx();
  const auto vx = nodal_gradient(state.v, dx);
  const auto ux = nodal_gradient(state.u, dx);
  double s = 0.0;
  for (std::size_t i = 0; i < vx.size(); ++i) {
    s += vx[i] * vx[i] / (gamma.value(std::max(state.theta[i], 0.0)) + D) + B * ux[i] * ux[i];
  }
  return s * dx;
}

Masses masses(const State& state, double a, double dx) {
  Masses m;
  m.u = integrate(state.u, dx);
  m.ut = integrate(state.v, dx) - a * m.u;
  m.theta = integrate(state.theta, dx);
  return m;
}

void heat_source(const State& state, const GammaModel& gamma, double a, double dx,
                 std::span<double> out) {
  const std::size_t n = state.u.size();
  std::vector<double> vx(n), ux(n);
  nodal_gradient(state.v, dx, vx);
  nodal_gradient(state.u, dx, ux);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = vx[i] - a * ux[i];
    out[i] = gamma.value(std::max(state.theta[i], 0.0)) * w * w;
  }
}

double column_value(const DiagnosticsRow& row, std::size_t column) {
  return row.*kMembers.at(column);
}

double& column_value(DiagnosticsRow& row, std::size_t column) { return row.*kMembers.at(column); }

std::size_t column_index(std::string_view name) {
  for (std::size_t k = 0; k < kSeriesColumns.size(); ++k) {
    if (kSeriesColumns[k] == name) return k;
  }
  throw std::invalid_argument("unknown series column '" + std::string(name) + "'");
}

std::vector<double> DiagnosticsSeries::column(std::string_view name) const {
  const std::size_t k = column_index(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(column_value(r, k));
  return out;
}

Snapshot take_snapshot(const State& state, const Grid& grid, const GammaModel& gamma, double a,
                       double D, double B) {
  const double dx = grid.dx();
  const std::size_t n = state.u.size();
  std::vector<double> ux(n), vx(n), tx(n), vxx(n);
  nodal_gradient(state.u, dx, ux);
  nodal_gradient(state.v, dx, vx);
  nodal_gradient(state.theta, dx, tx);
  second_difference(state.v, dx, vxx);

  Snapshot s;
  auto& r = s.row;
  r.t = state.t;
  r.ux_l2 = l2_norm(ux, dx);
  r.ux_linf = linf_norm(ux);
  r.vx_l2 = l2_norm(vx, dx);
  r.vx_linf = linf_norm(vx);
  r.theta_linf = linf_norm(state.theta);
  r.thetax_l2 = l2_norm(tx, dx);
  const Masses m = masses(state, a, dx);
  r.mass_u = m.u;
  r.mass_ut = m.ut;
  r.mass_theta = m.theta;

  double y = 0.0, source = 0.0, ut2 = 0.0, uxt2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = gamma.value(std::max(state.theta[i], 0.0));
    const double w = vx[i] - a * ux[i];
    const double ut = state.v[i] - a * state.u[i];
    y += vx[i] * vx[i] / (g + D) + B * ux[i] * ux[i];
    source += g * w * w;
    ut2 += ut * ut;
    uxt2 += w * w;
  }
  r.y_B = y * dx;
  s.heat_source = source * dx;
  s.vxx_energy = sum_squares(vxx) * dx;
  s.ut_w12 = std::sqrt((ut2 + uxt2) * dx);
  const auto [lo, hi] = std::minmax_element(state.theta.begin(), state.theta.end());
  s.theta_min = *lo;
  s.theta_max = *hi;
  s.theta_mean = m.theta / grid.length();
  return s;
}

void TrapezoidAccumulator::add(double t, double rate) {
  if (started_) total_ += 0.5 * (t - t_prev_) * (rate + rate_prev_);
  started_ = true;
  t_prev_ = t;
  rate_prev_ = rate;
}

std::vector<double> dissipation_tracker(std::span<const double> times,
                                        std::span<const double> vxx_energy) {
  if (times.size() != vxx_energy.size()) {
    throw std::invalid_argument("dissipation_tracker: time and rate lengths differ");
  }
  std::vector<double> out;
  out.reserve(times.size());
  TrapezoidAccumulator acc;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (k > 0 && !(times[k] > times[k - 1])) {
      throw std::invalid_argument("dissipation_tracker: times must be strictly increasing");
    }
    acc.add(times[k], vxx_energy[k]);
    out.push_back(acc.total());
  }
  return out;
}

}  // namespace thermovisco
