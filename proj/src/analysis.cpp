#include "thermovisco/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

namespace thermovisco {
namespace {

// Reciprocal tail int_{xi}^inf ds / gamma(s), when finite and known in
// closed form.
std::optional<double> reciprocal_tail(const GammaModel& gamma, double xi) {
  if (const auto* p = std::get_if<gamma_family::Power>(&gamma.variant())) {
    if (p->p > 1.0) return std::pow(1.0 + xi, 1.0 - p->p) / (p->c * (p->p - 1.0));
  }
  return std::nullopt;
}

double json_number(double x) { return std::isfinite(x) ? x : std::numeric_limits<double>::max(); }

}  // namespace

EnergyDecayReport check_energy_decay(const DiagnosticsSeries& series, double B,
                                     const DecayParameters& params, double epsilon) {
  const double lambda1 = poincare_lambda1(params.length).lambda1;
  admissible_B(params.a, params.D, params.gamma0, lambda1);
  const DecayConstants k = decay_constants(params.a, params.D, params.gamma0, lambda1, B);

  EnergyDecayReport r;
  r.epsilon = epsilon;
  r.B = B;
  r.c3 = k.c3;
  const auto& rows = series.rows;
  if (rows.empty()) return r;

  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    const double y0 = rows[i].y_B;
    const double y1 = rows[i + 1].y_B;
    double uptick = 0.0;
    if (y0 > 0.0) {
      uptick = (y1 - y0) / y0;
    } else if (y1 > 0.0) {
      uptick = std::numeric_limits<double>::infinity();
    }
    r.max_uptick = std::max(r.max_uptick, uptick);
  }
  r.monotone = r.max_uptick <= epsilon;

  const double t0 = rows.front().t;
  r.window_hi = rows.back().t;
  r.window_lo = 0.5 * (t0 + r.window_hi);
  const double y0 = rows.front().y_B;
  for (const auto& row : rows) {
    if (row.t < r.window_lo) continue;
    const double bound = y0 * std::exp(-0.5 * k.c3 * (row.t - t0));
    const double ratio = bound > 0.0 ? row.y_B / bound : (row.y_B > 0.0 ? INFINITY : 0.0);
    r.worst_tail_ratio = std::max(r.worst_tail_ratio, ratio);
  }
  r.tail_bound = r.worst_tail_ratio <= 1.0;
  return r;
}

DecayFit fit_decay(std::span<const double> times, std::span<const double> values, double floor,
                   std::string quantity) {
  if (times.size() != values.size()) throw AnalysisError("fit_decay: length mismatch");
  std::vector<std::size_t> above;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] > floor && std::isfinite(values[i])) above.push_back(i);
  }
  const std::size_t first = above.size() / 2;
  const std::size_t m = above.size() - first;
  if (m < static_cast<std::size_t>(kMinFitSamples)) {
    throw AnalysisError("fit_decay: only " + std::to_string(m) + " tail samples above floor in '" +
                        quantity + "', need " + std::to_string(kMinFitSamples));
  }

  double st = 0.0, sy = 0.0;
  for (std::size_t j = first; j < above.size(); ++j) {
    st += times[above[j]];
    sy += std::log(values[above[j]]);
  }
  const double tm = st / static_cast<double>(m);
  const double ym = sy / static_cast<double>(m);
  double stt = 0.0, sty = 0.0;
  for (std::size_t j = first; j < above.size(); ++j) {
    const double dt = times[above[j]] - tm;
    stt += dt * dt;
    sty += dt * (std::log(values[above[j]]) - ym);
  }
  if (!(stt > 0.0)) throw AnalysisError("fit_decay: tail samples share one time");
  const double slope = sty / stt;
  const double intercept = ym - slope * tm;

  DecayFit fit;
  fit.beta = -slope;
  fit.C = std::exp(intercept);
  fit.window_lo = times[above[first]];
  fit.window_hi = times[above.back()];
  fit.samples = static_cast<int>(m);
  fit.quantity = std::move(quantity);
  for (std::size_t j = first; j < above.size(); ++j) {
    const double t = times[above[j]];
    fit.residual = std::max(fit.residual, std::abs(std::log(values[above[j]]) - (intercept + slope * t)));
  }
  return fit;
}

DecayFit fit_decay(const DiagnosticsSeries& series, const std::string& column, double floor) {
  const auto t = series.column("t");
  const auto v = series.column(column);
  return fit_decay(t, v, floor, column);
}

std::vector<double> comparison_rate(const DiagnosticsSeries& series, double a) {
  std::vector<double> h;
  h.reserve(series.rows.size());
  for (const auto& r : series.rows) {
    h.push_back(2.0 * r.vx_linf * r.vx_linf + 2.0 * a * a * r.ux_linf * r.ux_linf);
  }
  return h;
}

SupersolutionCurve supersolution(std::span<const double> times, std::span<const double> h,
                                 double xi_star, const GammaModel& gamma, int substeps) {
  if (times.size() != h.size()) throw std::invalid_argument("supersolution: length mismatch");
  if (times.empty()) throw std::invalid_argument("supersolution: no samples");
  if (!(xi_star >= 0.0)) throw std::invalid_argument("supersolution: xi_star must be >= 0");
  if (substeps < 1) throw std::invalid_argument("supersolution: substeps must be >= 1");
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!(h[i] >= 0.0)) throw std::invalid_argument("supersolution: h must be >= 0");
    if (i > 0 && !(times[i] > times[i - 1])) {
      throw std::invalid_argument("supersolution: times must be strictly increasing");
    }
  }

  SupersolutionCurve c;
  c.times.assign(times.begin(), times.end());
  c.z.reserve(times.size());
  c.z.push_back(xi_star);
  constexpr double kHuge = 1e300;
  double z = xi_star;
  auto rate = [&gamma](double hv, double zv) { return hv * gamma.value(zv); };

  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    const double t0 = times[i];
    const double dt = times[i + 1] - t0;
    c.h_integral += 0.5 * dt * (h[i] + h[i + 1]);
    if (c.diverged) {
      c.z.push_back(INFINITY);
      continue;
    }
    const double step = dt / substeps;
    auto h_at = [&](double s) { return h[i] + (h[i + 1] - h[i]) * (s / dt); };
    for (int j = 0; j < substeps && !c.diverged; ++j) {
      const double s = j * step;
      const double k1 = rate(h_at(s), z);
      const double k2 = rate(h_at(s + 0.5 * step), z + 0.5 * step * k1);
      const double k3 = rate(h_at(s + 0.5 * step), z + 0.5 * step * k2);
      const double k4 = rate(h_at(s + step), z + step * k3);
      z += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!std::isfinite(z) || z > kHuge) {
        c.diverged = true;
        c.divergence_time = t0 + s + step;
      }
    }
    c.z.push_back(c.diverged ? INFINITY : z);
  }

  c.reciprocal_tail = reciprocal_tail(gamma, xi_star);
  if (c.reciprocal_tail && c.h_integral > *c.reciprocal_tail) c.predicted_divergence = true;
  return c;
}

ComparisonReport check_comparison(std::span<const double> times,
                                  std::span<const double> theta_max,
                                  const SupersolutionCurve& curve, double rel_tol,
                                  double abs_tol) {
  if (times.size() != theta_max.size() || times.size() != curve.times.size()) {
    throw AnalysisError("check_comparison: snapshot and curve lengths differ");
  }
  ComparisonReport r;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] != curve.times[i]) {
      throw AnalysisError("check_comparison: snapshot time " + std::to_string(times[i]) +
                          " does not match curve time " + std::to_string(curve.times[i]));
    }
    const double bound = curve.z[i] * (1.0 + rel_tol) + abs_tol;
    const double ratio = theta_max[i] / bound;
    if (ratio > r.worst_ratio) {
      r.worst_ratio = ratio;
      r.worst_time = times[i];
    }
    if (!(theta_max[i] <= bound)) r.holds = false;
    ++r.checked;
  }
  return r;
}

ComparisonReport check_comparison(const DiagnosticsSeries& series, const SupersolutionCurve& curve,
                                  double rel_tol, double abs_tol) {
  const auto t = series.column("t");
  const auto th = series.column("theta_linf");
  return check_comparison(t, th, curve, rel_tol, abs_tol);
}

GnBound gn_bound(std::span<const double> samples, double alpha, double p, double length) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("gn_bound: alpha must lie in (0, 1)");
  if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("gn_bound: p must lie in [1, inf)");
  if (!(length > 0.0)) throw std::invalid_argument("gn_bound: length must be > 0");
  const std::size_t n = samples.size();
  if (n < 2) throw std::invalid_argument("gn_bound: need at least 2 samples");
  if (n > kMaxSeminormSamples) {
    throw std::invalid_argument("gn_bound: at most 2048 samples (exhaustive pair seminorm)");
  }
  for (const double x : samples) {
    if (!std::isfinite(x)) throw std::invalid_argument("gn_bound: non-finite sample");
  }

  const double h = length / static_cast<double>(n - 1);
  GnBound g;
  for (const double x : samples) g.lhs = std::max(g.lhs, std::abs(x));

  std::vector<double> dist_pow(n);
  for (std::size_t k = 1; k < n; ++k) dist_pow[k] = std::pow(k * h, alpha);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      g.seminorm = std::max(g.seminorm, std::abs(samples[j] - samples[i]) / dist_pow[j - i]);
    }
  }

  constexpr int kSub = 8;
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (int s = 0; s < kSub; ++s) {
      const double w = (s + 0.5) / kSub;
      const double phi = (1.0 - w) * samples[i] + w * samples[i + 1];
      acc += std::pow(std::abs(phi), p);
    }
  }
  g.lp_norm = std::pow(acc * h / kSub, 1.0 / p);

  const double pa = p * alpha;
  const double first = g.seminorm > 0.0 ? (pa + 1.0) / std::pow(pa, pa / (pa + 1.0)) *
                                              std::pow(g.seminorm, 1.0 / (pa + 1.0)) *
                                              std::pow(g.lp_norm, pa / (pa + 1.0))
                                        : 0.0;
  const double second = (pa + 1.0) / (pa * std::pow(length, 1.0 / p)) * g.lp_norm;
  g.rhs = first + second;
  g.holds = g.lhs <= g.rhs * (1.0 + 1e-3);
  return g;
}

std::string to_json(const EnergyDecayReport& r) {
  nlohmann::ordered_json j;
  j["check"] = "energy_decay";
  j["pass"] = r.pass();
  j["metrics"] = {{"monotone", r.monotone},
                  {"max_uptick", json_number(r.max_uptick)},
                  {"epsilon", r.epsilon},
                  {"tail_bound", r.tail_bound},
                  {"worst_tail_ratio", json_number(r.worst_tail_ratio)},
                  {"c3", r.c3},
                  {"B", r.B}};
  j["window"] = {r.window_lo, r.window_hi};
  return j.dump();
}

std::string to_json(const DecayFit& f, bool pass) {
  nlohmann::ordered_json j;
  j["check"] = "fit_decay:" + f.quantity;
  j["pass"] = pass;
  j["metrics"] = {{"beta", f.beta}, {"C", f.C}, {"residual", f.residual}, {"samples", f.samples}};
  j["window"] = {f.window_lo, f.window_hi};
  return j.dump();
}

std::string to_json(const ComparisonReport& r, const SupersolutionCurve& c) {
  nlohmann::ordered_json j;
  j["check"] = "comparison";
  j["pass"] = r.holds;
  j["metrics"] = {{"worst_ratio", json_number(r.worst_ratio)},
                  {"worst_time", r.worst_time},
                  {"checked", r.checked},
                  {"z_final", json_number(c.z.empty() ? 0.0 : c.z.back())},
                  {"h_integral", c.h_integral},
                  {"diverged", c.diverged}};
  j["window"] = {c.times.empty() ? 0.0 : c.times.front(), c.times.empty() ? 0.0 : c.times.back()};
  return j.dump();
}

}  // namespace thermovisco
