#include "thermovisco/gamma.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "json.hpp"
#include "tridiagonal.hpp"

namespace thermovisco {
namespace {

using namespace gamma_family;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require(bool ok, const char* message) {
  if (!ok) throw std::invalid_argument(message);
}

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

std::vector<double> clamped_spline_moments(const std::vector<double>& x,
                                           const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<double> lower(n, 0.0), diag(n, 0.0), upper(n, 0.0), rhs(n, 0.0), scratch(n, 0.0);
  // Zero end slopes so the constant extrapolation joins with C^1 continuity.
  const double h0 = x[1] - x[0];
  diag[0] = 2.0 * h0;
  upper[0] = h0;
  rhs[0] = 6.0 * (y[1] - y[0]) / h0;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double hl = x[k] - x[k - 1];
    const double hr = x[k + 1] - x[k];
    lower[k] = hl;
    diag[k] = 2.0 * (hl + hr);
    upper[k] = hr;
    rhs[k] = 6.0 * ((y[k + 1] - y[k]) / hr - (y[k] - y[k - 1]) / hl);
  }
  const double hn = x[n - 1] - x[n - 2];
  lower[n - 1] = hn;
  diag[n - 1] = 2.0 * hn;
  rhs[n - 1] = -6.0 * (y[n - 1] - y[n - 2]) / hn;
  detail::solve_tridiagonal(lower, diag, upper, rhs, scratch);
  return rhs;
}

GammaValue eval_tabulated(const Tabulated& t, double xi) {
  const auto& x = t.xi;
  const auto& y = t.values;
  const auto& m = t.moments;
  if (xi <= x.front()) return {y.front(), 0.0, 0.0};
  if (xi >= x.back()) return {y.back(), 0.0, 0.0};
  const auto it = std::upper_bound(x.begin(), x.end(), xi);
  const std::size_t k = static_cast<std::size_t>(it - x.begin()) - 1;
  const double h = x[k + 1] - x[k];
  const double l = x[k + 1] - xi;
  const double r = xi - x[k];
  const double cl = y[k] / h - m[k] * h / 6.0;
  const double cr = y[k + 1] / h - m[k + 1] * h / 6.0;
  GammaValue g;
  g.value = m[k] * l * l * l / (6.0 * h) + m[k + 1] * r * r * r / (6.0 * h) + cl * l + cr * r;
  g.d1 = -m[k] * l * l / (2.0 * h) + m[k + 1] * r * r / (2.0 * h) - cl + cr;
  g.d2 = (m[k] * l + m[k + 1] * r) / h;
  return g;
}

// Composite Simpson on the log-stretched variable xi = exp(s) - 1.
double integrate_inverse_gamma(const GammaModel& model, double upper) {
  const int n = 4000;
  const double s_max = std::log1p(upper);
  const double h = s_max / n;
  auto f = [&](double s) {
    const double xi = std::expm1(s);
    return std::exp(s) / model.value(xi);
  };
  double sum = f(0.0) + f(s_max);
  for (int k = 1; k < n; ++k) sum += (k % 2 == 1 ? 4.0 : 2.0) * f(k * h);
  return sum * h / 3.0;
}

// Stationary point of f for SaturatingExp, clamped to the domain.
double saturating_exp_stationary_point(const SaturatingExp& g, double D) {
  return std::max(-std::log((2.0 * g.A + D) / (4.0 * g.B)) / g.alpha, 0.0);
}

// f / (alpha^2 s) as a function of s = B exp(-alpha xi).
double saturating_exp_reduced(const SaturatingExp& g, double D, double s) {
  return -2.0 * s * s + (D + 2.0 * g.A) * s - D * (g.A + D);
}

}  // namespace

GammaModel GammaModel::constant(double c) {
  require(finite_positive(c), "constant gamma requires c > 0");
  return GammaModel(Constant{c});
}

GammaModel GammaModel::saturating_exp(double A, double B, double alpha) {
  require(finite_positive(A), "saturating_exp gamma requires A > 0");
  require(finite_positive(B), "saturating_exp gamma requires B > 0");
  require(B < A, "saturating_exp gamma requires B < A");
  require(finite_positive(alpha), "saturating_exp gamma requires alpha > 0");
  return GammaModel(SaturatingExp{A, B, alpha});
}

GammaModel GammaModel::logarithmic(double A, double B) {
  require(finite_positive(A), "logarithmic gamma requires A > 0");
  require(finite_positive(B), "logarithmic gamma requires B > 0");
  return GammaModel(Logarithmic{A, B});
}

GammaModel GammaModel::power(double c, double p) {
  require(finite_positive(c), "power gamma requires c > 0");
  require(std::isfinite(p) && p >= 0.0, "power gamma requires p >= 0");
  return GammaModel(Power{c, p});
}

GammaModel GammaModel::tabulated(std::vector<double> xi, std::vector<double> values) {
  require(xi.size() == values.size(), "tabulated gamma requires matching knot and value counts");
  require(xi.size() >= 2, "tabulated gamma requires at least two knots");
  for (std::size_t k = 0; k < xi.size(); ++k) {
    require(std::isfinite(xi[k]), "tabulated gamma knots must be finite");
    require(finite_positive(values[k]), "tabulated gamma values must be > 0");
    if (k > 0) require(xi[k] > xi[k - 1], "tabulated gamma knots must be strictly increasing");
  }
  auto moments = clamped_spline_moments(xi, values);
  return GammaModel(Tabulated{std::move(xi), std::move(values), std::move(moments)});
}

std::string GammaModel::family_name() const {
  return std::visit(Overloaded{
                        [](const Constant&) { return std::string("constant"); },
                        [](const SaturatingExp&) { return std::string("saturating_exp"); },
                        [](const Logarithmic&) { return std::string("logarithmic"); },
                        [](const Power&) { return std::string("power"); },
                        [](const Tabulated&) { return std::string("tabulated"); },
                    },
                    family_);
}

GammaValue GammaModel::eval(double xi) const {
  if (!(xi >= 0.0)) throw DomainError("gamma evaluated at negative or NaN argument");
  return std::visit(Overloaded{
                        [](const Constant& g) { return GammaValue{g.c, 0.0, 0.0}; },
                        [xi](const SaturatingExp& g) {
                          const double e = g.B * std::exp(-g.alpha * xi);
                          return GammaValue{g.A - e, g.alpha * e, -g.alpha * g.alpha * e};
                        },
                        [xi](const Logarithmic& g) {
                          const double q = xi + 1.0;
                          return GammaValue{g.A + g.B * std::log1p(xi), g.B / q, -g.B / (q * q)};
                        },
                        [xi](const Power& g) {
                          const double q = 1.0 + xi;
                          if (g.p == 0.0) return GammaValue{g.c, 0.0, 0.0};
                          const double qp2 = std::pow(q, g.p - 2.0);
                          return GammaValue{g.c * qp2 * q * q, g.c * g.p * qp2 * q,
                                            g.c * g.p * (g.p - 1.0) * qp2};
                        },
                        [xi](const Tabulated& g) { return eval_tabulated(g, xi); },
                    },
                    family_);
}

double GammaModel::value(double xi) const {
  switch (family_.index()) {
    case 0:
      return std::get<Constant>(family_).c;
    case 1: {
      const auto& g = std::get<SaturatingExp>(family_);
      return g.A - g.B * std::exp(-g.alpha * xi);
    }
    case 2: {
      const auto& g = std::get<Logarithmic>(family_);
      return g.A + g.B * std::log1p(xi);
    }
    case 3: {
      const auto& g = std::get<Power>(family_);
      return g.p == 2.0 ? g.c * (1.0 + xi) * (1.0 + xi) : g.c * std::pow(1.0 + xi, g.p);
    }
    default:
      return eval_tabulated(std::get<Tabulated>(family_), xi).value;
  }
}

std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::G1:
      return "g1";
    case Condition::G2:
      return "g2";
    case Condition::AL:
      return "aL";
    case Condition::Growth:
      return "growth";
  }
  return "?";
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass:
      return "pass";
    case Verdict::Fail:
      return "fail";
    case Verdict::Inconclusive:
      return "inconclusive";
  }
  return "?";
}

std::string_view to_string(CheckMethod m) {
  return m == CheckMethod::Analytic ? "analytic" : "sampled";
}

std::string to_json(const ConditionReport& report) {
  nlohmann::ordered_json j;
  j["condition"] = to_string(report.condition);
  j["verdict"] = to_string(report.verdict);
  if (report.witness && std::isfinite(*report.witness)) {
    j["witness"] = *report.witness;
  } else if (report.witness) {
    j["witness"] = "inf";
  } else {
    j["witness"] = nullptr;
  }
  j["method"] = to_string(report.method);
  j["margin"] = report.margin;
  if (report.sampled) {
    j["sampled_domain"] = {0.0, report.sampled->xi_max};
    j["n_samples"] = report.sampled->n_samples;
  }
  if (report.partial_integral) j["partial_integral"] = *report.partial_integral;
  return j.dump();
}

ConditionReport check_g1(const GammaModel& model, double xi_max, int n_samples) {
  ConditionReport r;
  r.condition = Condition::G1;
  if (!model.is_tabulated()) {
    // Every closed-form family is positive and nondecreasing by its invariants.
    r.method = CheckMethod::Analytic;
    r.verdict = Verdict::Pass;
    r.margin = model.value(0.0);
    return r;
  }
  const auto& t = std::get<Tabulated>(model.variant());
  const double top = std::max(xi_max, t.xi.back());
  r.method = CheckMethod::Sampled;
  r.sampled = SampledDomain{top, n_samples};
  r.margin = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_samples; ++k) {
    const double xi = top * k / std::max(1, n_samples - 1);
    const GammaValue g = model.eval(xi);
    const double slope_tol = 1e-12 * std::max(1.0, std::abs(g.value));
    r.margin = std::min({r.margin, g.value, g.d1});
    if (g.value <= 0.0 || g.d1 < -slope_tol) {
      r.verdict = Verdict::Fail;
      r.witness = xi;
      return r;
    }
  }
  r.verdict = Verdict::Inconclusive;
  return r;
}

double g2_indicator(const GammaModel& model, double D, double xi) {
  if (!(xi >= 0.0)) throw DomainError("g2 indicator evaluated at negative or NaN argument");
  return std::visit(
      Overloaded{
          [](const Constant&) { return 0.0; },
          [D, xi](const SaturatingExp& g) {
            return saturating_exp_reduced(g, D, g.B * std::exp(-g.alpha * xi));
          },
          [D, xi](const Logarithmic& g) {
            return (2.0 * g.A * g.B - g.A * D - D * D) + g.B * std::log1p(xi) * (2.0 * g.B - D);
          },
          [D, xi](const Power& g) {
            if (g.p == 0.0) return 0.0;
            if (std::isinf(xi)) return std::numeric_limits<double>::infinity();
            const double r = std::pow(1.0 + xi, g.p);
            return D * (g.c * r + D) * (g.p - 1.0) + 2.0 * g.c * g.c * g.p * r * r;
          },
          [&model, D, xi](const Tabulated&) {
            const GammaValue v = model.eval(xi);
            return D * (v.value + D) * v.d2 + 2.0 * v.value * v.d1 * v.d1;
          },
      },
      model.variant());
}

double saturating_exp_g2_threshold(double A) { return 2.0 * A / (1.0 + std::sqrt(8.0)); }

ConditionReport check_g2(const GammaModel& model, double D, double xi_max, int n_samples) {
  if (!finite_positive(D)) throw std::invalid_argument("g2 check requires D > 0");
  if (model.is_tabulated()) return check_g2_sampled(model, D, xi_max, n_samples);

  ConditionReport r;
  r.condition = Condition::G2;
  r.method = CheckMethod::Analytic;
  std::visit(Overloaded{
                 [&](const Constant&) { r.margin = 0.0; },
                 [&](const SaturatingExp& g) {
                   // f / (alpha^2 s) is a concave parabola in s = B exp(-alpha xi) on (0, B].
                   const double xi0 = saturating_exp_stationary_point(g, D);
                   const double s0 = g.B * std::exp(-g.alpha * xi0);
                   r.margin = -saturating_exp_reduced(g, D, s0);
                   if (r.margin < 0.0) r.witness = xi0;
                 },
                 [&](const Logarithmic& g) {
                   const double c0 = 2.0 * g.A * g.B - g.A * D - D * D;
                   r.margin = std::min(D - 2.0 * g.B, -c0);
                   if (c0 > 0.0) {
                     r.witness = 0.0;
                   } else if (D < 2.0 * g.B) {
                     // Indicator is affine in ln(xi + 1) with positive slope.
                     const double l_cross = -c0 / (g.B * (2.0 * g.B - D));
                     r.witness = std::expm1(l_cross + 1.0);
                   }
                 },
                 [&](const Power& g) {
                   if (g.p == 0.0) {
                     r.margin = 0.0;
                     return;
                   }
                   r.margin = -g.p;
                   if (g.p >= 1.0) {
                     r.witness = 0.0;
                     return;
                   }
                   // 2c^2 p r^2 + D c (p-1) r + D^2 (p-1) with r = (1+xi)^p.
                   const double qa = 2.0 * g.c * g.c * g.p;
                   const double qb = D * g.c * (g.p - 1.0);
                   const double qc = D * D * (g.p - 1.0);
                   const double root = (-qb + std::sqrt(qb * qb - 4.0 * qa * qc)) / (2.0 * qa);
                   const double r_w = std::max(1.0, 2.0 * root);
                   r.witness = std::pow(r_w, 1.0 / g.p) - 1.0;
                 },
                 [&](const Tabulated&) {},
             },
             model.variant());
  r.verdict = r.margin >= 0.0 ? Verdict::Pass : Verdict::Fail;
  return r;
}

ConditionReport check_g2_sampled(const GammaModel& model, double D, double xi_max, int n_samples) {
  if (!finite_positive(D)) throw std::invalid_argument("g2 check requires D > 0");
  if (n_samples < 2 || !finite_positive(xi_max)) {
    throw std::invalid_argument("g2 sampling requires xi_max > 0 and at least two samples");
  }
  std::vector<double> xs;
  xs.reserve(static_cast<std::size_t>(n_samples) + 1);
  for (int k = 0; k < n_samples; ++k) xs.push_back(xi_max * k / (n_samples - 1));
  if (const auto* g = std::get_if<SaturatingExp>(&model.variant())) {
    xs.push_back(saturating_exp_stationary_point(*g, D));
    std::sort(xs.begin(), xs.end());
  }

  ConditionReport r;
  r.condition = Condition::G2;
  r.method = CheckMethod::Sampled;
  r.sampled = SampledDomain{xi_max, n_samples};
  double worst = -std::numeric_limits<double>::infinity();
  for (const double xi : xs) {
    const double f = g2_indicator(model, D, xi);
    worst = std::max(worst, f);
    if (f > 0.0 && !r.witness) r.witness = xi;
  }
  r.margin = -worst;
  if (r.witness) {
    r.verdict = Verdict::Fail;
  } else {
    r.verdict = model.is_tabulated() ? Verdict::Inconclusive : Verdict::Pass;
  }
  return r;
}

ConditionReport check_growth_integrability(const GammaModel& model, double tail_probe) {
  if (!finite_positive(tail_probe)) throw std::invalid_argument("tail probe must be > 0");
  ConditionReport r;
  r.condition = Condition::Growth;
  r.method = model.is_tabulated() ? CheckMethod::Sampled : CheckMethod::Analytic;
  const double partial = integrate_inverse_gamma(model, tail_probe);
  r.partial_integral = partial;
  if (model.is_tabulated()) {
    r.verdict = Verdict::Inconclusive;
    r.margin = -partial;
    return r;
  }
  const auto* power = std::get_if<Power>(&model.variant());
  if (power != nullptr && power->p > 1.0) {
    r.verdict = Verdict::Pass;
    r.margin = power->p - 1.0;
    return r;
  }
  r.verdict = Verdict::Fail;
  r.margin = power != nullptr ? power->p - 1.0 : -partial;
  r.witness = tail_probe;
  return r;
}

double al_threshold(double gamma0, double D) {
  return std::numbers::pi * std::numbers::pi * gamma0 / (1.0 + std::sqrt(1.0 + gamma0 / D));
}

ConditionReport check_aL(double a, double domain_length, const GammaModel& model, double D) {
  if (!finite_positive(a) || !finite_positive(domain_length) || !finite_positive(D)) {
    throw std::invalid_argument("aL check requires a, |Omega| and D > 0");
  }
  ConditionReport r;
  r.condition = Condition::AL;
  r.method = CheckMethod::Analytic;
  const double lhs = a * domain_length * domain_length;
  r.margin = al_threshold(model.value(0.0), D) - lhs;
  r.verdict = lhs <= al_threshold(model.value(0.0), D) ? Verdict::Pass : Verdict::Fail;
  return r;
}

AdmissibleB admissible_B(double a, double D, double gamma0, double lambda1) {
  if (!finite_positive(a) || !finite_positive(D) || !finite_positive(gamma0) ||
      !finite_positive(lambda1)) {
    throw std::invalid_argument("admissible_B requires positive arguments");
  }
  const double eta1 = std::sqrt((gamma0 + D) / D);
  const double eta2 = 0.5;
  const double lower = 1.0 / (4.0 * eta1 * eta2 * (1.0 - eta2) * D);
  const double upper = 2.0 * gamma0 * lambda1 / ((gamma0 + D) * a) - (2.0 + eta1) / (gamma0 + D);
  AdmissibleB out;
  out.B_lemma4 = gamma0 * a * lambda1 / (gamma0 + D);
  if (!(upper > lower)) {
    throw DomainError("admissible B interval is empty: a|Omega|^2 violates the decay threshold");
  }
  out.lo = 2.0 * eta2 * a * a * lower;
  out.hi = 2.0 * eta2 * a * a * upper;
  out.B_chosen = 0.5 * (out.lo + out.hi);
  return out;
}

DecayConstants decay_constants(double a, double D, double gamma0, double lambda1, double B) {
  DecayConstants k;
  k.B = B;
  k.eta1 = std::sqrt((gamma0 + D) / D);
  k.eta2 = 0.5;
  k.c1 = 2.0 * (1.0 - k.eta2) * a * B - a * a * a / (k.eta1 * D);
  const double p = 2.0 * gamma0 * lambda1 / (gamma0 + D);
  const double q = (2.0 + k.eta1) * a / (gamma0 + D) + B / (2.0 * k.eta2 * a);
  k.delta_max = std::min(1.0, 1.0 - q / p);
  k.delta = 0.5 * k.delta_max;
  k.c2 = (1.0 - k.delta) * p - q;
  k.c3 = std::min(k.c1 / B, (gamma0 + D) * k.c2);
  return k;
}

}  // namespace thermovisco
