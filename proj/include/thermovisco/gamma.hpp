#pragma once

// Temperature-dependent coefficient gamma(theta) and the structural
// conditions it has to satisfy for global solvability and decay.

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace thermovisco {

/// Thrown when an operation is evaluated outside its mathematical domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// gamma and its first two derivatives at one point.
struct GammaValue {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

namespace gamma_family {

struct Constant {
  double c;
};

/// gamma(xi) = A - B exp(-alpha xi)
struct SaturatingExp {
  double A;
  double B;
  double alpha;
};

/// gamma(xi) = A + B ln(xi + 1)
struct Logarithmic {
  double A;
  double B;
};

/// gamma(xi) = c (1 + xi)^p
struct Power {
  double c;
  double p;
};

/// Cubic spline through (xi_k, value_k) with zero end slopes, held constant
/// outside the knot range.
struct Tabulated {
  std::vector<double> xi;
  std::vector<double> values;
  std::vector<double> moments;  // second derivatives at the knots
};

}  // namespace gamma_family

class GammaModel {
 public:
  using Variant =
      std::variant<gamma_family::Constant, gamma_family::SaturatingExp, gamma_family::Logarithmic,
                   gamma_family::Power, gamma_family::Tabulated>;

  // Factories validate the family invariants and throw std::invalid_argument.
  static GammaModel constant(double c);
  static GammaModel saturating_exp(double A, double B, double alpha);
  static GammaModel logarithmic(double A, double B);
  static GammaModel power(double c, double p);
  static GammaModel tabulated(std::vector<double> xi, std::vector<double> values);

  [[nodiscard]] const Variant& variant() const { return family_; }
  [[nodiscard]] bool is_tabulated() const {
    return std::holds_alternative<gamma_family::Tabulated>(family_);
  }
  /// Family name as used in config files ("saturating_exp", ...).
  [[nodiscard]] std::string family_name() const;

  /// Value and derivatives; throws DomainError for xi < 0.
  [[nodiscard]] GammaValue eval(double xi) const;
  /// Value only, for hot loops. Caller guarantees xi >= 0.
  [[nodiscard]] double value(double xi) const;

 private:
  explicit GammaModel(Variant v) : family_(std::move(v)) {}
  Variant family_;
};

[[nodiscard]] inline GammaValue eval_gamma(const GammaModel& model, double xi) {
  return model.eval(xi);
}

enum class Condition { G1, G2, AL, Growth };
enum class Verdict { Pass, Fail, Inconclusive };
enum class CheckMethod { Analytic, Sampled };

std::string_view to_string(Condition c);
std::string_view to_string(Verdict v);
std::string_view to_string(CheckMethod m);

struct SampledDomain {
  double xi_max = 0.0;
  int n_samples = 0;
};

struct ConditionReport {
  Condition condition = Condition::G1;
  Verdict verdict = Verdict::Inconclusive;
  std::optional<double> witness;
  CheckMethod method = CheckMethod::Analytic;
  /// Signed slack of the condition: >= 0 on the passing side (> 0 for Growth).
  double margin = 0.0;
  std::optional<SampledDomain> sampled;
  /// Growth check on tabulated models: partial integral of 1/gamma.
  std::optional<double> partial_integral;
};

/// JSON document {condition, verdict, witness, method, margin, ...}.
std::string to_json(const ConditionReport& report);

inline constexpr double kDefaultXiMax = 100.0;
inline constexpr int kDefaultSamples = 10000;

/// gamma > 0 and gamma' >= 0 on [0, inf).
ConditionReport check_g1(const GammaModel& model, double xi_max = kDefaultXiMax,
                         int n_samples = kDefaultSamples);

/// A function with the sign of f(xi) = D (gamma + D) gamma'' + 2 gamma gamma'^2.
/// For the closed-form families the positive factor common to all terms is
/// divided out so the sign survives for very large xi; for tabulated models
/// this is f itself. Accepts xi = +inf for the families with a limit there.
double g2_indicator(const GammaModel& model, double D, double xi);

/// Checks the g2 condition f <= 0 on [0, inf). Closed-form families are decided
/// analytically; tabulated models fall back to sampling.
ConditionReport check_g2(const GammaModel& model, double D, double xi_max = kDefaultXiMax,
                         int n_samples = kDefaultSamples);

/// Checks g2 by sampling the indicator on a uniform grid over [0, xi_max]. For
/// SaturatingExp the stationary point of f is added to the sample set.
/// All-pass gives Pass for closed-form families and Inconclusive for tables.
ConditionReport check_g2_sampled(const GammaModel& model, double D, double xi_max = kDefaultXiMax,
                                 int n_samples = kDefaultSamples);

/// Sufficient g2 threshold on D for SaturatingExp, 2A / (1 + sqrt 8).
double saturating_exp_g2_threshold(double A);

/// Integrability of 1/gamma over [0, inf).
ConditionReport check_growth_integrability(const GammaModel& model, double tail_probe = 1.0e6);

/// Smallness of a |Omega|^2 required for exponential stabilization.
double al_threshold(double gamma0, double D);
ConditionReport check_aL(double a, double domain_length, const GammaModel& model, double D);

/// Constants of the energy functional argument in the decay regime.
struct AdmissibleB {
  double B_lemma4 = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double B_chosen = 0.0;
};

/// B interval for which the weighted functional decays. Throws DomainError
/// when the interval is empty (the smallness condition on a fails).
AdmissibleB admissible_B(double a, double D, double gamma0, double lambda1);

/// Constants of the differential inequality y' + c3 y <= -(dissipation)
/// evaluated at a given B inside the admissible interval.
struct DecayConstants {
  double B = 0.0;
  double eta1 = 0.0;
  double eta2 = 0.5;
  double c1 = 0.0;         // coefficient of the u_x^2 term
  double delta_max = 0.0;  // largest delta in (0, 1] keeping c2 >= 0
  double delta = 0.0;
  double c2 = 0.0;  // coefficient of the v_x^2 term
  double c3 = 0.0;  // decay rate of y
};

DecayConstants decay_constants(double a, double D, double gamma0, double lambda1, double B);

}  // namespace thermovisco
