#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "thermovisco/gamma.hpp"

using namespace thermovisco;

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Independent closed forms.
double sat_exp(double A, double B, double alpha, double xi) { return A - B * std::exp(-alpha * xi); }
double log_gamma(double A, double B, double xi) { return A + B * std::log1p(xi); }

// f = D (gamma + D) gamma'' + 2 gamma gamma'^2 from an eval triple.
double g2_f(const GammaValue& g, double D) { return D * (g.value + D) * g.d2 + 2.0 * g.value * g.d1 * g.d1; }

GammaModel random_model(std::mt19937_64& rng, int family) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  switch (family) {
    case 0:
      return GammaModel::constant(0.1 + 5.0 * U(rng));
    case 1: {
      const double A = 0.1 + 5.0 * U(rng);
      return GammaModel::saturating_exp(A, A * (0.01 + 0.98 * U(rng)), 0.05 + 3.0 * U(rng));
    }
    case 2:
      return GammaModel::logarithmic(0.1 + 5.0 * U(rng), 0.05 + 3.0 * U(rng));
    case 3:
      return GammaModel::power(0.1 + 3.0 * U(rng), 3.0 * U(rng));
    default: {
      std::vector<double> xi{0.0}, v{0.2 + U(rng)};
      for (int k = 1; k < 8; ++k) {
        xi.push_back(xi.back() + 0.5 + 5.0 * U(rng));
        v.push_back(v.back() + 2.0 * U(rng));
      }
      return GammaModel::tabulated(xi, v);
    }
  }
}

}  // namespace

TEST_CASE("eval_gamma closed forms at the documented points") {
  const auto s = eval_gamma(GammaModel::saturating_exp(1.0, 0.5, 1.0), 0.0);
  CHECK(s.value == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.d1 == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.d2 == doctest::Approx(-0.5).epsilon(1e-15));

  const auto c = eval_gamma(GammaModel::constant(2.0), 7.0);
  CHECK(c.value == 2.0);
  CHECK(c.d1 == 0.0);
  CHECK(c.d2 == 0.0);

  const auto l = eval_gamma(GammaModel::logarithmic(1.0, 1.0), 0.0);
  CHECK(l.value == doctest::Approx(1.0));
  CHECK(l.d1 == doctest::Approx(1.0));
  CHECK(l.d2 == doctest::Approx(-1.0));

  // Finite-difference cross-check of the documented triples.
  const double h = 1e-5;
  const double d1 = (sat_exp(1, 0.5, 1, 0.3 + h) - sat_exp(1, 0.5, 1, 0.3 - h)) / (2 * h);
  CHECK(eval_gamma(GammaModel::saturating_exp(1.0, 0.5, 1.0), 0.3).d1 == doctest::Approx(d1).epsilon(1e-8));
  const double ld1 = (log_gamma(1, 1, 0.3 + h) - log_gamma(1, 1, 0.3 - h)) / (2 * h);
  CHECK(eval_gamma(GammaModel::logarithmic(1.0, 1.0), 0.3).d1 == doctest::Approx(ld1).epsilon(1e-8));
}

TEST_CASE("eval_gamma rejects negative arguments") {
  CHECK_THROWS_AS((void)eval_gamma(GammaModel::constant(1.0), -1e-9), DomainError);
  CHECK_THROWS_AS((void)eval_gamma(GammaModel::power(1.0, 2.0), -1.0), DomainError);
}

TEST_CASE("factories enforce family invariants") {
  CHECK_THROWS_AS(GammaModel::constant(0.0), std::invalid_argument);
  CHECK_THROWS_AS(GammaModel::saturating_exp(1.0, 1.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(GammaModel::saturating_exp(1.0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(GammaModel::saturating_exp(1.0, 0.5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(GammaModel::logarithmic(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(GammaModel::power(1.0, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(GammaModel::tabulated({0.0, 1.0, 1.0}, {1, 2, 3}), std::invalid_argument);
  CHECK_THROWS_AS(GammaModel::tabulated({0.0, 1.0}, {1.0, 0.0}), std::invalid_argument);
  CHECK_NOTHROW(GammaModel::power(1.0, 0.0));
}

TEST_CASE("derivatives agree with central differences on random draws") {
  // gamma' is differenced from values and gamma'' from the returned gamma';
  // the floor term is the rounding noise of a step-h difference.
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double h = 1e-5;
  int worst_family = -1;
  double worst = 0.0;
  for (int draw = 0; draw < 1000; ++draw) {
    const int family = draw % 5;
    const GammaModel m = random_model(rng, family);
    for (int k = 0; k < 100; ++k) {
      const double xi = h + 30.0 * U(rng);
      const auto g = m.eval(xi);
      const auto gp = m.eval(xi + h);
      const auto gm = m.eval(xi - h);
      const double fd1 = (gp.value - gm.value) / (2 * h);
      const double fd2 = (gp.d1 - gm.d1) / (2 * h);
      const double floor1 = 8 * kEps * std::abs(g.value) / h;
      const double floor2 = 8 * kEps * (std::abs(g.d1) + 1e-300) / h;
      const double e1 = std::abs(fd1 - g.d1) / (std::abs(g.d1) + floor1 / 1e-6 + 1e-300);
      const double e2 = std::abs(fd2 - g.d2) / (std::abs(g.d2) + floor2 / 1e-6 + 1e-300);
      if (std::max(e1, e2) > worst) {
        worst = std::max(e1, e2);
        worst_family = family;
      }
    }
  }
  INFO("worst family " << worst_family);
  CHECK(worst <= 1e-6);
}

TEST_CASE("tabulated interpolant is C2 across knots") {
  const auto m = GammaModel::tabulated({0.0, 1.0, 2.5, 4.0}, {1.0, 1.5, 1.7, 2.5});
  for (double knot : {1.0, 2.5}) {
    const auto l = m.eval(knot - 1e-9);
    const auto r = m.eval(knot + 1e-9);
    CHECK(l.value == doctest::Approx(r.value).epsilon(1e-7));
    CHECK(l.d1 == doctest::Approx(r.d1).epsilon(1e-6));
    CHECK(l.d2 == doctest::Approx(r.d2).epsilon(1e-6));
  }
  // Zero end slopes and constant hold outside the knot range.
  CHECK(std::abs(m.eval(0.0).d1) < 1e-12);
  CHECK(m.eval(10.0).value == doctest::Approx(2.5));
  CHECK(m.eval(10.0).d1 == 0.0);
  CHECK(m.eval(1.0).value == doctest::Approx(1.5));
}

TEST_CASE("g1: positivity and monotonicity") {
  CHECK(check_g1(GammaModel::saturating_exp(1.0, 0.5, 1.0)).verdict == Verdict::Pass);
  CHECK(check_g1(GammaModel::power(1.0, 2.0)).verdict == Verdict::Pass);
  const auto bumpy = GammaModel::tabulated({0.0, 1.0, 2.0}, {1.0, 2.0, 1.0});
  const auto r = check_g1(bumpy);
  REQUIRE(r.verdict == Verdict::Fail);
  REQUIRE(r.witness.has_value());
  CHECK(bumpy.eval(*r.witness).d1 < 0.0);
}

TEST_CASE("g2 documented verdicts") {
  const double thr = 2.0 / (1.0 + std::sqrt(8.0));
  CHECK(saturating_exp_g2_threshold(1.0) == doctest::Approx(0.5224).epsilon(1e-4));
  CHECK(saturating_exp_g2_threshold(1.0) == doctest::Approx(thr).epsilon(1e-15));
  CHECK(check_g2(GammaModel::saturating_exp(1.0, 0.5, 1.0), 0.53).verdict == Verdict::Pass);

  const auto c = check_g2(GammaModel::constant(1.0), 0.7);
  CHECK(c.verdict == Verdict::Pass);
  CHECK(c.margin == 0.0);
  CHECK(g2_f(GammaModel::constant(1.0).eval(3.0), 0.7) == 0.0);

  const auto lg = GammaModel::logarithmic(1.0, 1.0);
  const auto l = check_g2(lg, 0.5);
  REQUIRE(l.verdict == Verdict::Fail);
  REQUIRE(l.witness.has_value());
  CHECK(*l.witness == 0.0);
  // f(0) (0 + 1)^2 / B = 2AB - AD - D^2 = 1.25
  CHECK(g2_f(lg.eval(0.0), 0.5) == doctest::Approx(1.25));
  CHECK(g2_f(lg.eval(*l.witness), 0.5) > 0.0);

  const auto p = check_g2(GammaModel::power(1.0, 2.0), 10.0);
  REQUIRE(p.verdict == Verdict::Fail);
  REQUIRE(p.witness.has_value());
  CHECK(g2_f(GammaModel::power(1.0, 2.0).eval(*p.witness), 10.0) > 0.0);
}

TEST_CASE("g2 failures come with a witness that reproduces the violation") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int fails = 0;
  for (int k = 0; k < 500; ++k) {
    const GammaModel m = random_model(rng, 1 + k % 3);
    const double D = 0.01 + 4.0 * U(rng);
    const auto r = check_g2(m, D);
    if (r.verdict != Verdict::Fail) continue;
    ++fails;
    REQUIRE(r.witness.has_value());
    CHECK(g2_indicator(m, D, *r.witness) > 0.0);
    // The raw expression underflows for far-out witnesses of slowly growing powers.
    if (*r.witness < 1e6) CHECK(g2_f(m.eval(*r.witness), D) > 0.0);
  }
  CHECK(fails > 50);
}

TEST_CASE("g2 analytic verdict equals sampled verdict") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int compared = 0;
  for (int k = 0; k < 1000; ++k) {
    const int family = k % 4;
    const GammaModel m = random_model(rng, family);
    double D = 0.01 + 4.0 * U(rng);
    if (family == 2) {
      // Logarithmic failures can sit beyond any finite sample range when
      // D < 2B, so draw on the hypothesis side.
      const auto& g = std::get<gamma_family::Logarithmic>(m.variant());
      D = 2.0 * g.B * (1.0 + U(rng));
    }
    if (family == 3 && std::get<gamma_family::Power>(m.variant()).p < 1.0) continue;
    const auto a = check_g2(m, D);
    if (!(std::abs(a.margin) > 1e-9)) continue;
    const auto s = check_g2_sampled(m, D, 100.0, 10000);
    ++compared;
    CHECK(a.method == CheckMethod::Analytic);
    CHECK(s.method == CheckMethod::Sampled);
    CHECK(a.verdict == s.verdict);
  }
  CHECK(compared > 600);
}

TEST_CASE("g2 sufficient threshold implies Pass for SaturatingExp") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int k = 0; k < 300; ++k) {
    const double A = 0.1 + 5.0 * U(rng);
    const auto m = GammaModel::saturating_exp(A, A * (0.01 + 0.98 * U(rng)), 0.05 + 3 * U(rng));
    const double D = saturating_exp_g2_threshold(A) * (1.0 + 2.0 * U(rng));
    CHECK(check_g2(m, D).verdict == Verdict::Pass);
    // (7/4) D^2 + A D - A^2 >= 0 is the same statement.
    CHECK(1.75 * D * D + A * D - A * A >= -1e-12 * A * A);
  }
}

TEST_CASE("logarithmic hypothesis D >= 2B implies the displayed expression is nonpositive") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const double A = 0.01 + 10 * U(rng), B = 0.01 + 10 * U(rng);
    const double D = 2 * B * (1 + 3 * U(rng));
    CHECK(2 * A * B - A * D - D * D <= 0.0);
    CHECK(check_g2(GammaModel::logarithmic(A, B), D).verdict == Verdict::Pass);
  }
}

TEST_CASE("tabulated g2 is sampled and at best inconclusive") {
  const auto m = GammaModel::tabulated({0.0, 1.0, 2.0, 3.0}, {1.0, 1.3, 1.45, 1.5});
  const auto r = check_g2(m, 5.0);
  CHECK(r.method == CheckMethod::Sampled);
  CHECK(r.verdict != Verdict::Pass);
  REQUIRE(r.sampled.has_value());
  CHECK(r.sampled->n_samples == kDefaultSamples);
}

TEST_CASE("growth integrability") {
  const auto p = check_growth_integrability(GammaModel::power(1.0, 2.0));
  CHECK(p.verdict == Verdict::Pass);
  // int_0^inf dxi / (1 + xi)^2 = 1
  REQUIRE(p.partial_integral.has_value());
  CHECK(*p.partial_integral == doctest::Approx(1.0 - 1.0 / (1.0 + 1e6)).epsilon(1e-5));
  CHECK(check_growth_integrability(GammaModel::constant(3.0)).verdict == Verdict::Fail);
  CHECK(check_growth_integrability(GammaModel::logarithmic(1.0, 1.0)).verdict == Verdict::Fail);
  CHECK(check_growth_integrability(GammaModel::power(1.0, 1.0)).verdict == Verdict::Fail);
  // Partial sums keep growing for the logarithmic family.
  const auto l1 = check_growth_integrability(GammaModel::logarithmic(1.0, 1.0), 1e3);
  const auto l2 = check_growth_integrability(GammaModel::logarithmic(1.0, 1.0), 1e6);
  CHECK(*l2.partial_integral > 10.0 * *l1.partial_integral);
  const auto t = check_growth_integrability(GammaModel::tabulated({0.0, 1.0}, {1.0, 2.0}), 100.0);
  CHECK(t.verdict == Verdict::Inconclusive);
  CHECK(*t.partial_integral == doctest::Approx(0.5 * 99.0 + 0.70).epsilon(0.02));
}

TEST_CASE("aL threshold and verdicts") {
  const double thr = std::numbers::pi * std::numbers::pi / (1.0 + std::sqrt(2.0));
  CHECK(al_threshold(1.0, 1.0) == doctest::Approx(4.0881).epsilon(1e-4));
  CHECK(al_threshold(1.0, 1.0) == doctest::Approx(thr).epsilon(1e-15));
  const auto g = GammaModel::constant(1.0);
  CHECK(check_aL(1.0, 1.0, g, 1.0).verdict == Verdict::Pass);
  CHECK(check_aL(5.0, 1.0, g, 1.0).verdict == Verdict::Fail);
  CHECK(check_aL(thr, 1.0, g, 1.0).verdict == Verdict::Pass);
}

TEST_CASE("aL is monotone in a, length and gamma(0)") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const double a = 0.01 + 10 * U(rng), L = 0.1 + 3 * U(rng), g0 = 0.1 + 5 * U(rng), D = 0.1 + 5 * U(rng);
    const auto base = check_aL(a, L, GammaModel::constant(g0), D).verdict;
    if (base != Verdict::Pass) continue;
    CHECK(check_aL(a * U(rng), L, GammaModel::constant(g0), D).verdict == Verdict::Pass);
    CHECK(check_aL(a, L * U(rng), GammaModel::constant(g0), D).verdict == Verdict::Pass);
    CHECK(check_aL(a, L, GammaModel::constant(g0 * (1 + 5 * U(rng))), D).verdict == Verdict::Pass);
  }
}

TEST_CASE("admissible_B documented case") {
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const auto b = admissible_B(1.0, 1.0, 1.0, pi2);
  // eta1 = sqrt 2, eta2 = 1/2: L = 1/(4 eta1 eta2 (1 - eta2) D) = 1/sqrt 2,
  // U = pi^2 - (2 + sqrt 2)/2, and the interval is 2 eta2 a^2 (L, U).
  const double lower = 1.0 / std::sqrt(2.0);
  const double upper = pi2 - (2.0 + std::sqrt(2.0)) / 2.0;
  CHECK(upper == doctest::Approx(8.1628).epsilon(1e-4));
  CHECK(b.lo == doctest::Approx(lower).epsilon(1e-14));
  CHECK(b.hi == doctest::Approx(upper).epsilon(1e-14));
  CHECK(b.B_chosen == doctest::Approx(0.5 * (lower + upper)).epsilon(1e-14));
  CHECK(b.B_lemma4 == doctest::Approx(pi2 / 2.0).epsilon(1e-14));
  CHECK_THROWS_AS(admissible_B(5.0, 1.0, 1.0, pi2), DomainError);
}

TEST_CASE("admissible_B interval yields positive decay constants") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int nonempty = 0;
  for (int k = 0; k < 2000; ++k) {
    const double g0 = 0.1 + 5 * U(rng), D = 0.1 + 5 * U(rng), L = 0.2 + 2 * U(rng);
    const double lambda1 = std::numbers::pi * std::numbers::pi / (L * L);
    const double a = (0.01 + 1.5 * U(rng)) * al_threshold(g0, D) / (L * L);
    AdmissibleB b;
    try {
      b = admissible_B(a, D, g0, lambda1);
    } catch (const DomainError&) {
      continue;
    }
    ++nonempty;
    CHECK(b.lo > 0.0);
    CHECK(b.lo < b.B_chosen);
    CHECK(b.B_chosen < b.hi);
    // B_lemma4 = c1 a lambda1 / 2 with c1 = 2 gamma0 / (gamma0 + D)
    CHECK(b.B_lemma4 == doctest::Approx(g0 / (g0 + D) * a * lambda1).epsilon(1e-14));
    const auto kc = decay_constants(a, D, g0, lambda1, b.B_chosen);
    CHECK(kc.c1 > 0.0);
    CHECK(kc.c2 > 0.0);
    CHECK(kc.delta > 0.0);
    CHECK(kc.delta <= 0.5);
    CHECK(kc.c3 > 0.0);
    // Independent evaluation of the v_x^2 coefficient at delta.
    const double eta1 = std::sqrt((g0 + D) / D);
    const double c2 = (1 - kc.delta) * 2 * g0 * lambda1 / (g0 + D) - (2 + eta1) * a / (g0 + D) -
                      b.B_chosen / a;
    CHECK(kc.c2 == doctest::Approx(c2).epsilon(1e-12));
  }
  CHECK(nonempty > 200);
}

TEST_CASE("B_lemma4 equals a lambda1 / 2 when gamma(0) = D") {
  for (double g : {0.3, 1.0, 4.0}) {
    try {
      const auto b = admissible_B(0.1, g, g, 9.0);
      CHECK(b.B_lemma4 == doctest::Approx(0.1 * 9.0 / 2.0).epsilon(1e-14));
    } catch (const DomainError&) {
      FAIL("interval unexpectedly empty");
    }
  }
}

TEST_CASE("condition reports serialize to JSON") {
  const auto j = to_json(check_g2(GammaModel::logarithmic(1.0, 1.0), 0.5));
  CHECK(j.find("\"condition\"") != std::string::npos);
  CHECK(j.find("\"verdict\"") != std::string::npos);
  CHECK(j.find("\"witness\"") != std::string::npos);
  CHECK(j.find("\"method\"") != std::string::npos);
  CHECK(j.find("\"margin\"") != std::string::npos);
}
