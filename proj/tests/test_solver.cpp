#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "thermovisco/solver.hpp"

using namespace thermovisco;

namespace {

constexpr double kPi = std::numbers::pi;

SimulationConfig base_config(int n = 64) {
  SimulationConfig c;
  c.grid = Grid(1.0, n);
  c.a = 1.0;
  c.D = 1.0;
  c.gamma = GammaModel::saturating_exp(1.0, 0.5, 1.0);
  c.t_end = 0.1;
  c.diag_interval = 0.01;
  return c;
}

FieldProfile flat(double m) {
  FieldProfile p;
  p.mean = m;
  return p;
}

FieldProfile cosine(double m, double amp, int mode = 1) {
  FieldProfile p;
  p.kind = FieldProfile::Kind::CosineBump;
  p.mean = m;
  p.amplitude = amp;
  p.mode = mode;
  return p;
}

State make_state(int n, double u, double v, double th) {
  State s;
  s.u.assign(n, u);
  s.v.assign(n, v);
  s.theta.assign(n, th);
  return s;
}

// Direct transcription of the semi-discrete system.
Derivatives reference_rhs(const State& s, const SimulationConfig& c) {
  const int n = c.grid.n_cells();
  const double dx = c.grid.dx();
  auto at = [n](const std::vector<double>& f, int i) { return f[std::clamp(i < 0 ? -1 - i : (i >= n ? 2 * n - 1 - i : i), 0, n - 1)]; };
  Derivatives d;
  d.du.resize(n);
  d.dv.resize(n);
  d.dtheta.resize(n);
  for (int i = 0; i < n; ++i) {
    double right = 0.0, left = 0.0;
    if (i + 1 < n) right = c.gamma.value(0.5 * (s.theta[i] + s.theta[i + 1])) * (s.v[i + 1] - s.v[i]) / dx;
    if (i > 0) left = c.gamma.value(0.5 * (s.theta[i - 1] + s.theta[i])) * (s.v[i] - s.v[i - 1]) / dx;
    d.dv[i] = (right - left) / dx + c.a * s.v[i] - c.a * c.a * s.u[i];
    d.du[i] = s.v[i] - c.a * s.u[i];
    const double g = (at(s.v, i + 1) - at(s.v, i - 1)) / (2 * dx);
    const double h = (at(s.u, i + 1) - at(s.u, i - 1)) / (2 * dx);
    d.dtheta[i] = c.D * (at(s.theta, i + 1) - 2 * s.theta[i] + at(s.theta, i - 1)) / (dx * dx) +
                  c.gamma.value(s.theta[i]) * (g - c.a * h) * (g - c.a * h);
  }
  return d;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Averages fine cell pairs onto the coarse grid.
std::vector<double> restrict2(const std::vector<double>& f) {
  std::vector<double> out(f.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * (f[2 * i] + f[2 * i + 1]);
  return out;
}

}  // namespace

TEST_CASE("discrete_rhs: flat states") {
  auto c = base_config(32);
  const auto d0 = discrete_rhs(make_state(32, 1.0, c.a * 1.0, 0.0), c);
  for (int i = 0; i < 32; ++i) {
    CHECK(d0.du[i] == 0.0);
    CHECK(d0.dv[i] == 0.0);
    CHECK(d0.dtheta[i] == 0.0);
  }
  const double u0 = 0.4, cc = 1.3;
  const auto d1 = discrete_rhs(make_state(32, u0, cc + c.a * u0, 0.2), c);
  for (int i = 0; i < 32; ++i) {
    CHECK(d1.du[i] == doctest::Approx(cc).epsilon(1e-14));
    CHECK(d1.dv[i] == doctest::Approx(c.a * cc).epsilon(1e-14));
    CHECK(d1.dtheta[i] == 0.0);
  }
}

TEST_CASE("discrete_rhs matches the transcribed stencil on random states") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> N(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    auto c = base_config(16 + k);
    c.a = 0.3 + 0.1 * k;
    c.D = 0.5 + 0.05 * k;
    State s = make_state(c.grid.n_cells(), 0, 0, 0);
    for (int i = 0; i < c.grid.n_cells(); ++i) {
      s.u[i] = N(rng);
      s.v[i] = N(rng);
      s.theta[i] = std::abs(N(rng));
    }
    const auto got = discrete_rhs(s, c);
    const auto ref = reference_rhs(s, c);
    const double scale = c.grid.n_cells() * c.grid.n_cells();
    CHECK(max_diff(got.du, ref.du) < 1e-12);
    CHECK(max_diff(got.dv, ref.dv) < 1e-12 * scale);
    CHECK(max_diff(got.dtheta, ref.dtheta) < 1e-12 * scale);
  }
}

TEST_CASE("discrete_rhs: Neumann eigenfunction converges at second order") {
  auto err = [](int n) {
    auto c = base_config(n);
    c.gamma = GammaModel::constant(2.0);
    c.a = 0.7;
    State s = make_state(n, 0.0, 0.0, 0.0);
    for (int i = 0; i < n; ++i) s.v[i] = std::cos(kPi * c.grid.x(i));
    const auto d = discrete_rhs(s, c);
    double e = 0.0;
    for (int i = 0; i < n; ++i) {
      const double exact = (-2.0 * kPi * kPi + c.a) * std::cos(kPi * c.grid.x(i));
      e = std::max(e, std::abs(d.dv[i] - exact));
    }
    return e;
  };
  const double r = err(64) / err(128);
  CHECK(r == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("discrete_rhs rejects non-finite input") {
  auto c = base_config(16);
  State s = make_state(16, 0, 0, 0);
  s.v[3] = std::nan("");
  CHECK_THROWS_AS(discrete_rhs(s, c), SolverError);
}

TEST_CASE("stable_dt") {
  SimulationConfig c;
  c.grid = Grid(1.0, 10);
  c.gamma = GammaModel::constant(1.0);
  c.D = 1.0;
  c.safety = 0.9;
  c.t_end = 10.0;
  c.scheme = Scheme::RK4;
  State s = initial_state(c);
  CHECK(stable_dt(s, c) == doctest::Approx(0.0045).epsilon(1e-14));
  c.D = 10.0;
  CHECK(stable_dt(s, c) == doctest::Approx(0.00045).epsilon(1e-14));
  s.t = 10.0 - 1e-4;
  CHECK(stable_dt(s, c) == doctest::Approx(1e-4).epsilon(1e-9));
  s.t = 0.0;
  CHECK(stable_dt(s, c, 0.0001) == doctest::Approx(1e-4).epsilon(1e-12));
}

TEST_CASE("validate rejects bad configs") {
  auto c = base_config();
  c.a = -1.0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c = base_config();
  c.theta0 = flat(-0.1);
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c = base_config();
  c.safety = 1.5;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c = base_config();
  c.blowup.theta_cap = 0.0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c = base_config();
  c.u0.kind = FieldProfile::Kind::Tabulated;
  c.u0.values = {1.0, 2.0};
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  CHECK_NOTHROW(validate(base_config()));
}

TEST_CASE("initial state uses v0 = u0t + a u0") {
  auto c = base_config(16);
  c.a = 0.5;
  c.u0 = cosine(1.0, 0.3);
  c.ut0 = cosine(0.2, 0.1, 2);
  const State s = initial_state(c);
  for (int i = 0; i < 16; ++i) {
    const double x = c.grid.x(i);
    const double u = 1.0 + 0.3 * std::cos(kPi * x);
    const double ut = 0.2 + 0.1 * std::cos(2 * kPi * x);
    CHECK(s.u[i] == doctest::Approx(u).epsilon(1e-15));
    CHECK(s.v[i] == doctest::Approx(ut + 0.5 * u).epsilon(1e-15));
  }
}

TEST_CASE("packet profile is compactly supported and smooth at the walls") {
  FieldProfile p;
  p.kind = FieldProfile::Kind::Packet;
  p.amplitude = 2.0;
  const Grid g(1.0, 64);
  const auto v = p.sample(g);
  CHECK(v[0] == 0.0);
  CHECK(v[63] == 0.0);
  CHECK(*std::max_element(v.begin(), v.end()) <= 2.0);
  CHECK(*std::max_element(v.begin(), v.end()) > 1.9);
}

TEST_CASE("RK4 step: flat steady state is unchanged") {
  auto c = base_config(32);
  c.scheme = Scheme::RK4;
  c.u0 = flat(1.0);
  c.theta0 = flat(0.5);
  State s = initial_state(c);
  const State s0 = s;
  TimeStepper stepper(c);
  for (int k = 0; k < 200 && s.t < c.t_end; ++k) {
    const auto out = stepper.step(s, c.t_end);
    REQUIRE(out.status != StepStatus::BlownUp);
  }
  CHECK(max_diff(s.u, s0.u) < 1e-13);
  CHECK(max_diff(s.v, s0.v) < 1e-13);
  CHECK(max_diff(s.theta, s0.theta) < 1e-13);
}

TEST_CASE("RK4 step: flat moving state follows u0 + c t") {
  auto c = base_config(32);
  c.scheme = Scheme::RK4;
  c.u0 = flat(0.3);
  c.ut0 = flat(1.7);
  c.t_end = 0.05;
  const auto run = simulate(c);
  REQUIRE(run.outcome.status == StepStatus::Finished);
  CHECK(run.final_state.t == doctest::Approx(0.05).epsilon(1e-15));
  for (double u : run.final_state.u) CHECK(std::abs(u - (0.3 + 1.7 * 0.05)) < 1e-10);
  const auto [next, out] = step(initial_state(c), c);
  CHECK(out.status == StepStatus::Accepted);
  for (double u : next.u) CHECK(std::abs(u - (0.3 + 1.7 * out.dt_used)) < 1e-12);
}

TEST_CASE("IMEX step: flat moving state follows u0 + c t") {
  auto c = base_config(32);
  c.scheme = Scheme::IMEX;
  c.u0 = flat(0.3);
  c.ut0 = flat(1.7);
  c.t_end = 0.05;
  const auto run = simulate(c);
  REQUIRE(run.outcome.status == StepStatus::Finished);
  for (double u : run.final_state.u) CHECK(std::abs(u - (0.3 + 1.7 * 0.05)) < 1e-10);
}

TEST_CASE("simulate: bounded run with saturating gamma") {
  for (Scheme scheme : {Scheme::RK4, Scheme::IMEX}) {
    auto c = base_config(64);
    c.scheme = scheme;
    c.u0 = cosine(0.0, 2.0);
    c.ut0 = cosine(0.25, 1.0);
    c.theta0 = flat(0.2);
    c.t_end = 0.5;
    const auto run = simulate(c);
    CAPTURE(to_string(scheme));
    CHECK(run.outcome.status == StepStatus::Finished);
    CHECK(run.final_state.t == doctest::Approx(0.5));
    CHECK(run.monitor_max < 1e3);
    CHECK(run.min_theta_seen >= -1e-12);
    CHECK(run.max_theta_mass_drop <= 1e-12);
    const auto& rows = run.series.rows;
    REQUIRE(rows.size() == 51);
    for (std::size_t k = 1; k < rows.size(); ++k) {
      CHECK(rows[k].t > rows[k - 1].t);
      CHECK(std::abs(rows[k].mass_ut - rows[0].mass_ut) <= 1e-8 * std::max(1.0, std::abs(rows[0].mass_ut)));
      CHECK(std::abs(rows[k].mass_u - rows[0].mass_u - rows[k].t * rows[0].mass_ut) <= 1e-8);
      // RK4 matches the trapezoid heat quadrature at every cadence point; the
      // implicit-explicit stages only over the whole run.
      const double gain = rows[k].mass_theta - rows[0].mass_theta;
      if (scheme == Scheme::RK4 || k + 1 == rows.size()) {
        CHECK(std::abs(gain - rows[k].heat_in) <= 1e-4 * std::abs(rows[k].heat_in) + 1e-14);
      }
    }
    for (double th : run.final_state.theta) CHECK(th >= 0.0);
  }
}

TEST_CASE("simulate: flat data give identically zero norms") {
  auto c = base_config(32);
  c.u0 = flat(2.0);
  c.theta0 = flat(1.0);
  const auto run = simulate(c);
  for (const auto& r : run.series.rows) {
    CHECK(r.ux_l2 == 0.0);
    CHECK(r.vx_linf == 0.0);
    CHECK(r.thetax_l2 == 0.0);
    CHECK(r.y_B == 0.0);
    CHECK(r.diss_vxx == 0.0);
    CHECK(r.heat_in == 0.0);
  }
}

TEST_CASE("simulate: second-order spatial convergence of the final state") {
  auto final_u = [](int n) {
    auto c = base_config(n);
    c.scheme = Scheme::RK4;
    c.u0 = cosine(0.0, 0.5);
    c.ut0 = cosine(0.0, 0.5);
    c.theta0 = cosine(0.5, 0.2);
    c.t_end = 0.05;
    c.diag_interval = 0.05;
    return simulate(c).final_state;
  };
  const State s1 = final_u(32), s2 = final_u(64), s3 = final_u(128);
  const double d12 = max_diff(s1.u, restrict2(s2.u)) + max_diff(s1.theta, restrict2(s2.theta));
  const double d23 = max_diff(s2.u, restrict2(s3.u)) + max_diff(s2.theta, restrict2(s3.theta));
  CHECK(d12 / d23 == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("simulate is deterministic") {
  auto c = base_config(64);
  c.u0 = cosine(0.0, 1.0);
  c.ut0 = cosine(0.1, 1.0);
  c.theta0 = flat(0.3);
  c.t_end = 0.3;
  const auto a = simulate(c);
  const auto b = simulate(c);
  CHECK(a.series == b.series);
  CHECK(a.final_state.theta == b.final_state.theta);
}

TEST_CASE("manufactured forcing") {
  auto c = base_config(32);
  c.a = 0.5;
  // Zero target, zero forcing.
  ManufacturedForcing zero(cosine_decay_target(0.0, 0.0, 0.0, 1.0, 1.0), c);
  const auto f0 = zero.evaluate(0.3);
  for (int i = 0; i < 32; ++i) {
    CHECK(f0.fv[i] == 0.0);
    CHECK(f0.ftheta[i] == 0.0);
  }
  // Flat exact solution needs no forcing.
  ManufacturedForcing fl(flat_target(0.2, 1.0, 0.7), c);
  const auto f1 = fl.evaluate(0.4);
  for (int i = 0; i < 32; ++i) {
    CHECK(std::abs(f1.fv[i]) < 1e-14);
    CHECK(std::abs(f1.ftheta[i]) < 1e-14);
  }
  // Constant in x, u* = t^2, theta* = 1 + t: f_v = u*_tt = 2, f_theta = 1.
  ManufacturedTarget t;
  auto zero_f = [](double, double) { return 0.0; };
  t.u = [](double, double s) { return s * s; };
  t.u_t = [](double, double s) { return 2 * s; };
  t.u_tt = [](double, double) { return 2.0; };
  t.u_x = t.u_xt = t.u_xx = t.u_xxt = zero_f;
  t.theta = [](double, double s) { return 1 + s; };
  t.theta_t = [](double, double) { return 1.0; };
  t.theta_x = t.theta_xx = zero_f;
  ManufacturedForcing q(t, c);
  const auto f2 = q.evaluate(0.7);
  for (int i = 0; i < 32; ++i) {
    CHECK(f2.fv[i] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(f2.ftheta[i] == doctest::Approx(1.0).epsilon(1e-14));
  }
  // Targets with a wall gradient are rejected.
  ManufacturedTarget bad = t;
  bad.u_x = [](double, double) { return 1.0; };
  CHECK_THROWS_AS(ManufacturedForcing(bad, c), std::invalid_argument);
}

TEST_CASE("manufactured solution: L2 error ratio per halving in [3.5, 4.5]") {
  auto err = [](int n) {
    auto c = base_config(n);
    c.scheme = Scheme::RK4;
    c.a = 0.5;
    c.t_end = 0.01;
    c.diag_interval = 0.01;
    ManufacturedForcing f(cosine_decay_target(1.0, 1.0, 0.1, 1.0, 1.0), c);
    const auto run = simulate(c, &f);
    const State ex = f.exact_state(run.final_state.t);
    double e = 0.0;
    for (int i = 0; i < n; ++i) e += std::pow(run.final_state.u[i] - ex.u[i], 2) * c.grid.dx();
    return std::sqrt(e);
  };
  const double e1 = err(16), e2 = err(32), e3 = err(64);
  CHECK(e1 / e2 >= 3.5);
  CHECK(e1 / e2 <= 4.5);
  CHECK(e2 / e3 >= 3.5);
  CHECK(e2 / e3 <= 4.5);
}

TEST_CASE("blow-up detector fires and restores the pre-step state") {
  auto c = base_config(256);
  c.scheme = Scheme::RK4;
  c.gamma = GammaModel::power(1.0, 2.0);
  c.D = 0.1;
  c.u0.kind = FieldProfile::Kind::Packet;
  c.u0.amplitude = 2.0;
  c.theta0 = flat(0.1);
  c.t_end = 1.0;
  c.blowup.theta_cap = 1e2;
  c.blowup.w12_cap = 1e4;
  const auto run = simulate(c);
  REQUIRE(run.outcome.status == StepStatus::BlownUp);
  CHECK(run.outcome.reason == BlowupReason::ThetaCap);
  CHECK(run.outcome.monitor_value > 1e2);
  CHECK(run.final_state.t < c.t_end);
  for (double th : run.final_state.theta) CHECK(th <= 1e2);
}

TEST_CASE("dt underflow is reported as blow-up") {
  auto c = base_config(64);
  c.scheme = Scheme::RK4;
  c.u0 = cosine(0.0, 1.0);
  c.blowup.dt_min = 1.0;
  const auto [s, out] = step(initial_state(c), c);
  CHECK(out.status == StepStatus::BlownUp);
  CHECK(out.reason == BlowupReason::DtUnderflow);
  CHECK(s.t == 0.0);
}
