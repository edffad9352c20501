#include "thermovisco/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "tridiagonal.hpp"

namespace thermovisco {
namespace {

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

// Diagonally implicit weight of the IMEX-SSP2(2,2,2) pair.
const double kImexGamma = 1.0 - 1.0 / std::numbers::sqrt2;

}  // namespace

// ---------------------------------------------------------------------------
// Initial data

std::string to_string(FieldProfile::Kind kind) {
  switch (kind) {
    case FieldProfile::Kind::Flat:
      return "flat";
    case FieldProfile::Kind::CosineBump:
      return "cosine_bump";
    case FieldProfile::Kind::Packet:
      return "packet";
    case FieldProfile::Kind::Tabulated:
      return "tabulated";
  }
  return "?";
}

FieldProfile::Kind profile_kind_from_string(const std::string& name) {
  if (name == "flat") return FieldProfile::Kind::Flat;
  if (name == "cosine_bump") return FieldProfile::Kind::CosineBump;
  if (name == "packet") return FieldProfile::Kind::Packet;
  if (name == "tabulated") return FieldProfile::Kind::Tabulated;
  throw std::invalid_argument("unknown initial profile '" + name + "'");
}

std::vector<double> FieldProfile::sample(const Grid& grid) const {
  const int n = grid.n_cells();
  const double L = grid.length();
  std::vector<double> out(static_cast<std::size_t>(n), mean);
  switch (kind) {
    case Kind::Flat:
      break;
    case Kind::CosineBump:
      require(mode >= 0, "cosine_bump mode must be >= 0");
      for (int i = 0; i < n; ++i) {
        out[i] += amplitude * std::cos(mode * std::numbers::pi * grid.x(i) / L);
      }
      break;
    case Kind::Packet: {
      const double c = center < 0.0 ? 0.5 * L : center;
      const double w = width <= 0.0 ? 0.25 * L : width;
      require(c - w >= 0.0 && c + w <= L, "packet support must lie inside the domain");
      for (int i = 0; i < n; ++i) {
        const double s = (grid.x(i) - c) / w;
        if (std::abs(s) < 1.0) out[i] += amplitude * std::exp(1.0 - 1.0 / (1.0 - s * s));
      }
      break;
    }
    case Kind::Tabulated:
      require(values.size() == out.size(), "tabulated profile needs one value per grid cell (" +
                                               std::to_string(n) + "), got " +
                                               std::to_string(values.size()));
      out = values;
      break;
  }
  for (const double x : out) require(std::isfinite(x), "initial profile has non-finite values");
  return out;
}

std::string to_string(Scheme s) { return s == Scheme::RK4 ? "rk4" : "imex"; }

void validate(const SimulationConfig& c) {
  require(positive_finite(c.a), "a must be > 0");
  require(positive_finite(c.D), "D must be > 0");
  require(positive_finite(c.t_end), "time.t_end must be > 0");
  require(c.safety > 0.0 && c.safety <= 1.0, "time.safety must lie in (0, 1]");
  require(positive_finite(c.dt_max), "time.dt_max must be > 0");
  require(positive_finite(c.growth_limit), "time.growth_limit must be > 0");
  require(positive_finite(c.blowup.theta_cap), "blowup.theta_cap must be > 0");
  require(positive_finite(c.blowup.w12_cap), "blowup.w12_cap must be > 0");
  require(c.blowup.dt_min < 0.0 || positive_finite(c.blowup.dt_min),
          "blowup.dt_min must be > 0");
  require(positive_finite(c.diag_interval), "diagnostics.interval must be > 0");
  if (c.B) require(positive_finite(*c.B), "diagnostics.B must be > 0");
  (void)c.u0.sample(c.grid);
  (void)c.ut0.sample(c.grid);
  for (const double th : c.theta0.sample(c.grid)) require(th >= 0.0, "theta0 must be >= 0");
}

State initial_state(const SimulationConfig& config) {
  State s;
  s.t = 0.0;
  s.u = config.u0.sample(config.grid);
  const auto ut = config.ut0.sample(config.grid);
  s.v.resize(s.u.size());
  for (std::size_t i = 0; i < s.u.size(); ++i) s.v[i] = ut[i] + config.a * s.u[i];
  s.theta = config.theta0.sample(config.grid);
  return s;
}

double default_functional_weight(const SimulationConfig& config) {
  const double gamma0 = config.gamma.value(0.0);
  const double lambda1 = poincare_lambda1(config.grid.length()).lambda1;
  try {
    return admissible_B(config.a, config.D, gamma0, lambda1).B_chosen;
  } catch (const DomainError&) {
    return gamma0 * config.a * lambda1 / (gamma0 + config.D);
  }
}

// ---------------------------------------------------------------------------
// Manufactured solutions

ManufacturedTarget cosine_decay_target(double amp_u, double theta_base, double amp_theta,
                                       double rate, double length) {
  const double k = std::numbers::pi / length;
  auto decay = [rate](double t) { return std::exp(-rate * t); };
  ManufacturedTarget m;
  m.u = [=](double x, double t) { return amp_u * std::cos(k * x) * decay(t); };
  m.u_t = [=](double x, double t) { return -rate * amp_u * std::cos(k * x) * decay(t); };
  m.u_tt = [=](double x, double t) { return rate * rate * amp_u * std::cos(k * x) * decay(t); };
  m.u_x = [=](double x, double t) { return -k * amp_u * std::sin(k * x) * decay(t); };
  m.u_xt = [=](double x, double t) { return rate * k * amp_u * std::sin(k * x) * decay(t); };
  m.u_xx = [=](double x, double t) { return -k * k * amp_u * std::cos(k * x) * decay(t); };
  m.u_xxt = [=](double x, double t) {
    return rate * k * k * amp_u * std::cos(k * x) * decay(t);
  };
  m.theta = [=](double x, double t) {
    return theta_base + amp_theta * std::cos(k * x) * decay(t);
  };
  m.theta_t = [=](double x, double t) {
    return -rate * amp_theta * std::cos(k * x) * decay(t);
  };
  m.theta_x = [=](double x, double t) { return -k * amp_theta * std::sin(k * x) * decay(t); };
  m.theta_xx = [=](double x, double t) {
    return -k * k * amp_theta * std::cos(k * x) * decay(t);
  };
  return m;
}

ManufacturedTarget flat_target(double u0, double c, double theta_const) {
  auto zero = [](double, double) { return 0.0; };
  ManufacturedTarget m;
  m.u = [=](double, double t) { return u0 + c * t; };
  m.u_t = [=](double, double) { return c; };
  m.u_tt = m.u_x = m.u_xt = m.u_xx = m.u_xxt = zero;
  m.theta = [=](double, double) { return theta_const; };
  m.theta_t = m.theta_x = m.theta_xx = zero;
  return m;
}

ManufacturedForcing::ManufacturedForcing(ManufacturedTarget target, const SimulationConfig& config)
    : target_(std::move(target)),
      grid_(config.grid),
      a_(config.a),
      D_(config.D),
      gamma_(config.gamma) {
  const double L = grid_.length();
  for (const double t : {0.0, 0.5 * config.t_end, config.t_end}) {
    for (const double x : {0.0, L}) {
      const double scale = 1.0 + std::abs(target_.u(x, t)) + std::abs(target_.theta(x, t));
      require(std::abs(target_.u_x(x, t)) <= 1e-10 * scale &&
                  std::abs(target_.u_xt(x, t)) <= 1e-10 * scale &&
                  std::abs(target_.theta_x(x, t)) <= 1e-10 * scale,
              "manufactured target violates the zero-flux boundary condition");
    }
  }
}

void ManufacturedForcing::evaluate(double t, ForcingFields& out) const {
  const int n = grid_.n_cells();
  out.fu.assign(static_cast<std::size_t>(n), 0.0);
  out.fv.resize(static_cast<std::size_t>(n));
  out.ftheta.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double x = grid_.x(i);
    const double u = target_.u(x, t);
    const double ut = target_.u_t(x, t);
    const double v = ut + a_ * u;
    const double vt = target_.u_tt(x, t) + a_ * ut;
    const double vx = target_.u_xt(x, t) + a_ * target_.u_x(x, t);
    const double vxx = target_.u_xxt(x, t) + a_ * target_.u_xx(x, t);
    const GammaValue g = gamma_.eval(target_.theta(x, t));
    const double uxt = target_.u_xt(x, t);
    out.fv[i] = vt - (g.d1 * target_.theta_x(x, t) * vx + g.value * vxx) - a_ * v + a_ * a_ * u;
    out.ftheta[i] = target_.theta_t(x, t) - D_ * target_.theta_xx(x, t) - g.value * uxt * uxt;
  }
}

ForcingFields ManufacturedForcing::evaluate(double t) const {
  ForcingFields f;
  evaluate(t, f);
  return f;
}

State ManufacturedForcing::exact_state(double t) const {
  State s;
  s.t = t;
  const int n = grid_.n_cells();
  for (int i = 0; i < n; ++i) {
    const double x = grid_.x(i);
    s.u.push_back(target_.u(x, t));
    s.v.push_back(target_.u_t(x, t) + a_ * target_.u(x, t));
    s.theta.push_back(target_.theta(x, t));
  }
  return s;
}

ManufacturedForcing manufactured_forcing(ManufacturedTarget target,
                                         const SimulationConfig& config) {
  return ManufacturedForcing(std::move(target), config);
}

// ---------------------------------------------------------------------------
// Time stepping

std::string to_string(StepStatus s) {
  switch (s) {
    case StepStatus::Accepted:
      return "accepted";
    case StepStatus::Finished:
      return "finished";
    case StepStatus::BlownUp:
      return "blown_up";
  }
  return "?";
}

std::string to_string(BlowupReason r) {
  switch (r) {
    case BlowupReason::None:
      return "none";
    case BlowupReason::ThetaCap:
      return "theta_cap";
    case BlowupReason::W12Cap:
      return "w12_cap";
    case BlowupReason::DtUnderflow:
      return "dt_underflow";
    case BlowupReason::NonFinite:
      return "non_finite";
  }
  return "?";
}

TimeStepper::TimeStepper(const SimulationConfig& config, const ManufacturedForcing* forcing)
    : config_(config), forcing_(forcing) {
  resize(static_cast<std::size_t>(config.grid.n_cells()));
}

void TimeStepper::resize(std::size_t n) {
  for (auto* s : {&k_[0], &k_[1], &k_[2], &k_[3], &stage_[0], &stage_[1], &expl_[0], &expl_[1],
                  &impl_[0], &impl_[1], &work_}) {
    s->u.assign(n, 0.0);
    s->v.assign(n, 0.0);
    s->theta.assign(n, 0.0);
  }
  grad_u_.assign(n, 0.0);
  grad_v_.assign(n, 0.0);
  face_gamma_.assign(n, 0.0);
  lower_.assign(n, 0.0);
  diag_.assign(n, 0.0);
  upper_.assign(n, 0.0);
  scratch_.assign(n, 0.0);
}

// face_gamma_[i] is the coefficient on the face between nodes i and i+1.
void TimeStepper::apply_conduction(const std::vector<double>& theta,
                                   const std::vector<double>& field, std::vector<double>& out) {
  const std::size_t n = field.size();
  const double inv = 1.0 / (config_.grid.dx() * config_.grid.dx());
  double flux_left = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    face_gamma_[i] = config_.gamma.value(std::max(0.5 * (theta[i] + theta[i + 1]), 0.0));
    const double flux_right = face_gamma_[i] * (field[i + 1] - field[i]);
    out[i] = (flux_right - flux_left) * inv;
    flux_left = flux_right;
  }
  out[n - 1] = -flux_left * inv;
}

void TimeStepper::apply_heat_diffusion(const std::vector<double>& theta,
                                       std::vector<double>& out) const {
  second_difference(theta, config_.grid.dx(), out);
  for (auto& x : out) x *= config_.D;
}

void TimeStepper::explicit_part(double t, const Stage& y, Stage& out) {
  const double a = config_.a;
  const double dx = config_.grid.dx();
  const std::size_t n = y.u.size();
  nodal_gradient(y.u, dx, grad_u_);
  nodal_gradient(y.v, dx, grad_v_);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = grad_v_[i] - a * grad_u_[i];
    out.u[i] = y.v[i] - a * y.u[i];
    out.v[i] = a * y.v[i] - a * a * y.u[i];
    out.theta[i] = config_.gamma.value(std::max(y.theta[i], 0.0)) * w * w;
  }
  if (forcing_ != nullptr) {
    if (!(t == forcing_time_)) {
      forcing_->evaluate(t, forcing_values_);
      forcing_time_ = t;
    }
    for (std::size_t i = 0; i < n; ++i) {
      out.u[i] += forcing_values_.fu[i];
      out.v[i] += forcing_values_.fv[i];
      out.theta[i] += forcing_values_.ftheta[i];
    }
  }
}

void TimeStepper::rhs(const State& state, Derivatives& out) {
  const std::size_t n = state.u.size();
  for (const auto* f : {&state.u, &state.v, &state.theta}) {
    for (const double x : *f) {
      if (!std::isfinite(x)) throw SolverError("discrete_rhs: non-finite state value");
    }
  }
  out.du.resize(n);
  out.dv.resize(n);
  out.dtheta.resize(n);
  work_.u = state.u;
  work_.v = state.v;
  work_.theta = state.theta;
  Stage e;
  e.u.resize(n);
  e.v.resize(n);
  e.theta.resize(n);
  explicit_part(state.t, work_, e);
  apply_conduction(state.theta, state.v, out.dv);
  apply_heat_diffusion(state.theta, out.dtheta);
  for (std::size_t i = 0; i < n; ++i) {
    out.du[i] = e.u[i];
    out.dv[i] += e.v[i];
    out.dtheta[i] += e.theta[i];
  }
}

// Solves (I - coeff (gamma(theta) w_x)_x) w = rhs in place.
void TimeStepper::solve_conduction(const std::vector<double>& theta, double coeff,
                                   std::vector<double>& rhs) {
  const std::size_t n = rhs.size();
  const double c = coeff / (config_.grid.dx() * config_.grid.dx());
  for (std::size_t i = 0; i + 1 < n; ++i) {
    face_gamma_[i] = config_.gamma.value(std::max(0.5 * (theta[i] + theta[i + 1]), 0.0));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double gl = i > 0 ? face_gamma_[i - 1] : 0.0;
    const double gr = i + 1 < n ? face_gamma_[i] : 0.0;
    lower_[i] = -c * gl;
    upper_[i] = -c * gr;
    diag_[i] = 1.0 + c * (gl + gr);
  }
  detail::solve_tridiagonal(lower_, diag_, upper_, rhs, scratch_);
}

void TimeStepper::solve_heat(double coeff, std::vector<double>& rhs) {
  const std::size_t n = rhs.size();
  const double c = coeff * config_.D / (config_.grid.dx() * config_.grid.dx());
  for (std::size_t i = 0; i < n; ++i) {
    const double gl = i > 0 ? 1.0 : 0.0;
    const double gr = i + 1 < n ? 1.0 : 0.0;
    lower_[i] = -c * gl;
    upper_[i] = -c * gr;
    diag_[i] = 1.0 + c * (gl + gr);
  }
  detail::solve_tridiagonal(lower_, diag_, upper_, rhs, scratch_);
}

// Solves y = base + coeff I(y) for theta, then for v with gamma of the new
// theta. On return rate holds I(y) and y the stage values.
void TimeStepper::implicit_stage(const std::vector<double>& theta_base,
                                 const std::vector<double>& v_base, double coeff, Stage& y,
                                 Stage& rate) {
  const std::size_t n = theta_base.size();
  apply_heat_diffusion(theta_base, rate.theta);
  solve_heat(coeff, rate.theta);
  for (std::size_t i = 0; i < n; ++i) y.theta[i] = theta_base[i] + coeff * rate.theta[i];
  apply_conduction(y.theta, v_base, rate.v);
  solve_conduction(y.theta, coeff, rate.v);
  for (std::size_t i = 0; i < n; ++i) y.v[i] = v_base[i] + coeff * rate.v[i];
}

double TimeStepper::proposed_dt(const State& state, double next_stop) const {
  (void)next_stop;
  double dt = 0.0;
  if (config_.scheme == Scheme::RK4) {
    dt = stable_dt(state, config_);
  } else {
    // Implicit diffusion removes the parabolic limit; the explicit heat
    // source still bounds how fast theta may grow within one step.
    const double dx = config_.grid.dx();
    const double a = config_.a;
    const auto& u = state.u;
    const auto& v = state.v;
    const std::size_t n = u.size();
    double max_source = 0.0;
    double theta_max = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t l = i > 0 ? i - 1 : 0;
      const std::size_t r = i + 1 < n ? i + 1 : n - 1;
      const double w = ((v[r] - v[l]) - a * (u[r] - u[l])) * (0.5 / dx);
      const double th = std::max(state.theta[i], 0.0);
      max_source = std::max(max_source, config_.gamma.value(th) * w * w);
      theta_max = std::max(theta_max, th);
    }
    dt = config_.dt_max;
    if (max_source > 0.0) dt = std::min(dt, config_.growth_limit * (1.0 + theta_max) / max_source);
  }
  return dt;
}

void TimeStepper::step_rk4(State& s, double dt) {
  static constexpr double kNodes[4] = {0.0, 0.5, 0.5, 1.0};
  const std::size_t n = s.u.size();
  State y = s;
  for (int k = 0; k < 4; ++k) {
    if (k > 0) {
      const double h = kNodes[k] * dt;
      for (std::size_t i = 0; i < n; ++i) {
        y.u[i] = s.u[i] + h * k_[k - 1].u[i];
        y.v[i] = s.v[i] + h * k_[k - 1].v[i];
        y.theta[i] = s.theta[i] + h * k_[k - 1].theta[i];
      }
    }
    y.t = s.t + kNodes[k] * dt;
    rhs(y, deriv_);
    k_[k].u.swap(deriv_.du);
    k_[k].v.swap(deriv_.dv);
    k_[k].theta.swap(deriv_.dtheta);
  }
  const double w = dt / 6.0;
  for (std::size_t i = 0; i < n; ++i) {
    s.u[i] += w * (k_[0].u[i] + 2.0 * k_[1].u[i] + 2.0 * k_[2].u[i] + k_[3].u[i]);
    s.v[i] += w * (k_[0].v[i] + 2.0 * k_[1].v[i] + 2.0 * k_[2].v[i] + k_[3].v[i]);
    s.theta[i] +=
        w * (k_[0].theta[i] + 2.0 * k_[1].theta[i] + 2.0 * k_[2].theta[i] + k_[3].theta[i]);
  }
}

// IMEX-SSP2(2,2,2): explicit tableau [[0,0],[1,0]], implicit
// [[g,0],[1-2g,g]], weights (1/2, 1/2). The conduction term and D theta_xx are
// implicit; the exchange terms and the heat source are explicit. Each stage
// solves theta first so the conduction coefficient gamma(theta) is the
// stage's own temperature.
void TimeStepper::step_imex(State& s, double dt) {
  const double g = kImexGamma;
  const std::size_t n = s.u.size();
  Stage& y1 = stage_[0];
  Stage& y2 = stage_[1];

  // Stage 1: y1 = y_n + g dt I(y1). Each implicit solve returns I(y)
  // directly, so the update never differences two nearly equal states.
  implicit_stage(s.theta, s.v, g * dt, y1, impl_[0]);
  y1.u = s.u;
  explicit_part(s.t, y1, expl_[0]);

  // Stage 2: y2 = y_n + dt E(y1) + dt ((1-2g) I(y1) + g I(y2)).
  for (std::size_t i = 0; i < n; ++i) {
    work_.theta[i] = s.theta[i] + dt * (expl_[0].theta[i] + (1.0 - 2.0 * g) * impl_[0].theta[i]);
    work_.v[i] = s.v[i] + dt * (expl_[0].v[i] + (1.0 - 2.0 * g) * impl_[0].v[i]);
    y2.u[i] = s.u[i] + dt * expl_[0].u[i];
  }
  implicit_stage(work_.theta, work_.v, g * dt, y2, impl_[1]);
  explicit_part(s.t + dt, y2, expl_[1]);

  const double h = 0.5 * dt;
  for (std::size_t i = 0; i < n; ++i) {
    s.u[i] += h * (expl_[0].u[i] + expl_[1].u[i]);
    s.v[i] += h * (expl_[0].v[i] + expl_[1].v[i] + impl_[0].v[i] + impl_[1].v[i]);
    s.theta[i] +=
        h * (expl_[0].theta[i] + expl_[1].theta[i] + impl_[0].theta[i] + impl_[1].theta[i]);
  }
}

StepOutcome TimeStepper::check_monitors(State& candidate, const State& before, double dt) {
  StepOutcome out;
  out.dt_used = dt;
  const double dx = config_.grid.dx();
  const double a = config_.a;
  const std::size_t n = candidate.u.size();
  bool finite = true;
  double theta_max = 0.0, theta_min = 0.0;
  double ut2 = 0.0, uxt2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = candidate.u[i], v = candidate.v[i], th = candidate.theta[i];
    if (!std::isfinite(u) || !std::isfinite(v) || !std::isfinite(th)) {
      finite = false;
      break;
    }
    theta_max = std::max(theta_max, th);
    theta_min = std::min(theta_min, th);
    const std::size_t l = i > 0 ? i - 1 : 0;
    const std::size_t r = i + 1 < n ? i + 1 : n - 1;
    const double w = ((candidate.v[r] - candidate.v[l]) - a * (candidate.u[r] - candidate.u[l])) *
                     (0.5 / dx);
    const double ut = v - a * u;
    ut2 += ut * ut;
    uxt2 += w * w;
  }
  const double monitor = std::sqrt((ut2 + uxt2) * dx) + theta_max;
  out.monitor_value = monitor;
  if (!finite || !std::isfinite(monitor)) {
    out.status = StepStatus::BlownUp;
    out.reason = BlowupReason::NonFinite;
    out.monitor_value = std::numeric_limits<double>::infinity();
  } else if (theta_max > config_.blowup.theta_cap) {
    out.status = StepStatus::BlownUp;
    out.reason = BlowupReason::ThetaCap;
    out.monitor_value = theta_max;
  } else if (monitor > config_.blowup.w12_cap) {
    out.status = StepStatus::BlownUp;
    out.reason = BlowupReason::W12Cap;
  }
  monitor_ = out.reason == BlowupReason::NonFinite ? out.monitor_value : monitor;
  if (out.status == StepStatus::BlownUp) {
    candidate = before;
    return out;
  }
  min_theta_ = theta_min;
  if (theta_min < -1e-12) {
    throw SolverError("temperature dropped below zero (" + std::to_string(theta_min) +
                      ") at t = " + std::to_string(candidate.t));
  }
  for (auto& th : candidate.theta) th = std::max(th, 0.0);
  return out;
}

StepOutcome TimeStepper::step(State& state, double next_stop) {
  const double natural = proposed_dt(state, next_stop);
  if (natural < config_.dt_min()) {
    StepOutcome out;
    out.status = StepStatus::BlownUp;
    out.reason = BlowupReason::DtUnderflow;
    out.dt_used = natural;
    out.monitor_value = natural;
    return out;
  }
  const double remaining = next_stop - state.t;
  const bool lands = natural >= remaining;
  const double dt = lands ? remaining : natural;

  before_ = state;
  if (config_.scheme == Scheme::RK4) {
    step_rk4(state, dt);
  } else {
    step_imex(state, dt);
  }
  state.t = lands ? next_stop : before_.t + dt;
  StepOutcome out = check_monitors(state, before_, dt);
  if (out.status != StepStatus::BlownUp && state.t >= config_.t_end) {
    out.status = StepStatus::Finished;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Free-function entry points

Derivatives discrete_rhs(const State& state, const SimulationConfig& config,
                         const ManufacturedForcing* forcing) {
  if (state.u.size() != static_cast<std::size_t>(config.grid.n_cells()) ||
      state.v.size() != state.u.size() || state.theta.size() != state.u.size()) {
    throw std::invalid_argument("discrete_rhs: state does not match the grid");
  }
  TimeStepper stepper(config, forcing);
  Derivatives d;
  stepper.rhs(state, d);
  return d;
}

double stable_dt(const State& state, const SimulationConfig& config,
                 std::optional<double> next_stop) {
  double gmax = 0.0;
  for (const double th : state.theta) gmax = std::max(gmax, config.gamma.value(std::max(th, 0.0)));
  const double dx = config.grid.dx();
  double dt = config.safety * dx * dx / (2.0 * std::max(gmax, config.D));
  const double stop = next_stop.value_or(config.t_end);
  return std::min(dt, std::min(stop, config.t_end) - state.t);
}

std::pair<State, StepOutcome> step(const State& state, const SimulationConfig& config) {
  TimeStepper stepper(config);
  State next = state;
  StepOutcome out = stepper.step(next, config.t_end);
  return {std::move(next), out};
}

RunResult simulate(const SimulationConfig& config, const ManufacturedForcing* forcing) {
  validate(config);
  RunResult result;
  TimeStepper stepper(config, forcing);
  State state = forcing != nullptr ? forcing->exact_state(0.0) : initial_state(config);
  result.B = config.B.value_or(default_functional_weight(config));

  TrapezoidAccumulator heat, dissipation;
  auto record = [&](const Snapshot& snap, double dt) {
    DiagnosticsRow row = snap.row;
    row.dt = dt;
    row.diss_vxx = dissipation.total();
    row.heat_in = heat.total();
    result.series.rows.push_back(row);
    result.profile.push_back({state.t, snap.theta_min, snap.theta_max, snap.theta_mean});
  };

  Snapshot snap = take_snapshot(state, config.grid, config.gamma, config.a, config.D, result.B);
  heat.add(state.t, snap.heat_source);
  dissipation.add(state.t, snap.vxx_energy);
  record(snap, 0.0);
  result.monitor_initial = snap.ut_w12 + snap.theta_max;
  result.monitor_max = result.monitor_initial;

  double previous_mass = snap.row.mass_theta;
  long next_index = 1;
  auto output_time = [&](long k) { return std::min(k * config.diag_interval, config.t_end); };
  double next_out = output_time(next_index);
  const int n = config.grid.n_cells();
  std::vector<double> vxx(static_cast<std::size_t>(n)), src(static_cast<std::size_t>(n));

  while (state.t < config.t_end) {
    const StepOutcome out = stepper.step(state, next_out);
    result.outcome = out;
    if (out.status == StepStatus::BlownUp) {
      if (out.reason != BlowupReason::DtUnderflow) {
        result.monitor_max = std::max(result.monitor_max, stepper.last_monitor());
      }
      break;
    }
    ++result.accepted_steps;
    result.min_theta_seen = std::min(result.min_theta_seen, stepper.last_min_theta());
    result.monitor_max = std::max(result.monitor_max, stepper.last_monitor());

    second_difference(state.v, config.grid.dx(), vxx);
    heat_source(state, config.gamma, config.a, config.grid.dx(), src);
    double vxx_energy = 0.0;
    for (const double x : vxx) vxx_energy += x * x;
    heat.add(state.t, integrate(src, config.grid.dx()));
    const double theta_mass = integrate(state.theta, config.grid.dx());
    result.max_theta_mass_drop = std::max(result.max_theta_mass_drop, previous_mass - theta_mass);
    previous_mass = theta_mass;
    dissipation.add(state.t, vxx_energy * config.grid.dx());

    if (state.t >= next_out) {
      snap = take_snapshot(state, config.grid, config.gamma, config.a, config.D, result.B);
      record(snap, out.dt_used);
      ++next_index;
      next_out = output_time(next_index);
    }
  }
  result.final_state = std::move(state);
  return result;
}

}  // namespace thermovisco
