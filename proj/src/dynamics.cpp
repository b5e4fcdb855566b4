#include "ptplaq/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>

#include "ptplaq/errors.hpp"
#include "ptplaq/stability.hpp"

namespace ptplaq {

namespace {

bool finite_state(const StateVector& u) {
  return std::all_of(u.begin(), u.end(), [](cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

double max_amplitude(const StateVector& u) {
  double m = 0.0;
  for (const auto& z : u) m = std::max(m, std::abs(z));
  return m;
}

StateVector axpy(const StateVector& x, cplx a, const StateVector& y) {
  StateVector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + a * y[i];
  return out;
}

StateVector rk4_step(const PlaquetteConfig& cfg, const StateVector& u, double h) {
  const StateVector k1 = rhs(cfg, u);
  const StateVector k2 = rhs(cfg, axpy(u, 0.5 * h, k1));
  const StateVector k3 = rhs(cfg, axpy(u, 0.5 * h, k2));
  const StateVector k4 = rhs(cfg, axpy(u, h, k3));
  StateVector out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

StateVector normalized(StateVector v) {
  const double n = vector_norm(v);
  if (n > 0.0)
    for (auto& z : v) z /= n;
  return v;
}

// Three-point derivative weights on a possibly non-uniform stencil
// (x0, x1, x2), evaluated at x = x[at].
std::array<double, 3> derivative_weights(double x0, double x1, double x2, int at) {
  const double x = at == 0 ? x0 : (at == 1 ? x1 : x2);
  return {((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2)), ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2)),
          ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1))};
}

template <typename T>
std::vector<T> time_derivative(const std::vector<double>& t, const std::vector<T>& f) {
  const std::size_t n = t.size();
  std::vector<T> d(n, T{});
  if (n < 2) return d;
  if (n == 2) {
    d[0] = d[1] = (f[1] - f[0]) / (t[1] - t[0]);
    return d;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = std::clamp<std::size_t>(i, 1, n - 2);
    const int at = static_cast<int>(i + 1 - c);
    const auto w = derivative_weights(t[c - 1], t[c], t[c + 1], at);
    d[i] = w[0] * f[c - 1] + w[1] * f[c] + w[2] * f[c + 1];
  }
  return d;
}

}  // namespace

Trajectory integrate(const PlaquetteConfig& cfg, const StateVector& u0, double t_end, double dt, std::size_t stride,
                     double cap) {
  validate_state(cfg, u0);
  if (!(dt > 0.0) || !(t_end > 0.0)) throw PreconditionError("integrate: dt and t_end must be positive");
  if (stride == 0) throw PreconditionError("integrate: stride must be positive");

  // Shrink dt so that an integer number of steps lands on t_end.
  const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
  const double h = t_end / static_cast<double>(steps);

  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(u0);
  StateVector u = u0;
  for (std::size_t i = 1; i <= steps; ++i) {
    StateVector next = rk4_step(cfg, u, h);
    const double t = static_cast<double>(i) * h;
    if (!finite_state(next)) {
      std::ostringstream msg;
      msg << "integrate: non-finite state after t=" << t - h;
      throw NumericalError(msg.str(), t - h);
    }
    u = std::move(next);
    if (max_amplitude(u) > cap) {
      traj.times.push_back(t);
      traj.states.push_back(u);
      traj.blew_up = true;
      traj.blowup_time = t;
      break;
    }
    if (i % stride == 0 || i == steps) {
      traj.times.push_back(t);
      traj.states.push_back(u);
    }
  }
  return traj;
}

std::vector<StabilityMode> stability_modes(const PlaquetteConfig& cfg, double E, const StateVector& u0) {
  const ComplexMatrix b = linearization_matrix(cfg, E, u0);
  const std::size_t dim = b.rows();
  const std::size_t n = dim / 2;
  const StabilitySpectrum spec = stability_spectrum(b);
  const double zero_cut = kZeroModeTol * spec.scale;

  std::vector<cplx> lambdas;
  for (const auto& l : spec.lambdas)
    if (std::abs(l) > zero_cut) lambdas.push_back(l);
  std::stable_sort(lambdas.begin(), lambdas.end(), [](cplx a, cplx b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() > b.imag();
  });

  const double bnorm = std::max(b.norm(), 1e-300);
  std::vector<StabilityMode> modes;
  for (const auto& lambda : lambdas) {
    // B x = mu x with mu = i lambda; inverse iteration from a fixed start.
    const cplx mu = cplx{0.0, 1.0} * lambda;
    const cplx shift = mu + 1e-9 * bnorm * cplx{1.0, 1.0};
    const ComplexMatrix m = b - ComplexMatrix::identity(dim) * shift;
    CVector x(dim);
    for (std::size_t i = 0; i < dim; ++i) x[i] = cplx{1.0 + 0.1 * static_cast<double>(i), 0.05 * static_cast<double>(i)};
    x = normalized(std::move(x));
    for (int it = 0; it < 4; ++it) x = normalized(solve_linear(m, x));

    StateVector plus(n), minus(n);
    for (std::size_t i = 0; i < n; ++i) {
      plus[i] = x[i] + std::conj(x[n + i]);
      minus[i] = cplx{0.0, 1.0} * (x[i] - std::conj(x[n + i]));
    }
    StateVector dir = vector_norm(plus) >= vector_norm(minus) ? plus : minus;
    modes.push_back({lambda, normalized(std::move(dir))});
  }
  return modes;
}

StateVector perturb(const StateVector& u0, const PerturbationSpec& spec) {
  if (!(spec.delta >= 0.0)) throw PreconditionError("perturb: delta must be nonnegative");
  const std::size_t n = u0.size();
  StateVector dir(n);
  switch (spec.mode) {
    case PerturbationMode::uniform:
      std::fill(dir.begin(), dir.end(), cplx{1.0 / std::sqrt(static_cast<double>(n)), 0.0});
      break;
    case PerturbationMode::random: {
      std::mt19937_64 rng(spec.seed);
      std::uniform_real_distribution<double> dist(-1.0, 1.0);
      for (auto& z : dir) {
        const double re = dist(rng);
        const double im = dist(rng);
        z = {re, im};
      }
      dir = normalized(std::move(dir));
      break;
    }
    case PerturbationMode::eigenmode:
      throw PreconditionError("perturb: eigenmode perturbations need the plaquette and E");
  }
  StateVector out = u0;
  for (std::size_t i = 0; i < n; ++i) out[i] += spec.delta * dir[i];
  return out;
}

StateVector perturb(const PlaquetteConfig& cfg, double E, const StateVector& u0, const PerturbationSpec& spec) {
  if (spec.mode != PerturbationMode::eigenmode) return perturb(u0, spec);
  if (!(spec.delta >= 0.0)) throw PreconditionError("perturb: delta must be nonnegative");
  const auto modes = stability_modes(cfg, E, u0);
  if (spec.index >= modes.size()) {
    throw PreconditionError("perturb: eigenmode index " + std::to_string(spec.index) + " out of range (" +
                            std::to_string(modes.size()) + " nonzero modes)");
  }
  StateVector out = u0;
  const auto& dir = modes[spec.index].direction;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += spec.delta * dir[i];
  return out;
}

void diagnostics(Trajectory& traj, const PlaquetteConfig& cfg, const ParityOperator& p) {
  if (traj.states.empty()) throw PreconditionError("diagnostics: empty trajectory");
  const std::size_t n = cfg.sites();
  if (p.matrix.rows() != n) throw DimensionError("diagnostics: parity operator does not match the plaquette");
  const auto signs = gain_loss_signs(cfg.kind);

  const std::size_t samples = traj.states.size();
  traj.diagnostics.assign(samples, {});
  std::vector<double> power(samples);
  std::vector<cplx> pt(samples);
  std::vector<double> power_rate(samples);
  std::vector<cplx> pt_rate(samples);

  for (std::size_t s = 0; s < samples; ++s) {
    const StateVector& u = traj.states[s];
    Diagnostics& d = traj.diagnostics[s];
    d.per_site_power.resize(n);
    double gain = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d.per_site_power[i] = std::norm(u[i]);
      d.total_power += d.per_site_power[i];
      gain += signs[i] * d.per_site_power[i];
    }
    const CVector pu = p.matrix * u;
    for (std::size_t i = 0; i < n; ++i) d.pt_inner_product += std::conj(u[i]) * pu[i];
    power[s] = d.total_power;
    pt[s] = d.pt_inner_product;

    // d|u|^2/dt = 2 gamma sum_n s_n |u_n|^2
    power_rate[s] = 2.0 * cfg.gamma * gain;
    // d(u^dagger P u)/dt = i u^dagger (N P - P N) u with N = -diag|u|^2
    cplx rate{};
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const cplx pij = p.matrix(i, j);
        if (pij == cplx{}) continue;
        rate += std::conj(u[i]) * pij * u[j] * (-std::norm(u[i]) + std::norm(u[j]));
      }
    pt_rate[s] = cplx{0.0, 1.0} * rate;
  }

  const auto dpower = time_derivative(traj.times, power);
  const auto dpt = time_derivative(traj.times, pt);
  for (std::size_t s = 0; s < samples; ++s) {
    traj.diagnostics[s].power_balance_residual = std::abs(dpower[s] - power_rate[s]);
    traj.diagnostics[s].pt_balance_residual = std::abs(dpt[s] - pt_rate[s]);
  }
}

}  // namespace ptplaq
