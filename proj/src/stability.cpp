#include "ptplaq/stability.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "ptplaq/errors.hpp"

namespace ptplaq {

namespace {

// Removes from `pool` the element nearest to `target` if it lies within
// `tol`; reports success.
bool take_nearest(std::vector<cplx>& pool, cplx target, double tol) {
  auto best = pool.end();
  double best_d = tol;
  for (auto it = pool.begin(); it != pool.end(); ++it) {
    const double d = std::abs(*it - target);
    if (d <= best_d) {
      best_d = d;
      best = it;
    }
  }
  if (best == pool.end()) return false;
  pool.erase(best);
  return true;
}

// Pairs each value with its partner -value; returns the number of pairs and
// leaves unmatched values in `pool`.
std::size_t count_pairs(std::vector<cplx>& pool, double match_tol) {
  std::size_t pairs = 0;
  std::vector<cplx> leftover;
  while (!pool.empty()) {
    const cplx z = pool.back();
    pool.pop_back();
    if (take_nearest(pool, -z, match_tol)) {
      ++pairs;
    } else {
      leftover.push_back(z);
    }
  }
  pool = std::move(leftover);
  return pairs;
}

// Replaces each group of eigenvalues lying within `radius` of one another by
// the group mean.  A defective eigenvalue of multiplicity m splits by
// ~eps^(1/m) in arbitrary directions, but the mean is well conditioned.
std::vector<cplx> merge_clusters(std::vector<cplx> values, double radius) {
  const std::size_t n = values.size();
  std::vector<std::size_t> group(n);
  for (std::size_t i = 0; i < n; ++i) group[i] = i;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (std::abs(values[i] - values[j]) > radius) continue;
      const std::size_t from = group[j], to = group[i];
      for (auto& g : group)
        if (g == from) g = to;
    }
  std::vector<cplx> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    cplx sum{};
    std::size_t count = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (group[j] == group[i]) {
        sum += values[j];
        ++count;
      }
    out[i] = sum / static_cast<double>(count);
  }
  return out;
}

}  // namespace

bool StabilitySpectrum::stable() const { return n_real_pairs == 0 && n_quartets == 0 && n_unpaired == 0; }

ComplexMatrix linearization_matrix(const PlaquetteConfig& cfg, double E, const StateVector& u0) {
  validate_state(cfg, u0);
  const std::size_t n = cfg.sites();
  const double residual = vector_norm(stationary_residual(cfg, E, u0));
  if (residual > 1e-8) {
    std::clog << "ptplaq: warning: linearising about a non-stationary state (residual " << residual << ")\n";
  }
  const ComplexMatrix hl = build_linear_hamiltonian(cfg);
  ComplexMatrix b(2 * n, 2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      b(i, j) = hl(i, j);
      b(n + i, n + j) = -std::conj(hl(i, j));
    }
    const double diag_shift = E - 2.0 * std::norm(u0[i]);
    b(i, i) += diag_shift;
    b(n + i, n + i) -= diag_shift;
    b(i, n + i) = -u0[i] * u0[i];
    b(n + i, i) = std::conj(u0[i] * u0[i]);
  }
  return b;
}

StabilitySpectrum classify_lambdas(Spectrum lambdas, double tol) {
  StabilitySpectrum s;
  sort_spectrum(lambdas);
  s.lambdas = std::move(lambdas);
  double radius = 0.0;
  for (const auto& z : s.lambdas) radius = std::max(radius, std::abs(z));
  s.scale = radius;
  s.max_growth_rate = s.lambdas.empty() ? 0.0 : s.lambdas.front().real();
  for (const auto& z : s.lambdas) s.max_growth_rate = std::max(s.max_growth_rate, z.real());
  if (radius == 0.0) {
    s.n_zero = s.lambdas.size();
    return s;
  }

  const double zero_cut = kZeroModeTol * radius;
  const double axis_cut = tol * radius;
  const double match_tol = 1e-4 * radius;
  std::vector<cplx> nonzero;
  for (const auto& z : s.lambdas) {
    if (std::abs(z) <= zero_cut) {
      ++s.n_zero;
    } else {
      nonzero.push_back(z);
    }
  }
  std::vector<cplx> real_axis, imag_axis, complex_plane;
  for (const auto& z : merge_clusters(std::move(nonzero), kClusterTol * radius)) {
    if (std::abs(z.imag()) <= axis_cut) {
      real_axis.push_back(z);
    } else if (std::abs(z.real()) <= axis_cut) {
      imag_axis.push_back(z);
    } else {
      complex_plane.push_back(z);
    }
  }
  s.n_real_pairs = count_pairs(real_axis, match_tol);
  s.n_imag_pairs = count_pairs(imag_axis, match_tol);
  s.n_unpaired = real_axis.size() + imag_axis.size();

  while (!complex_plane.empty()) {
    const cplx z = complex_plane.back();
    complex_plane.pop_back();
    std::vector<cplx> trial = complex_plane;
    if (take_nearest(trial, -z, match_tol) && take_nearest(trial, std::conj(z), match_tol) &&
        take_nearest(trial, -std::conj(z), match_tol)) {
      ++s.n_quartets;
      complex_plane = std::move(trial);
    } else {
      ++s.n_unpaired;
    }
  }
  return s;
}

StabilitySpectrum stability_spectrum(const ComplexMatrix& b, double tol) {
  if (!b.square() || b.rows() % 2 != 0) throw DimensionError("stability_spectrum: B must be square of even size");
  Spectrum mu = eig_complex(b);
  const cplx minus_i{0.0, -1.0};
  for (auto& z : mu) z *= minus_i;
  return classify_lambdas(std::move(mu), tol);
}

StabilitySpectrum stability_of(const PlaquetteConfig& cfg, double E, const StateVector& u0, double tol) {
  return stability_spectrum(linearization_matrix(cfg, E, u0), tol);
}

}  // namespace ptplaq
