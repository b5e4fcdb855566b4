#pragma once

#include <cstddef>

#include "ptplaq/model.hpp"
#include "ptplaq/numerics.hpp"

namespace ptplaq {

inline constexpr double kClassifyTol = 1e-8;
inline constexpr double kEventTol = 1e-6;
/// Eigenvalues with |lambda| below this fraction of the spectral radius are
/// zero modes.  Gauge and degenerate-family zero modes form Jordan blocks
/// whose numerical splitting scales like eps^(1/4), hence the loose value.
inline constexpr double kZeroModeTol = 1e-3;
/// Nonzero eigenvalues closer than this (relative to the spectral radius)
/// are classified by their mean, which absorbs the splitting of defective
/// double eigenvalues at Krein collisions.
inline constexpr double kClusterTol = 1e-6;

/// Growth exponents lambda of perturbations exp(lambda t) around a
/// stationary state, with pair/quartet counts over the nonzero part.
struct StabilitySpectrum {
  Spectrum lambdas;
  std::size_t n_real_pairs = 0;
  std::size_t n_imag_pairs = 0;
  std::size_t n_quartets = 0;
  std::size_t n_zero = 0;
  /// Nonzero eigenvalues left over after pairing (0 for the usual
  /// Hamiltonian-like spectra).
  std::size_t n_unpaired = 0;
  double max_growth_rate = 0.0;
  double scale = 0.0;

  /// Every nonzero eigenvalue on the imaginary axis.
  bool stable() const;
};

/// Linearisation B about a stationary state u0, in (w, conj w) variables,
/// with perturbations evolving as d/dt x = -i B x.  Blocks:
///   [ H_L - 2|u|^2 + E       -diag(u^2)              ]
///   [ diag(conj u^2)         -(conj H_L - 2|u|^2 + E) ]
/// i.e. minus the Wirtinger Jacobian of stationary_residual and its conjugate.
ComplexMatrix linearization_matrix(const PlaquetteConfig& cfg, double E, const StateVector& u0);

/// lambda = -i * eig(B), sorted, and classified.  `tol` is relative to the
/// spectral radius.
StabilitySpectrum stability_spectrum(const ComplexMatrix& b, double tol = kClassifyTol);

/// Re-run the classification of existing eigenvalues at another tolerance.
StabilitySpectrum classify_lambdas(Spectrum lambdas, double tol = kClassifyTol);

StabilitySpectrum stability_of(const PlaquetteConfig& cfg, double E, const StateVector& u0,
                               double tol = kClassifyTol);

}  // namespace ptplaq
