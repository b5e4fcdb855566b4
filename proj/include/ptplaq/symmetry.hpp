#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "ptplaq/model.hpp"
#include "ptplaq/numerics.hpp"

namespace ptplaq {

enum class ParityLabel { P_x0, P_0x, P_xx, P_d0, P_dx };

std::string_view parity_name(ParityLabel label);

/// Real symmetric involution P != I acting on site indices.
struct ParityOperator {
  ParityLabel label;
  ComplexMatrix matrix;
};

ParityOperator make_parity(ParityLabel label);

/// Parity operators with [P, H_L0] = 0 and {P, H_L1} = 0.  Squares are
/// searched among the tensor-product candidates sigma_x (x) I, I (x) sigma_x,
/// sigma_x (x) sigma_x; the cross among all symmetric permutation
/// involutions of its five sites.
std::vector<ParityOperator> parity_candidates(const PlaquetteConfig& cfg);

/// ||H^dagger - P H P|| <= 1e-12 ||H||.
bool check_pseudo_hermiticity(const ComplexMatrix& h, const ParityOperator& p);

Spectrum linear_spectrum_analytic(const PlaquetteConfig& cfg);

enum class PtRegime { exact, broken, exceptional_point };

std::string_view regime_name(PtRegime regime);

struct PtPhaseReport {
  double gamma = 0.0;
  PtRegime regime = PtRegime::exact;
  std::optional<std::size_t> ep_order;
  std::size_t real_eigenvalue_count = 0;
};

/// Window on |gamma^2 - threshold^2| inside which gamma counts as sitting on
/// an exceptional point.
inline constexpr double kEpWindow = 1e-8;

/// Regime from the numeric spectrum of H_L, cross-checked against the
/// closed-form thresholds.  Throws ConsistencyError when the two disagree.
PtPhaseReport classify_pt_phase(const PlaquetteConfig& cfg, double tol = 1e-9);

/// Jordan block sizes (descending) of `eigenvalue` from the rank sequence of
/// powers of (H - mu I).  Throws ToleranceError on a non-monotone sequence.
std::vector<std::size_t> jordan_structure(const ComplexMatrix& h, cplx eigenvalue, double tol = 1e-8);

/// Ranks r_m of ((H - mu I)/||H - mu I||)^m for m = 0..n.
std::vector<std::size_t> rank_sequence(const ComplexMatrix& h, cplx eigenvalue, double tol = 1e-8);

/// phi in (-pi, pi] with P conj(u0) = exp(i phi) u0, if one exists.
std::optional<double> check_solution_pt_symmetry(const StateVector& u0, const ParityOperator& p,
                                                 double tol = 1e-9);

}  // namespace ptplaq
