#include "ptplaq/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ptplaq/errors.hpp"

namespace ptplaq {

namespace {

ComplexMatrix permutation_matrix(const std::vector<std::size_t>& perm) {
  ComplexMatrix p(perm.size(), perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) p(i, perm[i]) = 1.0;
  return p;
}

bool same_matrix(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return (a - b).max_abs() == 0.0;
}

// Every involutive permutation of n elements except the identity.
void enumerate_involutions(std::vector<std::size_t>& perm, std::vector<bool>& used, std::size_t pos,
                           std::vector<std::vector<std::size_t>>& out) {
  const std::size_t n = perm.size();
  while (pos < n && used[pos]) ++pos;
  if (pos == n) {
    bool identity = true;
    for (std::size_t i = 0; i < n; ++i) identity = identity && perm[i] == i;
    if (!identity) out.push_back(perm);
    return;
  }
  used[pos] = true;
  perm[pos] = pos;
  enumerate_involutions(perm, used, pos + 1, out);
  for (std::size_t j = pos + 1; j < n; ++j) {
    if (used[j]) continue;
    used[j] = true;
    perm[pos] = j;
    perm[j] = pos;
    enumerate_involutions(perm, used, pos + 1, out);
    perm[j] = j;
    used[j] = false;
  }
  perm[pos] = pos;
  used[pos] = false;
}

bool satisfies_parity_relations(const ComplexMatrix& p, const ComplexMatrix& h0, const ComplexMatrix& h1) {
  const ComplexMatrix commutator = p * h0 - h0 * p;
  const ComplexMatrix anticommutator = p * h1 + h1 * p;
  return commutator.max_abs() == 0.0 && anticommutator.max_abs() == 0.0;
}

}  // namespace

std::string_view parity_name(ParityLabel label) {
  switch (label) {
    case ParityLabel::P_x0: return "P_x0";
    case ParityLabel::P_0x: return "P_0x";
    case ParityLabel::P_xx: return "P_xx";
    case ParityLabel::P_d0: return "P_d0";
    case ParityLabel::P_dx: return "P_dx";
  }
  return "?";
}

ParityOperator make_parity(ParityLabel label) {
  switch (label) {
    case ParityLabel::P_x0: return {label, permutation_matrix({2, 3, 0, 1})};
    case ParityLabel::P_0x: return {label, permutation_matrix({1, 0, 3, 2})};
    case ParityLabel::P_xx: return {label, permutation_matrix({3, 2, 1, 0})};
    case ParityLabel::P_d0: return {label, permutation_matrix({1, 0, 2, 4, 3})};
    case ParityLabel::P_dx: return {label, permutation_matrix({4, 3, 2, 1, 0})};
  }
  throw PreconditionError("unknown parity label");
}

std::vector<ParityOperator> parity_candidates(const PlaquetteConfig& cfg) {
  // The relations are structural, so test them at unit coupling and gain.
  const PlaquetteConfig unit{cfg.kind, 1.0, 1.0};
  const ComplexMatrix h0 = linear_hamiltonian_conservative(unit);
  const ComplexMatrix h1 = linear_hamiltonian_gain_loss(unit);

  std::vector<ParityOperator> found;
  if (cfg.kind != PlaquetteKind::D_pm0pm) {
    for (ParityLabel label : {ParityLabel::P_x0, ParityLabel::P_0x, ParityLabel::P_xx}) {
      ParityOperator p = make_parity(label);
      if (satisfies_parity_relations(p.matrix, h0, h1)) found.push_back(std::move(p));
    }
    return found;
  }

  const std::size_t n = cfg.sites();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<bool> used(n, false);
  std::vector<std::vector<std::size_t>> involutions;
  enumerate_involutions(perm, used, 0, involutions);

  const ParityOperator named[] = {make_parity(ParityLabel::P_d0), make_parity(ParityLabel::P_dx)};
  for (const auto& inv : involutions) {
    ComplexMatrix p = permutation_matrix(inv);
    if (!satisfies_parity_relations(p, h0, h1)) continue;
    auto match = std::find_if(std::begin(named), std::end(named),
                              [&](const ParityOperator& q) { return same_matrix(q.matrix, p); });
    if (match == std::end(named))
      throw ConsistencyError("parity search found an involution outside {P_d0, P_dx}");
    found.push_back(*match);
  }
  return found;
}

bool check_pseudo_hermiticity(const ComplexMatrix& h, const ParityOperator& p) {
  if (h.rows() != p.matrix.rows() || !h.square())
    throw DimensionError("check_pseudo_hermiticity: dimension mismatch");
  const ComplexMatrix diff = h.adjoint() - p.matrix * h * p.matrix;
  return diff.norm() <= 1e-12 * h.norm();
}

Spectrum linear_spectrum_analytic(const PlaquetteConfig& cfg) {
  const double k = cfg.k;
  const double g = cfg.gamma;
  const cplx i_unit{0.0, 1.0};
  const cplx outer = std::sqrt(cplx{4.0 * k * k - g * g});
  Spectrum s;
  switch (cfg.kind) {
    case PlaquetteKind::A_0p0m:
      s = {0.0, 0.0, outer, -outer};
      break;
    case PlaquetteKind::B_pmpm:
      s = {i_unit * g, -i_unit * g, outer, -outer};
      break;
    case PlaquetteKind::C_ppmm: {
      const cplx inner = std::sqrt(cplx{k * k - g * g});
      const cplx e1 = std::sqrt(2.0 * k * k - g * g + 2.0 * k * inner);
      const cplx e2 = std::sqrt(2.0 * k * k - g * g - 2.0 * k * inner);
      s = {e1, e2, -e1, -e2};
      break;
    }
    case PlaquetteKind::D_pm0pm:
      s = {i_unit * g, -i_unit * g, outer, -outer, 0.0};
      break;
  }
  sort_spectrum(s);
  return s;
}

std::string_view regime_name(PtRegime regime) {
  switch (regime) {
    case PtRegime::exact: return "exact";
    case PtRegime::broken: return "broken";
    case PtRegime::exceptional_point: return "exceptional_point";
  }
  return "?";
}

std::vector<std::size_t> rank_sequence(const ComplexMatrix& h, cplx eigenvalue, double tol) {
  if (!h.square()) throw DimensionError("rank_sequence: matrix is not square");
  const std::size_t n = h.rows();
  ComplexMatrix shifted = h - ComplexMatrix::identity(n) * eigenvalue;
  const double scale = shifted.norm();
  std::vector<std::size_t> ranks{n};
  if (scale == 0.0) {
    ranks.resize(n + 1, 0);
    return ranks;
  }
  shifted *= cplx{1.0 / scale};
  ComplexMatrix power = ComplexMatrix::identity(n);
  for (std::size_t m = 1; m <= n; ++m) {
    power = power * shifted;
    // The powers are normalised, so a tiny norm means numerically zero.
    ranks.push_back(power.norm() <= tol ? 0 : numerical_rank(power, tol));
  }
  return ranks;
}

std::vector<std::size_t> jordan_structure(const ComplexMatrix& h, cplx eigenvalue, double tol) {
  const auto ranks = rank_sequence(h, eigenvalue, tol);
  const std::size_t n = h.rows();
  for (std::size_t m = 1; m < ranks.size(); ++m)
    if (ranks[m] > ranks[m - 1]) throw ToleranceError("jordan_structure: rank sequence is not monotone");

  // at_least[m] = number of blocks of size >= m.
  std::vector<std::size_t> at_least(n + 2, 0);
  for (std::size_t m = 1; m <= n; ++m) at_least[m] = ranks[m - 1] - ranks[m];
  for (std::size_t m = 1; m <= n; ++m)
    if (at_least[m + 1] > at_least[m]) throw ToleranceError("jordan_structure: inconsistent Weyr characteristic");

  std::vector<std::size_t> blocks;
  for (std::size_t m = n; m >= 1; --m)
    for (std::size_t c = 0; c < at_least[m] - at_least[m + 1]; ++c) blocks.push_back(m);
  return blocks;
}

PtPhaseReport classify_pt_phase(const PlaquetteConfig& cfg, double tol) {
  const ComplexMatrix h = build_linear_hamiltonian(cfg);
  const Spectrum numeric = eig_complex(h);
  const double g2 = cfg.gamma * cfg.gamma;
  const double k2 = cfg.k * cfg.k;

  PtPhaseReport report;
  report.gamma = cfg.gamma;
  const double real_tol = tol * std::max(1.0, h.norm());
  report.real_eigenvalue_count = static_cast<std::size_t>(
      std::count_if(numeric.begin(), numeric.end(), [&](cplx z) { return std::abs(z.imag()) <= real_tol; }));

  double ep_threshold2 = 0.0;
  cplx ep_eigenvalue{};
  bool analytic_exact = false;
  switch (cfg.kind) {
    case PlaquetteKind::A_0p0m:
      ep_threshold2 = 4.0 * k2;
      analytic_exact = g2 <= 4.0 * k2;
      break;
    case PlaquetteKind::B_pmpm:
    case PlaquetteKind::D_pm0pm:
      ep_threshold2 = 4.0 * k2;
      analytic_exact = std::abs(cfg.gamma) <= tol;
      break;
    case PlaquetteKind::C_ppmm:
      ep_threshold2 = k2;
      ep_eigenvalue = std::abs(cfg.k);
      analytic_exact = g2 <= k2;
      break;
  }

  if (std::abs(g2 - ep_threshold2) <= kEpWindow) {
    const auto blocks = jordan_structure(h, ep_eigenvalue);
    const std::size_t largest = blocks.empty() ? 0 : blocks.front();
    if (largest >= 2) {
      report.regime = PtRegime::exceptional_point;
      report.ep_order = largest;
      return report;
    }
  }

  const bool numeric_exact = report.real_eigenvalue_count == numeric.size();
  if (numeric_exact != analytic_exact) {
    throw ConsistencyError("classify_pt_phase: numeric spectrum (" + std::to_string(report.real_eigenvalue_count) +
                           " real eigenvalues) disagrees with the analytic threshold at gamma=" +
                           std::to_string(cfg.gamma));
  }
  report.regime = analytic_exact ? PtRegime::exact : PtRegime::broken;
  return report;
}

std::optional<double> check_solution_pt_symmetry(const StateVector& u0, const ParityOperator& p, double tol) {
  if (u0.size() != p.matrix.rows()) throw DimensionError("check_solution_pt_symmetry: dimension mismatch");
  const double unorm = vector_norm(u0);
  if (unorm == 0.0) throw PreconditionError("check_solution_pt_symmetry: zero state");

  CVector conj_u(u0.size());
  std::transform(u0.begin(), u0.end(), conj_u.begin(), [](cplx z) { return std::conj(z); });
  const CVector image = p.matrix * conj_u;

  auto first = std::find_if(u0.begin(), u0.end(), [&](cplx z) { return std::abs(z) > tol * unorm; });
  const std::size_t j = static_cast<std::size_t>(first - u0.begin());
  if (std::abs(image[j]) <= tol * unorm) return std::nullopt;
  double phi = std::arg(image[j] / u0[j]);
  if (phi <= -std::numbers::pi) phi += 2.0 * std::numbers::pi;

  const cplx rot = std::polar(1.0, phi);
  double err = 0.0;
  for (std::size_t i = 0; i < u0.size(); ++i) err += std::norm(image[i] - rot * u0[i]);
  if (std::sqrt(err) > tol * unorm) return std::nullopt;
  return phi;
}

}  // namespace ptplaq
