#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "ptplaq/model.hpp"
#include "ptplaq/numerics.hpp"

namespace testing {

using ptplaq::ComplexMatrix;
using ptplaq::cplx;
using ptplaq::CVector;

inline ComplexMatrix random_matrix(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d(0.0, 1.0);
  ComplexMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = cplx{d(rng), d(rng)};
  return m;
}

inline CVector random_vector(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d(0.0, 1.0);
  CVector v(n);
  for (auto& z : v) z = cplx{d(rng), d(rng)};
  return v;
}

// Largest distance in an optimal-ish matching of two multisets: each value
// of `a` takes its nearest unused partner in `b`, in order of increasing
// best distance.
inline double multiset_distance(std::vector<cplx> a, std::vector<cplx> b) {
  if (a.size() != b.size()) return INFINITY;
  double worst = 0.0;
  while (!a.empty()) {
    double best = INFINITY;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j)
        if (std::abs(a[i] - b[j]) < best) {
          best = std::abs(a[i] - b[j]);
          bi = i;
          bj = j;
        }
    worst = std::max(worst, best);
    a.erase(a.begin() + static_cast<long>(bi));
    b.erase(b.begin() + static_cast<long>(bj));
  }
  return worst;
}

// Determinant by Gaussian elimination with partial pivoting, written out
// here so that eigenvalue checks do not lean on the library's own solver.
inline cplx determinant(ComplexMatrix m) {
  const std::size_t n = m.rows();
  cplx det{1.0};
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(m(i, k)) > std::abs(m(p, k))) p = i;
    if (m(p, k) == cplx{}) return 0.0;
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(m(k, j), m(p, j));
      det = -det;
    }
    det *= m(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const cplx f = m(i, k) / m(k, k);
      for (std::size_t j = k; j < n; ++j) m(i, j) -= f * m(k, j);
    }
  }
  return det;
}

inline double max_diff(const CVector& a, const CVector& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

inline const ptplaq::PlaquetteKind kAllKinds[] = {ptplaq::PlaquetteKind::A_0p0m, ptplaq::PlaquetteKind::B_pmpm,
                                                  ptplaq::PlaquetteKind::C_ppmm, ptplaq::PlaquetteKind::D_pm0pm};

// Coefficient c_n of i*gamma*u_n on the right of the stationary equations,
// copied site by site from the written systems:
//   E u_n = k (neighbours) + |u_n|^2 u_n + c_n i gamma u_n.
inline std::vector<double> stationary_gamma_coefficients(ptplaq::PlaquetteKind kind) {
  using ptplaq::PlaquetteKind;
  switch (kind) {
    case PlaquetteKind::A_0p0m: return {0, -1, 0, +1};
    case PlaquetteKind::B_pmpm: return {-1, +1, -1, +1};
    case PlaquetteKind::C_ppmm: return {-1, -1, +1, +1};
    case PlaquetteKind::D_pm0pm: return {+1, -1, 0, +1, -1};
  }
  return {};
}

inline std::vector<std::vector<std::size_t>> neighbours(ptplaq::PlaquetteKind kind) {
  if (kind == ptplaq::PlaquetteKind::D_pm0pm) return {{2}, {2}, {0, 1, 3, 4}, {2}, {2}};
  return {{1, 3}, {0, 2}, {1, 3}, {0, 2}};
}

// Stationary equations evaluated term by term.
inline CVector residual_by_hand(const ptplaq::PlaquetteConfig& cfg, double E, const CVector& u) {
  const auto c = stationary_gamma_coefficients(cfg.kind);
  const auto nb = neighbours(cfg.kind);
  CVector f(u.size());
  for (std::size_t n = 0; n < u.size(); ++n) {
    cplx s{};
    for (auto m : nb[n]) s += u[m];
    f[n] = cfg.k * s + std::norm(u[n]) * u[n] + c[n] * cplx{0, cfg.gamma} * u[n] - E * u[n];
  }
  return f;
}

inline double residual_by_hand_norm(const ptplaq::PlaquetteConfig& cfg, double E, const CVector& u) {
  double s = 0.0;
  for (auto z : residual_by_hand(cfg, E, u)) s += std::norm(z);
  return std::sqrt(s);
}

}  // namespace testing
