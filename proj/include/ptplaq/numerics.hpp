#pragma once

// Dense complex linear algebra for the small (<= 16x16) matrices that occur
// in plaquette models: Hamiltonians, parity operators and linearizations.

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace ptplaq {

using cplx = std::complex<double>;
using CVector = std::vector<cplx>;

inline constexpr std::size_t kMaxMatrixDim = 16;
inline constexpr double kDefaultTol = 1e-10;

class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(std::size_t rows, std::size_t cols);
  ComplexMatrix(std::initializer_list<std::initializer_list<cplx>> rows);

  static ComplexMatrix identity(std::size_t n);
  static ComplexMatrix zeros(std::size_t rows, std::size_t cols);
  static ComplexMatrix diagonal(std::span<const cplx> d);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const cplx> data() const { return data_; }

  ComplexMatrix adjoint() const;
  ComplexMatrix transpose() const;
  ComplexMatrix conj() const;

  /// Frobenius norm.
  double norm() const;
  double max_abs() const;
  bool all_finite() const;

  ComplexMatrix& operator+=(const ComplexMatrix& o);
  ComplexMatrix& operator-=(const ComplexMatrix& o);
  ComplexMatrix& operator*=(cplx s);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b);
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b);
ComplexMatrix operator*(ComplexMatrix a, cplx s);
ComplexMatrix operator*(cplx s, ComplexMatrix a);
ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b);
CVector operator*(const ComplexMatrix& a, std::span<const cplx> x);

ComplexMatrix matrix_power(const ComplexMatrix& m, unsigned power);

double vector_norm(std::span<const cplx> x);

/// Eigenvalues with multiplicity, sorted lexicographically by (Re, Im).
using Spectrum = std::vector<cplx>;

void sort_spectrum(Spectrum& s);

/// All eigenvalues of a square matrix: balancing, Householder reduction to
/// Hessenberg form and single-shift complex QR with Wilkinson shifts.
/// `tol` bounds the relative trace mismatch accepted on return.
/// Throws DimensionError (non-square / too large) or ConvergenceError.
Spectrum eig_complex(const ComplexMatrix& m, double tol = kDefaultTol);

/// Solves m x = b by LU with partial pivoting and one step of iterative
/// refinement.  Throws SingularityError when a pivot falls below
/// 1e-12 * ||m||.
CVector solve_linear(const ComplexMatrix& m, std::span<const cplx> b);

/// Number of column-pivoted QR diagonal magnitudes exceeding
/// tol * |R(0,0)|.  The zero matrix has rank 0.
std::size_t numerical_rank(const ComplexMatrix& m, double tol = kDefaultTol);

/// Greedy multiset distance between two spectra of equal length: each value
/// of `a` is paired with its nearest unused value of `b`; the largest pair
/// distance is returned.
double spectrum_distance(const Spectrum& a, const Spectrum& b);

}  // namespace ptplaq
