#include "ptplaq/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ptplaq/errors.hpp"

namespace ptplaq {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void check_dim(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0 || rows > kMaxMatrixDim || cols > kMaxMatrixDim) {
    std::ostringstream msg;
    msg << "matrix dimension " << rows << "x" << cols << " outside 1.." << kMaxMatrixDim;
    throw DimensionError(msg.str());
  }
}

double abs1(cplx z) { return std::abs(z.real()) + std::abs(z.imag()); }

}  // namespace

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, cplx{}) {
  check_dim(rows, cols);
}

ComplexMatrix::ComplexMatrix(std::initializer_list<std::initializer_list<cplx>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  check_dim(rows_, cols_);
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("ragged matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
  ComplexMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

ComplexMatrix ComplexMatrix::zeros(std::size_t rows, std::size_t cols) {
  return ComplexMatrix(rows, cols);
}

ComplexMatrix ComplexMatrix::diagonal(std::span<const cplx> d) {
  ComplexMatrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

ComplexMatrix ComplexMatrix::adjoint() const {
  ComplexMatrix m(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) m(c, r) = std::conj((*this)(r, c));
  return m;
}

ComplexMatrix ComplexMatrix::transpose() const {
  ComplexMatrix m(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) m(c, r) = (*this)(r, c);
  return m;
}

ComplexMatrix ComplexMatrix::conj() const {
  ComplexMatrix m = *this;
  for (auto& z : m.data_) z = std::conj(z);
  return m;
}

double ComplexMatrix::norm() const {
  double s = 0.0;
  for (const auto& z : data_) s += std::norm(z);
  return std::sqrt(s);
}

double ComplexMatrix::max_abs() const {
  double s = 0.0;
  for (const auto& z : data_) s = std::max(s, std::abs(z));
  return s;
}

bool ComplexMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](cplx z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
  });
}

ComplexMatrix& ComplexMatrix::operator+=(const ComplexMatrix& o) {
  if (rows_ != o.rows_ || cols_ != o.cols_) throw DimensionError("matrix sum: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

ComplexMatrix& ComplexMatrix::operator-=(const ComplexMatrix& o) {
  if (rows_ != o.rows_ || cols_ != o.cols_) throw DimensionError("matrix difference: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

ComplexMatrix& ComplexMatrix::operator*=(cplx s) {
  for (auto& z : data_) z *= s;
  return *this;
}

ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
ComplexMatrix operator*(ComplexMatrix a, cplx s) { return a *= s; }
ComplexMatrix operator*(cplx s, ComplexMatrix a) { return a *= s; }

ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matrix product: shape mismatch");
  ComplexMatrix m(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const cplx aik = a(i, k);
      if (aik == cplx{}) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) m(i, j) += aik * b(k, j);
    }
  return m;
}

CVector operator*(const ComplexMatrix& a, std::span<const cplx> x) {
  if (a.cols() != x.size()) throw DimensionError("matrix-vector product: shape mismatch");
  CVector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    cplx s{};
    for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

ComplexMatrix matrix_power(const ComplexMatrix& m, unsigned power) {
  if (!m.square()) throw DimensionError("matrix power of a non-square matrix");
  ComplexMatrix result = ComplexMatrix::identity(m.rows());
  for (unsigned p = 0; p < power; ++p) result = result * m;
  return result;
}

double vector_norm(std::span<const cplx> x) {
  double s = 0.0;
  for (const auto& z : x) s += std::norm(z);
  return std::sqrt(s);
}

void sort_spectrum(Spectrum& s) {
  std::sort(s.begin(), s.end(), [](cplx a, cplx b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
}

// ---------------------------------------------------------------------------
// Eigenvalues

namespace {

// Parlett-Reinsch balancing with radix-2 scalings (exact in floating point).
void balance(ComplexMatrix& a) {
  const std::size_t n = a.rows();
  constexpr double radix = 2.0;
  bool done = false;
  while (!done) {
    done = true;
    for (std::size_t i = 0; i < n; ++i) {
      double c = 0.0, r = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        c += abs1(a(j, i));
        r += abs1(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= radix;
        c *= radix * radix;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= radix * radix;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        const double inv = 1.0 / f;
        for (std::size_t j = 0; j < n; ++j) a(i, j) *= inv;
        for (std::size_t j = 0; j < n; ++j) a(j, i) *= f;
      }
    }
  }
}

// Householder reduction to upper Hessenberg form (similarity transform).
void hessenberg(ComplexMatrix& a) {
  const std::size_t n = a.rows();
  if (n < 3) return;
  for (std::size_t k = 0; k + 2 < n; ++k) {
    double alpha_norm = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) alpha_norm += std::norm(a(i, k));
    alpha_norm = std::sqrt(alpha_norm);
    if (alpha_norm == 0.0) continue;

    const cplx x0 = a(k + 1, k);
    const cplx phase = std::abs(x0) == 0.0 ? cplx{1.0} : x0 / std::abs(x0);
    CVector v(n, cplx{});
    v[k + 1] = x0 + phase * alpha_norm;
    for (std::size_t i = k + 2; i < n; ++i) v[i] = a(i, k);
    double vnorm2 = 0.0;
    for (std::size_t i = k + 1; i < n; ++i) vnorm2 += std::norm(v[i]);
    if (vnorm2 == 0.0) continue;
    const double beta = 2.0 / vnorm2;

    // a <- (I - beta v v^H) a
    for (std::size_t j = 0; j < n; ++j) {
      cplx s{};
      for (std::size_t i = k + 1; i < n; ++i) s += std::conj(v[i]) * a(i, j);
      s *= beta;
      for (std::size_t i = k + 1; i < n; ++i) a(i, j) -= v[i] * s;
    }
    // a <- a (I - beta v v^H)
    for (std::size_t i = 0; i < n; ++i) {
      cplx s{};
      for (std::size_t j = k + 1; j < n; ++j) s += a(i, j) * v[j];
      s *= beta;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= s * std::conj(v[j]);
    }
    for (std::size_t i = k + 2; i < n; ++i) a(i, k) = 0.0;
  }
}

struct Givens {
  double c;
  cplx s;
};

// Rotation G = [c s; -conj(s) c] with G [a; b] = [*; 0].
Givens make_givens(cplx a, cplx b) {
  const double aa = std::abs(a);
  const double bb = std::abs(b);
  if (bb == 0.0) return {1.0, cplx{}};
  if (aa == 0.0) return {0.0, cplx{1.0}};
  const double r = std::hypot(aa, bb);
  return {aa / r, (a / aa) * std::conj(b) / r};
}

// One explicitly shifted QR step on the active block h[lo..hi].
void qr_step(ComplexMatrix& h, std::size_t lo, std::size_t hi, cplx shift) {
  for (std::size_t i = lo; i <= hi; ++i) h(i, i) -= shift;
  std::vector<Givens> rot;
  rot.reserve(hi - lo);
  for (std::size_t k = lo; k < hi; ++k) {
    const Givens g = make_givens(h(k, k), h(k + 1, k));
    rot.push_back(g);
    for (std::size_t j = k; j <= hi; ++j) {
      const cplx t1 = h(k, j);
      const cplx t2 = h(k + 1, j);
      h(k, j) = g.c * t1 + g.s * t2;
      h(k + 1, j) = -std::conj(g.s) * t1 + g.c * t2;
    }
  }
  for (std::size_t k = lo; k < hi; ++k) {
    const Givens& g = rot[k - lo];
    const std::size_t last = std::min(k + 2, hi);
    for (std::size_t i = lo; i <= last; ++i) {
      const cplx t1 = h(i, k);
      const cplx t2 = h(i, k + 1);
      h(i, k) = t1 * g.c + t2 * std::conj(g.s);
      h(i, k + 1) = -t1 * g.s + t2 * g.c;
    }
  }
  for (std::size_t i = lo; i <= hi; ++i) h(i, i) += shift;
}

cplx wilkinson_shift(const ComplexMatrix& h, std::size_t hi) {
  const cplx a = h(hi - 1, hi - 1);
  const cplx b = h(hi - 1, hi);
  const cplx c = h(hi, hi - 1);
  const cplx d = h(hi, hi);
  const cplx half_tr = 0.5 * (a + d);
  const cplx disc = std::sqrt(0.25 * (a - d) * (a - d) + b * c);
  const cplx l1 = half_tr + disc;
  const cplx l2 = half_tr - disc;
  return std::abs(l1 - d) < std::abs(l2 - d) ? l1 : l2;
}

}  // namespace

Spectrum eig_complex(const ComplexMatrix& m, double tol) {
  if (!m.square()) throw DimensionError("eig_complex: matrix is not square");
  if (!m.all_finite()) throw DimensionError("eig_complex: non-finite matrix entry");
  const std::size_t n = m.rows();

  ComplexMatrix h = m;
  balance(h);
  hessenberg(h);

  Spectrum values;
  values.reserve(n);
  const std::size_t max_sweeps = 100 * n * n;
  std::size_t sweeps = 0;
  std::size_t since_deflation = 0;
  std::size_t hi = n - 1;
  // Normwise deflation floor: a subdiagonal entry at eps*||H|| is within
  // the backward error of the whole iteration.  Without it, clusters of
  // ill-conditioned eigenvalues near zero (defective zero modes) never
  // satisfy the purely local test.
  const double global_floor = kEps * h.norm();

  while (true) {
    if (hi == 0) {
      values.push_back(h(0, 0));
      break;
    }
    // Locate the start of the unreduced block ending at hi.
    std::size_t lo = hi;
    while (lo > 0) {
      double scale = abs1(h(lo, lo)) + abs1(h(lo - 1, lo - 1));
      if (scale == 0.0) scale = h.max_abs();
      if (abs1(h(lo, lo - 1)) <= kEps * scale || abs1(h(lo, lo - 1)) <= global_floor) {
        h(lo, lo - 1) = 0.0;
        break;
      }
      --lo;
    }
    if (lo == hi) {
      values.push_back(h(hi, hi));
      --hi;
      since_deflation = 0;
      continue;
    }
    if (++sweeps > max_sweeps) {
      throw ConvergenceError("eig_complex: QR iteration exceeded " + std::to_string(max_sweeps) + " sweeps",
                             std::abs(h(hi, hi - 1)));
    }
    ++since_deflation;
    cplx shift;
    if (since_deflation % 11 == 10) {
      // Exceptional shift breaks cycles of the Wilkinson iteration.
      shift = h(hi, hi) + std::abs(h(hi, hi - 1).real()) +
              (hi >= 2 ? std::abs(h(hi - 1, hi - 2).real()) : 0.0);
    } else {
      shift = wilkinson_shift(h, hi);
    }
    qr_step(h, lo, hi, shift);
  }

  cplx trace{}, sum{};
  for (std::size_t i = 0; i < n; ++i) trace += m(i, i);
  for (const auto& v : values) sum += v;
  const double scale = std::max(m.norm(), std::numeric_limits<double>::min());
  if (std::abs(trace - sum) > std::max(tol, 1e3 * kEps) * scale) {
    throw ConvergenceError("eig_complex: eigenvalue sum deviates from the trace", std::abs(trace - sum));
  }
  sort_spectrum(values);
  return values;
}

// ---------------------------------------------------------------------------
// Linear solves

namespace {

struct LuFactors {
  ComplexMatrix lu;
  std::vector<std::size_t> perm;
};

LuFactors lu_factor(const ComplexMatrix& m) {
  const std::size_t n = m.rows();
  LuFactors f{m, std::vector<std::size_t>(n)};
  std::iota(f.perm.begin(), f.perm.end(), 0);
  const double threshold = 1e-12 * m.norm();
  double max_pivot = 0.0;
  double min_pivot = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(f.lu(i, k)) > std::abs(f.lu(p, k))) p = i;
    const double piv = std::abs(f.lu(p, k));
    max_pivot = std::max(max_pivot, piv);
    min_pivot = std::min(min_pivot, piv);
    if (piv <= threshold || piv == 0.0) {
      const double indicator = max_pivot > 0.0 ? piv / max_pivot : 0.0;
      std::ostringstream msg;
      msg << "solve_linear: matrix singular to tolerance (pivot ratio " << indicator << ")";
      throw SingularityError(msg.str(), indicator);
    }
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(f.lu(k, j), f.lu(p, j));
      std::swap(f.perm[k], f.perm[p]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const cplx l = f.lu(i, k) / f.lu(k, k);
      f.lu(i, k) = l;
      for (std::size_t j = k + 1; j < n; ++j) f.lu(i, j) -= l * f.lu(k, j);
    }
  }
  return f;
}

CVector lu_solve(const LuFactors& f, std::span<const cplx> b) {
  const std::size_t n = f.lu.rows();
  CVector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[f.perm[i]];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) x[i] -= f.lu(i, j) * x[j];
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = i + 1; j < n; ++j) x[i] -= f.lu(i, j) * x[j];
    x[i] /= f.lu(i, i);
  }
  return x;
}

}  // namespace

CVector solve_linear(const ComplexMatrix& m, std::span<const cplx> b) {
  if (!m.square()) throw DimensionError("solve_linear: matrix is not square");
  if (b.size() != m.rows()) throw DimensionError("solve_linear: right-hand side length mismatch");
  const LuFactors f = lu_factor(m);
  CVector x = lu_solve(f, b);

  CVector r = m * x;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
  const CVector dx = lu_solve(f, r);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += dx[i];
  return x;
}

// ---------------------------------------------------------------------------
// Rank

std::size_t numerical_rank(const ComplexMatrix& m, double tol) {
  ComplexMatrix a = m;
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  const std::size_t steps = std::min(rows, cols);
  double lead = 0.0;
  std::size_t rank = 0;
  for (std::size_t k = 0; k < steps; ++k) {
    // Pivot on the column with the largest remaining norm.
    std::size_t best = k;
    double best_norm = -1.0;
    for (std::size_t j = k; j < cols; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < rows; ++i) s += std::norm(a(i, j));
      if (s > best_norm) {
        best_norm = s;
        best = j;
      }
    }
    if (best != k)
      for (std::size_t i = 0; i < rows; ++i) std::swap(a(i, k), a(i, best));
    const double col_norm = std::sqrt(best_norm);
    if (k == 0) lead = col_norm;
    if (lead == 0.0 || col_norm <= tol * lead) break;
    ++rank;

    const cplx x0 = a(k, k);
    const cplx phase = std::abs(x0) == 0.0 ? cplx{1.0} : x0 / std::abs(x0);
    CVector v(rows, cplx{});
    v[k] = x0 + phase * col_norm;
    for (std::size_t i = k + 1; i < rows; ++i) v[i] = a(i, k);
    double vnorm2 = 0.0;
    for (std::size_t i = k; i < rows; ++i) vnorm2 += std::norm(v[i]);
    if (vnorm2 == 0.0) continue;
    const double beta = 2.0 / vnorm2;
    for (std::size_t j = k; j < cols; ++j) {
      cplx s{};
      for (std::size_t i = k; i < rows; ++i) s += std::conj(v[i]) * a(i, j);
      s *= beta;
      for (std::size_t i = k; i < rows; ++i) a(i, j) -= v[i] * s;
    }
  }
  return rank;
}

double spectrum_distance(const Spectrum& a, const Spectrum& b) {
  if (a.size() != b.size()) throw DimensionError("spectrum_distance: length mismatch");
  std::vector<bool> used(b.size(), false);
  double worst = 0.0;
  for (const auto& x : a) {
    std::size_t best = b.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (used[j]) continue;
      const double d = std::abs(x - b[j]);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    used[best] = true;
    worst = std::max(worst, best_d);
  }
  return worst;
}

}  // namespace ptplaq
