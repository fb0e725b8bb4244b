#pragma once

// Dense complex linear algebra: the Operator carrier type, products,
// Kronecker products, column-stacking vectorization, the matrix exponential
// and a full nonsymmetric eigendecomposition with left/right vectors.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nhq/error.hpp"

namespace nhq {

using cplx = std::complex<double>;
using CVector = std::vector<cplx>;

inline constexpr cplx kI{0.0, 1.0};
inline constexpr std::size_t kDefaultDimensionCap = 16384;

namespace detail {

// Plain complex multiply; std::complex operator* goes through the C99
// NaN-recovery path which is several times slower in inner loops.
inline cplx mul(cplx a, cplx b) {
  return {a.real() * b.real() - a.imag() * b.imag(),
          a.real() * b.imag() + a.imag() * b.real()};
}

inline bool all_finite(std::span<const cplx> xs) {
  return std::all_of(xs.begin(), xs.end(), [](cplx z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
  });
}

}  // namespace detail

// Square dense complex matrix, row-major. dim >= 1 and all entries finite.
class Operator {
 public:
  explicit Operator(std::size_t dim) : dim_(dim), data_(dim * dim) {
    if (dim == 0) throw ShapeMismatch("Operator dimension must be >= 1");
  }

  Operator(std::size_t dim, std::vector<cplx> entries)
      : dim_(dim), data_(std::move(entries)) {
    if (dim == 0) throw ShapeMismatch("Operator dimension must be >= 1");
    if (data_.size() != dim * dim)
      throw ShapeMismatch("Operator entries must be dim*dim, got " +
                          std::to_string(data_.size()));
    require_finite("construction");
  }

  Operator(std::initializer_list<std::initializer_list<cplx>> rows)
      : dim_(rows.size()) {
    if (dim_ == 0) throw ShapeMismatch("Operator dimension must be >= 1");
    data_.reserve(dim_ * dim_);
    for (const auto& row : rows) {
      if (row.size() != dim_) throw ShapeMismatch("Operator rows must be square");
      data_.insert(data_.end(), row.begin(), row.end());
    }
    require_finite("construction");
  }

  static Operator identity(std::size_t dim) {
    Operator out(dim);
    for (std::size_t i = 0; i < dim; ++i) out(i, i) = 1.0;
    return out;
  }

  static Operator diagonal(std::span<const cplx> diag) {
    Operator out(diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) out(i, i) = diag[i];
    out.require_finite("construction");
    return out;
  }

  // |ket><bra|
  static Operator outer(std::span<const cplx> ket, std::span<const cplx> bra) {
    if (ket.size() != bra.size()) throw ShapeMismatch("outer: length mismatch");
    Operator out(ket.size());
    for (std::size_t i = 0; i < ket.size(); ++i)
      for (std::size_t j = 0; j < bra.size(); ++j)
        out(i, j) = detail::mul(ket[i], std::conj(bra[j]));
    return out;
  }

  std::size_t dim() const noexcept { return dim_; }
  cplx& operator()(std::size_t i, std::size_t j) { return data_[i * dim_ + j]; }
  const cplx& operator()(std::size_t i, std::size_t j) const {
    return data_[i * dim_ + j];
  }
  std::span<const cplx> data() const noexcept { return data_; }
  std::span<cplx> data() noexcept { return data_; }

  bool is_finite() const { return detail::all_finite(data_); }
  void require_finite(const char* where) const {
    if (!is_finite())
      throw NonFinite(std::string("non-finite Operator entry after ") + where);
  }

  Operator adjoint() const {
    Operator out(dim_);
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = 0; j < dim_; ++j) out(j, i) = std::conj((*this)(i, j));
    return out;
  }
  Operator transpose() const {
    Operator out(dim_);
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = 0; j < dim_; ++j) out(j, i) = (*this)(i, j);
    return out;
  }
  Operator conjugate() const {
    Operator out = *this;
    for (auto& z : out.data_) z = std::conj(z);
    return out;
  }

  cplx trace() const {
    cplx t = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) t += (*this)(i, i);
    return t;
  }
  double frobenius_norm() const {
    double s = 0.0;
    for (auto z : data_) s += std::norm(z);
    return std::sqrt(s);
  }
  // Maximum absolute column sum.
  double norm1() const {
    double best = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < dim_; ++i) s += std::abs((*this)(i, j));
      best = std::max(best, s);
    }
    return best;
  }

  Operator& operator+=(const Operator& o) {
    check_same(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  Operator& operator-=(const Operator& o) {
    check_same(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  Operator& operator*=(cplx s) {
    for (auto& z : data_) z = detail::mul(z, s);
    return *this;
  }

  friend Operator operator+(Operator a, const Operator& b) { return a += b; }
  friend Operator operator-(Operator a, const Operator& b) { return a -= b; }
  friend Operator operator*(Operator a, cplx s) { return a *= s; }
  friend Operator operator*(cplx s, Operator a) { return a *= s; }
  friend Operator operator-(Operator a) { return a *= -1.0; }
  friend Operator operator*(const Operator& a, const Operator& b);
  friend CVector operator*(const Operator& a, std::span<const cplx> v);
  friend CVector operator*(const Operator& a, const CVector& v) {
    return a * std::span<const cplx>(v);
  }

 private:
  void check_same(const Operator& o) const {
    if (o.dim_ != dim_) throw ShapeMismatch("Operator dimensions differ");
  }

  std::size_t dim_;
  std::vector<cplx> data_;
};

namespace detail {

// C += A * B on raw row-major n x n blocks, tiled over k and j.
inline void gemm_accumulate(std::size_t n, const cplx* a, const cplx* b, cplx* c) {
  constexpr std::size_t kBlockK = 64;
  constexpr std::size_t kBlockJ = 256;
  const double* bd = reinterpret_cast<const double*>(b);
  double* cd = reinterpret_cast<double*>(c);
  for (std::size_t kk = 0; kk < n; kk += kBlockK) {
    const std::size_t kend = std::min(n, kk + kBlockK);
    for (std::size_t jj = 0; jj < n; jj += kBlockJ) {
      const std::size_t jend = std::min(n, jj + kBlockJ);
      for (std::size_t i = 0; i < n; ++i) {
        double* crow = cd + 2 * i * n;
        for (std::size_t k = kk; k < kend; ++k) {
          const cplx aik = a[i * n + k];
          const double ar = aik.real(), ai = aik.imag();
          if (ar == 0.0 && ai == 0.0) continue;
          const double* brow = bd + 2 * k * n;
          for (std::size_t j = jj; j < jend; ++j) {
            const double br = brow[2 * j], bi = brow[2 * j + 1];
            crow[2 * j] += ar * br - ai * bi;
            crow[2 * j + 1] += ar * bi + ai * br;
          }
        }
      }
    }
  }
}

}  // namespace detail

inline Operator operator*(const Operator& a, const Operator& b) {
  a.check_same(b);
  Operator out(a.dim_);
  detail::gemm_accumulate(a.dim_, a.data_.data(), b.data_.data(), out.data_.data());
  out.require_finite("product");
  return out;
}

inline CVector operator*(const Operator& a, std::span<const cplx> v) {
  if (v.size() != a.dim_) throw ShapeMismatch("matrix-vector length mismatch");
  CVector out(a.dim_);
  for (std::size_t i = 0; i < a.dim_; ++i) {
    double re = 0.0, im = 0.0;
    const cplx* row = &a.data_[i * a.dim_];
    for (std::size_t j = 0; j < a.dim_; ++j) {
      re += row[j].real() * v[j].real() - row[j].imag() * v[j].imag();
      im += row[j].real() * v[j].imag() + row[j].imag() * v[j].real();
    }
    out[i] = {re, im};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vector helpers

inline cplx inner(std::span<const cplx> a, std::span<const cplx> b) {
  if (a.size() != b.size()) throw ShapeMismatch("inner: length mismatch");
  cplx s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += detail::mul(std::conj(a[i]), b[i]);
  return s;
}

inline double norm(std::span<const cplx> v) {
  double s = 0.0;
  for (auto z : v) s += std::norm(z);
  return std::sqrt(s);
}

inline CVector normalized(std::span<const cplx> v) {
  const double n = norm(v);
  if (n == 0.0) throw InvalidArgument("cannot normalize a zero vector");
  CVector out(v.begin(), v.end());
  for (auto& z : out) z /= n;
  return out;
}

inline CVector basis_vector(std::size_t dim, std::size_t index) {
  if (index >= dim) throw InvalidArgument("basis index out of range");
  CVector v(dim);
  v[index] = 1.0;
  return v;
}

inline Operator commutator(const Operator& a, const Operator& b) {
  return a * b - b * a;
}

inline Operator hermitian_part(const Operator& a) {
  return (a + a.adjoint()) * cplx(0.5);
}

inline bool is_hermitian(const Operator& a, double rel_tol = 1e-12) {
  return (a - a.adjoint()).frobenius_norm() <= rel_tol * a.frobenius_norm();
}

// ---------------------------------------------------------------------------
// Kronecker product and vectorization

inline Operator kronecker(const Operator& a, const Operator& b,
                          std::size_t cap = kDefaultDimensionCap) {
  const std::size_t na = a.dim(), nb = b.dim();
  if (na > cap / nb)
    throw DimensionOverflow("kronecker dimension " + std::to_string(na) + "*" +
                            std::to_string(nb) + " exceeds cap " +
                            std::to_string(cap));
  const std::size_t n = na * nb;
  Operator out(n);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < na; ++j) {
      const cplx aij = a(i, j);
      if (aij == cplx(0.0)) continue;
      for (std::size_t k = 0; k < nb; ++k)
        for (std::size_t l = 0; l < nb; ++l)
          out(i * nb + k, j * nb + l) = detail::mul(aij, b(k, l));
    }
  return out;
}

// Column stacking: v[j*dim + i] = rho(i, j).
inline CVector vectorize(const Operator& rho) {
  const std::size_t n = rho.dim();
  CVector v(n * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) v[j * n + i] = rho(i, j);
  return v;
}

inline Operator devectorize(std::span<const cplx> v, std::size_t dim) {
  if (dim == 0 || v.size() != dim * dim)
    throw ShapeMismatch("devectorize: length " + std::to_string(v.size()) +
                        " is not dim^2 for dim " + std::to_string(dim));
  Operator rho(dim);
  for (std::size_t j = 0; j < dim; ++j)
    for (std::size_t i = 0; i < dim; ++i) rho(i, j) = v[j * dim + i];
  rho.require_finite("devectorize");
  return rho;
}

inline Operator devectorize(std::span<const cplx> v) {
  const auto dim = static_cast<std::size_t>(std::llround(std::sqrt(double(v.size()))));
  return devectorize(v, dim);
}

// ---------------------------------------------------------------------------
// LU factorization with partial pivoting

class LU {
 public:
  explicit LU(Operator a) : lu_(std::move(a)), piv_(lu_.dim()) {
    const std::size_t n = lu_.dim();
    std::iota(piv_.begin(), piv_.end(), std::size_t{0});
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t p = k;
      double best = std::abs(lu_(k, k));
      for (std::size_t i = k + 1; i < n; ++i)
        if (std::abs(lu_(i, k)) > best) best = std::abs(lu_(i, k)), p = i;
      if (best == 0.0) {
        singular_ = true;
        continue;
      }
      if (p != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(k, j), lu_(p, j));
        std::swap(piv_[k], piv_[p]);
      }
      const cplx inv = 1.0 / lu_(k, k);
      for (std::size_t i = k + 1; i < n; ++i) {
        const cplx f = detail::mul(lu_(i, k), inv);
        lu_(i, k) = f;
        if (f == cplx(0.0)) continue;
        for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= detail::mul(f, lu_(k, j));
      }
    }
  }

  bool singular() const { return singular_; }

  // Solves A X = B for a matrix right-hand side.
  Operator solve(const Operator& b) const {
    if (singular_) throw NonConvergence("LU solve on a singular matrix");
    const std::size_t n = lu_.dim();
    if (b.dim() != n) throw ShapeMismatch("LU solve dimension mismatch");
    Operator x(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) x(i, j) = b(piv_[i], j);
    // Row-oriented substitution keeps the inner loop contiguous.
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < i; ++k) {
        const cplx f = lu_(i, k);
        if (f == cplx(0.0)) continue;
        for (std::size_t j = 0; j < n; ++j) x(i, j) -= detail::mul(f, x(k, j));
      }
    for (std::size_t ii = n; ii-- > 0;) {
      for (std::size_t k = ii + 1; k < n; ++k) {
        const cplx f = lu_(ii, k);
        if (f == cplx(0.0)) continue;
        for (std::size_t j = 0; j < n; ++j) x(ii, j) -= detail::mul(f, x(k, j));
      }
      const cplx inv = 1.0 / lu_(ii, ii);
      for (std::size_t j = 0; j < n; ++j) x(ii, j) = detail::mul(x(ii, j), inv);
    }
    return x;
  }

 private:
  Operator lu_;
  std::vector<std::size_t> piv_;
  bool singular_ = false;
};

inline Operator inverse(const Operator& a) {
  LU lu(a);
  Operator inv = lu.solve(Operator::identity(a.dim()));
  inv.require_finite("inverse");
  return inv;
}

// ---------------------------------------------------------------------------
// Matrix exponential: scaling and squaring with diagonal Pade approximants
// (degrees 3..13 selected from the 1-norm).

// exp(s*A) is only attempted for ||s*A||_1 up to this bound; callers with
// larger arguments must subdivide (see propagator()).
inline constexpr double kExpmNormBound = 100.0;

namespace detail {

inline Operator pade_polynomial(const std::vector<Operator>& powers,
                                std::span<const double> coeffs, std::size_t n) {
  Operator out = Operator::identity(n) * cplx(coeffs[0]);
  for (std::size_t k = 1; k < coeffs.size(); ++k)
    if (coeffs[k] != 0.0) out += powers[k - 1] * cplx(coeffs[k]);
  return out;
}

}  // namespace detail

inline Operator matrix_exponential(const Operator& a, double s) {
  if (!std::isfinite(s)) throw InvalidArgument("matrix_exponential: scale not finite");
  const std::size_t n = a.dim();
  if (s == 0.0) return Operator::identity(n);
  Operator x = a * cplx(s);
  x.require_finite("scaling");
  const double nrm = x.norm1();
  if (nrm > kExpmNormBound)
    throw OverflowRisk("matrix_exponential: ||sA||_1 = " + std::to_string(nrm) +
                       " exceeds bound " + std::to_string(kExpmNormBound));
  if (nrm == 0.0) return Operator::identity(n);

  static constexpr double kTheta[] = {1.495585217958292e-2, 2.539398330063230e-1,
                                      9.504178996162932e-1, 2.097847961257068e0,
                                      5.371920351148152e0};
  static constexpr double kB3[] = {120., 60., 12., 1.};
  static constexpr double kB5[] = {30240., 15120., 3360., 420., 30., 1.};
  static constexpr double kB7[] = {17297280., 8648640., 1995840., 277200.,
                                   25200.,    1512.,    56.,      1.};
  static constexpr double kB9[] = {17643225600., 8821612800., 2075673600.,
                                   302702400.,   30270240.,   2162160.,
                                   110880.,      3960.,       90.,
                                   1.};
  static constexpr double kB13[] = {64764752532480000., 32382376266240000.,
                                    7771770303897600.,  1187353796428800.,
                                    129060195264000.,   10559470521600.,
                                    670442572800.,      33522128640.,
                                    1323241920.,        40840800.,
                                    960960.,            16380.,
                                    182.,               1.};

  const Operator ident = Operator::identity(n);
  Operator u(n), v(n);
  int squarings = 0;

  auto low_degree = [&](std::span<const double> b) {
    // powers of A^2: A^2, A^4, ...
    const std::size_t m = b.size() - 1;
    std::vector<Operator> even;
    even.push_back(x * x);
    for (std::size_t k = 2; 2 * k <= m; ++k) even.push_back(even.back() * even.front());
    Operator uu = ident * cplx(b[1]);
    Operator vv = ident * cplx(b[0]);
    for (std::size_t k = 1; 2 * k <= m; ++k) {
      uu += even[k - 1] * cplx(b[2 * k + 1]);
      vv += even[k - 1] * cplx(b[2 * k]);
    }
    u = x * uu;
    v = std::move(vv);
  };

  if (nrm <= kTheta[0]) {
    low_degree(kB3);
  } else if (nrm <= kTheta[1]) {
    low_degree(kB5);
  } else if (nrm <= kTheta[2]) {
    low_degree(kB7);
  } else if (nrm <= kTheta[3]) {
    low_degree(kB9);
  } else {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(nrm / kTheta[4]))));
    x *= cplx(std::ldexp(1.0, -squarings));
    const Operator a2 = x * x;
    const Operator a4 = a2 * a2;
    const Operator a6 = a4 * a2;
    const auto& b = kB13;
    Operator inner_u = a6 * cplx(b[13]) + a4 * cplx(b[11]) + a2 * cplx(b[9]);
    Operator uu = a6 * inner_u + a6 * cplx(b[7]) + a4 * cplx(b[5]) +
                  a2 * cplx(b[3]) + ident * cplx(b[1]);
    u = x * uu;
    Operator inner_v = a6 * cplx(b[12]) + a4 * cplx(b[10]) + a2 * cplx(b[8]);
    v = a6 * inner_v + a6 * cplx(b[6]) + a4 * cplx(b[4]) + a2 * cplx(b[2]) +
        ident * cplx(b[0]);
  }

  LU lu(v - u);
  Operator r = lu.solve(v + u);
  for (int k = 0; k < squarings; ++k) r = r * r;
  r.require_finite("matrix_exponential");
  return r;
}

// exp(dt*A) for arbitrary ||dt*A||: halves the argument until it is under
// the exponential's bound, then squares back up.
inline Operator propagator(const Operator& a, double dt) {
  const double nrm = a.norm1() * std::abs(dt);
  int halvings = 0;
  while (std::ldexp(nrm, -halvings) > kExpmNormBound) ++halvings;
  Operator e = matrix_exponential(a, std::ldexp(dt, -halvings));
  for (int k = 0; k < halvings; ++k) e = e * e;
  return e;
}

// ---------------------------------------------------------------------------
// Eigendecomposition

// Vectors with condition at or above this are treated as (numerically)
// defective: left eigenvectors are flagged unreliable.
inline constexpr double kDefectiveCondition = 1e8;
inline constexpr double kEigResidualTol = 1e-10;

struct Spectrum {
  CVector eigenvalues;                // sorted by (Re, Im) ascending
  std::vector<CVector> right_vectors;  // unit norm
  std::vector<CVector> left_vectors;   // <left_j|right_j> = 1 when reliable
  bool left_reliable = true;
  double vector_condition = 1.0;       // 2-norm condition of [right_vectors]
  std::vector<double> residuals;       // ||H phi_j - lambda_j phi_j||

  std::size_t size() const { return eigenvalues.size(); }
};

namespace detail {

struct Balance {
  std::size_t ilo = 0, ihi = 0;                  // active block, inclusive
  std::vector<double> scale;                     // diagonal similarity D
  std::vector<std::pair<std::size_t, std::size_t>> swaps;
};

inline void swap_rows_cols(Operator& a, std::size_t p, std::size_t q) {
  if (p == q) return;
  const std::size_t n = a.dim();
  for (std::size_t j = 0; j < n; ++j) std::swap(a(p, j), a(q, j));
  for (std::size_t i = 0; i < n; ++i) std::swap(a(i, p), a(i, q));
}

// Permutes isolated eigenvalues to the ends and then applies a power-of-two
// diagonal scaling to the remaining block. Replaces a by D^-1 P^T a P D.
inline Balance balance(Operator& a) {
  const std::size_t n = a.dim();
  Balance bal;
  bal.scale.assign(n, 1.0);
  std::size_t ilo = 0, ihi = n - 1;

  // Rows whose off-diagonal part (within columns ilo..ihi) vanishes go to
  // the bottom.
  for (bool found = true; found && ihi > 0;) {
    found = false;
    for (std::size_t jj = ihi + 1; jj-- > 0;) {
      bool isolated = true;
      for (std::size_t i = ilo; i <= ihi && isolated; ++i)
        if (i != jj && a(jj, i) != cplx(0.0)) isolated = false;
      if (isolated) {
        bal.swaps.emplace_back(jj, ihi);
        swap_rows_cols(a, jj, ihi);
        if (ihi == 0) break;
        --ihi;
        found = true;
        break;
      }
    }
  }
  // Columns whose off-diagonal part (within rows ilo..ihi) vanishes go to
  // the top.
  for (bool found = true; found && ilo < ihi;) {
    found = false;
    for (std::size_t j = ilo; j <= ihi; ++j) {
      bool isolated = true;
      for (std::size_t i = ilo; i <= ihi && isolated; ++i)
        if (i != j && a(i, j) != cplx(0.0)) isolated = false;
      if (isolated) {
        bal.swaps.emplace_back(j, ilo);
        swap_rows_cols(a, j, ilo);
        ++ilo;
        found = true;
        break;
      }
    }
  }
  bal.ilo = ilo;
  bal.ihi = ihi;

  constexpr double kRadix = 2.0;
  constexpr double kRadix2 = kRadix * kRadix;
  for (bool converged = false; !converged;) {
    converged = true;
    for (std::size_t i = ilo; i <= ihi; ++i) {
      double c = 0.0, r = 0.0;
      for (std::size_t j = ilo; j <= ihi; ++j) {
        if (j == i) continue;
        c += std::abs(a(j, i));
        r += std::abs(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / kRadix, f = 1.0;
      const double s = c + r;
      while (c < g && f < 1e100) f *= kRadix, c *= kRadix2;
      g = r * kRadix;
      while (c >= g && f > 1e-100) f /= kRadix, c /= kRadix2;
      if ((c + r) / f < 0.95 * s) {
        converged = false;
        bal.scale[i] *= f;
        for (std::size_t j = 0; j < n; ++j) a(i, j) /= f;
        for (std::size_t j = 0; j < n; ++j) a(j, i) *= f;
      }
    }
  }
  return bal;
}

// Householder reduction of the active block to upper Hessenberg form,
// accumulating the unitary into z.
inline void hessenberg(Operator& h, Operator& z, std::size_t ilo, std::size_t ihi) {
  const std::size_t n = h.dim();
  if (ihi < ilo + 2) return;
  CVector v;
  for (std::size_t k = ilo; k + 2 <= ihi; ++k) {
    const std::size_t m = ihi - k;  // length of x = h[k+1..ihi][k]
    v.assign(m, 0.0);
    double xnorm = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      v[i] = h(k + 1 + i, k);
      xnorm += std::norm(v[i]);
    }
    xnorm = std::sqrt(xnorm);
    double tail = 0.0;
    for (std::size_t i = 1; i < m; ++i) tail += std::norm(v[i]);
    if (tail == 0.0) continue;
    const cplx x0 = v[0];
    const cplx phase = std::abs(x0) == 0.0 ? cplx(1.0) : x0 / std::abs(x0);
    const cplx alpha = -phase * xnorm;
    v[0] -= alpha;
    const double vnorm = norm(v);
    for (auto& e : v) e /= vnorm;
    // h <- (I - 2 v v^H) h on rows k+1..ihi
    for (std::size_t j = k; j < n; ++j) {
      cplx s = 0.0;
      for (std::size_t i = 0; i < m; ++i) s += mul(std::conj(v[i]), h(k + 1 + i, j));
      s *= 2.0;
      for (std::size_t i = 0; i < m; ++i) h(k + 1 + i, j) -= mul(v[i], s);
    }
    // h <- h (I - 2 v v^H) on columns k+1..ihi
    for (std::size_t i = 0; i <= ihi; ++i) {
      cplx s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += mul(h(i, k + 1 + j), v[j]);
      s *= 2.0;
      for (std::size_t j = 0; j < m; ++j) h(i, k + 1 + j) -= mul(s, std::conj(v[j]));
    }
    for (std::size_t i = 0; i < n; ++i) {
      cplx s = 0.0;
      for (std::size_t j = 0; j < m; ++j) s += mul(z(i, k + 1 + j), v[j]);
      s *= 2.0;
      for (std::size_t j = 0; j < m; ++j) z(i, k + 1 + j) -= mul(s, std::conj(v[j]));
    }
    h(k + 1, k) = alpha;
    for (std::size_t i = 1; i < m; ++i) h(k + 1 + i, k) = 0.0;
  }
}

// Complex Givens rotation G = [[c, s], [-conj(s), c]] with G [x; y] = [r; 0].
struct Givens {
  double c;
  cplx s;
};

inline Givens make_givens(cplx x, cplx y) {
  const double ax = std::abs(x), ay = std::abs(y);
  if (ay == 0.0) return {1.0, 0.0};
  if (ax == 0.0) return {0.0, 1.0};
  const double r = std::hypot(ax, ay);
  return {ax / r, (x / ax) * std::conj(y) / r};
}

// Shifted QR iteration on the Hessenberg block ilo..ihi, producing the
// complex Schur form t = z^H a z (t upper triangular over the whole matrix).
inline void schur(Operator& t, Operator& z, std::size_t ilo, std::size_t ihi,
                  bool want_vectors) {
  const std::size_t n = t.dim();
  const double eps = std::numeric_limits<double>::epsilon();
  const double safe_min = std::numeric_limits<double>::min() / eps;
  if (ihi <= ilo) return;
  const std::size_t budget = 30 * std::max<std::size_t>(10, ihi - ilo + 1) * (ihi - ilo + 1);
  std::size_t total_iter = 0;
  std::size_t iu = ihi;
  int its = 0;

  while (iu > ilo) {
    // Find the lowest negligible subdiagonal in the active window.
    std::size_t l = iu;
    for (; l > ilo; --l) {
      const double sub = std::abs(t(l, l - 1));
      if (sub <= safe_min) break;
      double tst = std::abs(t(l - 1, l - 1)) + std::abs(t(l, l));
      if (tst == 0.0) {
        if (l >= ilo + 2) tst += std::abs(t(l - 1, l - 2));
        if (l + 1 <= iu) tst += std::abs(t(l + 1, l));
      }
      if (sub <= eps * tst) break;
    }
    if (l > ilo) t(l, l - 1) = 0.0;
    if (l == iu) {
      --iu;
      its = 0;
      continue;
    }
    if (++total_iter > budget)
      throw NonConvergence("QR iteration did not converge within " +
                           std::to_string(budget) + " sweeps");
    ++its;

    cplx shift;
    if (its % 10 == 0) {
      // Exceptional shift to break cycles.
      shift = t(iu, iu) + 0.75 * std::abs(t(iu, iu - 1).real());
      if (iu >= l + 2) shift += 0.4375 * std::abs(t(iu - 1, iu - 2));
    } else {
      const cplx a = t(iu - 1, iu - 1), b = t(iu - 1, iu), c = t(iu, iu - 1),
                 d = t(iu, iu);
      const cplx half = 0.5 * (a - d);
      const cplx disc = std::sqrt(half * half + b * c);
      const cplx mu1 = 0.5 * (a + d) + disc, mu2 = 0.5 * (a + d) - disc;
      shift = std::abs(mu1 - d) < std::abs(mu2 - d) ? mu1 : mu2;
    }

    // Implicit single-shift bulge chase over l..iu.
    for (std::size_t k = l; k < iu; ++k) {
      cplx x, y;
      if (k == l) {
        x = t(l, l) - shift;
        y = t(l + 1, l);
      } else {
        x = t(k, k - 1);
        y = t(k + 1, k - 1);
      }
      const Givens g = make_givens(x, y);
      const std::size_t jstart = (k == l) ? k : k - 1;
      for (std::size_t j = jstart; j < n; ++j) {
        const cplx p = t(k, j), q = t(k + 1, j);
        t(k, j) = g.c * p + mul(g.s, q);
        t(k + 1, j) = -mul(std::conj(g.s), p) + g.c * q;
      }
      if (k > l) t(k + 1, k - 1) = 0.0;
      const std::size_t iend = std::min(k + 2, iu);
      for (std::size_t i = 0; i <= iend; ++i) {
        const cplx p = t(i, k), q = t(i, k + 1);
        t(i, k) = g.c * p + mul(q, std::conj(g.s));
        t(i, k + 1) = -mul(p, g.s) + g.c * q;
      }
      if (want_vectors) {
        for (std::size_t i = 0; i < n; ++i) {
          const cplx p = z(i, k), q = z(i, k + 1);
          z(i, k) = g.c * p + mul(q, std::conj(g.s));
          z(i, k + 1) = -mul(p, g.s) + g.c * q;
        }
      }
    }
  }
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) t(i, j) = 0.0;
}

// Eigenvectors of the upper-triangular t by back substitution. Near-zero
// pivots are floored so coalescing eigenvalues produce nearly parallel
// (rather than infinite) vectors; partial vectors are rescaled to avoid
// overflow.
inline std::vector<CVector> triangular_eigenvectors(const Operator& t) {
  const std::size_t n = t.dim();
  const double eps = std::numeric_limits<double>::epsilon();
  const double smin_floor =
      std::max(eps * t.frobenius_norm(), std::numeric_limits<double>::min() / eps);
  std::vector<CVector> out(n, CVector(n));
  for (std::size_t k = 0; k < n; ++k) {
    CVector& x = out[k];
    const cplx lambda = t(k, k);
    x[k] = 1.0;
    for (std::size_t i = k; i-- > 0;) {
      cplx s = 0.0;
      for (std::size_t j = i + 1; j <= k; ++j) s += mul(t(i, j), x[j]);
      cplx d = t(i, i) - lambda;
      if (std::abs(d) < smin_floor) d = smin_floor;
      x[i] = -s / d;
      if (std::abs(x[i]) > 1e100) {
        const double f = 1.0 / std::abs(x[i]);
        for (std::size_t j = i; j <= k; ++j) x[j] *= f;
      }
    }
  }
  return out;
}

// Singular values by one-sided Jacobi rotations on the columns.
inline std::vector<double> singular_values(std::vector<CVector> cols) {
  const std::size_t n = cols.size();
  const double eps = std::numeric_limits<double>::epsilon();
  for (int sweep = 0; sweep < 80; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = std::pow(norm(cols[p]), 2);
        const double beta = std::pow(norm(cols[q]), 2);
        const cplx gamma = inner(cols[p], cols[q]);
        const double ag = std::abs(gamma);
        if (ag == 0.0 || ag <= eps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const cplx phase = gamma / ag;
        const double zeta = (beta - alpha) / (2.0 * ag);
        const double tt = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + tt * tt);
        const double s = c * tt;
        for (std::size_t i = 0; i < cols[p].size(); ++i) {
          const cplx up = cols[p][i];
          const cplx uq = mul(cols[q][i], std::conj(phase));
          cols[p][i] = c * up - s * uq;
          cols[q][i] = mul(s * up + c * uq, phase);
        }
      }
    if (!rotated) break;
  }
  std::vector<double> sv(n);
  for (std::size_t k = 0; k < n; ++k) sv[k] = norm(cols[k]);
  std::sort(sv.begin(), sv.end(), std::greater<>());
  return sv;
}

struct SchurResult {
  Operator t;
  Operator z;
  Balance bal;
};

inline SchurResult schur_decompose(const Operator& h, bool want_vectors) {
  h.require_finite("eigendecompose input");
  Operator t = h;
  Balance bal = balance(t);
  Operator z = Operator::identity(h.dim());
  hessenberg(t, z, bal.ilo, bal.ihi);
  schur(t, z, bal.ilo, bal.ihi, want_vectors);
  return {std::move(t), std::move(z), std::move(bal)};
}

inline void sort_order(const CVector& lambda, std::vector<std::size_t>& order) {
  order.resize(lambda.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (lambda[a].real() != lambda[b].real()) return lambda[a].real() < lambda[b].real();
    return lambda[a].imag() < lambda[b].imag();
  });
}

}  // namespace detail

// Eigenvalues only, sorted by (Re, Im).
inline CVector eigenvalues(const Operator& h) {
  auto sr = detail::schur_decompose(h, false);
  CVector lambda(h.dim());
  for (std::size_t i = 0; i < h.dim(); ++i) lambda[i] = sr.t(i, i);
  std::vector<std::size_t> order;
  detail::sort_order(lambda, order);
  CVector out;
  out.reserve(lambda.size());
  for (auto k : order) out.push_back(lambda[k]);
  return out;
}

inline Spectrum eigendecompose(const Operator& h) {
  const std::size_t n = h.dim();
  auto [t, z, bal] = detail::schur_decompose(h, true);
  const double eps = std::numeric_limits<double>::epsilon();

  // A normal Schur form means the Schur vectors already are eigenvectors.
  double offdiag = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) offdiag += std::norm(t(i, j));
  const bool normal = std::sqrt(offdiag) <= 100.0 * double(n) * eps * t.frobenius_norm();

  std::vector<CVector> tvecs;
  if (normal) {
    tvecs.assign(n, CVector(n));
    for (std::size_t k = 0; k < n; ++k) tvecs[k][k] = 1.0;
  } else {
    tvecs = detail::triangular_eigenvectors(t);
  }

  CVector lambda(n);
  for (std::size_t i = 0; i < n; ++i) lambda[i] = t(i, i);

  std::vector<CVector> vecs(n);
  for (std::size_t k = 0; k < n; ++k) {
    CVector v = z * tvecs[k];
    for (std::size_t i = 0; i < n; ++i) v[i] *= bal.scale[i];
    for (auto it = bal.swaps.rbegin(); it != bal.swaps.rend(); ++it)
      std::swap(v[it->first], v[it->second]);
    // Unit norm with the largest component real and positive.
    std::size_t big = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(v[i]) > std::abs(v[big]) * (1.0 + 1e-12)) big = i;
    const cplx phase = std::abs(v[big]) > 0 ? std::conj(v[big]) / std::abs(v[big]) : 1.0;
    const double nv = norm(v);
    for (auto& e : v) e = detail::mul(e, phase) / nv;
    vecs[k] = std::move(v);
  }

  std::vector<std::size_t> order;
  detail::sort_order(lambda, order);

  Spectrum s;
  s.eigenvalues.reserve(n);
  s.right_vectors.reserve(n);
  for (auto k : order) {
    s.eigenvalues.push_back(lambda[k]);
    s.right_vectors.push_back(std::move(vecs[k]));
  }

  const auto sv = detail::singular_values(s.right_vectors);
  s.vector_condition =
      sv.back() > 0.0 ? std::max(1.0, sv.front() / sv.back())
                      : std::numeric_limits<double>::infinity();

  Operator vmat(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) vmat(i, j) = s.right_vectors[j][i];
  LU lu(vmat);
  s.left_vectors.assign(n, CVector(n));
  s.left_reliable = false;
  if (!lu.singular()) {
    Operator w = lu.solve(Operator::identity(n));
    if (w.is_finite()) {
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) s.left_vectors[j][i] = std::conj(w(j, i));
      s.left_reliable = s.vector_condition < kDefectiveCondition;
    }
  }

  s.residuals.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    CVector r = h * s.right_vectors[j];
    for (std::size_t i = 0; i < n; ++i) r[i] -= detail::mul(s.eigenvalues[j], s.right_vectors[j][i]);
    s.residuals[j] = norm(r);
  }
  const double bound = kEigResidualTol * std::max(h.frobenius_norm(), std::numeric_limits<double>::min());
  for (double r : s.residuals)
    if (!(r <= bound))
      throw NonConvergence("eigenvector residual " + std::to_string(r) +
                           " exceeds tolerance " + std::to_string(bound));
  return s;
}

}  // namespace nhq
