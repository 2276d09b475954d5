#include "tvlearn/band_lu.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tvlearn/error.hpp"

namespace tvlearn {

BandMatrix::BandMatrix(std::size_t n, std::size_t kl, std::size_t ku)
    : n_(n), kl_(kl), ku_(ku), ldab_(2 * kl + ku + 1), ab_(ldab_ * n, 0.0) {
  if (n == 0) throw PreconditionError("BandMatrix: empty matrix");
}

void BandMatrix::add(std::size_t i, std::size_t j, double v) {
  if (i >= n_ || j >= n_ || !in_band(i, j)) {
    throw PreconditionError("BandMatrix::add: entry (" + std::to_string(i) + ", " +
                            std::to_string(j) + ") outside the band");
  }
  ref(i, j) += v;
}

double BandMatrix::get(std::size_t i, std::size_t j) const {
  if (i >= n_ || j >= n_ || !in_band(i, j)) return 0.0;
  return ref(i, j);
}

std::vector<double> BandMatrix::multiply(std::span<const double> x) const {
  if (x.size() != n_) throw PreconditionError("BandMatrix::multiply: size mismatch");
  std::vector<double> y(n_, 0.0);
  for (std::size_t j = 0; j < n_; ++j) {
    const std::size_t i0 = j > ku_ ? j - ku_ : 0;
    const std::size_t i1 = std::min(n_ - 1, j + kl_);
    for (std::size_t i = i0; i <= i1; ++i) y[i] += ref(i, j) * x[j];
  }
  return y;
}

std::vector<double> BandMatrix::multiply_transposed(std::span<const double> x) const {
  if (x.size() != n_) throw PreconditionError("BandMatrix::multiply_transposed: size mismatch");
  std::vector<double> y(n_, 0.0);
  for (std::size_t j = 0; j < n_; ++j) {
    const std::size_t i0 = j > ku_ ? j - ku_ : 0;
    const std::size_t i1 = std::min(n_ - 1, j + kl_);
    double s = 0.0;
    for (std::size_t i = i0; i <= i1; ++i) s += ref(i, j) * x[i];
    y[j] = s;
  }
  return y;
}

BandLU::BandLU(BandMatrix a) : lu_(std::move(a)), pivots_(lu_.n_) {
  const std::size_t n = lu_.n_, kl = lu_.kl_, ku = lu_.ku_;
  std::size_t ju = 0;  // last column touched by the interchanges so far
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t km = std::min(kl, n - 1 - j);

    std::size_t jp = j;
    double best = std::abs(lu_.ref(j, j));
    for (std::size_t i = j + 1; i <= j + km; ++i) {
      const double v = std::abs(lu_.ref(i, j));
      if (v > best) {
        best = v;
        jp = i;
      }
    }
    pivots_[j] = jp;
    if (!(best > 0.0) || !std::isfinite(best)) {
      throw SingularMatrixError("BandLU: zero or non-finite pivot in column " + std::to_string(j), j);
    }

    ju = std::max(ju, std::min(jp + ku, n - 1));
    if (jp != j) {
      for (std::size_t c = j; c <= ju; ++c) std::swap(lu_.ref(j, c), lu_.ref(jp, c));
    }
    if (km == 0) continue;

    const double inv = 1.0 / lu_.ref(j, j);
    double* col = &lu_.ref(j + 1, j);
    for (std::size_t r = 0; r < km; ++r) col[r] *= inv;

    for (std::size_t c = j + 1; c <= ju; ++c) {
      const double u = lu_.ref(j, c);
      if (u == 0.0) continue;
      double* dst = &lu_.ref(j + 1, c);
      for (std::size_t r = 0; r < km; ++r) dst[r] -= col[r] * u;
    }
  }
}

std::vector<double> BandLU::solve(std::span<const double> b) const {
  const std::size_t n = lu_.n_, kl = lu_.kl_, kv = lu_.kl_ + lu_.ku_;
  if (b.size() != n) throw PreconditionError("BandLU::solve: size mismatch");
  std::vector<double> x(b.begin(), b.end());

  for (std::size_t j = 0; j < n; ++j) {
    if (pivots_[j] != j) std::swap(x[j], x[pivots_[j]]);
    const std::size_t km = std::min(kl, n - 1 - j);
    const double xj = x[j];
    if (km == 0 || xj == 0.0) continue;
    const double* col = &lu_.ref(j + 1, j);
    for (std::size_t r = 0; r < km; ++r) x[j + 1 + r] -= col[r] * xj;
  }
  for (std::size_t jj = n; jj-- > 0;) {
    x[jj] /= lu_.ref(jj, jj);
    const double xj = x[jj];
    if (xj == 0.0) continue;
    const std::size_t i0 = jj > kv ? jj - kv : 0;
    for (std::size_t i = i0; i < jj; ++i) x[i] -= lu_.ref(i, jj) * xj;
  }
  return x;
}

std::vector<double> BandLU::solve_transposed(std::span<const double> b) const {
  const std::size_t n = lu_.n_, kl = lu_.kl_, kv = lu_.kl_ + lu_.ku_;
  if (b.size() != n) throw PreconditionError("BandLU::solve_transposed: size mismatch");
  std::vector<double> x(b.begin(), b.end());

  // U^T y = b
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t i0 = j > kv ? j - kv : 0;
    double s = x[j];
    for (std::size_t i = i0; i < j; ++i) s -= lu_.ref(i, j) * x[i];
    x[j] = s / lu_.ref(j, j);
  }
  // L^T with the interchanges undone in reverse order
  for (std::size_t j = n; j-- > 0;) {
    const std::size_t km = std::min(kl, n - 1 - j);
    double s = x[j];
    for (std::size_t r = 1; r <= km; ++r) s -= lu_.ref(j + r, j) * x[j + r];
    x[j] = s;
    if (pivots_[j] != j) std::swap(x[j], x[pivots_[j]]);
  }
  return x;
}

}  // namespace tvlearn
