#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tvlearn {

/// Square banded matrix with kl sub- and ku super-diagonals.
///
/// Column-major LAPACK-style storage with kl extra rows on top for the fill-in
/// produced by partial pivoting: A(i, j) lives at ab[(kl + ku + i - j) + j * ldab].
class BandMatrix {
public:
  BandMatrix(std::size_t n, std::size_t kl, std::size_t ku);

  std::size_t n() const noexcept { return n_; }
  std::size_t kl() const noexcept { return kl_; }
  std::size_t ku() const noexcept { return ku_; }

  bool in_band(std::size_t i, std::size_t j) const noexcept {
    return i <= j + kl_ && j <= i + ku_;
  }
  /// Throws PreconditionError outside the declared band.
  void add(std::size_t i, std::size_t j, double v);
  double get(std::size_t i, std::size_t j) const;

  /// y = A x
  std::vector<double> multiply(std::span<const double> x) const;
  /// y = A^T x
  std::vector<double> multiply_transposed(std::span<const double> x) const;

private:
  friend class BandLU;
  double& ref(std::size_t i, std::size_t j) { return ab_[(kl_ + ku_ + i - j) + j * ldab_]; }
  const double& ref(std::size_t i, std::size_t j) const { return ab_[(kl_ + ku_ + i - j) + j * ldab_]; }

  std::size_t n_, kl_, ku_, ldab_;
  std::vector<double> ab_;
};

/// LU factorization with partial (row) pivoting that stays inside the band.
class BandLU {
public:
  /// Throws SingularMatrixError on a zero or non-finite pivot.
  explicit BandLU(BandMatrix a);

  std::vector<double> solve(std::span<const double> b) const;
  /// Solves A^T x = b with the same factors.
  std::vector<double> solve_transposed(std::span<const double> b) const;

private:
  BandMatrix lu_;
  std::vector<std::size_t> pivots_;
};

}  // namespace tvlearn
