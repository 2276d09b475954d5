#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tvlearn {

/// Closure of the difference stencils at the image border.
///
/// Dirichlet treats every pixel as an unknown and the ghost layer outside the
/// image as zero. Neumann drops the difference that would leave the image.
enum class Boundary { Dirichlet, Neumann };

/// Scalar field sampled on a uniform nx-by-ny grid, row-major (x fastest).
class ImageGrid {
public:
  ImageGrid() = default;
  /// Grid spacing defaults to 1/(min(nx, ny) - 1) so the short side has unit length.
  ImageGrid(std::size_t nx, std::size_t ny, double fill = 0.0);
  ImageGrid(std::size_t nx, std::size_t ny, double h, std::vector<double> values);

  static double default_spacing(std::size_t nx, std::size_t ny);

  std::size_t nx() const noexcept { return nx_; }
  std::size_t ny() const noexcept { return ny_; }
  std::size_t size() const noexcept { return values_.size(); }
  double h() const noexcept { return h_; }

  double& operator()(std::size_t i, std::size_t j) { return values_[j * nx_ + i]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[j * nx_ + i]; }
  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  /// Same shape and spacing, new contents.
  ImageGrid like(double fill = 0.0) const;
  bool same_shape(const ImageGrid& other) const noexcept;
  bool all_finite() const noexcept;

  ImageGrid& operator+=(const ImageGrid& other);
  ImageGrid& operator-=(const ImageGrid& other);
  ImageGrid& operator*=(double s);

private:
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  double h_ = 1.0;
  std::vector<double> values_;
};

ImageGrid operator+(ImageGrid a, const ImageGrid& b);
ImageGrid operator-(ImageGrid a, const ImageGrid& b);
ImageGrid operator*(double s, ImageGrid a);

/// Two components per grid node; pairs with an ImageGrid of the same shape.
struct VectorField {
  std::size_t nx = 0;
  std::size_t ny = 0;
  double h = 1.0;
  std::vector<double> qx;
  std::vector<double> qy;

  VectorField() = default;
  explicit VectorField(const ImageGrid& shape);
  std::size_t size() const noexcept { return qx.size(); }
  bool matches(const ImageGrid& g) const noexcept;
};

/// Forward differences scaled by 1/h.
VectorField grad(const ImageGrid& u, Boundary bc = Boundary::Dirichlet);

/// Exact negative adjoint of grad: inner(grad u, q) == -inner(u, div q).
ImageGrid div(const VectorField& q, Boundary bc = Boundary::Dirichlet);

/// div(grad(u)); the 5-point Laplacian with the matching closure.
ImageGrid laplacian(const ImageGrid& u, Boundary bc = Boundary::Dirichlet);

/// h^2-weighted L2 inner products and the induced norms.
double inner(const ImageGrid& a, const ImageGrid& b);
double inner(const VectorField& a, const VectorField& b);
double norm_l2(const ImageGrid& a);
double norm_l2(const VectorField& a);
double norm_inf(const ImageGrid& a);
/// Max over nodes of the Euclidean length |q(x)|.
double norm_inf(const VectorField& a);

}  // namespace tvlearn
