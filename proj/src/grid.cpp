#include "tvlearn/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tvlearn/error.hpp"

namespace tvlearn {

namespace {

void require_shape(const ImageGrid& a, const ImageGrid& b, const char* where) {
  if (!a.same_shape(b)) {
    throw PreconditionError(std::string(where) + ": dimension mismatch");
  }
}

void require_shape(const VectorField& a, const VectorField& b, const char* where) {
  if (a.nx != b.nx || a.ny != b.ny) {
    throw PreconditionError(std::string(where) + ": dimension mismatch");
  }
}

}  // namespace

double ImageGrid::default_spacing(std::size_t nx, std::size_t ny) {
  const std::size_t n = std::min(nx, ny);
  return 1.0 / static_cast<double>(n - 1);
}

ImageGrid::ImageGrid(std::size_t nx, std::size_t ny, double fill)
    : nx_(nx), ny_(ny), values_(nx * ny, fill) {
  if (nx < 2 || ny < 2) throw PreconditionError("ImageGrid: need at least 2x2 pixels");
  h_ = default_spacing(nx, ny);
}

ImageGrid::ImageGrid(std::size_t nx, std::size_t ny, double h, std::vector<double> values)
    : nx_(nx), ny_(ny), h_(h), values_(std::move(values)) {
  if (nx < 2 || ny < 2) throw PreconditionError("ImageGrid: need at least 2x2 pixels");
  if (!(h > 0.0)) throw PreconditionError("ImageGrid: spacing must be positive");
  if (values_.size() != nx * ny) throw PreconditionError("ImageGrid: value count != nx*ny");
}

ImageGrid ImageGrid::like(double fill) const {
  ImageGrid g;
  g.nx_ = nx_;
  g.ny_ = ny_;
  g.h_ = h_;
  g.values_.assign(values_.size(), fill);
  return g;
}

bool ImageGrid::same_shape(const ImageGrid& other) const noexcept {
  return nx_ == other.nx_ && ny_ == other.ny_;
}

bool ImageGrid::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

ImageGrid& ImageGrid::operator+=(const ImageGrid& other) {
  require_shape(*this, other, "ImageGrid::operator+=");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += other.values_[k];
  return *this;
}

ImageGrid& ImageGrid::operator-=(const ImageGrid& other) {
  require_shape(*this, other, "ImageGrid::operator-=");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= other.values_[k];
  return *this;
}

ImageGrid& ImageGrid::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

ImageGrid operator+(ImageGrid a, const ImageGrid& b) { return a += b; }
ImageGrid operator-(ImageGrid a, const ImageGrid& b) { return a -= b; }
ImageGrid operator*(double s, ImageGrid a) { return a *= s; }

VectorField::VectorField(const ImageGrid& shape)
    : nx(shape.nx()), ny(shape.ny()), h(shape.h()), qx(shape.size(), 0.0), qy(shape.size(), 0.0) {}

bool VectorField::matches(const ImageGrid& g) const noexcept {
  return nx == g.nx() && ny == g.ny();
}

VectorField grad(const ImageGrid& u, Boundary bc) {
  VectorField q(u);
  const std::size_t nx = u.nx(), ny = u.ny();
  const double inv_h = 1.0 / u.h();
  const bool dirichlet = bc == Boundary::Dirichlet;
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t k = j * nx + i;
      const double c = u[k];
      if (i + 1 < nx) {
        q.qx[k] = (u[k + 1] - c) * inv_h;
      } else {
        q.qx[k] = dirichlet ? -c * inv_h : 0.0;
      }
      if (j + 1 < ny) {
        q.qy[k] = (u[k + nx] - c) * inv_h;
      } else {
        q.qy[k] = dirichlet ? -c * inv_h : 0.0;
      }
    }
  }
  return q;
}

ImageGrid div(const VectorField& q, Boundary bc) {
  if (q.qx.size() != q.nx * q.ny || q.qy.size() != q.nx * q.ny) {
    throw PreconditionError("div: component size does not match nx*ny");
  }
  ImageGrid d(q.nx, q.ny, q.h, std::vector<double>(q.nx * q.ny, 0.0));
  const std::size_t nx = q.nx, ny = q.ny;
  const double inv_h = 1.0 / q.h;
  const bool dirichlet = bc == Boundary::Dirichlet;
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t k = j * nx + i;
      // Column i of the transposed forward-difference matrix.
      double sx = (i + 1 < nx || dirichlet) ? q.qx[k] : 0.0;
      if (i > 0) sx -= q.qx[k - 1];
      double sy = (j + 1 < ny || dirichlet) ? q.qy[k] : 0.0;
      if (j > 0) sy -= q.qy[k - nx];
      d[k] = (sx + sy) * inv_h;
    }
  }
  return d;
}

ImageGrid laplacian(const ImageGrid& u, Boundary bc) { return div(grad(u, bc), bc); }

double inner(const ImageGrid& a, const ImageGrid& b) {
  require_shape(a, b, "inner");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s * a.h() * a.h();
}

double inner(const VectorField& a, const VectorField& b) {
  require_shape(a, b, "inner");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a.qx[k] * b.qx[k] + a.qy[k] * b.qy[k];
  return s * a.h * a.h;
}

double norm_l2(const ImageGrid& a) { return std::sqrt(inner(a, a)); }
double norm_l2(const VectorField& a) { return std::sqrt(inner(a, a)); }

double norm_inf(const ImageGrid& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

double norm_inf(const VectorField& a) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::hypot(a.qx[k], a.qy[k]));
  return m;
}

}  // namespace tvlearn
