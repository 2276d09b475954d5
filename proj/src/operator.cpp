#include "tvlearn/operator.hpp"

#include <array>

#include "tvlearn/error.hpp"

namespace tvlearn {

namespace {

struct Stencil {
  std::array<std::size_t, 3> node{};
  std::array<double, 3> dx{};  // d(gx)/d u_node
  std::array<double, 3> dy{};  // d(gy)/d u_node
  int count = 0;
};

// Nonzeros of the two gradient rows that belong to cell (i, j).
Stencil cell_stencil(std::size_t i, std::size_t j, std::size_t nx, std::size_t ny, double inv_h,
                     Boundary bc) {
  Stencil s;
  const std::size_t k = j * nx + i;
  const bool dirichlet = bc == Boundary::Dirichlet;
  const bool has_x = i + 1 < nx;
  const bool has_y = j + 1 < ny;

  s.node[0] = k;
  s.dx[0] = (has_x || dirichlet) ? -inv_h : 0.0;
  s.dy[0] = (has_y || dirichlet) ? -inv_h : 0.0;
  s.count = 1;
  if (has_x) {
    s.node[s.count] = k + 1;
    s.dx[s.count] = inv_h;
    s.dy[s.count] = 0.0;
    ++s.count;
  }
  if (has_y) {
    s.node[s.count] = k + nx;
    s.dx[s.count] = 0.0;
    s.dy[s.count] = inv_h;
    ++s.count;
  }
  return s;
}

void check_sizes(const ImageGrid& shape, std::span<const Mat2> tensor, std::span<const double> reaction) {
  if (tensor.size() != shape.size() || reaction.size() != shape.size()) {
    throw PreconditionError("operator: coefficient size does not match the grid");
  }
}

ImageGrid apply_impl(const ImageGrid& z, Boundary bc, std::span<const Mat2> tensor,
                     std::span<const double> reaction, bool transpose) {
  check_sizes(z, tensor, reaction);
  VectorField g = grad(z, bc);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Mat2 m = transpose ? tensor[k].transposed() : tensor[k];
    const Vec2 v = m.apply({g.qx[k], g.qy[k]});
    g.qx[k] = v[0];
    g.qy[k] = v[1];
  }
  ImageGrid out = div(g, bc);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = -out[k] + reaction[k] * z[k];
  return out;
}

}  // namespace

BandMatrix assemble_operator(const ImageGrid& shape, Boundary bc, std::span<const Mat2> tensor,
                             std::span<const double> reaction, std::span<const double> row_scale) {
  check_sizes(shape, tensor, reaction);
  if (!row_scale.empty() && row_scale.size() != shape.size()) {
    throw PreconditionError("assemble_operator: row_scale size does not match the grid");
  }
  const std::size_t nx = shape.nx(), ny = shape.ny();
  const double inv_h = 1.0 / shape.h();
  BandMatrix A(shape.size(), nx, nx);

  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t k = j * nx + i;
      const Stencil s = cell_stencil(i, j, nx, ny, inv_h, bc);
      const Mat2& D = tensor[k];
      for (int a = 0; a < s.count; ++a) {
        // Row a of G^T D: (dx_a, dy_a) * D
        const double ra = s.dx[a] * D.a00 + s.dy[a] * D.a10;
        const double rb = s.dx[a] * D.a01 + s.dy[a] * D.a11;
        const double scale = row_scale.empty() ? 1.0 : row_scale[s.node[a]];
        for (int b = 0; b < s.count; ++b) {
          const double v = ra * s.dx[b] + rb * s.dy[b];
          if (v != 0.0) A.add(s.node[a], s.node[b], scale * v);
        }
      }
    }
  }
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (reaction[k] != 0.0) A.add(k, k, reaction[k]);
  }
  return A;
}

ImageGrid apply_operator(const ImageGrid& z, Boundary bc, std::span<const Mat2> tensor,
                         std::span<const double> reaction) {
  return apply_impl(z, bc, tensor, reaction, false);
}

ImageGrid apply_operator_transposed(const ImageGrid& z, Boundary bc, std::span<const Mat2> tensor,
                                    std::span<const double> reaction) {
  return apply_impl(z, bc, tensor, reaction, true);
}

}  // namespace tvlearn
