#pragma once

#include <span>

#include "tvlearn/band_lu.hpp"
#include "tvlearn/grid.hpp"
#include "tvlearn/regularizer.hpp"

namespace tvlearn {

/// Assemble diag(row_scale) * G^T D G + diag(reaction) as a band matrix.
///
/// G is the forward-difference gradient used by grad(), D holds one 2x2 tensor per
/// grid cell, so the result is the strong form of -div(D grad z) + c z. An empty
/// row_scale means identity. Bandwidth is nx on both sides.
BandMatrix assemble_operator(const ImageGrid& shape, Boundary bc, std::span<const Mat2> tensor,
                             std::span<const double> reaction,
                             std::span<const double> row_scale = {});

/// Matrix-free -div(D grad z) + c z through grad()/div().
ImageGrid apply_operator(const ImageGrid& z, Boundary bc, std::span<const Mat2> tensor,
                         std::span<const double> reaction);

/// Same with every tensor transposed: the adjoint under the h^2-weighted inner product.
ImageGrid apply_operator_transposed(const ImageGrid& z, Boundary bc, std::span<const Mat2> tensor,
                                    std::span<const double> reaction);

}  // namespace tvlearn
