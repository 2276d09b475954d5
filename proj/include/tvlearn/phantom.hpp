#pragma once

#include <string>
#include <vector>

#include "tvlearn/grid.hpp"

namespace tvlearn {

/// Names accepted by make_phantom().
std::vector<std::string> phantom_names();

/// Synthetic test images defined on the unit square and sampled at node
/// (i h, j h) with 4x4 supersampling over the surrounding cell, so the same
/// phantom can be produced at any resolution.
///
///   shapes: piecewise constant disc, rectangle and triangle on a 0.2 background
///   ramp:   smooth horizontal ramp with a bright disc
///   mixed:  shapes over a gentle vertical ramp (default)
ImageGrid make_phantom(const std::string& name, std::size_t nx, std::size_t ny);

}  // namespace tvlearn
