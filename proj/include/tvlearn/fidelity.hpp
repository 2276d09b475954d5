#pragma once

#include <optional>

#include "tvlearn/grid.hpp"

namespace tvlearn {

enum class FidelityKind { Gaussian, Poisson, ImpulseHuber };

/// One noise model phi_i(u; f) together with the noisy data f it compares against.
struct FidelitySpec {
  FidelityKind kind = FidelityKind::Gaussian;
  ImageGrid data;
  double gamma_l1 = 100.0;  // Huber parameter of the L1 term (impulse only)
  double u_floor = 1e-6;    // positivity floor (Poisson only)

  /// Poisson needs f >= 0; gamma_l1 and u_floor must be positive.
  void validate() const;
};

/// Integrated fidelity: 1/2||u-f||^2, int(u - f log u), or int huber(u - f).
double phi(const ImageGrid& u, const FidelitySpec& s);

/// Pointwise derivative in u. For ImpulseHuber this is the dual variable p, |p| <= 1.
ImageGrid dphi(const ImageGrid& u, const FidelitySpec& s);

/// Pointwise second derivative (multiplier field).
///
/// For ImpulseHuber the active-set correction uses sign(u - f), or p/max(1,|p|) with
/// `modified` (p_dual must then be given), mirroring the 2D Newton matrix.
ImageGrid d2phi(const ImageGrid& u, const FidelitySpec& s, bool modified = false,
                const std::optional<ImageGrid>& p_dual = std::nullopt);

/// Scalar Huber pieces used by the impulse model.
double huber_scalar(double t, double gamma);
double huber_scalar_slope(double t, double gamma);

}  // namespace tvlearn
