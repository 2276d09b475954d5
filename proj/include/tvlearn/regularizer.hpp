#pragma once

#include <array>
#include <optional>

namespace tvlearn {

using Vec2 = std::array<double, 2>;

/// Row-major 2x2 matrix: {m00, m01, m10, m11}.
struct Mat2 {
  double a00 = 0.0, a01 = 0.0, a10 = 0.0, a11 = 0.0;

  static Mat2 identity(double s = 1.0) { return {s, 0.0, 0.0, s}; }
  Vec2 apply(const Vec2& v) const { return {a00 * v[0] + a01 * v[1], a10 * v[0] + a11 * v[1]}; }
  Mat2 transposed() const { return {a00, a10, a01, a11}; }
};

/// Which smoothing of the TV subgradient is used.
///
/// MaxForm is gamma*z / max(1, gamma*|z|), the derivative of the Huber function.
/// C1Form is the continuously differentiable three-branch variant capped at g_cap;
/// it is the one the linearized and adjoint equations are built from.
enum class HuberVariant { MaxForm, C1Form };

struct HuberParams {
  double gamma = 100.0;
  double g_cap = 1.0;
  HuberVariant variant = HuberVariant::MaxForm;

  /// Throws PreconditionError unless gamma > 0 and, for C1Form, g_cap > 1/(2 gamma).
  void validate() const;
  HuberParams with_variant(HuberVariant v) const {
    HuberParams p = *this;
    p.variant = v;
    return p;
  }
};

/// Huber-regularized |z|. For C1Form this is the potential whose gradient is h_gamma.
double huber_value(const Vec2& z, const HuberParams& p);

/// Smoothed subgradient of |z|. |h_gamma(z)| <= max(1, g_cap), h_gamma(0) = 0.
Vec2 h_gamma(const Vec2& z, const HuberParams& p);

/// Scalar magnitude of the C1Form: h_gamma(z) = z/|z| * chi_gamma(z). C1Form only.
double chi_gamma(const Vec2& z, const HuberParams& p);

/// Per-cell Jacobian of z -> h_gamma(z), as used in the Newton and linearized systems.
///
/// MaxForm: gamma/m I - [gamma|z| >= 1] gamma^2/m^2 d z^T with m = max(1, gamma|z|),
/// where d = z/|z| for the plain Jacobian and d = q/max(1,|q|) when `modified` is set
/// (dual_q must then be present). C1Form: chi/|z| I + (chi' - chi/|z|) d e^T with e = z/|z|
/// and d = e (plain, symmetric) or d = q/max(chi, |q|) (modified). Both agree when q = h_gamma(z).
/// At z = 0 both return gamma*I.
Mat2 newton_diffusion_matrix(const Vec2& z, const std::optional<Vec2>& dual_q,
                             const HuberParams& p, bool modified);

}  // namespace tvlearn
