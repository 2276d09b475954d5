#include "tvlearn/regularizer.hpp"

#include <algorithm>
#include <cmath>

#include "tvlearn/error.hpp"

namespace tvlearn {

namespace {

double norm(const Vec2& z) { return std::hypot(z[0], z[1]); }

// Branch boundaries of the C1 form, in terms of t = gamma*|z|.
struct C1Breaks {
  double lower;  // g - 1/(2 gamma)
  double upper;  // g + 1/(2 gamma)
};

C1Breaks c1_breaks(const HuberParams& p) {
  const double w = 0.5 / p.gamma;
  return {p.g_cap - w, p.g_cap + w};
}

double c1_chi(double s, const HuberParams& p) {
  const double t = p.gamma * s;
  const auto br = c1_breaks(p);
  if (t <= br.lower) return t;
  if (t >= br.upper) return p.g_cap;
  const double a = p.g_cap - t + 0.5 / p.gamma;
  return p.g_cap - 0.5 * p.gamma * a * a;
}

// d chi / d|z|
double c1_chi_slope(double s, const HuberParams& p) {
  const double t = p.gamma * s;
  const auto br = c1_breaks(p);
  if (t <= br.lower) return p.gamma;
  if (t >= br.upper) return 0.0;
  return p.gamma * p.gamma * (p.g_cap - t + 0.5 / p.gamma);
}

// Integral of chi from 0 to s.
double c1_potential(double s, const HuberParams& p) {
  const auto br = c1_breaks(p);
  const double s0 = br.lower / p.gamma;
  const double s1 = br.upper / p.gamma;
  if (s <= s0) return 0.5 * p.gamma * s * s;
  const double base = 0.5 * p.gamma * s0 * s0;
  const double a = p.g_cap + 0.5 / p.gamma;
  auto cube = [](double x) { return x * x * x; };
  const double se = std::min(s, s1);
  const double mid = p.g_cap * (se - s0) + (cube(a - p.gamma * se) - cube(a - p.gamma * s0)) / 6.0;
  if (s <= s1) return base + mid;
  return base + mid + p.g_cap * (s - s1);
}

}  // namespace

void HuberParams::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw PreconditionError("HuberParams: gamma must be positive and finite");
  }
  if (variant == HuberVariant::C1Form && !(g_cap > 0.5 / gamma)) {
    throw PreconditionError("HuberParams: C1 form needs g_cap > 1/(2 gamma)");
  }
}

double huber_value(const Vec2& z, const HuberParams& p) {
  const double s = norm(z);
  if (p.variant == HuberVariant::C1Form) return c1_potential(s, p);
  if (s >= 1.0 / p.gamma) return s - 0.5 / p.gamma;
  return 0.5 * p.gamma * s * s;
}

Vec2 h_gamma(const Vec2& z, const HuberParams& p) {
  const double s = norm(z);
  if (p.variant == HuberVariant::MaxForm) {
    const double f = p.gamma / std::max(1.0, p.gamma * s);
    return {f * z[0], f * z[1]};
  }
  if (p.gamma * s <= c1_breaks(p).lower) return {p.gamma * z[0], p.gamma * z[1]};
  const double f = c1_chi(s, p) / s;
  return {f * z[0], f * z[1]};
}

double chi_gamma(const Vec2& z, const HuberParams& p) {
  if (p.variant != HuberVariant::C1Form) {
    throw PreconditionError("chi_gamma: only defined for the C1 form");
  }
  return c1_chi(norm(z), p);
}

Mat2 newton_diffusion_matrix(const Vec2& z, const std::optional<Vec2>& dual_q,
                             const HuberParams& p, bool modified) {
  const double s = norm(z);
  const double g = p.gamma;

  if (p.variant == HuberVariant::C1Form) {
    if (g * s <= c1_breaks(p).lower) return Mat2::identity(g);
    const double chi_over_s = c1_chi(s, p) / s;
    const double slope = c1_chi_slope(s, p);
    const double ex = z[0] / s, ey = z[1] / s;
    // chi/|z| I + (chi' - chi/|z|) d e^T, d = e (plain) or q/max(chi, |q|) (modified)
    double dx = ex, dy = ey;
    if (modified) {
      if (!dual_q) throw PreconditionError("newton_diffusion_matrix: modified form needs dual_q");
      const double qn = std::max(c1_chi(s, p), norm(*dual_q));
      dx = (*dual_q)[0] / qn;
      dy = (*dual_q)[1] / qn;
    }
    const double c = slope - chi_over_s;
    return {chi_over_s + c * dx * ex, c * dx * ey, c * dy * ex, chi_over_s + c * dy * ey};
  }

  const double m = std::max(1.0, g * s);
  Mat2 M = Mat2::identity(g / m);
  if (g * s < 1.0) return M;

  Vec2 d;
  if (modified) {
    if (!dual_q) throw PreconditionError("newton_diffusion_matrix: modified form needs dual_q");
    const double qn = std::max(1.0, norm(*dual_q));
    d = {(*dual_q)[0] / qn, (*dual_q)[1] / qn};
  } else {
    d = {z[0] / s, z[1] / s};
  }
  const double c = g * g / (m * m);
  M.a00 -= c * d[0] * z[0];
  M.a01 -= c * d[0] * z[1];
  M.a10 -= c * d[1] * z[0];
  M.a11 -= c * d[1] * z[1];
  return M;
}

}  // namespace tvlearn
