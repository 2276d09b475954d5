#include "tvlearn/fidelity.hpp"

#include <algorithm>
#include <cmath>

#include "tvlearn/error.hpp"

namespace tvlearn {

namespace {

void check_pair(const ImageGrid& u, const FidelitySpec& s) {
  if (!u.same_shape(s.data)) throw PreconditionError("fidelity: u and data differ in shape");
}

double clamped(double u, const FidelitySpec& s) {
  const double v = std::max(u, s.u_floor);
  if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("Poisson fidelity: u not positive");
  return v;
}

}  // namespace

void FidelitySpec::validate() const {
  if (!(gamma_l1 > 0.0)) throw PreconditionError("FidelitySpec: gamma_l1 must be positive");
  if (!(u_floor > 0.0)) throw PreconditionError("FidelitySpec: u_floor must be positive");
  if (!data.all_finite()) throw PreconditionError("FidelitySpec: data not finite");
  if (kind == FidelityKind::Poisson) {
    for (double v : data.values()) {
      if (v < 0.0) throw PreconditionError("FidelitySpec: Poisson data must be nonnegative");
    }
  }
}

double huber_scalar(double t, double gamma) {
  const double a = std::abs(t);
  if (a >= 1.0 / gamma) return a - 0.5 / gamma;
  return 0.5 * gamma * t * t;
}

double huber_scalar_slope(double t, double gamma) {
  return gamma * t / std::max(1.0, gamma * std::abs(t));
}

double phi(const ImageGrid& u, const FidelitySpec& s) {
  check_pair(u, s);
  const auto& f = s.data;
  double acc = 0.0;
  switch (s.kind) {
    case FidelityKind::Gaussian:
      for (std::size_t k = 0; k < u.size(); ++k) {
        const double r = u[k] - f[k];
        acc += 0.5 * r * r;
      }
      break;
    case FidelityKind::Poisson:
      for (std::size_t k = 0; k < u.size(); ++k) {
        const double v = clamped(u[k], s);
        acc += v - (f[k] > 0.0 ? f[k] * std::log(v) : 0.0);
      }
      break;
    case FidelityKind::ImpulseHuber:
      for (std::size_t k = 0; k < u.size(); ++k) acc += huber_scalar(u[k] - f[k], s.gamma_l1);
      break;
  }
  return acc * u.h() * u.h();
}

ImageGrid dphi(const ImageGrid& u, const FidelitySpec& s) {
  check_pair(u, s);
  const auto& f = s.data;
  ImageGrid out = u.like();
  for (std::size_t k = 0; k < u.size(); ++k) {
    switch (s.kind) {
      case FidelityKind::Gaussian: out[k] = u[k] - f[k]; break;
      case FidelityKind::Poisson: out[k] = 1.0 - f[k] / clamped(u[k], s); break;
      case FidelityKind::ImpulseHuber: out[k] = huber_scalar_slope(u[k] - f[k], s.gamma_l1); break;
    }
  }
  return out;
}

ImageGrid d2phi(const ImageGrid& u, const FidelitySpec& s, bool modified,
                const std::optional<ImageGrid>& p_dual) {
  check_pair(u, s);
  if (modified && s.kind == FidelityKind::ImpulseHuber) {
    if (!p_dual) throw PreconditionError("d2phi: modified impulse form needs p_dual");
    check_pair(*p_dual, s);
  }
  const auto& f = s.data;
  ImageGrid out = u.like();
  for (std::size_t k = 0; k < u.size(); ++k) {
    switch (s.kind) {
      case FidelityKind::Gaussian: out[k] = 1.0; break;
      case FidelityKind::Poisson: {
        const double v = clamped(u[k], s);
        out[k] = f[k] / (v * v);
        break;
      }
      case FidelityKind::ImpulseHuber: {
        const double g = s.gamma_l1;
        const double t = u[k] - f[k];
        const double m = std::max(1.0, g * std::abs(t));
        double val = g / m;
        if (g * std::abs(t) >= 1.0) {
          if (modified) {
            const double d = (*p_dual)[k] / std::max(1.0, std::abs((*p_dual)[k]));
            val -= g * g / (m * m) * t * d;
          } else {
            val = 0.0;  // saturated branch: g/m - g^2 |t| / m^2 cancels exactly
          }
        }
        out[k] = val;
        break;
      }
    }
  }
  return out;
}

}  // namespace tvlearn
