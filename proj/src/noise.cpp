#include "tvlearn/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tvlearn/error.hpp"

namespace tvlearn {

std::uint64_t SplitMix64::next() noexcept {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double SplitMix64::uniform() noexcept {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double SplitMix64::normal() noexcept {
  const double u1 = 1.0 - uniform();  // (0,1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t SplitMix64::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw PreconditionError("poisson: mean must be finite and >= 0");
  if (mean == 0.0) return 0;
  const auto chunks = static_cast<std::uint64_t>(std::ceil(mean / 500.0));
  const double m = mean / static_cast<double>(chunks);
  std::uint64_t total = 0;
  for (std::uint64_t c = 0; c < chunks; ++c) {
    const double u = uniform();
    double p = std::exp(-m);
    double cdf = p;
    std::uint64_t k = 0;
    while (u >= cdf && p > 0.0) {
      ++k;
      p *= m / static_cast<double>(k);
      cdf += p;
    }
    total += k;
  }
  return total;
}

std::string to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::Gaussian: return "gaussian";
    case NoiseKind::Poisson: return "poisson";
    case NoiseKind::SaltPepper: return "salt_pepper";
  }
  return "?";
}

NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "gaussian") return NoiseKind::Gaussian;
  if (s == "poisson") return NoiseKind::Poisson;
  if (s == "salt_pepper" || s == "impulse") return NoiseKind::SaltPepper;
  throw PreconditionError("unknown noise kind '" + s + "'");
}

void NoiseSpec::validate() const {
  if (!std::isfinite(mean)) throw PreconditionError("noise: mean must be finite");
  if (!(variance >= 0.0) || !std::isfinite(variance)) throw PreconditionError("noise: variance must be >= 0");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw PreconditionError("noise: scale must be > 0");
  if (!(density >= 0.0 && density <= 1.0)) throw PreconditionError("noise: density must lie in [0,1]");
}

ImageGrid add_noise(const ImageGrid& clean, const NoiseSpec& spec, std::uint64_t seed) {
  spec.validate();
  SplitMix64 rng(seed);
  ImageGrid out = clean;
  const double sd = std::sqrt(spec.variance);
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double u = clean[k];
    if (!(u >= 0.0 && u <= 1.0)) throw PreconditionError("add_noise: input must lie in [0,1]");
    double v = u;
    switch (spec.kind) {
      case NoiseKind::Gaussian:
        if (spec.variance > 0.0 || spec.mean != 0.0) v = u + spec.mean + sd * rng.normal();
        break;
      case NoiseKind::Poisson:
        v = static_cast<double>(rng.poisson(spec.scale * u)) / spec.scale;
        break;
      case NoiseKind::SaltPepper:
        if (spec.density > 0.0 && rng.uniform() < spec.density) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
        break;
    }
    out[k] = std::clamp(v, 0.0, 1.0);
  }
  return out;
}

}  // namespace tvlearn
