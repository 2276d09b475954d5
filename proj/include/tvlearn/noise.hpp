#pragma once

#include <cstdint>
#include <string>

#include "tvlearn/grid.hpp"

namespace tvlearn {

/// SplitMix64 (Steele, Lea, Flood 2014). State advances by 0x9E3779B97F4A7C15;
/// the output mix is the one from Java's SplittableRandom.
class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept;
  /// Top 53 bits scaled to [0,1).
  double uniform() noexcept;
  /// Box-Muller from two uniforms, cosine branch only (one normal per pair).
  double normal() noexcept;
  /// Inversion by sequential search, means above 500 split into equal chunks.
  std::uint64_t poisson(double mean);

private:
  std::uint64_t state_;
};

enum class NoiseKind { Gaussian, Poisson, SaltPepper };

std::string to_string(NoiseKind k);
NoiseKind noise_kind_from_string(const std::string& s);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::Gaussian;
  double mean = 0.0;     // gaussian
  double variance = 0.0; // gaussian
  double scale = 1.0;    // poisson: Poisson(scale * u) / scale
  double density = 0.0;  // salt_pepper: fraction of pixels replaced by 0 or 1

  void validate() const;
};

/// Pixels are visited in storage order; output clipped to [0,1].
ImageGrid add_noise(const ImageGrid& clean, const NoiseSpec& spec, std::uint64_t seed);

}  // namespace tvlearn
