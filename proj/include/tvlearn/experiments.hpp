#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "tvlearn/bilevel.hpp"
#include "tvlearn/config.hpp"
#include "tvlearn/noise.hpp"
#include "tvlearn/state_solver.hpp"

namespace tvlearn {

/// Everything a subcommand needs, resolved from a Config.
struct ExperimentSettings {
  NoiseModel model = NoiseModel::Gaussian;

  // Clean image: input.clean if set, otherwise input.phantom at input.size.
  std::string clean_path;
  std::string noisy_path;  // skips noise generation when set
  std::string phantom = "mixed";
  std::size_t size = 32;

  NoiseSpec noise{NoiseKind::Gaussian, 0.0, 0.002, 1.0, 0.0};
  std::uint64_t seed = 1;

  SolverConfig solver;
  BilevelConfig bilevel;

  std::string out_dir = ".";
  std::string image_format = "png";
  int bit_depth = 8;

  std::vector<double> denoise_lambda;     // denoise; empty: default_lambda0
  int train_pairs = 2;                    // train: pairs drawn with seeds seed, seed+1, ...
  std::vector<double> train_variances;    // train: optional per-pair variance
  std::vector<double> gradcheck_lambda;   // empty: default_lambda0
  double gradcheck_step = 1e-4;
  double gradcheck_bound = 1e-3;
  std::vector<double> sweep_sizes{60, 65, 70, 75, 80, 85};
  std::vector<double> sweep_variances{0.002, 0.005, 0.02};

  std::uint64_t config_hash = 0;
};

/// Keys accepted in config files and --set overrides.
const std::set<std::string>& known_config_keys();

/// Throws PreconditionError on unknown keys or invalid values.
ExperimentSettings settings_from_config(const Config& cfg);

/// Default config with explicit values for every key, in file form.
std::string default_config_text();

struct ImagePair {
  ImageGrid clean;
  ImageGrid noisy;
};

/// Loads or synthesizes (clean, noisy) for the settings; `seed_offset` and
/// `variance` override the noise draw (variance < 0 keeps the configured one).
ImagePair make_pair(const ExperimentSettings& s, std::uint64_t seed_offset = 0, double variance = -1.0,
                    std::size_t size_override = 0);

/// Subcommands; each writes its outputs under s.out_dir and returns an exit status
/// (0 or 2 for gradcheck mismatch). Errors propagate as exceptions.
int run_denoise(const ExperimentSettings& s);
int run_learn(const ExperimentSettings& s);
int run_train(const ExperimentSettings& s);
int run_gradcheck(const ExperimentSettings& s);
int run_sweep_mesh(const ExperimentSettings& s);
int run_sweep_noise(const ExperimentSettings& s);
int run_noise(const ExperimentSettings& s);

}  // namespace tvlearn
