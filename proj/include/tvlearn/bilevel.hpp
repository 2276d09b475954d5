#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tvlearn/adjoint.hpp"
#include "tvlearn/grid.hpp"
#include "tvlearn/state_solver.hpp"

namespace tvlearn {

enum class GradMode { ForwardFd, Adjoint };

std::string to_string(GradMode m);
GradMode grad_mode_from_string(const std::string& s);

struct BilevelConfig {
  double beta = 1e-10;        // Tikhonov weight on the fidelity weights
  double alpha = 0.5;         // fixed step length
  GradMode grad_mode = GradMode::ForwardFd;
  double fd_rel_step = 1e-3;  // delta_i = fd_rel_step * max(1, lambda_i)
  double tol_grad = 1e-9;     // on ||lambda - max(0, lambda - grad)|| / (1 + |cost|)
  double tol_cost = 1e-7;     // relative spread of the last 4 costs
  int max_iter = 50;
  std::vector<double> lambda0;  // empty: default_lambda0()
  /// Halve alpha until the cost does not increase (up to 10 times). Off by default.
  bool backtracking = false;

  void validate() const;
};

struct BfgsIterate;
/// Called once per iterate, after its step (and descent) is known; lets callers
/// stream traces so partial results survive a failure.
using IterateCallback = std::function<void(const BfgsIterate&)>;

struct TrainingPair {
  ImageGrid noisy;
  ImageGrid clean;
};

struct LearningProblem {
  NoiseModel model = NoiseModel::Gaussian;
  std::vector<TrainingPair> pairs;
  SolverConfig solver;

  void validate() const;
};

/// Value of the outer objective plus what the outer loop wants to log.
struct ObjectiveValue {
  double cost = 0.0;
  std::vector<double> grad;
  int ssn_main = 0;   // Newton iterations of the state solve(s) at lambda itself
  int ssn_total = 0;  // including finite-difference perturbation solves
};

using Objective = std::function<ObjectiveValue(std::span<const double> lambda)>;

struct BfgsIterate {
  int iter = 0;
  std::vector<double> lambda;
  double cost = 0.0;
  std::vector<double> grad;
  double proj_grad_norm = 0.0;
  double descent = 0.0;  // grad^T H grad of the step taken from this iterate
  int ssn_main = 0;
  int ssn_total = 0;
};

struct BfgsTrace {
  std::vector<BfgsIterate> iterations;
  bool converged = false;
  std::string stop_reason;
  KktResiduals kkt;
};

struct BfgsOutcome {
  std::vector<double> lambda_star;
  double cost = 0.0;
  BfgsTrace trace;
};

/// Projected BFGS on lambda >= 0 with a fixed step length; objective-agnostic core.
BfgsOutcome projected_bfgs(const Objective& objective, std::span<const double> lambda0,
                           const BilevelConfig& cfg, const IterateCallback& on_iterate = {});

/// Forward differences, delta_i = rel_step * max(1, lambda_i); f0 = F(lambda).
std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& F,
                                std::span<const double> lambda, double f0, double rel_step);
/// Central differences; falls back to a forward step for components too close to 0.
std::vector<double> central_fd_gradient(const std::function<double(std::span<const double>)>& F,
                                        std::span<const double> lambda, double rel_step);

/// Noise-variance heuristic: 1/sigma^2 clipped to [1, 1e4] for the Gaussian weight.
std::vector<double> default_lambda0(NoiseModel model, const ImageGrid& f);

/// Reduced cost 1/N sum_k 1/2||u(lambda; f_k) - u_k||^2 + beta |lambda|^2 with warm starts.
class ReducedObjective {
public:
  ReducedObjective(LearningProblem problem, BilevelConfig cfg);

  struct Evaluation {
    double cost = 0.0;
    std::vector<StateSolution> states;
    int ssn = 0;
  };

  /// Solves every pair at lambda and refreshes the warm starts.
  Evaluation evaluate(std::span<const double> lambda);
  /// Cost only, warm-started from `from` (per pair); does not touch stored warm starts.
  double cost_at(std::span<const double> lambda, const std::vector<StateSolution>* from, int* ssn = nullptr) const;

  std::vector<double> fd_gradient(std::span<const double> lambda, const Evaluation& at, int* ssn = nullptr) const;
  /// Averaged over pairs; p in the returned data is that of the first pair.
  AdjointData adjoint_gradient(std::span<const double> lambda, const Evaluation& at) const;

  /// Evaluate cost and gradient in the configured mode.
  ObjectiveValue operator()(std::span<const double> lambda);

  const LearningProblem& problem() const noexcept { return problem_; }
  const BilevelConfig& config() const noexcept { return cfg_; }

private:
  double tracking(const std::vector<StateSolution>& states) const;
  double tikhonov(std::span<const double> lambda) const;

  LearningProblem problem_;
  BilevelConfig cfg_;
  std::vector<ImageGrid> warm_;
};

struct BilevelResult {
  std::vector<double> lambda_star;
  double cost = 0.0;
  BfgsTrace trace;
  AdjointData adjoint;
  std::vector<ImageGrid> u_star;  // one per training pair
};

/// Single pair (f, u_o) learning problem.
BilevelResult projected_bfgs(const ImageGrid& f, const ImageGrid& u_o, NoiseModel model,
                             const SolverConfig& solver, const BilevelConfig& cfg,
                             const IterateCallback& on_iterate = {});

/// Averaged reduced cost over all pairs, same outer iteration.
BilevelResult train_on_set(const LearningProblem& problem, const BilevelConfig& cfg,
                           const IterateCallback& on_iterate = {});

/// Reduced cost for one pair without warm starts: (value, u).
std::pair<double, ImageGrid> reduced_cost(std::span<const double> lambda, const ImageGrid& f,
                                          const ImageGrid& u_o, NoiseModel model,
                                          const SolverConfig& solver, double beta);

}  // namespace tvlearn
