#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tvlearn/band_lu.hpp"
#include "tvlearn/error.hpp"
#include "tvlearn/grid.hpp"
#include "tvlearn/regularizer.hpp"

namespace tvlearn {

enum class Damping { None, Halving };

/// Lower-level problem the weights lambda belong to.
///   Gaussian:     d = 1, phi = 1/2 |u - f|^2
///   GaussPoisson: d = 2, Gaussian plus the Kullback-Leibler term u - f log u
///   Impulse:      d = 1, Huberized L1 fidelity
enum class NoiseModel { Gaussian, GaussPoisson, Impulse };

std::size_t weight_count(NoiseModel m);
std::string to_string(NoiseModel m);
NoiseModel noise_model_from_string(const std::string& s);

struct SolverConfig {
  double epsilon = 1e-12;  // elliptic regularization of the TV problem
  HuberParams huber{};
  double tol_ssn = 1e-8;  // relative to the initial residual
  double abs_floor = 1e-14;
  int max_ssn = 50;
  Damping damping = Damping::Halving;
  int max_backtracks = 10;
  Boundary boundary = Boundary::Dirichlet;
  /// Use q/max(1,|q|) in the MaxForm Newton matrix instead of grad u/|grad u|.
  bool modified_newton = true;
  /// Huber parameter of the L1 term; unset means "same as huber.gamma".
  std::optional<double> gamma_l1;
  double u_floor = 1e-6;

  double l1_gamma() const { return gamma_l1.value_or(huber.gamma); }
  void validate() const;
};

struct SsnTrace {
  std::vector<double> residuals;  // residuals[0] is the initial residual
  int iterations = 0;
  bool converged = false;
  int damped_steps = 0;           // steps accepted with t < 1
  int line_search_failures = 0;   // no decrease found; full step taken
  int clamp_events = 0;           // Poisson: steps clamping more than 1% of pixels
  std::size_t max_clamped = 0;    // largest number of pixels clamped in one step
};

/// Inner solve did not reach tolerance within max_ssn; carries the partial trace.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& what, SsnTrace trace)
      : Error(what), trace_(std::move(trace)) {}
  const SsnTrace& trace() const noexcept { return trace_; }

private:
  SsnTrace trace_;
};

struct StateSolution {
  ImageGrid u;
  VectorField q;                   // h_gamma(grad u) at the returned u
  std::optional<ImageGrid> p_dual; // impulse only
  SsnTrace trace;
};

/// -eps Lap u - div h_gamma(grad u) + lambda (u - f) = 0
StateSolution solve_gaussian(const ImageGrid& f, double lambda, const SolverConfig& cfg,
                             const ImageGrid* warm_start = nullptr);

/// u (-eps Lap u - div q + lambda1 (u - f)) + lambda2 (u - f) = 0, u >= u_floor
StateSolution solve_gauss_poisson(const ImageGrid& f, double lambda1, double lambda2,
                                  const SolverConfig& cfg, const ImageGrid* warm_start = nullptr);

/// -eps Lap u - div q + lambda p = 0, with q and p the Huber duals of grad u and u - f
StateSolution solve_impulse(const ImageGrid& f, double lambda, const SolverConfig& cfg,
                            const ImageGrid* warm_start = nullptr);

/// Dispatch on the model; all-zero weights return u = 0 under Dirichlet closure.
StateSolution solve_state(NoiseModel model, const ImageGrid& f, std::span<const double> lambda,
                          const SolverConfig& cfg, const ImageGrid* warm_start = nullptr);

/// Nonlinear residual whose norm the Newton iteration drives down (q = h_gamma(grad u)).
ImageGrid state_residual(NoiseModel model, const ImageGrid& f, std::span<const double> lambda,
                         const ImageGrid& u, const SolverConfig& cfg);

/// Discrete energy of the Gaussian problem.
double gaussian_energy(const ImageGrid& f, double lambda, const ImageGrid& u, const SolverConfig& cfg);

/// Discrete energy of the impulse problem (Huberized TV plus Huberized L1 fidelity).
double impulse_energy(const ImageGrid& f, double lambda, const ImageGrid& u, const SolverConfig& cfg);

/// Reduced Newton system in delta_u after eliminating delta_q (and delta_p).
struct NewtonSystem {
  BandMatrix matrix;
  ImageGrid rhs;               // -residual
  std::vector<Mat2> tensors;   // Jacobian of h_gamma per cell (without eps)
  std::vector<double> p_slope; // impulse: d(p)/d(u) per node
};

NewtonSystem assemble_newton_system(NoiseModel model, const ImageGrid& f,
                                    std::span<const double> lambda, const ImageGrid& u,
                                    const VectorField& q, const ImageGrid* p_dual,
                                    const SolverConfig& cfg);

}  // namespace tvlearn
