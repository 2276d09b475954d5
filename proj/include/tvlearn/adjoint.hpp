#pragma once

#include <optional>
#include <span>
#include <vector>

#include "tvlearn/band_lu.hpp"
#include "tvlearn/fidelity.hpp"
#include "tvlearn/grid.hpp"
#include "tvlearn/state_solver.hpp"

namespace tvlearn {

/// Adjoint state, KKT multipliers and reduced gradient at a weight vector.
struct AdjointData {
  ImageGrid p;
  std::vector<double> mu;      // mu_i = 2 beta lambda_i + (phi_i'(u), p)
  std::vector<double> grad_f;  // equal to mu; kept separately for readability at call sites
};

struct KktResiduals {
  double stationarity = 0.0;     // max(0, -mu_i)
  double complementarity = 0.0;  // max |mu_i lambda_i|
  double feasibility = 0.0;      // max(0, -lambda_i)
};

/// The fidelity terms making up a noise model, bound to the data f.
std::vector<FidelitySpec> fidelities_for(NoiseModel model, const ImageGrid& f, const SolverConfig& cfg);

/// Config with the TV smoothing switched to the C1 form (g_cap = 1 when converting
/// from MaxForm), as required for the linearized and adjoint equations.
SolverConfig adjoint_config(const SolverConfig& cfg);

/// L z = -div((eps I + h_gamma'(grad u)) grad z) + sum_i lambda_i phi_i''(u) z
///
/// Built at a fixed state u_bar. Requires the C1 form of h_gamma.
class LinearizedOperator {
public:
  LinearizedOperator(NoiseModel model, const ImageGrid& f, const ImageGrid& u_bar,
                     std::span<const double> lambda, const SolverConfig& cfg);

  ImageGrid apply(const ImageGrid& z) const;
  ImageGrid apply_transposed(const ImageGrid& z) const;
  ImageGrid solve(const ImageGrid& rhs) const;
  ImageGrid solve_transposed(const ImageGrid& rhs) const;

  const BandMatrix& matrix() const noexcept { return matrix_; }
  /// phi_i'(u_bar), one image per weight.
  const std::vector<ImageGrid>& fidelity_slopes() const noexcept { return slopes_; }

private:
  ImageGrid shape_;
  Boundary bc_;
  std::vector<Mat2> tensors_;
  std::vector<double> reaction_;
  std::vector<ImageGrid> slopes_;
  BandMatrix matrix_;
  std::optional<BandLU> lu_;
};

/// Directional derivative z of lambda -> u(lambda) in direction xi.
ImageGrid solve_linearized(NoiseModel model, const ImageGrid& f, const ImageGrid& u_bar,
                           std::span<const double> lambda, std::span<const double> xi,
                           const SolverConfig& cfg);

/// Solves L^T p = -g_prime, where g_prime is the derivative of the tracking cost
/// (u_bar - u_o for 1/2||u - u_o||^2).
ImageGrid solve_adjoint(NoiseModel model, const ImageGrid& f, const ImageGrid& u_bar,
                        std::span<const double> lambda, const ImageGrid& g_prime,
                        const SolverConfig& cfg);

/// 2 beta lambda_i + (phi_i'(u_bar), p)
std::vector<double> reduced_gradient(std::span<const double> lambda,
                                     const std::vector<ImageGrid>& fidelity_slopes,
                                     const ImageGrid& p, double beta);

KktResiduals kkt_residuals(std::span<const double> lambda, std::span<const double> mu);

/// One adjoint solve at a converged state; cfg is converted with adjoint_config().
AdjointData adjoint_gradient(NoiseModel model, const ImageGrid& f, const ImageGrid& u_o,
                             const ImageGrid& u_bar, std::span<const double> lambda, double beta,
                             const SolverConfig& cfg);

}  // namespace tvlearn
