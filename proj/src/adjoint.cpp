#include "tvlearn/adjoint.hpp"

#include <algorithm>
#include <cmath>

#include "tvlearn/operator.hpp"

namespace tvlearn {

namespace {

ImageGrid from_vector(const ImageGrid& shape, const std::vector<double>& x) {
  return ImageGrid(shape.nx(), shape.ny(), shape.h(), x);
}

}  // namespace

std::vector<FidelitySpec> fidelities_for(NoiseModel model, const ImageGrid& f, const SolverConfig& cfg) {
  switch (model) {
    case NoiseModel::Gaussian:
      return {FidelitySpec{FidelityKind::Gaussian, f, cfg.l1_gamma(), cfg.u_floor}};
    case NoiseModel::GaussPoisson:
      return {FidelitySpec{FidelityKind::Gaussian, f, cfg.l1_gamma(), cfg.u_floor},
              FidelitySpec{FidelityKind::Poisson, f, cfg.l1_gamma(), cfg.u_floor}};
    case NoiseModel::Impulse:
      return {FidelitySpec{FidelityKind::ImpulseHuber, f, cfg.l1_gamma(), cfg.u_floor}};
  }
  throw PreconditionError("fidelities_for: unknown model");
}

SolverConfig adjoint_config(const SolverConfig& cfg) {
  SolverConfig out = cfg;
  if (out.huber.variant == HuberVariant::MaxForm) {
    out.huber.variant = HuberVariant::C1Form;
    out.huber.g_cap = 1.0;
  }
  return out;
}

LinearizedOperator::LinearizedOperator(NoiseModel model, const ImageGrid& f, const ImageGrid& u_bar,
                                       std::span<const double> lambda, const SolverConfig& cfg)
    : shape_(u_bar.like()), bc_(cfg.boundary), matrix_(1, 0, 0) {
  cfg.validate();
  if (cfg.huber.variant != HuberVariant::C1Form) {
    throw PreconditionError("LinearizedOperator: h_gamma must use the C1 form");
  }
  if (!u_bar.same_shape(f)) throw PreconditionError("LinearizedOperator: shape mismatch");
  const auto fids = fidelities_for(model, f, cfg);
  if (lambda.size() != fids.size()) throw PreconditionError("LinearizedOperator: wrong weight count");

  const std::size_t n = u_bar.size();
  const VectorField g = grad(u_bar, bc_);
  tensors_.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    Mat2 m = newton_diffusion_matrix({g.qx[k], g.qy[k]}, std::nullopt, cfg.huber, false);
    m.a00 += cfg.epsilon;
    m.a11 += cfg.epsilon;
    tensors_[k] = m;
  }
  reaction_.assign(n, 0.0);
  for (std::size_t i = 0; i < fids.size(); ++i) {
    const ImageGrid curv = d2phi(u_bar, fids[i]);
    for (std::size_t k = 0; k < n; ++k) reaction_[k] += lambda[i] * curv[k];
    slopes_.push_back(dphi(u_bar, fids[i]));
  }
  matrix_ = assemble_operator(shape_, bc_, tensors_, reaction_);
  lu_.emplace(matrix_);
}

ImageGrid LinearizedOperator::apply(const ImageGrid& z) const {
  return apply_operator(z, bc_, tensors_, reaction_);
}

ImageGrid LinearizedOperator::apply_transposed(const ImageGrid& z) const {
  return apply_operator_transposed(z, bc_, tensors_, reaction_);
}

ImageGrid LinearizedOperator::solve(const ImageGrid& rhs) const {
  if (!rhs.same_shape(shape_)) throw PreconditionError("LinearizedOperator::solve: shape mismatch");
  return from_vector(shape_, lu_->solve(rhs.values()));
}

ImageGrid LinearizedOperator::solve_transposed(const ImageGrid& rhs) const {
  if (!rhs.same_shape(shape_)) throw PreconditionError("LinearizedOperator::solve_transposed: shape mismatch");
  return from_vector(shape_, lu_->solve_transposed(rhs.values()));
}

ImageGrid solve_linearized(NoiseModel model, const ImageGrid& f, const ImageGrid& u_bar,
                           std::span<const double> lambda, std::span<const double> xi,
                           const SolverConfig& cfg) {
  const LinearizedOperator L(model, f, u_bar, lambda, cfg);
  if (xi.size() != lambda.size()) throw PreconditionError("solve_linearized: xi has the wrong size");
  ImageGrid rhs = u_bar.like();
  for (std::size_t i = 0; i < xi.size(); ++i) {
    const ImageGrid& s = L.fidelity_slopes()[i];
    for (std::size_t k = 0; k < rhs.size(); ++k) rhs[k] -= xi[i] * s[k];
  }
  return L.solve(rhs);
}

ImageGrid solve_adjoint(NoiseModel model, const ImageGrid& f, const ImageGrid& u_bar,
                        std::span<const double> lambda, const ImageGrid& g_prime,
                        const SolverConfig& cfg) {
  const LinearizedOperator L(model, f, u_bar, lambda, cfg);
  return L.solve_transposed(-1.0 * g_prime);
}

std::vector<double> reduced_gradient(std::span<const double> lambda,
                                     const std::vector<ImageGrid>& fidelity_slopes,
                                     const ImageGrid& p, double beta) {
  if (fidelity_slopes.size() != lambda.size()) throw PreconditionError("reduced_gradient: size mismatch");
  std::vector<double> g(lambda.size());
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    g[i] = 2.0 * beta * lambda[i] + inner(fidelity_slopes[i], p);
  }
  return g;
}

KktResiduals kkt_residuals(std::span<const double> lambda, std::span<const double> mu) {
  if (lambda.size() != mu.size()) throw PreconditionError("kkt_residuals: size mismatch");
  KktResiduals r;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    r.stationarity = std::max(r.stationarity, std::max(0.0, -mu[i]));
    r.complementarity = std::max(r.complementarity, std::abs(mu[i] * lambda[i]));
    r.feasibility = std::max(r.feasibility, std::max(0.0, -lambda[i]));
  }
  return r;
}

AdjointData adjoint_gradient(NoiseModel model, const ImageGrid& f, const ImageGrid& u_o,
                             const ImageGrid& u_bar, std::span<const double> lambda, double beta,
                             const SolverConfig& cfg) {
  const LinearizedOperator L(model, f, u_bar, lambda, adjoint_config(cfg));
  AdjointData out;
  out.p = L.solve_transposed(-1.0 * (u_bar - u_o));
  out.grad_f = reduced_gradient(lambda, L.fidelity_slopes(), out.p, beta);
  out.mu = out.grad_f;
  return out;
}

}  // namespace tvlearn
