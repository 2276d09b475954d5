#include "tvlearn/state_solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "tvlearn/fidelity.hpp"
#include "tvlearn/operator.hpp"

namespace tvlearn {

std::size_t weight_count(NoiseModel m) { return m == NoiseModel::GaussPoisson ? 2 : 1; }

std::string to_string(NoiseModel m) {
  switch (m) {
    case NoiseModel::Gaussian: return "gaussian";
    case NoiseModel::GaussPoisson: return "gauss_poisson";
    case NoiseModel::Impulse: return "impulse";
  }
  return "?";
}

NoiseModel noise_model_from_string(const std::string& s) {
  if (s == "gaussian") return NoiseModel::Gaussian;
  if (s == "gauss_poisson" || s == "gauss-poisson") return NoiseModel::GaussPoisson;
  if (s == "impulse") return NoiseModel::Impulse;
  throw PreconditionError("unknown noise model '" + s + "'");
}

void SolverConfig::validate() const {
  if (!(epsilon > 0.0)) throw PreconditionError("SolverConfig: epsilon must be positive");
  if (!(tol_ssn > 0.0 && tol_ssn < 1.0)) throw PreconditionError("SolverConfig: tol_ssn must lie in (0,1)");
  if (max_ssn < 1) throw PreconditionError("SolverConfig: max_ssn must be >= 1");
  if (max_backtracks < 0) throw PreconditionError("SolverConfig: max_backtracks must be >= 0");
  if (!(u_floor > 0.0)) throw PreconditionError("SolverConfig: u_floor must be positive");
  if (gamma_l1 && !(*gamma_l1 > 0.0)) throw PreconditionError("SolverConfig: gamma_l1 must be positive");
  huber.validate();
}

namespace {

VectorField huber_field(const VectorField& g, const HuberParams& p) {
  VectorField q = g;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Vec2 v = h_gamma({g.qx[k], g.qy[k]}, p);
    q.qx[k] = v[0];
    q.qy[k] = v[1];
  }
  return q;
}

// -eps Lap u - div w  for a given flux w
ImageGrid diffusion_part(const VectorField& grad_u, const VectorField& flux, double eps, Boundary bc) {
  VectorField w = flux;
  for (std::size_t k = 0; k < w.size(); ++k) {
    w.qx[k] += eps * grad_u.qx[k];
    w.qy[k] += eps * grad_u.qy[k];
  }
  ImageGrid d = div(w, bc);
  d *= -1.0;
  return d;
}

ImageGrid l1_dual(const ImageGrid& u, const ImageGrid& f, double gamma) {
  ImageGrid p = u.like();
  for (std::size_t k = 0; k < u.size(); ++k) p[k] = huber_scalar_slope(u[k] - f[k], gamma);
  return p;
}

void check_weights(NoiseModel model, std::span<const double> lambda) {
  if (lambda.size() != weight_count(model)) {
    throw PreconditionError("state solver: " + to_string(model) + " expects " +
                            std::to_string(weight_count(model)) + " weight(s)");
  }
  for (double l : lambda) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw PreconditionError("state solver: weights must be >= 0");
  }
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

StateSolution zero_solution(const ImageGrid& f, NoiseModel model, const SolverConfig& cfg) {
  StateSolution s;
  s.u = f.like(0.0);
  s.q = VectorField(s.u);
  if (model == NoiseModel::Impulse) s.p_dual = l1_dual(s.u, f, cfg.l1_gamma());
  s.trace.residuals = {0.0};
  s.trace.converged = true;
  return s;
}

StateSolution run_newton(NoiseModel model, const ImageGrid& f, std::span<const double> lambda,
                         const SolverConfig& cfg, const ImageGrid* warm_start) {
  cfg.validate();
  check_weights(model, lambda);
  if (!f.all_finite()) throw PreconditionError("state solver: data not finite");
  if (warm_start && !warm_start->same_shape(f)) {
    throw PreconditionError("state solver: warm start has the wrong shape");
  }

  const bool poisson = model == NoiseModel::GaussPoisson;
  const bool impulse = model == NoiseModel::Impulse;
  const Boundary bc = cfg.boundary;
  const double gl1 = cfg.l1_gamma();
  const std::vector<double> lam(lambda.begin(), lambda.end());

  StateSolution sol;
  SsnTrace& tr = sol.trace;

  auto project = [&](ImageGrid& u) {
    if (!poisson) return;
    std::size_t clamped = 0;
    for (double& v : u.values()) {
      if (v < cfg.u_floor) {
        v = cfg.u_floor;
        ++clamped;
      }
    }
    tr.max_clamped = std::max(tr.max_clamped, clamped);
    if (static_cast<double>(clamped) > 0.01 * static_cast<double>(u.size())) ++tr.clamp_events;
  };

  ImageGrid u = warm_start ? *warm_start : f;
  if (poisson) {
    const std::size_t saved_max = tr.max_clamped;
    const int saved_events = tr.clamp_events;
    project(u);
    tr.max_clamped = saved_max;
    tr.clamp_events = saved_events;
  }

  VectorField q = huber_field(grad(u, bc), cfg.huber);
  ImageGrid p = impulse ? l1_dual(u, f, gl1) : ImageGrid{};

  // Energy is the merit where the problem has one (Gaussian, impulse); the multiplied
  // Gauss+Poisson equation is not a gradient, so it falls back to the residual norm.
  const bool energy_merit = !poisson;
  auto merit = [&](const ImageGrid& v, double residual_norm) {
    if (!energy_merit) return residual_norm;
    return impulse ? impulse_energy(f, lam[0], v, cfg) : gaussian_energy(f, lam[0], v, cfg);
  };

  // Natural residual for the bound u >= u_floor: a pixel on the floor whose residual
  // pushes further down satisfies the constraint's sign condition and counts as zero.
  auto residual_norm = [&](const ImageGrid& v, ImageGrid res) {
    if (poisson) {
      for (std::size_t k = 0; k < v.size(); ++k) {
        if (v[k] <= cfg.u_floor && res[k] > 0.0) res[k] = 0.0;
      }
    }
    return norm_l2(res);
  };

  ImageGrid R = state_residual(model, f, lam, u, cfg);
  double r = residual_norm(u, R);
  tr.residuals.push_back(r);
  // A warm start may begin arbitrarily close to the solution; measure progress
  // against the cold start u = f so the target stays above round-off.
  double r_ref = r;
  if (warm_start) {
    ImageGrid cold = f;
    if (poisson) {
      for (double& v : cold.values()) v = std::max(v, cfg.u_floor);
    }
    r_ref = std::max(r_ref, residual_norm(cold, state_residual(model, f, lam, cold, cfg)));
  }
  const double target = std::max(cfg.tol_ssn * r_ref, cfg.abs_floor);

  while (!(r <= target) && tr.iterations < cfg.max_ssn) {
    NewtonSystem sys = assemble_newton_system(model, f, lam, u, q, impulse ? &p : nullptr, cfg);
    ImageGrid du = f.like();
    {
      std::vector<double> x = poisson ? BandLU(sys.matrix).solve(sys.rhs.values())
                                      : BandLU(std::move(sys.matrix)).solve(sys.rhs.values());
      if (poisson) {
        // Projected Newton: pixels on the floor whose step leaves the feasible set are frozen
        // (identity rows) and the remaining block is solved again.
        std::vector<std::size_t> frozen;
        for (std::size_t k = 0; k < u.size(); ++k) {
          if (u[k] <= cfg.u_floor && x[k] < 0.0) frozen.push_back(k);
        }
        if (!frozen.empty()) {
          std::vector<double> rhs(sys.rhs.values().begin(), sys.rhs.values().end());
          for (std::size_t k : frozen) {
            const std::size_t lo = k >= sys.matrix.kl() ? k - sys.matrix.kl() : 0;
            const std::size_t hi = std::min(u.size() - 1, k + sys.matrix.ku());
            for (std::size_t j = lo; j <= hi; ++j) sys.matrix.add(k, j, -sys.matrix.get(k, j));
            sys.matrix.add(k, k, 1.0);
            rhs[k] = 0.0;
          }
          x = BandLU(std::move(sys.matrix)).solve(rhs);
        }
      }
      std::copy(x.begin(), x.end(), du.values().begin());
    }

    // Dual increments from the eliminated rows.
    const VectorField gu = grad(u, bc);
    const VectorField gdu = grad(du, bc);
    const VectorField hq = huber_field(gu, cfg.huber);
    VectorField dq = q;
    for (std::size_t k = 0; k < dq.size(); ++k) {
      const Vec2 md = sys.tensors[k].apply({gdu.qx[k], gdu.qy[k]});
      dq.qx[k] = -q.qx[k] + hq.qx[k] + md[0];
      dq.qy[k] = -q.qy[k] + hq.qy[k] + md[1];
    }
    ImageGrid dp;
    if (impulse) {
      dp = u.like();
      for (std::size_t k = 0; k < u.size(); ++k) {
        dp[k] = -p[k] + huber_scalar_slope(u[k] - f[k], gl1) + sys.p_slope[k] * du[k];
      }
    }

    const double m0 = merit(u, r);
    const double slack = energy_merit ? 1e-13 * (1.0 + std::abs(m0)) : 0.0;
    double t = 1.0;
    ImageGrid u_next, R_next;
    double r_next = 0.0;
    bool accepted = false;
    const int tries = cfg.damping == Damping::Halving ? cfg.max_backtracks + 1 : 1;
    for (int a = 0; a < tries; ++a) {
      u_next = u;
      for (std::size_t k = 0; k < u.size(); ++k) u_next[k] += t * du[k];
      project(u_next);
      R_next = state_residual(model, f, lam, u_next, cfg);
      r_next = residual_norm(u_next, R_next);
      if (cfg.damping == Damping::None || merit(u_next, r_next) < m0 + slack) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // Nonmonotone fallback: take the undamped step.
      ++tr.line_search_failures;
      t = 1.0;
      u_next = u;
      for (std::size_t k = 0; k < u.size(); ++k) u_next[k] += du[k];
      project(u_next);
      R_next = state_residual(model, f, lam, u_next, cfg);
      r_next = residual_norm(u_next, R_next);
    } else if (t < 1.0) {
      ++tr.damped_steps;
    }

    for (std::size_t k = 0; k < q.size(); ++k) {
      q.qx[k] += t * dq.qx[k];
      q.qy[k] += t * dq.qy[k];
    }
    if (impulse) {
      for (std::size_t k = 0; k < p.size(); ++k) p[k] += t * dp[k];
    }
    u = std::move(u_next);
    R = std::move(R_next);
    r = r_next;
    ++tr.iterations;
    tr.residuals.push_back(r);
    if (!std::isfinite(r)) break;
  }

  tr.converged = r <= target;
  if (!tr.converged) {
    throw ConvergenceError(to_string(model) + " SSN: no convergence after " +
                               std::to_string(tr.iterations) + " iterations (residual " +
                               short_num(r) + ", target " + short_num(target) + ")",
                           tr);
  }
  sol.q = huber_field(grad(u, bc), cfg.huber);
  if (impulse) sol.p_dual = l1_dual(u, f, gl1);
  sol.u = std::move(u);
  return sol;
}

}  // namespace

double gaussian_energy(const ImageGrid& f, double lambda, const ImageGrid& u, const SolverConfig& cfg) {
  const VectorField g = grad(u, cfg.boundary);
  double tv = 0.0, dir = 0.0, fid = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    tv += huber_value({g.qx[k], g.qy[k]}, cfg.huber);
    dir += g.qx[k] * g.qx[k] + g.qy[k] * g.qy[k];
    const double d = u[k] - f[k];
    fid += d * d;
  }
  const double w = u.h() * u.h();
  return w * (0.5 * cfg.epsilon * dir + tv + 0.5 * lambda * fid);
}

double impulse_energy(const ImageGrid& f, double lambda, const ImageGrid& u, const SolverConfig& cfg) {
  const VectorField g = grad(u, cfg.boundary);
  const double gl1 = cfg.l1_gamma();
  double tv = 0.0, dir = 0.0, fid = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    tv += huber_value({g.qx[k], g.qy[k]}, cfg.huber);
    dir += g.qx[k] * g.qx[k] + g.qy[k] * g.qy[k];
    fid += huber_scalar(u[k] - f[k], gl1);
  }
  const double w = u.h() * u.h();
  return w * (0.5 * cfg.epsilon * dir + tv + lambda * fid);
}

ImageGrid state_residual(NoiseModel model, const ImageGrid& f, std::span<const double> lambda,
                         const ImageGrid& u, const SolverConfig& cfg) {
  check_weights(model, lambda);
  const VectorField g = grad(u, cfg.boundary);
  ImageGrid R = diffusion_part(g, huber_field(g, cfg.huber), cfg.epsilon, cfg.boundary);
  switch (model) {
    case NoiseModel::Gaussian:
      for (std::size_t k = 0; k < u.size(); ++k) R[k] += lambda[0] * (u[k] - f[k]);
      break;
    case NoiseModel::GaussPoisson:
      for (std::size_t k = 0; k < u.size(); ++k) {
        R[k] = u[k] * (R[k] + lambda[0] * (u[k] - f[k])) + lambda[1] * (u[k] - f[k]);
      }
      break;
    case NoiseModel::Impulse: {
      const double gl1 = cfg.l1_gamma();
      for (std::size_t k = 0; k < u.size(); ++k) R[k] += lambda[0] * huber_scalar_slope(u[k] - f[k], gl1);
      break;
    }
  }
  return R;
}

NewtonSystem assemble_newton_system(NoiseModel model, const ImageGrid& f,
                                    std::span<const double> lambda, const ImageGrid& u,
                                    const VectorField& q, const ImageGrid* p_dual,
                                    const SolverConfig& cfg) {
  check_weights(model, lambda);
  if (!u.same_shape(f) || !q.matches(u)) throw PreconditionError("assemble_newton_system: shape mismatch");
  const Boundary bc = cfg.boundary;
  const VectorField g = grad(u, bc);
  const std::size_t n = u.size();

  std::vector<Mat2> jac(n);
  std::vector<Mat2> tensors(n);
  for (std::size_t k = 0; k < n; ++k) {
    jac[k] = newton_diffusion_matrix({g.qx[k], g.qy[k]}, Vec2{q.qx[k], q.qy[k]}, cfg.huber,
                                     cfg.modified_newton);
    tensors[k] = jac[k];
    tensors[k].a00 += cfg.epsilon;
    tensors[k].a11 += cfg.epsilon;
  }

  std::vector<double> reaction(n, 0.0);
  std::vector<double> row_scale;
  std::vector<double> p_slope;
  switch (model) {
    case NoiseModel::Gaussian:
      std::fill(reaction.begin(), reaction.end(), lambda[0]);
      break;
    case NoiseModel::GaussPoisson: {
      // delta_u * (-eps Lap u - div q + l1 (u - f)) + u * (...) + l2 delta_u
      const ImageGrid rq = diffusion_part(g, q, cfg.epsilon, bc);
      row_scale.assign(u.values().begin(), u.values().end());
      for (std::size_t k = 0; k < n; ++k) {
        reaction[k] = rq[k] + lambda[0] * (u[k] - f[k]) + lambda[0] * u[k] + lambda[1];
        // At a root the bracket equals l2 (f/u - 1), so the diagonal is l2 f/u + l1 u > 0 there.
        // Near u = 0 the exact value can go negative and drive pixels into the floor.
        if (cfg.modified_newton) {
          reaction[k] = std::max(reaction[k], lambda[1] * f[k] / u[k] + lambda[0] * u[k]);
        }
      }
      break;
    }
    case NoiseModel::Impulse: {
      if (!p_dual) throw PreconditionError("assemble_newton_system: impulse needs the dual p");
      FidelitySpec spec{FidelityKind::ImpulseHuber, f, cfg.l1_gamma(), cfg.u_floor};
      const ImageGrid slope = d2phi(u, spec, cfg.modified_newton, *p_dual);
      p_slope.assign(slope.values().begin(), slope.values().end());
      for (std::size_t k = 0; k < n; ++k) reaction[k] = lambda[0] * p_slope[k];
      break;
    }
  }

  BandMatrix A = assemble_operator(u, bc, tensors, reaction, row_scale);
  ImageGrid rhs = state_residual(model, f, lambda, u, cfg);
  rhs *= -1.0;
  return NewtonSystem{std::move(A), std::move(rhs), std::move(jac), std::move(p_slope)};
}

StateSolution solve_gaussian(const ImageGrid& f, double lambda, const SolverConfig& cfg,
                             const ImageGrid* warm_start) {
  if (!(lambda >= 0.0)) throw PreconditionError("solve_gaussian: lambda must be >= 0");
  if (lambda == 0.0 && cfg.boundary == Boundary::Dirichlet) {
    return zero_solution(f, NoiseModel::Gaussian, cfg);
  }
  const double w[1] = {lambda};
  return run_newton(NoiseModel::Gaussian, f, w, cfg, warm_start);
}

StateSolution solve_gauss_poisson(const ImageGrid& f, double lambda1, double lambda2,
                                  const SolverConfig& cfg, const ImageGrid* warm_start) {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) {
    throw PreconditionError("solve_gauss_poisson: weights must be >= 0");
  }
  if (lambda1 == 0.0 && lambda2 == 0.0) {
    throw PreconditionError("solve_gauss_poisson: at least one weight must be positive");
  }
  if (lambda2 > 0.0) {
    for (double v : f.values()) {
      if (v < 0.0) throw PreconditionError("solve_gauss_poisson: Poisson data must be nonnegative");
    }
  }
  const double w[2] = {lambda1, lambda2};
  return run_newton(NoiseModel::GaussPoisson, f, w, cfg, warm_start);
}

StateSolution solve_impulse(const ImageGrid& f, double lambda, const SolverConfig& cfg,
                            const ImageGrid* warm_start) {
  if (!(lambda >= 0.0)) throw PreconditionError("solve_impulse: lambda must be >= 0");
  if (lambda == 0.0 && cfg.boundary == Boundary::Dirichlet) {
    return zero_solution(f, NoiseModel::Impulse, cfg);
  }
  const double w[1] = {lambda};
  return run_newton(NoiseModel::Impulse, f, w, cfg, warm_start);
}

StateSolution solve_state(NoiseModel model, const ImageGrid& f, std::span<const double> lambda,
                          const SolverConfig& cfg, const ImageGrid* warm_start) {
  check_weights(model, lambda);
  const bool all_zero = std::all_of(lambda.begin(), lambda.end(), [](double l) { return l == 0.0; });
  if (all_zero && cfg.boundary == Boundary::Dirichlet) return zero_solution(f, model, cfg);
  switch (model) {
    case NoiseModel::Gaussian: return solve_gaussian(f, lambda[0], cfg, warm_start);
    case NoiseModel::GaussPoisson: return solve_gauss_poisson(f, lambda[0], lambda[1], cfg, warm_start);
    case NoiseModel::Impulse: return solve_impulse(f, lambda[0], cfg, warm_start);
  }
  throw PreconditionError("solve_state: unknown model");
}

}  // namespace tvlearn
