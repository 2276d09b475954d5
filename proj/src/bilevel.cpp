#include "tvlearn/bilevel.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace tvlearn {

std::string to_string(GradMode m) { return m == GradMode::Adjoint ? "adjoint" : "forward_fd"; }

GradMode grad_mode_from_string(const std::string& s) {
  if (s == "adjoint") return GradMode::Adjoint;
  if (s == "forward_fd" || s == "fd") return GradMode::ForwardFd;
  throw PreconditionError("unknown gradient mode '" + s + "'");
}

void BilevelConfig::validate() const {
  if (!(beta > 0.0)) throw PreconditionError("BilevelConfig: beta must be positive");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw PreconditionError("BilevelConfig: alpha must lie in (0,1]");
  if (!(fd_rel_step > 0.0)) throw PreconditionError("BilevelConfig: fd_rel_step must be positive");
  if (!(tol_grad >= 0.0) || !(tol_cost >= 0.0)) throw PreconditionError("BilevelConfig: negative tolerance");
  if (max_iter < 1) throw PreconditionError("BilevelConfig: max_iter must be >= 1");
  for (double l : lambda0) {
    if (!(l >= 0.0)) throw PreconditionError("BilevelConfig: lambda0 must be >= 0");
  }
}

void LearningProblem::validate() const {
  if (pairs.empty()) throw PreconditionError("LearningProblem: need at least one training pair");
  const ImageGrid& ref = pairs.front().noisy;
  for (const auto& pr : pairs) {
    if (!pr.noisy.same_shape(ref) || !pr.clean.same_shape(ref)) {
      throw PreconditionError("LearningProblem: training pairs differ in shape");
    }
  }
  solver.validate();
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd to_eigen(std::span<const double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

double projected_gradient_norm(const VectorXd& lam, const VectorXd& g) {
  return (lam - (lam - g).cwiseMax(0.0)).norm();
}

BfgsIterate make_iterate(int iter, const VectorXd& lam, const ObjectiveValue& v) {
  BfgsIterate it;
  it.iter = iter;
  it.lambda = to_std(lam);
  it.cost = v.cost;
  it.grad = v.grad;
  it.proj_grad_norm = projected_gradient_norm(lam, to_eigen(v.grad));
  it.ssn_main = v.ssn_main;
  it.ssn_total = v.ssn_total;
  return it;
}

double sigma_estimate(const ImageGrid& f) {
  std::vector<double> d;
  d.reserve(f.size());
  for (std::size_t j = 0; j < f.ny(); ++j) {
    for (std::size_t i = 0; i + 1 < f.nx(); ++i) d.push_back(f(i + 1, j) - f(i, j));
  }
  auto median = [](std::vector<double> v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
  };
  const double m = median(d);
  for (double& x : d) x = std::abs(x - m);
  // Differences of i.i.d. noise have variance 2 sigma^2; 1.4826 makes MAD consistent.
  return 1.4826 * median(d) / std::sqrt(2.0);
}

}  // namespace

BfgsOutcome projected_bfgs(const Objective& objective, std::span<const double> lambda0,
                           const BilevelConfig& cfg, const IterateCallback& on_iterate) {
  cfg.validate();
  if (lambda0.empty()) throw PreconditionError("projected_bfgs: empty lambda0");
  const auto n = static_cast<Eigen::Index>(lambda0.size());

  VectorXd lam = to_eigen(lambda0).cwiseMax(0.0);
  ObjectiveValue v = objective(to_std(lam));
  if (!std::isfinite(v.cost)) throw Error("projected_bfgs: non-finite cost at lambda0");
  VectorXd g = to_eigen(v.grad);
  const double g0 = g.norm();
  MatrixXd H = MatrixXd::Identity(n, n) * (g0 > 0.0 ? 1.0 / g0 : 1.0);

  BfgsOutcome out;
  BfgsTrace& tr = out.trace;
  tr.iterations.push_back(make_iterate(0, lam, v));
  std::size_t best = 0;

  for (int it = 1; it <= cfg.max_iter; ++it) {
    const double pg = projected_gradient_norm(lam, g);
    if (pg <= cfg.tol_grad * (1.0 + std::abs(v.cost))) {
      tr.converged = true;
      tr.stop_reason = "projected_gradient";
      break;
    }

    // Components sitting on the bound with the gradient pushing outward stay fixed.
    std::vector<bool> active(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) active[static_cast<std::size_t>(i)] = lam[i] <= 0.0 && g[i] > 0.0;
    MatrixXd Hr = H;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      Hr.row(i).setZero();
      Hr.col(i).setZero();
    }
    const VectorXd dir = -(Hr * g);
    tr.iterations.back().descent = g.dot(Hr * g);
    if (on_iterate) on_iterate(tr.iterations.back());

    double step = cfg.alpha;
    VectorXd lam_next = (lam + step * dir).cwiseMax(0.0);
    ObjectiveValue v_next = objective(to_std(lam_next));
    if (cfg.backtracking) {
      for (int b = 0; b < 10 && !(v_next.cost <= v.cost); ++b) {
        step *= 0.5;
        lam_next = (lam + step * dir).cwiseMax(0.0);
        v_next = objective(to_std(lam_next));
      }
    }
    if (!std::isfinite(v_next.cost)) throw Error("projected_bfgs: non-finite cost");

    const VectorXd g_next = to_eigen(v_next.grad);
    const VectorXd s = lam_next - lam;
    const VectorXd y = g_next - g;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const MatrixXd I = MatrixXd::Identity(n, n);
      H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }

    lam = lam_next;
    v = std::move(v_next);
    g = g_next;
    tr.iterations.push_back(make_iterate(it, lam, v));
    if (v.cost < tr.iterations[best].cost) best = tr.iterations.size() - 1;

    if (s.norm() == 0.0) {
      tr.stop_reason = "no_progress";
      break;
    }
    const std::size_t m = tr.iterations.size();
    if (m >= 4) {
      // decrease over the last three steps; an oscillating sequence counts as no decrease
      const double decrease = tr.iterations[m - 4].cost - tr.iterations[m - 1].cost;
      if (decrease <= cfg.tol_cost * std::abs(v.cost)) {
        tr.converged = true;
        tr.stop_reason = "cost_stagnation";
        break;
      }
    }
  }

  if (on_iterate) on_iterate(tr.iterations.back());
  if (tr.stop_reason.empty()) {
    const double pg = projected_gradient_norm(lam, g);
    if (pg <= cfg.tol_grad * (1.0 + std::abs(v.cost))) {
      tr.converged = true;
      tr.stop_reason = "projected_gradient";
    } else {
      tr.stop_reason = "max_iter";
    }
  }
  const bool last = tr.stop_reason == "projected_gradient" || tr.stop_reason == "no_progress";
  const BfgsIterate& pick = last ? tr.iterations.back() : tr.iterations[best];
  out.lambda_star = pick.lambda;
  out.cost = pick.cost;
  return out;
}

std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& F,
                                std::span<const double> lambda, double f0, double rel_step) {
  std::vector<double> g(lambda.size());
  std::vector<double> lp(lambda.begin(), lambda.end());
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    const double d = rel_step * std::max(1.0, lambda[i]);
    lp[i] = lambda[i] + d;
    g[i] = (F(lp) - f0) / d;
    lp[i] = lambda[i];
  }
  return g;
}

std::vector<double> central_fd_gradient(const std::function<double(std::span<const double>)>& F,
                                        std::span<const double> lambda, double rel_step) {
  std::vector<double> g(lambda.size());
  std::vector<double> lp(lambda.begin(), lambda.end());
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    const double d = rel_step * std::max(1.0, lambda[i]);
    lp[i] = lambda[i] + d;
    const double fp = F(lp);
    if (lambda[i] - d >= 0.0) {
      lp[i] = lambda[i] - d;
      g[i] = (fp - F(lp)) / (2.0 * d);
    } else {
      lp[i] = lambda[i];
      g[i] = (fp - F(lp)) / d;
    }
    lp[i] = lambda[i];
  }
  return g;
}

std::vector<double> default_lambda0(NoiseModel model, const ImageGrid& f) {
  if (model == NoiseModel::Impulse) return {10.0};
  const double s = sigma_estimate(f);
  const double lg = s > 0.0 ? std::clamp(1.0 / (s * s), 1.0, 1e4) : 1e4;
  if (model == NoiseModel::GaussPoisson) return {lg, std::max(1.0, 0.1 * lg)};
  return {lg};
}

ReducedObjective::ReducedObjective(LearningProblem problem, BilevelConfig cfg)
    : problem_(std::move(problem)), cfg_(std::move(cfg)) {
  problem_.validate();
  cfg_.validate();
}

double ReducedObjective::tracking(const std::vector<StateSolution>& states) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const ImageGrid r = states[k].u - problem_.pairs[k].clean;
    acc += 0.5 * inner(r, r);
  }
  return acc / static_cast<double>(states.size());
}

double ReducedObjective::tikhonov(std::span<const double> lambda) const {
  double s = 0.0;
  for (double l : lambda) s += l * l;
  return cfg_.beta * s;
}

ReducedObjective::Evaluation ReducedObjective::evaluate(std::span<const double> lambda) {
  Evaluation ev;
  warm_.resize(problem_.pairs.size());
  for (std::size_t k = 0; k < problem_.pairs.size(); ++k) {
    const ImageGrid* warm = warm_[k].size() > 0 ? &warm_[k] : nullptr;
    ev.states.push_back(solve_state(problem_.model, problem_.pairs[k].noisy, lambda, problem_.solver, warm));
    ev.ssn += ev.states.back().trace.iterations;
    warm_[k] = ev.states.back().u;
  }
  ev.cost = tracking(ev.states) + tikhonov(lambda);
  return ev;
}

double ReducedObjective::cost_at(std::span<const double> lambda, const std::vector<StateSolution>* from,
                                 int* ssn) const {
  std::vector<StateSolution> states;
  for (std::size_t k = 0; k < problem_.pairs.size(); ++k) {
    const ImageGrid* warm = from ? &(*from)[k].u : nullptr;
    states.push_back(solve_state(problem_.model, problem_.pairs[k].noisy, lambda, problem_.solver, warm));
    if (ssn) *ssn += states.back().trace.iterations;
  }
  return tracking(states) + tikhonov(lambda);
}

std::vector<double> ReducedObjective::fd_gradient(std::span<const double> lambda, const Evaluation& at,
                                                  int* ssn) const {
  auto F = [&](std::span<const double> l) { return cost_at(l, &at.states, ssn); };
  return tvlearn::fd_gradient(F, lambda, at.cost, cfg_.fd_rel_step);
}

AdjointData ReducedObjective::adjoint_gradient(std::span<const double> lambda, const Evaluation& at) const {
  AdjointData out;
  out.grad_f.assign(lambda.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(problem_.pairs.size());
  for (std::size_t k = 0; k < problem_.pairs.size(); ++k) {
    const auto& pr = problem_.pairs[k];
    const SolverConfig acfg = adjoint_config(problem_.solver);
    const LinearizedOperator L(problem_.model, pr.noisy, at.states[k].u, lambda, acfg);
    ImageGrid rhs = at.states[k].u - pr.clean;
    rhs *= -inv_n;
    ImageGrid p = L.solve_transposed(rhs);
    for (std::size_t i = 0; i < lambda.size(); ++i) out.grad_f[i] += inner(L.fidelity_slopes()[i], p);
    if (k == 0) out.p = std::move(p);
  }
  for (std::size_t i = 0; i < lambda.size(); ++i) out.grad_f[i] += 2.0 * cfg_.beta * lambda[i];
  out.mu = out.grad_f;
  return out;
}

ObjectiveValue ReducedObjective::operator()(std::span<const double> lambda) {
  const Evaluation ev = evaluate(lambda);
  ObjectiveValue v;
  v.cost = ev.cost;
  v.ssn_main = ev.ssn;
  int extra = 0;
  if (cfg_.grad_mode == GradMode::ForwardFd) {
    v.grad = fd_gradient(lambda, ev, &extra);
  } else {
    v.grad = adjoint_gradient(lambda, ev).grad_f;
  }
  v.ssn_total = ev.ssn + extra;
  return v;
}

BilevelResult train_on_set(const LearningProblem& problem, const BilevelConfig& cfg,
                           const IterateCallback& on_iterate) {
  ReducedObjective obj(problem, cfg);
  std::vector<double> lambda0 = cfg.lambda0;
  if (lambda0.empty()) {
    lambda0.assign(weight_count(problem.model), 0.0);
    for (const auto& pr : problem.pairs) {
      const auto l = default_lambda0(problem.model, pr.noisy);
      for (std::size_t i = 0; i < l.size(); ++i) lambda0[i] += l[i];
    }
    for (double& l : lambda0) l /= static_cast<double>(problem.pairs.size());
  }
  if (lambda0.size() != weight_count(problem.model)) {
    throw PreconditionError("train_on_set: lambda0 has the wrong size for " + to_string(problem.model));
  }

  BfgsOutcome outcome = projected_bfgs([&obj](std::span<const double> l) { return obj(l); }, lambda0, cfg, on_iterate);

  BilevelResult res;
  res.lambda_star = outcome.lambda_star;
  res.cost = outcome.cost;
  res.trace = std::move(outcome.trace);
  const auto ev = obj.evaluate(res.lambda_star);
  res.adjoint = obj.adjoint_gradient(res.lambda_star, ev);
  res.trace.kkt = kkt_residuals(res.lambda_star, res.adjoint.mu);
  for (const auto& s : ev.states) res.u_star.push_back(s.u);
  return res;
}

BilevelResult projected_bfgs(const ImageGrid& f, const ImageGrid& u_o, NoiseModel model,
                             const SolverConfig& solver, const BilevelConfig& cfg,
                             const IterateCallback& on_iterate) {
  LearningProblem problem{model, {TrainingPair{f, u_o}}, solver};
  return train_on_set(problem, cfg, on_iterate);
}

std::pair<double, ImageGrid> reduced_cost(std::span<const double> lambda, const ImageGrid& f,
                                          const ImageGrid& u_o, NoiseModel model,
                                          const SolverConfig& solver, double beta) {
  for (double l : lambda) {
    if (!(l >= 0.0)) throw PreconditionError("reduced_cost: lambda must be >= 0");
  }
  StateSolution s = solve_state(model, f, lambda, solver);
  const ImageGrid r = s.u - u_o;
  double tik = 0.0;
  for (double l : lambda) tik += l * l;
  return {0.5 * inner(r, r) + beta * tik, std::move(s.u)};
}

}  // namespace tvlearn
