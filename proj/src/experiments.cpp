#include "tvlearn/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "tvlearn/adjoint.hpp"
#include "tvlearn/csv.hpp"
#include "tvlearn/error.hpp"
#include "tvlearn/image_io.hpp"
#include "tvlearn/phantom.hpp"

namespace tvlearn {

namespace {

constexpr const char* kDefaults = R"(# tvlearn defaults
model = gaussian
seed = 1

input.clean =
input.noisy =
input.phantom = mixed
input.size = 32

noise.kind = gaussian
noise.mean = 0
noise.variance = 0.002
noise.scale = 1
noise.density = 0

solver.epsilon = 1e-12
solver.gamma = 100
solver.g_cap = 1
solver.variant = max
solver.tol = 1e-8
solver.abs_floor = 1e-14
solver.max_iter = 50
solver.damping = halving
solver.max_backtracks = 10
solver.boundary = dirichlet
solver.modified = true
solver.gamma_l1 =
solver.u_floor = 1e-6

bilevel.beta = 1e-10
bilevel.alpha = 0.5
bilevel.grad_mode = forward_fd
bilevel.fd_step = 1e-3
bilevel.tol_grad = 1e-9
bilevel.tol_cost = 1e-7
bilevel.max_iter = 50
bilevel.lambda0 =
bilevel.backtracking = false

output.dir = .
output.format = png
output.bit_depth = 8

denoise.lambda =
train.pairs = 2
train.variances =
gradcheck.lambda =
gradcheck.step = 1e-4
gradcheck.bound = 1e-3
sweep.sizes = 60,65,70,75,80,85
sweep.variances = 0.002,0.005,0.02
)";

HuberVariant variant_from_string(const std::string& s) {
  if (s == "max") return HuberVariant::MaxForm;
  if (s == "c1") return HuberVariant::C1Form;
  throw PreconditionError("solver.variant must be 'max' or 'c1', got '" + s + "'");
}

Damping damping_from_string(const std::string& s) {
  if (s == "none") return Damping::None;
  if (s == "halving") return Damping::Halving;
  throw PreconditionError("solver.damping must be 'none' or 'halving', got '" + s + "'");
}

Boundary boundary_from_string(const std::string& s) {
  if (s == "dirichlet") return Boundary::Dirichlet;
  if (s == "neumann") return Boundary::Neumann;
  throw PreconditionError("solver.boundary must be 'dirichlet' or 'neumann', got '" + s + "'");
}

std::size_t to_size(double v, const char* what) {
  if (!(v >= 2.0) || v != std::floor(v) || v > 1e5) {
    throw PreconditionError(std::string(what) + ": sizes must be integers >= 2");
  }
  return static_cast<std::size_t>(v);
}

std::filesystem::path out_path(const ExperimentSettings& s, const std::string& name) {
  std::filesystem::create_directories(s.out_dir);
  return std::filesystem::path(s.out_dir) / name;
}

std::string image_name(const ExperimentSettings& s, const std::string& stem) {
  return stem + (s.image_format == "png" ? ".png" : ".pgm");
}

CsvMeta meta_for(const ExperimentSettings& s, const ImageGrid* img) {
  CsvMeta m;
  m.config_hash = hex64(s.config_hash);
  m.seed = s.seed;
  m.extra.emplace_back("model", to_string(s.model));
  if (img) {
    m.extra.emplace_back("shape", std::to_string(img->nx()) + "x" + std::to_string(img->ny()));
    m.extra.emplace_back("h", fmt(img->h()) + " (1/(min(nx,ny)-1))");
  }
  return m;
}

std::vector<std::string> lambda_columns(const std::string& prefix, std::size_t d) {
  std::vector<std::string> c;
  for (std::size_t i = 0; i < d; ++i) c.push_back(prefix + "_" + std::to_string(i + 1));
  return c;
}

std::vector<std::string> trace_columns(std::size_t d) {
  std::vector<std::string> cols{"iter"};
  for (auto& c : lambda_columns("lambda", d)) cols.push_back(c);
  cols.push_back("cost");
  for (auto& c : lambda_columns("grad", d)) cols.push_back(c);
  for (const char* c : {"proj_grad_norm", "descent", "ssn_main", "ssn_total"}) cols.emplace_back(c);
  return cols;
}

std::vector<std::string> trace_row(const BfgsIterate& it) {
  std::vector<std::string> r{fmt(it.iter)};
  for (double l : it.lambda) r.push_back(fmt(l));
  r.push_back(fmt(it.cost));
  for (double g : it.grad) r.push_back(fmt(g));
  r.push_back(fmt(it.proj_grad_norm));
  r.push_back(fmt(it.descent));
  r.push_back(fmt(it.ssn_main));
  r.push_back(fmt(it.ssn_total));
  return r;
}

BilevelResult learn_and_report(const ExperimentSettings& s, const LearningProblem& problem,
                               const std::string& prefix) {
  const ImageGrid& ref = problem.pairs.front().noisy;
  const std::size_t d = weight_count(s.model);
  CsvWriter trace(out_path(s, prefix + "trace.csv").string(), meta_for(s, &ref), trace_columns(d));
  BilevelResult res = train_on_set(problem, s.bilevel, [&](const BfgsIterate& it) { trace.row(trace_row(it)); });

  CsvWriter summary(out_path(s, prefix + "result.csv").string(), meta_for(s, &ref), {"key", "value"});
  for (std::size_t i = 0; i < d; ++i) summary.row({"lambda_" + std::to_string(i + 1), fmt(res.lambda_star[i])});
  summary.row({"cost", fmt(res.cost)});
  summary.row({"outer_iterations", fmt(static_cast<int>(res.trace.iterations.size()) - 1)});
  summary.row({"converged", res.trace.converged ? "true" : "false"});
  summary.row({"stop_reason", res.trace.stop_reason});
  summary.row({"kkt_stationarity", fmt(res.trace.kkt.stationarity)});
  summary.row({"kkt_complementarity", fmt(res.trace.kkt.complementarity)});
  summary.row({"kkt_feasibility", fmt(res.trace.kkt.feasibility)});
  for (std::size_t i = 0; i < d; ++i) summary.row({"mu_" + std::to_string(i + 1), fmt(res.adjoint.mu[i])});
  for (std::size_t k = 0; k < problem.pairs.size(); ++k) {
    const auto& pr = problem.pairs[k];
    const std::string tag = problem.pairs.size() > 1 ? "_" + std::to_string(k + 1) : "";
    summary.row({"psnr_noisy" + tag, fmt(psnr(pr.noisy, pr.clean))});
    summary.row({"psnr_denoised" + tag, fmt(psnr(res.u_star[k], pr.clean))});
    write_image(res.u_star[k], out_path(s, image_name(s, prefix + "denoised" + tag)).string(), s.bit_depth);
  }
  return res;
}

}  // namespace

const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k;
    const Config defaults = Config::parse(kDefaults);
    for (const auto& [key, v] : defaults.entries()) k.insert(key);
    return k;
  }();
  return keys;
}

std::string default_config_text() { return kDefaults; }

ExperimentSettings settings_from_config(const Config& user) {
  user.require_known(known_config_keys());
  Config c = Config::parse(kDefaults);
  for (const auto& [k, v] : user.entries()) c.set(k, v);

  ExperimentSettings s;
  // Where results go does not change them; keep it out of the hash.
  Config hashed = c;
  hashed.set("output.dir", "");
  s.config_hash = hashed.hash();
  s.model = noise_model_from_string(c.get_string("model", "gaussian"));
  const long long seed = c.get_int("seed", 1);
  if (seed < 0) throw PreconditionError("seed must be >= 0");
  s.seed = static_cast<std::uint64_t>(seed);

  s.clean_path = c.get_string("input.clean", "");
  s.noisy_path = c.get_string("input.noisy", "");
  s.phantom = c.get_string("input.phantom", "mixed");
  s.size = to_size(c.get_double("input.size", 32), "input.size");

  s.noise.kind = noise_kind_from_string(c.get_string("noise.kind", "gaussian"));
  s.noise.mean = c.get_double("noise.mean", 0.0);
  s.noise.variance = c.get_double("noise.variance", 0.002);
  s.noise.scale = c.get_double("noise.scale", 1.0);
  s.noise.density = c.get_double("noise.density", 0.0);
  s.noise.validate();

  SolverConfig& sv = s.solver;
  sv.epsilon = c.get_double("solver.epsilon", sv.epsilon);
  sv.huber.gamma = c.get_double("solver.gamma", sv.huber.gamma);
  sv.huber.g_cap = c.get_double("solver.g_cap", sv.huber.g_cap);
  sv.huber.variant = variant_from_string(c.get_string("solver.variant", "max"));
  sv.tol_ssn = c.get_double("solver.tol", sv.tol_ssn);
  sv.abs_floor = c.get_double("solver.abs_floor", sv.abs_floor);
  sv.max_ssn = static_cast<int>(c.get_int("solver.max_iter", sv.max_ssn));
  sv.damping = damping_from_string(c.get_string("solver.damping", "halving"));
  sv.max_backtracks = static_cast<int>(c.get_int("solver.max_backtracks", sv.max_backtracks));
  sv.boundary = boundary_from_string(c.get_string("solver.boundary", "dirichlet"));
  sv.modified_newton = c.get_bool("solver.modified", true);
  if (!c.get_string("solver.gamma_l1", "").empty()) sv.gamma_l1 = c.get_double("solver.gamma_l1", 0.0);
  sv.u_floor = c.get_double("solver.u_floor", sv.u_floor);
  sv.validate();

  BilevelConfig& b = s.bilevel;
  b.beta = c.get_double("bilevel.beta", b.beta);
  b.alpha = c.get_double("bilevel.alpha", b.alpha);
  b.grad_mode = grad_mode_from_string(c.get_string("bilevel.grad_mode", "forward_fd"));
  b.fd_rel_step = c.get_double("bilevel.fd_step", b.fd_rel_step);
  b.tol_grad = c.get_double("bilevel.tol_grad", b.tol_grad);
  b.tol_cost = c.get_double("bilevel.tol_cost", b.tol_cost);
  b.max_iter = static_cast<int>(c.get_int("bilevel.max_iter", b.max_iter));
  b.lambda0 = c.get_list("bilevel.lambda0", {});
  b.backtracking = c.get_bool("bilevel.backtracking", false);
  b.validate();
  if (!b.lambda0.empty() && b.lambda0.size() != weight_count(s.model)) {
    throw PreconditionError("bilevel.lambda0 needs " + std::to_string(weight_count(s.model)) + " value(s)");
  }

  s.out_dir = c.get_string("output.dir", ".");
  s.image_format = c.get_string("output.format", "png");
  if (s.image_format != "png" && s.image_format != "pgm") throw PreconditionError("output.format must be png or pgm");
  s.bit_depth = static_cast<int>(c.get_int("output.bit_depth", 8));
  if (s.bit_depth != 8 && s.bit_depth != 16) throw PreconditionError("output.bit_depth must be 8 or 16");

  s.denoise_lambda = c.get_list("denoise.lambda", {});
  s.train_pairs = static_cast<int>(c.get_int("train.pairs", 2));
  if (s.train_pairs < 1) throw PreconditionError("train.pairs must be >= 1");
  s.train_variances = c.get_list("train.variances", {});
  s.gradcheck_lambda = c.get_list("gradcheck.lambda", {});
  s.gradcheck_step = c.get_double("gradcheck.step", 1e-4);
  s.gradcheck_bound = c.get_double("gradcheck.bound", 1e-3);
  if (!(s.gradcheck_step > 0.0) || !(s.gradcheck_bound > 0.0)) {
    throw PreconditionError("gradcheck.step and gradcheck.bound must be positive");
  }
  s.sweep_sizes = c.get_list("sweep.sizes", {});
  for (double v : s.sweep_sizes) to_size(v, "sweep.sizes");
  s.sweep_variances = c.get_list("sweep.variances", {});
  for (double v : s.sweep_variances) {
    if (!(v >= 0.0)) throw PreconditionError("sweep.variances must be >= 0");
  }
  for (const auto* lst : {&s.denoise_lambda, &s.gradcheck_lambda}) {
    if (!lst->empty() && lst->size() != weight_count(s.model)) {
      throw PreconditionError("lambda lists need " + std::to_string(weight_count(s.model)) + " value(s)");
    }
  }
  return s;
}

ImagePair make_pair(const ExperimentSettings& s, std::uint64_t seed_offset, double variance,
                    std::size_t size_override) {
  ImagePair p;
  if (!s.clean_path.empty() && size_override == 0) {
    p.clean = read_image(s.clean_path);
  } else {
    const std::size_t n = size_override ? size_override : s.size;
    p.clean = make_phantom(s.phantom, n, n);
  }
  if (!s.noisy_path.empty() && seed_offset == 0 && variance < 0.0 && size_override == 0) {
    p.noisy = read_image(s.noisy_path);
    if (!p.noisy.same_shape(p.clean)) throw PreconditionError("input.noisy and input.clean differ in shape");
  } else {
    NoiseSpec spec = s.noise;
    if (variance >= 0.0) spec.variance = variance;
    p.noisy = add_noise(p.clean, spec, s.seed + seed_offset);
  }
  return p;
}

int run_noise(const ExperimentSettings& s) {
  const ImagePair p = make_pair(s);
  write_image(p.clean, out_path(s, image_name(s, "clean")).string(), s.bit_depth);
  write_image(p.noisy, out_path(s, image_name(s, "noisy")).string(), s.bit_depth);
  return 0;
}

int run_denoise(const ExperimentSettings& s) {
  const ImagePair p = make_pair(s);
  const std::vector<double> lambda = s.denoise_lambda.empty() ? default_lambda0(s.model, p.noisy) : s.denoise_lambda;
  CsvMeta meta = meta_for(s, &p.noisy);
  std::string lam;
  for (double l : lambda) lam += (lam.empty() ? "" : ";") + fmt(l);
  meta.extra.emplace_back("lambda", lam);
  CsvWriter trace(out_path(s, "ssn_trace.csv").string(), meta, {"iter", "residual"});

  auto dump = [&trace](const SsnTrace& t) {
    for (std::size_t k = 0; k < t.residuals.size(); ++k) trace.row({fmt(k), fmt(t.residuals[k])});
  };
  StateSolution sol;
  try {
    sol = solve_state(s.model, p.noisy, lambda, s.solver);
  } catch (const ConvergenceError& e) {
    dump(e.trace());
    throw;
  }
  dump(sol.trace);
  write_image(p.noisy, out_path(s, image_name(s, "noisy")).string(), s.bit_depth);
  write_image(sol.u, out_path(s, image_name(s, "denoised")).string(), s.bit_depth);

  CsvWriter summary(out_path(s, "denoise_result.csv").string(), meta, {"key", "value"});
  summary.row({"ssn_iterations", fmt(sol.trace.iterations)});
  summary.row({"converged", sol.trace.converged ? "true" : "false"});
  summary.row({"damped_steps", fmt(sol.trace.damped_steps)});
  summary.row({"line_search_failures", fmt(sol.trace.line_search_failures)});
  summary.row({"clamp_events", fmt(sol.trace.clamp_events)});
  summary.row({"psnr_noisy", fmt(psnr(p.noisy, p.clean))});
  summary.row({"psnr_denoised", fmt(psnr(sol.u, p.clean))});
  return 0;
}

int run_learn(const ExperimentSettings& s) {
  const ImagePair p = make_pair(s);
  write_image(p.noisy, out_path(s, image_name(s, "noisy")).string(), s.bit_depth);
  LearningProblem problem{s.model, {TrainingPair{p.noisy, p.clean}}, s.solver};
  learn_and_report(s, problem, "");
  return 0;
}

int run_train(const ExperimentSettings& s) {
  LearningProblem problem{s.model, {}, s.solver};
  const std::size_t n = s.train_variances.empty() ? static_cast<std::size_t>(s.train_pairs) : s.train_variances.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double var = s.train_variances.empty() ? -1.0 : s.train_variances[k];
    ImagePair p = make_pair(s, k, var);
    problem.pairs.push_back({std::move(p.noisy), std::move(p.clean)});
  }
  learn_and_report(s, problem, "train_");
  return 0;
}

int run_gradcheck(const ExperimentSettings& s) {
  const ImagePair p = make_pair(s);
  LearningProblem problem{s.model, {TrainingPair{p.noisy, p.clean}}, s.solver};
  ReducedObjective obj(problem, s.bilevel);
  const std::vector<double> lambda =
      s.gradcheck_lambda.empty() ? default_lambda0(s.model, p.noisy) : s.gradcheck_lambda;
  const auto at = obj.evaluate(lambda);
  const AdjointData adj = obj.adjoint_gradient(lambda, at);
  const auto F = [&](std::span<const double> l) { return obj.cost_at(l, &at.states); };
  const std::vector<double> fd = central_fd_gradient(F, lambda, s.gradcheck_step);

  CsvMeta meta = meta_for(s, &p.noisy);
  meta.extra.emplace_back("bound", fmt(s.gradcheck_bound));
  CsvWriter out(out_path(s, "gradcheck.csv").string(), meta, {"component", "lambda", "adjoint", "fd", "rel_err"});
  double fd_norm = 0.0, diff_norm = 0.0;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    fd_norm += fd[i] * fd[i];
    diff_norm += (adj.grad_f[i] - fd[i]) * (adj.grad_f[i] - fd[i]);
  }
  const double rel = fd_norm > 0.0 ? std::sqrt(diff_norm / fd_norm) : std::sqrt(diff_norm);
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    const double ri = std::abs(adj.grad_f[i] - fd[i]) / std::max(std::abs(fd[i]), 1e-300);
    out.row({fmt(i + 1), fmt(lambda[i]), fmt(adj.grad_f[i]), fmt(fd[i]), fmt(ri)});
  }
  out.row({"norm", "", "", "", fmt(rel)});
  return rel <= s.gradcheck_bound ? 0 : 2;
}

int run_sweep_mesh(const ExperimentSettings& s) {
  const std::size_t d = weight_count(s.model);
  std::vector<std::string> cols{"size", "h"};
  for (auto& c : lambda_columns("lambda", d)) cols.push_back(c);
  for (const char* c : {"cost", "outer_iterations", "converged"}) cols.emplace_back(c);
  CsvWriter out(out_path(s, "sweep_mesh.csv").string(), meta_for(s, nullptr), cols);
  for (double sz : s.sweep_sizes) {
    const std::size_t n = to_size(sz, "sweep.sizes");
    const ImagePair p = make_pair(s, 0, -1.0, n);
    const BilevelResult r = projected_bfgs(p.noisy, p.clean, s.model, s.solver, s.bilevel);
    std::vector<std::string> row{fmt(n), fmt(p.noisy.h())};
    for (double l : r.lambda_star) row.push_back(fmt(l));
    row.push_back(fmt(r.cost));
    row.push_back(fmt(static_cast<int>(r.trace.iterations.size()) - 1));
    row.push_back(r.trace.converged ? "true" : "false");
    out.row(row);
  }
  return 0;
}

int run_sweep_noise(const ExperimentSettings& s) {
  const std::size_t d = weight_count(s.model);
  std::vector<std::string> cols{"variance"};
  for (auto& c : lambda_columns("lambda", d)) cols.push_back(c);
  for (const char* c : {"cost", "outer_iterations", "converged"}) cols.emplace_back(c);
  CsvWriter out(out_path(s, "sweep_noise.csv").string(), meta_for(s, nullptr), cols);
  for (double var : s.sweep_variances) {
    const ImagePair p = make_pair(s, 0, var);
    const BilevelResult r = projected_bfgs(p.noisy, p.clean, s.model, s.solver, s.bilevel);
    std::vector<std::string> row{fmt(var)};
    for (double l : r.lambda_star) row.push_back(fmt(l));
    row.push_back(fmt(r.cost));
    row.push_back(fmt(static_cast<int>(r.trace.iterations.size()) - 1));
    row.push_back(r.trace.converged ? "true" : "false");
    out.row(row);
  }
  return 0;
}

}  // namespace tvlearn
