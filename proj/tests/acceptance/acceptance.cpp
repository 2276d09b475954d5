// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <algorithm>
#include <limits>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "tvlearn/adjoint.hpp"
#include "tvlearn/bilevel.hpp"
#include "tvlearn/grid.hpp"
#include "tvlearn/image_io.hpp"
#include "tvlearn/noise.hpp"
#include "tvlearn/phantom.hpp"
#include "tvlearn/regularizer.hpp"
#include "tvlearn/state_solver.hpp"

using namespace tvlearn;
namespace fs = std::filesystem;

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

int failures = 0;

void run(int id, const char* title, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool pass = o.pass;
  std::string extra;
  if (limit_s > 0.0 && secs > limit_s) {
    pass = false;
    extra = " [runtime limit " + num(limit_s) + " s exceeded]";
  }
  if (!pass) ++failures;
  std::printf("%s criterion %d: %s -- %s (%.1f s)%s\n", pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs,
              extra.c_str());
  std::fflush(stdout);
}

ImageGrid noisy_gaussian(const ImageGrid& clean, double variance, std::uint64_t seed) {
  NoiseSpec s;
  s.variance = variance;
  return add_noise(clean, s, seed);
}

SolverConfig tight_c1(double gamma = 100.0) {
  SolverConfig cfg;
  cfg.huber = HuberParams{gamma, 1.0, HuberVariant::C1Form};
  cfg.tol_ssn = 1e-12;
  cfg.abs_floor = 1e-15;
  return cfg;
}

// Brute-force minimizer of h^2 [eps/2 |Du|^2 + huber(Du) + lambda/2 (u-f)^2] on an n x n
// grid with zero ghosts, by accelerated gradient descent. Coded without the library's
// grad/div so it is an independent oracle.
std::vector<double> brute_force(const std::vector<double>& f, std::size_t n, double h, double eps, double gamma,
                                double lambda) {
  auto gradient = [&](const std::vector<double>& u) {
    std::vector<double> g(u.size(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = j * n + i;
        const double a = ((i + 1 < n ? u[k + 1] : 0.0) - u[k]) / h;
        const double b = ((j + 1 < n ? u[k + n] : 0.0) - u[k]) / h;
        const double r = std::hypot(a, b);
        const double s = gamma * r >= 1.0 ? 1.0 / r : gamma;
        const double wx = (eps + s) * a * h, wy = (eps + s) * b * h;
        g[k] -= wx + wy;
        if (i + 1 < n) g[k + 1] += wx;
        if (j + 1 < n) g[k + n] += wy;
        g[k] += lambda * (u[k] - f[k]) * h * h;
      }
    }
    return g;
  };
  const double L = 8.0 * (eps + gamma) + lambda * h * h;
  const double mu = lambda * h * h;
  const double beta = (std::sqrt(L) - std::sqrt(mu)) / (std::sqrt(L) + std::sqrt(mu));
  std::vector<double> u = f, y = f, prev = f;
  for (int it = 0; it < 5000000; ++it) {
    const auto g = gradient(y);
    double gn = 0.0;
    for (double v : g) gn += v * v;
    if (std::sqrt(gn) <= 1e-10) return y;
    prev = u;
    for (std::size_t k = 0; k < u.size(); ++k) u[k] = y[k] - g[k] / L;
    for (std::size_t k = 0; k < u.size(); ++k) y[k] = u[k] + beta * (u[k] - prev[k]);
  }
  throw std::runtime_error("brute-force oracle did not reach gradient norm 1e-10");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

}  // namespace

int main() {
  std::mt19937_64 rng(20240601);

  run(1, "grad/div adjointness on 100 random pairs up to 64x64", 1.0, [&] {
    std::uniform_int_distribution<std::size_t> size(2, 64);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      ImageGrid u(size(rng), size(rng));
      for (double& v : u.values()) v = d(rng);
      VectorField q(u);
      for (std::size_t k = 0; k < q.size(); ++k) {
        q.qx[k] = d(rng);
        q.qy[k] = d(rng);
      }
      const double a = inner(grad(u), q), b = inner(u, div(q));
      worst = std::max(worst, std::abs(a + b) / std::max(1.0, std::abs(a)));
    }
    return Outcome{worst <= 1e-12, "max relative defect " + num(worst) + " (bound 1e-12)"};
  });

  run(2, "8x8 Gaussian SSN vs brute-force energy minimizer, 5 random (f, lambda)", 30.0, [&] {
    std::uniform_real_distribution<double> uf(0.0, 1.0), ul(20.0, 500.0);
    double worst = 0.0;
    for (int t = 0; t < 5; ++t) {
      ImageGrid f(8, 8);
      for (double& v : f.values()) v = uf(rng);
      const double lambda = ul(rng);
      SolverConfig cfg;
      cfg.huber.gamma = 20.0;
      cfg.epsilon = 1e-6;
      cfg.tol_ssn = 1e-12;
      const ImageGrid u = solve_gaussian(f, lambda, cfg).u;
      const auto ref = brute_force({f.values().begin(), f.values().end()}, 8, f.h(), 1e-6, 20.0, lambda);
      for (std::size_t k = 0; k < ref.size(); ++k) worst = std::max(worst, std::abs(ref[k] - u[k]));
    }
    return Outcome{worst < 1e-4, "max-norm difference " + num(worst) + " (bound 1e-4)"};
  });

  const ImageGrid clean32 = make_phantom("mixed", 32, 32);
  const ImageGrid noisy32 = noisy_gaussian(clean32, 0.002, 1);

  run(3, "adjoint vs central-FD reduced gradient on 32x32, 10 random lambda", 120.0, [&] {
    const SolverConfig cfg = tight_c1();
    const double beta = 1e-10;
    std::uniform_real_distribution<double> l1(100.0, 3000.0), l2(5.0, 100.0);
    double worst_g = 0.0, worst_gp = 0.0;
    for (int t = 0; t < 10; ++t) {
      for (NoiseModel m : {NoiseModel::Gaussian, NoiseModel::GaussPoisson}) {
        std::vector<double> lam{l1(rng)};
        if (m == NoiseModel::GaussPoisson) lam.push_back(l2(rng));
        const ImageGrid u = solve_state(m, noisy32, lam, cfg).u;
        const AdjointData ad = adjoint_gradient(m, noisy32, clean32, u, lam, beta, cfg);
        auto F = [&](std::span<const double> l) { return reduced_cost(l, noisy32, clean32, m, cfg, beta).first; };
        const double e = rel_err(ad.grad_f, central_fd_gradient(F, lam, 1e-4));
        (m == NoiseModel::Gaussian ? worst_g : worst_gp) = std::max(m == NoiseModel::Gaussian ? worst_g : worst_gp, e);
      }
    }
    return Outcome{worst_g < 1e-3 && worst_gp < 1e-2, "Gaussian " + num(worst_g) + " (bound 1e-3), Gauss+Poisson " +
                                                          num(worst_gp) + " (bound 1e-2)"};
  });

  run(4, "duality identity inner(g', z(xi)) = +sum xi_i inner(phi_i', p), 10 random xi", 60.0, [&] {
    // Sign: with L z = -sum xi_i phi_i' and L^T p = -g' the identity carries a plus sign.
    const SolverConfig cfg = tight_c1();
    const std::vector<double> lam{800.0, 40.0};
    const NoiseModel m = NoiseModel::GaussPoisson;
    const ImageGrid u = solve_state(m, noisy32, lam, cfg).u;
    const ImageGrid gp = u - clean32;
    const LinearizedOperator L(m, noisy32, u, lam, cfg);
    const ImageGrid p = solve_adjoint(m, noisy32, u, lam, gp, cfg);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      const std::vector<double> xi{d(rng), d(rng)};
      const ImageGrid z = solve_linearized(m, noisy32, u, lam, xi, cfg);
      const double lhs = inner(gp, z);
      double rhs = 0.0;
      for (std::size_t i = 0; i < xi.size(); ++i) rhs += xi[i] * inner(L.fidelity_slopes()[i], p);
      worst = std::max(worst, std::abs(lhs - rhs) / std::abs(lhs));
    }
    return Outcome{worst <= 1e-10, "max relative defect " + num(worst) + " (bound 1e-10, plus-sign form)"};
  });

  run(5, "SSN superlinear tail (Gaussian 32x32, gamma=100) and convergence of the other models", 60.0, [&] {
    SolverConfig cfg;
    cfg.huber.gamma = 100.0;
    const double lam = default_lambda0(NoiseModel::Gaussian, noisy32)[0];
    const auto r = solve_gaussian(noisy32, lam, cfg).trace.residuals;
    bool ok = r.size() >= 4;
    std::string tail;
    double q[3] = {0, 0, 0};
    if (ok) {
      const std::size_t n = r.size();
      for (int k = 0; k < 3; ++k) q[k] = r[n - 3 + k] / r[n - 4 + k];
      ok = q[0] > q[1] && q[1] > q[2] && q[2] < 0.5;
      tail = "ratios " + num(q[0]) + ", " + num(q[1]) + ", " + num(q[2]);
    }
    // Gauss+Poisson at gamma = 100 and impulse at gamma = 50, cap 50 iterations
    NoiseSpec pn;
    pn.kind = NoiseKind::Poisson;
    pn.scale = 200.0;
    const ImageGrid fp = add_noise(clean32, pn, 2);
    SolverConfig cp;
    cp.huber.gamma = 100.0;
    cp.max_ssn = 50;
    const std::vector<double> lp = default_lambda0(NoiseModel::GaussPoisson, fp);
    const int itp = solve_state(NoiseModel::GaussPoisson, fp, lp, cp).trace.iterations;
    NoiseSpec sn;
    sn.kind = NoiseKind::SaltPepper;
    sn.density = 0.1;
    const ImageGrid fi = add_noise(clean32, sn, 3);
    SolverConfig ci;
    ci.huber.gamma = 50.0;
    ci.max_ssn = 50;
    int iti = 0;
    for (double l : {10.0, 100.0, 1000.0}) {
      const double w[1] = {l};
      iti = std::max(iti, solve_state(NoiseModel::Impulse, fi, w, ci).trace.iterations);
    }
    return Outcome{ok, tail + " at lambda " + num(lam) + " (need strictly decreasing, last < 0.5); Gauss+Poisson " +
                           std::to_string(itp) + " its, impulse max " + std::to_string(iti) + " its (cap 50)"};
  });

  run(6, "gamma-consistency and pointwise Huber bound", 60.0, [&] {
    SolverConfig cfg;
    cfg.max_ssn = 100;
    const double lam = 500.0;
    std::vector<double> d;
    for (double g : {10.0, 40.0, 160.0, 640.0}) {
      cfg.huber.gamma = g;
      const ImageGrid a = solve_gaussian(noisy32, lam, cfg).u;
      cfg.huber.gamma = 4.0 * g;
      const ImageGrid b = solve_gaussian(noisy32, lam, cfg).u;
      d.push_back(norm_l2(a - b));
    }
    bool ok = true;
    for (std::size_t k = 1; k < d.size(); ++k) ok = ok && d[k] < d[k - 1];
    std::uniform_real_distribution<double> z(-0.5, 0.5);
    bool bound = true;
    for (double g : {10.0, 40.0, 160.0, 640.0}) {
      for (int t = 0; t < 10000; ++t) {
        const Vec2 v{z(rng), z(rng)};
        const double gap = std::hypot(v[0], v[1]) - huber_value(v, HuberParams{g, 1.0, HuberVariant::MaxForm});
        bound = bound && gap >= 0.0 && gap <= 0.5 / g + 4.0 * kEps * std::hypot(v[0], v[1]);
      }
    }
    return Outcome{ok && bound, "||u_g - u_4g|| = " + num(d[0]) + ", " + num(d[1]) + ", " + num(d[2]) + ", " +
                                    num(d[3]) + "; Huber bound " + (bound ? "holds" : "violated")};
  });

  run(7, "64x64: lambda*(variance 0.02) < lambda*(variance 0.002), KKT complementarity", 600.0, [&] {
    const ImageGrid clean = make_phantom("mixed", 64, 64);
    SolverConfig sc;
    BilevelConfig bc;
    const BilevelResult lo = projected_bfgs(noisy_gaussian(clean, 0.002, 11), clean, NoiseModel::Gaussian, sc, bc);
    const BilevelResult hi = projected_bfgs(noisy_gaussian(clean, 0.02, 11), clean, NoiseModel::Gaussian, sc, bc);
    const double a = lo.lambda_star[0], b = hi.lambda_star[0];
    const bool kkt = lo.trace.kkt.complementarity <= 1e-6 * (1.0 + a) &&
                     hi.trace.kkt.complementarity <= 1e-6 * (1.0 + b);
    const bool ok = b < a && lo.trace.converged && hi.trace.converged && kkt;
    return Outcome{ok, "lambda*(0.002) = " + num(a) + ", lambda*(0.02) = " + num(b) + ", complementarity " +
                           num(lo.trace.kkt.complementarity) + " / " + num(hi.trace.kkt.complementarity) +
                           ", converged " + (lo.trace.converged && hi.trace.converged ? "yes" : "no")};
  });

  run(8, "mesh robustness over sizes 60..85", 1200.0, [&] {
    SolverConfig sc;
    BilevelConfig bc;
    std::vector<double> ls;
    std::string list;
    for (std::size_t n : {60u, 65u, 70u, 75u, 80u, 85u}) {
      const ImageGrid clean = make_phantom("mixed", n, n);
      const BilevelResult r = projected_bfgs(noisy_gaussian(clean, 0.002, 5), clean, NoiseModel::Gaussian, sc, bc);
      ls.push_back(r.lambda_star[0]);
      list += (list.empty() ? "" : ", ") + num(ls.back());
    }
    bool mono = true;
    for (std::size_t k = 1; k < ls.size(); ++k) mono = mono && ls[k] >= ls[k - 1];
    const auto [mn, mx] = std::minmax_element(ls.begin(), ls.end());
    const double span = (*mx - *mn) / *mn;
    return Outcome{mono && span < 0.5, "lambda* = " + list + "; nondecreasing " + (mono ? "yes" : "no") +
                                           ", span " + num(span) + " (bound 0.5)"};
  });

  run(9, "impulse end to end on 40x40, density 0.1, gamma=50", 600.0, [&] {
    const ImageGrid clean = make_phantom("mixed", 40, 40);
    NoiseSpec sn;
    sn.kind = NoiseKind::SaltPepper;
    sn.density = 0.1;
    const ImageGrid f = add_noise(clean, sn, 9);
    SolverConfig sc;
    sc.huber.gamma = 50.0;
    BilevelConfig bc;
    bc.beta = 1e-10;
    bc.lambda0 = {10.0};
    const BilevelResult r = projected_bfgs(f, clean, NoiseModel::Impulse, sc, bc);
    const auto& it = r.trace.iterations;
    const int outer = static_cast<int>(it.size()) - 1;
    int max_ssn = 0;
    for (const auto& i : it) max_ssn = std::max(max_ssn, i.ssn_main);
    const double gain = psnr(r.u_star[0], clean) - psnr(f, clean);
    const bool ok = r.trace.converged && outer <= 30 && r.cost <= 0.1 * it.front().cost && max_ssn <= 25 &&
                    gain >= 2.0;
    return Outcome{ok, std::to_string(outer) + " outer its (" + r.trace.stop_reason + "), cost " +
                           num(it.front().cost) + " -> " + num(r.cost) + ", max SSN/step " +
                           std::to_string(max_ssn) + ", lambda* " + num(r.lambda_star[0]) + ", PSNR gain " +
                           num(gain) + " dB"};
  });

  run(10, "learn twice with identical config and seed gives byte-identical traces", 0.0, [&] {
    const fs::path base = fs::path(TVLEARN_TEST_TMP) / "acceptance_determinism";
    fs::remove_all(base);
    std::string cmd_base = std::string("\"") + TVLEARN_CLI + "\" learn --seed 3 --size 32 -o ";
    for (const char* sub : {"a", "b"}) {
      fs::create_directories(base / sub);
      const std::string cmd = cmd_base + (base / sub).string() + " > /dev/null 2>&1";
      if (std::system(cmd.c_str()) != 0) return Outcome{false, "learn run failed"};
    }
    const std::string a = slurp(base / "a" / "trace.csv"), b = slurp(base / "b" / "trace.csv");
    const std::string ra = slurp(base / "a" / "result.csv"), rb = slurp(base / "b" / "result.csv");
    return Outcome{a == b && ra == rb && !a.empty(),
                   std::to_string(a.size()) + " trace bytes, " + (a == b ? "identical" : "different")};
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
