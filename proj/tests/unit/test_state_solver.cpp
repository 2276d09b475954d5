#include <doctest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"
#include "tvlearn/error.hpp"
#include "tvlearn/noise.hpp"
#include "tvlearn/phantom.hpp"
#include "tvlearn/state_solver.hpp"

using namespace tvlearn;

namespace {

// Independent energy/gradient for the 8x8 oracle: zero ghosts, nodal unknowns.
struct BruteForce {
  std::size_t n;
  double h, eps, gamma, lambda;
  std::vector<double> f;

  double dx(const std::vector<double>& u, std::size_t i, std::size_t j) const {
    const double next = i + 1 < n ? u[j * n + i + 1] : 0.0;
    return (next - u[j * n + i]) / h;
  }
  double dy(const std::vector<double>& u, std::size_t i, std::size_t j) const {
    const double next = j + 1 < n ? u[(j + 1) * n + i] : 0.0;
    return (next - u[j * n + i]) / h;
  }

  // d/du of h^2 [eps/2 |Du|^2 + huber(Du) + lambda/2 (u-f)^2]
  std::vector<double> gradient(const std::vector<double>& u) const {
    std::vector<double> g(u.size(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        const double a = dx(u, i, j), b = dy(u, i, j);
        const double r = std::hypot(a, b);
        const double s = gamma * r >= 1.0 ? 1.0 / r : gamma;  // huber'(z) = s z
        const double wx = (eps + s) * a * h * h / h, wy = (eps + s) * b * h * h / h;
        const std::size_t k = j * n + i;
        g[k] -= wx + wy;
        if (i + 1 < n) g[k + 1] += wx;
        if (j + 1 < n) g[k + n] += wy;
        g[k] += lambda * (u[k] - f[k]) * h * h;
      }
    }
    return g;
  }

  std::vector<double> minimize() const {
    std::vector<double> u = f;
    const double L = 8.0 * (eps + gamma) + lambda * h * h;
    const double floor = 1e-10;
    // Nesterov acceleration for the strongly convex, L-smooth energy
    std::vector<double> y = u, prev = u;
    const double mu = lambda * h * h;
    const double beta = (std::sqrt(L) - std::sqrt(mu)) / (std::sqrt(L) + std::sqrt(mu));
    for (int it = 0; it < 2000000; ++it) {
      const std::vector<double> g = gradient(y);
      double gn = 0.0;
      for (double v : g) gn += v * v;
      if (std::sqrt(gn) <= floor) return y;
      prev = u;
      for (std::size_t k = 0; k < u.size(); ++k) u[k] = y[k] - g[k] / L;
      for (std::size_t k = 0; k < u.size(); ++k) y[k] = u[k] + beta * (u[k] - prev[k]);
    }
    FAIL("brute-force minimizer did not converge");
    return u;
  }
};

ImageGrid noisy_phantom(std::size_t n, double variance, std::uint64_t seed) {
  NoiseSpec s;
  s.variance = variance;
  return add_noise(make_phantom("mixed", n, n), s, seed);
}

}  // namespace

TEST_CASE("zero weight or zero data give the zero state under Dirichlet closure") {
  std::mt19937_64 rng(1);
  const ImageGrid f = testing::random_grid(8, 8, rng);
  SolverConfig cfg;
  CHECK(norm_inf(solve_gaussian(f, 0.0, cfg).u) == 0.0);
  CHECK(norm_inf(solve_impulse(f, 0.0, cfg).u) == 0.0);
  const double zero2[2] = {0.0, 0.0};
  CHECK(norm_inf(solve_state(NoiseModel::GaussPoisson, f, zero2, cfg).u) == 0.0);
  CHECK(norm_inf(solve_gaussian(f.like(), 250.0, cfg).u) == 0.0);
}

TEST_CASE("Gaussian SSN matches a brute-force minimizer of the discrete energy on 8x8") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 3; ++trial) {
    const ImageGrid f = testing::random_grid(8, 8, rng);
    SolverConfig cfg;
    cfg.huber.gamma = 20.0;
    cfg.epsilon = 1e-6;
    cfg.tol_ssn = 1e-12;
    const StateSolution s = solve_gaussian(f, 100.0, cfg);
    BruteForce bf{8, f.h(), 1e-6, 20.0, 100.0, {f.values().begin(), f.values().end()}};
    const std::vector<double> ref = bf.minimize();
    double err = 0.0;
    for (std::size_t k = 0; k < ref.size(); ++k) err = std::max(err, std::abs(ref[k] - s.u[k]));
    CHECK(err < 1e-4);
  }
}

TEST_CASE("the returned state satisfies the convergence target") {
  const ImageGrid f = noisy_phantom(24, 0.002, 3);
  SolverConfig cfg;
  for (NoiseModel m : {NoiseModel::Gaussian, NoiseModel::GaussPoisson, NoiseModel::Impulse}) {
    const std::vector<double> lam = m == NoiseModel::GaussPoisson ? std::vector<double>{300.0, 20.0}
                                                                   : std::vector<double>{300.0};
    const StateSolution s = solve_state(m, f, lam, cfg);
    CHECK(s.trace.converged);
    CHECK(s.trace.residuals.back() <= cfg.tol_ssn * s.trace.residuals.front());
    CHECK(norm_l2(state_residual(m, f, lam, s.u, cfg)) == doctest::Approx(s.trace.residuals.back()));
    CHECK(norm_inf(s.q) <= 1.0 + 10 * cfg.tol_ssn);
    if (m == NoiseModel::Impulse) {
      REQUIRE(s.p_dual.has_value());
      CHECK(norm_inf(*s.p_dual) <= 1.0 + 10 * cfg.tol_ssn);
    }
  }
}

TEST_CASE("Gauss+Poisson with lambda2 = 0 also solves the plain Gaussian equation") {
  std::mt19937_64 rng(4);
  const ImageGrid f = testing::random_grid(16, 16, rng, 0.3, 1.0);
  SolverConfig cfg;
  cfg.huber.gamma = 50.0;
  const double lam = 400.0;
  const StateSolution s = solve_gauss_poisson(f, lam, 0.0, cfg);
  const double l1[1] = {lam};
  const double r0 = norm_l2(state_residual(NoiseModel::Gaussian, f, l1, f, cfg));
  const double r = norm_l2(state_residual(NoiseModel::Gaussian, f, l1, s.u, cfg));
  CHECK(r <= 10.0 * cfg.tol_ssn * r0);
}

TEST_CASE("Poisson-only weight with Neumann closure keeps a constant plateau within O(1/lambda2)") {
  // f = c inside, 0 on the border ring; the interior plateau deviates like 1/lambda2
  const std::size_t n = 16;
  const double c = 0.6;
  ImageGrid f(n, n, 0.0);
  for (std::size_t j = 1; j + 1 < n; ++j) {
    for (std::size_t i = 1; i + 1 < n; ++i) f(i, j) = c;
  }
  SolverConfig cfg;
  cfg.boundary = Boundary::Neumann;
  cfg.huber.gamma = 100.0;
  std::vector<double> scaled;
  for (double l2 : {1e2, 1e3, 1e4}) {
    const StateSolution s = solve_gauss_poisson(f, 0.0, l2, cfg);
    double err = 0.0;
    for (std::size_t j = 3; j + 3 < n; ++j) {
      for (std::size_t i = 3; i + 3 < n; ++i) err = std::max(err, std::abs(s.u(i, j) - c));
    }
    scaled.push_back(err * l2);
  }
  CHECK(scaled[1] <= 2.0 * scaled[0] + 1e-12);
  CHECK(scaled[2] <= 2.0 * scaled[0] + 1e-12);
  CHECK(scaled[2] / 1e4 < 1e-2);
}

TEST_CASE("impulse solve with a large weight stays close to clean data") {
  const ImageGrid f = make_phantom("shapes", 32, 32);
  SolverConfig cfg;
  cfg.boundary = Boundary::Neumann;
  cfg.huber.gamma = 50.0;
  const StateSolution s = solve_impulse(f, 200.0, cfg);
  double err = 0.0;
  for (std::size_t j = 1; j + 1 < 32; ++j) {
    for (std::size_t i = 1; i + 1 < 32; ++i) err = std::max(err, std::abs(s.u(i, j) - f(i, j)));
  }
  CHECK(err <= 1.0 / cfg.l1_gamma() + 0.05);
}

TEST_CASE("Gaussian solution lowers the energy below the start u = f and is a local minimum") {
  const ImageGrid f = noisy_phantom(24, 0.005, 5);
  SolverConfig cfg;
  const double lam = 200.0;
  const StateSolution s = solve_gaussian(f, lam, cfg);
  const double e = gaussian_energy(f, lam, s.u, cfg);
  CHECK(e < gaussian_energy(f, lam, f, cfg));
  std::mt19937_64 rng(6);
  for (int t = 0; t < 10; ++t) {
    const ImageGrid d = testing::random_grid(24, 24, rng, -1e-3, 1e-3);
    CHECK(gaussian_energy(f, lam, s.u + d, cfg) >= e - 1e-15);
  }
}

TEST_CASE("epsilon is an artificial parameter") {
  const ImageGrid f = noisy_phantom(32, 0.002, 7);
  SolverConfig a, b;
  a.epsilon = 1e-10;
  b.epsilon = 1e-12;
  const ImageGrid ua = solve_gaussian(f, 500.0, a).u;
  const ImageGrid ub = solve_gaussian(f, 500.0, b).u;
  CHECK(norm_l2(ua - ub) < 1e-4);
}

TEST_CASE("solutions converge as gamma grows") {
  const ImageGrid f = noisy_phantom(32, 0.002, 8);
  SolverConfig cfg;
  cfg.max_ssn = 100;
  std::vector<double> d;
  for (double g : {10.0, 40.0, 160.0, 640.0}) {
    cfg.huber.gamma = g;
    const ImageGrid u1 = solve_gaussian(f, 500.0, cfg).u;
    cfg.huber.gamma = 4 * g;
    const ImageGrid u4 = solve_gaussian(f, 500.0, cfg).u;
    d.push_back(norm_l2(u1 - u4));
  }
  for (std::size_t k = 1; k < d.size(); ++k) CHECK(d[k] < d[k - 1]);
  // at least linear in 1/gamma overall
  CHECK(d.back() <= d.front() * 4.0 * (10.0 / 640.0));
}

TEST_CASE("Gaussian SSN shows a superlinear tail at gamma = 100") {
  const ImageGrid f = noisy_phantom(32, 0.002, 1);
  SolverConfig cfg;
  cfg.huber.gamma = 100.0;
  const StateSolution s = solve_gaussian(f, 500.0, cfg);
  const auto& r = s.trace.residuals;
  REQUIRE(r.size() >= 4);
  const std::size_t m = r.size();
  const double q1 = r[m - 3] / r[m - 4], q2 = r[m - 2] / r[m - 3], q3 = r[m - 1] / r[m - 2];
  CHECK(q3 < 0.5);
  CHECK(q2 < 0.5);
  CHECK(q1 < 1.0);
}

TEST_CASE("precondition errors") {
  std::mt19937_64 rng(9);
  ImageGrid f = testing::random_grid(8, 8, rng);
  SolverConfig cfg;
  CHECK_THROWS_AS(solve_gaussian(f, -1.0, cfg), PreconditionError);
  CHECK_THROWS_AS(solve_impulse(f, -1.0, cfg), PreconditionError);
  CHECK_THROWS_AS(solve_gauss_poisson(f, 0.0, 0.0, cfg), PreconditionError);
  f[5] = -0.2;
  CHECK_THROWS_AS(solve_gauss_poisson(f, 1.0, 10.0, cfg), PreconditionError);
  const double one[1] = {1.0};
  CHECK_THROWS_AS(solve_state(NoiseModel::GaussPoisson, f, one, cfg), PreconditionError);
  SolverConfig bad = cfg;
  bad.tol_ssn = 2.0;
  CHECK_THROWS_AS(solve_gaussian(f, 10.0, bad), PreconditionError);
}

TEST_CASE("non-convergence carries the partial trace") {
  const ImageGrid f = noisy_phantom(24, 0.005, 10);
  SolverConfig cfg;
  cfg.max_ssn = 1;
  try {
    solve_gaussian(f, 300.0, cfg);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.trace().residuals.size() == 2);
    CHECK_FALSE(e.trace().converged);
  }
}
