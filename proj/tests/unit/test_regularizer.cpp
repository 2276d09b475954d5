#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "tvlearn/error.hpp"
#include "tvlearn/regularizer.hpp"

using namespace tvlearn;

namespace {

HuberParams maxform(double gamma) { return HuberParams{gamma, 1.0, HuberVariant::MaxForm}; }
HuberParams c1form(double gamma, double g = 1.0) { return HuberParams{gamma, g, HuberVariant::C1Form}; }

double len(const Vec2& z) { return std::hypot(z[0], z[1]); }

Vec2 random_vec(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> d(-scale, scale);
  return {d(rng), d(rng)};
}

}  // namespace

TEST_CASE("huber_value examples") {
  CHECK(huber_value({0.0, 0.0}, maxform(10.0)) == 0.0);
  const double g = 8.0;
  const double s = 1.0 / g;
  const double quad = 0.5 * g * s * s;
  const double lin = s - 0.5 / g;
  CHECK(quad == doctest::Approx(0.5 / g));
  CHECK(lin == doctest::Approx(0.5 / g));
  CHECK(huber_value({s, 0.0}, maxform(g)) == doctest::Approx(0.5 / g));
  CHECK(huber_value({2.0, 0.0}, maxform(1.0)) == doctest::Approx(1.5));
}

TEST_CASE("h_gamma examples") {
  const Vec2 z0 = h_gamma({0.0, 0.0}, maxform(2.0));
  CHECK(z0[0] == 0.0);
  CHECK(z0[1] == 0.0);
  const Vec2 a = h_gamma({1.0, 0.0}, maxform(2.0));
  CHECK(a[0] == doctest::Approx(1.0));
  CHECK(a[1] == 0.0);
  const Vec2 b = h_gamma({0.25, 0.0}, maxform(2.0));
  CHECK(b[0] == doctest::Approx(0.5));
  const Vec2 c = h_gamma({0.0, 0.0}, c1form(5.0));
  CHECK(c[0] == 0.0);
}

TEST_CASE("h_gamma is bounded by max(1, g_cap)") {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 1000; ++t) {
    const Vec2 z = random_vec(rng, 2.0);
    CHECK(len(h_gamma(z, maxform(30.0))) <= 1.0 + 1e-15);
    CHECK(len(h_gamma(z, c1form(30.0, 1.5))) <= 1.5 + 1e-15);
  }
}

TEST_CASE("chi_gamma branches") {
  const HuberParams p = c1form(10.0, 1.0);
  // gamma|z| <= g - 1/(2 gamma) = 0.95
  CHECK(chi_gamma({0.05, 0.0}, p) == doctest::Approx(0.5));
  CHECK(chi_gamma({0.0, 0.09}, p) == doctest::Approx(0.9));
  // gamma|z| >= g + 1/(2 gamma) = 1.05
  CHECK(chi_gamma({0.2, 0.0}, p) == doctest::Approx(1.0));
  CHECK(chi_gamma({0.3, -0.4}, p) == doctest::Approx(1.0));
  CHECK_THROWS_AS(chi_gamma({0.1, 0.0}, maxform(10.0)), PreconditionError);
}

TEST_CASE("|h_gamma| equals chi_gamma for the C1 form") {
  std::mt19937_64 rng(2);
  const HuberParams p = c1form(25.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const Vec2 z = random_vec(rng, 0.08);
    CHECK(std::abs(len(h_gamma(z, p)) - chi_gamma(z, p)) <= 1e-12);
  }
}

TEST_CASE("newton_diffusion_matrix at z = 0 and on the inactive branch") {
  const Mat2 a = newton_diffusion_matrix({0.0, 0.0}, std::nullopt, maxform(7.0), false);
  CHECK(a.a00 == 7.0);
  CHECK(a.a11 == 7.0);
  CHECK(a.a01 == 0.0);
  const Mat2 b = newton_diffusion_matrix({0.01, 0.02}, std::nullopt, c1form(7.0), false);
  CHECK(b.a00 == 7.0);
  CHECK(b.a11 == 7.0);
  CHECK(b.a10 == 0.0);
}

TEST_CASE("C1 Jacobian on the saturated branch is symmetric positive semidefinite") {
  std::mt19937_64 rng(3);
  const HuberParams p = c1form(20.0, 1.0);
  int tested = 0;
  while (tested < 1000) {
    const Vec2 z = random_vec(rng, 1.0);
    if (p.gamma * len(z) < p.g_cap + 0.5 / p.gamma) continue;
    ++tested;
    const Mat2 m = newton_diffusion_matrix(z, std::nullopt, p, false);
    CHECK(m.a01 == doctest::Approx(m.a10).epsilon(1e-12).scale(1.0));
    const double tr = m.a00 + m.a11;
    const double det = m.a00 * m.a11 - m.a01 * m.a10;
    const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    CHECK(0.5 * tr - disc >= -1e-12);
  }
}

TEST_CASE("h_gamma is monotone") {
  std::mt19937_64 rng(4);
  for (const HuberParams& p : {maxform(15.0), c1form(15.0, 1.0), c1form(15.0, 2.0)}) {
    for (int t = 0; t < 1000; ++t) {
      const Vec2 a = random_vec(rng, 0.3), b = random_vec(rng, 0.3);
      const Vec2 ha = h_gamma(a, p), hb = h_gamma(b, p);
      CHECK((ha[0] - hb[0]) * (a[0] - b[0]) + (ha[1] - hb[1]) * (a[1] - b[1]) >= -1e-14);
    }
  }
}

TEST_CASE("h_gamma is the gradient of huber_value") {
  std::mt19937_64 rng(5);
  for (const HuberParams& p : {maxform(12.0), c1form(12.0, 1.0)}) {
    int tested = 0;
    while (tested < 1000) {
      const Vec2 z = random_vec(rng, 0.25);
      if (std::abs(p.gamma * len(z) - 1.0) < 1e-3) continue;
      ++tested;
      const double e = 1e-6;
      const double gx = (huber_value({z[0] + e, z[1]}, p) - huber_value({z[0] - e, z[1]}, p)) / (2 * e);
      const double gy = (huber_value({z[0], z[1] + e}, p) - huber_value({z[0], z[1] - e}, p)) / (2 * e);
      const Vec2 h = h_gamma(z, p);
      const double err = std::hypot(gx - h[0], gy - h[1]) / std::max(len(h), 1e-3);
      CHECK(err < 1e-6);
    }
  }
}

TEST_CASE("C1 Jacobian matches finite differences of h_gamma, also near branch boundaries") {
  const HuberParams p = c1form(10.0, 1.0);
  const double lo = (p.g_cap - 0.5 / p.gamma) / p.gamma;
  const double hi = (p.g_cap + 0.5 / p.gamma) / p.gamma;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> ang(0.0, 6.283185307179586);
  for (double r : {lo * (1 - 1e-3), lo * (1 + 1e-3), 0.5 * (lo + hi), hi * (1 - 1e-3), hi * (1 + 1e-3)}) {
    for (int t = 0; t < 20; ++t) {
      const double a = ang(rng);
      const Vec2 z{r * std::cos(a), r * std::sin(a)};
      const Mat2 m = newton_diffusion_matrix(z, std::nullopt, p, false);
      const double e = 1e-7;
      const Vec2 px = h_gamma({z[0] + e, z[1]}, p), mx = h_gamma({z[0] - e, z[1]}, p);
      const Vec2 py = h_gamma({z[0], z[1] + e}, p), my = h_gamma({z[0], z[1] - e}, p);
      CHECK(std::abs((px[0] - mx[0]) / (2 * e) - m.a00) < 1e-4 * p.gamma);
      CHECK(std::abs((px[1] - mx[1]) / (2 * e) - m.a10) < 1e-4 * p.gamma);
      CHECK(std::abs((py[0] - my[0]) / (2 * e) - m.a01) < 1e-4 * p.gamma);
      CHECK(std::abs((py[1] - my[1]) / (2 * e) - m.a11) < 1e-4 * p.gamma);
    }
  }
}

TEST_CASE("plain MaxForm Jacobian matches finite differences off the kink") {
  const HuberParams p = maxform(10.0);
  std::mt19937_64 rng(7);
  int tested = 0;
  while (tested < 200) {
    const Vec2 z = random_vec(rng, 0.3);
    if (std::abs(p.gamma * len(z) - 1.0) < 1e-3) continue;
    ++tested;
    const Mat2 m = newton_diffusion_matrix(z, std::nullopt, p, false);
    const double e = 1e-7;
    const Vec2 px = h_gamma({z[0] + e, z[1]}, p), mx = h_gamma({z[0] - e, z[1]}, p);
    const Vec2 py = h_gamma({z[0], z[1] + e}, p), my = h_gamma({z[0], z[1] - e}, p);
    CHECK(std::abs((px[0] - mx[0]) / (2 * e) - m.a00) < 1e-5 * p.gamma);
    CHECK(std::abs((px[1] - mx[1]) / (2 * e) - m.a10) < 1e-5 * p.gamma);
    CHECK(std::abs((py[0] - my[0]) / (2 * e) - m.a01) < 1e-5 * p.gamma);
    CHECK(std::abs((py[1] - my[1]) / (2 * e) - m.a11) < 1e-5 * p.gamma);
  }
}

TEST_CASE("modified MaxForm matrix uses q/max(1,|q|) as output direction") {
  const HuberParams p = maxform(4.0);
  const Vec2 z{0.6, 0.8};  // gamma|z| = 4
  const Vec2 q{2.0, 0.0};  // |q| = 2 -> w = (1, 0)
  const Mat2 m = newton_diffusion_matrix(z, q, p, true);
  const double c = 16.0 / 16.0;
  CHECK(m.a00 == doctest::Approx(1.0 - c * 1.0 * 0.6));
  CHECK(m.a01 == doctest::Approx(-c * 1.0 * 0.8));
  CHECK(m.a10 == doctest::Approx(0.0));
  CHECK(m.a11 == doctest::Approx(1.0));
  // with q = h_gamma(z) the modified and plain matrices agree
  const Mat2 a = newton_diffusion_matrix(z, h_gamma(z, p), p, true);
  const Mat2 b = newton_diffusion_matrix(z, std::nullopt, p, false);
  CHECK(a.a00 == doctest::Approx(b.a00));
  CHECK(a.a01 == doctest::Approx(b.a01));
  CHECK(a.a10 == doctest::Approx(b.a10));
  CHECK(a.a11 == doctest::Approx(b.a11));
  CHECK_THROWS_AS(newton_diffusion_matrix(z, std::nullopt, p, true), PreconditionError);
}

TEST_CASE("modified C1Form matrix reduces to the exact Jacobian at q = h_gamma(z) and stays PSD") {
  const HuberParams p = c1form(30.0);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> d(-0.2, 0.2);
  for (int t = 0; t < 500; ++t) {
    const Vec2 z{d(rng), d(rng)};
    const Mat2 a = newton_diffusion_matrix(z, h_gamma(z, p), p, true);
    const Mat2 b = newton_diffusion_matrix(z, std::nullopt, p, false);
    CHECK(std::abs(a.a00 - b.a00) <= 1e-12 * p.gamma);
    CHECK(std::abs(a.a01 - b.a01) <= 1e-12 * p.gamma);
    CHECK(std::abs(a.a10 - b.a10) <= 1e-12 * p.gamma);
    CHECK(std::abs(a.a11 - b.a11) <= 1e-12 * p.gamma);
    // arbitrary dual: the symmetric part stays positive semidefinite
    const Vec2 q{3.0 * d(rng), 3.0 * d(rng)};
    const Mat2 m = newton_diffusion_matrix(z, q, p, true);
    const double s01 = 0.5 * (m.a01 + m.a10);
    const double tr = m.a00 + m.a11, det = m.a00 * m.a11 - s01 * s01;
    const double lmin = 0.5 * tr - std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    CHECK(lmin >= -1e-12 * p.gamma);
  }
  CHECK_THROWS_AS(newton_diffusion_matrix({0.5, 0.0}, std::nullopt, p, true), PreconditionError);
}

TEST_CASE("pointwise Huber bound 0 <= |z| - huber(z) <= 1/(2 gamma)") {
  std::mt19937_64 rng(8);
  for (double g : {10.0, 40.0, 160.0, 640.0}) {
    for (int t = 0; t < 1000; ++t) {
      const Vec2 z = random_vec(rng, 0.2);
      const double d = len(z) - huber_value(z, maxform(g));
      CHECK(d >= 0.0);
      // |z| - (|z| - 1/(2 gamma)) may round one ulp of |z| above the bound
      CHECK(d <= 0.5 / g + 4.0 * std::numeric_limits<double>::epsilon() * len(z));
    }
  }
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(maxform(0.0).validate(), PreconditionError);
  CHECK_THROWS_AS(maxform(-1.0).validate(), PreconditionError);
  CHECK_THROWS_AS(c1form(10.0, 0.05).validate(), PreconditionError);
  CHECK_NOTHROW(c1form(10.0, 0.06).validate());
  CHECK_NOTHROW(maxform(10.0).with_variant(HuberVariant::C1Form).validate());
}
