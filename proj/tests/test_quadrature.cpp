#include <doctest.h>

#include <cmath>
#include <numeric>

#include "rmlab/quadrature.hpp"
#include "rmlab/rng.hpp"

using namespace rmlab;

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
}

TEST_CASE("gauss-legendre is exact on polynomials of degree 2n-1") {
  for (int order : {2, 4, 8, 13}) {
    const auto& nw = gauss_legendre(order);
    double wsum = 0.0;
    for (auto [x, w] : nw) wsum += w;
    CHECK(wsum == doctest::Approx(2.0).epsilon(1e-14));

    int deg = 2 * order - 1;
    double got = 0.0;
    for (auto [x, w] : nw) got += w * std::pow(x, deg - 1);  // even degree <= 2n-2
    double expect = 2.0 / double(deg);                       // integral of x^(deg-1), deg-1 even
    CHECK(got == doctest::Approx(expect).epsilon(1e-13));
  }
}

TEST_CASE("composite rule integrates smooth functions to machine accuracy") {
  Quadrature q = composite_gauss_1d(0.0, 1.0, 12, 8);
  double got = integrate([](std::span<const double> x) { return std::sin(kPi * x[0]); }, q);
  CHECK(got == doctest::Approx(2.0 / kPi).epsilon(1e-14));

  Box sq{2, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
  Quadrature q2 = composite_gauss(sq, 10, 2);
  double got2 = integrate(
      [](std::span<const double> x) { return x[0] * x[0] * x[1]; }, q2);
  CHECK(got2 == doctest::Approx(1.0 / 6.0).epsilon(1e-13));
}

TEST_CASE("auto refinement reports a certificate") {
  Box dom{1, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
  auto cert = integrate_auto(
      [](std::span<const double> x) { return std::sin(2.0 * kPi * 64.0 * x[0]) *
                                             std::sin(2.0 * kPi * 64.0 * x[0]); },
      dom, 12, 1e-9);
  CHECK(cert.converged);
  CHECK(cert.value == doctest::Approx(0.5).epsilon(1e-9));

  // a cusp defeats panel doubling at a tight tolerance and must be flagged
  auto bad = integrate_auto(
      [](std::span<const double> x) { return std::sqrt(std::abs(x[0] - 0.37619)); }, dom, 12,
      1e-14);
  CHECK(!bad.converged);
  CHECK(bad.panels_per_axis >= 2048);
}

TEST_CASE("adaptive bisection handles endpoint singularities") {
  double got = integrate_adaptive_1d([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0, 1e-10);
  CHECK(got == doctest::Approx(2.0).epsilon(1e-6));
  double smooth = integrate_adaptive_1d([](double x) { return std::exp(-x * x); }, 0.0, 2.0, 1e-12);
  CHECK(smooth == doctest::Approx(0.8820813907624214).epsilon(1e-12));  // erf(2) sqrt(pi)/2
}

TEST_CASE("pairwise summation is deterministic and accurate") {
  Rng rng(5150);
  std::vector<double> xs(10001);
  for (auto& x : xs) x = rng.uniform(-1.0, 1.0) * std::exp(rng.uniform(0.0, 10.0));
  double s1 = pairwise_sum(xs);
  double s2 = pairwise_sum(xs);
  CHECK(s1 == s2);
  long double ref = 0.0L;
  for (double x : xs) ref += (long double)x;
  CHECK(std::abs(s1 - double(ref)) <= 1e-10 * std::abs(double(ref)) + 1e-8);
}

TEST_CASE("density-weighted norms with convergence certificates") {
  Box dom{1, {0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}};
  auto sinpi = [](std::span<const double> x) { return std::sin(kPi * x[0]); };
  NormResult n = continuous_norm(sinpi, 2.0, dom);
  CHECK(n.value == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(n.certificate.converged);

  NormResult lin = continuous_norm([](std::span<const double> x) { return x[0]; }, 2.0, dom);
  CHECK(lin.value == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));

  for (double p : {1.0, 1.5, 2.0, 3.0}) {
    NormResult one = continuous_norm([](std::span<const double>) { return 1.0; }, p, dom);
    CHECK(one.value == doctest::Approx(1.0).epsilon(1e-12));
  }

  // norms are density-weighted: on (0,2) with uniform density, |1|_2 is still 1
  Box wide{1, {0.0, 0.0, 0.0}, {2.0, 0.0, 0.0}};
  NormResult onew = continuous_norm([](std::span<const double>) { return 1.0; }, 2.0, wide);
  CHECK(onew.value == doctest::Approx(1.0).epsilon(1e-12));
}
