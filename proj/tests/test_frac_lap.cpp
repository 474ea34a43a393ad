#include <cmath>

#include "rmlab/frac_lap.hpp"
#include "rmlab/jet.hpp"
#include <doctest.h>

using namespace rmlab;

namespace {

// (1 - x^2)_+^s truncated profile and its jet
std::function<Jet2d(double)> profile_jet(double s) {
  return [s](double t) {
    auto j = jet_seed<double>(t, 0, 1);
    auto w = 1.0 - j * j;
    if (w.v <= 0.0) return jet_const<double>(0.0, 1);
    return pow(w, s);
  };
}

std::function<double(double)> profile_val(double s) {
  return [s](double t) {
    double w = 1.0 - t * t;
    return w > 0.0 ? std::pow(w, s) : 0.0;
  };
}

double apply_profile(double alpha, double s, double x, FracQuadScheme scheme = {}) {
  return apply_frac_lap<double>(alpha, 1.0, 1.0 + std::abs(x) + 1.0, profile_jet(s),
                                profile_val(s), x, scheme);
}

}  // namespace

TEST_CASE("normalization constant agrees with the reflection-formula route") {
  for (double alpha : {0.1, 0.3, 0.5, 0.9, 1.0, 1.1, 1.5, 1.9, 1.99}) {
    CHECK(frac_normalization(alpha) ==
          doctest::Approx(frac_normalization_oracle(alpha)).epsilon(1e-12));
  }
  CHECK(frac_normalization(1.0) == doctest::Approx(0.31830988618379067).epsilon(1e-14));
  CHECK_THROWS_AS(frac_normalization(0.0), std::invalid_argument);
  CHECK_THROWS_AS(frac_normalization(2.0), std::invalid_argument);
}

TEST_CASE("closed-form constants of the (1-x^2)^s profiles") {
  CHECK(getoor_constant(0.5) == doctest::Approx(0.88622692545275801).epsilon(1e-14));
  CHECK(getoor_constant(1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(getoor_constant(1.5) == doctest::Approx(1.329340388179137).epsilon(1e-14));
  CHECK(getoor_constant(1.9) == doctest::Approx(1.8273550806240361).epsilon(1e-14));
  CHECK(eigen_poly_constant(1.0) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(eigen_poly_constant(1.5) == doctest::Approx(2.3263456793134898).epsilon(1e-14));
  // Gamma recurrence ties the two families together
  for (double alpha : {0.5, 1.0, 1.5, 1.9}) {
    CHECK(eigen_poly_constant(alpha) ==
          doctest::Approx((0.5 * alpha + 1.0) * getoor_constant(alpha)).epsilon(1e-14));
  }
}

TEST_CASE("operator maps (1-x^2)^(alpha/2) to a constant") {
  for (double alpha : {0.5, 1.0, 1.5, 1.9}) {
    const double want = getoor_constant(alpha);
    for (int i = 0; i <= 20; ++i) {
      const double x = -0.95 + 0.095 * i;
      CHECK(apply_profile(alpha, 0.5 * alpha, x) == doctest::Approx(want).epsilon(1e-7));
    }
  }
}

TEST_CASE("operator maps (1-x^2)^(1+alpha/2) to the known quadratic") {
  for (double alpha : {0.5, 1.0, 1.5}) {
    const double k = eigen_poly_constant(alpha);
    for (double x : {0.0, -0.25, 0.4, 0.7, -0.85}) {
      const double want = k * (1.0 - (1.0 + alpha) * x * x);
      CHECK(apply_profile(alpha, 1.0 + 0.5 * alpha, x) == doctest::Approx(want).epsilon(1e-8));
    }
  }
}

TEST_CASE("truncated constant field has a closed-form image") {
  // u = 1 on [-1, 1]: integrand vanishes until a shift leaves the support
  auto jet = [](double) { return jet_const<double>(1.0, 1); };
  auto val = [](double) { return 1.0; };
  const double alpha = 1.5, x = 0.3;
  double got = apply_frac_lap<double>(alpha, 1.0, 2.3, jet, val, x);
  CHECK(got == doctest::Approx(0.47516607884519887).epsilon(1e-9));
}

TEST_CASE("production scheme matches the independent reference evaluator") {
  auto val = [](double t) { return 0.7 * std::exp(-t * t) + 0.1 * std::sin(2.0 * t); };
  auto jet = [](double t) {
    auto j = jet_seed<double>(t, 0, 1);
    return exp(j * -1.0 * j) * 0.7 + sin(j * 2.0) * 0.1;
  };
  auto upp = [&](double t) { return jet(t).d2(0, 0); };
  for (double alpha : {0.5, 1.5}) {
    for (double x : {0.0, 0.4, -0.8}) {
      double got =
          apply_frac_lap<double>(alpha, 1.0, 1.0 + std::abs(x) + 1.0, jet, val, x);
      double ref = frac_lap_reference(alpha, 1.0, val, upp, x);
      CHECK(got == doctest::Approx(ref).epsilon(5e-9));
    }
  }
}

TEST_CASE("even fields give even images") {
  auto jet = profile_jet(1.75);
  auto val = profile_val(1.75);
  for (double x : {0.2, 0.55, 0.9}) {
    double plus = apply_frac_lap<double>(1.5, 1.0, 3.0, jet, val, x);
    double minus = apply_frac_lap<double>(1.5, 1.0, 3.0, jet, val, -x);
    CHECK(plus == doctest::Approx(minus).epsilon(1e-12));
  }
}

TEST_CASE("operator is linear in the field") {
  auto ja = profile_jet(1.75);
  auto va = profile_val(1.75);
  auto jb = profile_jet(1.25);
  auto vb = profile_val(1.25);
  auto jc = [&](double t) { return ja(t) * 2.0 - jb(t) * 0.5; };
  std::function<double(double)> vc = [&](double t) { return 2.0 * va(t) - 0.5 * vb(t); };
  for (double x : {0.1, 0.6}) {
    double fa = apply_frac_lap<double>(1.5, 1.0, 2.0 + x, ja, va, x);
    double fb = apply_frac_lap<double>(1.5, 1.0, 2.0 + x, jb, vb, x);
    double fc = apply_frac_lap<double>(1.5, 1.0, 2.0 + x, jc, vc, x);
    CHECK(fc == doctest::Approx(2.0 * fa - 0.5 * fb).epsilon(1e-9));
  }
}

TEST_CASE("argument guards") {
  auto jet = profile_jet(1.0);
  auto val = profile_val(1.0);
  CHECK_THROWS_AS(apply_frac_lap<double>(2.5, 1.0, 2.0, jet, val, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(apply_frac_lap<double>(1.5, 1.0, 2.0, jet, val, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(apply_frac_lap<double>(1.5, 1.0, 1.2, jet, val, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(frac_lap_reference(1.5, 1.0, val, val, 1.5), std::invalid_argument);
}
