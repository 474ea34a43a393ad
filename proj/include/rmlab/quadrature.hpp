#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace rmlab {

// axis-aligned box in up to 3 dimensions
struct Box {
  int d = 1;
  std::array<double, 3> lo{0.0, 0.0, 0.0};
  std::array<double, 3> hi{1.0, 1.0, 1.0};

  double volume() const {
    double v = 1.0;
    for (int i = 0; i < d; ++i) v *= hi[i] - lo[i];
    return v;
  }
  double side(int i) const { return hi[i] - lo[i]; }
  bool contains(std::span<const double> x, double slack = 0.0) const {
    for (int i = 0; i < d; ++i) {
      if (x[i] < lo[i] - slack || x[i] > hi[i] + slack) return false;
    }
    return true;
  }
};

// fixed-order reduction; the summation tree depends only on the length
double pairwise_sum(std::span<const double> xs);

template <class S>
S sum_pairwise_generic(std::vector<S>& xs) {
  if (xs.empty()) return S{};
  std::size_t n = xs.size();
  while (n > 1) {
    std::size_t half = n / 2;
    for (std::size_t i = 0; i < half; ++i) xs[i] = xs[2 * i] + xs[2 * i + 1];
    if (n % 2) {
      xs[half] = xs[n - 1];
      n = half + 1;
    } else {
      n = half;
    }
  }
  return xs[0];
}

// Gauss-Legendre nodes/weights on [-1, 1]; computed once per order by Newton
// iteration on the Legendre recurrence.
const std::vector<std::pair<double, double>>& gauss_legendre(int order);

// tensor-product composite rule with Lebesgue weights (weights sum to |box|)
struct Quadrature {
  Eigen::MatrixXd pts;  // N x d
  Eigen::VectorXd w;
  int d = 1;
};

Quadrature composite_gauss(const Box& box, int order, int panels_per_axis);

// 1D panel rule on [a, b]
Quadrature composite_gauss_1d(double a, double b, int order, int panels);

double integrate(const std::function<double(std::span<const double>)>& f, const Quadrature& q);

struct IntegralCertificate {
  double value = 0.0;
  double rel_change = 0.0;  // relative change at the last refinement
  int panels_per_axis = 0;
  bool converged = true;
};

// Panel-doubling refinement until successive values differ by less than
// rel_tol (relative to the current magnitude, with an absolute floor).
IntegralCertificate integrate_auto(const std::function<double(std::span<const double>)>& f,
                                   const Box& box, int order = 12, double rel_tol = 1e-9,
                                   double abs_floor = 1e-14);

// Locally adaptive 1D integration (interval bisection with an embedded
// error estimate); used where panel doubling is wasteful.
double integrate_adaptive_1d(const std::function<double(double)>& f, double a, double b,
                             double tol, int max_depth = 48);

struct NormResult {
  double value = 0.0;
  IntegralCertificate certificate;
};

// (integral of |g|^p * density)**(1/p) over the box; density must be
// normalized by the caller if a probability weighting is intended.
NormResult continuous_norm(const std::function<double(std::span<const double>)>& g, double p,
                           const Box& box,
                           const std::function<double(std::span<const double>)>& density,
                           int order = 12, double rel_tol = 1e-9);

NormResult continuous_norm(const std::function<double(std::span<const double>)>& g, double p,
                           const Box& box, int order = 12, double rel_tol = 1e-9);

}  // namespace rmlab
