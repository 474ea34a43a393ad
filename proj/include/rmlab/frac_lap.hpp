#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "rmlab/jet.hpp"
#include "rmlab/quadrature.hpp"

namespace rmlab {

// 1D fractional Laplacian of order alpha in (0, 2) for fields supported in
// [-R, R], through the symmetric difference form
//   c_alpha * int_0^inf (2u(x) - u(x+y) - u(x-y)) / y^(1+alpha) dy.
// The field is truncated to its support radius: evaluations outside [-R, R]
// are taken as zero, which is exact for genuinely supported fields and defines
// the operator applied to the truncation otherwise.

double frac_normalization(double alpha);         // c_{1,alpha}
double frac_normalization_oracle(double alpha);  // independent route via reflection

// closed forms for profile (1-x^2)_+^s on (-1,1):
//   s = alpha/2     -> constant getoor_constant(alpha)
//   s = 1 + alpha/2 -> eigen_poly_constant(alpha) * (1 - (1+alpha) x^2)
double getoor_constant(double alpha);
double eigen_poly_constant(double alpha);

struct FracQuadScheme {
  double h0 = 0.05;     // near-field width (shrunk automatically near kinks)
  int near_panels = 6;  // panels for the Taylor-corrected near remainder
  int mid_order = 12;
  double mid_grade = 2.0;  // width ratio between neighboring graded panels
  int mid_levels = 18;     // graded bisection levels toward each segment end
};

namespace frac_detail {

// graded panels on (a, b), widths shrinking geometrically toward one end;
// resolves the algebraic kinks the shifted field has at segment boundaries
inline void graded_panels(double a, double b, int levels, double grade, bool toward_a,
                          std::vector<std::pair<double, double>>& out) {
  const double full = b - a;
  if (full <= 0.0) return;
  double prev = toward_a ? a : b;
  double off = full * std::pow(grade, -double(levels));
  // head panel adjacent to the refined end, then the ladder outward
  for (int k = 0; k <= levels; ++k) {
    double edge = toward_a ? a + off : b - off;
    if (k == levels) edge = toward_a ? b : a;
    if (toward_a) {
      out.emplace_back(prev, edge);
    } else {
      out.emplace_back(edge, prev);
    }
    prev = edge;
    off *= grade;
  }
}

}  // namespace frac_detail

// Evaluate at interior point x. The callables give the local second-order jet
// at x and plain values at shifted points.
template <class S>
S apply_frac_lap(double alpha, double support_radius, double tail_start,
                 const std::function<Jet2<S>(double)>& jet_at,
                 const std::function<S(double)>& value_at, double x,
                 const FracQuadScheme& scheme = {}) {
  if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("alpha must lie in (0,2)");
  const double r = support_radius;
  if (!(std::abs(x) < r - 1e-9)) {
    throw std::invalid_argument("fractional operator evaluated too close to the support edge");
  }
  if (tail_start < r + std::abs(x)) {
    throw std::invalid_argument("tail start must satisfy T >= R + |x|");
  }

  const double kink_lo = r - std::abs(x);  // u(x +- y) crosses the near support edge
  const double kink_hi = r + std::abs(x);
  const double h0 = std::min(scheme.h0, 0.5 * kink_lo);

  Jet2<S> ujet = jet_at(x);
  S u0 = ujet.v;
  S upp = ujet.d2(0, 0);

  auto shifted_sum = [&](double y) -> S {
    // 2u(x) - u(x+y) - u(x-y), honoring the support truncation
    S acc = 2.0 * u0;
    double xp = x + y, xm = x - y;
    if (std::abs(xp) <= r) acc = acc - value_at(xp);
    if (std::abs(xm) <= r) acc = acc - value_at(xm);
    return acc;
  };

  std::vector<S> terms;

  // near field: subtract the Taylor parabola, integrate the smooth remainder
  // integral of -u''(x) y^2 / y^(1+alpha) over (0, h0):
  terms.push_back(upp * (-std::pow(h0, 2.0 - alpha) / (2.0 - alpha)));
  {
    const auto& nw = gauss_legendre(10);
    const double h = h0 / scheme.near_panels;
    for (int p = 0; p < scheme.near_panels; ++p) {
      const double mid = (p + 0.5) * h;
      for (const auto& [t, w] : nw) {
        const double y = mid + 0.5 * h * t;
        const double wy = 0.5 * h * w / std::pow(y, 1.0 + alpha);
        S rem = shifted_sum(y) + upp * (y * y);
        terms.push_back(rem * wy);
      }
    }
  }

  // mid field (h0, T): piecewise smooth; the shifted field is singular (kinked
  // or jumping) exactly where x +- y crosses the support boundary, so cut
  // there and refine geometrically toward both ends of every piece
  {
    std::vector<double> cuts{h0};
    for (double c : {kink_lo, kink_hi}) {
      if (c > h0 + 1e-14 && c < tail_start - 1e-14) cuts.push_back(c);
    }
    cuts.push_back(tail_start);
    std::sort(cuts.begin(), cuts.end());
    const auto& nw = gauss_legendre(scheme.mid_order);
    std::vector<std::pair<double, double>> panels;
    for (std::size_t seg = 0; seg + 1 < cuts.size(); ++seg) {
      double a = cuts[seg], b = cuts[seg + 1];
      if (b - a < 1e-14) continue;
      const double m = 0.5 * (a + b);
      frac_detail::graded_panels(a, m, scheme.mid_levels, scheme.mid_grade, true, panels);
      frac_detail::graded_panels(m, b, scheme.mid_levels, scheme.mid_grade, false, panels);
    }
    for (const auto& [lo, hi] : panels) {
      if (hi - lo < 1e-16) continue;
      const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
      for (const auto& [t, w] : nw) {
        const double y = mid + half * t;
        const double wy = half * w / std::pow(y, 1.0 + alpha);
        terms.push_back(shifted_sum(y) * wy);
      }
    }
  }

  // far field: the field vanishes beyond T, the kernel integrates exactly
  terms.push_back(u0 * (2.0 * std::pow(tail_start, -alpha) / alpha));

  S total = sum_pairwise_generic(terms);
  return total * frac_normalization(alpha);
}

// slow reference evaluation used to validate the production scheme: an exact
// second-order remainder kernel near zero plus globally adaptive quadrature
double frac_lap_reference(double alpha, double support_radius,
                          const std::function<double(double)>& value_at,
                          const std::function<double(double)>& second_deriv_at, double x,
                          double cut = 5e-2, double tol = 1e-10);

}  // namespace rmlab
