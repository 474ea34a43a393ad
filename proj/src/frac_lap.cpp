#include "rmlab/frac_lap.hpp"

namespace rmlab {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
}

double frac_normalization(double alpha) {
  if (!(alpha > 0.0 && alpha < 2.0)) throw std::invalid_argument("alpha must lie in (0,2)");
  return std::pow(2.0, alpha) * std::tgamma(0.5 * (alpha + 1.0)) /
         (std::sqrt(kPi) * std::abs(std::tgamma(-0.5 * alpha)));
}

double frac_normalization_oracle(double alpha) {
  // reflection formula: |Gamma(-a/2)| = pi / (sin(pi a/2) Gamma(1 + a/2))
  const double gamma_abs =
      kPi / (std::sin(kPi * alpha / 2.0) * std::tgamma(1.0 + 0.5 * alpha));
  return std::pow(2.0, alpha) * std::tgamma(0.5 * (alpha + 1.0)) / (std::sqrt(kPi) * gamma_abs);
}

double getoor_constant(double alpha) {
  return std::pow(2.0, alpha) * std::tgamma(0.5 * alpha + 1.0) *
         std::tgamma(0.5 * (alpha + 1.0)) / std::sqrt(kPi);
}

double eigen_poly_constant(double alpha) {
  return std::pow(2.0, alpha) * std::tgamma(0.5 * alpha + 2.0) *
         std::tgamma(0.5 * (alpha + 1.0)) / std::sqrt(kPi);
}

double frac_lap_reference(double alpha, double support_radius,
                          const std::function<double(double)>& value_at,
                          const std::function<double(double)>& second_deriv_at, double x,
                          double cut, double tol) {
  const double r = support_radius;
  if (!(std::abs(x) < r)) throw std::invalid_argument("reference point outside the support");
  const double tail = r + std::abs(x) + 1.0;
  auto integrand = [&](double y) {
    double acc = 2.0 * value_at(x);
    double xp = x + y, xm = x - y;
    if (std::abs(xp) <= r) acc -= value_at(xp);
    if (std::abs(xm) <= r) acc -= value_at(xm);
    return acc / std::pow(y, 1.0 + alpha);
  };
  // Near field without cancellation: the exact remainder identity
  //   2u(x) - u(x+y) - u(x-y) = -int_0^y (y - s) (u''(x+s) + u''(x-s)) ds
  // turns the (0, cut) part into -int_0^cut K(s) (u''(x+s) + u''(x-s)) ds with
  //   K(s) = int_s^cut (y - s) y^(-1-alpha) dy.
  cut = std::min(cut, 0.5 * (r - std::abs(x)));
  auto dd = [&](double s) { return second_deriv_at(x + s) + second_deriv_at(x - s); };
  double near;
  if (std::abs(alpha - 1.0) < 1e-12) {
    auto kern = [&](double s) { return dd(s) * (std::log(cut / s) + s / cut - 1.0); };
    near = -integrate_adaptive_1d(kern, 0.0, cut, tol, 48);
  } else {
    const double a1 = 1.0 - alpha;
    const double ka = std::pow(cut, a1) / a1;         // constant part of K
    const double kb = std::pow(cut, -alpha) / alpha;  // linear part of K
    const double kc = -(1.0 / a1 + 1.0 / alpha);      // s^(1-alpha) part of K
    double i0 = integrate_adaptive_1d(dd, 0.0, cut, tol, 48);
    double i1 = integrate_adaptive_1d([&](double s) { return s * dd(s); }, 0.0, cut, tol, 48);
    // s = t^q with q (2 - alpha) = 1 flattens the s^(1-alpha) endpoint weight,
    // otherwise bisection crawls for alpha near 2
    const double q = 1.0 / (2.0 - alpha);
    double i2 = q * integrate_adaptive_1d([&](double t) { return dd(std::pow(t, q)); }, 0.0,
                                          std::pow(cut, 2.0 - alpha), tol, 48);
    near = -(ka * i0 + kb * i1 + kc * i2);
  }

  // split at the kinks so the adaptive rule only sees smooth pieces
  std::vector<double> cuts{cut, tail};
  for (double c : {r - std::abs(x), r + std::abs(x)}) {
    if (c > cut + 1e-14 && c < tail - 1e-14) cuts.push_back(c);
  }
  std::sort(cuts.begin(), cuts.end());
  double body = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    body += integrate_adaptive_1d(integrand, cuts[i], cuts[i + 1], tol, 48);
  }
  double far = 2.0 * value_at(x) * std::pow(tail, -alpha) / alpha;
  return frac_normalization(alpha) * (near + body + far);
}

}  // namespace rmlab
