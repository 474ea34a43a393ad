#include "rmlab/quadrature.hpp"

#include <map>

namespace rmlab {

double pairwise_sum(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = xs[0];
    for (std::size_t i = 1; i < n; ++i) s += xs[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

const std::vector<std::pair<double, double>>& gauss_legendre(int order) {
  if (order < 1 || order > 64) throw std::invalid_argument("gauss_legendre: order out of range");
  static std::map<int, std::vector<std::pair<double, double>>> cache;
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;

  std::vector<std::pair<double, double>> nw(order);
  const int n = order;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(3.141592653589793238462643 * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nw[i] = {-x, w};  // roots found from the positive end; store ascending
    nw[n - 1 - i] = {x, w};
  }
  if (n % 2 == 1) {
    // center the midpoint node exactly: P_n'(0) = n * P_{n-1}(0)
    double p0 = 1.0, p1 = 0.0;
    for (int k = 2; k <= n; ++k) {
      double p2 = (-(k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    double dp = n * p0;
    nw[n / 2] = {0.0, 2.0 / (dp * dp)};
  }
  auto [ins, ok] = cache.emplace(order, std::move(nw));
  (void)ok;
  return ins->second;
}

Quadrature composite_gauss_1d(double a, double b, int order, int panels) {
  if (panels < 1) throw std::invalid_argument("composite_gauss_1d: panels < 1");
  const auto& nw = gauss_legendre(order);
  Quadrature q;
  q.d = 1;
  q.pts.resize(panels * order, 1);
  q.w.resize(panels * order);
  const double h = (b - a) / panels;
  int idx = 0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    for (const auto& [x, w] : nw) {
      q.pts(idx, 0) = mid + 0.5 * h * x;
      q.w(idx) = 0.5 * h * w;
      ++idx;
    }
  }
  return q;
}

Quadrature composite_gauss(const Box& box, int order, int panels_per_axis) {
  if (box.d < 1 || box.d > 3) throw std::invalid_argument("composite_gauss: dim out of range");
  std::array<Quadrature, 3> axis;
  for (int i = 0; i < box.d; ++i) {
    axis[i] = composite_gauss_1d(box.lo[i], box.hi[i], order, panels_per_axis);
  }
  if (box.d == 1) return axis[0];

  Quadrature q;
  q.d = box.d;
  Eigen::Index n = 1;
  for (int i = 0; i < box.d; ++i) n *= axis[i].pts.rows();
  q.pts.resize(n, box.d);
  q.w.resize(n);
  Eigen::Index idx = 0;
  const Eigen::Index n0 = axis[0].pts.rows();
  const Eigen::Index n1 = axis[1].pts.rows();
  const Eigen::Index n2 = box.d == 3 ? axis[2].pts.rows() : 1;
  for (Eigen::Index i0 = 0; i0 < n0; ++i0) {
    for (Eigen::Index i1 = 0; i1 < n1; ++i1) {
      for (Eigen::Index i2 = 0; i2 < n2; ++i2) {
        q.pts(idx, 0) = axis[0].pts(i0, 0);
        q.pts(idx, 1) = axis[1].pts(i1, 0);
        double w = axis[0].w(i0) * axis[1].w(i1);
        if (box.d == 3) {
          q.pts(idx, 2) = axis[2].pts(i2, 0);
          w *= axis[2].w(i2);
        }
        q.w(idx) = w;
        ++idx;
      }
    }
  }
  return q;
}

double integrate(const std::function<double(std::span<const double>)>& f, const Quadrature& q) {
  std::vector<double> terms(q.pts.rows());
  std::array<double, 3> x{};
  for (Eigen::Index i = 0; i < q.pts.rows(); ++i) {
    for (int k = 0; k < q.d; ++k) x[k] = q.pts(i, k);
    terms[i] = q.w(i) * f(std::span<const double>(x.data(), q.d));
  }
  return pairwise_sum(terms);
}

IntegralCertificate integrate_auto(const std::function<double(std::span<const double>)>& f,
                                   const Box& box, int order, double rel_tol, double abs_floor) {
  const int max_panels = box.d == 1 ? 4096 : (box.d == 2 ? 96 : 20);
  IntegralCertificate cert;
  double prev = integrate(f, composite_gauss(box, order, 1));
  int panels = 1;
  while (true) {
    int next = panels * 2;
    if (next > max_panels) {
      cert.value = prev;
      cert.panels_per_axis = panels;
      cert.converged = false;
      return cert;
    }
    double cur = integrate(f, composite_gauss(box, order, next));
    double scale = std::max({std::abs(cur), std::abs(prev), abs_floor});
    double change = std::abs(cur - prev) / scale;
    cert.value = cur;
    cert.rel_change = change;
    cert.panels_per_axis = next;
    if (change <= rel_tol) {
      cert.converged = true;
      return cert;
    }
    prev = cur;
    panels = next;
  }
}

namespace {

double gauss10_on(const std::function<double(double)>& f, double lo, double hi) {
  const auto& nw = gauss_legendre(10);
  double s = 0.0;
  const double h = hi - lo, mid = 0.5 * (lo + hi);
  for (const auto& [x, w] : nw) s += 0.5 * h * w * f(mid + 0.5 * h * x);
  return s;
}

double adapt_rec(const std::function<double(double)>& f, double a, double b, double whole,
                 double tol, double abs_budget, int depth, int max_depth) {
  const double m = 0.5 * (a + b);
  double left = gauss10_on(f, a, m);
  double right = gauss10_on(f, m, b);
  double sum = left + right;
  double err = std::abs(sum - whole);
  // the estimate is pure roundoff below this; recursing further cannot help
  double noise = 64.0 * std::numeric_limits<double>::epsilon() *
                 (std::abs(left) + std::abs(right) + std::abs(whole));
  if (depth >= max_depth || err <= abs_budget || err <= tol * std::abs(sum) || err <= noise) {
    return sum;
  }
  return adapt_rec(f, a, m, left, tol, 0.5 * abs_budget, depth + 1, max_depth) +
         adapt_rec(f, m, b, right, tol, 0.5 * abs_budget, depth + 1, max_depth);
}

}  // namespace

double integrate_adaptive_1d(const std::function<double(double)>& f, double a, double b,
                             double tol, int max_depth) {
  if (!(b > a)) return 0.0;
  double whole = gauss10_on(f, a, b);
  double scale = gauss10_on([&f](double x) { return std::abs(f(x)); }, a, b);
  double budget = tol * std::max({scale, std::abs(whole), 1e-300});
  return adapt_rec(f, a, b, whole, tol, budget, 0, max_depth);
}

NormResult continuous_norm(const std::function<double(std::span<const double>)>& g, double p,
                           const Box& box,
                           const std::function<double(std::span<const double>)>& density,
                           int order, double rel_tol) {
  if (p <= 0.0) throw std::invalid_argument("continuous_norm: p must be positive");
  auto integrand = [&](std::span<const double> x) {
    return std::pow(std::abs(g(x)), p) * density(x);
  };
  NormResult out;
  out.certificate = integrate_auto(integrand, box, order, rel_tol);
  out.value = std::pow(std::max(0.0, out.certificate.value), 1.0 / p);
  return out;
}

NormResult continuous_norm(const std::function<double(std::span<const double>)>& g, double p,
                           const Box& box, int order, double rel_tol) {
  const double inv_vol = 1.0 / box.volume();
  return continuous_norm(
      g, p, box, [inv_vol](std::span<const double>) { return inv_vol; }, order, rel_tol);
}

}  // namespace rmlab
