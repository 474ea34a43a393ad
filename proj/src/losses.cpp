#include "rmlab/losses.hpp"

#include <cmath>

namespace rmlab {

namespace {

std::span<const double> row_span(const Eigen::MatrixXd& m, Eigen::Index i,
                                 std::array<double, 3>& buf, int d) {
  for (int k = 0; k < d; ++k) buf[k] = m(i, k);
  return std::span<const double>(buf.data(), std::size_t(d));
}

// normalized Legendre polynomial of degree n, shifted to [a, b]
double legendre_scaled(int n, double a, double b, double x) {
  double t = (2.0 * x - a - b) / (b - a);
  double pm1 = 0.0;
  double pc = 1.0;
  for (int k = 0; k < n; ++k) {
    double pn = ((2.0 * k + 1.0) * t * pc - double(k) * pm1) / double(k + 1);
    pm1 = pc;
    pc = pn;
  }
  return pc * std::sqrt((2.0 * n + 1.0) / (b - a));
}

double cell_mass(const ProblemSpec& prob, const Box& cell) {
  if (!prob.rho) return cell.volume() / prob.domain.volume();
  Quadrature q = composite_gauss(cell, 12, 2);
  std::vector<double> terms(std::size_t(q.pts.rows()));
  std::array<double, 3> buf{};
  for (Eigen::Index i = 0; i < q.pts.rows(); ++i) {
    auto x = row_span(q.pts, i, buf, cell.d);
    terms[std::size_t(i)] = q.w(i) * interior_density(prob, x);
  }
  return pairwise_sum(terms);
}

// integral of fn * |b.n|-weight * boundary density over the boundary part
IntegralCertificate boundary_functional(const ProblemSpec& prob, const BoundaryGeom& geom,
                                        const ScalarField& fn, int order, double rel_tol) {
  IntegralCertificate cert;
  if (!geom.is_collar && prob.d == 1) {
    Quadrature q = boundary_quadrature(prob, order, 1);
    std::vector<double> terms(std::size_t(q.pts.rows()));
    std::array<double, 3> buf{};
    for (Eigen::Index i = 0; i < q.pts.rows(); ++i) {
      auto x = row_span(q.pts, i, buf, 1);
      terms[std::size_t(i)] = q.w(i) * geom.weight(x) * boundary_density(prob, x) * fn(x);
    }
    cert.value = pairwise_sum(terms);
    cert.converged = true;
    cert.panels_per_axis = 1;
    return cert;
  }
  double prev = 0.0;
  bool have_prev = false;
  int panels = 1;
  const int max_panels = 256;
  while (true) {
    Quadrature q = boundary_quadrature(prob, order, panels);
    std::vector<double> terms(std::size_t(q.pts.rows()));
    std::array<double, 3> buf{};
    for (Eigen::Index i = 0; i < q.pts.rows(); ++i) {
      auto x = row_span(q.pts, i, buf, prob.d);
      terms[std::size_t(i)] = q.w(i) * geom.weight(x) * boundary_density(prob, x) * fn(x);
    }
    double cur = pairwise_sum(terms);
    cert.value = cur;
    cert.panels_per_axis = panels;
    if (have_prev) {
      double scale = std::max({std::abs(cur), std::abs(prev), 1e-14});
      cert.rel_change = std::abs(cur - prev) / scale;
      if (cert.rel_change <= rel_tol) {
        cert.converged = true;
        break;
      }
    }
    if (panels >= max_panels) {
      cert.converged = false;
      break;
    }
    prev = cur;
    have_prev = true;
    panels *= 2;
  }
  return cert;
}

ScalarField residual_field(const ProblemSpec& prob, const Field<double>& u) {
  return [&prob, &u](std::span<const double> x) {
    return prob.f(x) - apply_interior_operator(prob, u, x);
  };
}

ScalarField boundary_residual_field(const ProblemSpec& prob, const Field<double>& u) {
  return [&prob, &u](std::span<const double> x) {
    return apply_boundary_operator(prob, u, x) - prob.g(x);
  };
}

int max_degree(const Partition& part, int cell) {
  if (part.basis[std::size_t(cell)] == BasisKind::kPwconst) return 0;
  return part.order[std::size_t(cell)] - 1;
}

// checks that the second-order coefficient is position independent (the only
// case the endpoint-flux identity below is implemented for)
double constant_diffusion_1d(const ProblemSpec& prob) {
  const auto& co = *prob.elliptic;
  const Box& dom = prob.domain;
  double a0 = 0.0;
  bool first = true;
  for (double s : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    double xv = dom.lo[0] + s * dom.side(0);
    std::span<const double> x(&xv, 1);
    double av = co.a(x)(0, 0);
    if (first) {
      a0 = av;
      first = false;
    } else if (std::abs(av - a0) > 1e-12 * (1.0 + std::abs(a0))) {
      throw std::invalid_argument("integrate_by_parts needs a constant diffusion coefficient");
    }
  }
  return a0;
}

}  // namespace

LossForm loss_form_from_string(const std::string& s) {
  if (s == "continuous_rm") return LossForm::kContinuous;
  if (s == "discrete_rm") return LossForm::kDiscrete;
  if (s == "hp_vrm") return LossForm::kHpVrm;
  if (s == "regularized_rm") return LossForm::kRegularized;
  if (s == "pwconst_weak") return LossForm::kPwconstWeak;
  throw std::invalid_argument("unknown loss form: " + s);
}

std::string to_string(LossForm f) {
  switch (f) {
    case LossForm::kContinuous: return "continuous_rm";
    case LossForm::kDiscrete: return "discrete_rm";
    case LossForm::kHpVrm: return "hp_vrm";
    case LossForm::kRegularized: return "regularized_rm";
    case LossForm::kPwconstWeak: return "pwconst_weak";
  }
  return "?";
}

BasisKind basis_kind_from_string(const std::string& s) {
  if (s == "legendre") return BasisKind::kLegendre;
  if (s == "pwconst") return BasisKind::kPwconst;
  throw std::invalid_argument("unknown basis kind: " + s);
}

std::string to_string(BasisKind k) {
  switch (k) {
    case BasisKind::kLegendre: return "legendre";
    case BasisKind::kPwconst: return "pwconst";
  }
  return "?";
}

Partition uniform_partition(const Box& domain, int cells_per_axis, BasisKind kind, int order) {
  if (cells_per_axis < 1) throw std::invalid_argument("uniform_partition: cells_per_axis < 1");
  if (kind == BasisKind::kPwconst) order = 1;  // indicator only, degree is moot
  if (order < 1) throw std::invalid_argument("uniform_partition: order < 1");
  Partition part;
  long total = 1;
  for (int k = 0; k < domain.d; ++k) total *= cells_per_axis;
  std::array<int, 3> idx{0, 0, 0};
  for (long i = 0; i < total; ++i) {
    long rem = i;
    for (int k = domain.d - 1; k >= 0; --k) {
      idx[std::size_t(k)] = int(rem % cells_per_axis);
      rem /= cells_per_axis;
    }
    Box cell;
    cell.d = domain.d;
    for (int k = 0; k < domain.d; ++k) {
      double h = domain.side(k) / double(cells_per_axis);
      cell.lo[std::size_t(k)] = domain.lo[std::size_t(k)] + h * double(idx[std::size_t(k)]);
      cell.hi[std::size_t(k)] = domain.lo[std::size_t(k)] + h * double(idx[std::size_t(k)] + 1);
    }
    part.cells.push_back(cell);
    part.basis.push_back(kind);
    part.order.push_back(kind == BasisKind::kPwconst ? 1 : order);
  }
  return part;
}

void validate_partition(const Box& domain, const Partition& part) {
  const std::size_t n = part.cells.size();
  if (n == 0) throw std::invalid_argument("partition has no cells");
  if (part.basis.size() != n || part.order.size() != n) {
    throw std::invalid_argument("partition fields have mismatched lengths");
  }
  double vol = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const Box& c = part.cells[k];
    if (c.d != domain.d) throw std::invalid_argument("partition cell dimension mismatch");
    if (part.order[k] < 1) throw std::invalid_argument("partition cell order < 1");
    for (int a = 0; a < domain.d; ++a) {
      if (c.lo[std::size_t(a)] < domain.lo[std::size_t(a)] - 1e-12 ||
          c.hi[std::size_t(a)] > domain.hi[std::size_t(a)] + 1e-12 ||
          c.hi[std::size_t(a)] <= c.lo[std::size_t(a)]) {
        throw std::invalid_argument("partition cell outside the domain or empty");
      }
    }
    vol += c.volume();
  }
  if (std::abs(vol - domain.volume()) > 1e-12 * domain.volume()) {
    throw std::invalid_argument("partition volumes do not tile the domain");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double overlap = 1.0;
      for (int a = 0; a < domain.d; ++a) {
        double lo = std::max(part.cells[i].lo[std::size_t(a)], part.cells[j].lo[std::size_t(a)]);
        double hi = std::min(part.cells[i].hi[std::size_t(a)], part.cells[j].hi[std::size_t(a)]);
        overlap *= std::max(0.0, hi - lo);
      }
      if (overlap > 1e-12 * domain.volume()) {
        throw std::invalid_argument("partition cells overlap");
      }
    }
  }
}

double BasisTable::eval(std::size_t idx, std::span<const double> x) const {
  const BasisEntry& e = entries[idx];
  const Box& cell = part.cells[std::size_t(e.cell)];
  if (!cell.contains(x)) return 0.0;
  double v = cell_scale[std::size_t(e.cell)];
  for (int a = 0; a < d; ++a) {
    v *= legendre_scaled(e.deg[std::size_t(a)], cell.lo[std::size_t(a)], cell.hi[std::size_t(a)],
                         x[std::size_t(a)]);
  }
  return v;
}

BasisTable build_basis(const ProblemSpec& prob, const Partition& part) {
  validate_partition(prob.domain, part);
  BasisTable t;
  t.d = prob.d;
  t.part = part;
  const double vol = prob.domain.volume();
  for (std::size_t k = 0; k < part.cells.size(); ++k) {
    t.first_entry.push_back(int(t.entries.size()));
    if (part.basis[k] == BasisKind::kPwconst) {
      double mass = cell_mass(prob, part.cells[k]);
      if (mass <= 0.0) throw std::invalid_argument("cell carries no density mass");
      t.cell_scale.push_back(std::sqrt(part.cells[k].volume() / mass));
      t.entries.push_back(BasisEntry{int(k), {0, 0, 0}});
    } else {
      if (prob.rho) {
        throw std::invalid_argument("legendre cells require the uniform interior density");
      }
      t.cell_scale.push_back(std::sqrt(vol));
      const int n = part.order[k];
      std::array<int, 3> deg{0, 0, 0};
      long count = 1;
      for (int a = 0; a < prob.d; ++a) count *= n;
      for (long i = 0; i < count; ++i) {
        long rem = i;
        for (int a = prob.d - 1; a >= 0; --a) {
          deg[std::size_t(a)] = int(rem % n);
          rem /= n;
        }
        t.entries.push_back(BasisEntry{int(k), deg});
      }
    }
    t.entry_count.push_back(int(t.entries.size()) - t.first_entry.back());
  }

  Eigen::MatrixXd gram = basis_gram(prob, t, 0);
  double dev = (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols()))
                   .cwiseAbs()
                   .maxCoeff();
  if (dev > 1e-8) {
    throw std::runtime_error("basis failed the orthonormality check, deviation " +
                             std::to_string(dev));
  }
  return t;
}

Eigen::MatrixXd basis_gram(const ProblemSpec& prob, const BasisTable& basis, int order) {
  const Eigen::Index n = Eigen::Index(basis.size());
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < basis.part.cells.size(); ++k) {
    const int fe = basis.first_entry[k];
    const int ec = basis.entry_count[k];
    int q_order = order > 0 ? order : max_degree(basis.part, int(k)) + 4;
    Quadrature q = composite_gauss(basis.part.cells[k], q_order, prob.rho ? 2 : 1);
    Eigen::MatrixXd vals(q.pts.rows(), ec);
    Eigen::VectorXd wr(q.pts.rows());
    std::array<double, 3> buf{};
    for (Eigen::Index i = 0; i < q.pts.rows(); ++i) {
      auto x = row_span(q.pts, i, buf, prob.d);
      wr(i) = q.w(i) * interior_density(prob, x);
      for (int j = 0; j < ec; ++j) vals(i, j) = basis.eval(std::size_t(fe + j), x);
    }
    gram.block(fe, fe, ec, ec) = vals.transpose() * wr.asDiagonal() * vals;
  }
  return gram;
}

Eigen::VectorXd project(const ProblemSpec& prob, const BasisTable& basis, const ScalarField& r,
                        int order) {
  Eigen::VectorXd c(Eigen::Index(basis.size()));
  for (std::size_t k = 0; k < basis.part.cells.size(); ++k) {
    const int fe = basis.first_entry[k];
    const int ec = basis.entry_count[k];
    int q_order = std::max(order, max_degree(basis.part, int(k)) + 1) + 4;
    Quadrature q = composite_gauss(basis.part.cells[k], q_order, 1);
    std::array<double, 3> buf{};
    std::vector<double> wr(std::size_t(q.pts.rows()));
    for (Eigen::Index i = 0; i < q.pts.rows(); ++i) {
      auto x = row_span(q.pts, i, buf, prob.d);
      wr[std::size_t(i)] = q.w(i) * interior_density(prob, x) * r(x);
    }
    std::vector<double> terms(wr.size());
    for (int j = 0; j < ec; ++j) {
      for (Eigen::Index i = 0; i < q.pts.rows(); ++i) {
        auto x = row_span(q.pts, i, buf, prob.d);
        terms[std::size_t(i)] = wr[std::size_t(i)] * basis.eval(std::size_t(fe + j), x);
      }
      c(fe + j) = pairwise_sum(terms);
    }
  }
  return c;
}

ScalarField basis_expand(const BasisTable& basis, Eigen::VectorXd c) {
  if (c.size() != Eigen::Index(basis.size())) {
    throw std::invalid_argument("basis_expand: coefficient count mismatch");
  }
  return [basis, c](std::span<const double> x) {
    for (std::size_t k = 0; k < basis.part.cells.size(); ++k) {
      if (!basis.part.cells[k].contains(x)) continue;
      double acc = 0.0;
      for (int j = 0; j < basis.entry_count[k]; ++j) {
        std::size_t idx = std::size_t(basis.first_entry[k] + j);
        acc += c(Eigen::Index(idx)) * basis.eval(idx, x);
      }
      return acc;
    }
    return 0.0;
  };
}

std::vector<std::string> loss_spec_warnings(const LossSpec& spec) {
  std::vector<std::string> out;
  if (spec.tau < 1.0) {
    out.push_back("tau below one: bound evaluation assumes tau >= 1");
  }
  if (spec.form == LossForm::kRegularized) {
    if (spec.epsilon <= 0.0) {
      out.push_back("epsilon not positive: regularized form degenerates to the plain power");
    } else if (!regularization_smallness_ok(spec.p, spec.epsilon)) {
      out.push_back("epsilon too large for the two-sided functional comparison");
    }
  }
  return out;
}

int regularization_m(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw std::invalid_argument("exponent p must be >= 1");
  return int(std::ceil(p / 2.0));
}

bool regularization_smallness_ok(double p, double epsilon) {
  int m = regularization_m(p);
  return 2.0 * (2.0 * m - p) * epsilon * (p - 1.0) / p <= 1.0;
}

std::pair<double, double> phi_regularizer(double x, double p, int m, double epsilon) {
  if (x < 0.0) throw std::domain_error("phi_regularizer: negative argument");
  if (epsilon < 0.0) throw std::domain_error("phi_regularizer: negative epsilon");
  if (m < 1 || p > 2.0 * m || p < 1.0) {
    throw std::invalid_argument("phi_regularizer: need 1 <= p <= 2m");
  }
  if (x == 0.0) {
    return {0.0, p == 1.0 && epsilon == 0.0 ? 1.0 : 0.0};
  }
  double value = std::pow(x, 2.0 * m) * std::pow(x + epsilon, p - 2.0 * m);
  double deriv =
      std::pow(x, 2.0 * m - 1.0) * std::pow(x + epsilon, p - 2.0 * m - 1.0) * (p * x + 2.0 * m * epsilon);
  return {value, deriv};
}

LossBreakdown loss_continuous(const ProblemSpec& prob, const Field<double>& u, double p,
                              double tau, int order, double rel_tol) {
  ScalarField r = residual_field(prob, u);
  ScalarField rb = boundary_residual_field(prob, u);
  auto interior_fn = [&](std::span<const double> x) {
    return std::pow(std::abs(r(x)), p) * interior_density(prob, x);
  };
  IntegralCertificate ic = integrate_auto(interior_fn, prob.domain, order, rel_tol);
  BoundaryGeom geom = boundary_geom(prob);
  auto boundary_fn = [&](std::span<const double> x) { return std::pow(std::abs(rb(x)), p); };
  IntegralCertificate bc = boundary_functional(prob, geom, boundary_fn, order, rel_tol);

  LossBreakdown out;
  out.interior = std::max(0.0, ic.value);
  out.boundary = std::max(0.0, bc.value);
  out.total = out.interior + tau * out.boundary;
  out.quadrature_converged = ic.converged && bc.converged;
  out.quadrature_rel_change = std::max(ic.rel_change, bc.rel_change);
  return out;
}

LossBreakdown loss_discrete(const ProblemSpec& prob, const Field<double>& u, double p, double tau,
                            const SampleSet& interior, const SampleSet& boundary) {
  if (interior.d != prob.d || boundary.d != prob.d) {
    throw std::invalid_argument("loss_discrete: sample dimension mismatch");
  }
  std::array<double, 3> buf{};
  for (Eigen::Index i = 0; i < interior.pts.rows(); ++i) {
    auto x = row_span(interior.pts, i, buf, prob.d);
    if (!prob.domain.contains(x, 1e-9)) {
      throw std::invalid_argument("loss_discrete: interior sample outside the domain");
    }
  }
  ScalarField r = residual_field(prob, u);
  ScalarField rb = boundary_residual_field(prob, u);
  BoundaryGeom geom = boundary_geom(prob);

  std::vector<double> terms(std::size_t(interior.pts.rows()));
  for (Eigen::Index i = 0; i < interior.pts.rows(); ++i) {
    auto x = row_span(interior.pts, i, buf, prob.d);
    terms[std::size_t(i)] = interior.w(i) * std::pow(std::abs(r(x)), p);
  }
  LossBreakdown out;
  out.interior = pairwise_sum(terms);

  terms.assign(std::size_t(boundary.pts.rows()), 0.0);
  for (Eigen::Index i = 0; i < boundary.pts.rows(); ++i) {
    auto x = row_span(boundary.pts, i, buf, prob.d);
    terms[std::size_t(i)] =
        boundary.w(i) * geom.weight(x) * boundary_density(prob, x) * std::pow(std::abs(rb(x)), p);
  }
  out.boundary = pairwise_sum(terms);
  out.total = out.interior + tau * out.boundary;
  return out;
}

LossBreakdown loss_hp_vrm(const ProblemSpec& prob, const Field<double>& u, double tau,
                          const BasisTable& basis, int order, double rel_tol) {
  ScalarField r = residual_field(prob, u);
  Eigen::VectorXd c = project(prob, basis, r, order);
  ScalarField rb = boundary_residual_field(prob, u);
  BoundaryGeom geom = boundary_geom(prob);
  auto boundary_fn = [&](std::span<const double> x) {
    double v = rb(x);
    return v * v;
  };
  IntegralCertificate bc = boundary_functional(prob, geom, boundary_fn, order, rel_tol);

  LossBreakdown out;
  out.interior = c.squaredNorm();
  out.boundary = std::max(0.0, bc.value);
  out.total = out.interior + tau * out.boundary;
  out.quadrature_converged = bc.converged;
  out.quadrature_rel_change = bc.rel_change;
  return out;
}

LossBreakdown loss_pwconst_weak(const ProblemSpec& prob, const Field<double>& u, double tau,
                                const Partition& part, int order, double rel_tol,
                                bool integrate_by_parts) {
  validate_partition(prob.domain, part);
  for (BasisKind k : part.basis) {
    if (k != BasisKind::kPwconst) {
      throw std::invalid_argument("loss_pwconst_weak needs piecewise-constant cells");
    }
  }
  double a0 = 0.0;
  if (integrate_by_parts) {
    if (prob.d != 1 || prob.op_kind != OperatorKind::kElliptic) {
      throw std::invalid_argument(
          "integrate_by_parts is implemented for 1D second-order elliptic operators only");
    }
    if (prob.rho) {
      throw std::invalid_argument("integrate_by_parts needs the uniform interior density");
    }
    a0 = constant_diffusion_1d(prob);
  }

  LossBreakdown out;
  ScalarField r = residual_field(prob, u);
  std::vector<double> cell_terms(part.cells.size());
  std::array<double, 3> buf{};
  for (std::size_t k = 0; k < part.cells.size(); ++k) {
    const Box& cell = part.cells[k];
    Quadrature q = composite_gauss(cell, order + 4, 1);
    std::vector<double> terms(std::size_t(q.pts.rows()));
    if (!integrate_by_parts) {
      for (Eigen::Index i = 0; i < q.pts.rows(); ++i) {
        auto x = row_span(q.pts, i, buf, prob.d);
        terms[std::size_t(i)] = q.w(i) * interior_density(prob, x) * r(x);
      }
    } else {
      const auto& co = *prob.elliptic;
      for (Eigen::Index i = 0; i < q.pts.rows(); ++i) {
        auto x = row_span(q.pts, i, buf, 1);
        Jet2d j = u.jet(x);
        double first_order = prob.f(x) - co.b(x)(0) * j.d1(0) - co.c(x) * j.v;
        terms[std::size_t(i)] = q.w(i) * interior_density(prob, x) * first_order;
      }
    }
    double integral = pairwise_sum(terms);
    if (integrate_by_parts) {
      double lo = cell.lo[0], hi = cell.hi[0];
      Jet2d jl = u.jet(std::span<const double>(&lo, 1));
      Jet2d jh = u.jet(std::span<const double>(&hi, 1));
      integral += a0 * (jh.d1(0) - jl.d1(0)) / prob.domain.volume();
    }
    cell_terms[k] = integral * integral / cell_mass(prob, cell);
  }
  out.interior = pairwise_sum(cell_terms);

  ScalarField rb = boundary_residual_field(prob, u);
  BoundaryGeom geom = boundary_geom(prob);
  auto boundary_fn = [&](std::span<const double> x) {
    double v = rb(x);
    return v * v;
  };
  IntegralCertificate bc = boundary_functional(prob, geom, boundary_fn, order, rel_tol);
  out.boundary = std::max(0.0, bc.value);
  out.total = out.interior + tau * out.boundary;
  out.quadrature_converged = bc.converged;
  out.quadrature_rel_change = bc.rel_change;
  return out;
}

LossBreakdown loss_regularized(const ProblemSpec& prob, const Field<double>& u, double p,
                               double epsilon, double tau, int order, double rel_tol) {
  if (epsilon == 0.0) return loss_continuous(prob, u, p, tau, order, rel_tol);
  const int m = regularization_m(p);
  ScalarField r = residual_field(prob, u);
  ScalarField rb = boundary_residual_field(prob, u);
  auto interior_fn = [&](std::span<const double> x) {
    return phi_regularizer(std::abs(r(x)), p, m, epsilon).first * interior_density(prob, x);
  };
  IntegralCertificate ic = integrate_auto(interior_fn, prob.domain, order, rel_tol);
  BoundaryGeom geom = boundary_geom(prob);
  auto boundary_fn = [&](std::span<const double> x) {
    return phi_regularizer(std::abs(rb(x)), p, m, epsilon).first;
  };
  IntegralCertificate bc = boundary_functional(prob, geom, boundary_fn, order, rel_tol);

  LossBreakdown out;
  out.interior = std::max(0.0, ic.value);
  out.boundary = std::max(0.0, bc.value);
  out.total = out.interior + tau * out.boundary;
  out.quadrature_converged = ic.converged && bc.converged;
  out.quadrature_rel_change = std::max(ic.rel_change, bc.rel_change);
  return out;
}

namespace {

using ad::abs_smooth;  // both the taped and the plain overload

// the residual magnitude raised to the p-th power, shaped identically for the
// plain and the taped scalar so forward values replay bit-for-bit
template <class S>
S power_term(S r, double p) {
  using std::pow;
  if (p == 2.0) return r * r;
  S a = abs_smooth(r);
  if (p == 1.0) return a;
  return pow(a, p);
}

template <class S>
S phi_term(S r, double p, int m, double epsilon) {
  using std::pow;
  S a = abs_smooth(r);
  S v = pow(a, 2.0 * m);
  if (p == 2.0 * m) return v;
  return v * pow(a + epsilon, p - 2.0 * m);
}

}  // namespace

LossEvaluator::LossEvaluator(const ProblemSpec& prob, const LossSpec& spec)
    : prob_(prob), spec_(spec) {
  reg_m_ = regularization_m(spec.p);
  BoundaryGeom geom = boundary_geom(prob_);
  std::array<double, 3> buf{};

  if (spec.form == LossForm::kDiscrete) {
    Rng rng(spec.sample_seed);
    SampleSet si = sample_problem_interior(prob_, spec.m_interior, spec.sample_kind, rng.fork(1));
    SampleSet sb =
        sample_problem_boundary(prob_, spec.m_boundary, spec.boundary_sample, rng.fork(2));
    xi_ = si.pts;
    wi_ = si.w;
    xb_ = sb.pts;
    wb_ = sb.w;
    for (Eigen::Index i = 0; i < xb_.rows(); ++i) {
      auto x = row_span(xb_, i, buf, prob_.d);
      wb_(i) *= geom.weight(x) * boundary_density(prob_, x);
    }
    return;
  }

  if (spec.form == LossForm::kHpVrm || spec.form == LossForm::kPwconstWeak) {
    BasisKind kind = spec.form == LossForm::kPwconstWeak ? BasisKind::kPwconst : spec.basis;
    Partition part = uniform_partition(prob_.domain, spec.cells_per_axis, kind, spec.basis_order);
    basis_ = build_basis(prob_, part);
    if (spec.integrate_by_parts) {
      if (spec.form != LossForm::kPwconstWeak) {
        throw std::invalid_argument("integrate_by_parts applies to the pwconst_weak form only");
      }
      if (prob_.d != 1 || prob_.op_kind != OperatorKind::kElliptic || prob_.rho) {
        throw std::invalid_argument(
            "integrate_by_parts is implemented for 1D second-order elliptic operators with the "
            "uniform density only");
      }
      constant_diffusion_1d(prob_);
    }
    std::vector<Quadrature> cell_q;
    Eigen::Index total = 0;
    for (std::size_t k = 0; k < part.cells.size(); ++k) {
      int q_order = std::max(spec.quad_order, max_degree(part, int(k)) + 1) + 4;
      cell_q.push_back(composite_gauss(part.cells[k], q_order, 1));
      total += cell_q.back().pts.rows();
    }
    xi_.resize(total, prob_.d);
    wi_.resize(total);
    Eigen::Index at = 0;
    for (std::size_t k = 0; k < part.cells.size(); ++k) {
      const Quadrature& q = cell_q[k];
      xi_.middleRows(at, q.pts.rows()) = q.pts;
      for (Eigen::Index i = 0; i < q.pts.rows(); ++i) {
        auto x = row_span(q.pts, i, buf, prob_.d);
        wi_(at + i) = q.w(i) * interior_density(prob_, x);
        node_cell_.push_back(int(k));
      }
      at += q.pts.rows();
    }
  } else {
    Quadrature q = composite_gauss(prob_.domain, spec.quad_order, spec.quad_panels);
    xi_ = q.pts;
    wi_.resize(q.w.size());
    for (Eigen::Index i = 0; i < q.pts.rows(); ++i) {
      auto x = row_span(q.pts, i, buf, prob_.d);
      wi_(i) = q.w(i) * interior_density(prob_, x);
    }
  }

  Quadrature qb = boundary_quadrature(prob_, spec.quad_order, spec.quad_panels);
  xb_ = qb.pts;
  wb_.resize(qb.w.size());
  for (Eigen::Index i = 0; i < xb_.rows(); ++i) {
    auto x = row_span(xb_, i, buf, prob_.d);
    wb_(i) = qb.w(i) * geom.weight(x) * boundary_density(prob_, x);
  }
}

template <class S>
S LossEvaluator::accumulate(const Field<S>& u, double* interior_out, double* boundary_out) const {
  std::array<double, 3> buf{};
  const double p = spec_.p;
  S interior{};

  switch (spec_.form) {
    case LossForm::kContinuous:
    case LossForm::kDiscrete:
    case LossForm::kRegularized: {
      std::vector<S> terms;
      terms.reserve(std::size_t(xi_.rows()));
      for (Eigen::Index i = 0; i < xi_.rows(); ++i) {
        auto x = row_span(xi_, i, buf, prob_.d);
        S r = lift<S>(prob_.f(x)) - apply_interior_operator(prob_, u, x);
        S term = spec_.form == LossForm::kRegularized
                     ? phi_term(r, p, reg_m_, spec_.epsilon)
                     : power_term(r, p);
        terms.push_back(term * wi_(i));
      }
      interior = sum_pairwise_generic(terms);
      break;
    }
    case LossForm::kHpVrm: {
      std::vector<S> node_r(std::size_t(xi_.rows()));
      for (Eigen::Index i = 0; i < xi_.rows(); ++i) {
        auto x = row_span(xi_, i, buf, prob_.d);
        node_r[std::size_t(i)] = lift<S>(prob_.f(x)) - apply_interior_operator(prob_, u, x);
      }
      std::vector<S> sq;
      sq.reserve(basis_.size());
      for (std::size_t e = 0; e < basis_.size(); ++e) {
        const int cell = basis_.entries[e].cell;
        std::vector<S> terms;
        for (Eigen::Index i = 0; i < xi_.rows(); ++i) {
          if (node_cell_[std::size_t(i)] != cell) continue;
          auto x = row_span(xi_, i, buf, prob_.d);
          terms.push_back(node_r[std::size_t(i)] * (wi_(i) * basis_.eval(e, x)));
        }
        S c = sum_pairwise_generic(terms);
        sq.push_back(c * c);
      }
      interior = sum_pairwise_generic(sq);
      break;
    }
    case LossForm::kPwconstWeak: {
      std::vector<S> sq;
      sq.reserve(basis_.part.cells.size());
      Eigen::Index i = 0;
      for (std::size_t k = 0; k < basis_.part.cells.size(); ++k) {
        std::vector<S> terms;
        for (; i < xi_.rows() && node_cell_[std::size_t(i)] == int(k); ++i) {
          auto x = row_span(xi_, i, buf, prob_.d);
          if (!spec_.integrate_by_parts) {
            terms.push_back((lift<S>(prob_.f(x)) - apply_interior_operator(prob_, u, x)) *
                            wi_(i));
          } else {
            const auto& co = *prob_.elliptic;
            Jet2<S> j = u.jet(x);
            S fo = lift<S>(prob_.f(x)) - j.d1(0) * co.b(x)(0) - j.v * co.c(x);
            terms.push_back(fo * wi_(i));
          }
        }
        S integral = sum_pairwise_generic(terms);
        if (spec_.integrate_by_parts) {
          const Box& cell = basis_.part.cells[k];
          double lo = cell.lo[0], hi = cell.hi[0];
          Jet2<S> jl = u.jet(std::span<const double>(&lo, 1));
          Jet2<S> jh = u.jet(std::span<const double>(&hi, 1));
          double a0 = prob_.elliptic->a(std::span<const double>(&lo, 1))(0, 0);
          integral = integral + (jh.d1(0) - jl.d1(0)) * (a0 / prob_.domain.volume());
        }
        double mass = cell_mass(prob_, basis_.part.cells[k]);
        sq.push_back(integral * integral * (1.0 / mass));
      }
      interior = sum_pairwise_generic(sq);
      break;
    }
  }

  std::vector<S> bterms;
  bterms.reserve(std::size_t(xb_.rows()));
  for (Eigen::Index i = 0; i < xb_.rows(); ++i) {
    auto x = row_span(xb_, i, buf, prob_.d);
    S rb = u.value(x) - lift<S>(prob_.g(x));
    double pb = spec_.form == LossForm::kHpVrm || spec_.form == LossForm::kPwconstWeak ? 2.0 : p;
    S term = spec_.form == LossForm::kRegularized ? phi_term(rb, p, reg_m_, spec_.epsilon)
                                                  : power_term(rb, pb);
    bterms.push_back(term * wb_(i));
  }
  S boundary = sum_pairwise_generic(bterms);

  if (interior_out) *interior_out = ad::value(interior);
  if (boundary_out) *boundary_out = ad::value(boundary);
  return interior + boundary * spec_.tau;
}

LossBreakdown LossEvaluator::eval(const ParamModel& model) const {
  Field<double> u = field_of(model);
  LossBreakdown out;
  out.total = accumulate<double>(u, &out.interior, &out.boundary);
  return out;
}

ad::Var LossEvaluator::eval_taped(const ParamModel& model, std::span<const ad::Var> theta,
                                  double* interior_out, double* boundary_out) const {
  Field<ad::Var> u = field_of_taped(model, std::vector<ad::Var>(theta.begin(), theta.end()));
  return accumulate<ad::Var>(u, interior_out, boundary_out);
}

}  // namespace rmlab
