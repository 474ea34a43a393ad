#include "rmlab/problems.hpp"

#include <cmath>

namespace rmlab {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;

std::span<const double> row_span(const Eigen::MatrixXd& m, Eigen::Index i,
                                 std::array<double, 3>& buf, int d) {
  for (int k = 0; k < d; ++k) buf[k] = m(i, k);
  return std::span<const double>(buf.data(), std::size_t(d));
}

}  // namespace

std::string to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::kElliptic: return "elliptic";
    case OperatorKind::kAdvectionReaction: return "advection_reaction";
    case OperatorKind::kFractionalAdr: return "fractional_adr";
  }
  return "?";
}

std::string to_string(BoundaryKind k) {
  switch (k) {
    case BoundaryKind::kDirichletTrace: return "dirichlet_trace";
    case BoundaryKind::kInflowTrace: return "inflow_trace";
    case BoundaryKind::kExteriorIdentity: return "exterior_identity";
  }
  return "?";
}

std::string to_string(VNorm k) {
  switch (k) {
    case VNorm::kL2: return "l2";
    case VNorm::kH1: return "h1";
    case VNorm::kHhalfSurrogate: return "hhalf_surrogate";
    case VNorm::kGraphLp: return "graph_lp";
    case VNorm::kHalphaSurrogate: return "halpha_surrogate";
  }
  return "?";
}

Field<double> field_of(const ParamModel& model) {
  Field<double> f;
  f.jet = [&model](std::span<const double> x) { return eval_model(model, x); };
  f.value = [&model](std::span<const double> x) { return model_value(model, x); };
  return f;
}

Field<ad::Var> field_of_taped(const ParamModel& model, std::vector<ad::Var> theta) {
  Field<ad::Var> f;
  f.jet = [&model, theta](std::span<const double> x) {
    return eval_model_taped(model, std::span<const ad::Var>(theta.data(), theta.size()), x);
  };
  f.value = [&model, theta](std::span<const double> x) -> ad::Var {
    switch (model.kind) {
      case ModelKind::kMlp:
        return mlp_value<ad::Var>(model.arch,
                                  std::span<const ad::Var>(theta.data(), theta.size()), x);
      case ModelKind::kRbf:
        return rbf_value<ad::Var>(model.centers,
                                  std::span<const ad::Var>(theta.data(), theta.size()), x);
      case ModelKind::kAnalytic:
        throw std::invalid_argument("analytic models have no trainable parameters");
    }
    throw std::invalid_argument("unknown model kind");
  };
  return f;
}

Field<double> field_of_exact(const ProblemSpec& prob) {
  if (!prob.exact) throw std::invalid_argument("problem has no exact solution attached");
  Field<double> f;
  const auto fn = *prob.exact;
  f.jet = [fn](std::span<const double> x) { return fn(x); };
  f.value = [fn](std::span<const double> x) { return fn(x).v; };
  return f;
}

double interior_density(const ProblemSpec& prob, std::span<const double> x) {
  if (prob.rho) return prob.rho(x);
  return 1.0 / prob.domain.volume();
}

double boundary_density(const ProblemSpec& prob, std::span<const double> x) {
  if (prob.rho_b) return prob.rho_b(x);
  (void)x;
  return 1.0;  // uniform against the normalized surface measure
}

BoundaryGeom boundary_geom(const ProblemSpec& prob) {
  BoundaryGeom geom;
  geom.weight = [](std::span<const double>) { return 1.0; };

  switch (prob.bc_kind) {
    case BoundaryKind::kDirichletTrace: {
      geom.atlas = box_boundary(prob.domain);
      return geom;
    }
    case BoundaryKind::kInflowTrace: {
      if (!prob.advection) throw std::invalid_argument("inflow trace needs advection data");
      const auto b = prob.advection->b;
      BoundaryAtlas all = box_boundary(prob.domain);
      BoundaryAtlas inflow;
      inflow.d = all.d;
      for (const Face& face : all.faces) {
        // b . n on this face: n = +-e_axis
        const double sign = face.upper ? 1.0 : -1.0;
        bool any_in = false, any_out = false;
        const int probe = prob.d == 1 ? 1 : 5;
        std::array<double, 3> x{};
        std::array<int, 3> idx{0, 0, 0};
        int total = 1;
        for (int k = 0; k < prob.d; ++k) {
          if (k != face.axis) total *= probe;
        }
        for (int t = 0; t < total; ++t) {
          int rem = t;
          for (int k = 0; k < prob.d; ++k) {
            if (k == face.axis) continue;
            idx[k] = rem % probe;
            rem /= probe;
          }
          for (int k = 0; k < prob.d; ++k) {
            x[k] = k == face.axis
                       ? face.geom.lo[k]
                       : face.geom.lo[k] +
                             (face.geom.hi[k] - face.geom.lo[k]) * (idx[k] + 0.5) / probe;
          }
          double bn = sign * b(std::span<const double>(x.data(), std::size_t(prob.d)))(face.axis);
          if (bn < -1e-12) any_in = true;
          if (bn > 1e-12) any_out = true;
        }
        if (any_in && any_out) {
          throw std::invalid_argument(
              "inflow trace: velocity changes sign across a face; split the domain");
        }
        if (any_in) {
          inflow.faces.push_back(face);
          inflow.total_measure += face.measure;
        }
      }
      if (inflow.faces.empty()) {
        throw std::invalid_argument("inflow trace: no inflow part found on the boundary");
      }
      geom.atlas = inflow;
      const Box dom = prob.domain;
      const int d = prob.d;
      geom.weight = [b, dom, d](std::span<const double> x) {
        // identify the face by the coordinate pinned to a box side
        for (int k = 0; k < d; ++k) {
          if (std::abs(x[k] - dom.lo[k]) < 1e-12 || std::abs(x[k] - dom.hi[k]) < 1e-12) {
            return std::abs(b(x)(k));
          }
        }
        throw std::invalid_argument("inflow weight queried away from the boundary");
      };
      return geom;
    }
    case BoundaryKind::kExteriorIdentity: {
      if (!prob.fractional) throw std::invalid_argument("exterior identity needs fractional data");
      if (prob.d != 1) throw std::invalid_argument("exterior identity supports d = 1 only");
      const double w = prob.fractional->collar_width;
      geom.is_collar = true;
      Box left{1, {prob.domain.lo[0] - w, 0, 0}, {prob.domain.lo[0], 0, 0}};
      Box right{1, {prob.domain.hi[0], 0, 0}, {prob.domain.hi[0] + w, 0, 0}};
      geom.collar = {left, right};
      geom.collar_measure = 2.0 * w;
      return geom;
    }
  }
  throw std::invalid_argument("unknown boundary kind");
}

SampleSet sample_problem_interior(const ProblemSpec& prob, int m, SampleKind kind,
                                  const Rng& rng) {
  if (prob.rho) {
    throw std::invalid_argument(
        "sampling from a non-uniform interior density is not supported");
  }
  return sample_interior(prob.domain, m, kind, rng);
}

SampleSet sample_problem_boundary(const ProblemSpec& prob, int m, SampleKind kind,
                                  const Rng& rng) {
  BoundaryGeom geom = boundary_geom(prob);
  if (!geom.is_collar) return sample_boundary(geom.atlas, m, kind, rng);

  // exterior collar: two 1d bands, budget split evenly
  SampleSet out;
  out.d = 1;
  out.kind = kind;
  out.seed = rng.key();
  int m_left = m / 2, m_right = m - m_left;
  if (m == 1) m_right = 1;
  SampleSet l = sample_interior(geom.collar[0], std::max(1, m_left), kind, rng.fork(0));
  SampleSet r = sample_interior(geom.collar[1], std::max(1, m_right), kind, rng.fork(1));
  out.pts.resize(l.pts.rows() + r.pts.rows(), 1);
  out.w.resize(out.pts.rows());
  out.pts.topRows(l.pts.rows()) = l.pts;
  out.pts.bottomRows(r.pts.rows()) = r.pts;
  const double fl = geom.collar[0].volume() / geom.collar_measure;
  const double fr = geom.collar[1].volume() / geom.collar_measure;
  out.w.head(l.w.size()) = l.w * fl;
  out.w.tail(r.w.size()) = r.w * fr;
  return out;
}

Quadrature boundary_quadrature(const ProblemSpec& prob, int order, int panels) {
  BoundaryGeom geom = boundary_geom(prob);
  if (geom.is_collar) {
    Quadrature l = composite_gauss(geom.collar[0], order, panels);
    Quadrature r = composite_gauss(geom.collar[1], order, panels);
    Quadrature q;
    q.d = 1;
    q.pts.resize(l.pts.rows() + r.pts.rows(), 1);
    q.w.resize(q.pts.rows());
    q.pts.topRows(l.pts.rows()) = l.pts;
    q.pts.bottomRows(r.pts.rows()) = r.pts;
    q.w.head(l.w.size()) = l.w / geom.collar_measure;
    q.w.tail(r.w.size()) = r.w / geom.collar_measure;
    return q;
  }
  if (prob.d == 1) {
    Quadrature q;
    q.d = 1;
    q.pts.resize(Eigen::Index(geom.atlas.faces.size()), 1);
    q.w = Eigen::VectorXd::Constant(q.pts.rows(), 1.0 / double(geom.atlas.faces.size()));
    for (std::size_t i = 0; i < geom.atlas.faces.size(); ++i) {
      q.pts(Eigen::Index(i), 0) = geom.atlas.faces[i].geom.lo[geom.atlas.faces[i].axis];
    }
    return q;
  }
  // d >= 2: tensor rule per face, probability weights against the uniform
  // density on the selected boundary part
  std::vector<Quadrature> parts;
  Eigen::Index total = 0;
  for (const Face& face : geom.atlas.faces) {
    Box fb;
    fb.d = prob.d - 1;
    int j = 0;
    for (int k = 0; k < prob.d; ++k) {
      if (k == face.axis) continue;
      fb.lo[j] = face.geom.lo[k];
      fb.hi[j] = face.geom.hi[k];
      ++j;
    }
    Quadrature fq = composite_gauss(fb, order, panels);
    Quadrature full;
    full.d = prob.d;
    full.pts.resize(fq.pts.rows(), prob.d);
    full.w = fq.w / geom.atlas.total_measure;
    int jj = 0;
    for (int k = 0; k < prob.d; ++k) {
      if (k == face.axis) {
        full.pts.col(k).setConstant(face.geom.lo[k]);
      } else {
        full.pts.col(k) = fq.pts.col(jj++);
      }
    }
    parts.push_back(std::move(full));
    total += parts.back().pts.rows();
  }
  Quadrature q;
  q.d = prob.d;
  q.pts.resize(total, prob.d);
  q.w.resize(total);
  Eigen::Index at = 0;
  for (auto& part : parts) {
    q.pts.middleRows(at, part.pts.rows()) = part.pts;
    q.w.segment(at, part.w.size()) = part.w;
    at += part.pts.rows();
  }
  return q;
}

NormResult interior_norm(const ProblemSpec& prob, const ScalarField& fn, double p, int order,
                         double rel_tol) {
  auto weighted = [&](std::span<const double> x) {
    return std::pow(std::abs(fn(x)), p) * interior_density(prob, x);
  };
  NormResult out;
  out.certificate = integrate_auto(weighted, prob.domain, order, rel_tol);
  out.value = std::pow(std::max(0.0, out.certificate.value), 1.0 / p);
  return out;
}

NormResult boundary_norm(const ProblemSpec& prob, const ScalarField& fn, double p, int order,
                         double rel_tol) {
  BoundaryGeom geom = boundary_geom(prob);
  NormResult out;
  if (!geom.is_collar && prob.d == 1) {
    Quadrature q = boundary_quadrature(prob, order, 1);
    std::vector<double> terms(q.pts.rows());
    std::array<double, 3> buf{};
    for (Eigen::Index i = 0; i < q.pts.rows(); ++i) {
      auto x = row_span(q.pts, i, buf, 1);
      terms[std::size_t(i)] = q.w(i) * geom.weight(x) * boundary_density(prob, x) *
                              std::pow(std::abs(fn(x)), p);
    }
    out.certificate.value = pairwise_sum(terms);
    out.certificate.converged = true;
    out.certificate.panels_per_axis = 1;
    out.value = std::pow(std::max(0.0, out.certificate.value), 1.0 / p);
    return out;
  }
  // refine panels until stable
  double prev = 0.0;
  bool have_prev = false;
  int panels = 1;
  const int max_panels = 256;
  while (true) {
    Quadrature q = boundary_quadrature(prob, order, panels);
    std::vector<double> terms(q.pts.rows());
    std::array<double, 3> buf{};
    for (Eigen::Index i = 0; i < q.pts.rows(); ++i) {
      auto x = row_span(q.pts, i, buf, prob.d);
      terms[std::size_t(i)] = q.w(i) * geom.weight(x) * boundary_density(prob, x) *
                              std::pow(std::abs(fn(x)), p);
    }
    double cur = pairwise_sum(terms);
    out.certificate.value = cur;
    out.certificate.panels_per_axis = panels;
    if (have_prev) {
      double scale = std::max({std::abs(cur), std::abs(prev), 1e-14});
      out.certificate.rel_change = std::abs(cur - prev) / scale;
      if (out.certificate.rel_change <= rel_tol) {
        out.certificate.converged = true;
        break;
      }
    }
    if (panels >= max_panels) {
      out.certificate.converged = false;
      break;
    }
    prev = cur;
    have_prev = true;
    panels *= 2;
  }
  out.value = std::pow(std::max(0.0, out.certificate.value), 1.0 / p);
  return out;
}

namespace {

// Lebesgue L2-type norms of jets combined from value/gradient/hessian parts
double sobolev_norm(const ProblemSpec& prob, const Field<double>& w, bool with_grad,
                    bool with_hess) {
  auto integrand = [&](std::span<const double> x) {
    Jet2d j = w.jet(x);
    double acc = j.v * j.v;
    if (with_grad) {
      for (int i = 0; i < prob.d; ++i) acc += j.d1(i) * j.d1(i);
    }
    if (with_hess) {
      for (int i = 0; i < prob.d; ++i) {
        for (int k = 0; k < prob.d; ++k) acc += j.d2(i, k) * j.d2(i, k);
      }
    }
    return acc;
  };
  double v = integrate_auto(integrand, prob.domain, 12, 1e-10).value;
  return std::sqrt(std::max(0.0, v));
}

double graph_norm(const ProblemSpec& prob, const Field<double>& w) {
  if (!prob.advection) throw std::invalid_argument("graph norm needs advection data");
  const auto& co = *prob.advection;
  const double p = prob.p;
  auto lp = [&](const std::function<double(std::span<const double>)>& fn) {
    auto integrand = [&](std::span<const double> x) { return std::pow(std::abs(fn(x)), p); };
    double v = integrate_auto(integrand, prob.domain, 12, 1e-10).value;
    return std::pow(std::max(0.0, v), 1.0 / p);
  };
  double part_v = lp([&](std::span<const double> x) { return w.jet(x).v; });
  double part_s = lp([&](std::span<const double> x) {
    Jet2d j = w.jet(x);
    Eigen::Vector3d b = co.b(x);
    double acc = 0.0;
    for (int i = 0; i < prob.d; ++i) acc += b(i) * j.d1(i);
    return acc;
  });
  return std::sqrt(part_v * part_v + part_s * part_s);
}

double halpha_surrogate_norm(const ProblemSpec& prob, const Field<double>& w) {
  if (!prob.fractional) throw std::invalid_argument("fractional norm needs fractional data");
  const double alpha = prob.fractional->alpha;
  const double r = prob.fractional->support_radius;
  const double strip = 1e-4;
  auto val = [&](double t) {
    if (std::abs(t) > r) return 0.0;
    return w.value(std::span<const double>(&t, 1));
  };
  // L2 part over the support
  Box dom{1, {-r, 0, 0}, {r, 0, 0}};
  auto sq = [&](std::span<const double> x) {
    double v = val(x[0]);
    return v * v;
  };
  double l2sq = integrate_auto(sq, dom, 12, 1e-9).value;
  // truncated double integral of (w(x) - w(y))^2 / |x-y|^(1+alpha)
  const double pad = 0.5;
  const double lo = -r - pad, hi = r + pad;
  auto outer = [&](double x) {
    auto inner = [&](double y) {
      double dw = val(x) - val(y);
      return dw * dw / std::pow(std::abs(x - y), 1.0 + alpha);
    };
    double left = x - strip > lo ? integrate_adaptive_1d(inner, lo, x - strip, 1e-7, 30) : 0.0;
    double right = x + strip < hi ? integrate_adaptive_1d(inner, x + strip, hi, 1e-7, 30) : 0.0;
    return left + right;
  };
  Quadrature q = composite_gauss_1d(lo, hi, 10, 24);
  std::vector<double> terms(q.pts.rows());
  for (Eigen::Index i = 0; i < q.pts.rows(); ++i) {
    terms[std::size_t(i)] = q.w(i) * outer(q.pts(i, 0));
  }
  double semi = pairwise_sum(terms);
  return std::sqrt(std::max(0.0, l2sq + semi));
}

}  // namespace

double space_norm(const ProblemSpec& prob, const Field<double>& w, SpaceNorm norm) {
  switch (norm) {
    case SpaceNorm::kL2: return sobolev_norm(prob, w, false, false);
    case SpaceNorm::kH1: return sobolev_norm(prob, w, true, false);
    case SpaceNorm::kH2: return sobolev_norm(prob, w, true, true);
    case SpaceNorm::kGraphLp: return graph_norm(prob, w);
    case SpaceNorm::kHalphaSurrogate: return halpha_surrogate_norm(prob, w);
  }
  throw std::invalid_argument("unknown norm");
}

namespace {

SpaceNorm v_norm_to_space(const ProblemSpec& prob) {
  switch (prob.v_norm) {
    case VNorm::kL2: return SpaceNorm::kL2;
    case VNorm::kH1: return SpaceNorm::kH1;
    case VNorm::kHhalfSurrogate: return SpaceNorm::kL2;  // rigorous lower surrogate
    case VNorm::kGraphLp: return SpaceNorm::kGraphLp;
    case VNorm::kHalphaSurrogate: return SpaceNorm::kHalphaSurrogate;
  }
  (void)prob;
  return SpaceNorm::kL2;
}

Field<double> field_difference(const Field<double>& u, const Field<double>& v) {
  Field<double> w;
  w.jet = [u, v](std::span<const double> x) { return u.jet(x) - v.jet(x); };
  w.value = [u, v](std::span<const double> x) { return u.value(x) - v.value(x); };
  return w;
}

}  // namespace

double v_norm_distance(const ProblemSpec& prob, const Field<double>& u, const Field<double>& v) {
  return space_norm(prob, field_difference(u, v), v_norm_to_space(prob));
}

StabilityProbe probe_stability_constant(const ProblemSpec& prob,
                                        const std::vector<ParamModel>& family) {
  if (family.empty()) throw std::invalid_argument("stability probe needs a non-empty family");
  SpaceNorm vn = v_norm_to_space(prob);
  SpaceNorm xn = prob.op_kind == OperatorKind::kElliptic ? SpaceNorm::kH2
                 : prob.op_kind == OperatorKind::kAdvectionReaction
                     ? SpaceNorm::kGraphLp
                     : SpaceNorm::kHalphaSurrogate;
  StabilityProbe probe;
  probe.c1_hat = std::numeric_limits<double>::infinity();
  probe.c2_hat = 0.0;
  for (const ParamModel& m : family) {
    Field<double> u = field_of(m);
    auto au = [&](std::span<const double> x) { return apply_interior_operator(prob, u, x); };
    auto bu = [&](std::span<const double> x) { return apply_boundary_operator(prob, u, x); };
    double ay = interior_norm(prob, au, prob.p).value;
    double bz = boundary_norm(prob, bu, prob.p).value;
    double nv = space_norm(prob, u, vn);
    double nx = space_norm(prob, u, xn);
    if (nv <= 0.0 || nx <= 0.0) {
      throw std::invalid_argument("stability probe: family member with vanishing norm");
    }
    StabilityProbeRow row;
    row.member = m.name;
    row.ratio_v = (ay + bz) / nv;
    row.ratio_x = (ay + bz) / nx;
    probe.rows.push_back(row);
    probe.c1_hat = std::min(probe.c1_hat, row.ratio_v);
    probe.c2_hat = std::max(probe.c2_hat, row.ratio_x);
  }
  return probe;
}

double probe_friedrichs(const ProblemSpec& prob, int samples_per_axis) {
  if (!prob.advection) throw std::invalid_argument("friedrichs probe needs advection data");
  const auto& co = *prob.advection;
  auto div_b = [&](std::span<const double> x) {
    if (co.div_b) return co.div_b(x);
    // central differences on each component
    double acc = 0.0;
    std::array<double, 3> xp{}, xm{};
    const double h = 1e-6;
    for (int i = 0; i < prob.d; ++i) {
      for (int k = 0; k < prob.d; ++k) {
        xp[k] = x[k];
        xm[k] = x[k];
      }
      xp[i] += h;
      xm[i] -= h;
      acc += (co.b(std::span<const double>(xp.data(), std::size_t(prob.d)))(i) -
              co.b(std::span<const double>(xm.data(), std::size_t(prob.d)))(i)) /
             (2.0 * h);
    }
    return acc;
  };
  double worst = std::numeric_limits<double>::infinity();
  std::array<double, 3> x{};
  std::array<int, 3> idx{0, 0, 0};
  long total = 1;
  for (int k = 0; k < prob.d; ++k) total *= samples_per_axis;
  for (long t = 0; t < total; ++t) {
    long rem = t;
    for (int k = 0; k < prob.d; ++k) {
      idx[k] = int(rem % samples_per_axis);
      rem /= samples_per_axis;
    }
    for (int k = 0; k < prob.d; ++k) {
      x[k] = prob.domain.lo[k] + prob.domain.side(k) * (idx[k] + 0.5) / samples_per_axis;
    }
    auto xs = std::span<const double>(x.data(), std::size_t(prob.d));
    worst = std::min(worst, co.c(xs) - div_b(xs) / prob.p);
  }
  return worst;
}

double probe_graph_poincare(const ProblemSpec& prob, const std::vector<ParamModel>& family) {
  double worst = 0.0;
  for (const ParamModel& m : family) {
    Field<double> u = field_of(m);
    double lp = interior_norm(prob, [&](std::span<const double> x) { return u.value(x); },
                              prob.p)
                    .value;
    double g = graph_norm(prob, u);
    if (g > 0.0) worst = std::max(worst, lp / g);
  }
  return worst;
}

ProblemSpec recast_time_dependent(const TimeDependentData& data) {
  if (data.d_space < 1 || data.d_space > 2) {
    throw std::invalid_argument("recast supports 1 or 2 space dimensions");
  }
  if (!(data.t_final > 0.0)) throw std::invalid_argument("recast needs a positive final time");
  ProblemSpec prob;
  prob.name = "spacetime_advection";
  prob.d = data.d_space + 1;
  prob.domain = data.space_domain;
  prob.domain.d = prob.d;
  prob.domain.lo[data.d_space] = 0.0;
  prob.domain.hi[data.d_space] = data.t_final;
  prob.op_kind = OperatorKind::kAdvectionReaction;
  prob.bc_kind = BoundaryKind::kInflowTrace;
  prob.p = data.p;

  const int ds = data.d_space;
  AdvectionCoeffs co;
  auto b_space = data.b;
  co.b = [b_space, ds](std::span<const double> x) {
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    Eigen::Vector3d bs = b_space(x.first(std::size_t(ds)));
    for (int i = 0; i < ds; ++i) v(i) = bs(i);
    v(ds) = 1.0;  // unit speed in time
    return v;
  };
  auto c_space = data.c;
  co.c = [c_space, ds](std::span<const double> x) { return c_space(x.first(std::size_t(ds))); };
  prob.advection = co;
  prob.f = data.f;

  auto u0 = data.u0;
  auto g_in = data.g_in;
  prob.g = [u0, g_in, ds](std::span<const double> x) {
    if (x[std::size_t(ds)] <= 1e-14) return u0(x.first(std::size_t(ds)));
    return g_in(x);
  };
  prob.v_norm = VNorm::kGraphLp;
  return prob;
}

ValidationReport validate_problem(const ProblemSpec& prob, int n_points, std::uint64_t seed) {
  ValidationReport rep;
  auto note = [&](bool ok, const std::string& msg) {
    if (!ok) {
      rep.ok = false;
      rep.messages.push_back(msg);
    }
  };

  if (prob.d < 1 || prob.d > 3) note(false, "dimension out of range");
  if (!(prob.p >= 1.0)) note(false, "p must be at least 1");
  if (!prob.f) note(false, "missing interior data f");
  if (!prob.g) note(false, "missing boundary data g");
  switch (prob.op_kind) {
    case OperatorKind::kElliptic: note(bool(prob.elliptic), "missing elliptic payload"); break;
    case OperatorKind::kAdvectionReaction:
      note(bool(prob.advection), "missing advection payload");
      break;
    case OperatorKind::kFractionalAdr:
      note(bool(prob.fractional), "missing fractional payload");
      note(prob.d == 1, "fractional operator supports d = 1 only");
      break;
  }
  if (!rep.ok) return rep;

  if (prob.op_kind == OperatorKind::kAdvectionReaction) {
    double mu0 = probe_friedrichs(prob, prob.d == 1 ? 256 : 24);
    note(mu0 > 0.0, "positivity constant c - div(b)/p is not positive (measured " +
                        std::to_string(mu0) + ")");
  }

  if (prob.rho) {
    double mass = integrate_auto([&](std::span<const double> x) { return prob.rho(x); },
                                 prob.domain, 12, 1e-9)
                      .value;
    note(std::abs(mass - 1.0) <= 1e-6, "interior density does not integrate to 1");
  }

  if (prob.exact) {
    Field<double> u = field_of_exact(prob);
    const bool frac = prob.op_kind == OperatorKind::kFractionalAdr;
    const int n = frac ? std::min(n_points, 40) : n_points;
    const double tol = frac ? 1e-8 : 1e-10;
    Rng rng(seed);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      std::array<double, 3> x{};
      for (int k = 0; k < prob.d; ++k) {
        double margin = frac ? 0.05 * prob.domain.side(k) : 0.0;
        x[k] = rng.uniform(prob.domain.lo[k] + margin, prob.domain.hi[k] - margin);
      }
      auto xs = std::span<const double>(x.data(), std::size_t(prob.d));
      double au = apply_interior_operator(prob, u, xs);
      worst = std::max(worst, std::abs(au - prob.f(xs)));
    }
    note(worst <= tol, "manufactured interior residual " + std::to_string(worst) +
                           " exceeds tolerance");

    // boundary consistency at deterministic boundary points
    SampleSet bs = sample_problem_boundary(prob, 32, SampleKind::kIidMc, Rng(seed + 1));
    double worst_b = 0.0;
    std::array<double, 3> buf{};
    for (Eigen::Index i = 0; i < bs.pts.rows(); ++i) {
      auto xs = row_span(bs.pts, i, buf, prob.d);
      worst_b = std::max(worst_b, std::abs(u.value(xs) - prob.g(xs)));
    }
    note(worst_b <= 1e-10, "manufactured boundary residual " + std::to_string(worst_b) +
                               " exceeds tolerance");
  }
  return rep;
}

namespace {

ProblemSpec make_poisson1d_sin() {
  ProblemSpec prob;
  prob.name = "poisson1d_sin";
  prob.d = 1;
  prob.domain = Box{1, {0, 0, 0}, {1, 0, 0}};
  prob.op_kind = OperatorKind::kElliptic;
  prob.bc_kind = BoundaryKind::kDirichletTrace;
  EllipticCoeffs co;
  co.a = [](std::span<const double>) { return Eigen::Matrix3d::Identity(); };
  co.b = [](std::span<const double>) { return Eigen::Vector3d::Zero(); };
  co.c = [](std::span<const double>) { return 0.0; };
  prob.elliptic = co;
  prob.f = [](std::span<const double> x) { return kPi * kPi * std::sin(kPi * x[0]); };
  prob.g = [](std::span<const double>) { return 0.0; };
  prob.p = 2.0;
  prob.v_norm = VNorm::kL2;
  prob.exact = [](std::span<const double> x) {
    auto t = jet_seed<double>(x[0], 0, 1);
    return sin(t * kPi);
  };
  return prob;
}

ProblemSpec make_poisson2d_product() {
  ProblemSpec prob;
  prob.name = "poisson2d_product";
  prob.d = 2;
  prob.domain = Box{2, {0, 0, 0}, {1, 1, 0}};
  prob.op_kind = OperatorKind::kElliptic;
  prob.bc_kind = BoundaryKind::kDirichletTrace;
  EllipticCoeffs co;
  co.a = [](std::span<const double>) { return Eigen::Matrix3d::Identity(); };
  co.b = [](std::span<const double>) { return Eigen::Vector3d::Zero(); };
  co.c = [](std::span<const double>) { return 0.0; };
  prob.elliptic = co;
  prob.f = [](std::span<const double> x) {
    return 2.0 * kPi * kPi * std::sin(kPi * x[0]) * std::sin(kPi * x[1]);
  };
  prob.g = [](std::span<const double>) { return 0.0; };
  prob.p = 2.0;
  prob.v_norm = VNorm::kL2;
  prob.exact = [](std::span<const double> x) {
    auto t0 = jet_seed<double>(x[0], 0, 2);
    auto t1 = jet_seed<double>(x[1], 1, 2);
    return sin(t0 * kPi) * sin(t1 * kPi);
  };
  return prob;
}

ProblemSpec make_advreac1d() {
  ProblemSpec prob;
  prob.name = "advreac1d_friedrichs";
  prob.d = 1;
  prob.domain = Box{1, {0, 0, 0}, {1, 0, 0}};
  prob.op_kind = OperatorKind::kAdvectionReaction;
  prob.bc_kind = BoundaryKind::kInflowTrace;
  AdvectionCoeffs co;
  co.b = [](std::span<const double>) { return Eigen::Vector3d(1.0, 0.0, 0.0); };
  co.c = [](std::span<const double>) { return 1.0; };
  co.div_b = [](std::span<const double>) { return 0.0; };
  prob.advection = co;
  // exact u = sin(pi x) + 1, f = u' + u
  prob.f = [](std::span<const double> x) {
    return kPi * std::cos(kPi * x[0]) + std::sin(kPi * x[0]) + 1.0;
  };
  prob.g = [](std::span<const double>) { return 1.0; };  // u(0)
  prob.p = 2.0;
  prob.v_norm = VNorm::kGraphLp;
  prob.exact = [](std::span<const double> x) {
    auto t = jet_seed<double>(x[0], 0, 1);
    return sin(t * kPi) + 1.0;
  };
  return prob;
}

ProblemSpec make_advreac_spacetime() {
  TimeDependentData data;
  data.d_space = 1;
  data.space_domain = Box{1, {0, 0, 0}, {1, 0, 0}};
  data.t_final = 1.0;
  data.b = [](std::span<const double>) { return Eigen::Vector3d(1.0, 0.0, 0.0); };
  data.c = [](std::span<const double>) { return 1.0; };
  data.f = [](std::span<const double>) { return 0.0; };
  // exact u(x,t) = exp(-t) sin(pi (x - t)) solves u_t + u_x + u = 0
  data.u0 = [](std::span<const double> x) { return std::sin(kPi * x[0]); };
  data.g_in = [](std::span<const double> x) {
    return std::exp(-x[1]) * std::sin(kPi * (x[0] - x[1]));
  };
  data.p = 2.0;
  ProblemSpec prob = recast_time_dependent(data);
  prob.name = "advreac_spacetime";
  prob.exact = [](std::span<const double> x) {
    auto xs = jet_seed<double>(x[0], 0, 2);
    auto ts = jet_seed<double>(x[1], 1, 2);
    return exp(-ts) * sin((xs - ts) * kPi);
  };
  return prob;
}

ProblemSpec make_frac_adr_1d() {
  ProblemSpec prob;
  prob.name = "frac_adr_1d";
  prob.d = 1;
  prob.domain = Box{1, {-1, 0, 0}, {1, 0, 0}};
  prob.op_kind = OperatorKind::kFractionalAdr;
  prob.bc_kind = BoundaryKind::kExteriorIdentity;
  FractionalCoeffs co;
  co.alpha = 1.5;
  co.b = [](std::span<const double>) { return 0.3; };
  co.c = [](std::span<const double>) { return 1.0; };
  co.support_radius = 1.0;
  co.collar_width = 1.0;
  prob.fractional = co;
  const double alpha = co.alpha;
  const double k = eigen_poly_constant(alpha);
  const double s = 1.0 + 0.5 * alpha;
  // exact u = (1 - x^2)_+^(1 + alpha/2); the fractional part maps it to
  // k (1 - (1+alpha) x^2)
  prob.f = [alpha, k, s](std::span<const double> x) {
    const double t = 1.0 - x[0] * x[0];
    const double u = t > 0.0 ? std::pow(t, s) : 0.0;
    const double du = t > 0.0 ? s * std::pow(t, s - 1.0) * (-2.0 * x[0]) : 0.0;
    return k * (1.0 - (1.0 + alpha) * x[0] * x[0]) + 0.3 * du + u;
  };
  prob.g = [](std::span<const double>) { return 0.0; };
  prob.p = 2.0;
  prob.v_norm = VNorm::kHalphaSurrogate;
  prob.exact = [s](std::span<const double> x) {
    auto t = jet_seed<double>(x[0], 0, 1);
    auto w = 1.0 - t * t;
    if (w.v <= 0.0) return jet_const<double>(0.0, 1);
    return pow(w, s);
  };
  return prob;
}

}  // namespace

ProblemSpec preset_problem(const std::string& name) {
  if (name == "poisson1d_sin") return make_poisson1d_sin();
  if (name == "poisson2d_product") return make_poisson2d_product();
  if (name == "advreac1d_friedrichs") return make_advreac1d();
  if (name == "advreac_spacetime") return make_advreac_spacetime();
  if (name == "frac_adr_1d") return make_frac_adr_1d();
  throw std::invalid_argument("unknown preset: " + name);
}

std::vector<std::string> preset_names() {
  return {"poisson1d_sin", "poisson2d_product", "advreac1d_friedrichs", "advreac_spacetime",
          "frac_adr_1d"};
}

}  // namespace rmlab
