#include "rmlab/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace rmlab {

namespace {

std::span<const double> row_span(const Eigen::MatrixXd& m, Eigen::Index i,
                                 std::array<double, 3>& buf, int d) {
  for (int k = 0; k < d; ++k) buf[k] = m(i, k);
  return std::span<const double>(buf.data(), std::size_t(d));
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / double(xs.size());
}

double stderr_of(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return std::sqrt(s / double(xs.size() - 1) / double(xs.size()));
}

}  // namespace

OptimAlgo optim_algo_from_string(const std::string& s) {
  if (s == "adam") return OptimAlgo::kAdam;
  if (s == "gd") return OptimAlgo::kGd;
  throw std::invalid_argument("unknown optimizer: " + s);
}

std::string to_string(OptimAlgo a) {
  switch (a) {
    case OptimAlgo::kAdam: return "adam";
    case OptimAlgo::kGd: return "gd";
  }
  return "?";
}

RunReport train(const LossEvaluator& loss, const ParamModel& model, const OptimConfig& opt) {
  if (model.kind == ModelKind::kAnalytic) {
    throw std::invalid_argument("train: analytic models carry no trainable parameters");
  }
  if (opt.step <= 0.0) throw std::invalid_argument("train: step size must be positive");
  if (opt.window < 1) throw std::invalid_argument("train: window must be at least 1");

  RunReport rep;
  rep.problem = loss.problem().name;
  rep.model_name = model.name;
  rep.loss_spec = loss.spec();
  rep.optim = opt;

  const auto t0 = std::chrono::steady_clock::now();
  ParamModel work = model;
  Eigen::VectorXd theta = model.theta;
  const Eigen::Index n = theta.size();
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(n);
  ad::Tape tape;
  double delta = opt.delta_slack;
  std::vector<double> running_best;

  int it = 0;
  for (; it < opt.max_iters; ++it) {
    double interior = 0.0, boundary = 0.0;
    double loss_value = 0.0;
    std::vector<double> grad;
    try {
      auto res = ad::grad_params(
          [&](std::span<const ad::Var> th) {
            return loss.eval_taped(work, th, &interior, &boundary);
          },
          std::span<const double>(theta.data(), std::size_t(n)), &tape);
      loss_value = res.first;
      grad = std::move(res.second);
    } catch (const std::runtime_error&) {
      rep.status = "nonfinite";
      break;
    }
    if (!std::isfinite(loss_value)) {
      rep.status = "nonfinite";
      break;
    }

    double g2 = 0.0;
    for (double g : grad) g2 += g * g;
    double gnorm = std::sqrt(g2);
    if (it % opt.record_every == 0) {
      rep.trajectory.push_back({it, loss_value, interior, boundary, gnorm});
    }

    if (delta <= 0.0) delta = 1e-6 * std::abs(loss_value);
    double best = running_best.empty() ? loss_value : std::min(running_best.back(), loss_value);
    running_best.push_back(best);
    if (int(running_best.size()) > opt.window) {
      double past = running_best[running_best.size() - 1 - std::size_t(opt.window)];
      if (past - best < delta) {
        ++it;
        break;
      }
    }

    if (opt.algo == OptimAlgo::kGd) {
      for (Eigen::Index i = 0; i < n; ++i) theta(i) -= opt.step * grad[std::size_t(i)];
    } else {
      double t = double(it + 1);
      double c1 = 1.0 - std::pow(opt.beta1, t);
      double c2 = 1.0 - std::pow(opt.beta2, t);
      for (Eigen::Index i = 0; i < n; ++i) {
        double g = grad[std::size_t(i)];
        m1(i) = opt.beta1 * m1(i) + (1.0 - opt.beta1) * g;
        m2(i) = opt.beta2 * m2(i) + (1.0 - opt.beta2) * g * g;
        theta(i) -= opt.step * (m1(i) / c1) / (std::sqrt(m2(i) / c2) + opt.adam_eps);
      }
    }
    work.theta = theta;
  }

  rep.iters_run = it;
  rep.theta_final = theta;
  work.theta = theta;
  if (rep.status == "ok") {
    LossBreakdown fin = loss.eval(work);
    rep.final_loss = fin.total;
    rep.final_interior = fin.interior;
    rep.final_boundary = fin.boundary;
    rep.trajectory.push_back({it, fin.total, fin.interior, fin.boundary,
                              rep.trajectory.empty() ? 0.0 : rep.trajectory.back().grad_norm});
  } else if (!rep.trajectory.empty()) {
    rep.final_loss = rep.trajectory.back().loss;
    rep.final_interior = rep.trajectory.back().interior;
    rep.final_boundary = rep.trajectory.back().boundary;
  }
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

RunReport train(const ProblemSpec& prob, const LossSpec& lspec, const ParamModel& model,
                const OptimConfig& opt) {
  LossEvaluator loss(prob, lspec);
  return train(loss, model, opt);
}

double aposteriori_bound(double j_value, double c1, double p) {
  if (c1 <= 0.0) throw std::invalid_argument("aposteriori_bound: c1 must be positive");
  if (j_value < 0.0) throw std::invalid_argument("aposteriori_bound: negative loss");
  if (p < 1.0) throw std::invalid_argument("aposteriori_bound: p must be at least 1");
  return std::pow(2.0, (p - 1.0) / p) / c1 * std::pow(j_value, 1.0 / p);
}

double regularization_penalty(double p, double epsilon, double tau, double rho_mass,
                              double rho_b_mass) {
  const int m = regularization_m(p);
  const double cp = p == 1.0 ? 1.0 : 2.0;
  return cp * (2.0 * m - p) * epsilon * (1.0 + tau) * (rho_mass + rho_b_mass) / p;
}

double aposteriori_bound_regularized(double j_eps, double c1, double p, double epsilon, double tau,
                                     double rho_mass, double rho_b_mass) {
  if (c1 <= 0.0) throw std::invalid_argument("aposteriori_bound_regularized: c1 must be positive");
  if (j_eps < 0.0) throw std::invalid_argument("aposteriori_bound_regularized: negative loss");
  const double cp = p == 1.0 ? 1.0 : 2.0;
  double inner = cp * j_eps + regularization_penalty(p, epsilon, tau, rho_mass, rho_b_mass);
  return std::pow(2.0, 1.0 - 1.0 / p) / c1 * std::pow(inner, 1.0 / p);
}

DiscreteBoundReport discrete_bound_report(double j_m, double c1, double p, double rad_interior,
                                          double rad_boundary, double tau, double delta,
                                          double g_r, double g_b, int m_r, int m_b) {
  if (c1 <= 0.0) throw std::invalid_argument("discrete_bound_report: c1 must be positive");
  DiscreteBoundReport rep;
  rep.j_m = j_m;
  rep.delta = delta;
  rep.r_tilde = rad_interior + tau * rad_boundary;
  double inner = j_m + 2.0 * rep.r_tilde + (1.0 + tau) * delta / 2.0;
  rep.bound = std::pow(2.0, (p - 1.0) / p) / c1 * std::pow(std::max(0.0, inner), 1.0 / p);
  rep.q_interior = 1.0 - 2.0 * std::exp(-double(m_r) * delta * delta /
                                        (32.0 * std::pow(g_r, 2.0 * p)));
  rep.q_boundary = 1.0 - 2.0 * std::exp(-double(m_b) * delta * delta /
                                        (32.0 * std::pow(g_b, 2.0 * p)));
  rep.q_probability = rep.q_interior * rep.q_boundary;
  rep.vacuous = rep.q_interior <= 0.0 || rep.q_boundary <= 0.0;
  return rep;
}

RademacherEstimate estimate_rademacher_sampled(
    const std::vector<ScalarField>& family,
    const std::function<Eigen::MatrixXd(int, const Rng&)>& sampler, int d, int m,
    int n_sign_trials, int n_sample_trials, const Rng& rng) {
  if (family.empty()) throw std::invalid_argument("estimate_rademacher: empty family");
  if (m < 1) throw std::invalid_argument("estimate_rademacher: m < 1");
  if (n_sign_trials < 1 || n_sample_trials < 1) {
    throw std::invalid_argument("estimate_rademacher: trial counts must be positive");
  }

  std::vector<double> sups;
  sups.reserve(std::size_t(n_sign_trials) * std::size_t(n_sample_trials));
  std::array<double, 3> buf{};
  Eigen::MatrixXd vals(Eigen::Index(family.size()), m);
  for (int s = 0; s < n_sample_trials; ++s) {
    Eigen::MatrixXd pts = sampler(m, rng.fork(0x5a31 + std::uint64_t(s)));
    for (std::size_t f = 0; f < family.size(); ++f) {
      for (int i = 0; i < m; ++i) {
        auto x = row_span(pts, i, buf, d);
        vals(Eigen::Index(f), i) = family[f](x);
      }
    }
    for (int t = 0; t < n_sign_trials; ++t) {
      Rng sr = rng.fork(0x9d77 + std::uint64_t(s)).fork(std::uint64_t(t));
      Eigen::VectorXd signs(m);
      for (int i = 0; i < m; ++i) signs(i) = sr.next_double() < 0.5 ? -1.0 : 1.0;
      double sup = 0.0;
      for (Eigen::Index f = 0; f < vals.rows(); ++f) {
        double acc = vals.row(f).dot(signs) / double(m);
        sup = std::max(sup, std::abs(acc));
      }
      sups.push_back(sup);
    }
  }
  RademacherEstimate est;
  est.m = m;
  est.estimate = mean_of(sups);
  est.stderr_ = stderr_of(sups, est.estimate);
  return est;
}

RademacherEstimate estimate_rademacher(const std::vector<ScalarField>& family, const Box& box,
                                       int m, int n_sign_trials, int n_sample_trials,
                                       const Rng& rng) {
  auto sampler = [&box](int mm, const Rng& r) {
    return sample_interior(box, mm, SampleKind::kIidMc, r).pts;
  };
  return estimate_rademacher_sampled(family, sampler, box.d, m, n_sign_trials, n_sample_trials,
                                     rng);
}

double residual_sup_norm(const ProblemSpec& prob, const Field<double>& u, int grid_per_axis) {
  std::array<double, 3> x{};
  std::array<int, 3> idx{0, 0, 0};
  long total = 1;
  for (int k = 0; k < prob.d; ++k) total *= grid_per_axis;
  double sup = 0.0;
  for (long i = 0; i < total; ++i) {
    long rem = i;
    for (int k = prob.d - 1; k >= 0; --k) {
      idx[std::size_t(k)] = int(rem % grid_per_axis);
      rem /= grid_per_axis;
    }
    for (int k = 0; k < prob.d; ++k) {
      x[std::size_t(k)] = prob.domain.lo[std::size_t(k)] +
                          prob.domain.side(k) * (double(idx[std::size_t(k)]) + 0.5) /
                              double(grid_per_axis);
    }
    std::span<const double> xs(x.data(), std::size_t(prob.d));
    double r = prob.f(xs) - apply_interior_operator(prob, u, xs);
    sup = std::max(sup, std::abs(r));
  }
  return sup;
}

double boundary_residual_sup_norm(const ProblemSpec& prob, const Field<double>& u, int panels) {
  Quadrature q = boundary_quadrature(prob, 4, panels);
  std::array<double, 3> buf{};
  double sup = 0.0;
  for (Eigen::Index i = 0; i < q.pts.rows(); ++i) {
    auto x = row_span(q.pts, i, buf, prob.d);
    sup = std::max(sup, std::abs(u.value(x) - prob.g(x)));
  }
  return sup;
}

std::vector<LossGapRow> loss_gap_audit(const ProblemSpec& prob,
                                       const std::vector<ParamModel>& models, double p, double tau,
                                       const std::vector<int>& m_list, int trials,
                                       std::uint64_t seed) {
  if (models.empty()) throw std::invalid_argument("loss_gap_audit: no models");
  if (trials < 1) throw std::invalid_argument("loss_gap_audit: trials < 1");

  std::vector<Field<double>> fields;
  fields.reserve(models.size());
  for (const ParamModel& m : models) fields.push_back(field_of(m));

  // continuous references and the interior residual family raised to power p
  std::vector<double> j_ref(models.size());
  std::vector<ScalarField> family_r;
  double g_r = 0.0;
  for (std::size_t j = 0; j < models.size(); ++j) {
    j_ref[j] = loss_continuous(prob, fields[j], p, tau).total;
    const Field<double>* fj = &fields[j];
    const ProblemSpec* pp = &prob;
    family_r.push_back([fj, pp, p](std::span<const double> x) {
      double r = pp->f(x) - apply_interior_operator(*pp, *fj, x);
      return std::pow(std::abs(r), p);
    });
    g_r = std::max(g_r, residual_sup_norm(prob, fields[j], prob.d == 1 ? 512 : 64));
  }

  const bool exact_boundary = prob.d == 1 && !boundary_geom(prob).is_collar;
  std::vector<ScalarField> family_b;
  double g_b = 0.0;
  if (!exact_boundary) {
    BoundaryGeom geom = boundary_geom(prob);
    for (std::size_t j = 0; j < models.size(); ++j) {
      const Field<double>* fj = &fields[j];
      const ProblemSpec* pp = &prob;
      auto w = geom.weight;
      family_b.push_back([fj, pp, p, w](std::span<const double> x) {
        double r = fj->value(x) - pp->g(x);
        return w(x) * std::pow(std::abs(r), p);
      });
      g_b = std::max(g_b, boundary_residual_sup_norm(prob, fields[j]));
    }
  }

  Rng root(seed);
  std::vector<LossGapRow> rows;
  for (int m : m_list) {
    Rng mr = root.fork(std::uint64_t(m));
    RademacherEstimate rad_r = estimate_rademacher(
        family_r, prob.domain, m, 8, 8, mr.fork(1));
    double delta_r = std::pow(g_r, p) * std::sqrt(32.0 * std::log(80.0) / double(m));
    double rhs = 2.0 * rad_r.estimate + delta_r / 2.0;
    if (!exact_boundary) {
      auto sampler = [&prob](int mm, const Rng& r) {
        return sample_problem_boundary(prob, mm, SampleKind::kIidMc, r).pts;
      };
      RademacherEstimate rad_b =
          estimate_rademacher_sampled(family_b, sampler, prob.d, m, 8, 8, mr.fork(2));
      double delta_b = std::pow(g_b, p) * std::sqrt(32.0 * std::log(80.0) / double(m));
      rhs += tau * (2.0 * rad_b.estimate + delta_b / 2.0);
    }

    std::vector<double> gaps(static_cast<std::size_t>(trials));
    SampleSet sb = exact_boundary
                       ? sample_problem_boundary(prob, 2, SampleKind::kGrid, mr.fork(3))
                       : SampleSet{};
    for (int t = 0; t < trials; ++t) {
      Rng tr = mr.fork(100 + std::uint64_t(t));
      SampleSet si = sample_problem_interior(prob, m, SampleKind::kIidMc, tr.fork(1));
      SampleSet sbt = exact_boundary
                          ? sb
                          : sample_problem_boundary(prob, m, SampleKind::kIidMc, tr.fork(2));
      double sup = 0.0;
      for (std::size_t j = 0; j < models.size(); ++j) {
        double jm = loss_discrete(prob, fields[j], p, tau, si, sbt).total;
        sup = std::max(sup, std::abs(jm - j_ref[j]));
      }
      gaps[std::size_t(t)] = sup;
    }

    LossGapRow row;
    row.m = m;
    row.mean_gap = mean_of(gaps);
    row.stderr_gap = stderr_of(gaps, row.mean_gap);
    row.max_gap = *std::max_element(gaps.begin(), gaps.end());
    row.rhs = rhs;
    row.delta = delta_r;
    int covered = 0;
    for (double g : gaps) covered += g <= rhs ? 1 : 0;
    row.coverage = double(covered) / double(trials);
    rows.push_back(row);
  }
  return rows;
}

std::vector<BernsteinRow> bernstein_probe(const std::vector<int>& m_list, int samples_per_m,
                                          double beta, std::uint64_t seed) {
  if (samples_per_m < 1) throw std::invalid_argument("bernstein_probe: samples_per_m < 1");
  if (beta <= 0.0) throw std::invalid_argument("bernstein_probe: beta must be positive");
  const double lo = -4.0, hi = 4.0;
  const double width = hi - lo;
  Quadrature q = composite_gauss_1d(lo, hi, 16, 32);
  Rng root(seed);

  std::vector<BernsteinRow> rows;
  for (int fm : m_list) {
    if (fm < 1) throw std::invalid_argument("bernstein_probe: family parameter < 1");
    Eigen::MatrixXd centers(fm, 1);
    if (fm == 1) {
      centers(0, 0) = 0.0;
    } else {
      for (int i = 0; i < fm; ++i) centers(i, 0) = -1.0 + 2.0 * double(i) / double(fm - 1);
    }
    Rng fr = root.fork(std::uint64_t(fm));

    std::vector<ParamModel> members;
    for (int s = 0; s < samples_per_m; ++s) {
      Eigen::VectorXd coeffs(fm);
      Rng cr = fr.fork(std::uint64_t(s));
      for (int i = 0; i < fm; ++i) coeffs(i) = cr.normal();
      members.push_back(make_rbf(centers, double(fm), coeffs));
    }

    BernsteinRow row;
    row.family_m = fm;
    std::vector<double> n2(members.size()), d2(members.size());
    for (std::size_t s = 0; s < members.size(); ++s) {
      double v2 = 0.0, dv2 = 0.0;
      for (Eigen::Index i = 0; i < q.pts.rows(); ++i) {
        double xv = q.pts(i, 0);
        std::span<const double> x(&xv, 1);
        Jet2d j = eval_model(members[s], x);
        v2 += q.w(i) * j.v * j.v;
        dv2 += q.w(i) * j.d1(0) * j.d1(0);
      }
      n2[s] = v2;
      d2[s] = dv2;
      row.max_ratio = std::max(row.max_ratio, std::sqrt(dv2 / v2));
    }

    double c = width * width * row.max_ratio * row.max_ratio / 6.0;
    row.implied_m_r =
        std::max(2, int(std::ceil(std::pow(c * double(fm) / 0.75, 1.0 / beta))));

    // midpoint-grid discrete norm against the probability-normalized integral
    row.worst_lower = 1e300;
    row.worst_upper = 0.0;
    const int mg = row.implied_m_r;
    for (std::size_t s = 0; s < members.size(); ++s) {
      double ym = 0.0;
      for (int i = 0; i < mg; ++i) {
        double xv = lo + width * (double(i) + 0.5) / double(mg);
        std::span<const double> x(&xv, 1);
        double v = model_value(members[s], x);
        ym += v * v;
      }
      ym /= double(mg);
      double y = n2[s] / width;
      double ratio = y / ym;
      row.worst_lower = std::min(row.worst_lower, ratio);
      row.worst_upper = std::max(row.worst_upper, ratio);
    }
    row.equivalence_ok = row.worst_upper <= 4.0 && row.worst_lower >= 4.0 / 7.0;
    rows.push_back(row);
  }
  return rows;
}

HpBoundReport hp_bound_report(double j_hp, double c1, double eps_proj, double delta_n) {
  if (c1 <= 0.0) throw std::invalid_argument("hp_bound_report: c1 must be positive");
  if (j_hp < 0.0 || delta_n < 0.0) {
    throw std::invalid_argument("hp_bound_report: negative inputs");
  }
  if (eps_proj < -1e-10) {
    throw std::runtime_error("hp_bound_report: projection deficit is negative beyond roundoff");
  }
  HpBoundReport rep;
  rep.j_hp = j_hp;
  rep.delta_n = delta_n;
  rep.eps_proj = std::max(0.0, eps_proj);
  rep.bound = std::sqrt(2.0) / c1 * std::sqrt(j_hp + delta_n + rep.eps_proj);
  return rep;
}

}  // namespace rmlab
