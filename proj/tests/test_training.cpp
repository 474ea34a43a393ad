#include <cmath>

#include "rmlab/training.hpp"
#include "testutil.hpp"
#include <doctest.h>

using namespace rmlab;

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;

// identity operator, constant data: the discrete loss at the single grid
// point x = 1 is (1 - theta)^2 for a one-center bump parked at that point
ProblemSpec scalar_surrogate() {
  ProblemSpec prob;
  prob.name = "scalar_surrogate";
  prob.d = 1;
  EllipticCoeffs co;
  co.a = [](std::span<const double>) { return Eigen::Matrix3d(Eigen::Matrix3d::Zero()); };
  co.b = [](std::span<const double>) { return Eigen::Vector3d(Eigen::Vector3d::Zero()); };
  co.c = [](std::span<const double>) { return 1.0; };
  prob.elliptic = co;
  prob.f = [](std::span<const double>) { return 1.0; };
  prob.g = [](std::span<const double>) { return 0.0; };
  return prob;
}

ParamModel unit_bump() {
  Eigen::MatrixXd centers(1, 1);
  centers(0, 0) = 1.0;
  Eigen::VectorXd coeffs = Eigen::VectorXd::Zero(1);
  return make_rbf(centers, 1.0, coeffs);
}

LossSpec surrogate_spec() {
  LossSpec spec;
  spec.form = LossForm::kDiscrete;
  spec.m_interior = 1;
  spec.m_boundary = 2;
  spec.sample_kind = SampleKind::kGrid;
  spec.tau = 0.0;
  return spec;
}

ParamModel random_rbf(Rng& rng, int n_centers = 4) {
  Eigen::MatrixXd centers(n_centers, 1);
  for (int i = 0; i < n_centers; ++i) centers(i, 0) = (0.5 + i) / double(n_centers);
  Eigen::VectorXd coeffs(n_centers);
  for (int i = 0; i < n_centers; ++i) coeffs(i) = rng.normal();
  return make_rbf(centers, 2.0 * n_centers, coeffs);
}

double fit_slope(const std::vector<double>& logx, const std::vector<double>& logy) {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < logx.size(); ++i) {
    mx += logx[i];
    my += logy[i];
  }
  mx /= double(logx.size());
  my /= double(logx.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < logx.size(); ++i) {
    num += (logx[i] - mx) * (logy[i] - my);
    den += (logx[i] - mx) * (logx[i] - mx);
  }
  return num / den;
}

}  // namespace

TEST_CASE("optimizer names round trip") {
  CHECK(optim_algo_from_string("adam") == OptimAlgo::kAdam);
  CHECK(optim_algo_from_string("gd") == OptimAlgo::kGd);
  CHECK(to_string(OptimAlgo::kGd) == "gd");
  CHECK_THROWS_AS(optim_algo_from_string("sgd?"), std::invalid_argument);
}

TEST_CASE("gradient descent solves the scalar surrogate") {
  ProblemSpec prob = scalar_surrogate();
  OptimConfig opt;
  opt.algo = OptimAlgo::kGd;
  opt.step = 0.3;
  opt.max_iters = 500;
  opt.window = 50;
  RunReport rep = train(prob, surrogate_spec(), unit_bump(), opt);
  CHECK(rep.status == "ok");
  CHECK(rep.final_loss < 1e-10);
  CHECK(rep.theta_final(0) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(rep.iters_run < opt.max_iters);  // the improvement window kicked in
  CHECK(rep.trajectory.size() >= 2);
  CHECK(rep.trajectory.front().loss == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.wall_seconds >= 0.0);
}

TEST_CASE("adam solves the scalar surrogate and is deterministic") {
  ProblemSpec prob = scalar_surrogate();
  OptimConfig opt;
  opt.step = 0.05;
  opt.max_iters = 2000;
  opt.window = 200;
  RunReport a = train(prob, surrogate_spec(), unit_bump(), opt);
  RunReport b = train(prob, surrogate_spec(), unit_bump(), opt);
  CHECK(a.status == "ok");
  CHECK(a.final_loss < 1e-8);
  CHECK(a.theta_final(0) == doctest::Approx(1.0).epsilon(1e-4));

  REQUIRE(a.trajectory.size() == b.trajectory.size());
  for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
    CHECK(a.trajectory[i].loss == b.trajectory[i].loss);
    CHECK(a.trajectory[i].grad_norm == b.trajectory[i].grad_norm);
  }
  CHECK((a.theta_final - b.theta_final).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.iters_run == b.iters_run);
}

TEST_CASE("runaway steps end in a flagged non-finite run") {
  ProblemSpec prob = scalar_surrogate();
  OptimConfig opt;
  opt.algo = OptimAlgo::kGd;
  opt.step = 1e5;
  opt.max_iters = 4000;
  opt.window = 4000;
  RunReport rep = train(prob, surrogate_spec(), unit_bump(), opt);
  CHECK(rep.status == "nonfinite");
  CHECK(!rep.trajectory.empty());
  CHECK(rep.iters_run < opt.max_iters);
}

TEST_CASE("analytic models are rejected by the trainer") {
  ProblemSpec prob = scalar_surrogate();
  ParamModel frozen = make_analytic(1, [](std::span<const double> x) {
    return jet_seed<double>(x[0], 0, 1);
  });
  OptimConfig opt;
  CHECK_THROWS_AS(train(prob, surrogate_spec(), frozen, opt), std::invalid_argument);
}

TEST_CASE("trajectory recording honors the stride") {
  ProblemSpec prob = scalar_surrogate();
  OptimConfig opt;
  opt.algo = OptimAlgo::kGd;
  opt.step = 0.3;
  opt.max_iters = 40;
  opt.window = 40;
  opt.record_every = 10;
  RunReport rep = train(prob, surrogate_spec(), unit_bump(), opt);
  REQUIRE(!rep.trajectory.empty());
  for (std::size_t i = 0; i + 1 < rep.trajectory.size(); ++i) {
    CHECK(rep.trajectory[i].iter % 10 == 0);
  }
  CHECK(rep.trajectory.back().iter == rep.iters_run);
}

TEST_CASE("widened network warm start preserves the reached loss") {
  ProblemSpec prob = preset_problem("poisson1d_sin");
  LossSpec spec;
  spec.form = LossForm::kContinuous;
  spec.quad_order = 8;
  spec.quad_panels = 2;

  MlpArch small{{1, 4, 1}, Activation::kTanh};
  MlpArch big{{1, 8, 1}, Activation::kTanh};
  ParamModel net = make_mlp(small, 3);
  OptimConfig opt;
  opt.step = 0.02;
  opt.max_iters = 120;
  opt.window = 120;
  RunReport rep = train(prob, spec, net, opt);
  CHECK(rep.status == "ok");

  ParamModel wide = make_mlp(big, 0);
  wide.theta = embed_params(small, rep.theta_final, big);
  LossEvaluator ev(prob, spec);
  CHECK(ev.eval(wide).total == doctest::Approx(rep.final_loss).epsilon(1e-12));
}

TEST_CASE("residual error bound frozen values and input checks") {
  CHECK(aposteriori_bound(0.08, 1.0, 2.0) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(aposteriori_bound(1.0, 2.0, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(aposteriori_bound(0.1, 0.0, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(aposteriori_bound(-0.1, 1.0, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(aposteriori_bound(0.1, 1.0, 0.5), std::invalid_argument);
}

TEST_CASE("smoothed-loss error bound matches the hand computation") {
  CHECK(regularization_penalty(1.0, 0.01, 1.0, 0.5, 0.5) ==
        doctest::Approx(0.02).epsilon(1e-14));
  CHECK(aposteriori_bound_regularized(0.1, 1.0, 1.0, 0.01, 1.0, 0.5, 0.5) ==
        doctest::Approx(0.12).epsilon(1e-12));
  // p = 2 smooths nothing: zero penalty and the plain bound with c_p = 2
  CHECK(regularization_penalty(2.0, 0.3, 1.0, 1.0, 1.0) == 0.0);
  CHECK(aposteriori_bound_regularized(0.08, 1.0, 2.0, 0.3, 1.0, 1.0, 1.0) ==
        doctest::Approx(std::sqrt(2.0) * std::sqrt(2.0 * 0.08)).epsilon(1e-12));
}

TEST_CASE("sampled-loss error bound report") {
  DiscreteBoundReport rep =
      discrete_bound_report(0.1, 1.0, 2.0, 0.01, 0.01, 1.0, 0.5, 1.0, 1.0, 10000, 10000);
  CHECK(rep.r_tilde == doctest::Approx(0.02).epsilon(1e-14));
  CHECK(rep.bound == doctest::Approx(std::sqrt(2.0) * 0.8).epsilon(1e-12));
  CHECK(rep.q_interior >= 1.0 - 1e-30);
  CHECK(rep.q_boundary >= 1.0 - 1e-30);
  CHECK(rep.q_probability >= 1.0 - 1e-29);
  CHECK(!rep.vacuous);

  // too little data for the requested confidence
  DiscreteBoundReport thin =
      discrete_bound_report(0.1, 1.0, 2.0, 0.01, 0.01, 1.0, 1e-6, 1.0, 1.0, 10, 10);
  CHECK(thin.vacuous);

  // with no sampling terms the report collapses to the plain bound
  DiscreteBoundReport plain =
      discrete_bound_report(0.08, 1.0, 2.0, 0.0, 0.0, 7.0, 0.0, 1.0, 1.0, 100, 100);
  CHECK(plain.bound == doctest::Approx(aposteriori_bound(0.08, 1.0, 2.0)).epsilon(1e-15));
}

TEST_CASE("sign-average complexity of trivial families") {
  std::vector<ScalarField> zero{[](std::span<const double>) { return 0.0; }};
  std::vector<ScalarField> one{[](std::span<const double>) { return 1.0; }};
  Box box;
  RademacherEstimate z = estimate_rademacher(zero, box, 64, 8, 4, Rng(1));
  CHECK(z.estimate == 0.0);
  CHECK(z.stderr_ == 0.0);

  RademacherEstimate o = estimate_rademacher(one, box, 1, 16, 4, Rng(2));
  CHECK(o.estimate == 1.0);
  CHECK(o.stderr_ == 0.0);
}

TEST_CASE("sign-average complexity decays like the root of the sample count") {
  Rng rng(2025);
  std::vector<ScalarField> family;
  for (int j = 0; j < 5; ++j) {
    ParamModel m = random_rbf(rng);
    family.push_back([m](std::span<const double> x) { return model_value(m, x); });
  }
  Box box;
  std::vector<double> logm, logr;
  for (int m : {16, 64, 256, 1024}) {
    RademacherEstimate est = estimate_rademacher(family, box, m, 16, 8, Rng(7));
    CHECK(est.estimate > 0.0);
    logm.push_back(std::log(double(m)));
    logr.push_back(std::log(est.estimate));
  }
  double slope = fit_slope(logm, logr);
  CHECK(slope > -0.65);
  CHECK(slope < -0.35);
}

TEST_CASE("sampled-loss audit covers the observed gaps") {
  ProblemSpec prob = preset_problem("poisson1d_sin");
  Rng rng(88);
  std::vector<ParamModel> models;
  for (int j = 0; j < 2; ++j) models.push_back(random_rbf(rng, 3));

  std::vector<int> ms{64, 256};
  auto rows = loss_gap_audit(prob, models, 2.0, 1.0, ms, 20, 5);
  REQUIRE(rows.size() == 2);
  for (const LossGapRow& row : rows) {
    CHECK(row.rhs > 0.0);
    CHECK(row.coverage >= 0.95);
    CHECK(row.max_gap <= row.rhs);
  }
  CHECK(rows[1].mean_gap < rows[0].mean_gap);
  CHECK(rows[1].delta < rows[0].delta);
}

TEST_CASE("derivative-ratio probe matches the single-bump oracle") {
  auto rows = bernstein_probe({1, 4}, 6, 2.0, 9);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].max_ratio == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(rows[0].implied_m_r >= 2);
  CHECK(rows[1].implied_m_r > rows[0].implied_m_r);
  for (const BernsteinRow& row : rows) {
    CHECK(row.equivalence_ok);
    CHECK(row.worst_lower >= 4.0 / 7.0);
    CHECK(row.worst_upper <= 4.0);
  }
}

TEST_CASE("projected-loss error bound report") {
  HpBoundReport rep = hp_bound_report(0.02, 1.0, 0.0, 0.0);
  CHECK(rep.bound == doctest::Approx(0.2).epsilon(1e-12));
  HpBoundReport shifted = hp_bound_report(0.01, 2.0, 0.005, 0.025);
  CHECK(shifted.bound ==
        doctest::Approx(std::sqrt(2.0) / 2.0 * std::sqrt(0.04)).epsilon(1e-12));
  CHECK_THROWS_AS(hp_bound_report(0.01, 1.0, -1e-3, 0.0), std::runtime_error);
  HpBoundReport clamped = hp_bound_report(0.01, 1.0, -1e-12, 0.0);
  CHECK(clamped.eps_proj == 0.0);
}

TEST_CASE("sup norms of the residuals") {
  ProblemSpec prob = preset_problem("poisson1d_sin");
  const double w = 2.0 * kPi * 2.0;
  ParamModel adv = make_analytic(1, [w](std::span<const double> x) {
    auto t = jet_seed<double>(x[0], 0, 1);
    return sin(t * w) * (-1.0 / (w * w));
  });
  ProblemSpec zero = prob;
  zero.f = [](std::span<const double>) { return 0.0; };
  zero.g = [](std::span<const double>) { return 0.0; };
  Field<double> u = field_of(adv);
  CHECK(residual_sup_norm(zero, u) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(boundary_residual_sup_norm(zero, u) <= 1e-12);

  ProblemSpec inflow = preset_problem("advreac1d_friedrichs");
  Eigen::MatrixXd c1(1, 1);
  c1(0, 0) = 0.5;
  ParamModel flat = make_rbf(c1, 1.0, Eigen::VectorXd::Zero(1));
  Field<double> z = field_of(flat);
  CHECK(boundary_residual_sup_norm(inflow, z) == doctest::Approx(1.0).epsilon(1e-12));
}
