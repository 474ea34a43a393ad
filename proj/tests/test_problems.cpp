#include <cmath>

#include "rmlab/problems.hpp"
#include "testutil.hpp"
#include <doctest.h>

using namespace rmlab;

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;

ParamModel sine_mode(int k) {
  const double w = k * kPi;
  return make_analytic(
      1,
      [w](std::span<const double> x) {
        auto t = jet_seed<double>(x[0], 0, 1);
        return sin(t * w);
      },
      "sin_" + std::to_string(k));
}

}  // namespace

TEST_CASE("kind names") {
  CHECK(to_string(OperatorKind::kElliptic) == "elliptic");
  CHECK(to_string(BoundaryKind::kInflowTrace) == "inflow_trace");
  CHECK(to_string(VNorm::kGraphLp) == "graph_lp");
}

TEST_CASE("all presets pass the manufactured-solution validation") {
  for (const auto& name : preset_names()) {
    ProblemSpec prob = preset_problem(name);
    ValidationReport rep = validate_problem(prob, 200, 99);
    for (const auto& m : rep.messages) {
      INFO(name << ": " << m);
      CHECK(false);
    }
    CHECK(rep.ok);
  }
  CHECK_THROWS_AS(preset_problem("nope"), std::invalid_argument);
}

TEST_CASE("validation flags inconsistent data") {
  ProblemSpec prob = preset_problem("poisson1d_sin");
  auto f0 = prob.f;
  prob.f = [f0](std::span<const double> x) { return f0(x) + 0.1; };
  ValidationReport rep = validate_problem(prob, 50, 7);
  CHECK_FALSE(rep.ok);
  CHECK_FALSE(rep.messages.empty());
}

TEST_CASE("interior operator on frozen elliptic oracle") {
  ProblemSpec prob;
  prob.d = 2;
  prob.domain = Box{2, {0, 0, 0}, {1, 1, 0}};
  prob.op_kind = OperatorKind::kElliptic;
  EllipticCoeffs co;
  co.a = [](std::span<const double>) {
    Eigen::Matrix3d a = Eigen::Matrix3d::Identity();
    a(0, 0) = 2.0;
    a(0, 1) = a(1, 0) = 0.5;
    a(1, 1) = 1.0;
    return a;
  };
  co.b = [](std::span<const double>) { return Eigen::Vector3d(1.0, -1.0, 0.0); };
  co.c = [](std::span<const double>) { return 2.0; };
  prob.elliptic = co;
  Field<double> u;
  u.jet = [](std::span<const double> x) {
    auto a = jet_seed<double>(x[0], 0, 2);
    auto b = jet_seed<double>(x[1], 1, 2);
    return a * a + a * b * 2.0 + b * b * 3.0;
  };
  u.value = [](std::span<const double> x) {
    return x[0] * x[0] + 2.0 * x[0] * x[1] + 3.0 * x[1] * x[1];
  };
  const double pt[2] = {0.4, 0.7};
  CHECK(apply_interior_operator(prob, u, std::span<const double>(pt, 2)) ==
        doctest::Approx(-10.42).epsilon(1e-13));
}

TEST_CASE("interior operator matches data on the first preset") {
  ProblemSpec prob = preset_problem("poisson1d_sin");
  Field<double> u = field_of_exact(prob);
  const double x = 0.3;
  auto xs = std::span<const double>(&x, 1);
  CHECK(apply_interior_operator(prob, u, xs) ==
        doctest::Approx(7.984677688239066).epsilon(1e-13));
  CHECK(apply_interior_operator(prob, u, xs) == doctest::Approx(prob.f(xs)).epsilon(1e-13));
}

TEST_CASE("boundary geometry per kind") {
  SUBCASE("dirichlet box") {
    ProblemSpec prob = preset_problem("poisson1d_sin");
    BoundaryGeom geom = boundary_geom(prob);
    CHECK_FALSE(geom.is_collar);
    CHECK(geom.atlas.faces.size() == 2);
    const double zero = 0.0;
    CHECK(geom.weight(std::span<const double>(&zero, 1)) == 1.0);
  }
  SUBCASE("single inflow atom") {
    ProblemSpec prob = preset_problem("advreac1d_friedrichs");
    BoundaryGeom geom = boundary_geom(prob);
    REQUIRE(geom.atlas.faces.size() == 1);
    CHECK(geom.atlas.faces[0].axis == 0);
    CHECK_FALSE(geom.atlas.faces[0].upper);
    const double zero = 0.0;
    CHECK(geom.weight(std::span<const double>(&zero, 1)) == doctest::Approx(1.0));
  }
  SUBCASE("spacetime inflow is lateral inflow plus initial time") {
    ProblemSpec prob = preset_problem("advreac_spacetime");
    BoundaryGeom geom = boundary_geom(prob);
    REQUIRE(geom.atlas.faces.size() == 2);
    bool lateral = false, bottom = false;
    for (const Face& f : geom.atlas.faces) {
      if (f.axis == 0 && !f.upper) lateral = true;
      if (f.axis == 1 && !f.upper) bottom = true;
    }
    CHECK(lateral);
    CHECK(bottom);
  }
  SUBCASE("zero velocity leaves only the initial-time face") {
    TimeDependentData data;
    data.d_space = 1;
    data.space_domain = Box{1, {0, 0, 0}, {1, 0, 0}};
    data.t_final = 2.0;
    data.b = [](std::span<const double>) { return Eigen::Vector3d::Zero(); };
    data.c = [](std::span<const double>) { return 1.0; };
    data.f = [](std::span<const double>) { return 0.0; };
    data.u0 = [](std::span<const double>) { return 1.0; };
    data.g_in = [](std::span<const double>) { return 0.0; };
    ProblemSpec prob = recast_time_dependent(data);
    CHECK(prob.d == 2);
    CHECK(prob.domain.hi[1] == 2.0);
    BoundaryGeom geom = boundary_geom(prob);
    REQUIRE(geom.atlas.faces.size() == 1);
    CHECK(geom.atlas.faces[0].axis == 1);
    CHECK_FALSE(geom.atlas.faces[0].upper);
  }
  SUBCASE("sign-changing velocity across one face is rejected") {
    ProblemSpec prob;
    prob.d = 2;
    prob.domain = Box{2, {0, 0, 0}, {1, 1, 0}};
    prob.op_kind = OperatorKind::kAdvectionReaction;
    prob.bc_kind = BoundaryKind::kInflowTrace;
    AdvectionCoeffs co;
    co.b = [](std::span<const double> x) { return Eigen::Vector3d(x[1] - 0.5, 0.0, 0.0); };
    co.c = [](std::span<const double>) { return 1.0; };
    prob.advection = co;
    CHECK_THROWS_AS(boundary_geom(prob), std::invalid_argument);
  }
  SUBCASE("exterior collar bands") {
    ProblemSpec prob = preset_problem("frac_adr_1d");
    BoundaryGeom geom = boundary_geom(prob);
    CHECK(geom.is_collar);
    REQUIRE(geom.collar.size() == 2);
    CHECK(geom.collar[0].lo[0] == doctest::Approx(-2.0));
    CHECK(geom.collar[0].hi[0] == doctest::Approx(-1.0));
    CHECK(geom.collar[1].lo[0] == doctest::Approx(1.0));
    CHECK(geom.collar[1].hi[0] == doctest::Approx(2.0));
    CHECK(geom.collar_measure == doctest::Approx(2.0));
  }
}

TEST_CASE("boundary sampling and quadrature weights are probability weights") {
  SUBCASE("dirichlet 1d atoms") {
    ProblemSpec prob = preset_problem("poisson1d_sin");
    Quadrature q = boundary_quadrature(prob, 8, 1);
    REQUIRE(q.pts.rows() == 2);
    CHECK(q.w.sum() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(q.w(0) == doctest::Approx(0.5));
  }
  SUBCASE("square perimeter") {
    ProblemSpec prob = preset_problem("poisson2d_product");
    Quadrature q = boundary_quadrature(prob, 6, 2);
    CHECK(q.w.sum() == doctest::Approx(1.0).epsilon(1e-13));
    for (Eigen::Index i = 0; i < q.pts.rows(); ++i) {
      const bool on_x = q.pts(i, 0) == 0.0 || q.pts(i, 0) == 1.0;
      const bool on_y = q.pts(i, 1) == 0.0 || q.pts(i, 1) == 1.0;
      CHECK((on_x || on_y));
    }
  }
  SUBCASE("collar quadrature") {
    ProblemSpec prob = preset_problem("frac_adr_1d");
    Quadrature q = boundary_quadrature(prob, 8, 4);
    CHECK(q.w.sum() == doctest::Approx(1.0).epsilon(1e-13));
    for (Eigen::Index i = 0; i < q.pts.rows(); ++i) {
      CHECK(std::abs(q.pts(i, 0)) > 1.0);
      CHECK(std::abs(q.pts(i, 0)) < 2.0);
    }
  }
  SUBCASE("collar sampling") {
    ProblemSpec prob = preset_problem("frac_adr_1d");
    SampleSet s = sample_problem_boundary(prob, 16, SampleKind::kIidMc, Rng(5));
    CHECK(s.pts.rows() == 16);
    CHECK(s.w.sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (Eigen::Index i = 0; i < s.pts.rows(); ++i) {
      CHECK(std::abs(s.pts(i, 0)) > 1.0);
      CHECK(std::abs(s.pts(i, 0)) < 2.0);
    }
  }
  SUBCASE("interior sampling passthrough and density guard") {
    ProblemSpec prob = preset_problem("poisson1d_sin");
    SampleSet s = sample_problem_interior(prob, 32, SampleKind::kGrid, Rng(1));
    CHECK(s.pts.rows() == 32);
    prob.rho = [](std::span<const double>) { return 1.0; };
    CHECK_THROWS_AS(sample_problem_interior(prob, 8, SampleKind::kIidMc, Rng(1)),
                    std::invalid_argument);
  }
}

TEST_CASE("interior and boundary norms against closed forms") {
  ProblemSpec prob = preset_problem("poisson1d_sin");
  auto sine = [](std::span<const double> x) { return std::sin(kPi * x[0]); };
  CHECK(interior_norm(prob, sine, 2.0).value ==
        doctest::Approx(0.70710678118654752).epsilon(1e-12));
  CHECK(interior_norm(prob, sine, 4.0).value ==
        doctest::Approx(0.78254229003664366).epsilon(1e-12));
  auto affine = [](std::span<const double> x) { return x[0] + 1.0; };
  CHECK(boundary_norm(prob, affine, 2.0).value ==
        doctest::Approx(1.5811388300841897).epsilon(1e-13));

  ProblemSpec adv = preset_problem("advreac1d_friedrichs");
  auto one = [](std::span<const double>) { return 1.0; };
  CHECK(boundary_norm(adv, one, 2.0).value == doctest::Approx(1.0).epsilon(1e-13));

  ProblemSpec st = preset_problem("advreac_spacetime");
  CHECK(boundary_norm(st, one, 2.0).value == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("solution-space norms of the first sine mode") {
  ProblemSpec prob = preset_problem("poisson1d_sin");
  Field<double> u = field_of_exact(prob);
  CHECK(space_norm(prob, u, SpaceNorm::kL2) ==
        doctest::Approx(0.70710678118654752).epsilon(1e-10));
  CHECK(space_norm(prob, u, SpaceNorm::kH1) ==
        doctest::Approx(2.3312662225804841).epsilon(1e-10));
  CHECK(space_norm(prob, u, SpaceNorm::kH2) ==
        doctest::Approx(7.3579445307467423).epsilon(1e-10));

  Field<double> zero;
  zero.jet = [](std::span<const double>) { return jet_const<double>(0.0, 1); };
  zero.value = [](std::span<const double>) { return 0.0; };
  CHECK(v_norm_distance(prob, u, zero) == doctest::Approx(0.70710678118654752).epsilon(1e-10));

  ProblemSpec adv = preset_problem("advreac1d_friedrichs");
  ParamModel mode = sine_mode(1);
  Field<double> w = field_of(mode);
  CHECK(space_norm(adv, w, SpaceNorm::kGraphLp) ==
        doctest::Approx(2.3312662225804841).epsilon(1e-10));
}

TEST_CASE("fractional surrogate norm is a norm") {
  ProblemSpec prob = preset_problem("frac_adr_1d");
  Field<double> u = field_of_exact(prob);
  double n1 = space_norm(prob, u, SpaceNorm::kHalphaSurrogate);
  CHECK(n1 > 0.0);
  Field<double> u2;
  u2.jet = [&u](std::span<const double> x) { return u.jet(x) * 2.0; };
  u2.value = [&u](std::span<const double> x) { return 2.0 * u.value(x); };
  double n2 = space_norm(prob, u2, SpaceNorm::kHalphaSurrogate);
  CHECK(n2 == doctest::Approx(2.0 * n1).epsilon(1e-9));
}

TEST_CASE("stability probe reproduces the sine-family spectrum") {
  ProblemSpec prob = preset_problem("poisson1d_sin");
  std::vector<ParamModel> family;
  for (int k = 1; k <= 6; ++k) family.push_back(sine_mode(k));
  StabilityProbe probe = probe_stability_constant(prob, family);
  REQUIRE(probe.rows.size() == 6);
  for (int k = 1; k <= 6; ++k) {
    CHECK(probe.rows[std::size_t(k - 1)].ratio_v ==
          doctest::Approx(k * k * kPi * kPi).epsilon(1e-7));
  }
  CHECK(probe.c1_hat == doctest::Approx(kPi * kPi).epsilon(1e-7));
  // ratios against the stronger norm approach 1 from below
  CHECK(probe.c2_hat < 1.0);
  CHECK(probe.c2_hat > 0.9);
}

TEST_CASE("positivity probe") {
  ProblemSpec adv = preset_problem("advreac1d_friedrichs");
  CHECK(probe_friedrichs(adv, 128) == doctest::Approx(1.0).epsilon(1e-14));

  // divergence through finite differences when no closed form is attached
  ProblemSpec prob;
  prob.d = 1;
  prob.domain = Box{1, {0, 0, 0}, {1, 0, 0}};
  prob.op_kind = OperatorKind::kAdvectionReaction;
  prob.bc_kind = BoundaryKind::kInflowTrace;
  AdvectionCoeffs co;
  co.b = [](std::span<const double> x) { return Eigen::Vector3d(x[0], 0.0, 0.0); };
  co.c = [](std::span<const double>) { return 2.0; };
  prob.advection = co;
  prob.p = 2.0;
  CHECK(probe_friedrichs(prob, 64) == doctest::Approx(1.5).epsilon(1e-8));
}

TEST_CASE("graph-space smallness ratio of inflow-vanishing modes") {
  ProblemSpec adv = preset_problem("advreac1d_friedrichs");
  std::vector<ParamModel> family;
  for (int k = 1; k <= 4; ++k) family.push_back(sine_mode(k));
  double c = probe_graph_poincare(adv, family);
  CHECK(c > 0.0);
  CHECK(c < 1.0);  // |v| <= |v|_graph by construction of the graph norm
}

TEST_CASE("space-time recast wiring") {
  ProblemSpec st = preset_problem("advreac_spacetime");
  CHECK(st.d == 2);
  CHECK(st.op_kind == OperatorKind::kAdvectionReaction);
  const double bottom[2] = {0.3, 0.0};
  CHECK(st.g(std::span<const double>(bottom, 2)) ==
        doctest::Approx(std::sin(0.3 * kPi)).epsilon(1e-15));
  const double lateral[2] = {0.0, 0.4};
  CHECK(st.g(std::span<const double>(lateral, 2)) ==
        doctest::Approx(std::exp(-0.4) * std::sin(-0.4 * kPi)).epsilon(1e-15));
  auto b = st.advection->b(std::span<const double>(bottom, 2));
  CHECK(b(0) == 1.0);
  CHECK(b(1) == 1.0);
  CHECK_THROWS_AS(
      [] {
        TimeDependentData bad;
        bad.t_final = -1.0;
        return recast_time_dependent(bad);
      }(),
      std::invalid_argument);
}

TEST_CASE("taped interior residual gradient matches finite differences") {
  ProblemSpec prob = preset_problem("poisson1d_sin");
  MlpArch arch;
  arch.widths = {1, 4, 1};
  arch.act = Activation::kTanh;
  ParamModel model = make_mlp(arch, 77);
  const double x = 0.37;
  auto xs = std::span<const double>(&x, 1);
  auto theta0 =
      std::span<const double>(model.theta.data(), std::size_t(model.theta.size()));

  auto residual_at = [&](std::span<const double> theta) {
    ParamModel m = model;
    m.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(), Eigen::Index(theta.size()));
    Field<double> u = field_of(m);
    return apply_interior_operator(prob, u, xs) - prob.f(xs);
  };

  auto [val, grad] = ad::grad_params(
      [&](std::span<const ad::Var> theta) {
        std::vector<ad::Var> tv(theta.begin(), theta.end());
        Field<ad::Var> u = field_of_taped(model, tv);
        ad::Var r = apply_interior_operator(prob, u, xs);
        return r - prob.f(xs);
      },
      theta0);
  CHECK(val == doctest::Approx(residual_at(theta0)).epsilon(1e-14));

  std::vector<double> theta(theta0.begin(), theta0.end());
  int checked = 0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double h = 1e-5;
    double keep = theta[i];
    theta[i] = keep + h;
    double up = residual_at(theta);
    theta[i] = keep - h;
    double dn = residual_at(theta);
    theta[i] = keep;
    double fd = (up - dn) / (2.0 * h);
    if (std::abs(grad[i]) > 1e-6 || std::abs(fd) > 1e-6) {
      CHECK(grad[i] == doctest::Approx(fd).epsilon(2e-5));
      ++checked;
    }
  }
  CHECK(checked > 5);
}

TEST_CASE("taped fractional residual gradient matches finite differences") {
  ProblemSpec prob = preset_problem("frac_adr_1d");
  Eigen::MatrixXd centers(3, 1);
  centers << -0.6, 0.0, 0.6;
  Eigen::VectorXd coeffs(3);
  coeffs << 0.4, -0.3, 0.2;
  ParamModel model = make_rbf(centers, 2.0, coeffs);
  const double x = 0.21;
  auto xs = std::span<const double>(&x, 1);
  auto theta0 =
      std::span<const double>(model.theta.data(), std::size_t(model.theta.size()));

  auto value_at = [&](std::span<const double> theta) {
    ParamModel m = model;
    m.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(), Eigen::Index(theta.size()));
    Field<double> u = field_of(m);
    return apply_interior_operator(prob, u, xs);
  };

  auto [val, grad] = ad::grad_params(
      [&](std::span<const ad::Var> theta) {
        std::vector<ad::Var> tv(theta.begin(), theta.end());
        Field<ad::Var> u = field_of_taped(model, tv);
        return apply_interior_operator(prob, u, xs);
      },
      theta0);
  CHECK(val == doctest::Approx(value_at(theta0)).epsilon(1e-12));

  std::vector<double> theta(theta0.begin(), theta0.end());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    // quadrature rounding noise (~1e-9 per eval) is amplified by 1/h
    const double h = 1e-4;
    double keep = theta[i];
    theta[i] = keep + h;
    double up = value_at(theta);
    theta[i] = keep - h;
    double dn = value_at(theta);
    theta[i] = keep;
    CHECK(grad[i] == doctest::Approx((up - dn) / (2.0 * h)).epsilon(1e-4));
  }
}

TEST_CASE("exact fields require an attached solution") {
  ProblemSpec prob = preset_problem("poisson1d_sin");
  prob.exact.reset();
  CHECK_THROWS_AS(field_of_exact(prob), std::invalid_argument);
}
