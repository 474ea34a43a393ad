#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rmlab/frac_lap.hpp"
#include "rmlab/models.hpp"
#include "rmlab/quadrature.hpp"
#include "rmlab/sampling.hpp"

namespace rmlab {

using ScalarField = std::function<double(std::span<const double>)>;

enum class OperatorKind { kElliptic, kAdvectionReaction, kFractionalAdr };
enum class BoundaryKind { kDirichletTrace, kInflowTrace, kExteriorIdentity };
enum class VNorm { kL2, kH1, kHhalfSurrogate, kGraphLp, kHalphaSurrogate };

std::string to_string(OperatorKind k);
std::string to_string(BoundaryKind k);
std::string to_string(VNorm k);

// -sum_ij a_ij(x) d_i d_j u + sum_i b_i(x) d_i u + c(x) u
struct EllipticCoeffs {
  std::function<Eigen::Matrix3d(std::span<const double>)> a;
  std::function<Eigen::Vector3d(std::span<const double>)> b;
  ScalarField c;
};

// b(x) . grad u + c(x) u with data prescribed on the inflow part of the boundary
struct AdvectionCoeffs {
  std::function<Eigen::Vector3d(std::span<const double>)> b;
  ScalarField c;
  ScalarField div_b;  // optional; finite differences are used when absent
};

// fractional diffusion (order alpha) + drift + reaction, d = 1 only
struct FractionalCoeffs {
  double alpha = 1.5;
  ScalarField b;
  ScalarField c;
  double support_radius = 1.0;
  double tail_start = 0.0;    // 0 -> chosen as R + max|x| + 1 automatically
  double collar_width = 1.0;  // exterior band carrying the identity constraint
  FracQuadScheme scheme;
};

struct ProblemSpec {
  std::string name;
  int d = 1;
  Box domain;
  OperatorKind op_kind = OperatorKind::kElliptic;
  BoundaryKind bc_kind = BoundaryKind::kDirichletTrace;
  std::optional<EllipticCoeffs> elliptic;
  std::optional<AdvectionCoeffs> advection;
  std::optional<FractionalCoeffs> fractional;
  ScalarField f;  // interior data
  ScalarField g;  // boundary data
  double p = 2.0;
  ScalarField rho;    // interior density; empty = uniform (normalized)
  ScalarField rho_b;  // boundary density; empty = uniform (normalized)
  VNorm v_norm = VNorm::kL2;
  std::optional<std::function<Jet2d(std::span<const double>)>> exact;
};

// a scalar field together with its jets, in whichever scalar type
template <class S>
struct Field {
  std::function<Jet2<S>(std::span<const double>)> jet;
  std::function<S(std::span<const double>)> value;
};

// the referenced model must outlive the returned field
Field<double> field_of(const ParamModel& model);
Field<ad::Var> field_of_taped(const ParamModel& model, std::vector<ad::Var> theta);
Field<double> field_of_exact(const ProblemSpec& prob);

double interior_density(const ProblemSpec& prob, std::span<const double> x);
double boundary_density(const ProblemSpec& prob, std::span<const double> x);

// interior operator applied at x
template <class S>
S apply_interior_operator(const ProblemSpec& prob, const Field<S>& u, std::span<const double> x) {
  switch (prob.op_kind) {
    case OperatorKind::kElliptic: {
      const auto& co = *prob.elliptic;
      Jet2<S> j = u.jet(x);
      Eigen::Matrix3d a = co.a(x);
      Eigen::Vector3d b = co.b(x);
      S acc = j.v * co.c(x);
      for (int i = 0; i < prob.d; ++i) {
        acc = acc + j.d1(i) * b(i);
        for (int k = 0; k < prob.d; ++k) acc = acc - j.d2(i, k) * a(i, k);
      }
      return acc;
    }
    case OperatorKind::kAdvectionReaction: {
      const auto& co = *prob.advection;
      Jet2<S> j = u.jet(x);
      Eigen::Vector3d b = co.b(x);
      S acc = j.v * co.c(x);
      for (int i = 0; i < prob.d; ++i) acc = acc + j.d1(i) * b(i);
      return acc;
    }
    case OperatorKind::kFractionalAdr: {
      const auto& co = *prob.fractional;
      const double xx = x[0];
      double tail = co.tail_start;
      if (tail <= 0.0) tail = co.support_radius + std::abs(xx) + 1.0;
      auto jet1 = [&](double t) {
        return u.jet(std::span<const double>(&t, 1));
      };
      auto val1 = [&](double t) {
        return u.value(std::span<const double>(&t, 1));
      };
      S frac = apply_frac_lap<S>(co.alpha, co.support_radius, tail, jet1, val1, xx, co.scheme);
      Jet2<S> j = u.jet(x);
      return frac + j.d1(0) * co.b(x) + j.v * co.c(x);
    }
  }
  throw std::invalid_argument("unknown operator kind");
}

// boundary operator (a trace for every supported kind)
template <class S>
S apply_boundary_operator(const ProblemSpec&, const Field<S>& u, std::span<const double> x) {
  return u.value(x);
}

// boundary geometry: faces of the box, the inflow subset, or the exterior collar
struct BoundaryGeom {
  bool is_collar = false;
  BoundaryAtlas atlas;
  std::vector<Box> collar;
  double collar_measure = 0.0;
  // multiplicative weight inside boundary norms (|b . n| on inflow parts, else 1)
  std::function<double(std::span<const double>)> weight;
};

BoundaryGeom boundary_geom(const ProblemSpec& prob);

SampleSet sample_problem_interior(const ProblemSpec& prob, int m, SampleKind kind, const Rng& rng);
SampleSet sample_problem_boundary(const ProblemSpec& prob, int m, SampleKind kind, const Rng& rng);

// quadrature over the boundary with probability-style weights (sum to 1
// against the uniform boundary density)
Quadrature boundary_quadrature(const ProblemSpec& prob, int order, int panels);

// continuous residual norms of an arbitrary scalar function over the domain
NormResult interior_norm(const ProblemSpec& prob, const ScalarField& fn, double p,
                         int order = 12, double rel_tol = 1e-9);
// boundary norm including the inflow weight and boundary density
NormResult boundary_norm(const ProblemSpec& prob, const ScalarField& fn, double p,
                         int order = 12, double rel_tol = 1e-9);

// solution-space distance |u - v|_V for the problem's v_norm
double v_norm_distance(const ProblemSpec& prob, const Field<double>& u, const Field<double>& v);

// norm of a single field in a chosen space (used by the stability probes)
enum class SpaceNorm { kL2, kH1, kH2, kGraphLp, kHalphaSurrogate };
double space_norm(const ProblemSpec& prob, const Field<double>& w, SpaceNorm norm);

struct StabilityProbeRow {
  std::string member;
  double ratio_v = 0.0;  // (|Au|_Y + |Bu|_Z) / |u|_V
  double ratio_x = 0.0;  // (|Au|_Y + |Bu|_Z) / |u|_X
};

struct StabilityProbe {
  double c1_hat = 0.0;  // min ratio_v: empirical lower-bound constant
  double c2_hat = 0.0;  // max ratio_x: empirical upper-bound constant
  std::vector<StabilityProbeRow> rows;
};

StabilityProbe probe_stability_constant(const ProblemSpec& prob,
                                        const std::vector<ParamModel>& family);

// smallest value of c - (1/p) div b over a dense interior sample
double probe_friedrichs(const ProblemSpec& prob, int samples_per_axis = 64);

// ratio |v|_{L^p} / |v|_{graph} upper bound over a family (inflow-vanishing
// members): empirical Poincare constant of the graph space
double probe_graph_poincare(const ProblemSpec& prob, const std::vector<ParamModel>& family);

// space-time recast of d_t u + b . grad u + c u = f as a steady advection
// problem in d+1 variables, with time as the last coordinate
struct TimeDependentData {
  int d_space = 1;
  Box space_domain;
  double t_final = 1.0;
  std::function<Eigen::Vector3d(std::span<const double>)> b;  // spatial velocity
  ScalarField c;       // reaction (of the space variable)
  ScalarField f;       // interior data on space x time
  ScalarField u0;      // initial condition
  ScalarField g_in;    // lateral inflow data on space x time
  double p = 2.0;
};

ProblemSpec recast_time_dependent(const TimeDependentData& data);

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> messages;
};

// manufactured-solution consistency (A[exact] = f, B[exact] = g) plus basic
// structural checks; tolerances are looser for the nonlocal operator
ValidationReport validate_problem(const ProblemSpec& prob, int n_points = 1000,
                                  std::uint64_t seed = 1234);

ProblemSpec preset_problem(const std::string& name);
std::vector<std::string> preset_names();

}  // namespace rmlab
