#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rmlab/problems.hpp"

namespace rmlab {

enum class LossForm { kContinuous, kDiscrete, kHpVrm, kRegularized, kPwconstWeak };

LossForm loss_form_from_string(const std::string& s);
std::string to_string(LossForm f);

enum class BasisKind { kLegendre, kPwconst };

BasisKind basis_kind_from_string(const std::string& s);
std::string to_string(BasisKind k);

// Axis-aligned cells tiling the domain, with a basis choice per cell. `order`
// is the number of polynomial degrees per axis (Legendre cells); piecewise
// constant cells carry the single normalized indicator.
struct Partition {
  std::vector<Box> cells;
  std::vector<BasisKind> basis;
  std::vector<int> order;
};

Partition uniform_partition(const Box& domain, int cells_per_axis, BasisKind kind, int order);

// disjoint interiors and total volume matching the domain (1e-12 relative)
void validate_partition(const Box& domain, const Partition& part);

struct BasisEntry {
  int cell = 0;
  std::array<int, 3> deg{0, 0, 0};
};

// Basis functions orthonormal with respect to the problem's interior
// probability density. Legendre cells require a uniform density; piecewise
// constant cells only need the cell mass.
struct BasisTable {
  int d = 1;
  Partition part;
  std::vector<BasisEntry> entries;
  std::vector<double> cell_scale;    // multiplies tensor Legendre products
  std::vector<int> first_entry;      // per cell: offset into entries
  std::vector<int> entry_count;      // per cell

  std::size_t size() const { return entries.size(); }
  // zero outside the entry's cell
  double eval(std::size_t idx, std::span<const double> x) const;
};

// verifies orthonormality against reference quadrature; deviation beyond
// 1e-8 is a construction error
BasisTable build_basis(const ProblemSpec& prob, const Partition& part);

// per-cell Gram blocks under reference quadrature (identity when orthonormal;
// cross-cell entries vanish by disjoint support and are not stored)
Eigen::MatrixXd basis_gram(const ProblemSpec& prob, const BasisTable& basis, int order = 0);

// coefficients (r, phi_i) in the weighted inner product
Eigen::VectorXd project(const ProblemSpec& prob, const BasisTable& basis, const ScalarField& r,
                        int order = 12);

// the projection image sum_i c_i phi_i as a plain field
ScalarField basis_expand(const BasisTable& basis, Eigen::VectorXd c);

struct LossBreakdown {
  double total = 0.0;
  double interior = 0.0;  // residual term, already raised to the p-th power
  double boundary = 0.0;  // boundary term before the tau factor
  bool quadrature_converged = true;
  double quadrature_rel_change = 0.0;
};

struct LossSpec {
  LossForm form = LossForm::kContinuous;
  double p = 2.0;
  double tau = 1.0;
  // discrete form
  int m_interior = 128;
  int m_boundary = 2;
  SampleKind sample_kind = SampleKind::kIidMc;
  // the boundary integral is low dimensional (two atoms when d == 1), so the
  // deterministic rule is the default; set kIidMc to study boundary sampling
  SampleKind boundary_sample = SampleKind::kGrid;
  std::uint64_t sample_seed = 0;
  // hp / piecewise-constant weak forms
  int cells_per_axis = 4;
  BasisKind basis = BasisKind::kLegendre;
  int basis_order = 8;
  bool integrate_by_parts = false;
  // regularized form
  double epsilon = 1e-4;
  // frozen quadrature used by LossEvaluator (continuous-type forms)
  int quad_order = 12;
  int quad_panels = 8;
  double quad_rel_tol = 1e-9;
};

// non-fatal spec complaints (tau below one, regularization smallness violated)
std::vector<std::string> loss_spec_warnings(const LossSpec& spec);

// minimal integer m with 2(m-1) < p <= 2m
int regularization_m(double p);

// the smallness condition 2(2m-p) eps (p-1)/p <= 1 behind the two-sided
// functional comparison
bool regularization_smallness_ok(double p, double epsilon);

// r^{2m} (r+eps)^{p-2m} and its exact derivative; accepts eps == 0 (plain
// power) and x == 0
std::pair<double, double> phi_regularizer(double x, double p, int m, double epsilon);

// reference (adaptively refined) losses of a twice-differentiable field
LossBreakdown loss_continuous(const ProblemSpec& prob, const Field<double>& u, double p,
                              double tau, int order = 12, double rel_tol = 1e-9);

LossBreakdown loss_discrete(const ProblemSpec& prob, const Field<double>& u, double p, double tau,
                            const SampleSet& interior, const SampleSet& boundary);

LossBreakdown loss_hp_vrm(const ProblemSpec& prob, const Field<double>& u, double tau,
                          const BasisTable& basis, int order = 12, double rel_tol = 1e-9);

LossBreakdown loss_pwconst_weak(const ProblemSpec& prob, const Field<double>& u, double tau,
                                const Partition& part, int order = 12, double rel_tol = 1e-9,
                                bool integrate_by_parts = false);

LossBreakdown loss_regularized(const ProblemSpec& prob, const Field<double>& u, double p,
                               double epsilon, double tau, int order = 12, double rel_tol = 1e-9);

// Frozen node sets shared by the plain and the taped paths, so the value the
// optimizer descends on is exactly the value reported. Construction samples
// (discrete form) or lays out quadrature (other forms) once.
class LossEvaluator {
 public:
  LossEvaluator(const ProblemSpec& prob, const LossSpec& spec);

  LossBreakdown eval(const ParamModel& model) const;
  ad::Var eval_taped(const ParamModel& model, std::span<const ad::Var> theta,
                     double* interior_out = nullptr, double* boundary_out = nullptr) const;

  const LossSpec& spec() const { return spec_; }
  const ProblemSpec& problem() const { return prob_; }
  // frozen interior node count (diagnostics)
  int interior_nodes() const { return int(xi_.rows()); }
  int boundary_nodes() const { return int(xb_.rows()); }

 private:
  template <class S>
  S accumulate(const Field<S>& u, double* interior_out, double* boundary_out) const;

  ProblemSpec prob_;
  LossSpec spec_;
  Eigen::MatrixXd xi_;  // interior nodes
  Eigen::VectorXd wi_;  // weights with the interior density folded in
  Eigen::MatrixXd xb_;  // boundary nodes
  Eigen::VectorXd wb_;  // weights with the boundary density and |b.n| folded in
  BasisTable basis_;    // hp / pwconst forms
  std::vector<int> node_cell_;
  int reg_m_ = 1;
};

}  // namespace rmlab
