#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rmlab/losses.hpp"

namespace rmlab {

enum class OptimAlgo { kAdam, kGd };

OptimAlgo optim_algo_from_string(const std::string& s);
std::string to_string(OptimAlgo a);

struct OptimConfig {
  OptimAlgo algo = OptimAlgo::kAdam;
  double step = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int max_iters = 2000;
  // stop when the running best improves by less than the slack over this many
  // iterations; slack 0 picks 1e-6 times the first loss
  int window = 200;
  double delta_slack = 0.0;
  std::uint64_t seed = 0;
  int record_every = 1;
};

struct TrajectoryRow {
  int iter = 0;
  double loss = 0.0;
  double interior = 0.0;
  double boundary = 0.0;
  double grad_norm = 0.0;
};

struct RunReport {
  std::string problem;
  std::string model_name;
  std::string status = "ok";  // "ok" or "nonfinite"
  LossSpec loss_spec;
  OptimConfig optim;
  std::vector<TrajectoryRow> trajectory;
  Eigen::VectorXd theta_final;
  double final_loss = 0.0;
  double final_interior = 0.0;
  double final_boundary = 0.0;
  int iters_run = 0;
  double wall_seconds = 0.0;
};

RunReport train(const LossEvaluator& loss, const ParamModel& model, const OptimConfig& opt);
RunReport train(const ProblemSpec& prob, const LossSpec& lspec, const ParamModel& model,
                const OptimConfig& opt);

// error bound computable from an achieved loss value: (1/c1) 2^{(p-1)/p} J^{1/p}
double aposteriori_bound(double j_value, double c1, double p);

// additive term of the regularized comparison: c_p (2m-p) eps (1+tau)
// (interior mass + boundary mass) / p, with c_p = 1 when p = 1 and 2 otherwise
double regularization_penalty(double p, double epsilon, double tau, double rho_mass,
                              double rho_b_mass);

// (2^{1-1/p}/c1) (c_p J_eps + penalty)^{1/p}
double aposteriori_bound_regularized(double j_eps, double c1, double p, double epsilon, double tau,
                                     double rho_mass, double rho_b_mass);

struct DiscreteBoundReport {
  double bound = 0.0;
  double q_probability = 0.0;  // product of the two confidence factors
  double q_interior = 0.0;
  double q_boundary = 0.0;
  bool vacuous = false;  // a factor dropped to zero or below at this (M, delta)
  double r_tilde = 0.0;
  double j_m = 0.0;
  double delta = 0.0;
};

DiscreteBoundReport discrete_bound_report(double j_m, double c1, double p, double rad_interior,
                                          double rad_boundary, double tau, double delta,
                                          double g_r, double g_b, int m_r, int m_b);

struct RademacherEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  int m = 0;
};

// Monte Carlo estimate of E sup_f |1/M sum_i e_i f(X_i)| over a finite family
// (the sup is exact); outer loop over sample draws, inner over sign draws
RademacherEstimate estimate_rademacher(const std::vector<ScalarField>& family, const Box& box,
                                       int m, int n_sign_trials, int n_sample_trials,
                                       const Rng& rng);

// same estimate against an arbitrary sampler (boundary atlases, collars)
RademacherEstimate estimate_rademacher_sampled(
    const std::vector<ScalarField>& family,
    const std::function<Eigen::MatrixXd(int, const Rng&)>& sampler, int d, int m,
    int n_sign_trials, int n_sample_trials, const Rng& rng);

struct LossGapRow {
  int m = 0;
  double mean_gap = 0.0;
  double stderr_gap = 0.0;
  double max_gap = 0.0;
  double rhs = 0.0;  // Rademacher right-hand side at the calibrated delta
  double delta = 0.0;
  double coverage = 0.0;  // fraction of trials with sup-gap <= rhs
};

// empirical check of the sampling gap |J^M - J| over a model family against
// twice the Rademacher complexity plus the calibrated slack
std::vector<LossGapRow> loss_gap_audit(const ProblemSpec& prob,
                                       const std::vector<ParamModel>& models, double p, double tau,
                                       const std::vector<int>& m_list, int trials,
                                       std::uint64_t seed);

struct BernsteinRow {
  int family_m = 0;      // separation parameter of the Gaussian family
  double max_ratio = 0;  // largest |v'|_{L2} / |v|_{L2} over sampled members
  int implied_m_r = 0;   // grid size making C M^{-beta} m <= 3/4
  bool equivalence_ok = false;
  double worst_lower = 0.0;  // min over members of |v|^2_Y / |v|^2_{Y_M}
  double worst_upper = 0.0;  // max over members of |v|^2_Y / |v|^2_{Y_M}
};

// empirical first-derivative (Bernstein-type) constants of Gaussian bump
// families and the grid size sufficient for two-sided discrete-norm control
std::vector<BernsteinRow> bernstein_probe(const std::vector<int>& m_list, int samples_per_m,
                                          double beta, std::uint64_t seed);

struct HpBoundReport {
  double bound = 0.0;
  double j_hp = 0.0;
  double delta_n = 0.0;
  double eps_proj = 0.0;
};

// sqrt(2)/c1 * sqrt(J + delta_n + eps_proj); eps_proj below -1e-10 is a
// numeric error (the projection deficit can never be negative), tiny negatives
// are clamped to zero
HpBoundReport hp_bound_report(double j_hp, double c1, double eps_proj, double delta_n);

// dense-grid sup norms of the residuals (post-hoc caps and the G constants of
// the probability factors)
double residual_sup_norm(const ProblemSpec& prob, const Field<double>& u,
                         int grid_per_axis = 512);
double boundary_residual_sup_norm(const ProblemSpec& prob, const Field<double>& u,
                                  int panels = 64);

}  // namespace rmlab
