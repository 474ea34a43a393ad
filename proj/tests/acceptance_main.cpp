// Acceptance suite: one line per criterion, [PASS] or [FAIL] plus the
// measured quantities, nonzero exit when anything fails. Each criterion is
// self-contained so a red line can be rerun and audited in isolation.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "rmlab/experiments.hpp"
#include "testutil.hpp"

using namespace rmlab;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void run_criterion(int number, const char* name, const std::function<Outcome()>& fn) {
  auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = fn();
  } catch (const std::exception& e) {
    out.pass = false;
    out.detail = std::string("exception: ") + e.what();
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("[%s] %2d %-38s %7.1fs  %s\n", out.pass ? "PASS" : "FAIL", number, name, secs,
              out.detail.c_str());
  std::fflush(stdout);
  if (!out.pass) ++g_failures;
}

ProblemSpec zero_poisson() {
  ProblemSpec prob;
  prob.name = "poisson1d_zero";
  prob.d = 1;
  prob.domain = Box{1, {0, 0, 0}, {1, 0, 0}};
  prob.op_kind = OperatorKind::kElliptic;
  prob.bc_kind = BoundaryKind::kDirichletTrace;
  EllipticCoeffs co;
  co.a = [](std::span<const double>) { return Eigen::Matrix3d(Eigen::Matrix3d::Identity()); };
  co.b = [](std::span<const double>) { return Eigen::Vector3d(Eigen::Vector3d::Zero()); };
  co.c = [](std::span<const double>) { return 0.0; };
  prob.elliptic = co;
  prob.f = [](std::span<const double>) { return 0.0; };
  prob.g = [](std::span<const double>) { return 0.0; };
  return prob;
}

ParamModel ripple(int k) {
  const double w = 2.0 * kPi * k;
  return make_analytic(
      1,
      [w](std::span<const double> x) {
        auto t = jet_seed<double>(x[0], 0, 1);
        return sin(t * w) * (-1.0 / (w * w));
      },
      "ripple");
}

ParamModel random_rbf(Rng& rng, int n = 4) {
  Eigen::MatrixXd centers(n, 1);
  for (int i = 0; i < n; ++i) centers(i, 0) = (0.5 + i) / n;
  Eigen::VectorXd coeffs(n);
  for (int i = 0; i < n; ++i) coeffs(i) = rng.normal();
  return make_rbf(centers, 2.0 * n, coeffs);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---- 1: the grid-sampling adversary ----

Outcome criterion_counterexample() {
  std::vector<CounterexampleRow> rows = scenario_counterexample({4, 8, 16, 64});
  double max_disc = 0.0, max_cont_dev = 0.0, min_gap = 1e300, max_norm_dev = 0.0;
  for (const CounterexampleRow& r : rows) {
    max_disc = std::max(max_disc, r.discrete_loss);
    max_cont_dev = std::max(max_cont_dev, std::abs(r.continuous_loss - 0.5));
    min_gap = std::min(min_gap, r.gap);
    max_norm_dev =
        std::max(max_norm_dev, std::abs(r.adversary_norm - r.adversary_norm_closed));
  }
  Outcome out;
  out.pass = max_disc <= 1e-12 && max_cont_dev <= 1e-6 && min_gap >= 0.5 - 1e-6;
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "max_discrete=%.2e cont_dev=%.2e min_gap=%.6f norm_dev=%.2e", max_disc,
                max_cont_dev, min_gap, max_norm_dev);
  out.detail = buf;
  return out;
}

// ---- 2: derivatives against finite differences ----

Outcome criterion_autodiff() {
  int comp_checked = 0, comp_bad = 0;
  Rng rng(424242);
  int trials = 0;
  while (comp_checked < 300 || trials < 100) {
    ++trials;
    int dim = 1 + int(rng.next_u64() % 3);
    auto comp = testutil::random_composition(rng, dim, 6 + int(rng.next_u64() % 8));
    std::array<double, 3> x{};
    for (int i = 0; i < dim; ++i) x[i] = rng.uniform(-1.5, 1.5);
    Jet2d jet = comp.eval<double>(x);
    if (!std::isfinite(jet.v)) continue;
    testutil::PointFn value_of = [&](const std::array<double, 3>& p) {
      return comp.eval<double>(p).v;
    };
    for (int i = 0; i < dim; ++i) {
      double ad = jet.d1(i);
      if (std::abs(ad) < 1e-3) continue;
      double fd = testutil::fd_d1(value_of, x, i, 1e-4);
      ++comp_checked;
      if (std::abs(ad - fd) > 1e-6 * std::abs(ad)) ++comp_bad;
    }
    for (int i = 0; i < dim; ++i) {
      for (int j = i; j < dim; ++j) {
        double ad = jet.d2(i, j);
        if (std::abs(ad) < 1e-3) continue;
        double fd = i == j ? testutil::fd_d2_diag(value_of, x, i, 2e-3)
                           : testutil::fd_d2_mixed(value_of, x, i, j, 2e-3);
        ++comp_checked;
        if (std::abs(ad - fd) > 1e-6 * std::abs(ad)) ++comp_bad;
      }
    }
    if (trials > 2000) break;
  }

  int grad_checked = 0, grad_bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ProblemSpec prob =
        preset_problem(trial % 2 == 0 ? "poisson1d_sin" : "advreac1d_friedrichs");
    LossSpec spec;
    spec.form = LossForm::kDiscrete;
    spec.m_interior = 8;
    spec.m_boundary = 2;
    spec.sample_seed = std::uint64_t(trial);
    LossEvaluator ev(prob, spec);
    ParamModel model = make_mlp(MlpArch{{1, 5, 1}, Activation::kTanh}, std::uint64_t(trial));
    Rng tr(std::uint64_t(900 + trial));
    for (Eigen::Index i = 0; i < model.theta.size(); ++i) {
      model.theta(i) = tr.uniform(-1.2, 1.2);
    }
    ParamModel work = model;
    auto [val, grad] = ad::grad_params(
        [&](std::span<const ad::Var> th) { return ev.eval_taped(work, th); },
        std::span<const double>(model.theta.data(), std::size_t(model.theta.size())));
    (void)val;
    double scale = 1e-3;
    for (double g : grad) scale = std::max(scale, std::abs(g));
    ParamModel shifted = model;
    for (Eigen::Index i = 0; i < model.theta.size(); ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(model.theta(i)));
      shifted.theta = model.theta;
      shifted.theta(i) += h;
      double up = ev.eval(shifted).total;
      shifted.theta(i) = model.theta(i) - h;
      double dn = ev.eval(shifted).total;
      double fd = (up - dn) / (2.0 * h);
      ++grad_checked;
      if (std::abs(grad[std::size_t(i)] - fd) >
          1e-5 * std::max(std::abs(grad[std::size_t(i)]), 1e-3 * scale)) {
        ++grad_bad;
      }
    }
  }

  Outcome out;
  out.pass = comp_bad == 0 && grad_bad == 0 && comp_checked >= 300 && grad_checked >= 1000;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "jet_checks=%d bad=%d grad_checks=%d bad=%d", comp_checked,
                comp_bad, grad_checked, grad_bad);
  out.detail = buf;
  return out;
}

// ---- 3: the smoothed power function ----

Outcome criterion_regularizer() {
  int violations = 0;
  long points = 0;
  for (double p : {1.0, 1.5, 2.0}) {
    int m = regularization_m(p);
    for (double eps : {0.1, 0.01, 1e-4}) {
      for (int i = 0; i < 1000; ++i) {
        double x = std::pow(10.0, -6.0 + 9.0 * i / 999.0);
        auto [phi, dphi] = phi_regularizer(x, p, m, eps);
        double xp = std::pow(x, p);
        double slack = 1e-12 * std::max(1.0, xp);
        ++points;
        if (!(phi <= xp + slack)) ++violations;
        if (!(xp <= phi + (2.0 * m - p) * eps * std::pow(x, p - 1.0) + slack)) ++violations;
        if (!(p * phi <= x * dphi + slack)) ++violations;
        if (!(x * dphi <= 2.0 * m * xp + slack)) ++violations;
      }
    }
  }

  ProblemSpec prob = preset_problem("poisson1d_sin");
  const double p = 1.5, eps = 0.01, tau = 1.0;
  double penalty = regularization_penalty(p, eps, tau, 1.0, 1.0);
  int func_bad = 0;
  Rng rng(5150);
  for (int trial = 0; trial < 20; ++trial) {
    ParamModel model = random_rbf(rng);
    Field<double> u = field_of(model);
    double j = loss_continuous(prob, u, p, tau).total;
    double j_eps = loss_regularized(prob, u, p, eps, tau).total;
    if (!(j_eps <= j + 1e-9)) ++func_bad;
    if (!(j <= 2.0 * j_eps + penalty + 1e-9)) ++func_bad;
  }

  Outcome out;
  out.pass = violations == 0 && func_bad == 0;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "grid_points=%ld violations=%d functional_bad=%d", points,
                violations, func_bad);
  out.detail = buf;
  return out;
}

// ---- 4: projection bases ----

Outcome criterion_basis() {
  ProblemSpec prob = preset_problem("poisson1d_sin");
  double max_gram_dev = 0.0;
  for (auto kind : {BasisKind::kLegendre, BasisKind::kPwconst}) {
    BasisTable basis = build_basis(prob, uniform_partition(prob.domain, 3, kind, 4));
    Eigen::MatrixXd g = basis_gram(prob, basis);
    Eigen::MatrixXd dev =
        g - Eigen::MatrixXd::Identity(Eigen::Index(basis.size()), Eigen::Index(basis.size()));
    max_gram_dev = std::max(max_gram_dev, dev.cwiseAbs().maxCoeff());
  }

  // the projected interior term can never exceed the continuous one
  BasisTable leg = build_basis(
      prob, uniform_partition(prob.domain, 4, BasisKind::kLegendre, 3));
  BasisTable pw = build_basis(prob, uniform_partition(prob.domain, 4, BasisKind::kPwconst, 1));
  int bessel_bad = 0;
  Rng rng(31337);
  for (int trial = 0; trial < 50; ++trial) {
    ParamModel model = random_rbf(rng, 3 + int(trial % 3));
    Field<double> u = field_of(model);
    double cont = loss_continuous(prob, u, 2.0, 1.0).interior;
    for (const BasisTable* basis : {&leg, &pw}) {
      double hp = loss_hp_vrm(prob, u, 1.0, *basis).interior;
      if (!(hp <= cont + 1e-10)) ++bessel_bad;
    }
  }

  // spectral decay of the deficit for a sinusoidal residual
  ProblemSpec zero = zero_poisson();
  ParamModel adv = ripple(4);
  Field<double> u = field_of(adv);
  double cont = loss_continuous(zero, u, 2.0, 1.0).interior;
  double prev = 1e300, last = 0.0;
  bool monotone = true;
  for (int order : {2, 4, 8, 12}) {
    BasisTable basis =
        build_basis(zero, uniform_partition(zero.domain, 4, BasisKind::kLegendre, order));
    double hp = loss_hp_vrm(zero, u, 1.0, basis).interior;
    double deficit = cont - hp;
    if (deficit > prev + 1e-12) monotone = false;
    prev = deficit;
    last = deficit;
  }

  Outcome out;
  out.pass = max_gram_dev <= 1e-10 && bessel_bad == 0 && monotone && last < 1e-6;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "gram_dev=%.2e bessel_bad=%d deficit(N=12)=%.2e monotone=%d",
                max_gram_dev, bessel_bad, last, int(monotone));
  out.detail = buf;
  return out;
}

// ---- 5: sample-mean and complexity decay rates ----

Outcome criterion_rates() {
  std::vector<int> m_list = {16, 32, 64, 128, 256, 512, 1024};
  auto f = [](std::span<const double> x) {
    return std::exp(std::sin(3.0 * x[0])) * (1.0 + 0.5 * x[0] * x[0]);
  };
  McProbeResult mc = mc_convergence_probe(f, Box{1, {0, 0, 0}, {1, 0, 0}}, m_list, 64, Rng(99));
  RademacherScan scan = scenario_rademacher("poisson1d_sin", m_list, 20, 8, 8, 17);

  Outcome out;
  out.pass = std::abs(mc.slope + 0.5) <= 0.15 && std::abs(scan.slope + 0.5) <= 0.15;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "mc_slope=%.3f complexity_slope=%.3f (target -0.5 +- 0.15)",
                mc.slope, scan.slope);
  out.detail = buf;
  return out;
}

// ---- 6: sampling gap vs complexity right-hand side ----

Outcome criterion_gap_coverage() {
  ProblemSpec prob = preset_problem("poisson1d_sin");
  Rng rng(64001);
  std::vector<ParamModel> models;
  for (int i = 0; i < 3; ++i) models.push_back(random_rbf(rng));
  std::vector<LossGapRow> rows = loss_gap_audit(prob, models, 2.0, 1.0, {64, 256, 1024}, 20, 5);
  double min_cov = 1.0;
  for (const LossGapRow& r : rows) min_cov = std::min(min_cov, r.coverage);

  Outcome out;
  out.pass = min_cov >= 0.95;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "min_coverage=%.3f over m={64,256,1024}, 20 trials", min_cov);
  out.detail = buf;
  return out;
}

// ---- 7: trained-error vs a posteriori bound ----

Outcome criterion_bound_soundness() {
  OptimConfig opt;
  opt.step = 1e-2;
  opt.max_iters = 1500;
  opt.window = 200;
  opt.record_every = 100;
  std::vector<BoundSoundnessRow> rows =
      scenario_bound_soundness({"poisson1d_sin", "advreac1d_friedrichs"}, {1, 2, 3, 4, 5, 6},
                               opt);
  int ok = 0, sound = 0, flagged = 0, hard = 0, failed = 0;
  double worst_ratio = 0.0;
  for (const BoundSoundnessRow& r : rows) {
    if (r.status != "ok") {
      ++failed;
      continue;
    }
    ++ok;
    worst_ratio = std::max(worst_ratio, r.ratio);
    if (r.sound) {
      ++sound;
    } else if (r.flagged) {
      ++flagged;
    } else {
      ++hard;
    }
  }

  Outcome out;
  out.pass = failed == 0 && hard == 0 && ok == 12;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "runs=%d sound=%d flagged=%d hard_fail=%d worst_ratio=%.3f",
                int(rows.size()), sound, flagged, hard, worst_ratio);
  out.detail = buf;
  return out;
}

// ---- 8: nonlocal operator oracles ----

Outcome criterion_fractional() {
  auto profile_jet = [](double s) {
    return [s](double t) {
      auto j = jet_seed<double>(t, 0, 1);
      auto w = 1.0 - j * j;
      if (w.v <= 0.0) return jet_const<double>(0.0, 1);
      return pow(w, s);
    };
  };
  auto profile_val = [](double s) {
    return [s](double t) {
      double w = 1.0 - t * t;
      return w > 0.0 ? std::pow(w, s) : 0.0;
    };
  };

  double worst_rel_std = 0.0, worst_ref_dev = 0.0, worst_norm_dev = 0.0;
  for (double alpha : {1.25, 1.5, 1.75}) {
    double s = 0.5 * alpha;
    auto jet = profile_jet(s);
    auto val = profile_val(s);

    std::vector<double> values;
    for (int i = 0; i <= 40; ++i) {
      double x = -0.9 + 1.8 * i / 40.0;
      values.push_back(
          apply_frac_lap<double>(alpha, 1.0, 2.0 + std::abs(x), jet, val, x));
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= double(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= double(values.size() - 1);
    worst_rel_std = std::max(worst_rel_std, std::sqrt(var) / std::abs(mean));

    auto second = [&](double t) { return jet(t).d2(0, 0); };
    for (double x : {-0.75, -0.3, 0.0, 0.4, 0.8}) {
      double got = apply_frac_lap<double>(alpha, 1.0, 2.0 + std::abs(x), jet, val, x);
      double ref = frac_lap_reference(alpha, 1.0, val, second, x);
      worst_ref_dev = std::max(worst_ref_dev, std::abs(got - ref) / std::abs(ref));
    }

    double want = frac_normalization_oracle(alpha);
    worst_norm_dev =
        std::max(worst_norm_dev, std::abs(frac_normalization(alpha) - want) / std::abs(want));
  }

  Outcome out;
  out.pass = worst_rel_std <= 1e-4 && worst_ref_dev <= 1e-6 && worst_norm_dev <= 1e-12;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "rel_std=%.2e ref_dev=%.2e norm_dev=%.2e", worst_rel_std,
                worst_ref_dev, worst_norm_dev);
  out.detail = buf;
  return out;
}

// ---- 9: capacity/sample-count trend ----

Outcome criterion_convergence_trend() {
  // fixed budget, no early stop: the plateau must come from capacity and
  // sample count, not from where the window rule happens to trigger
  OptimConfig opt;
  opt.step = 1e-2;
  opt.max_iters = 6000;
  opt.window = 400;
  opt.delta_slack = 1e-14;
  opt.record_every = 500;
  ConvergenceReport rep =
      scenario_convergence("poisson1d_sin", {8, 32}, {64, 1024}, {1, 2, 3}, opt);

  auto cell_at = [&](int n, int m) -> const ConvergenceCell* {
    for (const ConvergenceCell& c : rep.cells) {
      if (c.n == n && c.m == m) return &c;
    }
    return nullptr;
  };
  const ConvergenceCell* small = cell_at(8, 64);
  const ConvergenceCell* big = cell_at(32, 1024);

  Outcome out;
  if (!small || !big || small->median_error < 0 || big->median_error < 0) {
    out.detail = "missing cells or all runs failed";
    return out;
  }
  out.pass = big->median_error < small->median_error;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "err(n=8,m=64)=%.4e err(n=32,m=1024)=%.4e ok_runs=%d/%d",
                small->median_error, big->median_error, small->runs_ok + big->runs_ok,
                small->runs_ok + small->runs_failed + big->runs_ok + big->runs_failed);
  out.detail = buf;
  return out;
}

// ---- 10: reruns reproduce every byte ----

Outcome criterion_determinism() {
  const char* config =
      "[model]\nwidths = [1, 4, 1]\nseed = 3\n"
      "[loss]\nform = \"discrete_rm\"\nm_interior = 8\nm_boundary = 2\ntau = 5.0\n"
      "[optim]\nmax_iters = 40\nwindow = 40\nrecord_every = 10\n"
      "[sweep]\nseeds = [1, 2]\n";
  ExperimentConfig cfg = parse_experiment_config(config);
  fs::path dir_a = fs::temp_directory_path() / "rmlab_acc_det_a";
  fs::path dir_b = fs::temp_directory_path() / "rmlab_acc_det_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  run_experiment(cfg, dir_a.string());
  run_experiment(cfg, dir_b.string());
  bool files_equal = slurp(dir_a / "summary.csv") == slurp(dir_b / "summary.csv") &&
                     slurp(dir_a / "MANIFEST") == slurp(dir_b / "MANIFEST") &&
                     slurp(dir_a / "runs/run_0000.json") == slurp(dir_b / "runs/run_0000.json") &&
                     slurp(dir_a / "runs/run_0001.json") == slurp(dir_b / "runs/run_0001.json");
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);

  auto cex_a = scenario_counterexample({4, 16});
  auto cex_b = scenario_counterexample({4, 16});
  bool cex_equal = cex_a.size() == cex_b.size();
  for (std::size_t i = 0; cex_equal && i < cex_a.size(); ++i) {
    cex_equal = cex_a[i].discrete_loss == cex_b[i].discrete_loss &&
                cex_a[i].continuous_loss == cex_b[i].continuous_loss &&
                cex_a[i].adversary_norm == cex_b[i].adversary_norm;
  }

  RademacherScan scan_a = scenario_rademacher("poisson1d_sin", {32, 64}, 5, 4, 4, 7);
  RademacherScan scan_b = scenario_rademacher("poisson1d_sin", {32, 64}, 5, 4, 4, 7);
  bool scan_equal = scan_a.slope == scan_b.slope && scan_a.rows.size() == scan_b.rows.size();
  for (std::size_t i = 0; scan_equal && i < scan_a.rows.size(); ++i) {
    scan_equal = scan_a.rows[i].estimate == scan_b.rows[i].estimate &&
                 scan_a.rows[i].stderr_ == scan_b.rows[i].stderr_;
  }

  Outcome out;
  out.pass = files_equal && cex_equal && scan_equal;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "artifacts_equal=%d scenario_equal=%d scan_equal=%d",
                int(files_equal), int(cex_equal), int(scan_equal));
  out.detail = buf;
  return out;
}

}  // namespace

int main() {
  std::printf("acceptance suite (tool %s)\n", kToolVersion);
  run_criterion(1, "grid-sampling counterexample", criterion_counterexample);
  run_criterion(2, "derivatives vs finite differences", criterion_autodiff);
  run_criterion(3, "regularizer sandwich bounds", criterion_regularizer);
  run_criterion(4, "basis orthonormality and projection", criterion_basis);
  run_criterion(5, "sample-mean and complexity rates", criterion_rates);
  run_criterion(6, "sampling-gap coverage", criterion_gap_coverage);
  run_criterion(7, "error-bound soundness", criterion_bound_soundness);
  run_criterion(8, "nonlocal operator oracles", criterion_fractional);
  run_criterion(9, "capacity and sample-count trend", criterion_convergence_trend);
  run_criterion(10, "deterministic reruns", criterion_determinism);
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
