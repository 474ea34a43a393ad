#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rmlab/losses.hpp"
#include "rmlab/toml_lite.hpp"
#include "rmlab/training.hpp"

namespace rmlab {

inline constexpr const char* kToolVersion = "0.1.0";

// raised on schema violations; the message carries section, key and line
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelTemplate {
  std::string kind = "mlp";  // mlp | rbf
  std::vector<int> widths{1, 16, 16, 1};
  Activation activation = Activation::kTanh;
  int centers = 8;  // rbf: grid of centers per axis
  std::uint64_t seed = 1;
};

// sweep axes; an empty list keeps the base value. Expansion order is fixed:
// n, m_interior, m_boundary, tau, p, epsilon, seeds (innermost).
struct SweepSpec {
  std::vector<int> n;
  std::vector<int> m_interior;
  std::vector<int> m_boundary;
  std::vector<double> tau;
  std::vector<double> p;
  std::vector<double> epsilon;
  std::vector<std::uint64_t> seeds;
};

struct OutputSpec {
  std::string dir = "out";
  bool write_json = true;
  bool write_csv = true;
};

struct ExperimentConfig {
  std::string preset = "poisson1d_sin";
  double c1 = 1.0;  // configured stability constant used for bound columns
  ModelTemplate model;
  LossSpec loss;
  OptimConfig optim;
  SweepSpec sweep;
  OutputSpec output;
  std::string source_text;  // raw config, hashed into the manifest
};

ExperimentConfig parse_experiment_config(const std::string& text);
ExperimentConfig load_experiment_config(const std::string& path);

// a fully resolved run: every numeric output is a function of this struct
struct RunSetting {
  int index = 0;
  int n = 0;  // capacity level (hidden width / rbf centers); 0 = template
  std::uint64_t seed = 1;
  ModelTemplate model;
  LossSpec loss;
  OptimConfig optim;
};

std::vector<RunSetting> expand_sweep(const ExperimentConfig& cfg);

ParamModel instantiate_model(const ProblemSpec& prob, const ModelTemplate& tmpl);

struct RunRow {
  RunSetting setting;
  RunReport report;
  double loss_continuous = 0.0;  // reference loss of the final iterate
  double v_error = -1.0;         // -1 when the preset has no exact solution
  double bound = 0.0;            // a posteriori bound at the configured c1
  std::string status = "ok";
};

struct ExperimentResult {
  std::vector<RunRow> rows;
  int n_failed = 0;
  std::string out_dir;
};

// executes the sweep and writes runs/*.json, summary.csv, MANIFEST and
// timing.txt (the only file allowed to differ between identical reruns)
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::string& out_dir_override = "", int jobs = 1);

std::string summary_csv(const ExperimentResult& result);

std::uint64_t fnv1a64(std::string_view bytes);

// ---- preset scenarios ----

struct CounterexampleRow {
  int m_r = 0;
  double discrete_loss = 0.0;
  double continuous_loss = 0.0;
  double gap = 0.0;
  double adversary_norm = 0.0;         // measured L2 size of the adversary
  double adversary_norm_closed = 0.0;  // closed form of the same quantity
  double bound = 0.0;                  // a posteriori value at c1 = 1
};

// high-frequency adversary on the homogeneous 1d problem: the grid loss
// vanishes while the continuous loss stays at 0.5
std::vector<CounterexampleRow> scenario_counterexample(const std::vector<int>& m_r_list);

struct ConvergenceCell {
  int n = 0;
  int m = 0;  // 0 encodes the fixed-quadrature baseline column
  int runs_ok = 0;
  int runs_failed = 0;
  double median_error = -1.0;
  double median_loss = -1.0;
};

struct ConvergenceReport {
  std::vector<RunRow> runs;
  std::vector<ConvergenceCell> cells;  // ordered by (n, m)
  bool error_nonincreasing_in_m = true;
  bool error_nonincreasing_in_n = true;
};

ConvergenceReport scenario_convergence(const std::string& preset, const std::vector<int>& n_list,
                                       const std::vector<int>& m_list,
                                       const std::vector<std::uint64_t>& seeds,
                                       const OptimConfig& optim_base = {});

struct HpCompareRow {
  std::string form;  // strong | hp_legendre | hp_pwconst | exact
  int cells = 0;
  int order = 0;
  std::string status = "ok";
  double final_loss = 0.0;
  double loss_continuous = 0.0;
  double v_error = -1.0;
  double deficit = -1.0;  // projection deficit at the final iterate
  double bound = 0.0;
};

std::vector<HpCompareRow> scenario_hp_vs_strong(const std::string& preset,
                                                const std::vector<int>& k_list,
                                                const std::vector<int>& n_list,
                                                std::uint64_t seed = 1,
                                                const OptimConfig& optim_base = {});

struct BoundSoundnessRow {
  std::string preset;
  std::uint64_t seed = 0;
  std::string status = "ok";
  double c1_hat = 0.0;
  double loss_continuous = 0.0;
  double v_error = 0.0;
  double bound = 0.0;
  double ratio = 0.0;  // v_error / bound
  bool sound = false;
  bool flagged = false;  // unsound but within a factor of two
};

// trains on presets with exact solutions and compares the measured error
// against the a posteriori bound at the probed stability constant
std::vector<BoundSoundnessRow> scenario_bound_soundness(
    const std::vector<std::string>& presets, const std::vector<std::uint64_t>& seeds,
    const OptimConfig& optim_base = {});

struct RademacherScanRow {
  int m = 0;
  double estimate = 0.0;
  double stderr_ = 0.0;
};

struct RademacherScan {
  std::vector<RademacherScanRow> rows;
  double slope = 0.0;  // fitted log-log decay of the estimate vs m
};

// sign-average complexity of the residual family induced by random networks
RademacherScan scenario_rademacher(const std::string& preset, const std::vector<int>& m_list,
                                   int family_size = 20, int n_sign_trials = 8,
                                   int n_sample_trials = 8, std::uint64_t seed = 11);

// stability constants probed over a mixed random family
StabilityProbe scenario_probe_constants(const std::string& preset, int family_size = 16,
                                        std::uint64_t seed = 21);

}  // namespace rmlab
