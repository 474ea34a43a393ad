// rm-lab: batch driver for residual-minimization experiments.
//
// Subcommands:
//   run              execute a sweep described by a TOML config
//   counterexample   high-frequency adversary table (grid loss vs true loss)
//   rademacher       complexity estimates of a random-network residual family
//   probe-constants  empirical stability constants of a preset
//
// Exit codes: 0 success, 2 bad config/usage, 3 at least one run failed.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "rmlab/experiments.hpp"

namespace {

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    std::string tok = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
    // "a..b" expands to a doubling ladder a, 2a, 4a, ..., <= b
    std::size_t dots = tok.find("..");
    if (dots != std::string::npos) {
      int a = std::stoi(tok.substr(0, dots));
      int b = std::stoi(tok.substr(dots + 2));
      if (a < 1 || b < a) throw CLI::ValidationError("bad range: " + tok);
      for (int v = a; v <= b; v *= 2) out.push_back(v);
    } else {
      out.push_back(std::stoi(tok));
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw CLI::ValidationError("empty list");
  return out;
}

int cmd_run(const std::string& config_path, const std::string& out_dir, int jobs) {
  rmlab::ExperimentConfig cfg = rmlab::load_experiment_config(config_path);
  for (const std::string& w : rmlab::loss_spec_warnings(cfg.loss)) {
    std::cerr << "warning: " << w << "\n";
  }
  rmlab::ExperimentResult res = rmlab::run_experiment(cfg, out_dir, jobs);
  std::cout << "wrote " << res.rows.size() << " runs to " << res.out_dir << "\n";
  if (res.n_failed > 0) {
    std::cerr << res.n_failed << " of " << res.rows.size() << " runs failed\n";
    return 3;
  }
  return 0;
}

int cmd_counterexample(const std::vector<int>& m_r_list) {
  std::vector<rmlab::CounterexampleRow> rows = rmlab::scenario_counterexample(m_r_list);
  std::printf("%6s %14s %14s %10s %14s %14s %10s\n", "m_r", "discrete", "continuous", "gap",
              "adv_norm", "adv_closed", "bound");
  for (const rmlab::CounterexampleRow& r : rows) {
    std::printf("%6d %14.6e %14.6e %10.6f %14.6e %14.6e %10.6f\n", r.m_r, r.discrete_loss,
                r.continuous_loss, r.gap, r.adversary_norm, r.adversary_norm_closed, r.bound);
  }
  return 0;
}

int cmd_rademacher(const std::string& preset, const std::vector<int>& m_list, int family,
                   std::uint64_t seed) {
  rmlab::RademacherScan scan = rmlab::scenario_rademacher(preset, m_list, family, 8, 8, seed);
  std::printf("%8s %14s %14s\n", "m", "estimate", "stderr");
  for (const rmlab::RademacherScanRow& r : scan.rows) {
    std::printf("%8d %14.6e %14.6e\n", r.m, r.estimate, r.stderr_);
  }
  std::printf("log-log slope: %.4f (iid sampling predicts about -0.5)\n", scan.slope);
  return 0;
}

int cmd_probe(const std::string& preset, int family, std::uint64_t seed) {
  rmlab::StabilityProbe probe = rmlab::scenario_probe_constants(preset, family, seed);
  std::printf("preset %s over %d members\n", preset.c_str(), family);
  std::printf("  c1_hat (lower stability) = %.6f\n", probe.c1_hat);
  std::printf("  c2_hat (upper stability) = %.6f\n", probe.c2_hat);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"residual minimization lab"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int jobs = 1;
  CLI::App* run = app.add_subcommand("run", "execute a config-driven sweep");
  run->add_option("config", config_path, "TOML config path")->required();
  run->add_option("--out", out_dir, "output directory (overrides the config)");
  run->add_option("--jobs", jobs, "worker count (runs stay sequential and ordered)")
      ->check(CLI::PositiveNumber);

  std::string mr_spec = "4,8,16,64";
  CLI::App* cex = app.add_subcommand("counterexample", "grid-sampling adversary table");
  cex->add_option("--mr", mr_spec, "comma list of frequencies, e.g. 4,16,64");

  std::string preset = "poisson1d_sin";
  std::string m_spec = "16..4096";
  int family = 20;
  std::uint64_t seed = 11;
  CLI::App* rad = app.add_subcommand("rademacher", "complexity scan over sample sizes");
  rad->add_option("--preset", preset, "problem preset");
  rad->add_option("--m-grid", m_spec, "sample sizes, e.g. 16..4096 (doubling) or 32,64");
  rad->add_option("--family", family, "family size")->check(CLI::PositiveNumber);
  rad->add_option("--seed", seed, "rng seed");

  std::string probe_preset = "poisson1d_sin";
  int probe_family = 16;
  std::uint64_t probe_seed = 21;
  CLI::App* probe = app.add_subcommand("probe-constants", "empirical stability constants");
  probe->add_option("--preset", probe_preset, "problem preset");
  probe->add_option("--family", probe_family, "family size")->check(CLI::PositiveNumber);
  probe->add_option("--seed", probe_seed, "rng seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, jobs);
    if (cex->parsed()) return cmd_counterexample(parse_int_list(mr_spec));
    if (rad->parsed()) return cmd_rademacher(preset, parse_int_list(m_spec), family, seed);
    if (probe->parsed()) return cmd_probe(probe_preset, probe_family, probe_seed);
  } catch (const rmlab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
