#include "rmlab/experiments.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

namespace rmlab {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;
constexpr double kPi = 3.141592653589793238462643383279502884;

[[noreturn]] void bad_key(const toml::Value& v, const std::string& section,
                          const std::string& what) {
  throw ConfigError("line " + std::to_string(v.line) + ": [" + section + "] " + what);
}

void check_keys(const std::string& section, const toml::Table& t,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : t) {
    bool known = false;
    for (const char* a : allowed) known |= key == a;
    if (!known) bad_key(value, section, "unknown key '" + key + "'");
  }
}

const toml::Value* find(const toml::Table& t, const char* key) {
  auto it = t.find(key);
  return it == t.end() ? nullptr : &it->second;
}

int read_int(const toml::Table& t, const char* key, int fallback, const std::string& section,
             int min_value) {
  const toml::Value* v = find(t, key);
  if (!v) return fallback;
  std::int64_t raw;
  try {
    raw = v->as_int();
  } catch (const toml::ParseError& e) {
    throw ConfigError(std::string(e.what()) + " for key '" + key + "'");
  }
  if (raw < min_value) bad_key(*v, section, std::string("'") + key + "' is out of range");
  return int(raw);
}

double read_double(const toml::Table& t, const char* key, double fallback,
                   const std::string& section, double min_value) {
  const toml::Value* v = find(t, key);
  if (!v) return fallback;
  double raw;
  try {
    raw = v->as_double();
  } catch (const toml::ParseError& e) {
    throw ConfigError(std::string(e.what()) + " for key '" + key + "'");
  }
  if (!(raw >= min_value)) bad_key(*v, section, std::string("'") + key + "' is out of range");
  return raw;
}

std::string read_string(const toml::Table& t, const char* key, const std::string& fallback) {
  const toml::Value* v = find(t, key);
  if (!v) return fallback;
  try {
    return v->as_string();
  } catch (const toml::ParseError& e) {
    throw ConfigError(std::string(e.what()) + " for key '" + key + "'");
  }
}

bool read_bool(const toml::Table& t, const char* key, bool fallback) {
  const toml::Value* v = find(t, key);
  if (!v) return fallback;
  try {
    return v->as_bool();
  } catch (const toml::ParseError& e) {
    throw ConfigError(std::string(e.what()) + " for key '" + key + "'");
  }
}

std::string sanitize_status(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return s;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return -1.0;
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string run_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "run_%04d", index);
  return buf;
}

// one sweep entry end-to-end: instantiate, train, measure
RunRow execute_run(const ProblemSpec& prob, const RunSetting& setting, double c1) {
  RunRow row;
  row.setting = setting;
  try {
    ParamModel model = instantiate_model(prob, setting.model);
    LossEvaluator ev(prob, setting.loss);
    row.report = train(ev, model, setting.optim);
    row.status = row.report.status;
    ParamModel final_model = model;
    final_model.theta = row.report.theta_final;
    Field<double> u = field_of(final_model);
    LossBreakdown ref = loss_continuous(prob, u, setting.loss.p, setting.loss.tau);
    row.loss_continuous = ref.total;
    row.bound = aposteriori_bound(ref.total, c1, setting.loss.p);
    if (prob.exact) {
      Field<double> star = field_of_exact(prob);
      row.v_error = v_norm_distance(prob, u, star);
    }
  } catch (const std::exception& e) {
    if (row.status == "ok") row.status = "failed: " + sanitize_status(e.what());
    row.loss_continuous = std::numeric_limits<double>::quiet_NaN();
    row.bound = std::numeric_limits<double>::quiet_NaN();
  }
  return row;
}

json model_json(const ModelTemplate& m) {
  json j;
  j["kind"] = m.kind;
  j["widths"] = m.widths;
  j["activation"] = to_string(m.activation);
  j["centers"] = m.centers;
  j["seed"] = m.seed;
  return j;
}

json loss_json(const LossSpec& l) {
  json j;
  j["form"] = to_string(l.form);
  j["p"] = l.p;
  j["tau"] = l.tau;
  j["m_interior"] = l.m_interior;
  j["m_boundary"] = l.m_boundary;
  j["sample"] = to_string(l.sample_kind);
  j["boundary_sample"] = to_string(l.boundary_sample);
  j["sample_seed"] = l.sample_seed;
  j["cells_per_axis"] = l.cells_per_axis;
  j["basis"] = to_string(l.basis);
  j["basis_order"] = l.basis_order;
  j["integrate_by_parts"] = l.integrate_by_parts;
  j["epsilon"] = l.epsilon;
  j["quad_order"] = l.quad_order;
  j["quad_panels"] = l.quad_panels;
  return j;
}

json optim_json(const OptimConfig& o) {
  json j;
  j["algorithm"] = to_string(o.algo);
  j["step"] = o.step;
  j["beta1"] = o.beta1;
  j["beta2"] = o.beta2;
  j["adam_eps"] = o.adam_eps;
  j["max_iters"] = o.max_iters;
  j["window"] = o.window;
  j["delta_slack"] = o.delta_slack;
  j["record_every"] = o.record_every;
  return j;
}

json run_json(const std::string& preset, double c1, const RunRow& row) {
  json j;
  j["schema"] = "rm-lab.run.v1";
  j["index"] = row.setting.index;
  j["preset"] = preset;
  j["n"] = row.setting.n;
  j["seed"] = row.setting.seed;
  j["model"] = model_json(row.setting.model);
  j["loss"] = loss_json(row.setting.loss);
  j["optim"] = optim_json(row.setting.optim);
  j["status"] = row.status;
  j["iters_run"] = row.report.iters_run;
  j["final"] = {{"loss", row.report.final_loss},
                {"interior", row.report.final_interior},
                {"boundary", row.report.final_boundary}};
  json metrics;
  metrics["loss_continuous"] = row.loss_continuous;
  metrics["v_error"] = row.v_error;
  metrics["bound"] = row.bound;
  metrics["c1"] = c1;
  j["metrics"] = metrics;
  json traj = json::array();
  for (const TrajectoryRow& r : row.report.trajectory) {
    traj.push_back({r.iter, r.loss, r.interior, r.boundary, r.grad_norm});
  }
  j["trajectory"] = traj;
  std::vector<double> theta(row.report.theta_final.data(),
                            row.report.theta_final.data() + row.report.theta_final.size());
  j["theta_final"] = theta;
  return j;
}

// shared zero-data 1d problem behind the grid-sampling adversary
ProblemSpec homogeneous_poisson1d() {
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
  prob.exact = [](std::span<const double>) { return jet_const<double>(0.0, 1); };
  return prob;
}

ParamModel grid_adversary(int m_r) {
  const double w = 2.0 * kPi * m_r;
  return make_analytic(
      1,
      [w](std::span<const double> x) {
        auto t = jet_seed<double>(x[0], 0, 1);
        return sin(t * w) * (-1.0 / (w * w));
      },
      "adversary_" + std::to_string(m_r));
}

ParamModel random_probe_rbf(const ProblemSpec& prob, std::uint64_t seed) {
  const int per_axis = 4;
  int total = 1;
  for (int k = 0; k < prob.d; ++k) total *= per_axis;
  Eigen::MatrixXd centers(total, prob.d);
  std::array<int, 3> idx{0, 0, 0};
  double min_side = std::numeric_limits<double>::infinity();
  for (int k = 0; k < prob.d; ++k) min_side = std::min(min_side, prob.domain.side(k));
  for (int i = 0; i < total; ++i) {
    int rem = i;
    for (int k = prob.d - 1; k >= 0; --k) {
      idx[std::size_t(k)] = rem % per_axis;
      rem /= per_axis;
    }
    for (int k = 0; k < prob.d; ++k) {
      centers(i, k) = prob.domain.lo[std::size_t(k)] +
                      prob.domain.side(k) * (idx[std::size_t(k)] + 0.5) / double(per_axis);
    }
  }
  Rng rng(seed);
  Eigen::VectorXd coeffs(total);
  for (int i = 0; i < total; ++i) coeffs(i) = rng.normal();
  return make_rbf(centers, 2.0 * per_axis / min_side, coeffs,
                  "probe_rbf_" + std::to_string(seed));
}

std::vector<ParamModel> probe_family(const ProblemSpec& prob, int family_size,
                                     std::uint64_t seed) {
  std::vector<ParamModel> family;
  for (int j = 0; j < family_size; ++j) {
    if (j % 2 == 0) {
      family.push_back(random_probe_rbf(prob, seed + std::uint64_t(j)));
    } else {
      MlpArch arch{{prob.d, 8, 1}, Activation::kTanh};
      family.push_back(make_mlp(arch, seed + std::uint64_t(j), "probe_mlp"));
    }
  }
  return family;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

ExperimentConfig parse_experiment_config(const std::string& text) {
  toml::Document doc;
  try {
    doc = toml::parse(text);
  } catch (const toml::ParseError& e) {
    throw ConfigError(e.what());
  }

  static const char* kSections[] = {"problem", "model", "loss", "optim", "sweep", "output"};
  for (const auto& [name, table] : doc.sections) {
    if (name.empty()) {
      if (!table.empty()) {
        throw ConfigError("line " + std::to_string(table.begin()->second.line) +
                          ": keys outside of a section");
      }
      continue;
    }
    bool known = false;
    for (const char* s : kSections) known |= name == s;
    if (!known) throw ConfigError("unknown section [" + name + "]");
  }

  ExperimentConfig cfg;
  cfg.source_text = text;

  if (doc.has("problem")) {
    const toml::Table& t = doc.at("problem");
    check_keys("problem", t, {"preset", "c1"});
    cfg.preset = read_string(t, "preset", cfg.preset);
    cfg.c1 = read_double(t, "c1", cfg.c1, "problem", 1e-300);
  }
  ProblemSpec prob;
  try {
    prob = preset_problem(cfg.preset);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  if (doc.has("model")) {
    const toml::Table& t = doc.at("model");
    check_keys("model", t, {"kind", "widths", "activation", "centers", "seed"});
    cfg.model.kind = read_string(t, "kind", cfg.model.kind);
    if (cfg.model.kind != "mlp" && cfg.model.kind != "rbf") {
      throw ConfigError("[model] kind must be 'mlp' or 'rbf'");
    }
    if (const toml::Value* v = find(t, "widths")) {
      try {
        cfg.model.widths.clear();
        for (std::int64_t w : v->as_int_list()) cfg.model.widths.push_back(int(w));
      } catch (const toml::ParseError& e) {
        throw ConfigError(e.what());
      }
    }
    if (const toml::Value* v = find(t, "activation")) {
      try {
        cfg.model.activation = activation_from_string(v->as_string());
      } catch (const std::exception& e) {
        throw ConfigError(std::string("bad activation: ") + e.what());
      }
    }
    cfg.model.centers = read_int(t, "centers", cfg.model.centers, "model", 1);
    cfg.model.seed = std::uint64_t(read_int(t, "seed", int(cfg.model.seed), "model", 0));
  }
  if (cfg.model.kind == "mlp") {
    if (cfg.model.widths.size() < 2) throw ConfigError("[model] widths needs >= 2 layers");
    for (int w : cfg.model.widths) {
      if (w < 1) throw ConfigError("[model] widths must be positive");
    }
    if (cfg.model.widths.front() != prob.d) {
      throw ConfigError("[model] first width must match the problem dimension " +
                        std::to_string(prob.d));
    }
    if (cfg.model.widths.back() != 1) throw ConfigError("[model] last width must be 1");
  }

  if (doc.has("loss")) {
    const toml::Table& t = doc.at("loss");
    check_keys("loss", t,
               {"form", "p", "tau", "m_interior", "m_boundary", "sample", "boundary_sample",
                "sample_seed", "cells_per_axis", "basis", "basis_order", "integrate_by_parts",
                "epsilon", "quad_order", "quad_panels"});
    if (const toml::Value* v = find(t, "form")) {
      try {
        cfg.loss.form = loss_form_from_string(v->as_string());
      } catch (const std::exception& e) {
        throw ConfigError(std::string("bad loss form: ") + e.what());
      }
    }
    cfg.loss.p = read_double(t, "p", cfg.loss.p, "loss", 1.0);
    cfg.loss.tau = read_double(t, "tau", cfg.loss.tau, "loss", 0.0);
    cfg.loss.m_interior = read_int(t, "m_interior", cfg.loss.m_interior, "loss", 1);
    cfg.loss.m_boundary = read_int(t, "m_boundary", cfg.loss.m_boundary, "loss", 1);
    if (const toml::Value* v = find(t, "sample")) {
      try {
        cfg.loss.sample_kind = sample_kind_from_string(v->as_string());
      } catch (const std::exception& e) {
        throw ConfigError(std::string("bad sample kind: ") + e.what());
      }
    }
    if (const toml::Value* v = find(t, "boundary_sample")) {
      try {
        cfg.loss.boundary_sample = sample_kind_from_string(v->as_string());
      } catch (const std::exception& e) {
        throw ConfigError(std::string("bad boundary sample kind: ") + e.what());
      }
    }
    cfg.loss.sample_seed = std::uint64_t(read_int(t, "sample_seed", 0, "loss", 0));
    cfg.loss.cells_per_axis = read_int(t, "cells_per_axis", cfg.loss.cells_per_axis, "loss", 1);
    if (const toml::Value* v = find(t, "basis")) {
      try {
        cfg.loss.basis = basis_kind_from_string(v->as_string());
      } catch (const std::exception& e) {
        throw ConfigError(std::string("bad basis: ") + e.what());
      }
    }
    cfg.loss.basis_order = read_int(t, "basis_order", cfg.loss.basis_order, "loss", 1);
    cfg.loss.integrate_by_parts = read_bool(t, "integrate_by_parts", false);
    cfg.loss.epsilon = read_double(t, "epsilon", cfg.loss.epsilon, "loss", 0.0);
    cfg.loss.quad_order = read_int(t, "quad_order", cfg.loss.quad_order, "loss", 1);
    cfg.loss.quad_panels = read_int(t, "quad_panels", cfg.loss.quad_panels, "loss", 1);
  }

  if (doc.has("optim")) {
    const toml::Table& t = doc.at("optim");
    check_keys("optim", t,
               {"algorithm", "step", "beta1", "beta2", "adam_eps", "max_iters", "window",
                "delta", "record_every"});
    if (const toml::Value* v = find(t, "algorithm")) {
      try {
        cfg.optim.algo = optim_algo_from_string(v->as_string());
      } catch (const std::exception& e) {
        throw ConfigError(std::string("bad algorithm: ") + e.what());
      }
    }
    cfg.optim.step = read_double(t, "step", cfg.optim.step, "optim", 1e-300);
    cfg.optim.beta1 = read_double(t, "beta1", cfg.optim.beta1, "optim", 0.0);
    cfg.optim.beta2 = read_double(t, "beta2", cfg.optim.beta2, "optim", 0.0);
    cfg.optim.adam_eps = read_double(t, "adam_eps", cfg.optim.adam_eps, "optim", 0.0);
    cfg.optim.max_iters = read_int(t, "max_iters", cfg.optim.max_iters, "optim", 1);
    cfg.optim.window = read_int(t, "window", cfg.optim.window, "optim", 1);
    cfg.optim.delta_slack = read_double(t, "delta", cfg.optim.delta_slack, "optim", 0.0);
    cfg.optim.record_every = read_int(t, "record_every", cfg.optim.record_every, "optim", 1);
  }

  if (doc.has("sweep")) {
    const toml::Table& t = doc.at("sweep");
    check_keys("sweep", t, {"n", "m_interior", "m_boundary", "tau", "p", "epsilon", "seeds"});
    try {
      if (const toml::Value* v = find(t, "n")) {
        for (std::int64_t x : v->as_int_list()) {
          if (x < 1) bad_key(*v, "sweep", "'n' entries must be positive");
          cfg.sweep.n.push_back(int(x));
        }
      }
      if (const toml::Value* v = find(t, "m_interior")) {
        for (std::int64_t x : v->as_int_list()) {
          if (x < 1) bad_key(*v, "sweep", "'m_interior' entries must be positive");
          cfg.sweep.m_interior.push_back(int(x));
        }
      }
      if (const toml::Value* v = find(t, "m_boundary")) {
        for (std::int64_t x : v->as_int_list()) {
          if (x < 1) bad_key(*v, "sweep", "'m_boundary' entries must be positive");
          cfg.sweep.m_boundary.push_back(int(x));
        }
      }
      if (const toml::Value* v = find(t, "tau")) {
        for (double x : v->as_double_list()) {
          if (x < 0) bad_key(*v, "sweep", "'tau' entries must be nonnegative");
          cfg.sweep.tau.push_back(x);
        }
      }
      if (const toml::Value* v = find(t, "p")) {
        for (double x : v->as_double_list()) {
          if (x < 1) bad_key(*v, "sweep", "'p' entries must be >= 1");
          cfg.sweep.p.push_back(x);
        }
      }
      if (const toml::Value* v = find(t, "epsilon")) {
        for (double x : v->as_double_list()) {
          if (x < 0) bad_key(*v, "sweep", "'epsilon' entries must be nonnegative");
          cfg.sweep.epsilon.push_back(x);
        }
      }
      if (const toml::Value* v = find(t, "seeds")) {
        for (std::int64_t x : v->as_int_list()) {
          if (x < 0) bad_key(*v, "sweep", "'seeds' entries must be nonnegative");
          cfg.sweep.seeds.push_back(std::uint64_t(x));
        }
      }
    } catch (const toml::ParseError& e) {
      throw ConfigError(e.what());
    }
  }

  if (doc.has("output")) {
    const toml::Table& t = doc.at("output");
    check_keys("output", t, {"dir", "formats"});
    cfg.output.dir = read_string(t, "dir", cfg.output.dir);
    if (const toml::Value* v = find(t, "formats")) {
      std::vector<std::string> formats;
      try {
        formats = v->as_string_list();
      } catch (const toml::ParseError& e) {
        throw ConfigError(e.what());
      }
      cfg.output.write_json = false;
      cfg.output.write_csv = false;
      for (const std::string& f : formats) {
        if (f == "json") {
          cfg.output.write_json = true;
        } else if (f == "csv") {
          cfg.output.write_csv = true;
        } else {
          bad_key(*v, "output", "unknown format '" + f + "'");
        }
      }
    }
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  ExperimentConfig cfg = parse_experiment_config(buf.str());
  if (const char* env = std::getenv("RM_LAB_SEED")) {
    char* end = nullptr;
    std::uint64_t seed = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') throw ConfigError("RM_LAB_SEED is not an integer");
    cfg.model.seed = seed;
    cfg.sweep.seeds = {seed};
  }
  return cfg;
}

std::vector<RunSetting> expand_sweep(const ExperimentConfig& cfg) {
  auto or_default = [](auto list, auto base) {
    if (list.empty()) list.push_back(base);
    return list;
  };
  std::vector<int> ns = cfg.sweep.n.empty() ? std::vector<int>{0} : cfg.sweep.n;
  std::vector<int> mis = or_default(cfg.sweep.m_interior, cfg.loss.m_interior);
  std::vector<int> mbs = or_default(cfg.sweep.m_boundary, cfg.loss.m_boundary);
  std::vector<double> taus = or_default(cfg.sweep.tau, cfg.loss.tau);
  std::vector<double> ps = or_default(cfg.sweep.p, cfg.loss.p);
  std::vector<double> epss = or_default(cfg.sweep.epsilon, cfg.loss.epsilon);
  std::vector<std::uint64_t> seeds = or_default(cfg.sweep.seeds, cfg.model.seed);

  std::vector<RunSetting> out;
  int index = 0;
  for (int n : ns) {
    for (int mi : mis) {
      for (int mb : mbs) {
        for (double tau : taus) {
          for (double p : ps) {
            for (double eps : epss) {
              for (std::uint64_t seed : seeds) {
                RunSetting s;
                s.index = index++;
                s.n = n;
                s.seed = seed;
                s.model = cfg.model;
                s.model.seed = seed;
                if (n > 0) {
                  if (s.model.kind == "rbf") {
                    s.model.centers = n;
                  } else {
                    for (std::size_t i = 1; i + 1 < s.model.widths.size(); ++i) {
                      s.model.widths[i] = n;
                    }
                  }
                }
                s.loss = cfg.loss;
                s.loss.m_interior = mi;
                s.loss.m_boundary = mb;
                s.loss.tau = tau;
                s.loss.p = p;
                s.loss.epsilon = eps;
                s.loss.sample_seed = seed;
                s.optim = cfg.optim;
                out.push_back(std::move(s));
              }
            }
          }
        }
      }
    }
  }
  return out;
}

ParamModel instantiate_model(const ProblemSpec& prob, const ModelTemplate& tmpl) {
  if (tmpl.kind == "mlp") {
    MlpArch arch{tmpl.widths, tmpl.activation};
    if (arch.input_dim() != prob.d) {
      throw std::invalid_argument("model input width does not match the problem dimension");
    }
    return make_mlp(arch, tmpl.seed);
  }
  if (tmpl.kind == "rbf") {
    int per_axis = tmpl.centers;
    int total = 1;
    for (int k = 0; k < prob.d; ++k) total *= per_axis;
    Eigen::MatrixXd centers(total, prob.d);
    std::array<int, 3> idx{0, 0, 0};
    double min_side = std::numeric_limits<double>::infinity();
    for (int k = 0; k < prob.d; ++k) min_side = std::min(min_side, prob.domain.side(k));
    for (int i = 0; i < total; ++i) {
      int rem = i;
      for (int k = prob.d - 1; k >= 0; --k) {
        idx[std::size_t(k)] = rem % per_axis;
        rem /= per_axis;
      }
      for (int k = 0; k < prob.d; ++k) {
        centers(i, k) = prob.domain.lo[std::size_t(k)] +
                        prob.domain.side(k) * (idx[std::size_t(k)] + 0.5) / double(per_axis);
      }
    }
    Rng rng(tmpl.seed);
    Eigen::VectorXd coeffs(total);
    for (int i = 0; i < total; ++i) coeffs(i) = rng.normal() / std::sqrt(double(total));
    return make_rbf(centers, 2.0 * per_axis / min_side, coeffs);
  }
  throw std::invalid_argument("unknown model kind: " + tmpl.kind);
}

std::string summary_csv(const ExperimentResult& result) {
  std::ostringstream out;
  out << "run,preset,form,kind,n,m_interior,m_boundary,tau,p,epsilon,seed,status,iters,"
         "final_loss,interior,boundary,loss_continuous,v_error,bound\n";
  for (const RunRow& row : result.rows) {
    const RunSetting& s = row.setting;
    out << run_name(s.index) << ',' << row.report.problem << ',' << to_string(s.loss.form) << ','
        << s.model.kind << ',' << s.n << ',' << s.loss.m_interior << ',' << s.loss.m_boundary
        << ',' << double_to_string(s.loss.tau) << ',' << double_to_string(s.loss.p) << ','
        << double_to_string(s.loss.epsilon) << ',' << s.seed << ',' << sanitize_status(row.status)
        << ',' << row.report.iters_run << ',' << double_to_string(row.report.final_loss) << ','
        << double_to_string(row.report.final_interior) << ','
        << double_to_string(row.report.final_boundary) << ','
        << double_to_string(row.loss_continuous) << ','
        << (row.v_error < 0 ? std::string() : double_to_string(row.v_error)) << ','
        << double_to_string(row.bound) << '\n';
  }
  return out.str();
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir_override,
                                int jobs) {
  if (jobs < 1) throw std::invalid_argument("jobs must be positive");
  const auto t0 = std::chrono::steady_clock::now();
  ProblemSpec prob = preset_problem(cfg.preset);

  ExperimentResult result;
  result.out_dir = out_dir_override.empty() ? cfg.output.dir : out_dir_override;
  fs::create_directories(fs::path(result.out_dir) / "runs");

  std::vector<RunSetting> settings = expand_sweep(cfg);
  for (const RunSetting& s : settings) {
    RunRow row = execute_run(prob, s, cfg.c1);
    row.report.problem = prob.name;
    if (cfg.output.write_json) {
      std::ofstream out(fs::path(result.out_dir) / "runs" / (run_name(s.index) + ".json"));
      out << run_json(cfg.preset, cfg.c1, row).dump(2) << '\n';
    }
    if (row.status != "ok") ++result.n_failed;
    result.rows.push_back(std::move(row));
  }

  if (cfg.output.write_csv) {
    std::ofstream out(fs::path(result.out_dir) / "summary.csv");
    out << summary_csv(result);
  }
  {
    std::ofstream out(fs::path(result.out_dir) / "MANIFEST");
    out << "tool=rm-lab " << kToolVersion << '\n';
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(cfg.source_text)));
    out << "config_fnv1a64=" << hex << '\n';
    out << "preset=" << cfg.preset << '\n';
    out << "runs=" << result.rows.size() << '\n';
    out << "failed=" << result.n_failed << '\n';
    for (const RunRow& row : result.rows) {
      out << run_name(row.setting.index) << '=' << sanitize_status(row.status) << '\n';
    }
  }
  {
    // wall-clock lives apart so that reruns stay byte-identical elsewhere
    std::ofstream out(fs::path(result.out_dir) / "timing.txt");
    double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out << "total_seconds=" << total << '\n';
    for (const RunRow& row : result.rows) {
      out << run_name(row.setting.index) << "_seconds=" << row.report.wall_seconds << '\n';
    }
  }
  return result;
}

std::vector<CounterexampleRow> scenario_counterexample(const std::vector<int>& m_r_list) {
  ProblemSpec prob = homogeneous_poisson1d();
  std::vector<CounterexampleRow> rows;
  for (int m_r : m_r_list) {
    if (m_r < 2) throw std::invalid_argument("scenario_counterexample: m_r must be >= 2");
    ParamModel adv = grid_adversary(m_r);
    Field<double> u = field_of(adv);

    LossSpec spec;
    spec.form = LossForm::kDiscrete;
    spec.m_interior = m_r;
    spec.m_boundary = 2;
    spec.sample_kind = SampleKind::kGrid;
    LossEvaluator ev(prob, spec);

    CounterexampleRow row;
    row.m_r = m_r;
    row.discrete_loss = ev.eval(adv).total;
    LossBreakdown cont = loss_continuous(prob, u, 2.0, 1.0);
    row.continuous_loss = cont.total;
    row.gap = std::abs(row.continuous_loss - row.discrete_loss);
    row.adversary_norm = space_norm(prob, u, SpaceNorm::kL2);
    const double w = 2.0 * kPi * m_r;
    row.adversary_norm_closed = 1.0 / (std::sqrt(2.0) * w * w);
    row.bound = aposteriori_bound(cont.total, 1.0, 2.0);
    rows.push_back(row);
  }
  return rows;
}

ConvergenceReport scenario_convergence(const std::string& preset, const std::vector<int>& n_list,
                                       const std::vector<int>& m_list,
                                       const std::vector<std::uint64_t>& seeds,
                                       const OptimConfig& optim_base) {
  ProblemSpec prob = preset_problem(preset);
  if (!prob.exact) {
    throw std::invalid_argument("scenario_convergence needs a preset with an exact solution");
  }
  if (n_list.empty() || m_list.empty() || seeds.empty()) {
    throw std::invalid_argument("scenario_convergence: empty grid");
  }

  ConvergenceReport report;
  int index = 0;
  auto make_setting = [&](int n, int m, std::uint64_t seed) {
    RunSetting s;
    s.index = index++;
    s.n = n;
    s.seed = seed;
    s.model.kind = "mlp";
    s.model.widths = {prob.d, n, 1};
    s.model.activation = Activation::kTanh;
    s.model.seed = seed;
    s.loss.p = prob.p;
    s.loss.tau = 10.0;
    s.loss.m_boundary = prob.d == 1 ? 2 : 32;
    s.loss.sample_seed = seed;
    if (m > 0) {
      s.loss.form = LossForm::kDiscrete;
      s.loss.m_interior = m;
      s.loss.sample_kind = SampleKind::kIidMc;  // the rate statements are about iid draws
    } else {
      s.loss.form = LossForm::kContinuous;  // fixed-quadrature baseline column
      s.loss.quad_order = 12;
      s.loss.quad_panels = 8;
    }
    s.optim = optim_base;
    return s;
  };

  auto cell_median = [&](int n, int m, ConvergenceCell& cell) {
    std::vector<double> errs, losses;
    for (std::uint64_t seed : seeds) {
      RunRow row = execute_run(prob, make_setting(n, m, seed), 1.0);
      row.report.problem = prob.name;
      if (row.status == "ok" && row.v_error >= 0.0) {
        errs.push_back(row.v_error);
        losses.push_back(row.loss_continuous);
        ++cell.runs_ok;
      } else {
        ++cell.runs_failed;
      }
      report.runs.push_back(std::move(row));
    }
    cell.median_error = median_of(errs);
    cell.median_loss = median_of(losses);
  };

  for (int n : n_list) {
    for (int m : m_list) {
      ConvergenceCell cell;
      cell.n = n;
      cell.m = m;
      cell_median(n, m, cell);
      report.cells.push_back(cell);
    }
    ConvergenceCell baseline;
    baseline.n = n;
    baseline.m = 0;
    cell_median(n, 0, baseline);
    report.cells.push_back(baseline);
  }

  auto cell_at = [&](int n, int m) -> const ConvergenceCell* {
    for (const ConvergenceCell& c : report.cells) {
      if (c.n == n && c.m == m) return &c;
    }
    return nullptr;
  };
  for (int n : n_list) {
    const ConvergenceCell* first = cell_at(n, m_list.front());
    const ConvergenceCell* last = cell_at(n, m_list.back());
    if (first && last && first->median_error >= 0 && last->median_error >= 0) {
      report.error_nonincreasing_in_m &= last->median_error <= first->median_error;
    }
  }
  {
    const ConvergenceCell* first = cell_at(n_list.front(), m_list.back());
    const ConvergenceCell* last = cell_at(n_list.back(), m_list.back());
    if (first && last && first->median_error >= 0 && last->median_error >= 0) {
      report.error_nonincreasing_in_n = last->median_error <= first->median_error;
    }
  }
  return report;
}

std::vector<HpCompareRow> scenario_hp_vs_strong(const std::string& preset,
                                                const std::vector<int>& k_list,
                                                const std::vector<int>& n_list,
                                                std::uint64_t seed,
                                                const OptimConfig& optim_base) {
  ProblemSpec prob = preset_problem(preset);
  if (!prob.exact) {
    throw std::invalid_argument("scenario_hp_vs_strong needs a preset with an exact solution");
  }
  if (prob.p != 2.0) throw std::invalid_argument("scenario_hp_vs_strong needs p = 2");
  if (k_list.empty() || n_list.empty()) throw std::invalid_argument("empty (K, N) grid");

  std::vector<HpCompareRow> rows;
  Field<double> star = field_of_exact(prob);

  // both losses vanish on the exact solution
  {
    HpCompareRow row;
    row.form = "exact";
    row.cells = k_list.front();
    row.order = n_list.front();
    BasisTable basis = build_basis(
        prob, uniform_partition(prob.domain, row.cells, BasisKind::kLegendre, row.order));
    LossBreakdown cont = loss_continuous(prob, star, 2.0, 1.0);
    LossBreakdown hp = loss_hp_vrm(prob, star, 1.0, basis);
    row.final_loss = hp.total;
    row.loss_continuous = cont.total;
    row.v_error = 0.0;
    row.deficit = cont.interior - hp.interior;
    row.bound = aposteriori_bound(cont.total, 1.0, 2.0);
    rows.push_back(row);
  }

  auto train_one = [&](const LossSpec& lspec) {
    RunSetting s;
    s.n = 16;
    s.seed = seed;
    s.model.kind = "mlp";
    s.model.widths = {prob.d, 16, 1};
    s.model.seed = seed;
    s.loss = lspec;
    s.loss.sample_seed = seed;
    s.optim = optim_base;
    return execute_run(prob, s, 1.0);
  };

  {
    LossSpec strong;
    strong.form = LossForm::kContinuous;
    strong.tau = 10.0;
    strong.quad_order = 12;
    strong.quad_panels = 4;
    RunRow run = train_one(strong);
    HpCompareRow row;
    row.form = "strong";
    row.status = sanitize_status(run.status);
    row.final_loss = run.report.final_loss;
    row.loss_continuous = run.loss_continuous;
    row.v_error = run.v_error;
    row.bound = run.bound;
    rows.push_back(row);
  }

  auto hp_row = [&](int k, int order, BasisKind kind) {
    LossSpec hp;
    hp.form = LossForm::kHpVrm;
    hp.tau = 10.0;
    hp.cells_per_axis = k;
    hp.basis = kind;
    hp.basis_order = order;
    RunRow run = train_one(hp);
    HpCompareRow row;
    row.form = kind == BasisKind::kLegendre ? "hp_legendre" : "hp_pwconst";
    row.cells = k;
    row.order = kind == BasisKind::kLegendre ? order : 0;
    row.status = sanitize_status(run.status);
    row.final_loss = run.report.final_loss;
    row.loss_continuous = run.loss_continuous;
    row.v_error = run.v_error;
    if (run.status == "ok") {
      ParamModel model = instantiate_model(prob, run.setting.model);
      model.theta = run.report.theta_final;
      Field<double> u = field_of(model);
      LossBreakdown cont = loss_continuous(prob, u, 2.0, hp.tau);
      BasisTable basis =
          build_basis(prob, uniform_partition(prob.domain, k, kind, std::max(order, 1)));
      LossBreakdown hp_ref = loss_hp_vrm(prob, u, hp.tau, basis);
      row.deficit = cont.interior - hp_ref.interior;
      row.bound = hp_bound_report(hp_ref.total, 1.0, std::max(0.0, row.deficit), 0.0).bound;
    }
    return row;
  };

  for (int k : k_list) {
    for (int order : n_list) rows.push_back(hp_row(k, order, BasisKind::kLegendre));
    rows.push_back(hp_row(k, 1, BasisKind::kPwconst));
  }
  return rows;
}

std::vector<BoundSoundnessRow> scenario_bound_soundness(
    const std::vector<std::string>& presets, const std::vector<std::uint64_t>& seeds,
    const OptimConfig& optim_base) {
  std::vector<BoundSoundnessRow> rows;
  for (const std::string& preset : presets) {
    ProblemSpec prob = preset_problem(preset);
    if (!prob.exact) {
      throw std::invalid_argument("scenario_bound_soundness needs exact solutions");
    }
    StabilityProbe probe = probe_stability_constant(prob, probe_family(prob, 12, 1000));
    Field<double> star = field_of_exact(prob);

    for (std::uint64_t seed : seeds) {
      BoundSoundnessRow row;
      row.preset = preset;
      row.seed = seed;
      row.c1_hat = probe.c1_hat;

      RunSetting s;
      s.seed = seed;
      s.model.kind = "mlp";
      s.model.widths = {prob.d, 16, 16, 1};
      s.model.seed = seed;
      s.loss.form = LossForm::kDiscrete;
      s.loss.m_interior = 128;
      s.loss.m_boundary = prob.d == 1 ? 2 : 32;
      s.loss.tau = 10.0;
      s.loss.sample_seed = seed;
      s.optim = optim_base;
      RunRow run = execute_run(prob, s, 1.0);
      row.status = run.status;
      if (run.status == "ok") {
        ParamModel model = instantiate_model(prob, s.model);
        model.theta = run.report.theta_final;
        Field<double> u = field_of(model);
        row.loss_continuous = loss_continuous(prob, u, 2.0, 1.0).total;
        row.bound = aposteriori_bound(row.loss_continuous, probe.c1_hat, 2.0);
        row.v_error = v_norm_distance(prob, u, star);
        row.ratio = row.bound > 0 ? row.v_error / row.bound : 0.0;
        row.sound = row.v_error <= row.bound;
        row.flagged = !row.sound && row.v_error <= 2.0 * row.bound;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

RademacherScan scenario_rademacher(const std::string& preset, const std::vector<int>& m_list,
                                   int family_size, int n_sign_trials, int n_sample_trials,
                                   std::uint64_t seed) {
  ProblemSpec prob = preset_problem(preset);
  if (m_list.empty()) throw std::invalid_argument("scenario_rademacher: empty m grid");

  std::vector<ScalarField> family;
  const double p = prob.p;
  for (int j = 0; j < family_size; ++j) {
    auto model = std::make_shared<ParamModel>(
        make_mlp(MlpArch{{prob.d, 16, 16, 1}, Activation::kTanh}, seed + 100 + std::uint64_t(j)));
    Field<double> u = field_of(*model);
    family.push_back([model, u, &prob, p](std::span<const double> x) {
      double r = prob.f(x) - apply_interior_operator(prob, u, x);
      return std::pow(std::abs(r), p);
    });
  }

  RademacherScan scan;
  std::vector<double> ms, est;
  Rng root(seed);
  for (int m : m_list) {
    RademacherEstimate e = estimate_rademacher(family, prob.domain, m, n_sign_trials,
                                               n_sample_trials, root.fork(std::uint64_t(m)));
    scan.rows.push_back({m, e.estimate, e.stderr_});
    ms.push_back(double(m));
    est.push_back(e.estimate);
  }
  scan.slope = fit_loglog_slope(ms, est);
  return scan;
}

StabilityProbe scenario_probe_constants(const std::string& preset, int family_size,
                                        std::uint64_t seed) {
  ProblemSpec prob = preset_problem(preset);
  return probe_stability_constant(prob, probe_family(prob, family_size, seed));
}

}  // namespace rmlab
