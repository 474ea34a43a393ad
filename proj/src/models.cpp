#include "rmlab/models.hpp"

#include <charconv>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace rmlab {

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "sin") return Activation::kSin;
  if (s == "softplus") return Activation::kSoftplus;
  throw std::invalid_argument("unknown activation: " + s);
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kTanh: return "tanh";
    case Activation::kSin: return "sin";
    case Activation::kSoftplus: return "softplus";
  }
  return "?";
}

long param_count(const MlpArch& arch) {
  if (arch.widths.size() < 2) throw std::invalid_argument("param_count: need at least one layer");
  long n = 0;
  for (std::size_t l = 1; l < arch.widths.size(); ++l) {
    if (arch.widths[l] < 1 || arch.widths[l - 1] < 1) {
      throw std::invalid_argument("param_count: widths must be positive");
    }
    n += long(arch.widths[l]) * arch.widths[l - 1] + arch.widths[l];
  }
  return n;
}

bool arch_nested(const MlpArch& small, const MlpArch& big) {
  if (small.act != big.act) return false;
  if (small.widths.size() != big.widths.size()) return false;
  if (small.widths.front() != big.widths.front()) return false;
  if (small.widths.back() != big.widths.back()) return false;
  for (std::size_t i = 0; i < small.widths.size(); ++i) {
    if (small.widths[i] > big.widths[i]) return false;
  }
  return true;
}

Eigen::VectorXd init_params(const MlpArch& arch, std::uint64_t seed) {
  Eigen::VectorXd theta(param_count(arch));
  Rng root(seed);
  std::size_t off = 0;
  for (std::size_t l = 1; l < arch.widths.size(); ++l) {
    const int n_in = arch.widths[l - 1], n_out = arch.widths[l];
    const double a = std::sqrt(6.0 / (n_in + n_out));
    Rng layer = root.fork(l);
    for (int i = 0; i < n_in * n_out; ++i) theta(off + i) = layer.uniform(-a, a);
    off += std::size_t(n_in) * n_out;
    for (int j = 0; j < n_out; ++j) theta(off + j) = 0.0;
    off += n_out;
  }
  return theta;
}

Eigen::VectorXd embed_params(const MlpArch& small, const Eigen::VectorXd& theta_small,
                             const MlpArch& big) {
  if (!arch_nested(small, big)) {
    throw std::invalid_argument("embed_params: target architecture does not nest the source");
  }
  if (theta_small.size() != param_count(small)) {
    throw std::invalid_argument("embed_params: source parameter count mismatch");
  }
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(param_count(big));
  std::size_t so = 0, bo = 0;
  for (std::size_t l = 1; l < small.widths.size(); ++l) {
    const int s_in = small.widths[l - 1], s_out = small.widths[l];
    const int b_in = big.widths[l - 1], b_out = big.widths[l];
    for (int j = 0; j < s_out; ++j) {
      for (int i = 0; i < s_in; ++i) {
        theta(bo + std::size_t(j) * b_in + i) = theta_small(so + std::size_t(j) * s_in + i);
      }
    }
    for (int j = 0; j < s_out; ++j) {
      theta(bo + std::size_t(b_in) * b_out + j) = theta_small(so + std::size_t(s_in) * s_out + j);
    }
    so += std::size_t(s_in) * s_out + s_out;
    bo += std::size_t(b_in) * b_out + b_out;
  }
  return theta;
}

ParamModel make_mlp(const MlpArch& arch, std::uint64_t seed, std::string name) {
  ParamModel m;
  m.kind = ModelKind::kMlp;
  m.name = std::move(name);
  m.arch = arch;
  m.input_dim = arch.input_dim();
  m.theta = init_params(arch, seed);
  return m;
}

ParamModel make_rbf(const Eigen::MatrixXd& centers, double family_scale,
                    const Eigen::VectorXd& coeffs, std::string name) {
  if (centers.rows() != coeffs.size()) {
    throw std::invalid_argument("make_rbf: one coefficient per center required");
  }
  if (family_scale <= 0.0) throw std::invalid_argument("make_rbf: family scale must be positive");
  const double min_sep = 1.0 / family_scale;
  for (Eigen::Index i = 0; i < centers.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < centers.rows(); ++j) {
      double dist = (centers.row(i) - centers.row(j)).norm();
      if (!(dist > min_sep)) {
        throw std::invalid_argument("make_rbf: centers closer than the family separation 1/m");
      }
    }
  }
  if (family_scale * family_scale < std::log(double(std::max<Eigen::Index>(1, centers.rows())))) {
    throw std::invalid_argument("make_rbf: family size exceeds exp(m^2)");
  }
  ParamModel m;
  m.kind = ModelKind::kRbf;
  m.name = std::move(name);
  m.centers = centers;
  m.family_scale = family_scale;
  m.input_dim = int(centers.cols());
  m.theta = coeffs;
  return m;
}

ParamModel make_analytic(int input_dim, std::function<Jet2d(std::span<const double>)> fn,
                         std::string name) {
  ParamModel m;
  m.kind = ModelKind::kAnalytic;
  m.name = std::move(name);
  m.input_dim = input_dim;
  m.analytic = std::move(fn);
  return m;
}

Jet2d eval_model(const ParamModel& model, std::span<const double> x) {
  switch (model.kind) {
    case ModelKind::kMlp:
      return mlp_eval<double>(model.arch,
                              std::span<const double>(model.theta.data(),
                                                      std::size_t(model.theta.size())),
                              x);
    case ModelKind::kRbf:
      return rbf_eval<double>(model.centers,
                              std::span<const double>(model.theta.data(),
                                                      std::size_t(model.theta.size())),
                              x);
    case ModelKind::kAnalytic: return model.analytic(x);
  }
  throw std::invalid_argument("eval_model: unknown kind");
}

double model_value(const ParamModel& model, std::span<const double> x) {
  switch (model.kind) {
    case ModelKind::kMlp:
      return mlp_value<double>(model.arch,
                               std::span<const double>(model.theta.data(),
                                                       std::size_t(model.theta.size())),
                               x);
    case ModelKind::kRbf:
      return rbf_value<double>(model.centers,
                               std::span<const double>(model.theta.data(),
                                                       std::size_t(model.theta.size())),
                               x);
    case ModelKind::kAnalytic: return model.analytic(x).v;
  }
  throw std::invalid_argument("model_value: unknown kind");
}

Jet2<ad::Var> eval_model_taped(const ParamModel& model, std::span<const ad::Var> theta,
                               std::span<const double> x) {
  switch (model.kind) {
    case ModelKind::kMlp: return mlp_eval<ad::Var>(model.arch, theta, x);
    case ModelKind::kRbf: return rbf_eval<ad::Var>(model.centers, theta, x);
    case ModelKind::kAnalytic:
      throw std::invalid_argument("analytic models have no trainable parameters");
  }
  throw std::invalid_argument("eval_model_taped: unknown kind");
}

std::string double_to_string(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  if (res.ec != std::errc()) throw std::runtime_error("double_to_string failed");
  return std::string(buf, res.ptr);
}

double double_from_string(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad decimal double: " + s);
  }
  return v;
}

void save_checkpoint(const ParamModel& model, std::uint64_t seed, const std::string& path) {
  if (model.kind == ModelKind::kAnalytic) {
    throw std::invalid_argument("analytic models cannot be checkpointed");
  }
  nlohmann::json j;
  j["schema_version"] = 1;
  j["kind"] = model.kind == ModelKind::kMlp ? "mlp" : "rbf";
  j["name"] = model.name;
  j["seed"] = seed;
  if (model.kind == ModelKind::kMlp) {
    j["widths"] = model.arch.widths;
    j["activation"] = to_string(model.arch.act);
  } else {
    std::vector<std::vector<std::string>> centers;
    for (Eigen::Index r = 0; r < model.centers.rows(); ++r) {
      std::vector<std::string> row;
      for (Eigen::Index c = 0; c < model.centers.cols(); ++c) {
        row.push_back(double_to_string(model.centers(r, c)));
      }
      centers.push_back(std::move(row));
    }
    j["centers"] = centers;
    j["family_scale"] = double_to_string(model.family_scale);
  }
  std::vector<std::string> theta;
  theta.reserve(std::size_t(model.theta.size()));
  for (Eigen::Index i = 0; i < model.theta.size(); ++i) {
    theta.push_back(double_to_string(model.theta(i)));
  }
  j["theta"] = theta;
  j["metadata"] = nlohmann::json::object();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(2) << "\n";
}

ParamModel load_checkpoint(const std::string& path, std::uint64_t* seed_out) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  const std::string kind = j.at("kind").get<std::string>();
  std::vector<std::string> theta_str = j.at("theta").get<std::vector<std::string>>();
  Eigen::VectorXd theta(Eigen::Index(theta_str.size()));
  for (std::size_t i = 0; i < theta_str.size(); ++i) {
    theta(Eigen::Index(i)) = double_from_string(theta_str[i]);
  }
  if (seed_out) *seed_out = j.value("seed", std::uint64_t(0));
  if (kind == "mlp") {
    MlpArch arch;
    arch.widths = j.at("widths").get<std::vector<int>>();
    arch.act = activation_from_string(j.at("activation").get<std::string>());
    if (theta.size() != param_count(arch)) {
      throw std::invalid_argument("checkpoint parameter count does not match architecture");
    }
    ParamModel m;
    m.kind = ModelKind::kMlp;
    m.name = j.value("name", std::string("mlp"));
    m.arch = arch;
    m.input_dim = arch.input_dim();
    m.theta = theta;
    return m;
  }
  if (kind == "rbf") {
    auto centers_str = j.at("centers").get<std::vector<std::vector<std::string>>>();
    if (centers_str.empty()) throw std::invalid_argument("checkpoint rbf needs centers");
    Eigen::MatrixXd centers(Eigen::Index(centers_str.size()),
                            Eigen::Index(centers_str.front().size()));
    for (std::size_t r = 0; r < centers_str.size(); ++r) {
      for (std::size_t c = 0; c < centers_str[r].size(); ++c) {
        centers(Eigen::Index(r), Eigen::Index(c)) = double_from_string(centers_str[r][c]);
      }
    }
    return make_rbf(centers, double_from_string(j.at("family_scale").get<std::string>()), theta,
                    j.value("name", std::string("rbf")));
  }
  throw std::invalid_argument("unknown checkpoint kind: " + kind);
}

}  // namespace rmlab
