#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rmlab/jet.hpp"
#include "rmlab/rng.hpp"

namespace rmlab {

enum class Activation { kTanh, kSin, kSoftplus };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

// widths include input and output layers, e.g. {1, 8, 1}
struct MlpArch {
  std::vector<int> widths;
  Activation act = Activation::kTanh;

  int depth() const { return int(widths.size()) - 1; }  // number of affine layers
  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
};

long param_count(const MlpArch& arch);

// true when every realization of `small` is exactly expressible in `big`
// (same depth, same activation, widths dominated entrywise)
bool arch_nested(const MlpArch& small, const MlpArch& big);

// layer weights uniform on +-sqrt(6 / (fan_in + fan_out)), biases zero
Eigen::VectorXd init_params(const MlpArch& arch, std::uint64_t seed);

// copies parameters into the wider architecture; new units get zero incoming
// and zero outgoing weights, so the realization is preserved exactly
Eigen::VectorXd embed_params(const MlpArch& small, const Eigen::VectorXd& theta_small,
                             const MlpArch& big);

template <class S>
Jet2<S> mlp_eval(const MlpArch& arch, std::span<const S> theta, std::span<const double> x);

enum class ModelKind { kMlp, kRbf, kAnalytic };

// A parametric scalar field. For kAnalytic the callable provides the jet
// directly and the model is not trainable.
struct ParamModel {
  ModelKind kind = ModelKind::kMlp;
  std::string name;
  int input_dim = 1;
  MlpArch arch;              // kMlp
  Eigen::MatrixXd centers;   // kRbf: n x d
  double family_scale = 1.0; // kRbf: the separation parameter of the family
  Eigen::VectorXd theta;
  std::function<Jet2d(std::span<const double>)> analytic;
};

ParamModel make_mlp(const MlpArch& arch, std::uint64_t seed, std::string name = "mlp");

// v(x) = sum_k theta_k exp(-|x - c_k|^2); centers must be separated by more
// than 1/family_scale and the family size must satisfy n <= exp(m^2)
ParamModel make_rbf(const Eigen::MatrixXd& centers, double family_scale,
                    const Eigen::VectorXd& coeffs, std::string name = "rbf");

ParamModel make_analytic(int input_dim, std::function<Jet2d(std::span<const double>)> fn,
                         std::string name = "analytic");

Jet2d eval_model(const ParamModel& model, std::span<const double> x);

// taped evaluation against an explicit parameter binding (trainable kinds only)
Jet2<ad::Var> eval_model_taped(const ParamModel& model, std::span<const ad::Var> theta,
                               std::span<const double> x);

void save_checkpoint(const ParamModel& model, std::uint64_t seed, const std::string& path);
ParamModel load_checkpoint(const std::string& path, std::uint64_t* seed_out = nullptr);

// full-precision decimal round trip for doubles
std::string double_to_string(double v);
double double_from_string(const std::string& s);

// ---- implementation of the templated evaluators ----

namespace model_detail {

template <class S>
Jet2<S> apply_activation(Activation act, const Jet2<S>& z) {
  switch (act) {
    case Activation::kTanh: return tanh(z);
    case Activation::kSin: return sin(z);
    case Activation::kSoftplus: {
      using std::exp;
      using std::log;
      // stable softplus branches on the point value only
      double zv = ad::value(z.v);
      if (zv > 0.0) {
        S t = exp(-z.v);
        S sig = 1.0 / (1.0 + t);
        S f0 = z.v + log(1.0 + t);
        S f2 = sig * (1.0 - sig);
        return unary_chain(z, f0, sig, f2);
      }
      S t = exp(z.v);
      S sig = t / (1.0 + t);
      S f0 = log(1.0 + t);
      S f2 = sig * (1.0 - sig);
      return unary_chain(z, f0, sig, f2);
    }
  }
  throw std::invalid_argument("unknown activation");
}

}  // namespace model_detail

template <class S>
Jet2<S> mlp_eval(const MlpArch& arch, std::span<const S> theta, std::span<const double> x) {
  const auto& w = arch.widths;
  if (w.size() < 2) throw std::invalid_argument("mlp_eval: need at least one layer");
  if (int(x.size()) != w.front()) throw std::invalid_argument("mlp_eval: input dim mismatch");
  if (long(theta.size()) != param_count(arch)) {
    throw std::invalid_argument("mlp_eval: parameter count mismatch");
  }
  const int d = w.front();

  std::vector<Jet2<S>> cur(d);
  for (int i = 0; i < d; ++i) cur[i] = jet_seed<S>(x[i], i, d);

  std::vector<Jet2<S>> next;
  std::size_t off = 0;
  const int layers = arch.depth();
  for (int l = 0; l < layers; ++l) {
    const int n_in = w[l], n_out = w[l + 1];
    next.assign(n_out, Jet2<S>{});
    for (int j = 0; j < n_out; ++j) {
      Jet2<S> acc = jet_const_s<S>(theta[off + std::size_t(n_in) * n_out + j], d);  // bias
      for (int i = 0; i < n_in; ++i) {
        jet_axpy(acc, theta[off + std::size_t(j) * n_in + i], cur[i]);
      }
      next[j] = l + 1 < layers ? model_detail::apply_activation(arch.act, acc) : acc;
    }
    off += std::size_t(n_in) * n_out + n_out;
    cur.swap(next);
  }
  if (cur.size() != 1) throw std::invalid_argument("mlp_eval: output dim must be 1");
  return cur[0];
}

// value-only forward passes (cheaper than full jets)
template <class S>
S mlp_value(const MlpArch& arch, std::span<const S> theta, std::span<const double> x) {
  using std::exp;
  using std::log;
  using std::sin;
  using std::tanh;
  const auto& w = arch.widths;
  if (int(x.size()) != w.front()) throw std::invalid_argument("mlp_value: input dim mismatch");
  if (long(theta.size()) != param_count(arch)) {
    throw std::invalid_argument("mlp_value: parameter count mismatch");
  }
  std::vector<S> cur(w.front());
  for (int i = 0; i < w.front(); ++i) cur[i] = lift<S>(x[i]);
  std::vector<S> next;
  std::size_t off = 0;
  const int layers = arch.depth();
  for (int l = 0; l < layers; ++l) {
    const int n_in = w[l], n_out = w[l + 1];
    next.assign(n_out, S{});
    for (int j = 0; j < n_out; ++j) {
      S acc = theta[off + std::size_t(n_in) * n_out + j];
      for (int i = 0; i < n_in; ++i) {
        acc = ad::madd(theta[off + std::size_t(j) * n_in + i], cur[i], acc);
      }
      if (l + 1 < layers) {
        switch (arch.act) {
          case Activation::kTanh: acc = tanh(acc); break;
          case Activation::kSin: acc = sin(acc); break;
          case Activation::kSoftplus: {
            if (ad::value(acc) > 0.0) {
              acc = acc + log(1.0 + exp(-acc));
            } else {
              acc = log(1.0 + exp(acc));
            }
            break;
          }
        }
      }
      next[j] = acc;
    }
    off += std::size_t(n_in) * n_out + n_out;
    cur.swap(next);
  }
  return cur[0];
}

template <class S>
S rbf_value(const Eigen::MatrixXd& centers, std::span<const S> theta,
            std::span<const double> x) {
  using std::exp;
  const int d = int(centers.cols());
  if (int(x.size()) != d) throw std::invalid_argument("rbf_value: input dim mismatch");
  S out{};
  bool first = true;
  for (Eigen::Index k = 0; k < centers.rows(); ++k) {
    double r2 = 0.0;
    for (int i = 0; i < d; ++i) r2 += (x[i] - centers(k, i)) * (x[i] - centers(k, i));
    S term = theta[std::size_t(k)] * std::exp(-r2);
    out = first ? term : out + term;
    first = false;
  }
  return first ? lift<S>(0.0) : out;
}

double model_value(const ParamModel& model, std::span<const double> x);

template <class S>
Jet2<S> rbf_eval(const Eigen::MatrixXd& centers, std::span<const S> theta,
                 std::span<const double> x) {
  const int d = int(centers.cols());
  if (int(x.size()) != d) throw std::invalid_argument("rbf_eval: input dim mismatch");
  if (Eigen::Index(theta.size()) != centers.rows()) {
    throw std::invalid_argument("rbf_eval: coefficient count mismatch");
  }
  std::vector<Jet2<S>> seeds(d);
  for (int i = 0; i < d; ++i) seeds[i] = jet_seed<S>(x[i], i, d);
  Jet2<S> out = jet_const<S>(0.0, d);
  for (Eigen::Index k = 0; k < centers.rows(); ++k) {
    Jet2<S> r2 = jet_const<S>(0.0, d);
    for (int i = 0; i < d; ++i) {
      Jet2<S> diff = seeds[i] - centers(k, i);
      r2 = r2 + diff * diff;
    }
    jet_axpy(out, theta[std::size_t(k)], exp(-r2));
  }
  return out;
}

}  // namespace rmlab
