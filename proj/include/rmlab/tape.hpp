#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rmlab::ad {

enum class Op : std::uint8_t {
  kConst,
  kInput,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kScale,    // imm * a, imm in pa
  kAddImm,   // a + imm, imm in pb
  kImmSub,   // imm - a, imm in pb
  kFma,      // a * b + c
  kPowC,     // a ^ imm, imm in pb... partials recomputed at record time
  kPow,      // a ^ b, both variable
  kExp,
  kLog,
  kTanh,
  kSin,
  kCos,
  kSqrt,
  kAbsSmooth  // sqrt(a^2 + kappa^2), kappa in pb
};

struct Node {
  std::uint32_t a = 0, b = 0, c = 0;
  double pa = 0.0, pb = 0.0;  // local partials wrt a, b (partial wrt c is always 1)
  double val = 0.0;
  Op op = Op::kConst;
};

struct Var {
  std::uint32_t i = 0;  // node 0 is the constant 0, so Var{} is a valid zero
};

class Tape;

namespace detail {
inline thread_local Tape* active = nullptr;
}

inline Tape& active_tape() {
  if (!detail::active) throw std::logic_error("no active tape in scope");
  return *detail::active;
}

// Scalar reverse-mode tape. Nodes are stored flat in evaluation order with
// local partials computed during the forward pass, so the reverse sweep only
// reads stored values. replay() re-executes the exact forward arithmetic and
// must reproduce every stored value bit-for-bit.
class Tape {
public:
  Tape() { reset(); }

  void reset() {
    nodes_.clear();
    inputs_.clear();
    nodes_.push_back(Node{});  // node 0: constant 0
  }

  void reserve(std::size_t n) { nodes_.reserve(n); }
  std::size_t size() const { return nodes_.size(); }

  Var constant(double v) {
    Node n;
    n.op = Op::kConst;
    n.val = v;
    return push(n);
  }

  Var input(double v) {
    Node n;
    n.op = Op::kInput;
    n.val = v;
    Var x = push(n);
    inputs_.push_back(x.i);
    return x;
  }

  std::size_t input_count() const { return inputs_.size(); }

  double value(Var x) const { return nodes_[x.i].val; }

  Var binary(Op op, Var a, Var b, double val, double pa, double pb) {
    Node n;
    n.op = op;
    n.a = a.i;
    n.b = b.i;
    n.val = val;
    n.pa = pa;
    n.pb = pb;
    return push(n);
  }

  Var unary(Op op, Var a, double val, double pa, double imm = 0.0) {
    Node n;
    n.op = op;
    n.a = a.i;
    n.val = val;
    n.pa = pa;
    n.pb = imm;
    return push(n);
  }

  Var scale(Var a, double k) {
    Node n;
    n.op = Op::kScale;
    n.a = a.i;
    n.val = k * nodes_[a.i].val;
    n.pa = k;
    return push(n);
  }

  Var fma(Var a, Var b, Var c) {
    Node n;
    n.op = Op::kFma;
    n.a = a.i;
    n.b = b.i;
    n.c = c.i;
    n.val = nodes_[a.i].val * nodes_[b.i].val + nodes_[c.i].val;
    n.pa = nodes_[b.i].val;
    n.pb = nodes_[a.i].val;
    return push(n);
  }

  // Reverse sweep from `out`; adjoints of all nodes become available.
  void backward(Var out) {
    check_finite();
    adj_.assign(nodes_.size(), 0.0);
    adj_[out.i] = 1.0;
    for (std::size_t k = nodes_.size(); k-- > 1;) {
      const Node& n = nodes_[k];
      const double w = adj_[k];
      if (w == 0.0) continue;
      switch (n.op) {
        case Op::kConst:
        case Op::kInput:
          break;
        case Op::kFma:
          adj_[n.a] += w * n.pa;
          adj_[n.b] += w * n.pb;
          adj_[n.c] += w;
          break;
        case Op::kAdd:
        case Op::kSub:
        case Op::kMul:
        case Op::kDiv:
        case Op::kPow:
          adj_[n.a] += w * n.pa;
          adj_[n.b] += w * n.pb;
          break;
        default:  // unary, including immediate forms
          adj_[n.a] += w * n.pa;
          break;
      }
    }
  }

  double adjoint(Var x) const { return adj_[x.i]; }

  void input_adjoints(std::span<double> out) const {
    if (out.size() != inputs_.size()) throw std::invalid_argument("input_adjoints: size mismatch");
    for (std::size_t i = 0; i < inputs_.size(); ++i) out[i] = adj_[inputs_[i]];
  }

  // Recompute the forward pass from the recorded graph; returns the largest
  // absolute deviation from the stored values (0 when bit-identical).
  double replay_max_diff() const {
    std::vector<double> v(nodes_.size());
    double worst = 0.0;
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      const Node& n = nodes_[k];
      double r = 0.0;
      switch (n.op) {
        case Op::kConst:
        case Op::kInput: r = n.val; break;
        case Op::kAdd: r = v[n.a] + v[n.b]; break;
        case Op::kSub: r = v[n.a] - v[n.b]; break;
        case Op::kMul: r = v[n.a] * v[n.b]; break;
        case Op::kDiv: r = v[n.a] / v[n.b]; break;
        case Op::kNeg: r = -v[n.a]; break;
        case Op::kScale: r = n.pa * v[n.a]; break;
        case Op::kAddImm: r = v[n.a] + n.pb; break;
        case Op::kImmSub: r = n.pb - v[n.a]; break;
        case Op::kFma: r = v[n.a] * v[n.b] + v[n.c]; break;
        case Op::kPowC: r = powc_value(v[n.a], n.pb); break;
        case Op::kPow: r = std::pow(v[n.a], v[n.b]); break;
        case Op::kExp: r = std::exp(v[n.a]); break;
        case Op::kLog: r = std::log(v[n.a]); break;
        case Op::kTanh: r = std::tanh(v[n.a]); break;
        case Op::kSin: r = std::sin(v[n.a]); break;
        case Op::kCos: r = std::cos(v[n.a]); break;
        case Op::kSqrt: r = std::sqrt(v[n.a]); break;
        case Op::kAbsSmooth: r = std::sqrt(v[n.a] * v[n.a] + n.pb * n.pb); break;
      }
      v[k] = r;
      double d = std::abs(r - n.val);
      if (d > worst) worst = d;
    }
    return worst;
  }

  static double powc_value(double x, double k) {
    if (k == 0.0) return 1.0;
    if (k == 1.0) return x;
    if (k == 2.0) return x * x;
    return std::pow(x, k);
  }

private:
  Var push(Node n) {
    nodes_.push_back(n);
    return Var{std::uint32_t(nodes_.size() - 1)};
  }

  void check_finite() const {
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      if (!std::isfinite(nodes_[k].val)) {
        throw std::runtime_error("non-finite value at tape node " + std::to_string(k) +
                                 " (op " + std::to_string(int(nodes_[k].op)) + ")");
      }
    }
  }

  std::vector<Node> nodes_;
  std::vector<double> adj_;
  std::vector<std::uint32_t> inputs_;
};

struct TapeScope {
  explicit TapeScope(Tape& t) : prev(detail::active) { detail::active = &t; }
  ~TapeScope() { detail::active = prev; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;
  Tape* prev;
};

inline double value(Var x) { return active_tape().value(x); }
inline double value(double x) { return x; }

inline Var operator+(Var a, Var b) {
  Tape& t = active_tape();
  return t.binary(Op::kAdd, a, b, t.value(a) + t.value(b), 1.0, 1.0);
}
inline Var operator-(Var a, Var b) {
  Tape& t = active_tape();
  return t.binary(Op::kSub, a, b, t.value(a) - t.value(b), 1.0, -1.0);
}
inline Var operator*(Var a, Var b) {
  Tape& t = active_tape();
  double va = t.value(a), vb = t.value(b);
  return t.binary(Op::kMul, a, b, va * vb, vb, va);
}
inline Var operator/(Var a, Var b) {
  Tape& t = active_tape();
  double va = t.value(a), vb = t.value(b);
  if (vb == 0.0) throw std::domain_error("division by zero on tape");
  double r = va / vb;
  return t.binary(Op::kDiv, a, b, r, 1.0 / vb, -r / vb);
}
inline Var operator-(Var a) {
  Tape& t = active_tape();
  return t.unary(Op::kNeg, a, -t.value(a), -1.0);
}
inline Var operator+(Var a, double k) {
  Tape& t = active_tape();
  return t.unary(Op::kAddImm, a, t.value(a) + k, 1.0, k);
}
inline Var operator+(double k, Var a) { return a + k; }
inline Var operator-(Var a, double k) { return a + (-k); }
inline Var operator-(double k, Var a) {
  Tape& t = active_tape();
  return t.unary(Op::kImmSub, a, k - t.value(a), -1.0, k);
}
inline Var operator*(Var a, double k) { return active_tape().scale(a, k); }
inline Var operator*(double k, Var a) { return active_tape().scale(a, k); }
inline Var operator/(Var a, double k) {
  if (k == 0.0) throw std::domain_error("division by zero on tape");
  return active_tape().scale(a, 1.0 / k);
}
inline Var operator/(double k, Var a) {
  Tape& t = active_tape();
  return k == 1.0 ? t.binary(Op::kDiv, t.constant(1.0), a, 1.0 / t.value(a), 1.0 / t.value(a),
                             -1.0 / (t.value(a) * t.value(a)))
                  : t.constant(k) / a;
}

// a*b + c with the same rounding sequence as the plain-double expression
inline Var madd(Var a, Var b, Var c) { return active_tape().fma(a, b, c); }
inline double madd(double a, double b, double c) { return a * b + c; }

inline Var exp(Var a) {
  Tape& t = active_tape();
  double e = std::exp(t.value(a));
  return t.unary(Op::kExp, a, e, e);
}
inline Var log(Var a) {
  Tape& t = active_tape();
  double v = t.value(a);
  if (v <= 0.0) throw std::domain_error("log of non-positive value on tape");
  return t.unary(Op::kLog, a, std::log(v), 1.0 / v);
}
inline Var tanh(Var a) {
  Tape& t = active_tape();
  double s = std::tanh(t.value(a));
  return t.unary(Op::kTanh, a, s, 1.0 - s * s);
}
inline Var sin(Var a) {
  Tape& t = active_tape();
  double v = t.value(a);
  return t.unary(Op::kSin, a, std::sin(v), std::cos(v));
}
inline Var cos(Var a) {
  Tape& t = active_tape();
  double v = t.value(a);
  return t.unary(Op::kCos, a, std::cos(v), -std::sin(v));
}
inline Var sqrt(Var a) {
  Tape& t = active_tape();
  double v = t.value(a);
  if (v < 0.0) throw std::domain_error("sqrt of negative value on tape");
  double r = std::sqrt(v);
  return t.unary(Op::kSqrt, a, r, r > 0.0 ? 0.5 / r : 0.0);
}
inline Var pow(Var a, double k) {
  Tape& t = active_tape();
  double v = t.value(a);
  if (v < 0.0 && k != std::floor(k)) throw std::domain_error("pow of negative base on tape");
  double r = Tape::powc_value(v, k);
  double d;
  if (k == 0.0) d = 0.0;
  else if (k == 1.0) d = 1.0;
  else if (k == 2.0) d = 2.0 * v;
  else d = k * std::pow(v, k - 1.0);
  return t.unary(Op::kPowC, a, r, d, k);
}
inline Var pow(Var a, Var b) {
  Tape& t = active_tape();
  double va = t.value(a), vb = t.value(b);
  if (va <= 0.0) throw std::domain_error("pow with variable exponent needs positive base");
  double r = std::pow(va, vb);
  return t.binary(Op::kPow, a, b, r, vb * std::pow(va, vb - 1.0), r * std::log(va));
}
inline Var abs_smooth(Var a, double kappa = 1e-12) {
  Tape& t = active_tape();
  double v = t.value(a);
  double r = std::sqrt(v * v + kappa * kappa);
  return t.unary(Op::kAbsSmooth, a, r, r > 0.0 ? v / r : 0.0, kappa);
}
inline double abs_smooth(double a, double kappa = 1e-12) {
  return std::sqrt(a * a + kappa * kappa);
}

// Builds a fresh tape, runs `f(theta_vars) -> Var`, and returns the loss value
// together with d loss / d theta. Throws on non-finite values (forward) or
// non-finite gradient entries.
template <class F>
std::pair<double, std::vector<double>> grad_params(F&& f, std::span<const double> theta,
                                                   Tape* reuse = nullptr) {
  Tape local;
  Tape& tape = reuse ? *reuse : local;
  tape.reset();
  TapeScope scope(tape);
  std::vector<Var> vars(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) vars[i] = tape.input(theta[i]);
  Var loss = f(std::span<const Var>(vars));
  tape.backward(loss);
  std::vector<double> grad(theta.size());
  tape.input_adjoints(grad);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      throw std::runtime_error("non-finite gradient component " + std::to_string(i));
    }
  }
  return {tape.value(loss), std::move(grad)};
}

}  // namespace rmlab::ad
