#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "rmlab/tape.hpp"

namespace rmlab {

// Second-order forward jet in up to 3 spatial directions. The scalar type S is
// either double (plain evaluation) or ad::Var (every arithmetic step is also
// recorded on the active tape, giving derivatives of the jet components with
// respect to model parameters).
inline constexpr int kMaxDim = 3;

constexpr int tri_size(int d) { return d * (d + 1) / 2; }

constexpr int tri_index(int i, int j, int d) {
  // upper triangle, row-major, i <= j
  return i * d - i * (i - 1) / 2 + (j - i);
}

template <class S>
S lift(double c) {
  if constexpr (std::is_same_v<S, ad::Var>) {
    return ad::active_tape().constant(c);
  } else {
    return c;
  }
}

template <class S>
struct Jet2 {
  S v{};
  std::array<S, kMaxDim> g{};
  std::array<S, tri_size(kMaxDim)> h{};
  int d = 1;

  S d1(int i) const { return g[i]; }
  S d2(int i, int j) const { return h[tri_index(i <= j ? i : j, i <= j ? j : i, d)]; }
};

using Jet2d = Jet2<double>;

template <class S>
Jet2<S> jet_const_s(S c, int d) {
  Jet2<S> j;
  j.d = d;
  j.v = c;
  return j;
}

template <class S>
Jet2<S> jet_const(double c, int d) {
  return jet_const_s<S>(lift<S>(c), d);
}

// seed for the coordinate `axis` at position x
template <class S>
Jet2<S> jet_seed(double x, int axis, int d) {
  if (axis < 0 || axis >= d || d < 1 || d > kMaxDim) {
    throw std::invalid_argument("jet_seed: bad axis/dim");
  }
  Jet2<S> j = jet_const_s<S>(lift<S>(x), d);
  j.g[axis] = lift<S>(1.0);
  return j;
}

namespace jet_detail {

inline void check_dims(int a, int b) {
  if (a != b) throw std::invalid_argument("jet dimension mismatch");
}

}  // namespace jet_detail

template <class S>
Jet2<S> operator+(const Jet2<S>& a, const Jet2<S>& b) {
  jet_detail::check_dims(a.d, b.d);
  Jet2<S> w;
  w.d = a.d;
  w.v = a.v + b.v;
  for (int i = 0; i < a.d; ++i) w.g[i] = a.g[i] + b.g[i];
  for (int k = 0; k < tri_size(a.d); ++k) w.h[k] = a.h[k] + b.h[k];
  return w;
}

template <class S>
Jet2<S> operator-(const Jet2<S>& a, const Jet2<S>& b) {
  jet_detail::check_dims(a.d, b.d);
  Jet2<S> w;
  w.d = a.d;
  w.v = a.v - b.v;
  for (int i = 0; i < a.d; ++i) w.g[i] = a.g[i] - b.g[i];
  for (int k = 0; k < tri_size(a.d); ++k) w.h[k] = a.h[k] - b.h[k];
  return w;
}

template <class S>
Jet2<S> operator-(const Jet2<S>& a) {
  Jet2<S> w;
  w.d = a.d;
  w.v = -a.v;
  for (int i = 0; i < a.d; ++i) w.g[i] = -a.g[i];
  for (int k = 0; k < tri_size(a.d); ++k) w.h[k] = -a.h[k];
  return w;
}

template <class S>
Jet2<S> operator*(const Jet2<S>& a, const Jet2<S>& b) {
  jet_detail::check_dims(a.d, b.d);
  Jet2<S> w;
  w.d = a.d;
  w.v = a.v * b.v;
  for (int i = 0; i < a.d; ++i) w.g[i] = ad::madd(a.g[i], b.v, a.v * b.g[i]);
  for (int i = 0; i < a.d; ++i) {
    for (int j = i; j < a.d; ++j) {
      int k = tri_index(i, j, a.d);
      w.h[k] = a.h[k] * b.v + a.g[i] * b.g[j] + a.g[j] * b.g[i] + a.v * b.h[k];
    }
  }
  return w;
}

template <class S>
Jet2<S> operator/(const Jet2<S>& a, const Jet2<S>& b) {
  jet_detail::check_dims(a.d, b.d);
  Jet2<S> w;
  w.d = a.d;
  w.v = a.v / b.v;
  for (int i = 0; i < a.d; ++i) w.g[i] = (a.g[i] - w.v * b.g[i]) / b.v;
  for (int i = 0; i < a.d; ++i) {
    for (int j = i; j < a.d; ++j) {
      int k = tri_index(i, j, a.d);
      w.h[k] = (a.h[k] - w.v * b.h[k] - w.g[i] * b.g[j] - w.g[j] * b.g[i]) / b.v;
    }
  }
  return w;
}

template <class S>
Jet2<S> operator+(const Jet2<S>& a, double c) {
  Jet2<S> w = a;
  w.v = a.v + c;
  return w;
}
template <class S>
Jet2<S> operator+(double c, const Jet2<S>& a) {
  return a + c;
}
template <class S>
Jet2<S> operator-(const Jet2<S>& a, double c) {
  return a + (-c);
}
template <class S>
Jet2<S> operator-(double c, const Jet2<S>& a) {
  Jet2<S> w = -a;
  w.v = c - a.v;
  return w;
}
template <class S>
Jet2<S> operator*(const Jet2<S>& a, double c) {
  Jet2<S> w;
  w.d = a.d;
  w.v = a.v * c;
  for (int i = 0; i < a.d; ++i) w.g[i] = a.g[i] * c;
  for (int k = 0; k < tri_size(a.d); ++k) w.h[k] = a.h[k] * c;
  return w;
}
template <class S>
Jet2<S> operator*(double c, const Jet2<S>& a) {
  return a * c;
}
template <class S>
Jet2<S> operator/(const Jet2<S>& a, double c) {
  return a * (1.0 / c);
}

// componentwise scale by a scalar of the jet's own scalar type
template <class S>
Jet2<S> jet_scale_s(const Jet2<S>& a, S s) {
  Jet2<S> w;
  w.d = a.d;
  w.v = a.v * s;
  for (int i = 0; i < a.d; ++i) w.g[i] = a.g[i] * s;
  for (int k = 0; k < tri_size(a.d); ++k) w.h[k] = a.h[k] * s;
  return w;
}

// acc += w * in, one fused multiply-add per component (keeps tapes small)
template <class S>
void jet_axpy(Jet2<S>& acc, S w, const Jet2<S>& in) {
  jet_detail::check_dims(acc.d, in.d);
  acc.v = ad::madd(w, in.v, acc.v);
  for (int i = 0; i < in.d; ++i) acc.g[i] = ad::madd(w, in.g[i], acc.g[i]);
  for (int k = 0; k < tri_size(in.d); ++k) acc.h[k] = ad::madd(w, in.h[k], acc.h[k]);
}

// f(u) with f0 = f(u.v), f1 = f'(u.v), f2 = f''(u.v)
template <class S>
Jet2<S> unary_chain(const Jet2<S>& u, S f0, S f1, S f2) {
  Jet2<S> w;
  w.d = u.d;
  w.v = f0;
  for (int i = 0; i < u.d; ++i) w.g[i] = f1 * u.g[i];
  for (int i = 0; i < u.d; ++i) {
    for (int j = i; j < u.d; ++j) {
      int k = tri_index(i, j, u.d);
      w.h[k] = f2 * u.g[i] * u.g[j] + f1 * u.h[k];
    }
  }
  return w;
}

template <class S>
Jet2<S> exp(const Jet2<S>& u) {
  using std::exp;
  S e = exp(u.v);
  return unary_chain(u, e, e, e);
}

template <class S>
Jet2<S> log(const Jet2<S>& u) {
  using std::log;
  S f0 = log(u.v);
  S f1 = lift<S>(1.0) / u.v;
  S f2 = -f1 * f1;
  return unary_chain(u, f0, f1, f2);
}

template <class S>
Jet2<S> tanh(const Jet2<S>& u) {
  using std::tanh;
  S s = tanh(u.v);
  S one_m = 1.0 - s * s;
  return unary_chain(u, s, one_m, -2.0 * (s * one_m));
}

template <class S>
Jet2<S> sin(const Jet2<S>& u) {
  using std::cos;
  using std::sin;
  S s = sin(u.v);
  S c = cos(u.v);
  return unary_chain(u, s, c, -s);
}

template <class S>
Jet2<S> cos(const Jet2<S>& u) {
  using std::cos;
  using std::sin;
  S c = cos(u.v);
  S s = sin(u.v);
  return unary_chain(u, c, -s, -c);
}

template <class S>
Jet2<S> sqrt(const Jet2<S>& u) {
  using std::sqrt;
  S r = sqrt(u.v);
  S f1 = 0.5 / r;
  S f2 = -0.5 * (f1 / u.v);
  return unary_chain(u, r, f1, f2);
}

template <class S>
Jet2<S> pow(const Jet2<S>& u, double k) {
  using std::pow;
  if (k == 0.0) return jet_const<S>(1.0, u.d);
  if (k == 1.0) return u;
  if (k == 2.0) return u * u;
  S f0 = pow(u.v, k);
  S f1 = k * pow(u.v, k - 1.0);
  S f2 = (k * (k - 1.0)) * pow(u.v, k - 2.0);
  return unary_chain(u, f0, f1, f2);
}

// u^w for jet exponent; requires u.v > 0
template <class S>
Jet2<S> pow(const Jet2<S>& u, const Jet2<S>& w) {
  using std::log;
  using std::pow;
  jet_detail::check_dims(u.d, w.d);
  S f = pow(u.v, w.v);
  S lu = log(u.v);
  S fu = w.v * pow(u.v, w.v - 1.0);
  S fw = f * lu;
  S fuu = (w.v * (w.v - 1.0)) * pow(u.v, w.v - 2.0);
  S fuw = pow(u.v, w.v - 1.0) * (1.0 + w.v * lu);
  S fww = f * lu * lu;
  Jet2<S> out;
  out.d = u.d;
  out.v = f;
  for (int i = 0; i < u.d; ++i) out.g[i] = fu * u.g[i] + fw * w.g[i];
  for (int i = 0; i < u.d; ++i) {
    for (int j = i; j < u.d; ++j) {
      int k = tri_index(i, j, u.d);
      out.h[k] = fuu * u.g[i] * u.g[j] + fuw * (u.g[i] * w.g[j] + u.g[j] * w.g[i]) +
                 fww * w.g[i] * w.g[j] + fu * u.h[k] + fw * w.h[k];
    }
  }
  return out;
}

template <class S>
Jet2<S> abs_smooth(const Jet2<S>& u, double kappa = 1e-12) {
  using ad::abs_smooth;
  S r = abs_smooth(u.v, kappa);
  S f1 = u.v / r;
  S f2 = (1.0 - f1 * f1) / r;
  return unary_chain(u, r, f1, f2);
}

// registered primitive set, dispatchable by name (used by the derivative
// cross-checks, which build random compositions)
enum class JetOp : std::uint8_t {
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kExp,
  kLog,
  kTanh,
  kSin,
  kCos,
  kSqrt,
  kPowConst,
  kPow,
  kAbsSmooth
};

constexpr bool jet_op_is_binary(JetOp op) {
  return op == JetOp::kAdd || op == JetOp::kSub || op == JetOp::kMul || op == JetOp::kDiv ||
         op == JetOp::kPow;
}

template <class S>
Jet2<S> jet_apply(JetOp op, const Jet2<S>& a, const Jet2<S>* b = nullptr, double imm = 0.0) {
  switch (op) {
    case JetOp::kAdd: return a + *b;
    case JetOp::kSub: return a - *b;
    case JetOp::kMul: return a * *b;
    case JetOp::kDiv: return a / *b;
    case JetOp::kNeg: return -a;
    case JetOp::kExp: return exp(a);
    case JetOp::kLog: return log(a);
    case JetOp::kTanh: return tanh(a);
    case JetOp::kSin: return sin(a);
    case JetOp::kCos: return cos(a);
    case JetOp::kSqrt: return sqrt(a);
    case JetOp::kPowConst: return pow(a, imm);
    case JetOp::kPow: return pow(a, *b);
    case JetOp::kAbsSmooth: return abs_smooth(a, imm);
  }
  throw std::invalid_argument("jet_apply: unknown op");
}

}  // namespace rmlab
