// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "shelltrack/error.hpp"
#include "shelltrack/taylor.hpp"
#include "shelltrack/vec.hpp"

namespace shelltrack {

// Reverse-mode recording over a commutative ring R (double, or Tay<K> for
// gradients of losses that consume spatial derivatives). Recording a loss
// and calling backward() yields d(value part of loss)/d(leaf) for every
// parameter leaf. Replay on identical inputs is bit-identical: the node
// list is append-only and the reverse sweep is a fixed-order loop.
//
// A Tape is confined to one thread for its lifetime; gradient vectors
// extracted from it are plain values and may be shared freely.
template <class R>
class Tape {
 public:
  enum class Op : std::uint8_t {
    kConst,
    kLeaf,
    kAdd,
    kSub,
    kNeg,
    kMul,
    kAffine,  // val = a * aux + aux2
    kSin,
    kCos,
    kSqrt,
    kRecip,
    kExp,
    kDeriv,  // val = d(a)/d(xi_axis), axis in aux
    kDot,    // val = sum over pairs[a .. a+b) of val[p] * val[q]
  };

  struct Node {
    Op op;
    std::int32_t a = -1;
    std::int32_t b = -1;
    double aux = 0.0;
    double aux2 = 0.0;
  };

  class Var {
   public:
    Var() = default;
    Var(Tape* t, std::int32_t i) : tape_(t), idx_(i) {}

    const R& ring_value() const { return tape_->val_[idx_]; }
    double value() const { return scalar_value(tape_->val_[idx_]); }
    std::int32_t index() const { return idx_; }
    Tape* tape() const { return tape_; }

    friend Var operator+(const Var& x, const Var& y) { return x.tape_->binary(Op::kAdd, x, y); }
    friend Var operator-(const Var& x, const Var& y) { return x.tape_->binary(Op::kSub, x, y); }
    friend Var operator*(const Var& x, const Var& y) { return x.tape_->binary(Op::kMul, x, y); }
    friend Var operator-(const Var& x) { return x.tape_->unary(Op::kNeg, x); }
    friend Var operator*(const Var& x, double s) { return x.tape_->affine(x, s, 0.0); }
    friend Var operator*(double s, const Var& x) { return x.tape_->affine(x, s, 0.0); }
    friend Var operator+(const Var& x, double s) { return x.tape_->affine(x, 1.0, s); }
    friend Var operator+(double s, const Var& x) { return x.tape_->affine(x, 1.0, s); }
    friend Var operator-(const Var& x, double s) { return x.tape_->affine(x, 1.0, -s); }
    friend Var operator-(double s, const Var& x) { return x.tape_->affine(x, -1.0, s); }
    friend Var operator/(const Var& x, const Var& y) { return x * recip(y); }
    Var& operator+=(const Var& o) { return *this = *this + o; }
    Var& operator-=(const Var& o) { return *this = *this - o; }

    friend Var sin(const Var& x) { return x.tape_->unary(Op::kSin, x); }
    friend Var cos(const Var& x) { return x.tape_->unary(Op::kCos, x); }
    friend Var sqrt(const Var& x) { return x.tape_->unary(Op::kSqrt, x); }
    friend Var recip(const Var& x) { return x.tape_->unary(Op::kRecip, x); }
    friend Var exp(const Var& x) { return x.tape_->unary(Op::kExp, x); }
    friend Var tay_deriv(const Var& x, int axis) { return x.tape_->deriv(x, axis); }
    friend double scalar_value(const Var& x) { return x.value(); }

   private:
    Tape* tape_ = nullptr;
    std::int32_t idx_ = -1;
  };

  Var constant(const R& v) { return push(Node{Op::kConst}, v); }
  Var zero() { return constant(R(0.0)); }

  /// Register a scalar parameter. Leaves are addressed by registration order.
  Var leaf(double v) {
    Var x = push(Node{Op::kLeaf}, R(v));
    leaves_.push_back(x.index());
    return x;
  }

  std::size_t leaf_count() const { return leaves_.size(); }

  /// Fused inner product: sum_i lhs[i] * rhs[i]. One node regardless of n.
  Var dot_product(const Var* lhs, const Var* rhs, int n) {
    const auto ofs = static_cast<std::int32_t>(pairs_.size());
    for (int i = 0; i < n; ++i) pairs_.push_back({lhs[i].index(), rhs[i].index()});
    R acc(0.0);
    for (int i = 0; i < n; ++i) acc += ring_mul(val_[lhs[i].index()], val_[rhs[i].index()]);
    Node nd{Op::kDot};
    nd.a = ofs;
    nd.b = n;
    return push(nd, acc);
  }

  /// Reverse sweep seeding d/d(value part of `loss`) = 1.
  void backward(const Var& loss) {
    adj_.assign(nodes_.size(), R(0.0));
    reached_.assign(nodes_.size(), 0);
    adj_[loss.index()] = R(1.0);
    reached_[loss.index()] = 1;
    for (std::int32_t i = static_cast<std::int32_t>(nodes_.size()) - 1; i >= 0; --i) {
      if (!reached_[i]) continue;
      const Node& nd = nodes_[i];
      const R& g = adj_[i];
      switch (nd.op) {
        case Op::kConst:
        case Op::kLeaf:
          break;
        case Op::kAdd:
          accum(nd.a, g);
          accum(nd.b, g);
          break;
        case Op::kSub:
          accum(nd.a, g);
          accum_neg(nd.b, g);
          break;
        case Op::kNeg:
          accum_neg(nd.a, g);
          break;
        case Op::kMul:
          accum(nd.a, ring_corr(g, val_[nd.b]));
          accum(nd.b, ring_corr(g, val_[nd.a]));
          break;
        case Op::kAffine:
          accum(nd.a, ring_scale(g, nd.aux));
          break;
        case Op::kSin:
          accum(nd.a, ring_corr(g, ring_cos(val_[nd.a])));
          break;
        case Op::kCos:
          accum_neg(nd.a, ring_corr(g, ring_sin(val_[nd.a])));
          break;
        case Op::kSqrt:
          accum(nd.a, ring_corr(g, ring_scale(ring_recip(val_[i]), 0.5)));
          break;
        case Op::kRecip:
          accum_neg(nd.a, ring_corr(g, ring_mul(val_[i], val_[i])));
          break;
        case Op::kExp:
          accum(nd.a, ring_corr(g, val_[i]));
          break;
        case Op::kDeriv:
          accum(nd.a, ring_deriv_transpose(g, static_cast<int>(nd.aux)));
          break;
        case Op::kDot:
          for (std::int32_t p = nd.a; p < nd.a + nd.b; ++p) {
            accum(pairs_[p].first, ring_corr(g, val_[pairs_[p].second]));
            accum(pairs_[p].second, ring_corr(g, val_[pairs_[p].first]));
          }
          break;
      }
    }
  }

  /// d(loss)/d(leaf ordinal k); valid after backward().
  double leaf_grad(std::size_t k) const { return scalar_value(adj_[leaves_[k]]); }

  bool leaf_reached(std::size_t k) const { return reached_[leaves_[k]] != 0; }

  /// Drop all recorded nodes but keep capacity for reuse.
  void clear() {
    nodes_.clear();
    val_.clear();
    adj_.clear();
    pairs_.clear();
    leaves_.clear();
    reached_.clear();
  }

  std::size_t size() const { return nodes_.size(); }

  // Op builders are public so Var's operator friends can call them; user
  // code goes through the operator surface.
  Var unary(Op op, const Var& x) {
    Node nd{op};
    nd.a = x.index();
    switch (op) {
      case Op::kNeg:
        return push(nd, ring_scale(val_[x.index()], -1.0));
      case Op::kSin:
        return push(nd, ring_sin(val_[x.index()]));
      case Op::kCos:
        return push(nd, ring_cos(val_[x.index()]));
      case Op::kSqrt:
        return push(nd, ring_sqrt(val_[x.index()]));
      case Op::kRecip:
        return push(nd, ring_recip(val_[x.index()]));
      case Op::kExp:
        return push(nd, ring_exp(val_[x.index()]));
      default:
        throw CapabilityError("tape: unsupported unary op");
    }
  }

  Var binary(Op op, const Var& x, const Var& y) {
    Node nd{op};
    nd.a = x.index();
    nd.b = y.index();
    const R& a = val_[x.index()];
    const R& b = val_[y.index()];
    switch (op) {
      case Op::kAdd:
        return push(nd, ring_add(a, b));
      case Op::kSub:
        return push(nd, ring_sub(a, b));
      case Op::kMul:
        return push(nd, ring_mul(a, b));
      default:
        throw CapabilityError("tape: unsupported binary op");
    }
  }

  Var affine(const Var& x, double s, double t) {
    Node nd{Op::kAffine};
    nd.a = x.index();
    nd.aux = s;
    nd.aux2 = t;
    R v = ring_scale(val_[x.index()], s);
    v += R(t);
    return push(nd, v);
  }

  Var deriv(const Var& x, int axis) {
    Node nd{Op::kDeriv};
    nd.a = x.index();
    nd.aux = axis;
    return push(nd, ring_deriv(val_[x.index()], axis));
  }

 private:
  Var push(Node nd, const R& v) {
    nodes_.push_back(nd);
    val_.push_back(v);
    return Var(this, static_cast<std::int32_t>(nodes_.size() - 1));
  }

  void accum(std::int32_t i, const R& g) {
    adj_[i] += g;
    reached_[i] = 1;
  }
  void accum_neg(std::int32_t i, const R& g) {
    adj_[i] -= g;
    reached_[i] = 1;
  }

  // Ring operation shims shared by double and Tay<K>.
  static R ring_add(const R& a, const R& b) { return a + b; }
  static R ring_sub(const R& a, const R& b) { return a - b; }
  static R ring_mul(const R& a, const R& b) { return a * b; }
  static R ring_scale(const R& a, double s) { return a * s; }
  static R ring_sin(const R& a) {
    using std::sin;
    return sin(a);
  }
  static R ring_cos(const R& a) {
    using std::cos;
    return cos(a);
  }
  static R ring_sqrt(const R& a) {
    using std::sqrt;
    return sqrt(a);
  }
  static R ring_recip(const R& a) { return recip(a); }
  static R ring_exp(const R& a) {
    using std::exp;
    return exp(a);
  }

  static double ring_corr(double g, double v) { return g * v; }
  template <int K>
  static Tay<K> ring_corr(const Tay<K>& g, const Tay<K>& v) {
    return tay_corr(g, v);
  }
  static double ring_deriv(double, int) { return 0.0; }
  template <int K>
  static Tay<K> ring_deriv(const Tay<K>& a, int axis) {
    return tay_deriv(a, axis);
  }
  static double ring_deriv_transpose(double, int) { return 0.0; }
  template <int K>
  static Tay<K> ring_deriv_transpose(const Tay<K>& a, int axis) {
    return tay_deriv_transpose(a, axis);
  }

  std::vector<Node> nodes_;
  std::vector<R> val_;
  std::vector<R> adj_;
  std::vector<std::pair<std::int32_t, std::int32_t>> pairs_;
  std::vector<std::int32_t> leaves_;
  std::vector<std::uint8_t> reached_;
};

template <class R>
using TVar = typename Tape<R>::Var;

struct GradResult {
  std::vector<double> grad;
  /// False when the loss is not connected to the parameter set; the
  /// gradient is then identically zero.
  bool connected = false;
};

/// Gradient of a recorded scalar loss over the tape's leaf parameters.
template <class R>
GradResult grad_params(Tape<R>& tape, const TVar<R>& loss) {
  tape.backward(loss);
  GradResult r;
  r.grad.resize(tape.leaf_count());
  for (std::size_t k = 0; k < tape.leaf_count(); ++k) {
    r.grad[k] = tape.leaf_grad(k);
    r.connected = r.connected || tape.leaf_reached(k);
  }
  return r;
}

}  // namespace shelltrack
