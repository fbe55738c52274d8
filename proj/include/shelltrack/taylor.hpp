// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace shelltrack {

// Truncated bivariate Taylor polynomial over (x, y) up to total degree K.
// Coefficients are polynomial coefficients (derivatives divided by i!j!)
// in graded-lex order: (0,0),(1,0),(0,1),(2,0),(1,1),(0,2),(3,0),...
//
// This is the forward-mode carrier for spatial jets: seeding x = v + X and
// evaluating any composition of the closed primitive set (affine, add, mul,
// sin, cos, sqrt, reciprocal, dot, cross, normalize) yields all partial
// derivatives of the result up to order K, exact to machine precision.
template <int K>
struct Tay {
  static constexpr int order = K;
  static constexpr int ncoef = (K + 1) * (K + 2) / 2;

  std::array<double, ncoef> c{};

  Tay() = default;
  Tay(double v) { c[0] = v; }  // NOLINT: implicit from scalar is the ring embedding

  static constexpr int idx(int i, int j) {
    const int d = i + j;
    return d * (d + 1) / 2 + j;
  }

  /// Seed for the independent variable along `axis` (0 -> x, 1 -> y).
  /// `scale` folds an affine reparameterization dx/dt into the seed.
  static Tay variable(double v, int axis, double scale = 1.0) {
    Tay r;
    r.c[0] = v;
    r.c[axis == 0 ? idx(1, 0) : idx(0, 1)] = scale;
    return r;
  }

  double value() const { return c[0]; }

  Tay& operator+=(const Tay& o) {
    for (int i = 0; i < ncoef; ++i) c[i] += o.c[i];
    return *this;
  }
  Tay& operator-=(const Tay& o) {
    for (int i = 0; i < ncoef; ++i) c[i] -= o.c[i];
    return *this;
  }
  Tay& operator*=(double s) {
    for (int i = 0; i < ncoef; ++i) c[i] *= s;
    return *this;
  }

  friend Tay operator+(Tay a, const Tay& b) { return a += b; }
  friend Tay operator-(Tay a, const Tay& b) { return a -= b; }
  friend Tay operator-(const Tay& a) {
    Tay r;
    for (int i = 0; i < ncoef; ++i) r.c[i] = -a.c[i];
    return r;
  }
  friend Tay operator*(Tay a, double s) { return a *= s; }
  friend Tay operator*(double s, Tay a) { return a *= s; }
};

namespace detail {

// Monomial exponents per coefficient slot, shared across K.
inline constexpr int kTayI[10] = {0, 1, 0, 2, 1, 0, 3, 2, 1, 0};
inline constexpr int kTayJ[10] = {0, 0, 1, 0, 1, 2, 0, 1, 2, 3};

template <int K>
struct TayMulTable {
  // All (a, b, out) index triples with deg(a) + deg(b) <= K.
  struct Triple {
    std::uint8_t a, b, out;
  };
  static constexpr int count() {
    int n = 0;
    for (int p = 0; p < Tay<K>::ncoef; ++p)
      for (int q = 0; q < Tay<K>::ncoef; ++q)
        if (kTayI[p] + kTayJ[p] + kTayI[q] + kTayJ[q] <= K) ++n;
    return n;
  }
  static constexpr int size = count();
  std::array<Triple, static_cast<std::size_t>(size)> t{};

  constexpr TayMulTable() {
    int n = 0;
    for (int p = 0; p < Tay<K>::ncoef; ++p)
      for (int q = 0; q < Tay<K>::ncoef; ++q) {
        const int i = kTayI[p] + kTayI[q];
        const int j = kTayJ[p] + kTayJ[q];
        if (i + j <= K)
          t[n++] = {static_cast<std::uint8_t>(p), static_cast<std::uint8_t>(q),
                    static_cast<std::uint8_t>(Tay<K>::idx(i, j))};
      }
  }
};

template <int K>
inline constexpr TayMulTable<K> kMulTable{};

}  // namespace detail

template <int K>
inline Tay<K> operator*(const Tay<K>& a, const Tay<K>& b) {
  Tay<K> r;
  for (const auto& e : detail::kMulTable<K>.t) r.c[e.out] += a.c[e.a] * b.c[e.b];
  return r;
}

/// Transpose of (x -> x * b) applied to cotangent `cb`:
/// corr(cb, b)[a] = sum_{out = a + b} cb[out] * b[b].  This is the adjoint
/// rule for truncated-polynomial multiplication in reverse mode.
template <int K>
inline Tay<K> tay_corr(const Tay<K>& cb, const Tay<K>& b) {
  Tay<K> r;
  for (const auto& e : detail::kMulTable<K>.t) r.c[e.a] += cb.c[e.out] * b.c[e.b];
  return r;
}

/// Partial derivative as a ring element. The result is one order less
/// accurate than the input; its top-degree coefficients are zero.
template <int K>
inline Tay<K> tay_deriv(const Tay<K>& p, int axis) {
  Tay<K> r;
  for (int s = 0; s < Tay<K>::ncoef; ++s) {
    const int i = detail::kTayI[s];
    const int j = detail::kTayJ[s];
    if (axis == 0) {
      if (i + 1 + j <= K) r.c[s] = (i + 1) * p.c[Tay<K>::idx(i + 1, j)];
    } else {
      if (i + j + 1 <= K) r.c[s] = (j + 1) * p.c[Tay<K>::idx(i, j + 1)];
    }
  }
  return r;
}

/// Transpose of tay_deriv for reverse mode.
template <int K>
inline Tay<K> tay_deriv_transpose(const Tay<K>& q, int axis) {
  Tay<K> r;
  for (int s = 0; s < Tay<K>::ncoef; ++s) {
    const int i = detail::kTayI[s];
    const int j = detail::kTayJ[s];
    if (axis == 0) {
      if (i + 1 + j <= K) r.c[Tay<K>::idx(i + 1, j)] += (i + 1) * q.c[s];
    } else {
      if (i + j + 1 <= K) r.c[Tay<K>::idx(i, j + 1)] += (j + 1) * q.c[s];
    }
  }
  return r;
}

namespace detail {

// Composition with an analytic scalar function given its derivatives at the
// value part: f(a) = sum_k f^(k)(a0) / k! * (a - a0)^k, truncated at K.
template <int K>
inline Tay<K> tay_compose(const Tay<K>& a, const std::array<double, 4>& df) {
  Tay<K> w = a;
  w.c[0] = 0.0;
  Tay<K> r(df[0]);
  if constexpr (K >= 1) r += w * df[1];
  if constexpr (K >= 2) {
    const Tay<K> w2 = w * w;
    r += w2 * (df[2] / 2.0);
    if constexpr (K >= 3) r += (w2 * w) * (df[3] / 6.0);
  }
  return r;
}

}  // namespace detail

template <int K>
inline Tay<K> sin(const Tay<K>& a) {
  const double s = std::sin(a.c[0]);
  const double c = std::cos(a.c[0]);
  return detail::tay_compose<K>(a, {s, c, -s, -c});
}

template <int K>
inline Tay<K> cos(const Tay<K>& a) {
  const double c = std::cos(a.c[0]);
  const double s = std::sin(a.c[0]);
  return detail::tay_compose<K>(a, {c, -s, -c, s});
}

template <int K>
inline Tay<K> sqrt(const Tay<K>& a) {
  const double r = std::sqrt(a.c[0]);
  const double r1 = 0.5 / r;
  const double r2 = -0.5 * r1 / a.c[0];
  const double r3 = -1.5 * r2 / a.c[0];
  return detail::tay_compose<K>(a, {r, r1, r2, r3});
}

template <int K>
inline Tay<K> recip(const Tay<K>& a) {
  const double r = 1.0 / a.c[0];
  return detail::tay_compose<K>(a, {r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r});
}

template <int K>
inline Tay<K> exp(const Tay<K>& a) {
  const double e = std::exp(a.c[0]);
  return detail::tay_compose<K>(a, {e, e, e, e});
}

template <int K>
inline Tay<K> operator/(const Tay<K>& a, const Tay<K>& b) {
  return a * recip(b);
}

/// Truncate a higher-order Taylor element to a lower order.
template <int KOut, int KIn>
inline Tay<KOut> tay_truncate(const Tay<KIn>& a) {
  static_assert(KOut <= KIn);
  Tay<KOut> r;
  for (int i = 0; i < Tay<KOut>::ncoef; ++i) r.c[i] = a.c[i];
  return r;
}

template <int K>
inline double scalar_value(const Tay<K>& a) {
  return a.c[0];
}

using Tay1 = Tay<1>;
using Tay2 = Tay<2>;
using Tay3 = Tay<3>;

}  // namespace shelltrack
