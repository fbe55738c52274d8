// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include "shelltrack/error.hpp"
#include "shelltrack/taylor.hpp"
#include "shelltrack/vec.hpp"

namespace shelltrack {

// Spatial jet of a 2D -> 3D map: value and exact partial derivatives with
// respect to the chart coordinates, up to third order. Derivative blocks
// are reconstructed from Taylor coefficients, so d2 is symmetric in its two
// chart indices and d3 under any permutation, exactly.
struct SpatialJet {
  int order = 1;
  Vec3d value{};
  double d1[3][2]{};
  double d2[3][2][2]{};
  double d3[3][2][2][2]{};

  Vec3d d1_col(int a) const { return {d1[0][a], d1[1][a], d1[2][a]}; }
  Vec3d d2_col(int a, int b) const { return {d2[0][a][b], d2[1][a][b], d2[2][a][b]}; }
  Vec3d d3_col(int a, int b, int c) const {
    return {d3[0][a][b][c], d3[1][a][b][c], d3[2][a][b][c]};
  }
};

namespace detail {

template <int K>
inline void fill_component(SpatialJet& jet, int comp, const Tay<K>& t) {
  jet.value[comp] = t.c[0];
  jet.d1[comp][0] = t.c[Tay<K>::idx(1, 0)];
  jet.d1[comp][1] = t.c[Tay<K>::idx(0, 1)];
  if constexpr (K >= 2) {
    const double dxx = 2.0 * t.c[Tay<K>::idx(2, 0)];
    const double dxy = t.c[Tay<K>::idx(1, 1)];
    const double dyy = 2.0 * t.c[Tay<K>::idx(0, 2)];
    jet.d2[comp][0][0] = dxx;
    jet.d2[comp][0][1] = dxy;
    jet.d2[comp][1][0] = dxy;
    jet.d2[comp][1][1] = dyy;
  }
  if constexpr (K >= 3) {
    const double d300 = 6.0 * t.c[Tay<K>::idx(3, 0)];
    const double d210 = 2.0 * t.c[Tay<K>::idx(2, 1)];
    const double d120 = 2.0 * t.c[Tay<K>::idx(1, 2)];
    const double d030 = 6.0 * t.c[Tay<K>::idx(0, 3)];
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c) {
          const int ones = a + b + c;
          const double v = ones == 0 ? d300 : (ones == 1 ? d210 : (ones == 2 ? d120 : d030));
          jet.d3[comp][a][b][c] = v;
        }
  }
}

template <int K, class F>
inline SpatialJet jet_eval_k(F&& field, const Vec2d& xi) {
  V2<Tay<K>> seeded{Tay<K>::variable(xi.x, 0), Tay<K>::variable(xi.y, 1)};
  V3<Tay<K>> out = field(seeded);
  SpatialJet jet;
  jet.order = K;
  for (int c = 0; c < 3; ++c) {
    for (double v : out[c].c)
      if (!std::isfinite(v)) throw NonFiniteError("jet_eval: field produced non-finite jet");
    fill_component<K>(jet, c, out[c]);
  }
  return jet;
}

}  // namespace detail

/// Evaluate a field composed of the closed primitive set at `xi`, returning
/// exact derivatives up to `order` (1, 2, or 3). The primitive set is
/// enforced at compile time: only operations defined on Tay<K> carriers are
/// accepted inside `field`.
template <class F>
SpatialJet jet_eval(F&& field, const Vec2d& xi, int order) {
  switch (order) {
    case 1:
      return detail::jet_eval_k<1>(field, xi);
    case 2:
      return detail::jet_eval_k<2>(field, xi);
    case 3:
      return detail::jet_eval_k<3>(field, xi);
    default:
      throw ValidationError("jet_eval: order must be 1, 2 or 3");
  }
}

/// Max relative disagreement between the analytic derivative of a scalar
/// map (via a first-order jet) and the central finite difference at x.
template <class F>
double finite_difference_check(F&& f, double x, double h) {
  if (!(h > 0.0)) throw ValidationError("finite_difference_check: h must be positive");
  const Tay1 jx = f(Tay1::variable(x, 0));
  const double analytic = jx.c[1];
  const double fp = scalar_value(f(Tay1(x + h)));
  const double fm = scalar_value(f(Tay1(x - h)));
  if (!std::isfinite(fp) || !std::isfinite(fm) || !std::isfinite(analytic))
    throw NonFiniteError("finite_difference_check: non-finite value at probe point");
  const double fd = (fp - fm) / (2.0 * h);
  return std::abs(analytic - fd) / (std::abs(analytic) + 1e-12);
}

/// Central-difference cross-check of first-order jets of a 2D -> 3D field.
/// Returns the max relative error over all components and both axes.
template <class F>
double jet_fd_check(F&& field, const Vec2d& xi, double h) {
  const SpatialJet jet = jet_eval(field, xi, 1);
  double worst = 0.0;
  for (int axis = 0; axis < 2; ++axis) {
    Vec2d xp = xi, xm = xi;
    xp[axis] += h;
    xm[axis] -= h;
    const SpatialJet jp = jet_eval(field, xp, 1);
    const SpatialJet jm = jet_eval(field, xm, 1);
    for (int c = 0; c < 3; ++c) {
      const double fd = (jp.value[c] - jm.value[c]) / (2.0 * h);
      const double err = std::abs(jet.d1[c][axis] - fd) / (std::abs(jet.d1[c][axis]) + 1e-12);
      worst = err > worst ? err : worst;
    }
  }
  return worst;
}

}  // namespace shelltrack
