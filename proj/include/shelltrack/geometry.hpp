// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include "shelltrack/error.hpp"
#include "shelltrack/jets.hpp"
#include "shelltrack/taylor.hpp"
#include "shelltrack/vec.hpp"

namespace shelltrack {

// Differential geometry of a parametric surface at a point. All formulas
// are generic over the scalar carrier: instantiated with double they give
// plain local quantities; with Tay<K> they carry the spatial dependence
// needed by covariant derivatives of deformed-state tensors.

/// Covariant tangent vectors and unit normal; a3 = (a1 x a2)/|a1 x a2|,
/// orientation follows a1 x a2 with no flipping.
template <class S>
struct CovariantBasis {
  V3<S> a1, a2, a3;
  S jac;  // |a1 x a2|, the area Jacobian sqrt(a)
};

inline constexpr double kDegenerateChartTol = 1e-12;

template <class S>
CovariantBasis<S> covariant_basis(const V3<S>& x_d1, const V3<S>& x_d2) {
  CovariantBasis<S> r;
  r.a1 = x_d1;
  r.a2 = x_d2;
  const V3<S> n = cross(r.a1, r.a2);
  r.jac = norm(n);
  if (scalar_value(r.jac) < kDegenerateChartTol)
    throw DegenerateChartError("covariant_basis: |a1 x a2| below degeneracy threshold");
  r.a3 = n * recip(r.jac);
  return r;
}

/// First fundamental form, its inverse, contravariant basis vectors and the
/// area Jacobian.
template <class S>
struct SurfaceMetric {
  Sym2<S> a_lo;       // a_{ab} = a_a . a_b
  Sym2<S> a_up;       // inverse metric a^{ab}
  V3<S> a1_up, a2_up; // a^a = a^{ab} a_b
  S sqrt_a;
};

template <class S>
SurfaceMetric<S> metric_and_inverse(const CovariantBasis<S>& basis) {
  SurfaceMetric<S> m;
  m.a_lo = {dot(basis.a1, basis.a1), dot(basis.a1, basis.a2), dot(basis.a2, basis.a2)};
  const S det = m.a_lo.m11 * m.a_lo.m22 - m.a_lo.m12 * m.a_lo.m12;
  if (scalar_value(det) <= 1e-24)
    throw DegenerateChartError("metric_and_inverse: metric determinant below threshold");
  const S inv_det = recip(det);
  m.a_up = {m.a_lo.m22 * inv_det, -(m.a_lo.m12 * inv_det), m.a_lo.m11 * inv_det};
  m.a1_up = basis.a1 * m.a_up.m11 + basis.a2 * m.a_up.m12;
  m.a2_up = basis.a1 * m.a_up.m12 + basis.a2 * m.a_up.m22;
  m.sqrt_a = basis.jac;
  return m;
}

/// Second fundamental form b_{ab} = x,_{ab} . a3, plus mixed and fully
/// contravariant variants.
template <class S>
struct CurvatureTensor {
  Sym2<S> b_lo;
  Mat2<S> b_mixed;  // b_a^b = a^{bc} b_{ca}
  Sym2<S> b_up;
};

template <class S>
CurvatureTensor<S> second_fundamental_form(const V3<S>& x_d11, const V3<S>& x_d12,
                                           const V3<S>& x_d22, const V3<S>& a3,
                                           const Sym2<S>& a_up) {
  CurvatureTensor<S> c;
  c.b_lo = {dot(x_d11, a3), dot(x_d12, a3), dot(x_d22, a3)};
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      c.b_mixed(a, b) = a_up(b, 0) * c.b_lo(0, a) + a_up(b, 1) * c.b_lo(1, a);
  c.b_up = {a_up(0, 0) * c.b_mixed(0, 0) + a_up(0, 1) * c.b_mixed(0, 1),
            a_up(0, 0) * c.b_mixed(1, 0) + a_up(0, 1) * c.b_mixed(1, 1),
            a_up(1, 0) * c.b_mixed(1, 0) + a_up(1, 1) * c.b_mixed(1, 1)};
  return c;
}

/// Christoffel symbols Gamma^l_{ab} = a^l . x,_{ab}, symmetric in (a, b);
/// stored as one Sym2 per upper index.
template <class S>
struct Christoffel {
  Sym2<S> g[2];
  S operator()(int lam, int a, int b) const { return g[lam](a, b); }
};

template <class S>
Christoffel<S> christoffel(const V3<S>& x_d11, const V3<S>& x_d12, const V3<S>& x_d22,
                           const V3<S>& a1_up, const V3<S>& a2_up) {
  Christoffel<S> g;
  g.g[0] = {dot(x_d11, a1_up), dot(x_d12, a1_up), dot(x_d22, a1_up)};
  g.g[1] = {dot(x_d11, a2_up), dot(x_d12, a2_up), dot(x_d22, a2_up)};
  return g;
}

/// Surface covariant derivative of a covector: u_a|_b = u_{a,b} - u_l G^l_{ab}.
template <class S>
Mat2<S> covariant_derivative_vector(const V2<S>& u, const Mat2<S>& du,
                                    const Christoffel<S>& gamma) {
  Mat2<S> r;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      r(a, b) = du(a, b) - (u[0] * gamma(0, a, b) + u[1] * gamma(1, a, b));
  return r;
}

/// Covariant derivative of a second-order covariant tensor:
/// phi_{ab}|_c = phi_{ab,c} - phi_{lb} G^l_{ac} - phi_{al} G^l_{bc}.
/// dphi is indexed [c](a, b) = d phi_{ab} / d xi^c.
template <class S>
void covariant_derivative_tensor(const Mat2<S>& phi, const Mat2<S> dphi[2],
                                 const Christoffel<S>& gamma, Mat2<S> out[2]) {
  for (int c = 0; c < 2; ++c)
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        out[c](a, b) = dphi[c](a, b) -
                       (phi(0, b) * gamma(0, a, c) + phi(1, b) * gamma(1, a, c)) -
                       (phi(a, 0) * gamma(0, b, c) + phi(a, 1) * gamma(1, b, c));
}

// ---------------------------------------------------------------------------

/// All first-surface quantities at one chart point, plain double.
struct ReferenceGeometry {
  Vec3d a1, a2, a3;
  Sym2d a_lo, a_up;
  Vec3d a1_up, a2_up;
  Sym2d b_lo;
  Mat2d b_mixed;
  Sym2d b_up;
  Christoffel<double> gamma;
  double sqrt_a = 0.0;
};

/// Assemble the full reference package from a jet of order >= 2.
inline ReferenceGeometry make_reference_geometry(const SpatialJet& jet) {
  if (jet.order < 2)
    throw ValidationError("make_reference_geometry: jet of order >= 2 required");
  ReferenceGeometry g;
  const auto basis = covariant_basis(jet.d1_col(0), jet.d1_col(1));
  g.a1 = basis.a1;
  g.a2 = basis.a2;
  g.a3 = basis.a3;
  const auto metric = metric_and_inverse(basis);
  g.a_lo = metric.a_lo;
  g.a_up = metric.a_up;
  g.a1_up = metric.a1_up;
  g.a2_up = metric.a2_up;
  g.sqrt_a = metric.sqrt_a;
  const Vec3d x11 = jet.d2_col(0, 0);
  const Vec3d x12 = jet.d2_col(0, 1);
  const Vec3d x22 = jet.d2_col(1, 1);
  const auto curv = second_fundamental_form(x11, x12, x22, g.a3, g.a_up);
  g.b_lo = curv.b_lo;
  g.b_mixed = curv.b_mixed;
  g.b_up = curv.b_up;
  g.gamma = christoffel(x11, x12, x22, g.a1_up, g.a2_up);
  return g;
}

/// Ring-valued surface package: each quantity keeps its Taylor dependence
/// on the chart point, so downstream covariant derivatives of deformed
/// tensors get the product-rule terms (dGamma, db, da^) for free.
template <class S>
struct RingGeometry {
  V3<S> a1, a2, a3;
  Sym2<S> a_lo, a_up;
  Sym2<S> b_lo;
  Mat2<S> b_mixed;
  Christoffel<S> gamma;
  S sqrt_a;
};

/// Build the ring package from a chart evaluated with Tay<3> seeds.
inline RingGeometry<Tay3> make_ring_geometry(const V3<Tay3>& chart_value) {
  RingGeometry<Tay3> g;
  V3<Tay3> d1[2];
  for (int axis = 0; axis < 2; ++axis)
    for (int c = 0; c < 3; ++c) d1[axis][c] = tay_deriv(chart_value[c], axis);
  const auto basis = covariant_basis(d1[0], d1[1]);
  g.a1 = basis.a1;
  g.a2 = basis.a2;
  g.a3 = basis.a3;
  const auto metric = metric_and_inverse(basis);
  g.a_lo = metric.a_lo;
  g.a_up = metric.a_up;
  g.sqrt_a = metric.sqrt_a;
  V3<Tay3> x11, x12, x22;
  for (int c = 0; c < 3; ++c) {
    x11[c] = tay_deriv(d1[0][c], 0);
    x12[c] = tay_deriv(d1[0][c], 1);
    x22[c] = tay_deriv(d1[1][c], 1);
  }
  const auto curv = second_fundamental_form(x11, x12, x22, g.a3, g.a_up);
  g.b_lo = curv.b_lo;
  g.b_mixed = curv.b_mixed;
  g.gamma = christoffel(x11, x12, x22, metric.a1_up, metric.a2_up);
  return g;
}

/// Truncate a Tay3 ring package to the Tay2 ring used on the deformation side.
inline RingGeometry<Tay2> truncate_geometry(const RingGeometry<Tay3>& g3) {
  RingGeometry<Tay2> g;
  auto tv = [](const V3<Tay3>& v) {
    return V3<Tay2>{tay_truncate<2>(v.x), tay_truncate<2>(v.y), tay_truncate<2>(v.z)};
  };
  auto ts = [](const Sym2<Tay3>& s) {
    return Sym2<Tay2>{tay_truncate<2>(s.m11), tay_truncate<2>(s.m12), tay_truncate<2>(s.m22)};
  };
  g.a1 = tv(g3.a1);
  g.a2 = tv(g3.a2);
  g.a3 = tv(g3.a3);
  g.a_lo = ts(g3.a_lo);
  g.a_up = ts(g3.a_up);
  g.b_lo = ts(g3.b_lo);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) g.b_mixed(a, b) = tay_truncate<2>(g3.b_mixed(a, b));
  g.gamma.g[0] = ts(g3.gamma.g[0]);
  g.gamma.g[1] = ts(g3.gamma.g[1]);
  g.sqrt_a = tay_truncate<2>(g3.sqrt_a);
  return g;
}

}  // namespace shelltrack
