// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "shelltrack/error.hpp"
#include "shelltrack/fields.hpp"
#include "shelltrack/geometry.hpp"
#include "shelltrack/tape.hpp"

namespace shelltrack {

// Kirchhoff-Love strain measures and the hyperelastic energy of the tracked
// surface. The strain formulas are generic over the scalar carrier: the
// production path instantiates them with tape variables over the Tay2 ring,
// which yields exact parameter gradients of jet-consuming energies.

struct MaterialModel {
  double density = 0.0;   // kg/m^3, carried but unused by the quasistatic energy
  double thickness = 0.0; // m
  double young = 0.0;     // Pa
  double poisson = 0.0;

  void validate() const {
    if (!(young > 0.0) || !(thickness > 0.0) || !(poisson >= 0.0 && poisson < 0.5))
      throw ValidationError("MaterialModel: need E > 0, h > 0, 0 <= nu < 0.5");
  }

  /// In-plane stiffness D = E h / (1 - nu^2), N/m.
  double in_plane() const {
    validate();
    return young * thickness / (1.0 - poisson * poisson);
  }

  /// Bending stiffness B = E h^3 / (12 (1 - nu^2)), N m.
  double bending() const {
    validate();
    return young * thickness * thickness * thickness / (12.0 * (1.0 - poisson * poisson));
  }
};

inline std::pair<double, double> elastic_constants(const MaterialModel& m) {
  return {m.in_plane(), m.bending()};
}

/// Fourth-order elastic tensor stored as its six independent components;
/// the full tensor is reconstructed through the symmetry group
/// H^{abld} = H^{bald} = H^{abdl} = H^{ldab}.
template <class S>
struct ElasticTensor {
  S h1111{}, h1112{}, h1122{}, h1212{}, h1222{}, h2222{};

  S full(int a, int b, int l, int d) const {
    auto key = [](int p, int q) { return p + q; };  // 0,1,2 for (11),(12),(22)
    int pq = key(a, b), rs = key(l, d);
    if (pq > rs) std::swap(pq, rs);
    if (pq == 0 && rs == 0) return h1111;
    if (pq == 0 && rs == 1) return h1112;
    if (pq == 0 && rs == 2) return h1122;
    if (pq == 1 && rs == 1) return h1212;
    if (pq == 1 && rs == 2) return h1222;
    return h2222;
  }
};

using ElasticTensord = ElasticTensor<double>;

/// H^{abld} = nu a^{ab} a^{ld} + (1-nu)/2 (a^{al} a^{bd} + a^{ad} a^{bl}).
template <class S>
ElasticTensor<S> elastic_tensor(const Sym2<S>& a_up, double nu) {
  auto h = [&](int a, int b, int l, int d) {
    return a_up(a, b) * a_up(l, d) * nu +
           (a_up(a, l) * a_up(b, d) + a_up(a, d) * a_up(b, l)) * (0.5 * (1.0 - nu));
  };
  ElasticTensor<S> t;
  t.h1111 = h(0, 0, 0, 0);
  t.h1112 = h(0, 0, 0, 1);
  t.h1122 = h(0, 0, 1, 1);
  t.h1212 = h(0, 1, 0, 1);
  t.h1222 = h(0, 1, 1, 1);
  t.h2222 = h(1, 1, 1, 1);
  return t;
}

/// Membrane strain eps and bending strain kap at one point and frame.
template <class S>
struct StrainPair {
  Sym2<S> eps;
  Sym2<S> kap;
};

using StrainState = StrainPair<double>;

/// Deformation gradient components from covariant displacement components
/// and their chart partials: phi_{al} = u_l|_a - b_{al} u3 and
/// phi_{a3} = u_{3,a} + b_a^l u_l.
template <class S>
void deformation_gradient(const V2<S>& u_cov, const S& u3, const Mat2<S>& du_cov,
                          const V2<S>& du3, const Sym2<S>& b_lo, const Mat2<S>& b_mixed,
                          const Christoffel<S>& gamma, Mat2<S>& phi, V2<S>& phi3) {
  const Mat2<S> u_bar = covariant_derivative_vector(u_cov, du_cov, gamma);
  for (int a = 0; a < 2; ++a) {
    for (int l = 0; l < 2; ++l) phi(a, l) = u_bar(l, a) - b_lo(a, l) * u3;
    phi3[a] = du3[a] + b_mixed(a, 0) * u_cov[0] + b_mixed(a, 1) * u_cov[1];
  }
}

/// Strain measures from the deformation gradient and its covariant
/// derivatives:
///   eps_{ab} = 1/2 (phi_{ab} + phi_{ba} + phi_{al} phi_b^l + phi_{a3} phi_{b3})
///   kap_{ab} = -phi_{a3}|_b - b_b^l phi_{al}
///              + phi^l_3 (phi_{al}|_b + 1/2 b_{ab} phi_{l3} - b_{bl} phi_{a3})
/// dphi is indexed [c](a,l) = d phi_{al} / d xi^c, dphi3 [c][a] = d phi_{a3} / d xi^c.
template <class S>
StrainPair<S> strains(const Mat2<S>& phi, const V2<S>& phi3, const Mat2<S> dphi[2],
                      const V2<S> dphi3[2], const Sym2<S>& a_up, const Sym2<S>& b_lo,
                      const Mat2<S>& b_mixed, const Christoffel<S>& gamma) {
  // phi with the second index raised: phiup(b, l) = a^{lm} phi_{bm}.
  Mat2<S> phiup;
  for (int b = 0; b < 2; ++b)
    for (int l = 0; l < 2; ++l) phiup(b, l) = a_up(l, 0) * phi(b, 0) + a_up(l, 1) * phi(b, 1);
  // phi^l_3 = a^{lm} phi_{m3}.
  V2<S> phi3_up{a_up(0, 0) * phi3[0] + a_up(0, 1) * phi3[1],
                a_up(1, 0) * phi3[0] + a_up(1, 1) * phi3[1]};

  Mat2<S> cov_phi[2];
  covariant_derivative_tensor(phi, dphi, gamma, cov_phi);
  // phi_{a3} is a covector in a.
  Mat2<S> dphi3_m;
  for (int a = 0; a < 2; ++a)
    for (int c = 0; c < 2; ++c) dphi3_m(a, c) = dphi3[c][a];
  const Mat2<S> cov_phi3 = covariant_derivative_vector(V2<S>{phi3[0], phi3[1]}, dphi3_m, gamma);

  StrainPair<S> s;
  auto eps_at = [&](int a, int b) {
    return (phi(a, b) + phi(b, a) + phi(a, 0) * phiup(b, 0) + phi(a, 1) * phiup(b, 1) +
            phi3[a] * phi3[b]) *
           0.5;
  };
  auto kap_at = [&](int a, int b) {
    S t = -cov_phi3(a, b) - (b_mixed(b, 0) * phi(a, 0) + b_mixed(b, 1) * phi(a, 1));
    for (int l = 0; l < 2; ++l)
      t += phi3_up[l] *
           (cov_phi[b](a, l) + b_lo(a, b) * phi3[l] * 0.5 - b_lo(b, l) * phi3[a]);
    return t;
  };
  s.eps = {eps_at(0, 0), eps_at(0, 1), eps_at(1, 1)};
  s.kap = {kap_at(0, 0), kap_at(0, 1), kap_at(1, 1)};
  return s;
}

/// Strain measures straight from ring-valued geometry and displacement.
/// The chart partials of every deformed-state quantity are taken inside the
/// ring, so all product-rule terms (d gamma, d b, d a^) are carried exactly.
/// Requirements: u valid to order >= 2, geometry entries to order >= 2.
template <class S>
StrainPair<S> strain_state(const RingGeometry<S>& g, const V3<S>& u) {
  const V2<S> u_cov{dot(u, g.a1), dot(u, g.a2)};
  const S u3 = dot(u, g.a3);
  Mat2<S> du_cov;
  for (int a = 0; a < 2; ++a)
    for (int c = 0; c < 2; ++c) du_cov(a, c) = tay_deriv(u_cov[a], c);
  const V2<S> du3{tay_deriv(u3, 0), tay_deriv(u3, 1)};

  Mat2<S> phi;
  V2<S> phi3;
  deformation_gradient(u_cov, u3, du_cov, du3, g.b_lo, g.b_mixed, g.gamma, phi, phi3);

  Mat2<S> dphi[2];
  V2<S> dphi3[2];
  for (int c = 0; c < 2; ++c) {
    for (int a = 0; a < 2; ++a) {
      for (int l = 0; l < 2; ++l) dphi[c](a, l) = tay_deriv(phi(a, l), c);
      dphi3[c][a] = tay_deriv(phi3[a], c);
    }
  }
  return strains(phi, phi3, dphi, dphi3, g.a_up, g.b_lo, g.b_mixed, g.gamma);
}

/// Double contraction T : H : T over the full reconstructed tensor.
template <class S>
S double_contract(const ElasticTensor<S>& H, const Sym2<S>& T) {
  S acc = H.full(0, 0, 0, 0) * T(0, 0) * T(0, 0);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int l = 0; l < 2; ++l)
        for (int d = 0; d < 2; ++d) {
          if (a == 0 && b == 0 && l == 0 && d == 0) continue;
          acc += H.full(a, b, l, d) * T(a, b) * T(l, d);
        }
  return acc;
}

/// Hyperelastic density (D eps:H:eps + B kap:H:kap) sqrt(a), per unit chart
/// area. The 1/2 energy prefactor lives in the loss/potential assembly.
template <class S>
S energy_density(const StrainPair<S>& strain, const ElasticTensor<S>& H, double stiff_membrane,
                 double stiff_bending, const S& sqrt_a) {
  return (double_contract(H, strain.eps) * stiff_membrane +
          double_contract(H, strain.kap) * stiff_bending) *
         sqrt_a;
}

/// Geometric validation oracle: the curvature change b_ref - b_deformed of
/// two explicit surface jets, computed purely from second fundamental forms.
inline Sym2d curvature_change_oracle(const SpatialJet& ref_jet, const SpatialJet& def_jet) {
  if (ref_jet.order < 2 || def_jet.order < 2)
    throw ValidationError("curvature_change_oracle: jets of order >= 2 required");
  auto second_form = [](const SpatialJet& jet) {
    const auto basis = covariant_basis(jet.d1_col(0), jet.d1_col(1));
    const auto metric = metric_and_inverse(basis);
    return second_fundamental_form(jet.d2_col(0, 0), jet.d2_col(0, 1), jet.d2_col(1, 1),
                                   basis.a3, metric.a_up)
        .b_lo;
  };
  const Sym2d b_ref = second_form(ref_jet);
  const Sym2d b_def = second_form(def_jet);
  return b_ref - b_def;
}

// -- physics loss ------------------------------------------------------------

/// Reference-side package for one sample point, precomputed once (it does
/// not depend on the deformation parameters).
struct PhysicsSample {
  Vec2d xi;
  RingGeometry<Tay2> geom;
  ElasticTensor<Tay2> elastic;
};

inline PhysicsSample make_physics_sample(const ReferenceField& ref, const Vec2d& xi, double nu) {
  PhysicsSample s;
  s.xi = xi;
  const RingGeometry<Tay3> g3 = make_ring_geometry(ref.eval_tay3(xi));
  s.geom = truncate_geometry(g3);
  s.elastic = elastic_tensor(s.geom.a_up, nu);
  return s;
}

/// Plain evaluation of the per-sample, per-frame energy density value.
inline double physics_energy_value(const PhysicsSample& s, const DeformationField& field,
                                   const MaterialModel& material, int t) {
  const V2<Tay2> xi{Tay2::variable(s.xi.x, 0), Tay2::variable(s.xi.y, 1)};
  const V3<Tay2> u = field.displacement(xi, t);
  const StrainPair<Tay2> strain = strain_state(s.geom, u);
  const Tay2 e = energy_density(strain, s.elastic, material.in_plane(), material.bending(),
                                s.geom.sqrt_a);
  return e.value();
}

/// L_p = 1/(2 N_p T) sum_i sum_{t=2..T} energy_density(xi_i, t).
/// Sample points are drawn area-uniformly over the chart rectangle.
inline double physics_loss(const ReferenceField& ref, const DeformationField& field,
                           const MaterialModel& material, int sample_count, int frames,
                           Rng& rng) {
  if (sample_count < 1 || frames < 2)
    throw ValidationError("physics_loss: N_p >= 1 and T >= 2 required");
  KahanSum acc;
  for (int i = 0; i < sample_count; ++i) {
    const Vec2d xi{rng.uniform(ref.bounds.xi1_min, ref.bounds.xi1_max),
                   rng.uniform(ref.bounds.xi2_min, ref.bounds.xi2_max)};
    const PhysicsSample s = make_physics_sample(ref, xi, material.poisson);
    for (int t = 2; t <= frames; ++t) acc.add(physics_energy_value(s, field, material, t));
  }
  return acc.value() / (2.0 * sample_count * frames);
}

/// Ring-geometry constants injected onto a tape.
inline RingGeometry<TVar<Tay2>> inject_geometry(Tape<Tay2>& tape, const RingGeometry<Tay2>& g) {
  RingGeometry<TVar<Tay2>> r;
  auto cv = [&](const V3<Tay2>& v) {
    return V3<TVar<Tay2>>{tape.constant(v.x), tape.constant(v.y), tape.constant(v.z)};
  };
  auto cs = [&](const Sym2<Tay2>& s) {
    return Sym2<TVar<Tay2>>{tape.constant(s.m11), tape.constant(s.m12), tape.constant(s.m22)};
  };
  r.a1 = cv(g.a1);
  r.a2 = cv(g.a2);
  r.a3 = cv(g.a3);
  r.a_lo = cs(g.a_lo);
  r.a_up = cs(g.a_up);
  r.b_lo = cs(g.b_lo);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) r.b_mixed(a, b) = tape.constant(g.b_mixed(a, b));
  r.gamma.g[0] = cs(g.gamma.g[0]);
  r.gamma.g[1] = cs(g.gamma.g[1]);
  r.sqrt_a = tape.constant(g.sqrt_a);
  return r;
}

inline ElasticTensor<TVar<Tay2>> inject_elastic(Tape<Tay2>& tape, const ElasticTensor<Tay2>& h) {
  ElasticTensor<TVar<Tay2>> r;
  r.h1111 = tape.constant(h.h1111);
  r.h1112 = tape.constant(h.h1112);
  r.h1122 = tape.constant(h.h1122);
  r.h1212 = tape.constant(h.h1212);
  r.h1222 = tape.constant(h.h1222);
  r.h2222 = tape.constant(h.h2222);
  return r;
}

/// Physics loss over a fixed sample set, with gradient with respect to the
/// deformation parameters. The tape is confined to the calling thread.
struct PhysicsLossResult {
  double loss = 0.0;
  std::vector<double> grad_theta;
};

inline PhysicsLossResult physics_loss_grad(std::span<const PhysicsSample> samples,
                                           const DeformationField& field,
                                           const MaterialModel& material, int frames,
                                           Tape<Tay2>& tape) {
  using VT = TVar<Tay2>;
  tape.clear();
  std::vector<VT> weights;
  weights.reserve(field.net.params.size());
  for (double w : field.net.params) weights.push_back(tape.leaf(w));

  const double stiff_d = material.in_plane();
  const double stiff_b = material.bending();
  const double inv_w = 2.0 / field.bounds.width();
  const double inv_h = 2.0 / field.bounds.height();

  VT total = tape.zero();
  for (const PhysicsSample& s : samples) {
    const auto geom = inject_geometry(tape, s.geom);
    const auto elastic = inject_elastic(tape, s.elastic);
    // Normalized chart inputs as ring constants carrying the seed monomials;
    // the seed scale folds in the chart-to-[-1,1] reparameterization.
    const VT in_x =
        tape.constant(Tay2::variable((s.xi.x - field.bounds.xi1_min) * inv_w - 1.0, 0, inv_w));
    const VT in_y =
        tape.constant(Tay2::variable((s.xi.y - field.bounds.xi2_min) * inv_h - 1.0, 1, inv_h));

    // Offsets for frames 2..T, then momentum prefix sums (or direct offsets).
    std::vector<std::array<VT, 3>> F(static_cast<std::size_t>(frames) + 1);
    for (int t = 2; t <= frames; ++t) {
      const VT in[3] = {in_x, in_y, tape.constant(Tay2(field.tau(t)))};
      VT out[3];
      siren_eval_tape<Tay2>(field.net, tape, weights, std::span<const VT>(in, 3),
                            std::span<VT>(out, 3));
      F[t] = {out[0], out[1], out[2]};
    }
    std::vector<std::array<VT, 3>> u(static_cast<std::size_t>(frames) + 1);
    u[2] = F[2];
    for (int t = 3; t <= frames; ++t)
      for (int c = 0; c < 3; ++c)
        u[t][c] = field.mode == TemporalMode::kMomentum ? u[t - 1][c] * field.momentum + F[t][c]
                                                        : F[t][c];

    for (int t = 2; t <= frames; ++t) {
      const V3<VT> ut{u[t][0], u[t][1], u[t][2]};
      const StrainPair<VT> strain = strain_state(geom, ut);
      total = total + energy_density(strain, elastic, stiff_d, stiff_b, geom.sqrt_a);
    }
  }
  const VT loss = total * (1.0 / (2.0 * static_cast<double>(samples.size()) * frames));

  PhysicsLossResult r;
  r.loss = loss.value();
  const GradResult g = grad_params(tape, loss);
  r.grad_theta = g.grad;
  return r;
}

}  // namespace shelltrack
