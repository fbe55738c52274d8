// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "shelltrack/error.hpp"
#include "shelltrack/optim.hpp"
#include "shelltrack/shell.hpp"

namespace shelltrack {

// Forward quasistatic solver: minimizes the Monte-Carlo estimate of the
// potential  integral(Psi) dOmega - integral(f . u) dOmega  over the
// parameters of a single-state deformation field, with Psi = 1/2 the
// hyperelastic density. Used for validating the shell energy against
// classical plate solutions; the tracker itself never runs it.

struct DivergenceError : Error {
  using Error::Error;
};

struct ForceField {
  Vec3d body_force{};  // N/m^2, uniform over the surface
  std::uint8_t pinned_edges = 0;  // PinnedBlend bit layout
  bool pin_full = true;           // false: transverse (z) pinning only

  void validate() const {
    if (norm(body_force) > 0.0 && pinned_edges == 0)
      throw ValidationError("ForceField: nonzero load requires a nonempty pinned set");
  }
};

struct QuasistaticOptions {
  SirenConfig field_config;  // input_dim is forced to 2
  int iterations = 4000;
  int mc_samples = 256;
  double lr = 2e-4;
  int log_every = 100;
  int eval_grid = 24;  // fixed midpoint grid for the reported energy
  std::uint64_t seed = 0;
};

struct EnergyLogEntry {
  int iteration = 0;
  double energy = 0.0;
};

struct QuasistaticResult {
  DeformationField field;  // single-state, boundary blend embedded
  std::vector<EnergyLogEntry> energy_log;
};

namespace detail {

/// Deterministic midpoint-grid potential, used for the reported energy curve.
inline double potential_on_grid(const ReferenceField& ref, const DeformationField& field,
                                const MaterialModel& mat, const ForceField& force, int grid) {
  const ChartRect& b = ref.bounds;
  const double area = b.area();
  KahanSum acc;
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      const Vec2d xi{b.xi1_min + (i + 0.5) * b.width() / grid,
                     b.xi2_min + (j + 0.5) * b.height() / grid};
      const PhysicsSample s = make_physics_sample(ref, xi, mat.poisson);
      const V3<Tay2> u =
          field.displacement(V2<Tay2>{Tay2::variable(xi.x, 0), Tay2::variable(xi.y, 1)}, 1);
      const StrainPair<Tay2> strain = strain_state(s.geom, u);
      const Tay2 e =
          energy_density(strain, s.elastic, mat.in_plane(), mat.bending(), s.geom.sqrt_a);
      const double fu = (force.body_force.x * u.x.value() + force.body_force.y * u.y.value() +
                         force.body_force.z * u.z.value()) *
                        s.geom.sqrt_a.value();
      acc.add(0.5 * e.value() - fu);
    }
  return acc.value() * area / (grid * grid);
}

}  // namespace detail

/// Minimize the potential; returns the converged field and the energy log.
/// The reported energies are evaluated on a fixed grid, so the curve is
/// monotone up to Monte-Carlo optimization transients.
inline QuasistaticResult quasistatic_simulate(const ReferenceField& ref,
                                              const MaterialModel& mat, const ForceField& force,
                                              const QuasistaticOptions& opt) {
  mat.validate();
  force.validate();

  SirenConfig cfg = opt.field_config;
  cfg.input_dim = 2;
  cfg.output_dim = 3;
  QuasistaticResult result;
  result.field.net = siren_init(cfg);
  result.field.frame_count = 1;
  result.field.mode = TemporalMode::kOffsetVelocity;
  result.field.bounds = ref.bounds;
  if (force.pinned_edges != 0)
    result.field.blend = PinnedBlend{force.pinned_edges, force.pin_full};
  result.field.validate();

  DeformationField& field = result.field;
  const double area = ref.bounds.area();
  const double stiff_d = mat.in_plane();
  const double stiff_b = mat.bending();

  Rng rng(opt.seed ^ 0x51417eULL);
  Adam adam(field.net.params.size(), opt.lr);
  Tape<Tay2> tape;
  using VT = TVar<Tay2>;

  double initial_energy = 0.0;
  const double inv_w = 2.0 / field.bounds.width();
  const double inv_h = 2.0 / field.bounds.height();

  for (int it = 0; it <= opt.iterations; ++it) {
    if (it % opt.log_every == 0 || it == opt.iterations) {
      const double e = detail::potential_on_grid(ref, field, mat, force, opt.eval_grid);
      if (!std::isfinite(e))
        throw DivergenceError("quasistatic_simulate: non-finite energy at iteration " +
                              std::to_string(it));
      if (it == 0) initial_energy = e;
      const double scale = std::max(std::abs(initial_energy), 1e-12);
      if (e > 1e6 * scale)
        throw DivergenceError("quasistatic_simulate: energy diverged at iteration " +
                              std::to_string(it) + " (" + std::to_string(e) + ")");
      result.energy_log.push_back({it, e});
    }
    if (it == opt.iterations) break;

    tape.clear();
    std::vector<VT> weights;
    weights.reserve(field.net.params.size());
    for (double w : field.net.params) weights.push_back(tape.leaf(w));

    VT total = tape.zero();
    for (int s_i = 0; s_i < opt.mc_samples; ++s_i) {
      const Vec2d xi{rng.uniform(ref.bounds.xi1_min, ref.bounds.xi1_max),
                     rng.uniform(ref.bounds.xi2_min, ref.bounds.xi2_max)};
      const PhysicsSample s = make_physics_sample(ref, xi, mat.poisson);
      const auto geom = inject_geometry(tape, s.geom);
      const auto elastic = inject_elastic(tape, s.elastic);
      const VT in[2] = {
          tape.constant(Tay2::variable((xi.x - field.bounds.xi1_min) * inv_w - 1.0, 0, inv_w)),
          tape.constant(Tay2::variable((xi.y - field.bounds.xi2_min) * inv_h - 1.0, 1, inv_h))};
      VT raw[3];
      siren_eval_tape<Tay2>(field.net, tape, weights, std::span<const VT>(in, 2),
                            std::span<VT>(raw, 3));
      V3<VT> u{raw[0], raw[1], raw[2]};
      if (field.blend) {
        const Tay2 m = field.blend->mask(
            field.bounds, V2<Tay2>{Tay2::variable(xi.x, 0), Tay2::variable(xi.y, 1)});
        const VT mv = tape.constant(m);
        if (field.blend->full)
          u = {u.x * mv, u.y * mv, u.z * mv};
        else
          u = {u.x, u.y, u.z * mv};
      }
      const StrainPair<VT> strain = strain_state(geom, u);
      VT pot = energy_density(strain, elastic, stiff_d, stiff_b, geom.sqrt_a) * 0.5;
      const VT fu = u.x * force.body_force.x + u.y * force.body_force.y +
                    u.z * force.body_force.z;
      pot = pot - fu * geom.sqrt_a;
      total += pot;
    }
    const VT loss = total * (area / opt.mc_samples);
    const GradResult g = grad_params(tape, loss);
    adam.step(field.net.params, g.grad, cosine_decay(it, opt.iterations, 0.02));
  }
  return result;
}

}  // namespace shelltrack
