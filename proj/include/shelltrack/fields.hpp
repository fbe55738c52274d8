// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shelltrack/error.hpp"
#include "shelltrack/geometry.hpp"
#include "shelltrack/jets.hpp"
#include "shelltrack/mesh.hpp"
#include "shelltrack/optim.hpp"
#include "shelltrack/siren.hpp"

namespace shelltrack {

// Continuous surface fields: the reference field mapping chart coordinates
// to the template surface, and the deformation field mapping (chart, frame)
// to a displacement. Both expose exact spatial jets.

/// Closed-form reference charts; these bypass fitting and provide exact
/// jets for analytic oracles.
struct AnalyticChart {
  enum class Kind { kFlatRectangle, kCylinderPatch };
  Kind kind = Kind::kFlatRectangle;
  ChartRect bounds{};
  double radius = 1.0;  // cylinder only; xi1 is arc angle, xi2 the axis

  template <class S>
  V3<S> eval(const V2<S>& xi) const {
    using std::cos;
    using std::sin;
    if (kind == Kind::kFlatRectangle) return {xi.x, xi.y, S(0.0)};
    return {cos(xi.x) * radius, sin(xi.x) * radius, xi.y};
  }
};

/// Template surface x(xi): either an analytic chart or a fitted net over
/// normalized chart coordinates.
struct ReferenceField {
  std::optional<AnalyticChart> analytic;
  std::optional<SirenNet> net;
  ChartRect bounds{};

  static ReferenceField from_analytic(const AnalyticChart& chart) {
    ReferenceField f;
    f.analytic = chart;
    f.bounds = chart.bounds;
    return f;
  }

  template <class S>
  V3<S> eval(const V2<S>& xi) const {
    if (analytic) return analytic->eval(xi);
    // Normalize into [-1, 1]^2; the affine map is part of the recorded
    // expression so jets carry the correct chain factors.
    const S nx = (xi.x - bounds.xi1_min) * (2.0 / bounds.width()) - 1.0;
    const S ny = (xi.y - bounds.xi2_min) * (2.0 / bounds.height()) - 1.0;
    const S in[2] = {nx, ny};
    V3<S> out;
    S out_arr[3];
    siren_eval<S>(*net, std::span<const S>(in, 2), std::span<S>(out_arr, 3));
    out = {out_arr[0], out_arr[1], out_arr[2]};
    return out;
  }

  SpatialJet jet(const Vec2d& xi, int order) const {
    return jet_eval([this](const auto& p) { return eval(p); }, xi, order);
  }

  V3<Tay3> eval_tay3(const Vec2d& xi) const {
    return eval(V2<Tay3>{Tay3::variable(xi.x, 0), Tay3::variable(xi.y, 1)});
  }

  ReferenceGeometry geometry(const Vec2d& xi) const { return make_reference_geometry(jet(xi, 2)); }
};

enum class TemporalMode : std::uint8_t {
  kMomentum = 0,
  kOffsetAcceleration = 1,
  kOffsetVelocity = 2,
};

inline const char* to_string(TemporalMode m) {
  switch (m) {
    case TemporalMode::kMomentum:
      return "momentum";
    case TemporalMode::kOffsetAcceleration:
      return "offset_acceleration";
    case TemporalMode::kOffsetVelocity:
      return "offset_velocity";
  }
  return "?";
}

inline TemporalMode temporal_mode_from_string(const std::string& s) {
  if (s == "momentum") return TemporalMode::kMomentum;
  if (s == "offset_acceleration") return TemporalMode::kOffsetAcceleration;
  if (s == "offset_velocity") return TemporalMode::kOffsetVelocity;
  throw ValidationError("unknown temporal mode: " + s);
}

/// Multiplicative boundary blend pinning chart edges to zero displacement.
/// Bits: 0 left (xi1 min), 1 right, 2 bottom (xi2 min), 3 top. The mask
/// vanishes linearly at pinned edges (slope stays free there) and is smooth
/// inside. `full` pins all components; otherwise only the z component
/// (transverse pinning on flat-normal charts).
struct PinnedBlend {
  std::uint8_t edges = 0;
  bool full = true;

  template <class S>
  S mask(const ChartRect& b, const V2<S>& xi) const {
    constexpr double kPi = 3.14159265358979323846;
    using std::cos;
    using std::sin;
    S m(1.0);
    const S a = (xi.x - b.xi1_min) * (1.0 / b.width());
    const S c = (xi.y - b.xi2_min) * (1.0 / b.height());
    const bool l = edges & 1, r = edges & 2, bo = edges & 4, to = edges & 8;
    if (l && r)
      m = m * sin(a * kPi);
    else if (l)
      m = m * sin(a * (kPi / 2));
    else if (r)
      m = m * cos(a * (kPi / 2));
    if (bo && to)
      m = m * sin(c * kPi);
    else if (bo)
      m = m * sin(c * (kPi / 2));
    else if (to)
      m = m * cos(c * (kPi / 2));
    return m;
  }
};

/// Deformation field u(xi, t). In momentum mode u(xi,1) = 0 by construction
/// and u(xi,t) = sum_{k=2..t} lambda^(t-k) F(xi,k); in the offset modes
/// u(xi,t) = F(xi,t) directly. A net with input_dim 2 is a single-state
/// field (no time input; the quasistatic solver uses this).
struct DeformationField {
  SirenNet net;  // input (xi1_n, xi2_n[, tau]) -> offset F
  int frame_count = 2;
  TemporalMode mode = TemporalMode::kMomentum;
  double momentum = 0.4;
  ChartRect bounds{};
  std::optional<PinnedBlend> blend;

  void validate() const {
    if (net.cfg.input_dim == 2) {
      if (mode == TemporalMode::kMomentum)
        throw ValidationError("DeformationField: single-state fields use an offset mode");
      if (frame_count < 1) throw ValidationError("DeformationField: frame_count >= 1 required");
      return;
    }
    if (frame_count < 2) throw ValidationError("DeformationField: frame_count >= 2 required");
    if (mode == TemporalMode::kMomentum && !(momentum >= 0.0 && momentum < 1.0))
      throw ValidationError("DeformationField: momentum lambda must lie in [0, 1)");
    if (net.cfg.input_dim != 3) throw ValidationError("DeformationField: net input_dim must be 3");
  }

  /// Frame index mapped to [-1, 1].
  double tau(int t) const {
    return frame_count > 1 ? 2.0 * (t - 1) / (frame_count - 1) - 1.0 : 0.0;
  }

  void check_frame(int t) const {
    if (t < 1 || t > frame_count)
      throw DomainError("frame index out of range [1, T]: t=" + std::to_string(t));
  }

  /// Offset head F(xi, t), generic carrier.
  template <class S>
  V3<S> offset(const V2<S>& xi, int t) const {
    check_frame(t);
    const S nx = (xi.x - bounds.xi1_min) * (2.0 / bounds.width()) - 1.0;
    const S ny = (xi.y - bounds.xi2_min) * (2.0 / bounds.height()) - 1.0;
    const S in[3] = {nx, ny, S(tau(t))};
    S out[3];
    siren_eval<S>(net, std::span<const S>(in, net.cfg.input_dim), std::span<S>(out, 3));
    return {out[0], out[1], out[2]};
  }

  /// Deformation u(xi, t), generic carrier.
  template <class S>
  V3<S> displacement(const V2<S>& xi, int t) const {
    check_frame(t);
    V3<S> u{S(0.0), S(0.0), S(0.0)};
    if (mode != TemporalMode::kMomentum) {
      u = offset(xi, t);
    } else if (t > 1) {
      // Closed-form unroll of the momentum recursion.
      double w = 1.0;
      for (int k = t; k >= 2; --k) {
        u += offset(xi, k) * w;
        w *= momentum;
      }
    }
    if (blend) {
      const S m = blend->mask(bounds, xi);
      if (blend->full) return u * m;
      return {u.x, u.y, u.z * m};
    }
    return u;
  }
};

/// Closed-form unroll of the momentum recursion over explicit offsets:
/// u(t) = sum_{k=2..t} lambda^(t-k) offsets[k]. offsets[0..1] are unused;
/// index k matches the frame index. Changing offsets[k] leaves u(t) for
/// t < k untouched (causality).
inline Vec3d momentum_unroll(double lambda, std::span<const Vec3d> offsets, int t) {
  if (t < 1 || t >= static_cast<int>(offsets.size()))
    throw DomainError("momentum_unroll: t out of range");
  Vec3d u{};
  double w = 1.0;
  for (int k = t; k >= 2; --k) {
    u += offsets[k] * w;
    w *= lambda;
  }
  return u;
}

/// Offset jet F(xi, t) with spatial derivatives up to order 2.
inline SpatialJet ndf_offset(const DeformationField& field, const Vec2d& xi, int t) {
  return jet_eval([&](const auto& p) { return field.offset(p, t); }, xi, 2);
}

/// Deformation jet u(xi, t).
inline SpatialJet deformation(const DeformationField& field, const Vec2d& xi, int t) {
  return jet_eval([&](const auto& p) { return field.displacement(p, t); }, xi, 2);
}

/// Tracked position jet x(xi, t) = ref(xi) + u(xi, t).
inline SpatialJet tracked_position(const ReferenceField& ref, const DeformationField& field,
                                   const Vec2d& xi, int t) {
  return jet_eval(
      [&](const auto& p) {
        auto x = ref.eval(p);
        auto u = field.displacement(p, t);
        return x + u;
      },
      xi, 2);
}

/// Covariant curvilinear components of a Cartesian displacement:
/// u_a = u . a_a, u_3 = u . a_3 (so u = u_a a^a + u_3 a^3).
inline void cartesian_to_curvilinear(const Vec3d& u, const ReferenceGeometry& geom, double& u1,
                                     double& u2, double& u3) {
  u1 = dot(u, geom.a1);
  u2 = dot(u, geom.a2);
  u3 = dot(u, geom.a3);
}

/// Extra objective for the offset temporal modes: mean |u(xi,1)|^2 plus the
/// mean squared second (variant I) or first (variant II) symmetric frame
/// difference. Calling this in momentum mode is a usage error.
template <class UFn>
double temporal_penalty_over(UFn&& u_at, int frames, TemporalMode mode,
                             std::span<const Vec2d> samples) {
  if (mode == TemporalMode::kMomentum)
    throw ValidationError("temporal_penalty: not applicable in momentum mode");
  KahanSum first_frame;
  KahanSum diff_term;
  std::size_t diff_count = 0;
  for (const Vec2d& xi : samples) {
    std::vector<Vec3d> u(static_cast<std::size_t>(frames) + 1);
    for (int t = 1; t <= frames; ++t) u[t] = u_at(xi, t);
    first_frame.add(dot(u[1], u[1]));
    for (int t = 2; t <= frames - 1; ++t) {
      Vec3d d;
      if (mode == TemporalMode::kOffsetAcceleration)
        d = u[t + 1] - u[t] * 2.0 + u[t - 1];
      else
        d = (u[t + 1] - u[t - 1]) * 0.5;
      diff_term.add(dot(d, d));
      ++diff_count;
    }
  }
  const double n = static_cast<double>(samples.size());
  double penalty = first_frame.value() / n;
  if (diff_count > 0) penalty += diff_term.value() / static_cast<double>(diff_count);
  return penalty;
}

inline double temporal_penalty(const DeformationField& field, std::span<const Vec2d> samples) {
  return temporal_penalty_over(
      [&](const Vec2d& xi, int t) {
        const V3<double> u = field.displacement(V2<double>{xi.x, xi.y}, t);
        return Vec3d{u.x, u.y, u.z};
      },
      field.frame_count, field.mode, samples);
}

// -- NRF fitting -------------------------------------------------------------

struct NrfFitReport {
  bool converged = false;
  double held_out_error = 0.0;  // mean |x(xi) - mesh| on fresh samples
  double threshold = 0.0;
  int iterations = 0;
};

struct NrfFitOptions {
  int iterations = 2000;
  int batch = 128;
  double lr = 1e-3;
  /// Convergence threshold as a fraction of the bounding-box diagonal.
  double tolerance_rel = 1e-3;
  int held_out = 512;
};

/// Fit the reference net to a chart-carrying template mesh with an l1
/// geometry loss over random barycentric surface samples.
inline ReferenceField fit_nrf(const TemplateMesh& mesh, const SirenConfig& config,
                              const NrfFitOptions& opt, NrfFitReport& report) {
  mesh.require_nondegenerate();
  ReferenceField field;
  field.bounds = mesh.chart_bounds();
  SirenConfig cfg = config;
  cfg.input_dim = 2;
  cfg.output_dim = 3;
  SirenNet net = siren_init(cfg);

  Rng rng(cfg.seed ^ 0x5eedf17ULL);
  Adam adam(net.params.size(), opt.lr);
  std::vector<double> grad(net.params.size());
  SirenTrace trace;
  const double inv_w = 2.0 / field.bounds.width();
  const double inv_h = 2.0 / field.bounds.height();

  for (int it = 0; it < opt.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (int b = 0; b < opt.batch; ++b) {
      const auto [uv, pos] = mesh.sample_surface(rng);
      const double in[2] = {(uv.x - field.bounds.xi1_min) * inv_w - 1.0,
                            (uv.y - field.bounds.xi2_min) * inv_h - 1.0};
      double out[3];
      siren_forward_trace(net, std::span<const double>(in, 2), std::span<double>(out, 3), trace);
      double dout[3];
      for (int k = 0; k < 3; ++k) {
        const double r = out[k] - pos[k];
        dout[k] = (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0)) / (3.0 * opt.batch);
      }
      siren_backward(net, trace, std::span<const double>(dout, 3), grad);
    }
    adam.step(net.params, grad, cosine_decay(it, opt.iterations, 0.1));
  }

  field.net = std::move(net);

  // Held-out check on fresh samples.
  KahanSum err;
  for (int s = 0; s < opt.held_out; ++s) {
    const auto [uv, pos] = mesh.sample_surface(rng);
    const V3<double> x = field.eval(V2<double>{uv.x, uv.y});
    err.add(norm(Vec3d{x.x, x.y, x.z} - pos));
  }
  report.held_out_error = err.value() / opt.held_out;
  report.threshold = opt.tolerance_rel * mesh.bbox_diagonal();
  report.converged = report.held_out_error <= report.threshold;
  report.iterations = opt.iterations;
  return field;
}

// -- field containers --------------------------------------------------------

inline constexpr char kFieldMagic[8] = {'S', 'T', 'F', 'I', 'E', 'L', 'D', '1'};

inline void save_reference_field(const std::string& path, const ReferenceField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write field file: " + path);
  os.write(kFieldMagic, 8);
  detail::write_pod(os, std::uint8_t{0});  // kind: reference
  detail::write_pod(os, std::uint8_t{f.analytic ? 1u : 0u});
  detail::write_pod(os, f.bounds.xi1_min);
  detail::write_pod(os, f.bounds.xi1_max);
  detail::write_pod(os, f.bounds.xi2_min);
  detail::write_pod(os, f.bounds.xi2_max);
  if (f.analytic) {
    detail::write_pod(os, static_cast<std::uint8_t>(f.analytic->kind));
    detail::write_pod(os, f.analytic->radius);
  } else {
    siren_save(os, *f.net);
  }
}

inline ReferenceField load_reference_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open field file: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kFieldMagic, 8) != 0)
    throw IoError("not a field container: " + path);
  if (detail::read_pod<std::uint8_t>(is) != 0) throw IoError("field container is not a reference field");
  const bool analytic = detail::read_pod<std::uint8_t>(is) != 0;
  ReferenceField f;
  f.bounds.xi1_min = detail::read_pod<double>(is);
  f.bounds.xi1_max = detail::read_pod<double>(is);
  f.bounds.xi2_min = detail::read_pod<double>(is);
  f.bounds.xi2_max = detail::read_pod<double>(is);
  if (analytic) {
    AnalyticChart chart;
    chart.kind = static_cast<AnalyticChart::Kind>(detail::read_pod<std::uint8_t>(is));
    chart.radius = detail::read_pod<double>(is);
    chart.bounds = f.bounds;
    f.analytic = chart;
  } else {
    f.net = siren_load(is);
  }
  return f;
}

inline void save_deformation_field(const std::string& path, const DeformationField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write field file: " + path);
  os.write(kFieldMagic, 8);
  detail::write_pod(os, std::uint8_t{1});  // kind: deformation
  detail::write_pod(os, std::int32_t{f.frame_count});
  detail::write_pod(os, static_cast<std::uint8_t>(f.mode));
  detail::write_pod(os, f.momentum);
  detail::write_pod(os, f.bounds.xi1_min);
  detail::write_pod(os, f.bounds.xi1_max);
  detail::write_pod(os, f.bounds.xi2_min);
  detail::write_pod(os, f.bounds.xi2_max);
  detail::write_pod(os, std::uint8_t{f.blend ? 1u : 0u});
  if (f.blend) {
    detail::write_pod(os, f.blend->edges);
    detail::write_pod(os, std::uint8_t{f.blend->full ? 1u : 0u});
  }
  siren_save(os, f.net);
}

inline DeformationField load_deformation_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open field file: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kFieldMagic, 8) != 0)
    throw IoError("not a field container: " + path);
  if (detail::read_pod<std::uint8_t>(is) != 1)
    throw IoError("field container is not a deformation field");
  DeformationField f;
  f.frame_count = detail::read_pod<std::int32_t>(is);
  f.mode = static_cast<TemporalMode>(detail::read_pod<std::uint8_t>(is));
  f.momentum = detail::read_pod<double>(is);
  f.bounds.xi1_min = detail::read_pod<double>(is);
  f.bounds.xi1_max = detail::read_pod<double>(is);
  f.bounds.xi2_min = detail::read_pod<double>(is);
  f.bounds.xi2_max = detail::read_pod<double>(is);
  if (detail::read_pod<std::uint8_t>(is) != 0) {
    PinnedBlend blend;
    blend.edges = detail::read_pod<std::uint8_t>(is);
    blend.full = detail::read_pod<std::uint8_t>(is) != 0;
    f.blend = blend;
  }
  f.net = siren_load(is);
  return f;
}

}  // namespace shelltrack
