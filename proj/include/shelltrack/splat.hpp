// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "shelltrack/camera.hpp"
#include "shelltrack/error.hpp"
#include "shelltrack/fields.hpp"
#include "shelltrack/image.hpp"
#include "shelltrack/rng.hpp"
#include "shelltrack/threading.hpp"

namespace shelltrack {

// Software Gaussian-splat renderer: surface-bound anisotropic Gaussians,
// pinhole projection, global depth sort, front-to-back alpha compositing.

inline constexpr double kCovRegularization = 0.3;  // px^2 added to the 2D diagonal
inline constexpr double kCutoffQ = 9.0;            // 3 sigma support
inline constexpr double kMinTransmittance = 1e-4;

struct GaussianCloud {
  std::vector<Vec3d> positions;
  std::vector<Mat3d> rotations;
  std::vector<Vec3d> scales;
  std::vector<double> opacities;
  std::vector<Vec3d> colors;

  std::size_t size() const { return positions.size(); }

  void check_finite() const {
    auto bad = [](double v) { return !std::isfinite(v); };
    for (std::size_t i = 0; i < size(); ++i) {
      bool ok = !(bad(positions[i].x) || bad(positions[i].y) || bad(positions[i].z) ||
                  bad(scales[i].x) || bad(scales[i].y) || bad(scales[i].z) ||
                  bad(opacities[i]) || bad(colors[i].x) || bad(colors[i].y) || bad(colors[i].z));
      for (int r = 0; r < 3 && ok; ++r)
        for (int c = 0; c < 3 && ok; ++c) ok = !bad(rotations[i](r, c));
      if (!ok)
        throw NonFiniteError("render: non-finite parameters on Gaussian " + std::to_string(i));
    }
  }
};

/// Parametric anchors plus the shared optimizable appearance parameters.
/// Scale and opacity are stored through squashing maps (exp / sigmoid) so
/// box constraints never produce dead gradients; colors are stored plainly
/// and clamped after every optimizer update. Rotations come from the
/// reference covariant frame and are fixed unless the surface-binding
/// ablation frees them (then `free_rotations` holds quaternions).
struct SurfaceBinding {
  std::vector<Vec2d> anchors;
  std::vector<double> raw_s1, raw_s2;  // log scales
  std::vector<double> raw_opacity;     // logit opacities
  std::vector<Vec3d> colors;
  double normal_scale = 1e-5;  // fixed s3 (epsilon)
  bool fell_back_to_grid = false;

  // Cached per-anchor reference quantities (filled by bind_reference).
  std::vector<Vec3d> ref_positions;
  std::vector<Mat3d> ref_rotations;

  // Ablation toggles.
  bool rotations_free = false;
  bool normal_scale_free = false;
  std::vector<double> raw_s3;            // used when normal_scale_free
  std::vector<std::array<double, 4>> free_rotations;  // unit quaternions (w,x,y,z)

  std::size_t size() const { return anchors.size(); }

  double s1(std::size_t i) const { return std::exp(raw_s1[i]); }
  double s2(std::size_t i) const { return std::exp(raw_s2[i]); }
  double s3(std::size_t i) const {
    return normal_scale_free ? std::exp(raw_s3[i]) : normal_scale;
  }
  double opacity(std::size_t i) const { return 1.0 / (1.0 + std::exp(-raw_opacity[i])); }
};

inline Mat3d quat_to_matrix(const std::array<double, 4>& q) {
  const double n = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
  Mat3d r;
  r(0, 0) = 1 - 2 * (y * y + z * z);
  r(0, 1) = 2 * (x * y - z * w);
  r(0, 2) = 2 * (x * z + y * w);
  r(1, 0) = 2 * (x * y + z * w);
  r(1, 1) = 1 - 2 * (x * x + z * z);
  r(1, 2) = 2 * (y * z - x * w);
  r(2, 0) = 2 * (x * z - y * w);
  r(2, 1) = 2 * (y * z + x * w);
  r(2, 2) = 1 - 2 * (x * x + y * y);
  return r;
}

/// Blue-noise anchor sampling over the chart rectangle: dart throwing with
/// minimum pairwise distance 0.5 * sqrt(area / count); falls back to a
/// stratified jittered grid when the packing cannot be met.
inline SurfaceBinding sample_template_gaussians(const ChartRect& bounds, int count, Rng& rng,
                                                const ImageRGB* texture = nullptr) {
  if (count < 1) throw ValidationError("sample_template_gaussians: count >= 1 required");
  SurfaceBinding binding;
  const double r_target = std::sqrt(bounds.area() / count);
  const double min_dist = 0.5 * r_target;

  // Hash grid with cells of size min_dist.
  const int gx = std::max(1, static_cast<int>(bounds.width() / min_dist));
  const int gy = std::max(1, static_cast<int>(bounds.height() / min_dist));
  std::vector<std::vector<int>> grid(static_cast<std::size_t>(gx) * gy);
  auto cell_of = [&](const Vec2d& p) {
    int cx = std::min(gx - 1, static_cast<int>((p.x - bounds.xi1_min) / bounds.width() * gx));
    int cy = std::min(gy - 1, static_cast<int>((p.y - bounds.xi2_min) / bounds.height() * gy));
    return std::pair{cx, cy};
  };
  auto far_enough = [&](const Vec2d& p) {
    const auto [cx, cy] = cell_of(p);
    for (int dy = -2; dy <= 2; ++dy)
      for (int dx = -2; dx <= 2; ++dx) {
        const int nx = cx + dx, ny = cy + dy;
        if (nx < 0 || ny < 0 || nx >= gx || ny >= gy) continue;
        for (int idx : grid[ny * gx + nx]) {
          const Vec2d& q = binding.anchors[idx];
          const double ddx = p.x - q.x, ddy = p.y - q.y;
          if (ddx * ddx + ddy * ddy < min_dist * min_dist) return false;
        }
      }
    return true;
  };

  const long long max_attempts = 60LL * count;
  long long attempts = 0;
  while (static_cast<int>(binding.anchors.size()) < count && attempts < max_attempts) {
    ++attempts;
    const Vec2d p{rng.uniform(bounds.xi1_min, bounds.xi1_max),
                  rng.uniform(bounds.xi2_min, bounds.xi2_max)};
    if (!far_enough(p)) continue;
    const auto [cx, cy] = cell_of(p);
    grid[cy * gx + cx].push_back(static_cast<int>(binding.anchors.size()));
    binding.anchors.push_back(p);
  }
  if (static_cast<int>(binding.anchors.size()) < count) {
    // Stratified jittered grid fallback.
    binding.anchors.clear();
    binding.fell_back_to_grid = true;
    const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count))));
    for (int j = 0; j < side && static_cast<int>(binding.anchors.size()) < count; ++j)
      for (int i = 0; i < side && static_cast<int>(binding.anchors.size()) < count; ++i)
        binding.anchors.push_back(
            {bounds.xi1_min + (i + rng.uniform()) * bounds.width() / side,
             bounds.xi2_min + (j + rng.uniform()) * bounds.height() / side});
  }

  const int n = static_cast<int>(binding.anchors.size());
  const double tangent_scale = 0.75 * r_target;
  binding.raw_s1.assign(n, std::log(tangent_scale));
  binding.raw_s2.assign(n, std::log(tangent_scale));
  binding.raw_opacity.assign(n, 1.5);  // sigmoid(1.5) ~ 0.82
  binding.colors.assign(n, Vec3d{0.5, 0.5, 0.5});
  if (texture != nullptr) {
    for (int i = 0; i < n; ++i) {
      const double u = (binding.anchors[i].x - bounds.xi1_min) / bounds.width();
      const double v = (binding.anchors[i].y - bounds.xi2_min) / bounds.height();
      const int px = std::min(texture->width - 1, static_cast<int>(u * texture->width));
      const int py = std::min(texture->height - 1, static_cast<int>(v * texture->height));
      binding.colors[i] = texture->at(px, py);
    }
  }
  return binding;
}

/// Cache per-anchor reference positions and frames. The rotation columns
/// are the Gram-Schmidt orthonormalized covariant frame [a1 a2 a3] (a1
/// direction preserved). Anchors on a degenerate chart point are rejected.
inline void bind_reference(SurfaceBinding& binding, const ReferenceField& ref) {
  binding.ref_positions.resize(binding.size());
  binding.ref_rotations.resize(binding.size());
  binding.free_rotations.resize(binding.size());
  for (std::size_t i = 0; i < binding.size(); ++i) {
    const SpatialJet jet = ref.jet(binding.anchors[i], 1);
    const auto basis = covariant_basis(jet.d1_col(0), jet.d1_col(1));
    const Vec3d q1 = normalize(basis.a1);
    const Vec3d a2_orth = basis.a2 - q1 * dot(basis.a2, q1);
    if (norm(a2_orth) < kDegenerateChartTol)
      throw DegenerateChartError("bind_reference: degenerate frame at anchor " +
                                 std::to_string(i));
    const Vec3d q2 = normalize(a2_orth);
    const Vec3d q3 = cross(q1, q2);
    binding.ref_positions[i] = jet.value;
    Mat3d r;
    r.set_col(0, q1);
    r.set_col(1, q2);
    r.set_col(2, q3);
    binding.ref_rotations[i] = r;
    binding.free_rotations[i] = {1.0, 0.0, 0.0, 0.0};  // identity delta for the ablation
  }
  if (binding.normal_scale_free && binding.raw_s3.empty())
    binding.raw_s3.assign(binding.size(), std::log(binding.normal_scale));
}

/// Instantiate the tracked cloud at frame t: positions from the deformation
/// model, rotations and appearance shared across frames.
inline GaussianCloud bind_gaussians(const SurfaceBinding& binding, const ReferenceField& ref,
                                    const DeformationField& field, int t) {
  if (binding.ref_positions.size() != binding.size())
    throw ValidationError("bind_gaussians: call bind_reference first");
  (void)ref;
  field.check_frame(t);
  GaussianCloud cloud;
  const std::size_t n = binding.size();
  cloud.positions.resize(n);
  cloud.rotations.resize(n);
  cloud.scales.resize(n);
  cloud.opacities.resize(n);
  cloud.colors.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const V3<double> u =
        field.displacement(V2<double>{binding.anchors[i].x, binding.anchors[i].y}, t);
    cloud.positions[i] = binding.ref_positions[i] + Vec3d{u.x, u.y, u.z};
    cloud.rotations[i] = binding.rotations_free
                             ? binding.ref_rotations[i] * quat_to_matrix(binding.free_rotations[i])
                             : binding.ref_rotations[i];
    cloud.scales[i] = {binding.s1(i), binding.s2(i), binding.s3(i)};
    cloud.opacities[i] = binding.opacity(i);
    Vec3d c = binding.colors[i];
    for (int k = 0; k < 3; ++k) c[k] = std::clamp(c[k], 0.0, 1.0);
    cloud.colors[i] = c;
  }
  return cloud;
}

/// Projected footprint of one Gaussian.
struct ProjectedGaussian {
  bool culled = true;
  Vec2d mean{};
  double cov[3] = {0, 0, 0};  // 2D covariance (xx, xy, yy), regularized
  double inv_cov[3] = {0, 0, 0};
  double depth = 0.0;
  Vec3d p_cam{};
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;  // clipped pixel bounds
};

inline ProjectedGaussian project_gaussian(const Vec3d& position, const Mat3d& rotation,
                                          const Vec3d& scale, const Camera& cam) {
  ProjectedGaussian out;
  const Vec3d p = cam.to_camera(position);
  if (!(p.z > cam.near)) return out;  // culled
  out.p_cam = p;
  out.depth = p.z;
  out.mean = {cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy};

  // Sigma_cam = (W R) S^2 (W R)^T.
  const Mat3d wr = cam.rotation * rotation;
  double m3[3][3] = {};
  const double s2[3] = {scale.x * scale.x, scale.y * scale.y, scale.z * scale.z};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < 3; ++k) m3[r][c] += wr(r, k) * s2[k] * wr(c, k);

  // Perspective Jacobian at the mean.
  const double jj[2][3] = {{cam.fx / p.z, 0.0, -cam.fx * p.x / (p.z * p.z)},
                           {0.0, cam.fy / p.z, -cam.fy * p.y / (p.z * p.z)}};
  double jm[2][3] = {};
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < 3; ++k) jm[r][c] += jj[r][k] * m3[k][c];
  double c2[3] = {0, 0, 0};
  for (int k = 0; k < 3; ++k) {
    c2[0] += jm[0][k] * jj[0][k];
    c2[1] += jm[0][k] * jj[1][k];
    c2[2] += jm[1][k] * jj[1][k];
  }
  out.cov[0] = c2[0] + kCovRegularization;
  out.cov[1] = c2[1];
  out.cov[2] = c2[2] + kCovRegularization;

  const double det = out.cov[0] * out.cov[2] - out.cov[1] * out.cov[1];
  if (!(det > 0.0)) return out;
  out.inv_cov[0] = out.cov[2] / det;
  out.inv_cov[1] = -out.cov[1] / det;
  out.inv_cov[2] = out.cov[0] / det;

  // 3 sigma bounding box from the larger eigenvalue.
  const double mid = 0.5 * (out.cov[0] + out.cov[2]);
  const double disc = std::sqrt(std::max(0.0, mid * mid - det));
  const double radius = 3.0 * std::sqrt(mid + disc);
  out.x0 = std::max(0, static_cast<int>(std::floor(out.mean.x - radius)));
  out.x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(out.mean.x + radius)));
  out.y0 = std::max(0, static_cast<int>(std::floor(out.mean.y - radius)));
  out.y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(out.mean.y + radius)));
  out.culled = out.x0 > out.x1 || out.y0 > out.y1;
  return out;
}

namespace detail {

/// Depth-ordered pixel lists in CSR layout. Per-pixel entries are already
/// sorted front to back because they are appended in global sort order.
struct SplatBins {
  std::vector<ProjectedGaussian> projected;
  std::vector<int> order;          // Gaussian indices sorted by (depth, index)
  std::vector<int> offsets;        // pixels + 1
  std::vector<int> entries;        // Gaussian indices per pixel
};

inline SplatBins build_bins(const GaussianCloud& cloud, const Camera& cam) {
  SplatBins bins;
  const int n = static_cast<int>(cloud.size());
  bins.projected.resize(n);
  for (int i = 0; i < n; ++i)
    bins.projected[i] =
        project_gaussian(cloud.positions[i], cloud.rotations[i], cloud.scales[i], cam);

  bins.order.reserve(n);
  for (int i = 0; i < n; ++i)
    if (!bins.projected[i].culled) bins.order.push_back(i);
  std::sort(bins.order.begin(), bins.order.end(), [&](int a, int b) {
    if (bins.projected[a].depth != bins.projected[b].depth)
      return bins.projected[a].depth < bins.projected[b].depth;
    return a < b;  // deterministic tie-break on equal depth
  });

  const int pixels = cam.width * cam.height;
  std::vector<int> counts(pixels, 0);
  for (int idx : bins.order) {
    const ProjectedGaussian& g = bins.projected[idx];
    for (int y = g.y0; y <= g.y1; ++y)
      for (int x = g.x0; x <= g.x1; ++x) ++counts[y * cam.width + x];
  }
  bins.offsets.assign(pixels + 1, 0);
  for (int i = 0; i < pixels; ++i) bins.offsets[i + 1] = bins.offsets[i] + counts[i];
  bins.entries.resize(bins.offsets.back());
  std::vector<int> cursor(bins.offsets.begin(), bins.offsets.end() - 1);
  for (int idx : bins.order) {
    const ProjectedGaussian& g = bins.projected[idx];
    for (int y = g.y0; y <= g.y1; ++y)
      for (int x = g.x0; x <= g.x1; ++x) bins.entries[cursor[y * cam.width + x]++] = idx;
  }
  return bins;
}

}  // namespace detail

struct RenderOutput {
  ImageRGB image;
  ImageGray alpha;
};

/// Front-to-back alpha compositing with the 3-sigma / transmittance
/// cutoffs. Deterministic for any input order of Gaussians.
inline RenderOutput render(const GaussianCloud& cloud, const Camera& cam, const Vec3d& background,
                           int threads = 1) {
  cam.validate();
  cloud.check_finite();
  RenderOutput out;
  out.image = ImageRGB(cam.width, cam.height, background);
  out.alpha = ImageGray(cam.width, cam.height, 0.f);
  if (cloud.size() == 0) return out;

  const detail::SplatBins bins = detail::build_bins(cloud, cam);
  const int rows_per_block = 8;
  const int nblocks = (cam.height + rows_per_block - 1) / rows_per_block;
  parallel_blocks(nblocks, threads, [&](int block) {
    const int y_begin = block * rows_per_block;
    const int y_end = std::min(cam.height, y_begin + rows_per_block);
    for (int y = y_begin; y < y_end; ++y)
      for (int x = 0; x < cam.width; ++x) {
        const int pix = y * cam.width + x;
        const double px = x + 0.5, py = y + 0.5;
        double transmittance = 1.0;
        Vec3d color{};
        for (int e = bins.offsets[pix]; e < bins.offsets[pix + 1]; ++e) {
          const int i = bins.entries[e];
          const ProjectedGaussian& g = bins.projected[i];
          const double dx = px - g.mean.x, dy = py - g.mean.y;
          const double q =
              g.inv_cov[0] * dx * dx + 2.0 * g.inv_cov[1] * dx * dy + g.inv_cov[2] * dy * dy;
          if (q > kCutoffQ) continue;
          const double alpha = cloud.opacities[i] * std::exp(-0.5 * q);
          if (alpha <= 0.0) continue;
          color += cloud.colors[i] * (alpha * transmittance);
          transmittance *= (1.0 - alpha);
          if (transmittance < kMinTransmittance) break;
        }
        color += background * transmittance;
        out.image.set(x, y, color);
        out.alpha.set(x, y, static_cast<float>(1.0 - transmittance));
      }
  });
  return out;
}

}  // namespace shelltrack
