// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "shelltrack/splat.hpp"

namespace shelltrack {

// Hand-derived reverse pass of the splat renderer. The depth-sort order is
// treated as constant during differentiation; both cutoffs (3 sigma,
// transmittance floor) are applied identically to the forward used here.

/// Per-Gaussian gradients in physical parameter space.
struct GaussianGrads {
  std::vector<Vec3d> d_position;
  std::vector<double> d_cov3d;  // 6 per Gaussian: xx, xy, xz, yy, yz, zz
  std::vector<double> d_opacity;
  std::vector<Vec3d> d_color;

  void resize(std::size_t n) {
    d_position.assign(n, Vec3d{});
    d_cov3d.assign(6 * n, 0.0);
    d_opacity.assign(n, 0.0);
    d_color.assign(n, Vec3d{});
  }

  void add(const GaussianGrads& o) {
    for (std::size_t i = 0; i < d_position.size(); ++i) {
      d_position[i] += o.d_position[i];
      d_opacity[i] += o.d_opacity[i];
      d_color[i] += o.d_color[i];
    }
    for (std::size_t i = 0; i < d_cov3d.size(); ++i) d_cov3d[i] += o.d_cov3d[i];
  }
};

/// Chain d(cov3d) into the tangent scales for a fixed rotation frame:
/// Sigma3D = sum_k s_k^2 r_k r_k^T, so ds_k = 2 s_k r_k^T dSigma r_k.
inline double chain_scale_grad(const double* d_cov3d6, const Mat3d& rotation, const Vec3d& scale,
                               int k) {
  const Vec3d r = rotation.col(k);
  const double sym[3][3] = {{d_cov3d6[0], d_cov3d6[1], d_cov3d6[2]},
                            {d_cov3d6[1], d_cov3d6[3], d_cov3d6[4]},
                            {d_cov3d6[2], d_cov3d6[4], d_cov3d6[5]}};
  double rtr = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) rtr += r[a] * sym[a][b] * r[b];
  return 2.0 * scale[k] * rtr;
}

/// Chain d(cov3d) into the rotation matrix: dR = 2 dSigma R diag(s^2).
inline Mat3d chain_rotation_grad(const double* d_cov3d6, const Mat3d& rotation,
                                 const Vec3d& scale) {
  const double sym[3][3] = {{d_cov3d6[0], d_cov3d6[1], d_cov3d6[2]},
                            {d_cov3d6[1], d_cov3d6[3], d_cov3d6[4]},
                            {d_cov3d6[2], d_cov3d6[4], d_cov3d6[5]}};
  Mat3d dr;
  for (int a = 0; a < 3; ++a)
    for (int k = 0; k < 3; ++k) {
      double acc = 0.0;
      for (int b = 0; b < 3; ++b) acc += sym[a][b] * rotation(b, k);
      dr(a, k) = 2.0 * acc * scale[k] * scale[k];
    }
  return dr;
}

/// L1 image loss (mean over pixels and channels) of rendering `cloud`
/// against `target`, with gradients accumulated into `grads`. Returns the
/// loss. `recolor` overrides every Gaussian's color (mask rendering) and
/// suppresses color gradients.
inline double render_l1_backward(const GaussianCloud& cloud, const Camera& cam,
                                 const Vec3d& background, const ImageRGB& target,
                                 GaussianGrads& grads, int threads = 1,
                                 const Vec3d* recolor = nullptr, ImageRGB* out_image = nullptr) {
  cam.validate();
  cloud.check_finite();
  if (target.width != cam.width || target.height != cam.height)
    throw ValidationError("render_l1_backward: target size does not match the camera");
  const std::size_t n = cloud.size();
  grads.resize(n);

  const detail::SplatBins bins = detail::build_bins(cloud, cam);
  const double pixel_weight = 1.0 / (3.0 * cam.width * cam.height);

  const int rows_per_block = 8;
  const int nblocks = (cam.height + rows_per_block - 1) / rows_per_block;

  // Screen-space staging per Gaussian: d(mean2d), d(cov2d), d(opacity),
  // d(color); chained through the projection once per Gaussian afterwards.
  struct BlockAccum {
    std::vector<double> dmean;   // 2 per Gaussian
    std::vector<double> dcov2;   // 3 per Gaussian (xx, xy, yy)
    std::vector<double> dopacity;
    std::vector<Vec3d> dcolor;
    KahanSum loss;

    void resize(std::size_t n) {
      dmean.assign(2 * n, 0.0);
      dcov2.assign(3 * n, 0.0);
      dopacity.assign(n, 0.0);
      dcolor.assign(n, Vec3d{});
    }
  };
  std::vector<BlockAccum> blocks(nblocks);

  struct Contribution {
    int index;
    double alpha;
    double q;
    double dx, dy;
    double transmittance;  // before this contribution
  };

  parallel_blocks(nblocks, threads, [&](int block) {
    BlockAccum& acc = blocks[block];
    acc.resize(n);
    std::vector<Contribution> stack;
    const int y_begin = block * rows_per_block;
    const int y_end = std::min(cam.height, y_begin + rows_per_block);
    for (int y = y_begin; y < y_end; ++y)
      for (int x = 0; x < cam.width; ++x) {
        const int pix = y * cam.width + x;
        const double px = x + 0.5, py = y + 0.5;
        stack.clear();
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
          const Vec3d ci = recolor ? *recolor : cloud.colors[i];
          color += ci * (alpha * transmittance);
          stack.push_back({i, alpha, q, dx, dy, transmittance});
          transmittance *= (1.0 - alpha);
          if (transmittance < kMinTransmittance) break;
        }
        color += background * transmittance;
        if (out_image != nullptr) out_image->set(x, y, color);

        // L1 loss and its per-channel pixel gradient.
        const Vec3d tgt = target.at(x, y);
        Vec3d dcolor_pix;
        for (int c = 0; c < 3; ++c) {
          const double r = color[c] - tgt[c];
          acc.loss.add(std::abs(r) * pixel_weight);
          dcolor_pix[c] = (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0)) * pixel_weight;
        }

        // Reverse sweep: suffix[c] = sum_{j>i} c_j alpha_j T_j + bg T_end.
        Vec3d suffix = background * transmittance;
        for (int s = static_cast<int>(stack.size()) - 1; s >= 0; --s) {
          const Contribution& ct = stack[s];
          const int i = ct.index;
          const ProjectedGaussian& g = bins.projected[i];
          const Vec3d ci = recolor ? *recolor : cloud.colors[i];
          const double one_minus = 1.0 - ct.alpha;

          double dalpha = 0.0;
          for (int c = 0; c < 3; ++c) {
            dalpha += dcolor_pix[c] * (ci[c] * ct.transmittance -
                                       (one_minus > 1e-12 ? suffix[c] / one_minus : 0.0));
            if (recolor == nullptr)
              acc.dcolor[i][c] += dcolor_pix[c] * ct.alpha * ct.transmittance;
          }
          acc.dopacity[i] += dalpha * std::exp(-0.5 * ct.q);
          const double dq = -0.5 * ct.alpha * dalpha;

          // q = d^T M d with d = pix - mean, M = inv_cov; v = M d.
          const double vx = g.inv_cov[0] * ct.dx + g.inv_cov[1] * ct.dy;
          const double vy = g.inv_cov[1] * ct.dx + g.inv_cov[2] * ct.dy;
          acc.dmean[2 * i + 0] += -2.0 * vx * dq;
          acc.dmean[2 * i + 1] += -2.0 * vy * dq;
          // dSigma2D = -(M d)(M d)^T dq.
          acc.dcov2[3 * i + 0] += -vx * vx * dq;
          acc.dcov2[3 * i + 1] += -vx * vy * dq;
          acc.dcov2[3 * i + 2] += -vy * vy * dq;

          suffix += ci * (ct.alpha * ct.transmittance);
        }
      }
  });

  // Merge block accumulators in fixed order, then chain the staged 2D
  // gradients through the projection into world-space quantities.
  BlockAccum staged;
  staged.resize(n);
  KahanSum loss;
  for (const BlockAccum& b : blocks) {
    for (std::size_t i = 0; i < n; ++i) {
      staged.dmean[2 * i] += b.dmean[2 * i];
      staged.dmean[2 * i + 1] += b.dmean[2 * i + 1];
      for (int k = 0; k < 3; ++k) staged.dcov2[3 * i + k] += b.dcov2[3 * i + k];
      staged.dopacity[i] += b.dopacity[i];
      staged.dcolor[i] += b.dcolor[i];
    }
    loss.add(b.loss.value());
  }

  for (std::size_t i = 0; i < n; ++i) {
    const ProjectedGaussian& g = bins.projected[i];
    const double dmean_x = staged.dmean[2 * i];
    const double dmean_y = staged.dmean[2 * i + 1];
    const double dc2_xx = staged.dcov2[3 * i + 0];
    const double dc2_xy = staged.dcov2[3 * i + 1];
    const double dc2_yy = staged.dcov2[3 * i + 2];
    grads.d_opacity[i] = staged.dopacity[i];
    grads.d_color[i] = staged.dcolor[i];
    if (g.culled) {
      grads.d_position[i] = Vec3d{};
      continue;
    }

    const double X = g.p_cam.x, Y = g.p_cam.y, Z = g.p_cam.z;
    const double fx = cam.fx, fy = cam.fy;

    // Mean chain.
    Vec3d dp_cam{dmean_x * fx / Z, dmean_y * fy / Z,
                 -dmean_x * fx * X / (Z * Z) - dmean_y * fy * Y / (Z * Z)};

    // Covariance chain: Sigma2D = J M3 J^T with M3 = (W R) S^2 (W R)^T.
    const Mat3d wr = cam.rotation * cloud.rotations[i];
    double m3[3][3] = {};
    const Vec3d& sc = cloud.scales[i];
    const double s2[3] = {sc.x * sc.x, sc.y * sc.y, sc.z * sc.z};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 3; ++k) m3[r][c] += wr(r, k) * s2[k] * wr(c, k);
    const double jj[2][3] = {{fx / Z, 0.0, -fx * X / (Z * Z)},
                             {0.0, fy / Z, -fy * Y / (Z * Z)}};
    const double G[2][2] = {{dc2_xx, dc2_xy}, {dc2_xy, dc2_yy}};

    // dJ = 2 G J M3 (G symmetric).
    double gj[2][3] = {};
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 2; ++k) gj[r][c] += 2.0 * G[r][k] * jj[k][c];
    double dJ[2][3] = {};
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 3; ++k) dJ[r][c] += gj[r][k] * m3[k][c];

    dp_cam.x += dJ[0][2] * (-fx / (Z * Z));
    dp_cam.y += dJ[1][2] * (-fy / (Z * Z));
    dp_cam.z += dJ[0][0] * (-fx / (Z * Z)) + dJ[1][1] * (-fy / (Z * Z)) +
                dJ[0][2] * (2.0 * fx * X / (Z * Z * Z)) + dJ[1][2] * (2.0 * fy * Y / (Z * Z * Z));

    // dM3 = J^T G J.
    double jt_g[3][2] = {};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 2; ++c)
        for (int k = 0; k < 2; ++k) jt_g[r][c] += jj[k][r] * G[k][c];
    double dm3[3][3] = {};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 2; ++k) dm3[r][c] += jt_g[r][k] * jj[k][c];

    // dSigma3D = W^T dM3 W  (world-frame covariance gradient).
    double wt_dm3[3][3] = {};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 3; ++k) wt_dm3[r][c] += cam.rotation(k, r) * dm3[k][c];
    double dsig[3][3] = {};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 3; ++k) dsig[r][c] += wt_dm3[r][k] * cam.rotation(k, c);

    // Full-matrix adjoint in symmetric storage (off-diagonal slots hold the
    // per-entry value; the reconstruction in the chain helpers counts them
    // twice, matching the two full-matrix entries).
    grads.d_cov3d[6 * i + 0] = dsig[0][0];
    grads.d_cov3d[6 * i + 1] = 0.5 * (dsig[0][1] + dsig[1][0]);
    grads.d_cov3d[6 * i + 2] = 0.5 * (dsig[0][2] + dsig[2][0]);
    grads.d_cov3d[6 * i + 3] = dsig[1][1];
    grads.d_cov3d[6 * i + 4] = 0.5 * (dsig[1][2] + dsig[2][1]);
    grads.d_cov3d[6 * i + 5] = dsig[2][2];

    grads.d_position[i] = cam.rotation.mul_transposed(dp_cam);
  }
  return loss.value();
}

/// Plain forward L1 for loss reporting.
inline double render_l1(const GaussianCloud& cloud, const Camera& cam, const Vec3d& background,
                        const ImageRGB& target, int threads = 1, const Vec3d* recolor = nullptr) {
  GaussianCloud work = cloud;
  if (recolor != nullptr)
    for (auto& c : work.colors) c = *recolor;
  const RenderOutput out = render(work, cam, background, threads);
  if (target.width != out.image.width || target.height != out.image.height)
    throw ValidationError("render_l1: target size does not match the camera");
  KahanSum acc;
  const double w = 1.0 / (3.0 * out.image.pixels());
  for (int i = 0; i < out.image.pixels(); ++i) {
    const Vec3d c = out.image.at(i);
    const Vec3d t = target.at(i);
    for (int k = 0; k < 3; ++k) acc.add(std::abs(c[k] - t[k]) * w);
  }
  return acc.value();
}

}  // namespace shelltrack
