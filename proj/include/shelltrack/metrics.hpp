// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <span>
#include <vector>

#include "shelltrack/error.hpp"
#include "shelltrack/image.hpp"
#include "shelltrack/kdtree.hpp"
#include "shelltrack/vec.hpp"

namespace shelltrack {

// Alignment and reconstruction metrics: rigid Procrustes, ICP refinement,
// Chamfer distance, normal consistency, PSNR.

struct RigidTransform {
  Mat3d rotation = Mat3d::identity();
  Vec3d translation{};

  Vec3d apply(const Vec3d& p) const { return rotation * p + translation; }

  void validate() const {
    double det = 0.0;
    // R^T R == I and det == +1.
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 3; ++k) acc += rotation(k, i) * rotation(k, j);
        if (std::abs(acc - (i == j ? 1.0 : 0.0)) > 1e-10)
          throw ValidationError("RigidTransform: rotation is not orthonormal");
      }
    det = rotation(0, 0) * (rotation(1, 1) * rotation(2, 2) - rotation(1, 2) * rotation(2, 1)) -
          rotation(0, 1) * (rotation(1, 0) * rotation(2, 2) - rotation(1, 2) * rotation(2, 0)) +
          rotation(0, 2) * (rotation(1, 0) * rotation(2, 1) - rotation(1, 1) * rotation(2, 0));
    if (std::abs(det - 1.0) > 1e-10)
      throw ValidationError("RigidTransform: rotation determinant is not +1");
  }
};

/// Least-squares rigid alignment of corresponded point sets (scale-free).
inline RigidTransform procrustes_align(std::span<const Vec3d> source,
                                       std::span<const Vec3d> target) {
  if (source.size() != target.size())
    throw ValidationError("procrustes_align: correspondence counts differ");
  if (source.size() < 3) throw ValidationError("procrustes_align: at least 3 points required");
  const double n = static_cast<double>(source.size());
  Vec3d mu_s{}, mu_t{};
  for (const auto& p : source) mu_s += p;
  for (const auto& p : target) mu_t += p;
  mu_s = mu_s * (1.0 / n);
  mu_t = mu_t * (1.0 / n);

  Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < source.size(); ++i) {
    const Vec3d s = source[i] - mu_s;
    const Vec3d t = target[i] - mu_t;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) H(a, b) += s[a] * t[b];
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();
  if (!(sv(1) > 1e-12 * (sv(0) + 1e-300)))
    throw ValidationError("procrustes_align: degenerate (collinear) configuration");

  Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) D(2, 2) = -1.0;
  const Eigen::Matrix3d R = svd.matrixV() * D * svd.matrixU().transpose();

  RigidTransform out;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) out.rotation(a, b) = R(a, b);
  out.translation = mu_t - out.rotation * mu_s;
  return out;
}

/// Symmetric Chamfer distance: mean squared nearest-neighbor distance in
/// both directions, summed. Multiply by 1e4 when reporting.
inline double chamfer(std::span<const Vec3d> a, std::span<const Vec3d> b) {
  if (a.empty() || b.empty()) throw ValidationError("chamfer: point sets must be nonempty");
  const KdTree tree_b(std::vector<Vec3d>(b.begin(), b.end()));
  const KdTree tree_a(std::vector<Vec3d>(a.begin(), a.end()));
  KahanSum ab, ba;
  for (const auto& p : a) ab.add(tree_b.nearest(p).second);
  for (const auto& p : b) ba.add(tree_a.nearest(p).second);
  return ab.value() / static_cast<double>(a.size()) + ba.value() / static_cast<double>(b.size());
}

inline double chamfer_x1e4(std::span<const Vec3d> a, std::span<const Vec3d> b) {
  return 1e4 * chamfer(a, b);
}

/// Nearest-neighbor rigid refinement. Correspondences are recomputed each
/// iteration; the returned transform never scores worse than `init`.
inline RigidTransform icp_refine(std::span<const Vec3d> source, std::span<const Vec3d> target,
                                 const RigidTransform& init, int max_iters = 50) {
  if (source.empty() || target.empty())
    throw ValidationError("icp_refine: point clouds must be nonempty");
  const KdTree tree(std::vector<Vec3d>(target.begin(), target.end()));

  auto score = [&](const RigidTransform& t) {
    std::vector<Vec3d> moved(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) moved[i] = t.apply(source[i]);
    return chamfer(moved, target);
  };

  RigidTransform best = init;
  double best_score = score(init);
  RigidTransform cur = init;
  std::vector<Vec3d> moved(source.size());
  std::vector<Vec3d> corr(source.size());
  for (int iter = 0; iter < max_iters; ++iter) {
    for (std::size_t i = 0; i < source.size(); ++i) moved[i] = cur.apply(source[i]);
    for (std::size_t i = 0; i < source.size(); ++i)
      corr[i] = tree.points()[tree.nearest(moved[i]).first];
    RigidTransform next;
    try {
      next = procrustes_align(source, corr);
    } catch (const ValidationError&) {
      break;  // degenerate correspondences; keep the best so far
    }
    const double s = score(next);
    if (s >= best_score - 1e-15) break;  // no further improvement
    best_score = s;
    best = next;
    cur = next;
  }
  return best;
}

/// Normal consistency: cos_err = mean(1 - p.g), l2_err = mean |p - g|^2
/// over valid entries; normals must be unit length.
inline std::pair<double, double> normal_consistency(std::span<const Vec3d> pred,
                                                    std::span<const Vec3d> gt,
                                                    std::span<const std::uint8_t> valid) {
  if (pred.size() != gt.size() || (!valid.empty() && valid.size() != pred.size()))
    throw ValidationError("normal_consistency: size mismatch");
  KahanSum cos_err, l2_err;
  std::size_t count = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!valid.empty() && valid[i] == 0) continue;
    cos_err.add(1.0 - dot(pred[i], gt[i]));
    const Vec3d d = pred[i] - gt[i];
    l2_err.add(dot(d, d));
    ++count;
  }
  if (count == 0) throw ValidationError("normal_consistency: no valid entries");
  return {cos_err.value() / count, l2_err.value() / count};
}

/// PSNR in dB over images in [0, 1]; identical images cap at 99 dB.
inline double psnr(const ImageRGB& pred, const ImageRGB& gt) {
  if (pred.width != gt.width || pred.height != gt.height)
    throw ValidationError("psnr: image shapes differ");
  KahanSum acc;
  const std::size_t n = pred.data.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pred.data[i]) - gt.data[i];
    acc.add(d * d);
  }
  const double mse = acc.value() / static_cast<double>(n);
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

}  // namespace shelltrack
