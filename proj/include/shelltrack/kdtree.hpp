// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <limits>
#include <vector>

#include "shelltrack/vec.hpp"

namespace shelltrack {

/// Exact nearest-neighbor queries over a fixed 3D point set. Queries are
/// const and safe to run concurrently once built.
class KdTree {
 public:
  explicit KdTree(std::vector<Vec3d> points) : points_(std::move(points)) {
    index_.resize(points_.size());
    for (std::size_t i = 0; i < index_.size(); ++i) index_[i] = static_cast<int>(i);
    nodes_.reserve(points_.size());
    if (!points_.empty()) root_ = build(0, static_cast<int>(points_.size()), 0);
  }

  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3d>& points() const { return points_; }

  /// Index of the nearest point and its squared distance.
  std::pair<int, double> nearest(const Vec3d& query) const {
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    search(root_, query, best, best_d2);
    return {best, best_d2};
  }

 private:
  struct Node {
    int point = -1;
    int left = -1, right = -1;
    int axis = 0;
  };

  int build(int begin, int end, int depth) {
    if (begin >= end) return -1;
    const int axis = depth % 3;
    const int mid = (begin + end) / 2;
    std::nth_element(index_.begin() + begin, index_.begin() + mid, index_.begin() + end,
                     [&](int a, int b) { return points_[a][axis] < points_[b][axis]; });
    Node node;
    node.point = index_[mid];
    node.axis = axis;
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    const int l = build(begin, mid, depth + 1);
    const int r = build(mid + 1, end, depth + 1);
    nodes_[self].left = l;
    nodes_[self].right = r;
    return self;
  }

  void search(int node_idx, const Vec3d& q, int& best, double& best_d2) const {
    if (node_idx < 0) return;
    const Node& node = nodes_[node_idx];
    const Vec3d& p = points_[node.point];
    const Vec3d diff = q - p;
    const double d2 = dot(diff, diff);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = node.point;
    }
    const double delta = q[node.axis] - p[node.axis];
    const int first = delta < 0.0 ? node.left : node.right;
    const int second = delta < 0.0 ? node.right : node.left;
    search(first, q, best, best_d2);
    if (delta * delta < best_d2) search(second, q, best, best_d2);
  }

  std::vector<Vec3d> points_;
  std::vector<int> index_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace shelltrack
