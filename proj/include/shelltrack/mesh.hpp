// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "shelltrack/error.hpp"
#include "shelltrack/rng.hpp"
#include "shelltrack/vec.hpp"

namespace shelltrack {

struct ChartRect {
  double xi1_min = 0.0, xi1_max = 1.0;
  double xi2_min = 0.0, xi2_max = 1.0;

  double width() const { return xi1_max - xi1_min; }
  double height() const { return xi2_max - xi2_min; }
  double area() const { return width() * height(); }
  bool contains(const Vec2d& p) const {
    return p.x >= xi1_min && p.x <= xi1_max && p.y >= xi2_min && p.y <= xi2_max;
  }
};

/// Triangle mesh with per-vertex chart coordinates.
struct TemplateMesh {
  std::vector<Vec3d> positions;
  std::vector<Vec2d> chart;
  std::vector<std::array<int, 3>> triangles;
  int deduplicated = 0;  // vertices merged during loading
  std::vector<std::string> warnings;

  ChartRect chart_bounds() const {
    ChartRect r{1e300, -1e300, 1e300, -1e300};
    for (const auto& c : chart) {
      r.xi1_min = std::min(r.xi1_min, c.x);
      r.xi1_max = std::max(r.xi1_max, c.x);
      r.xi2_min = std::min(r.xi2_min, c.y);
      r.xi2_max = std::max(r.xi2_max, c.y);
    }
    return r;
  }

  double bbox_diagonal() const {
    Vec3d lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    for (const auto& p : positions)
      for (int k = 0; k < 3; ++k) {
        lo[k] = std::min(lo[k], p[k]);
        hi[k] = std::max(hi[k], p[k]);
      }
    return norm(hi - lo);
  }

  double triangle_area(int t) const {
    const auto& tri = triangles[t];
    return 0.5 * norm(cross(positions[tri[1]] - positions[tri[0]],
                            positions[tri[2]] - positions[tri[0]]));
  }

  void require_nondegenerate() const {
    const double tol = 1e-12 * bbox_diagonal() * bbox_diagonal();
    for (std::size_t t = 0; t < triangles.size(); ++t)
      if (!(triangle_area(static_cast<int>(t)) > tol))
        throw ValidationError("template mesh has a degenerate (zero-area) triangle");
  }

  /// Area-weighted random surface point: returns (chart coords, position).
  std::pair<Vec2d, Vec3d> sample_surface(Rng& rng) const {
    // Inverse-CDF over triangle areas.
    double total = 0.0;
    for (std::size_t t = 0; t < triangles.size(); ++t)
      total += triangle_area(static_cast<int>(t));
    double pick = rng.uniform() * total;
    std::size_t t = 0;
    for (; t + 1 < triangles.size(); ++t) {
      const double a = triangle_area(static_cast<int>(t));
      if (pick < a) break;
      pick -= a;
    }
    double b1 = rng.uniform(), b2 = rng.uniform();
    if (b1 + b2 > 1.0) {
      b1 = 1.0 - b1;
      b2 = 1.0 - b2;
    }
    const auto& tri = triangles[t];
    const double b0 = 1.0 - b1 - b2;
    Vec3d pos = positions[tri[0]] * b0 + positions[tri[1]] * b1 + positions[tri[2]] * b2;
    Vec2d uv = chart[tri[0]] * b0 + chart[tri[1]] * b1 + chart[tri[2]] * b2;
    return {uv, pos};
  }
};

/// Minimal OBJ subset: v, vt, f (1-based indices, fans triangulated).
/// Anything else is ignored with a warning. Corners with identical
/// (position, chart) values are merged.
inline TemplateMesh load_obj(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open OBJ file: " + path);

  std::vector<Vec3d> vs;
  std::vector<Vec2d> vts;
  struct Corner {
    int v = -1, vt = -1;
  };
  std::vector<std::vector<Corner>> faces;
  bool saw_unknown = false;
  std::string unknown_tag;

  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3d p;
      ls >> p.x >> p.y >> p.z;
      vs.push_back(p);
    } else if (tag == "vt") {
      Vec2d c;
      ls >> c.x >> c.y;
      vts.push_back(c);
    } else if (tag == "f") {
      std::vector<Corner> face;
      std::string tok;
      while (ls >> tok) {
        Corner c;
        const auto s1 = tok.find('/');
        c.v = std::stoi(tok.substr(0, s1)) - 1;
        if (s1 != std::string::npos) {
          const auto rest = tok.substr(s1 + 1);
          const auto s2 = rest.find('/');
          const auto vt_str = rest.substr(0, s2);
          if (!vt_str.empty()) c.vt = std::stoi(vt_str) - 1;
        }
        face.push_back(c);
      }
      if (face.size() < 3) throw IoError("OBJ face with fewer than 3 corners");
      faces.push_back(std::move(face));
    } else if (!tag.empty()) {
      saw_unknown = true;
      unknown_tag = tag;
    }
  }

  TemplateMesh mesh;
  if (saw_unknown)
    mesh.warnings.push_back("ignored unsupported OBJ records (e.g. '" + unknown_tag + "')");

  for (const auto& f : faces)
    for (const auto& c : f)
      if (c.vt < 0)
        throw IoError("template lacks chart coordinates (OBJ has faces without vt indices)");
  if (vts.empty()) throw IoError("template lacks chart coordinates (OBJ has no vt records)");

  // Merge corners by exact (position, chart) value.
  std::map<std::array<double, 5>, int> remap;
  int corner_keys = 0;
  std::map<std::pair<int, int>, int> seen_pairs;
  auto corner_index = [&](const Corner& c) {
    if (c.v < 0 || c.v >= static_cast<int>(vs.size()) || c.vt >= static_cast<int>(vts.size()))
      throw IoError("OBJ index out of range");
    if (auto it = seen_pairs.find({c.v, c.vt}); it == seen_pairs.end()) {
      seen_pairs.insert({{c.v, c.vt}, 1});
      ++corner_keys;
    }
    const Vec3d& p = vs[c.v];
    const Vec2d& uv = vts[c.vt];
    const std::array<double, 5> key{p.x, p.y, p.z, uv.x, uv.y};
    auto it = remap.find(key);
    if (it != remap.end()) return it->second;
    const int idx = static_cast<int>(mesh.positions.size());
    mesh.positions.push_back(p);
    mesh.chart.push_back(uv);
    remap.insert({key, idx});
    return idx;
  };

  for (const auto& f : faces)
    for (std::size_t k = 1; k + 1 < f.size(); ++k)
      mesh.triangles.push_back(
          {corner_index(f[0]), corner_index(f[k]), corner_index(f[k + 1])});

  mesh.deduplicated = corner_keys - static_cast<int>(mesh.positions.size());
  if (mesh.positions.empty() || mesh.triangles.empty())
    throw IoError("OBJ file contains no usable geometry");
  return mesh;
}

}  // namespace shelltrack
