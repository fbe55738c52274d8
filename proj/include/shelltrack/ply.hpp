// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "shelltrack/error.hpp"
#include "shelltrack/vec.hpp"

namespace shelltrack {

/// Point cloud or triangle mesh with optional per-vertex normals.
struct PointCloud {
  std::vector<Vec3d> points;
  std::vector<Vec3d> normals;                 // empty or same size as points
  std::vector<std::array<int, 3>> triangles;  // empty for bare clouds

  bool has_normals() const { return !normals.empty(); }
};

/// PLY writer (double-precision properties). Binary is little-endian.
inline void save_ply(const std::string& path, const PointCloud& cloud, bool binary = true) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write PLY: " + path);
  os << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
  os << "element vertex " << cloud.points.size() << "\n";
  os << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_normals()) os << "property double nx\nproperty double ny\nproperty double nz\n";
  os << "element face " << cloud.triangles.size() << "\n";
  os << "property list uchar int vertex_indices\n";
  os << "end_header\n";

  if (binary) {
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
      double row[6] = {cloud.points[i].x, cloud.points[i].y, cloud.points[i].z, 0, 0, 0};
      int n = 3;
      if (cloud.has_normals()) {
        row[3] = cloud.normals[i].x;
        row[4] = cloud.normals[i].y;
        row[5] = cloud.normals[i].z;
        n = 6;
      }
      os.write(reinterpret_cast<const char*>(row), n * sizeof(double));
    }
    for (const auto& t : cloud.triangles) {
      const std::uint8_t c = 3;
      os.write(reinterpret_cast<const char*>(&c), 1);
      const std::int32_t idx[3] = {t[0], t[1], t[2]};
      os.write(reinterpret_cast<const char*>(idx), sizeof(idx));
    }
  } else {
    os.precision(17);
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
      os << cloud.points[i].x << " " << cloud.points[i].y << " " << cloud.points[i].z;
      if (cloud.has_normals())
        os << " " << cloud.normals[i].x << " " << cloud.normals[i].y << " "
           << cloud.normals[i].z;
      os << "\n";
    }
    for (const auto& t : cloud.triangles) os << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
  }
}

inline PointCloud load_ply(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open PLY: " + path);
  std::string line;
  std::getline(is, line);
  if (line != "ply" && line != "ply\r") throw IoError("not a PLY file: " + path);

  bool binary = false;
  std::size_t n_vertex = 0, n_face = 0;
  struct Prop {
    std::string name;
    std::string type;
  };
  std::vector<Prop> vertex_props;
  std::string current_element;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "binary_little_endian")
        binary = true;
      else if (fmt == "ascii")
        binary = false;
      else
        throw IoError("unsupported PLY format: " + fmt);
    } else if (tok == "element") {
      std::string name;
      std::size_t count;
      ls >> name >> count;
      current_element = name;
      if (name == "vertex")
        n_vertex = count;
      else if (name == "face")
        n_face = count;
      else
        throw IoError("unsupported PLY element: " + name);
    } else if (tok == "property") {
      if (current_element == "vertex") {
        Prop p;
        ls >> p.type >> p.name;
        if (p.type == "list") throw IoError("list property on vertex element unsupported");
        vertex_props.push_back(p);
      }
      // face list property layout is fixed below
    } else if (tok == "end_header") {
      break;
    } else if (tok == "comment" || tok == "obj_info") {
      continue;
    }
  }

  auto prop_index = [&](const std::string& name) {
    for (std::size_t i = 0; i < vertex_props.size(); ++i)
      if (vertex_props[i].name == name) return static_cast<int>(i);
    return -1;
  };
  const int ix = prop_index("x"), iy = prop_index("y"), iz = prop_index("z");
  const int inx = prop_index("nx"), iny = prop_index("ny"), inz = prop_index("nz");
  if (ix < 0 || iy < 0 || iz < 0) throw IoError("PLY missing x/y/z vertex properties");

  auto type_size = [](const std::string& t) -> int {
    if (t == "double") return 8;
    if (t == "float") return 4;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32") return 4;
    if (t == "uchar" || t == "char" || t == "uint8" || t == "int8") return 1;
    if (t == "short" || t == "ushort") return 2;
    throw IoError("unsupported PLY property type: " + t);
  };

  PointCloud cloud;
  cloud.points.resize(n_vertex);
  const bool has_normals = inx >= 0 && iny >= 0 && inz >= 0;
  if (has_normals) cloud.normals.resize(n_vertex);

  if (binary) {
    for (std::size_t v = 0; v < n_vertex; ++v) {
      std::vector<double> vals(vertex_props.size());
      for (std::size_t p = 0; p < vertex_props.size(); ++p) {
        const int sz = type_size(vertex_props[p].type);
        unsigned char buf[8];
        is.read(reinterpret_cast<char*>(buf), sz);
        if (vertex_props[p].type == "double") {
          double d;
          std::memcpy(&d, buf, 8);
          vals[p] = d;
        } else if (vertex_props[p].type == "float") {
          float f;
          std::memcpy(&f, buf, 4);
          vals[p] = f;
        } else {
          vals[p] = 0.0;  // non-float vertex extras ignored
        }
      }
      cloud.points[v] = {vals[ix], vals[iy], vals[iz]};
      if (has_normals) cloud.normals[v] = {vals[inx], vals[iny], vals[inz]};
    }
    for (std::size_t f = 0; f < n_face; ++f) {
      std::uint8_t count;
      is.read(reinterpret_cast<char*>(&count), 1);
      std::vector<std::int32_t> idx(count);
      is.read(reinterpret_cast<char*>(idx.data()), count * 4);
      for (int k = 1; k + 1 < count; ++k)
        cloud.triangles.push_back({idx[0], idx[k], idx[k + 1]});
    }
    if (!is) throw IoError("truncated PLY: " + path);
  } else {
    for (std::size_t v = 0; v < n_vertex; ++v) {
      std::vector<double> vals(vertex_props.size());
      for (auto& val : vals)
        if (!(is >> val)) throw IoError("truncated PLY: " + path);
      cloud.points[v] = {vals[ix], vals[iy], vals[iz]};
      if (has_normals) cloud.normals[v] = {vals[inx], vals[iny], vals[inz]};
    }
    for (std::size_t f = 0; f < n_face; ++f) {
      int count;
      if (!(is >> count)) throw IoError("truncated PLY: " + path);
      std::vector<int> idx(count);
      for (auto& i : idx) is >> i;
      for (int k = 1; k + 1 < count; ++k) cloud.triangles.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  return cloud;
}

}  // namespace shelltrack
