// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "shelltrack/error.hpp"
#include "shelltrack/vec.hpp"

namespace shelltrack {

/// Calibrated static pinhole camera. World-to-camera: p_cam = R p + t;
/// points with p_cam.z > near are in front.
struct Camera {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;
  Mat3d rotation = Mat3d::identity();
  Vec3d translation{};
  double near = 0.1;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || width <= 0 || height <= 0)
      throw ValidationError("Camera: fx, fy > 0 and positive image size required");
  }

  Vec3d to_camera(const Vec3d& p) const { return rotation * p + translation; }
};

/// Plain-text key-value camera file: fx, fy, cx, cy, width, height,
/// extrinsic (3x4 row-major), near.
inline void save_camera(const std::string& path, const Camera& cam) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write camera file: " + path);
  os.precision(17);
  os << "fx " << cam.fx << "\n";
  os << "fy " << cam.fy << "\n";
  os << "cx " << cam.cx << "\n";
  os << "cy " << cam.cy << "\n";
  os << "width " << cam.width << "\n";
  os << "height " << cam.height << "\n";
  os << "extrinsic";
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) os << " " << cam.rotation(r, c);
    os << " " << cam.translation[r];
  }
  os << "\n";
  os << "near " << cam.near << "\n";
}

inline Camera load_camera(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open camera file: " + path);
  Camera cam;
  std::string key;
  bool saw_ext = false;
  while (is >> key) {
    if (key == "fx")
      is >> cam.fx;
    else if (key == "fy")
      is >> cam.fy;
    else if (key == "cx")
      is >> cam.cx;
    else if (key == "cy")
      is >> cam.cy;
    else if (key == "width")
      is >> cam.width;
    else if (key == "height")
      is >> cam.height;
    else if (key == "near")
      is >> cam.near;
    else if (key == "extrinsic") {
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) is >> cam.rotation(r, c);
        is >> cam.translation[r];
      }
      saw_ext = true;
    } else {
      throw IoError("camera file: unknown key '" + key + "'");
    }
  }
  if (!saw_ext) throw IoError("camera file: missing extrinsic");
  cam.validate();
  return cam;
}

/// Camera on the +z axis at `distance`, looking down at the z = 0 plane
/// centered on (center_x, center_y). Image x follows world x; image y runs
/// against world y (row-down convention).
inline Camera make_topdown_camera(int width, int height, double fx, double center_x,
                                  double center_y, double distance) {
  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.fx = fx;
  cam.fy = fx;
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
  cam.rotation = Mat3d::identity();
  cam.rotation(1, 1) = -1.0;
  cam.rotation(2, 2) = -1.0;
  cam.translation = Vec3d{-center_x, center_y, distance};
  cam.near = distance * 0.05;
  return cam;
}

}  // namespace shelltrack
