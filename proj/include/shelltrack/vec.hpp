// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>

namespace shelltrack {

// Fixed-size vector/matrix types, generic over the scalar carrier so the
// same formulas run on double, Tay<K>, and tape variables.

// double shims for the carrier-generic operations.
inline double recip(double a) { return 1.0 / a; }
inline double scalar_value(double a) { return a; }

template <class S>
struct V2 {
  S x{}, y{};

  S& operator[](int i) { return i == 0 ? x : y; }
  const S& operator[](int i) const { return i == 0 ? x : y; }

  friend V2 operator+(const V2& a, const V2& b) { return {a.x + b.x, a.y + b.y}; }
  friend V2 operator-(const V2& a, const V2& b) { return {a.x - b.x, a.y - b.y}; }
  template <class T>
  friend V2 operator*(const V2& a, const T& s) {
    return {a.x * s, a.y * s};
  }
};

template <class S>
struct V3 {
  S x{}, y{}, z{};

  S& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  const S& operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  friend V3 operator+(const V3& a, const V3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend V3 operator-(const V3& a, const V3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend V3 operator-(const V3& a) { return {-a.x, -a.y, -a.z}; }
  template <class T>
  friend V3 operator*(const V3& a, const T& s) {
    return {a.x * s, a.y * s, a.z * s};
  }
  V3& operator+=(const V3& b) {
    x = x + b.x;
    y = y + b.y;
    z = z + b.z;
    return *this;
  }
};

using Vec2d = V2<double>;
using Vec3d = V3<double>;

template <class S>
inline S dot(const V3<S>& a, const V3<S>& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <class S>
inline S dot(const V2<S>& a, const V2<S>& b) {
  return a.x * b.x + a.y * b.y;
}

template <class S>
inline V3<S> cross(const V3<S>& a, const V3<S>& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <class S>
inline S norm(const V3<S>& a) {
  using std::sqrt;
  return sqrt(dot(a, a));
}

template <class S>
inline V3<S> normalize(const V3<S>& a) {
  return a * recip(norm(a));
}

inline double norm(const Vec2d& a) { return std::sqrt(a.x * a.x + a.y * a.y); }

/// Symmetric 2x2 tensor stored as its three independent components.
template <class S>
struct Sym2 {
  S m11{}, m12{}, m22{};

  S operator()(int a, int b) const { return a == b ? (a == 0 ? m11 : m22) : m12; }

  friend Sym2 operator+(const Sym2& a, const Sym2& b) {
    return {a.m11 + b.m11, a.m12 + b.m12, a.m22 + b.m22};
  }
  friend Sym2 operator-(const Sym2& a, const Sym2& b) {
    return {a.m11 - b.m11, a.m12 - b.m12, a.m22 - b.m22};
  }
  template <class T>
  friend Sym2 operator*(const Sym2& a, const T& s) {
    return {a.m11 * s, a.m12 * s, a.m22 * s};
  }
};

using Sym2d = Sym2<double>;

/// General 2x2, row-major.
template <class S>
struct Mat2 {
  S m[2][2]{};
  S& operator()(int a, int b) { return m[a][b]; }
  const S& operator()(int a, int b) const { return m[a][b]; }
};

using Mat2d = Mat2<double>;

/// General 3x3, row-major (plain double; used by cameras and rigid maps).
struct Mat3d {
  double m[3][3]{};

  double& operator()(int a, int b) { return m[a][b]; }
  double operator()(int a, int b) const { return m[a][b]; }

  static Mat3d identity() {
    Mat3d r;
    r.m[0][0] = r.m[1][1] = r.m[2][2] = 1.0;
    return r;
  }

  Vec3d operator*(const Vec3d& v) const {
    return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
  }

  Mat3d operator*(const Mat3d& o) const {
    Mat3d r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) r.m[i][j] += m[i][k] * o.m[k][j];
    return r;
  }

  Mat3d transposed() const {
    Mat3d r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
    return r;
  }

  Vec3d mul_transposed(const Vec3d& v) const {
    return {m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z,
            m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
            m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z};
  }

  Vec3d col(int j) const { return {m[0][j], m[1][j], m[2][j]}; }
  void set_col(int j, const Vec3d& v) {
    m[0][j] = v.x;
    m[1][j] = v.y;
    m[2][j] = v.z;
  }
};

/// Compensated (Kahan) accumulator: order-fixed summations reproduce to
/// ~1e-16 relative regardless of magnitudes encountered along the way.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double v) {
    const double y = v - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

}  // namespace shelltrack
