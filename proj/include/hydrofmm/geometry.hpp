#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace hydrofmm {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

  friend Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
  friend Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
  friend Vec3 operator*(Vec3 a, double s) { return a *= s; }
  friend Vec3 operator*(double s, Vec3 a) { return a *= s; }
  friend Vec3 operator/(Vec3 a, double s) { return a *= (1.0 / s); }

  double norm2() const { return x * x + y * y + z * z; }
  double norm() const { return std::sqrt(norm2()); }
  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

inline double dot(const Vec3& a, const Vec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

/// A bead position; alias kept since positions and vectors share the layout.
using Point3 = Vec3;

/// Unit of both source and target data: position, applied force, and the
/// output displacement slot.
struct Bead {
  Point3 position;
  Vec3 force;
  Vec3 result;
};

/// Axis-aligned cube, used as the root box of the octree.
struct BoundingCube {
  Point3 center;
  double half_width = 0.0;

  bool contains(const Point3& p) const {
    const double slack = half_width * (1.0 + 1e-12) + 1e-300;
    return std::abs(p.x - center.x) <= slack &&
           std::abs(p.y - center.y) <= slack &&
           std::abs(p.z - center.z) <= slack;
  }
};

/// Smallest cube centered on the midpoint of the per-axis extrema, expanded
/// by a relative margin so boundary beads are strictly interior.
BoundingCube compute_bounding_cube(std::span<const Bead> beads);

}  // namespace hydrofmm
