#include "hydrofmm/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace hydrofmm {

BoundingCube compute_bounding_cube(std::span<const Bead> beads) {
  if (beads.empty()) throw std::invalid_argument("no beads");
  Vec3 lo = beads[0].position;
  Vec3 hi = beads[0].position;
  for (const Bead& b : beads) {
    const Point3& p = b.position;
    if (!p.finite()) throw std::invalid_argument("invalid position");
    lo.x = std::min(lo.x, p.x); hi.x = std::max(hi.x, p.x);
    lo.y = std::min(lo.y, p.y); hi.y = std::max(hi.y, p.y);
    lo.z = std::min(lo.z, p.z); hi.z = std::max(hi.z, p.z);
  }
  BoundingCube cube;
  cube.center = {0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y), 0.5 * (lo.z + hi.z)};
  const double ext = std::max({hi.x - lo.x, hi.y - lo.y, hi.z - lo.z});
  if (ext > 0.0) {
    cube.half_width = 0.5 * ext * (1.0 + 1e-12);
  } else {
    // Degenerate extent (single bead or coincident beads).
    const double scale = std::max({1.0, std::abs(cube.center.x),
                                   std::abs(cube.center.y), std::abs(cube.center.z)});
    cube.half_width = 1e-12 * scale;
  }
  return cube;
}

}  // namespace hydrofmm
