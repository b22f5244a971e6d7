#pragma once

#include <array>
#include <span>
#include <vector>

#include "hydrofmm/expansion.hpp"
#include "hydrofmm/geometry.hpp"

namespace hydrofmm {

/// Physical constants of the mobility kernel and the derived prefactors
///   C0 = kT/(6 pi eta a), C1 = kT/(8 pi eta), C2 = kT a^2/(12 pi eta).
struct RPYParams {
  double a = 1.0;
  double k_B = 1.0;
  double T = 1.0;
  double eta = 1.0;
  double C0 = 0.0;
  double C1 = 0.0;
  double C2 = 0.0;

  static RPYParams make(double a, double k_B, double T, double eta);
};

/// Self term: C0 * F.
Vec3 rpy_self(const Vec3& F, const RPYParams& p);

/// Pair mobility applied to a force, far branch (r >= 2a):
///   (C1/r) [ (I + ee^T) + (2a^2 / 3r^2)(I - 3 ee^T) ] F.
Vec3 rpy_pair_far(const Point3& xi, const Point3& xj, const Vec3& Fj,
                  const RPYParams& p);

/// Pair mobility, overlapping branch (0 < r < 2a), regularized form:
///   C0 [ (1 - 9r/32a) I + (3/32a) (r x r)/r ] F.
Vec3 rpy_pair_near(const Point3& xi, const Point3& xj, const Vec3& Fj,
                   const RPYParams& p);

/// Exact O(N^2) mobility matrix-vector product; the acceptance oracle.
/// Branch selection per pair: far for r >= 2a, near otherwise.
std::vector<Vec3> direct_rpy_matvec(std::span<const Bead> beads,
                                    const RPYParams& p, int threads = 0);

/// Branch-selecting pair term shared by the oracle and the near-field pass.
/// Returns false when the beads coincide.
/// The tensor term is applied as coefficient * (df * d) so that probing with
/// unit forces yields bitwise-symmetric matrix blocks.
inline bool rpy_pair_accumulate(Vec3& acc, const Point3& xi, const Point3& xj,
                                const Vec3& Fj, const RPYParams& p) {
  const Vec3 d = xj - xi;
  const double r2 = d.norm2();
  if (r2 == 0.0) return false;
  const double r = std::sqrt(r2);
  const double df = dot(d, Fj);
  if (r >= 2.0 * p.a) {
    const double c2 = 2.0 * p.a * p.a / (3.0 * r2);
    const double ifac = (p.C1 / r) * (1.0 + c2);
    const double tfac = (p.C1 / r) * (1.0 - 3.0 * c2) / r2;
    acc += ifac * Fj + tfac * (df * d);
  } else {
    const double ifac = p.C0 * (1.0 - 9.0 * r / (32.0 * p.a));
    const double tfac = p.C0 * 3.0 / (32.0 * p.a * r);
    acc += ifac * Fj + tfac * (df * d);
  }
  return true;
}

/// The four scalar charges per source bead feeding the Laplace potentials:
/// the three force components and F . y.
struct LaplaceChargeSet {
  std::vector<double> q1, q2, q3, q4;
  std::size_t size() const { return q1.size(); }
};

LaplaceChargeSet assemble_charges(std::span<const Bead> beads);

/// Per-target far-field ingredients: values of the three component
/// potentials, all four gradients, and the Hessians needed for grad L_C.
struct FarFieldPieces {
  double V1 = 0.0, V2 = 0.0, V3 = 0.0;
  Vec3 g1, g2, g3, g4;
  std::array<double, 6> H1{}, H2{}, H3{};
};

/// Recombination of the four potentials into the far-field mobility product
/// at target x.
Vec3 combine_far_field(const Point3& x, const FarFieldPieces& pieces,
                       const RPYParams& p);

}  // namespace hydrofmm
