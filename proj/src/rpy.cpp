#include "hydrofmm/rpy.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace hydrofmm {

RPYParams RPYParams::make(double a, double k_B, double T, double eta) {
  if (!(a > 0.0) || !(k_B > 0.0) || !(T > 0.0) || !(eta > 0.0)) {
    throw std::invalid_argument("RPY parameters must be positive");
  }
  RPYParams p;
  p.a = a;
  p.k_B = k_B;
  p.T = T;
  p.eta = eta;
  const double kT = k_B * T;
  const double pi = std::numbers::pi;
  p.C0 = kT / (6.0 * pi * eta * a);
  p.C1 = kT / (8.0 * pi * eta);
  p.C2 = kT * a * a / (12.0 * pi * eta);
  return p;
}

Vec3 rpy_self(const Vec3& F, const RPYParams& p) { return p.C0 * F; }

Vec3 rpy_pair_far(const Point3& xi, const Point3& xj, const Vec3& Fj,
                  const RPYParams& p) {
  const Vec3 d = xj - xi;
  const double r2 = d.norm2();
  if (r2 == 0.0) throw std::domain_error("coincident beads");
  const double r = std::sqrt(r2);
  if (r < 2.0 * p.a) {
    throw std::domain_error("far form called in overlap regime");
  }
  const double c2 = 2.0 * p.a * p.a / (3.0 * r2);
  const double df = dot(d, Fj);
  const double ifac = (p.C1 / r) * (1.0 + c2);
  const double tfac = (p.C1 / r) * (1.0 - 3.0 * c2) / r2;
  return ifac * Fj + tfac * (df * d);
}

Vec3 rpy_pair_near(const Point3& xi, const Point3& xj, const Vec3& Fj,
                   const RPYParams& p) {
  const Vec3 d = xj - xi;
  const double r2 = d.norm2();
  if (r2 == 0.0) throw std::domain_error("coincident beads");
  const double r = std::sqrt(r2);
  if (r >= 2.0 * p.a) {
    throw std::domain_error("near form called outside overlap regime");
  }
  const double df = dot(d, Fj);
  const double ifac = p.C0 * (1.0 - 9.0 * r / (32.0 * p.a));
  const double tfac = p.C0 * 3.0 / (32.0 * p.a * r);
  return ifac * Fj + tfac * (df * d);
}

std::vector<Vec3> direct_rpy_matvec(std::span<const Bead> beads,
                                    const RPYParams& p, int threads) {
  const std::int64_t n = std::int64_t(beads.size());
  std::vector<Vec3> out(beads.size());
#if defined(_OPENMP)
  if (threads <= 0) threads = omp_get_max_threads();
#endif
  int bad_i = -1, bad_j = -1;
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads)
  for (std::int64_t i = 0; i < n; ++i) {
    Vec3 acc = p.C0 * beads[i].force;
    for (std::int64_t j = 0; j < n; ++j) {
      if (j == i) continue;
      if (!rpy_pair_accumulate(acc, beads[i].position, beads[j].position,
                               beads[j].force, p)) {
#pragma omp critical
        {
          bad_i = int(i);
          bad_j = int(j);
        }
      }
    }
    out[i] = acc;
  }
  if (bad_i >= 0) {
    throw std::domain_error("coincident beads at indices (" +
                            std::to_string(bad_i) + ", " +
                            std::to_string(bad_j) + ")");
  }
  return out;
}

LaplaceChargeSet assemble_charges(std::span<const Bead> beads) {
  LaplaceChargeSet c;
  c.q1.reserve(beads.size());
  c.q2.reserve(beads.size());
  c.q3.reserve(beads.size());
  c.q4.reserve(beads.size());
  for (const Bead& b : beads) {
    c.q1.push_back(b.force.x);
    c.q2.push_back(b.force.y);
    c.q3.push_back(b.force.z);
    c.q4.push_back(dot(b.force, b.position));
  }
  return c;
}

Vec3 combine_far_field(const Point3& x, const FarFieldPieces& f,
                       const RPYParams& p) {
  using D = ExpansionDerivatives;
  const Vec3 grad_lc{f.H1[D::XX] + f.H2[D::XY] + f.H3[D::XZ],
                     f.H1[D::XY] + f.H2[D::YY] + f.H3[D::YZ],
                     f.H1[D::XZ] + f.H2[D::YZ] + f.H3[D::ZZ]};
  const Vec3 values{f.V1, f.V2, f.V3};
  const Vec3 mixed = x.x * f.g1 + x.y * f.g2 + x.z * f.g3;
  return p.C1 * (values - mixed + f.g4) - p.C2 * grad_lc;
}

}  // namespace hydrofmm
