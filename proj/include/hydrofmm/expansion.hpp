#pragma once

#include <array>
#include <span>
#include <vector>

#include "hydrofmm/geometry.hpp"
#include "hydrofmm/harmonics.hpp"

namespace hydrofmm {

/// Value, gradient and Hessian of an expansion at a point. The Hessian is
/// stored as its six independent entries; the trace vanishes analytically.
struct ExpansionDerivatives {
  enum { XX = 0, YY = 1, ZZ = 2, XY = 3, XZ = 4, YZ = 5 };

  double value = 0.0;
  std::array<double, 3> gradient{};
  std::array<double, 6> hessian{};

  double trace() const { return hessian[XX] + hessian[YY] + hessian[ZZ]; }
  double hessian_max() const;
};

/// Truncated multipole expansion about `center`; coefficients follow the
/// scaled convention M_n^m = sum_j q_j rho_j^n conj(Y_n^m) with radii in
/// units of `scale`, stored for 0 <= m <= n (negative orders are implied
/// conjugates). `scale` is the half-width of the owning box.
struct MultipoleCoeffs {
  int order = 0;
  Point3 center;
  double scale = 1.0;
  std::vector<Cx> coef;

  MultipoleCoeffs() = default;
  MultipoleCoeffs(int p, const Point3& c, double s)
      : order(p), center(c), scale(s), coef(tri_count(p)) {}

  Cx& at(int n, int m) { return coef[tri_index(n, m)]; }
  const Cx& at(int n, int m) const { return coef[tri_index(n, m)]; }
};

/// Truncated local expansion, same layout as MultipoleCoeffs.
struct LocalCoeffs {
  int order = 0;
  Point3 center;
  double scale = 1.0;
  std::vector<Cx> coef;

  LocalCoeffs() = default;
  LocalCoeffs(int p, const Point3& c, double s)
      : order(p), center(c), scale(s), coef(tri_count(p)) {}

  Cx& at(int n, int m) { return coef[tri_index(n, m)]; }
  const Cx& at(int n, int m) const { return coef[tri_index(n, m)]; }
};

// Expansion-forming operators. The *_add variants accumulate into an
// existing coefficient set of matching order and geometry.

MultipoleCoeffs p2m(std::span<const Point3> points, std::span<const double> charges,
                    const Point3& center, double scale, int p);
void p2m_add(MultipoleCoeffs& dst, std::span<const Point3> points,
             std::span<const double> charges);

MultipoleCoeffs m2m(const MultipoleCoeffs& child, const Point3& parent_center,
                    double parent_scale);
void m2m_add(MultipoleCoeffs& dst, const MultipoleCoeffs& child);

LocalCoeffs m2l(const MultipoleCoeffs& source, const Point3& target_center,
                double target_scale);
void m2l_add(LocalCoeffs& dst, const MultipoleCoeffs& source);

LocalCoeffs l2l(const LocalCoeffs& parent, const Point3& child_center,
                double child_scale);
void l2l_add(LocalCoeffs& dst, const LocalCoeffs& parent);

LocalCoeffs p2l(std::span<const Point3> points, std::span<const double> charges,
                const Point3& center, double scale, int p);
void p2l_add(LocalCoeffs& dst, std::span<const Point3> points,
             std::span<const double> charges);

// Evaluation. Multipole evaluation requires the target outside the
// expansion's convergence sphere of radius sqrt(3)*scale.

double eval_multipole(const MultipoleCoeffs& m, const Point3& x);  // m2t
double eval_local(const LocalCoeffs& l, const Point3& x);

ExpansionDerivatives eval_multipole_derivatives(const MultipoleCoeffs& m,
                                                const Point3& x);
ExpansionDerivatives eval_local_derivatives(const LocalCoeffs& l,
                                            const Point3& x);

}  // namespace hydrofmm
