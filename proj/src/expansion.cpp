#include "hydrofmm/expansion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hydrofmm {

namespace {

// Conversions between the stored convention and the factorial-normalized
// solid-harmonic coefficients the translation identities are written in:
// outer O_n^m = M_n^m / sqrt((n-m)!(n+m)!), inner I_n^m = L_n^m * sqrt(...).

std::vector<Cx> outer_full(const MultipoleCoeffs& m, const HarmonicBasisTables& tb,
                           double degree_ratio = 1.0) {
  std::vector<Cx> out(full_count(m.order));
  double ratio_n = 1.0;
  for (int n = 0; n <= m.order; ++n) {
    for (int mm = 0; mm <= n; ++mm) {
      const Cx v = ratio_n / tb.fn(n, mm) * m.at(n, mm);
      out[full_index(n, mm)] = v;
      if (mm > 0) {
        const double sign = (mm & 1) ? -1.0 : 1.0;
        out[full_index(n, -mm)] = sign * conj(v);
      }
    }
    ratio_n *= degree_ratio;
  }
  return out;
}

std::vector<Cx> inner_full(const LocalCoeffs& l, const HarmonicBasisTables& tb) {
  std::vector<Cx> out(full_count(l.order));
  for (int n = 0; n <= l.order; ++n) {
    for (int mm = 0; mm <= n; ++mm) {
      const Cx v = tb.fn(n, mm) * l.at(n, mm);
      out[full_index(n, mm)] = v;
      if (mm > 0) {
        const double sign = (mm & 1) ? -1.0 : 1.0;
        out[full_index(n, -mm)] = sign * conj(v);
      }
    }
  }
  return out;
}

struct PointFrame {
  double rho = 0.0;        // |x - center| / scale
  double ct = 1.0;         // cos(theta)
  Cx e{1.0, 0.0};          // e^{i phi}
};

PointFrame frame_of(const Vec3& vhat) {
  PointFrame f;
  f.rho = vhat.norm();
  if (f.rho > 0.0) f.ct = vhat.z / f.rho;
  const double rxy = std::hypot(vhat.x, vhat.y);
  if (rxy > 0.0) f.e = {vhat.x / rxy, vhat.y / rxy};
  return f;
}

void require_same_order(int a, int b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": order mismatch");
}

}  // namespace

double ExpansionDerivatives::hessian_max() const {
  double m = 0.0;
  for (double h : hessian) m = std::max(m, std::abs(h));
  return m;
}

MultipoleCoeffs p2m(std::span<const Point3> points, std::span<const double> charges,
                    const Point3& center, double scale, int p) {
  MultipoleCoeffs m(p, center, scale);
  p2m_add(m, points, charges);
  return m;
}

void p2m_add(MultipoleCoeffs& dst, std::span<const Point3> points,
             std::span<const double> charges) {
  const HarmonicBasisTables tb(dst.order);
  std::vector<Cx> basis(tri_count(dst.order));
  const double inv_s = 1.0 / dst.scale;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 yhat = (points[i] - dst.center) * inv_s;
    regular_basis(yhat, dst.order, basis);
    const double q = charges[i];
    for (int n = 0; n <= dst.order; ++n) {
      for (int mm = 0; mm <= n; ++mm) {
        const int idx = tri_index(n, mm);
        dst.coef[idx] += q * tb.fn(n, mm) * conj(basis[idx]);
      }
    }
  }
}

MultipoleCoeffs m2m(const MultipoleCoeffs& child, const Point3& parent_center,
                    double parent_scale) {
  MultipoleCoeffs parent(child.order, parent_center, parent_scale);
  m2m_add(parent, child);
  return parent;
}

void m2m_add(MultipoleCoeffs& dst, const MultipoleCoeffs& child) {
  require_same_order(dst.order, child.order, "m2m");
  const int p = dst.order;
  const HarmonicBasisTables tb(p);
  const Vec3 dhat = (child.center - dst.center) * (1.0 / dst.scale);
  const std::vector<Cx> src = outer_full(child, tb, child.scale / dst.scale);
  std::vector<Cx> shift(full_count(p));
  regular_basis_full(dhat, p, shift);

  for (int j = 0; j <= p; ++j) {
    for (int k = 0; k <= j; ++k) {
      Cx acc{0.0, 0.0};
      for (int n = 0; n <= j; ++n) {
        const int q = j - n;
        const int mlo = std::max(-n, k - q);
        const int mhi = std::min(n, k + q);
        for (int mm = mlo; mm <= mhi; ++mm) {
          acc += src[full_index(n, mm)] * conj(shift[full_index(q, k - mm)]);
        }
      }
      dst.at(j, k) += tb.fn(j, k) * acc;
    }
  }
}

LocalCoeffs m2l(const MultipoleCoeffs& source, const Point3& target_center,
                double target_scale) {
  LocalCoeffs local(source.order, target_center, target_scale);
  m2l_add(local, source);
  return local;
}

void m2l_add(LocalCoeffs& dst, const MultipoleCoeffs& source) {
  require_same_order(dst.order, source.order, "m2l");
  const int p = dst.order;
  const HarmonicBasisTables tb(p);
  const Vec3 dhat = (dst.center - source.center) * (1.0 / source.scale);
  const std::vector<Cx> src = outer_full(source, tb);
  std::vector<Cx> trans(full_count(2 * p));
  singular_basis_full(dhat, 2 * p, trans);

  const double inv_ss = 1.0 / source.scale;
  double tr_j = 1.0;
  const double tratio = dst.scale / source.scale;
  for (int j = 0; j <= p; ++j) {
    for (int k = 0; k <= j; ++k) {
      Cx acc{0.0, 0.0};
      for (int n = 0; n <= p; ++n) {
        for (int mm = -n; mm <= n; ++mm) {
          acc += src[full_index(n, mm)] * trans[full_index(n + j, mm - k)];
        }
      }
      const double sign = ((j + k) & 1) ? -1.0 : 1.0;
      dst.at(j, k) += sign * tr_j * inv_ss / tb.fn(j, k) * acc;
    }
    tr_j *= tratio;
  }
}

LocalCoeffs l2l(const LocalCoeffs& parent, const Point3& child_center,
                double child_scale) {
  LocalCoeffs child(parent.order, child_center, child_scale);
  l2l_add(child, parent);
  return child;
}

void l2l_add(LocalCoeffs& dst, const LocalCoeffs& parent) {
  require_same_order(dst.order, parent.order, "l2l");
  const int p = dst.order;
  const HarmonicBasisTables tb(p);
  const Vec3 dhat = (dst.center - parent.center) * (1.0 / parent.scale);
  const std::vector<Cx> src = inner_full(parent, tb);
  std::vector<Cx> shift(full_count(p));
  regular_basis_full(dhat, p, shift);

  double ratio_j = 1.0;
  const double ratio = dst.scale / parent.scale;
  for (int j = 0; j <= p; ++j) {
    for (int k = 0; k <= j; ++k) {
      Cx acc{0.0, 0.0};
      for (int n = j; n <= p; ++n) {
        const int q = n - j;
        const int mlo = std::max(-n, k - q);
        const int mhi = std::min(n, k + q);
        for (int mm = mlo; mm <= mhi; ++mm) {
          acc += src[full_index(n, mm)] * shift[full_index(q, mm - k)];
        }
      }
      dst.at(j, k) += ratio_j / tb.fn(j, k) * acc;
    }
    ratio_j *= ratio;
  }
}

LocalCoeffs p2l(std::span<const Point3> points, std::span<const double> charges,
                const Point3& center, double scale, int p) {
  LocalCoeffs l(p, center, scale);
  p2l_add(l, points, charges);
  return l;
}

void p2l_add(LocalCoeffs& dst, std::span<const Point3> points,
             std::span<const double> charges) {
  const HarmonicBasisTables tb(dst.order);
  std::vector<Cx> basis(tri_count(dst.order));
  const double inv_s = 1.0 / dst.scale;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec3 uhat = (points[i] - dst.center) * inv_s;
    singular_basis(uhat, dst.order, basis);
    const double q = charges[i] * inv_s;
    for (int n = 0; n <= dst.order; ++n) {
      for (int mm = 0; mm <= n; ++mm) {
        const int idx = tri_index(n, mm);
        dst.coef[idx] += q / tb.fn(n, mm) * conj(basis[idx]);
      }
    }
  }
}

double eval_multipole(const MultipoleCoeffs& m, const Point3& x) {
  const HarmonicBasisTables tb(m.order);
  const Vec3 vhat = (x - m.center) * (1.0 / m.scale);
  if (vhat.norm2() <= 3.0) {
    throw std::domain_error("target inside multipole sphere");
  }
  std::vector<Cx> basis(tri_count(m.order));
  singular_basis(vhat, m.order, basis);
  double total = 0.0;
  for (int n = 0; n <= m.order; ++n) {
    const int d0 = tri_index(n, 0);
    total += m.coef[d0].re / tb.fn(n, 0) * basis[d0].re;
    for (int mm = 1; mm <= n; ++mm) {
      const int idx = tri_index(n, mm);
      total += 2.0 / tb.fn(n, mm) * real(m.coef[idx] * basis[idx]);
    }
  }
  return total / m.scale;
}

double eval_local(const LocalCoeffs& l, const Point3& x) {
  const HarmonicBasisTables tb(l.order);
  const Vec3 vhat = (x - l.center) * (1.0 / l.scale);
  std::vector<Cx> basis(tri_count(l.order));
  regular_basis(vhat, l.order, basis);
  double total = 0.0;
  for (int n = 0; n <= l.order; ++n) {
    const int d0 = tri_index(n, 0);
    total += l.coef[d0].re * tb.fn(n, 0) * basis[d0].re;
    for (int mm = 1; mm <= n; ++mm) {
      const int idx = tri_index(n, mm);
      total += 2.0 * tb.fn(n, mm) * real(l.coef[idx] * basis[idx]);
    }
  }
  return total;
}

namespace {

// Shared assembly of (value, gradient, Hessian) from the directional
// derivative sums. gp = (dx + i dy), gpg0 = (dx + i dy) dz,
// gpgp = (dx + i dy)^2, g0 = dz, g00 = dz dz applied to the expansion.
ExpansionDerivatives assemble(double value, double g0, const Cx& gp,
                              const Cx& gpg0, const Cx& gpgp, double g00,
                              double inv_s) {
  ExpansionDerivatives d;
  const double inv_s2 = inv_s * inv_s;
  const double inv_s3 = inv_s2 * inv_s;
  d.value = value;
  d.gradient = {gp.re * inv_s, gp.im * inv_s, g0 * inv_s};
  d.hessian[ExpansionDerivatives::XX] = 0.5 * (gpgp.re - g00) * inv_s2;
  d.hessian[ExpansionDerivatives::YY] = 0.5 * (-gpgp.re - g00) * inv_s2;
  d.hessian[ExpansionDerivatives::ZZ] = g00 * inv_s2;
  d.hessian[ExpansionDerivatives::XY] = 0.5 * gpgp.im * inv_s2;
  d.hessian[ExpansionDerivatives::XZ] = gpg0.re * inv_s2;
  d.hessian[ExpansionDerivatives::YZ] = gpg0.im * inv_s2;
  (void)inv_s3;
  return d;
}

}  // namespace

ExpansionDerivatives eval_multipole_derivatives(const MultipoleCoeffs& m,
                                                const Point3& x) {
  const int p = m.order;
  const HarmonicBasisTables tb(p);
  const double inv_s = 1.0 / m.scale;
  const Vec3 vhat = (x - m.center) * inv_s;
  if (vhat.norm2() <= 3.0) {
    throw std::domain_error("target inside multipole sphere");
  }
  const PointFrame f = frame_of(vhat);

  std::vector<double> P(tri_count(p + 2));
  legendre_table(f.ct, p + 2, P);
  std::vector<Cx> E(p + 3);
  E[0] = {1.0, 0.0};
  for (int mm = 1; mm <= p + 2; ++mm) E[mm] = E[mm - 1] * f.e;
  std::vector<double> ir(p + 3);  // ir[n] = rho^-(n+1)
  ir[0] = 1.0 / f.rho;
  for (int n = 1; n <= p + 2; ++n) ir[n] = ir[n - 1] * ir[0];

  double value = 0.0;
  double s1 = 0.0, s9 = 0.0;
  Cx s2{}, s3{}, s4{}, s5{}, s6{}, s7{}, s8{}, s10{};

  for (int n = 0; n <= p; ++n) {
    const double w0 = m.at(n, 0).re;  // C_n^0 = 1
    value += w0 * P[tri_index(n, 0)] * ir[n];
    s1 -= w0 * double(n + 1) * P[tri_index(n + 1, 0)] * ir[n + 1];
    s9 += w0 * double((n + 1) * (n + 2)) * P[tri_index(n + 2, 0)] * ir[n + 2];
    s3 -= w0 * P[tri_index(n + 1, 1)] * ir[n + 1] * E[1];
    s5 += w0 * double(n + 1) * P[tri_index(n + 2, 1)] * ir[n + 2] * E[1];
    s7 += w0 * P[tri_index(n + 2, 2)] * ir[n + 2] * E[2];

    for (int mm = 1; mm <= n; ++mm) {
      const Cx w = tb.cn(n, mm) * m.at(n, mm);
      const double a1 = double(n - mm + 1);
      const double a2 = a1 * double(n - mm + 2);
      const double a3 = a2 * double(n - mm + 3);
      const double a4 = a3 * double(n - mm + 4);

      value += 2.0 * P[tri_index(n, mm)] * ir[n] * real(w * E[mm]);
      s2 -= a1 * P[tri_index(n + 1, mm)] * ir[n + 1] * (w * E[mm]);
      s3 -= P[tri_index(n + 1, mm + 1)] * ir[n + 1] * (w * E[mm + 1]);
      s4 += a2 * P[tri_index(n + 1, mm - 1)] * ir[n + 1] * (w * E[mm - 1]);
      s5 += a1 * P[tri_index(n + 2, mm + 1)] * ir[n + 2] * (w * E[mm + 1]);
      s6 -= a3 * P[tri_index(n + 2, mm - 1)] * ir[n + 2] * (w * E[mm - 1]);
      s7 += P[tri_index(n + 2, mm + 2)] * ir[n + 2] * (w * E[mm + 2]);
      if (mm >= 2) {
        s8 += a4 * P[tri_index(n + 2, mm - 2)] * ir[n + 2] * (w * E[mm - 2]);
      } else {
        s8 -= double(n * (n + 1)) * P[tri_index(n + 2, 1)] * ir[n + 2] *
              (w * conj(E[1]));
      }
      s10 += a2 * P[tri_index(n + 2, mm)] * ir[n + 2] * (w * E[mm]);
    }
  }

  const double g0 = s1 + 2.0 * real(s2);
  const Cx gp = s3 + conj(s4);
  const Cx gpg0 = s5 + conj(s6);
  const Cx gpgp = s7 + conj(s8);
  const double g00 = s9 + 2.0 * real(s10);

  ExpansionDerivatives d = assemble(value, g0, gp, gpg0, gpgp, g00, inv_s);
  d.value *= inv_s;
  for (double& g : d.gradient) g *= inv_s;
  for (double& h : d.hessian) h *= inv_s;
  return d;
}

ExpansionDerivatives eval_local_derivatives(const LocalCoeffs& l,
                                            const Point3& x) {
  const int p = l.order;
  const HarmonicBasisTables tb(p);
  const double inv_s = 1.0 / l.scale;
  const Vec3 vhat = (x - l.center) * inv_s;
  const PointFrame f = frame_of(vhat);

  std::vector<double> P(tri_count(p));
  legendre_table(f.ct, p, P);
  std::vector<Cx> E(p + 1);
  E[0] = {1.0, 0.0};
  for (int mm = 1; mm <= p; ++mm) E[mm] = E[mm - 1] * f.e;
  std::vector<double> rp(p + 1);  // rp[n] = rho^n, with rho^0 = 1 at rho = 0
  rp[0] = 1.0;
  for (int n = 1; n <= p; ++n) rp[n] = rp[n - 1] * f.rho;

  double value = 0.0;
  double s1 = 0.0, s9 = 0.0;
  Cx s2{}, s3{}, s4{}, s5{}, s6{}, s7{}, s8{}, s10{};

  for (int n = 0; n <= p; ++n) {
    const double w0 = l.at(n, 0).re;
    value += w0 * P[tri_index(n, 0)] * rp[n];
    if (n >= 1) s1 += w0 * double(n) * P[tri_index(n - 1, 0)] * rp[n - 1];
    if (n >= 2) {
      s3 -= w0 * P[tri_index(n - 1, 1)] * rp[n - 1] * E[1];
      s9 += w0 * double(n * (n - 1)) * P[tri_index(n - 2, 0)] * rp[n - 2];
    }
    if (n >= 3) s5 -= w0 * double(n) * P[tri_index(n - 2, 1)] * rp[n - 2] * E[1];
    if (n >= 4) s7 += w0 * P[tri_index(n - 2, 2)] * rp[n - 2] * E[2];

    for (int mm = 1; mm <= n; ++mm) {
      const Cx w = tb.cn(n, mm) * l.at(n, mm);
      const double b1 = double(n + mm);
      const double b2 = b1 * double(n + mm - 1);
      const double b3 = b2 * double(n + mm - 2);
      const double b4 = b3 * double(n + mm - 3);

      value += 2.0 * P[tri_index(n, mm)] * rp[n] * real(w * E[mm]);
      if (mm <= n - 1) s2 += b1 * P[tri_index(n - 1, mm)] * rp[n - 1] * (w * E[mm]);
      if (mm <= n - 2) s3 -= P[tri_index(n - 1, mm + 1)] * rp[n - 1] * (w * E[mm + 1]);
      s4 += b2 * P[tri_index(n - 1, mm - 1)] * rp[n - 1] * (w * E[mm - 1]);
      if (mm <= n - 3) s5 -= b1 * P[tri_index(n - 2, mm + 1)] * rp[n - 2] * (w * E[mm + 1]);
      if (mm <= n - 1 && n >= 2) {
        s6 += b3 * P[tri_index(n - 2, mm - 1)] * rp[n - 2] * (w * E[mm - 1]);
      }
      if (mm <= n - 4) s7 += w * E[mm + 2] * (P[tri_index(n - 2, mm + 2)] * rp[n - 2]);
      if (n >= 2) {
        if (mm >= 2) {
          s8 += b4 * P[tri_index(n - 2, mm - 2)] * rp[n - 2] * (w * E[mm - 2]);
        } else if (n >= 3) {
          s8 -= double(n * (n + 1)) * P[tri_index(n - 2, 1)] * rp[n - 2] *
                (w * conj(E[1]));
        }
      }
      if (mm <= n - 2) s10 += b2 * P[tri_index(n - 2, mm)] * rp[n - 2] * (w * E[mm]);
    }
  }

  const double g0 = s1 + 2.0 * real(s2);
  const Cx gp = s3 + conj(s4);
  const Cx gpg0 = s5 + conj(s6);
  const Cx gpgp = s7 + conj(s8);
  const double g00 = s9 + 2.0 * real(s10);

  return assemble(value, g0, gp, gpg0, gpgp, g00, inv_s);
}

}  // namespace hydrofmm
