#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hydrofmm/geometry.hpp"

namespace hydrofmm {

/// Lightweight complex value. Hot loops use it directly so the compiler is
/// free to fuse multiplies without the library complex NaN semantics.
struct Cx {
  double re = 0.0, im = 0.0;

  Cx() = default;
  Cx(double r, double i) : re(r), im(i) {}

  Cx& operator+=(const Cx& o) { re += o.re; im += o.im; return *this; }
  Cx& operator-=(const Cx& o) { re -= o.re; im -= o.im; return *this; }
  friend Cx operator+(Cx a, const Cx& b) { return a += b; }
  friend Cx operator-(Cx a, const Cx& b) { return a -= b; }
  friend Cx operator*(const Cx& a, const Cx& b) {
    return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
  }
  friend Cx operator*(double s, const Cx& a) { return {s * a.re, s * a.im}; }
  friend Cx operator*(const Cx& a, double s) { return {s * a.re, s * a.im}; }
};

inline Cx conj(const Cx& a) { return {a.re, -a.im}; }
inline double real(const Cx& a) { return a.re; }
inline double imag(const Cx& a) { return a.im; }

/// Index of (n, m) in triangular coefficient storage, 0 <= m <= n.
inline int tri_index(int n, int m) { return n * (n + 1) / 2 + m; }
inline int tri_count(int nmax) { return (nmax + 1) * (nmax + 2) / 2; }

/// Index of (n, m) in full-m storage, -n <= m <= n. Row n starts at n*n.
inline int full_index(int n, int m) { return n * n + n + m; }
inline int full_count(int nmax) { return (nmax + 1) * (nmax + 1); }

/// Associated Legendre values P_n^m(x) for 0 <= m <= n <= nmax, triangular
/// layout, without the Condon-Shortley phase (P_1^1(0) = +1).
void legendre_table(double x, int nmax, std::span<double> out);
std::vector<double> legendre_table(double x, int nmax);

/// Precomputed coefficient tables for expansions of a given order.
/// cnm holds C_n^m = sqrt((n-|m|)!/(n+|m|)!) and fnm the paired factors
/// sqrt((n-m)!(n+m)!); both cover degrees 0..order+2 because derivative
/// sums reference two extra degrees.
struct HarmonicBasisTables {
  int order = 0;
  std::vector<double> factorial;      // 0 .. 2*(order+2)+1
  std::vector<double> inv_factorial;
  std::vector<double> cnm;            // triangular to order+2
  std::vector<double> fnm;            // triangular to order+2

  explicit HarmonicBasisTables(int p);

  double cn(int n, int m) const { return cnm[tri_index(n, m)]; }
  double fn(int n, int m) const { return fnm[tri_index(n, m)]; }
};

// Solid-harmonic bases used internally by the translation operators:
//   regular  R_n^m = r^n P_n^m(cos t) e^{im u} / (n+m)!
//   singular S_n^m = (n-m)! P_n^m(cos t) e^{im u} / r^{n+1}
// extended to m < 0 by X_n^{-m} = (-1)^m conj(X_n^m). The full-m variants
// fill every slot; the triangular variants keep m >= 0 only.

void regular_basis(const Vec3& v, int nmax, std::span<Cx> out);       // triangular
void regular_basis_full(const Vec3& v, int nmax, std::span<Cx> out); // full-m
void singular_basis(const Vec3& v, int nmax, std::span<Cx> out);
void singular_basis_full(const Vec3& v, int nmax, std::span<Cx> out);

}  // namespace hydrofmm
