#include "hydrofmm/harmonics.hpp"

#include <cmath>
#include <stdexcept>

namespace hydrofmm {

void legendre_table(double x, int nmax, std::span<double> out) {
  if (std::abs(x) > 1.0 + 1e-14) {
    throw std::domain_error("legendre_table: argument outside [-1, 1]");
  }
  x = std::clamp(x, -1.0, 1.0);
  const double s = std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x)));  // sin(theta) >= 0

  out[0] = 1.0;
  for (int m = 0; m < nmax; ++m) {
    const double pmm = out[tri_index(m, m)];
    // Diagonal and first superdiagonal seed each m-column.
    out[tri_index(m + 1, m + 1)] = pmm * double(2 * m + 1) * s;
    out[tri_index(m + 1, m)] = x * double(2 * m + 1) * pmm;
    // Upward in n, stable for the growing solution.
    for (int n = m + 1; n < nmax; ++n) {
      out[tri_index(n + 1, m)] =
          (double(2 * n + 1) * x * out[tri_index(n, m)] -
           double(n + m) * out[tri_index(n - 1, m)]) /
          double(n - m + 1);
    }
  }
}

std::vector<double> legendre_table(double x, int nmax) {
  std::vector<double> out(tri_count(nmax));
  legendre_table(x, nmax, out);
  return out;
}

HarmonicBasisTables::HarmonicBasisTables(int p) : order(p) {
  if (p < 1) throw std::invalid_argument("expansion order must be positive");
  const int nmax = p + 2;
  factorial.resize(2 * nmax + 2);
  inv_factorial.resize(2 * nmax + 2);
  factorial[0] = 1.0;
  for (std::size_t k = 1; k < factorial.size(); ++k) {
    factorial[k] = factorial[k - 1] * double(k);
  }
  for (std::size_t k = 0; k < factorial.size(); ++k) {
    inv_factorial[k] = 1.0 / factorial[k];
  }
  cnm.resize(tri_count(nmax));
  fnm.resize(tri_count(nmax));
  for (int n = 0; n <= nmax; ++n) {
    for (int m = 0; m <= n; ++m) {
      cnm[tri_index(n, m)] = std::sqrt(factorial[n - m] / factorial[n + m]);
      fnm[tri_index(n, m)] = std::sqrt(factorial[n - m] * factorial[n + m]);
    }
  }
}

void regular_basis(const Vec3& v, int nmax, std::span<Cx> out) {
  const double r2 = v.norm2();
  const Cx xy{v.x, v.y};
  out[0] = {1.0, 0.0};
  for (int m = 0; m < nmax; ++m) {
    const Cx rmm = out[tri_index(m, m)];
    out[tri_index(m + 1, m + 1)] = rmm * xy * (1.0 / double(2 * (m + 1)));
    out[tri_index(m + 1, m)] = v.z * rmm;
    for (int n = m + 1; n < nmax; ++n) {
      out[tri_index(n + 1, m)] =
          (double(2 * n + 1) * v.z * out[tri_index(n, m)] -
           r2 * out[tri_index(n - 1, m)]) *
          (1.0 / double((n + m + 1) * (n - m + 1)));
    }
  }
}

void singular_basis(const Vec3& v, int nmax, std::span<Cx> out) {
  const double r2 = v.norm2();
  const double inv_r2 = 1.0 / r2;
  const Cx xy{v.x, v.y};
  out[0] = {1.0 / std::sqrt(r2), 0.0};
  for (int m = 0; m < nmax; ++m) {
    const Cx smm = out[tri_index(m, m)];
    out[tri_index(m + 1, m + 1)] = double(2 * m + 1) * inv_r2 * (smm * xy);
    out[tri_index(m + 1, m)] = double(2 * m + 1) * v.z * inv_r2 * smm;
    for (int n = m + 1; n < nmax; ++n) {
      out[tri_index(n + 1, m)] =
          (double(2 * n + 1) * v.z * out[tri_index(n, m)] -
           double(n * n - m * m) * out[tri_index(n - 1, m)]) *
          inv_r2;
    }
  }
}

namespace {

template <void (*Basis)(const Vec3&, int, std::span<Cx>)>
void fill_full(const Vec3& v, int nmax, std::span<Cx> out) {
  std::vector<Cx> tri(tri_count(nmax));
  Basis(v, nmax, tri);
  for (int n = 0; n <= nmax; ++n) {
    for (int m = 0; m <= n; ++m) {
      const Cx val = tri[tri_index(n, m)];
      out[full_index(n, m)] = val;
      if (m > 0) {
        const double sign = (m & 1) ? -1.0 : 1.0;
        out[full_index(n, -m)] = sign * conj(val);
      }
    }
  }
}

}  // namespace

void regular_basis_full(const Vec3& v, int nmax, std::span<Cx> out) {
  fill_full<&regular_basis>(v, nmax, out);
}

void singular_basis_full(const Vec3& v, int nmax, std::span<Cx> out) {
  fill_full<&singular_basis>(v, nmax, out);
}

}  // namespace hydrofmm
