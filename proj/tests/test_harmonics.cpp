#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "hydrofmm/harmonics.hpp"
#include "test_util.hpp"

using namespace hydrofmm;
using testutil::Rng;

namespace {

// Rodrigues-formula oracle: P_n as explicit polynomial coefficients,
// differentiated m times and scaled by (1-x^2)^(m/2).
double legendre_rodrigues(int n, int m, double x) {
  std::vector<std::vector<double>> poly(n + 1);
  poly[0] = {1.0};
  if (n >= 1) poly[1] = {0.0, 1.0};
  for (int k = 1; k < n; ++k) {
    std::vector<double> next(k + 2, 0.0);
    for (std::size_t i = 0; i < poly[k].size(); ++i) {
      next[i + 1] += double(2 * k + 1) * poly[k][i] / double(k + 1);
    }
    for (std::size_t i = 0; i < poly[k - 1].size(); ++i) {
      next[i] -= double(k) * poly[k - 1][i] / double(k + 1);
    }
    poly[k + 1] = next;
  }
  std::vector<double> d = poly[n];
  for (int der = 0; der < m; ++der) {
    std::vector<double> nd(d.size() > 1 ? d.size() - 1 : 1, 0.0);
    for (std::size_t i = 1; i < d.size(); ++i) nd[i - 1] = double(i) * d[i];
    d = nd;
  }
  double val = 0.0;
  for (std::size_t i = d.size(); i-- > 0;) val = val * x + d[i];
  return val * std::pow(1.0 - x * x, 0.5 * m);
}

}  // namespace

TEST_CASE("legendre_table endpoint and origin values") {
  const int nmax = 6;
  auto t1 = legendre_table(1.0, nmax);
  for (int n = 0; n <= nmax; ++n) {
    CHECK(t1[tri_index(n, 0)] == doctest::Approx(1.0));
    for (int m = 1; m <= n; ++m) CHECK(t1[tri_index(n, m)] == 0.0);
  }
  auto t0 = legendre_table(0.0, nmax);
  CHECK(t0[tri_index(1, 0)] == 0.0);
  CHECK(t0[tri_index(1, 1)] == doctest::Approx(1.0));  // positive phase
}

TEST_CASE("legendre_table matches the Rodrigues formula") {
  const int nmax = 8;
  auto t = legendre_table(0.5, nmax);
  for (int n = 0; n <= nmax; ++n) {
    for (int m = 0; m <= n; ++m) {
      const double want = legendre_rodrigues(n, m, 0.5);
      const double got = t[tri_index(n, m)];
      CHECK(std::abs(got - want) <= 1e-13 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST_CASE("legendre_table domain error") {
  CHECK_THROWS_AS(legendre_table(1.0 + 1e-10, 4), std::domain_error);
  CHECK_NOTHROW(legendre_table(1.0 + 1e-15, 4));
}

TEST_CASE("solid harmonic bases: low-order closed forms") {
  const Vec3 v{0.3, -0.7, 0.4};
  std::vector<Cx> R(tri_count(2)), S(tri_count(2));
  regular_basis(v, 2, R);
  singular_basis(v, 2, S);
  const double r = v.norm();

  CHECK(R[tri_index(0, 0)].re == doctest::Approx(1.0));
  CHECK(R[tri_index(1, 0)].re == doctest::Approx(v.z));
  CHECK(R[tri_index(1, 1)].re == doctest::Approx(0.5 * v.x));
  CHECK(R[tri_index(1, 1)].im == doctest::Approx(0.5 * v.y));
  CHECK(R[tri_index(2, 0)].re ==
        doctest::Approx(0.25 * (3.0 * v.z * v.z - r * r)));

  CHECK(S[tri_index(0, 0)].re == doctest::Approx(1.0 / r));
  CHECK(S[tri_index(1, 0)].re == doctest::Approx(v.z / (r * r * r)));
  CHECK(S[tri_index(1, 1)].re == doctest::Approx(v.x / (r * r * r)));
  CHECK(S[tri_index(1, 1)].im == doctest::Approx(v.y / (r * r * r)));
}

TEST_CASE("generating identity: 1/|x-y| expands in conj(R(y)) S(x)") {
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 x = (2.0 + rng.u01()) * rng.direction();
    const Vec3 y = (0.3 * rng.u01()) * rng.direction();
    const int nmax = 30;
    std::vector<Cx> Ry(full_count(nmax)), Sx(full_count(nmax));
    regular_basis_full(y, nmax, Ry);
    singular_basis_full(x, nmax, Sx);
    double sum = 0.0;
    for (int n = 0; n <= nmax; ++n) {
      for (int m = -n; m <= n; ++m) {
        sum += real(conj(Ry[full_index(n, m)]) * Sx[full_index(n, m)]);
      }
    }
    const double want = 1.0 / (x - y).norm();
    CHECK(testutil::rel_err(sum, want) < 1e-12);
  }
}

TEST_CASE("regular addition theorem is exact") {
  Rng rng(7);
  const int nmax = 10;
  for (int trial = 0; trial < 5; ++trial) {
    const Vec3 x = rng.in_box(1.0), y = rng.in_box(1.0);
    std::vector<Cx> Rx(full_count(nmax)), Ry(full_count(nmax)),
        Rxy(full_count(nmax));
    regular_basis_full(x, nmax, Rx);
    regular_basis_full(y, nmax, Ry);
    regular_basis_full(x + y, nmax, Rxy);
    for (int n = 0; n <= nmax; ++n) {
      for (int m = -n; m <= n; ++m) {
        Cx acc{0.0, 0.0};
        for (int np = 0; np <= n; ++np) {
          const int nq = n - np;
          for (int mp = -np; mp <= np; ++mp) {
            if (std::abs(m - mp) > nq) continue;
            acc += Rx[full_index(np, mp)] * Ry[full_index(nq, m - mp)];
          }
        }
        const Cx want = Rxy[full_index(n, m)];
        const double scale =
            std::max({1e-14, std::abs(want.re), std::abs(want.im)});
        CHECK(std::abs(acc.re - want.re) / scale < 1e-10);
        CHECK(std::abs(acc.im - want.im) / scale < 1e-10);
      }
    }
  }
}

TEST_CASE("singular shift theorem converges") {
  Rng rng(99);
  const int terms = 40;
  for (int trial = 0; trial < 5; ++trial) {
    const Vec3 x = (3.0 + rng.u01()) * rng.direction();
    const Vec3 y = (0.25 * rng.u01()) * rng.direction();
    std::vector<Cx> Ry(full_count(terms)), Sx(full_count(terms + 4));
    regular_basis_full(y, terms, Ry);
    singular_basis_full(x, terms + 4, Sx);
    for (int n = 0; n <= 3; ++n) {
      for (int m = -n; m <= n; ++m) {
        Cx acc{0.0, 0.0};
        for (int np = 0; np + n <= terms; ++np) {
          for (int mp = -np; mp <= np; ++mp) {
            if (std::abs(m + mp) > n + np) continue;
            acc += conj(Ry[full_index(np, mp)]) * Sx[full_index(n + np, m + mp)];
          }
        }
        std::vector<Cx> Sxy(full_count(n));
        singular_basis_full(x - y, n, Sxy);
        const Cx want = Sxy[full_index(n, m)];
        const double scale =
            std::max({1e-14, std::abs(want.re), std::abs(want.im)});
        CHECK(std::abs(acc.re - want.re) / scale < 1e-11);
        CHECK(std::abs(acc.im - want.im) / scale < 1e-11);
      }
    }
  }
}

TEST_CASE("basis tables are finite and positive") {
  HarmonicBasisTables tb(30);
  for (int n = 0; n <= 32; ++n) {
    for (int m = 0; m <= n; ++m) {
      CHECK(std::isfinite(tb.cn(n, m)));
      CHECK(tb.cn(n, m) > 0.0);
      CHECK(std::isfinite(tb.fn(n, m)));
      CHECK(tb.fn(n, m) > 0.0);
    }
  }
}
