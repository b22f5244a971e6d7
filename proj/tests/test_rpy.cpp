#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "hydrofmm/rpy.hpp"
#include "test_util.hpp"

using namespace hydrofmm;
using testutil::Rng;
using D = ExpansionDerivatives;

namespace {

RPYParams unit_c0() {
  // C0 = 1
  return RPYParams::make(1.0, 1.0, 1.0, 1.0 / (6.0 * std::numbers::pi));
}

RPYParams unit_c1(double a) {
  // C1 = 1
  return RPYParams::make(a, 1.0, 1.0, 1.0 / (8.0 * std::numbers::pi));
}

// Analytic far-field pieces of a single source: derivatives of q/|x-y|.
FarFieldPieces analytic_pieces(const Point3& x, const Point3& y, const Vec3& F) {
  const Vec3 d = x - y;
  const double r2 = d.norm2();
  const double r = std::sqrt(r2);
  const double ir3 = 1.0 / (r2 * r);
  const double ir5 = ir3 / r2;
  const double q4 = dot(F, y);

  FarFieldPieces p;
  p.V1 = F.x / r;
  p.V2 = F.y / r;
  p.V3 = F.z / r;
  p.g1 = -F.x * ir3 * d;
  p.g2 = -F.y * ir3 * d;
  p.g3 = -F.z * ir3 * d;
  p.g4 = -q4 * ir3 * d;
  const double hxx = (3.0 * d.x * d.x - r2) * ir5;
  const double hyy = (3.0 * d.y * d.y - r2) * ir5;
  const double hzz = (3.0 * d.z * d.z - r2) * ir5;
  const double hxy = 3.0 * d.x * d.y * ir5;
  const double hxz = 3.0 * d.x * d.z * ir5;
  const double hyz = 3.0 * d.y * d.z * ir5;
  const std::array<double, 6> base{hxx, hyy, hzz, hxy, hxz, hyz};
  for (int i = 0; i < 6; ++i) {
    p.H1[i] = F.x * base[i];
    p.H2[i] = F.y * base[i];
    p.H3[i] = F.z * base[i];
  }
  return p;
}

// One 3x3 mobility block via unit-force pair products.
std::array<double, 9> pair_block(const Point3& xi, const Point3& xj,
                                 const RPYParams& params) {
  std::array<double, 9> block{};
  const Vec3 unit[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const double r = (xj - xi).norm();
  for (int col = 0; col < 3; ++col) {
    const Vec3 u = r >= 2.0 * params.a
                       ? rpy_pair_far(xi, xj, unit[col], params)
                       : rpy_pair_near(xi, xj, unit[col], params);
    block[0 * 3 + col] = u.x;
    block[1 * 3 + col] = u.y;
    block[2 * 3 + col] = u.z;
  }
  return block;
}

}  // namespace

TEST_CASE("rpy_self with unit mobility") {
  const RPYParams p = unit_c0();
  CHECK(p.C0 == doctest::Approx(1.0));
  const Vec3 u = rpy_self({1, 2, 3}, p);
  CHECK(u.x == doctest::Approx(1.0));
  CHECK(u.y == doctest::Approx(2.0));
  CHECK(u.z == doctest::Approx(3.0));
  const Vec3 z = rpy_self({0, 0, 0}, p);
  CHECK(z.x == 0.0);
  CHECK(z.y == 0.0);
  CHECK(z.z == 0.0);
}

TEST_CASE("rpy_self with physical constants") {
  const double k_B = 1.380649e-23, T = 298.0, eta = 8.9e-4, a = 2e-9;
  const RPYParams p = RPYParams::make(a, k_B, T, eta);
  // independent scalar route, evaluated in extended precision
  const long double c0 =
      (long double)(k_B)*T / (6.0L * std::numbers::pi_v<long double> * eta * a);
  const Vec3 u = rpy_self({1, 0, 0}, p);
  CHECK(testutil::rel_err(u.x, double(c0)) < 1e-14);
  CHECK(u.y == 0.0);
  CHECK(u.z == 0.0);
}

TEST_CASE("rpy parameter validation and derived constants") {
  CHECK_THROWS_AS(RPYParams::make(-1.0, 1.0, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(RPYParams::make(1.0, 0.0, 1.0, 1.0), std::invalid_argument);
  const RPYParams p = RPYParams::make(0.37, 1.7, 291.0, 3.1e-3);
  CHECK(testutil::rel_err(p.C1 * 2.0 * p.a * p.a / 3.0, p.C2) < 1e-15);
  CHECK(testutil::rel_err(p.C0, p.C1 * 8.0 / (6.0 * p.a)) < 1e-14);
}

TEST_CASE("rpy_pair_far: worked examples at C1 = 1") {
  const RPYParams p = unit_c1(0.5);
  CHECK(p.C1 == doctest::Approx(1.0));
  const Point3 xi{0, 0, 0}, xj{0, 0, 2};

  const Vec3 uz = rpy_pair_far(xi, xj, {0, 0, 1}, p);
  CHECK(uz.x == 0.0);
  CHECK(uz.y == 0.0);
  CHECK(uz.z == doctest::Approx(23.0 / 24.0).epsilon(1e-14));  // 0.95833...

  const Vec3 ux = rpy_pair_far(xi, xj, {1, 0, 0}, p);
  CHECK(ux.x == doctest::Approx(25.0 / 48.0).epsilon(1e-14));  // 0.52083...
  CHECK(ux.y == 0.0);
  CHECK(ux.z == 0.0);
}

TEST_CASE("rpy_pair_far: symmetric under argument swap") {
  Rng rng(31);
  const RPYParams p = RPYParams::make(0.2, 1.0, 1.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    const Point3 xi = rng.in_box(1.0);
    const Point3 xj = xi + (0.5 + rng.u01()) * rng.direction();
    const Vec3 F = rng.in_box(1.0);
    const Vec3 a = rpy_pair_far(xi, xj, F, p);
    const Vec3 b = rpy_pair_far(xj, xi, F, p);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    CHECK(a.z == b.z);
  }
}

TEST_CASE("rpy pair functions enforce their branches") {
  const RPYParams p = RPYParams::make(1.0, 1.0, 1.0, 1.0);
  CHECK_THROWS_AS((void)rpy_pair_far({0, 0, 0}, {0, 0, 1}, {1, 0, 0}, p),
                  std::domain_error);
  CHECK_THROWS_AS((void)rpy_pair_far({0, 0, 0}, {0, 0, 0}, {1, 0, 0}, p),
                  std::domain_error);
  CHECK_THROWS_AS((void)rpy_pair_near({0, 0, 0}, {0, 0, 3}, {1, 0, 0}, p),
                  std::domain_error);
  CHECK_THROWS_AS((void)rpy_pair_near({0, 0, 0}, {0, 0, 0}, {1, 0, 0}, p),
                  std::domain_error);
}

TEST_CASE("rpy_pair_near: continuity at r = 2a") {
  Rng rng(32);
  const RPYParams p = RPYParams::make(0.7, 1.3, 290.0, 2.2e-3);
  for (int t = 0; t < 100; ++t) {
    const Vec3 e = rng.direction();
    const Vec3 F = rng.in_box(1.0);
    const Point3 xi = rng.in_box(0.5);
    const Point3 xj = xi + (2.0 * p.a) * e;
    // evaluate both branch formulas at the junction distance
    const Vec3 d = xj - xi;
    const double r2 = d.norm2();
    const double r = std::sqrt(r2);
    const double df = dot(d, F);
    const double c2 = 2.0 * p.a * p.a / (3.0 * r2);
    const Vec3 far = ((p.C1 / r) * (1.0 + c2)) * F +
                     ((p.C1 / r) * (1.0 - 3.0 * c2) / r2) * (df * d);
    const Vec3 near = (p.C0 * (1.0 - 9.0 * r / (32.0 * p.a))) * F +
                      (p.C0 * 3.0 / (32.0 * p.a * r)) * (df * d);
    CHECK(testutil::rel_err3(near, far) < 1e-12);
  }
}

TEST_CASE("rpy_pair_near: zero force and the r -> 0 limit") {
  const RPYParams p = RPYParams::make(0.5, 1.0, 1.0, 1.0);
  const Vec3 z = rpy_pair_near({0, 0, 0}, {0, 0, 0.3}, {0, 0, 0}, p);
  CHECK(z.x == 0.0);
  CHECK(z.y == 0.0);
  CHECK(z.z == 0.0);

  const Vec3 F{0.3, -0.8, 0.5};
  const Vec3 limit = rpy_pair_near({0, 0, 0}, {0, 0, 1e-8 * p.a}, F, p);
  const Vec3 self = rpy_self(F, p);
  CHECK(testutil::rel_err3(limit, self) < 1e-7);
}

TEST_CASE("direct_rpy_matvec: single bead and two far beads") {
  const RPYParams p = unit_c1(0.5);
  std::vector<Bead> one(1);
  one[0].position = {0.3, 0.4, 0.5};
  one[0].force = {1.0, -2.0, 0.25};
  const auto r1 = direct_rpy_matvec(one, p);
  const Vec3 want = rpy_self(one[0].force, p);
  CHECK(r1[0].x == want.x);
  CHECK(r1[0].y == want.y);
  CHECK(r1[0].z == want.z);

  std::vector<Bead> two(2);
  two[0].position = {0, 0, 0};
  two[0].force = {0.1, 0.2, 0.3};
  two[1].position = {0, 0, 2};
  two[1].force = {0, 0, 1};
  const auto r2 = direct_rpy_matvec(two, p);
  const Vec3 want0 =
      rpy_self(two[0].force, p) +
      rpy_pair_far(two[0].position, two[1].position, two[1].force, p);
  CHECK(r2[0].x == doctest::Approx(want0.x).epsilon(1e-15));
  CHECK(r2[0].y == doctest::Approx(want0.y).epsilon(1e-15));
  CHECK(r2[0].z == doctest::Approx(want0.z).epsilon(1e-15));
}

TEST_CASE("direct_rpy_matvec: reports coincident pairs") {
  const RPYParams p = unit_c0();
  std::vector<Bead> beads(3);
  beads[0].position = {0, 0, 0};
  beads[1].position = {1, 0, 0};
  beads[2].position = {1, 0, 0};
  for (Bead& b : beads) b.force = {1, 0, 0};
  CHECK_THROWS_WITH_AS(direct_rpy_matvec(beads, p),
                       doctest::Contains("coincident"), std::domain_error);
}

TEST_CASE("assembled mobility matrix: symmetric and positive definite") {
  Rng rng(33);
  const int n = 50;
  const RPYParams p = RPYParams::make(0.08, 1.0, 1.0, 1.0 / (6.0 * std::numbers::pi));
  std::vector<Bead> beads(n);
  for (Bead& b : beads) b.position = rng.in_box(0.5);
  // includes overlapping pairs: cluster a few beads within 2a
  beads[1].position = beads[0].position + Vec3{0.05, 0, 0};
  beads[2].position = beads[0].position + Vec3{0, 0.03, 0.02};

  std::vector<double> D(9 * n * n, 0.0);
  const int dim = 3 * n;
  for (int j = 0; j < n; ++j) {
    for (int col = 0; col < 3; ++col) {
      for (Bead& b : beads) b.force = {0, 0, 0};
      const Vec3 unit[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
      beads[j].force = unit[col];
      const auto res = direct_rpy_matvec(beads, p);
      for (int i = 0; i < n; ++i) {
        D[(3 * i + 0) * dim + 3 * j + col] = res[i].x;
        D[(3 * i + 1) * dim + 3 * j + col] = res[i].y;
        D[(3 * i + 2) * dim + 3 * j + col] = res[i].z;
      }
    }
  }
  double max_asym = 0.0, max_abs = 0.0;
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      max_asym = std::max(max_asym, std::abs(D[i * dim + j] - D[j * dim + i]));
      max_abs = std::max(max_abs, std::abs(D[i * dim + j]));
    }
  }
  CHECK(max_asym <= 1e-12 * max_abs);

  const auto ev = testutil::symmetric_eigenvalues(D, dim);
  double min_ev = ev[0];
  for (double e : ev) min_ev = std::min(min_ev, e);
  CHECK(min_ev > 0.0);
}

TEST_CASE("block symmetry is exact in both branches") {
  Rng rng(34);
  const RPYParams p = RPYParams::make(0.3, 1.0, 1.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const Point3 xi = rng.in_box(1.0);
    const bool near = (t % 2) == 0;
    const double r = near ? 0.5 * p.a + rng.u01() * p.a
                          : 2.0 * p.a + rng.u01();
    const Point3 xj = xi + r * rng.direction();
    const auto bij = pair_block(xi, xj, p);
    const auto bji = pair_block(xj, xi, p);
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 3; ++col) {
        CHECK(bij[row * 3 + col] == bij[col * 3 + row]);  // block transpose
        CHECK(bij[row * 3 + col] == bji[row * 3 + col]);  // i <-> j
      }
    }
  }
}

TEST_CASE("assemble_charges: direct substitution and linearity") {
  std::vector<Bead> beads(2);
  beads[0].position = {1, 2, 3};
  beads[0].force = {4, 5, 6};
  beads[1].position = {0.5, -1, 2};
  beads[1].force = {0, 0, 0};
  const LaplaceChargeSet c = assemble_charges(beads);
  CHECK(c.q1[0] == 4.0);
  CHECK(c.q2[0] == 5.0);
  CHECK(c.q3[0] == 6.0);
  CHECK(c.q4[0] == doctest::Approx(32.0));
  CHECK(c.q1[1] == 0.0);
  CHECK(c.q4[1] == 0.0);

  Rng rng(35);
  std::vector<Bead> bf(3), bg(3), bs(3);
  for (int i = 0; i < 3; ++i) {
    const Point3 pos = rng.in_box(2.0);
    bf[i].position = bg[i].position = bs[i].position = pos;
    bf[i].force = rng.in_box(1.0);
    bg[i].force = rng.in_box(1.0);
    bs[i].force = bf[i].force + bg[i].force;
  }
  const auto cf = assemble_charges(bf), cg = assemble_charges(bg),
             cs = assemble_charges(bs);
  for (int i = 0; i < 3; ++i) {
    CHECK(cs.q4[i] == doctest::Approx(cf.q4[i] + cg.q4[i]).epsilon(1e-14));
    CHECK(cs.q1[i] == doctest::Approx(cf.q1[i] + cg.q1[i]));
  }
}

TEST_CASE("scaling all forces scales all results") {
  Rng rng(38);
  const RPYParams p = RPYParams::make(0.07, 1.0, 1.0, 1.0);
  std::vector<Bead> beads(40), scaled(40);
  const double alpha = 3.75;
  for (int i = 0; i < 40; ++i) {
    beads[i].position = scaled[i].position = rng.in_box(0.5);
    beads[i].force = rng.in_box(1.0);
    scaled[i].force = alpha * beads[i].force;
  }
  const auto base = direct_rpy_matvec(beads, p);
  const auto big = direct_rpy_matvec(scaled, p);
  for (int i = 0; i < 40; ++i) {
    CHECK(testutil::rel_err3(big[i], alpha * base[i]) < 1e-14);
  }
}

TEST_CASE("combine_far_field: zero pieces give zero") {
  const RPYParams p = unit_c0();
  const Vec3 u = combine_far_field({0.4, 0.5, 0.6}, FarFieldPieces{}, p);
  CHECK(u.x == 0.0);
  CHECK(u.y == 0.0);
  CHECK(u.z == 0.0);
}

TEST_CASE("decomposition identity: recombination reproduces the far form") {
  Rng rng(36);
  for (int t = 0; t < 100; ++t) {
    const double a = 0.05 + 0.5 * rng.u01();
    const double kb = 0.5 + rng.u01();
    const double temp = 100.0 + 300.0 * rng.u01();
    const double eta = 1e-3 * (0.5 + rng.u01());
    const RPYParams p = RPYParams::make(a, kb, temp, eta);

    const Point3 y = rng.in_box(1.0);
    const Point3 x = y + (2.0 * a + 3.0 * rng.u01()) * rng.direction();
    const Vec3 F = rng.in_box(1.0);

    const Vec3 via_pieces = combine_far_field(x, analytic_pieces(x, y, F), p);
    const Vec3 exact = rpy_pair_far(x, y, F, p);
    CHECK(testutil::rel_err3(via_pieces, exact) < 1e-12);
  }
}

TEST_CASE("combine_far_field is linear in the pieces") {
  Rng rng(37);
  const RPYParams p = RPYParams::make(0.2, 1.0, 1.0, 1.0);
  const Point3 x{0.3, -0.2, 0.9};
  const Point3 y1 = x + Vec3{1.5, 0.2, -0.3};
  const Point3 y2 = x + Vec3{-0.9, 1.1, 0.8};
  const Vec3 F1 = rng.in_box(1.0), F2 = rng.in_box(1.0);
  const FarFieldPieces p1 = analytic_pieces(x, y1, F1);
  const FarFieldPieces p2 = analytic_pieces(x, y2, F2);
  FarFieldPieces sum = p1;
  sum.V1 += p2.V1; sum.V2 += p2.V2; sum.V3 += p2.V3;
  sum.g1 += p2.g1; sum.g2 += p2.g2; sum.g3 += p2.g3; sum.g4 += p2.g4;
  for (int i = 0; i < 6; ++i) {
    sum.H1[i] += p2.H1[i];
    sum.H2[i] += p2.H2[i];
    sum.H3[i] += p2.H3[i];
  }
  const Vec3 combined = combine_far_field(x, sum, p);
  const Vec3 separate =
      combine_far_field(x, p1, p) + combine_far_field(x, p2, p);
  CHECK(testutil::rel_err3(combined, separate) < 1e-13);
}
