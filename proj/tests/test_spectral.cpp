#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "bsq/error.hpp"
#include "bsq/spectral.hpp"
#include "oracles/galerkin.hpp"
#include "support/random_fields.hpp"

using namespace bsq;
using bsq::testing::max_abs;
using bsq::testing::max_abs_diff;
using bsq::testing::random_scalar;
using bsq::testing::random_vector;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST(Grid, RejectsInvalidShapes) {
  EXPECT_THROW(Grid::create(1.0, 6, 7), ConfigError);
  EXPECT_THROW(Grid::create(1.0, 2, 8), ConfigError);
  EXPECT_THROW(Grid::create(0.0, 8, 8), ConfigError);
  EXPECT_THROW(Grid::create(-1.0, 8, 8), ConfigError);
  auto g = Grid::create(2.0, 8, 12);
  EXPECT_GE(g->padded_n1(), 12);
  EXPECT_GE(g->padded_n2(), 18);
}

TEST(Leray, AnnihilatesGradients) {
  auto g = Grid::create(1.3, 16, 16);
  std::mt19937_64 rng(1);
  ScalarField phi = random_scalar(g, ScalarBasis::Periodic, rng);
  VectorField grad(g);
  for (int i1 = 0; i1 < g->n1(); ++i1)
    for (int i2 = 0; i2 < g->n2(); ++i2) {
      grad(0, i1, i2) = cplx(0, g->wave1(i1)) * phi(i1, i2);
      grad(1, i1, i2) = cplx(0, g->wave2(i2)) * phi(i1, i2);
    }
  VectorField p = leray_project(grad);
  EXPECT_LT(max_abs(p.data()), 1e-12 * max_abs(grad.data()));
}

TEST(Leray, IdempotentContractiveAndSolenoidal) {
  auto g = Grid::create(1.0, 16, 16);
  std::mt19937_64 rng(2);
  for (int draw = 0; draw < 100; ++draw) {
    VectorField raw = random_vector(g, rng, 1.0, false);
    VectorField once = leray_project(raw);
    VectorField twice = leray_project(once);
    EXPECT_LE(max_abs_diff(once.data(), twice.data()), 1e-14 * max_abs(once.data()));
    EXPECT_LE(divergence_defect(once), 1e-12);
    EXPECT_LE(norm(once, Space::V0), norm(raw, Space::V0) * (1 + 1e-15));
    EXPECT_EQ(hermitian_defect(once), 0.0);
  }
}

TEST(Leray, SolenoidalFieldUnchanged) {
  auto g = Grid::create(1.0, 8, 8);
  std::mt19937_64 rng(3);
  VectorField u = random_vector(g, rng);
  VectorField p = leray_project(u);
  EXPECT_LE(max_abs_diff(u.data(), p.data()), 1e-15 * max_abs(u.data()));
}

TEST(FractionalPower, SemigroupAndEigenvalues) {
  auto g = Grid::create(0.7, 16, 16);
  std::mt19937_64 rng(4);
  VectorField u = random_vector(g, rng);
  VectorField half = apply_fractional_power(apply_fractional_power(u, 0.5), 0.5);
  VectorField full = apply_fractional_power(u, 1.0);
  EXPECT_LE(max_abs_diff(half.data(), full.data()), 1e-14 * max_abs(full.data()));

  VectorField mode(g);
  mode(1, 1, 0) = cplx(0, -0.5);
  mode(1, g->n1() - 1, 0) = cplx(0, 0.5);
  VectorField am = apply_fractional_power(mode, 1.0);
  const double lam = std::pow(2 * kPi / 0.7, 2);
  EXPECT_NEAR(am(1, 1, 0).imag(), -0.5 * lam, 1e-12 * lam);

  ScalarField t = random_scalar(g, ScalarBasis::Sine, rng);
  ScalarField t0 = apply_fractional_power(t, 0.0);
  EXPECT_EQ(max_abs_diff(t.data(), t0.data()), 0.0);
  ScalarField back = apply_fractional_power(apply_fractional_power(t, -0.5), 0.5);
  EXPECT_LE(max_abs_diff(t.data(), back.data()), 1e-13 * max_abs(t.data()));
}

TEST(FractionalPower, NegativePowerRejectsKernelComponent) {
  auto g = Grid::create(1.0, 8, 8);
  VectorField u(g);
  u(0, 0, 0) = 1.0;
  EXPECT_THROW(apply_fractional_power(u, -1.0), std::domain_error);
  EXPECT_NO_THROW(apply_fractional_power(u, 1.0));
}

TEST(Norm, SingleSineModeAndZero) {
  for (double L : {1.0, 2.5}) {
    auto g = Grid::create(L, 16, 16);
    VectorField f(g);
    f(1, 1, 0) = cplx(0, -0.5);
    f(1, g->n1() - 1, 0) = cplx(0, 0.5);
    EXPECT_NEAR(norm_squared(f, Space::V0), L * L / 2, 1e-14 * L * L);
    // int sin^4 = 3/8 of the area
    EXPECT_NEAR(std::pow(norm(f, Space::L4), 4), 3.0 * L * L / 8, 1e-13 * L * L);
    VectorField z(g);
    for (Space s : {Space::V0, Space::V1, Space::L4}) EXPECT_EQ(norm(z, s), 0.0);
    ScalarField zt(g, ScalarBasis::Sine);
    for (Space s : {Space::H0, Space::H1, Space::L4}) EXPECT_EQ(norm(zt, s), 0.0);
  }
}

TEST(Norm, Poincare) {
  auto g = Grid::create(1.7, 16, 16);
  std::mt19937_64 rng(5);
  const double l1 = lambda1(*g);
  const double lt = lambda1_tilde(*g);
  EXPECT_NEAR(l1, std::pow(2 * kPi / 1.7, 2), 1e-13 * l1);
  EXPECT_NEAR(lt, std::pow(kPi / 1.7, 2), 1e-13 * lt);
  for (int draw = 0; draw < 100; ++draw) {
    VectorField u = random_vector(g, rng);
    EXPECT_LE(norm_squared(u, Space::V0), norm_squared(u, Space::V1) / l1 * (1 + 1e-14));
    ScalarField t = random_scalar(g, ScalarBasis::Sine, rng);
    EXPECT_LE(norm_squared(t, Space::H0), norm_squared(t, Space::H1) / lt * (1 + 1e-14));
  }
}

TEST(Norm, L4MatchesBruteForceQuadrature) {
  auto g = Grid::create(1.0, 8, 8);
  std::mt19937_64 rng(6);
  ScalarField t = random_scalar(g, ScalarBasis::Sine, rng);
  std::vector<double> xq, wq;
  oracle::gauss_legendre(80, 0.0, 1.0, xq, wq);
  double acc = 0.0;
  const int nx = 64;
  for (int a = 0; a < nx; ++a) {
    const double x1 = static_cast<double>(a) / nx;
    for (std::size_t b = 0; b < xq.size(); ++b) {
      cplx v{};
      for (int i1 = 0; i1 < 8; ++i1)
        for (int m = 1; m <= 8; ++m)
          v += t(i1, m - 1) * std::exp(cplx(0, 2 * kPi * g->k1(i1) * x1)) * std::sin(m * kPi * xq[b]);
      acc += wq[b] * std::pow(v.real(), 4) / nx;
    }
  }
  EXPECT_NEAR(std::pow(norm(t, Space::L4), 4), acc, 1e-12 * acc);
}

TEST(Physical, RoundTripAndParseval) {
  auto g = Grid::create(1.2, 16, 12);
  std::mt19937_64 rng(7);
  for (int draw = 0; draw < 20; ++draw) {
    VectorField u = random_vector(g, rng);
    auto s = to_physical(u);
    VectorField back = from_physical(s, g);
    EXPECT_LE(max_abs_diff(u.data(), back.data()), 1e-12 * max_abs(u.data()));
    double q = sampled_l2_squared(s[0], g->length()) + sampled_l2_squared(s[1], g->length());
    EXPECT_NEAR(q, norm_squared(u, Space::V0), 1e-10 * q);
    for (ScalarBasis b : {ScalarBasis::Sine, ScalarBasis::Periodic}) {
      ScalarField t = random_scalar(g, b, rng);
      PhysicalField p = to_physical(t);
      ScalarField tb = from_physical(p, g, b);
      EXPECT_LE(max_abs_diff(t.data(), tb.data()), 1e-12 * max_abs(t.data()));
      double qt = sampled_l2_squared(p, g->length());
      EXPECT_NEAR(qt, norm_squared(t, Space::H0), 1e-10 * qt);
    }
  }
}

TEST(Physical, SineFieldVanishesOnBoundaryLines) {
  auto g = Grid::create(1.0, 16, 16);
  std::mt19937_64 rng(8);
  ScalarField t = random_scalar(g, ScalarBasis::Sine, rng);
  PhysicalField p = to_physical(t);
  double top = 0.0, scale = 0.0;
  for (double v : p.values) scale = std::max(scale, std::abs(v));
  for (int i1 = 0; i1 < p.n1; ++i1) top = std::max({top, std::abs(p.at(i1, 0)), std::abs(p.at(i1, p.n2 / 2))});
  EXPECT_LE(top, 1e-10 * scale);
  EXPECT_NEAR(p.x2(p.n2 / 2), 1.0, 1e-15);
}

TEST(Physical, SingleSineModeRecovered) {
  auto g = Grid::create(2.0, 8, 8);
  PhysicalField p = to_physical(ScalarField(g, ScalarBasis::Sine));
  for (int i1 = 0; i1 < p.n1; ++i1)
    for (int j = 0; j < p.n2; ++j) p.at(i1, j) = 3.0 * std::sin(kPi * p.x2(j) / 2.0);
  ScalarField t = from_physical(p, g, ScalarBasis::Sine);
  EXPECT_NEAR(t(0, 0).real(), 3.0, 1e-14);
  t(0, 0) = 0.0;
  EXPECT_LE(max_abs(t.data()), 1e-14);
}

TEST(Physical, ConstantSamples) {
  auto g = Grid::create(1.0, 8, 8);
  PhysicalField pv = to_physical(VectorField(g))[0];
  for (double& v : pv.values) v = 2.0;
  VectorField u = from_physical({pv, pv}, g);
  EXPECT_EQ(max_abs(u.data()), 0.0);

  PhysicalField pp = to_physical(ScalarField(g, ScalarBasis::Periodic));
  for (double& v : pp.values) v = 2.0;
  EXPECT_EQ(max_abs(from_physical(pp, g, ScalarBasis::Periodic).data()), 0.0);

  // A constant is not in the span of the sine basis: its projection is 4 / (pi m) for odd m.
  PhysicalField ps = to_physical(ScalarField(g, ScalarBasis::Sine));
  for (double& v : ps.values) v = 1.0;
  ScalarField t = from_physical(ps, g, ScalarBasis::Sine);
  for (int m = 1; m <= 8; ++m) {
    const double expect = m % 2 == 1 ? 4.0 / (kPi * m) : 0.0;
    EXPECT_NEAR(t(0, m - 1).real(), expect, 1e-14);
    EXPECT_NEAR(t(0, m - 1).imag(), 0.0, 1e-14);
  }
}

TEST(Physical, SizeMismatchThrows) {
  auto g = Grid::create(1.0, 8, 8);
  auto h = Grid::create(1.0, 16, 16);
  PhysicalField p = to_physical(ScalarField(h, ScalarBasis::Sine));
  EXPECT_THROW(from_physical(p, g, ScalarBasis::Sine), GridMismatch);
}

// Dense operators on an 8 x 8 grid, diagonalized numerically.
TEST(Spectrum, StokesMatchesDenseDiagonalization) {
  const int n = 8;
  const double L = 1.4;
  auto g = Grid::create(L, n, n);
  // Real basis of retained Fourier modes via explicit DFT matrices on the collocation grid.
  const int N = n * n;
  Eigen::MatrixXcd F(N, N);
  const double w = 2 * kPi / L;
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b) {
      int i1 = a / n, i2 = a % n, j1 = b / n, j2 = b % n;
      F(a, b) = std::exp(cplx(0, -2 * kPi * (i1 * j1 + i2 * j2) / n)) / static_cast<double>(N);
    }
  Eigen::MatrixXcd Finv = F.inverse();
  Eigen::MatrixXcd D1 = Eigen::MatrixXcd::Zero(N, N), D2 = D1, M = D1;
  for (int a = 0; a < N; ++a) {
    int k1 = Grid::wavenumber(a / n, n), k2 = Grid::wavenumber(a % n, n);
    bool keep = 2 * std::abs(k1) < n && 2 * std::abs(k2) < n;
    D1(a, a) = keep ? cplx(0, w * k1) : 0.0;
    D2(a, a) = keep ? cplx(0, w * k2) : 0.0;
    M(a, a) = keep ? 1.0 : 0.0;
  }
  Eigen::MatrixXcd d1 = Finv * D1 * F, d2 = Finv * D2 * F, mask = Finv * M * F;
  Eigen::MatrixXcd lap = -(d1 * d1 + d2 * d2);
  // Leray projector in physical space: I - grad (lap)^+ div on the retained space.
  Eigen::MatrixXcd div(N, 2 * N), grad(2 * N, N);
  div << d1, d2;
  grad << d1, d2;
  Eigen::MatrixXcd lapinv = lap.completeOrthogonalDecomposition().pseudoInverse();
  Eigen::MatrixXcd Id2 = Eigen::MatrixXcd::Zero(2 * N, 2 * N);
  Id2.topLeftCorner(N, N) = mask;
  Id2.bottomRightCorner(N, N) = mask;
  Eigen::MatrixXcd P = Id2 + grad * lapinv * div;
  Eigen::MatrixXcd Lap2 = Eigen::MatrixXcd::Zero(2 * N, 2 * N);
  Lap2.topLeftCorner(N, N) = lap;
  Lap2.bottomRightCorner(N, N) = lap;
  Eigen::MatrixXcd A = P * Lap2 * P;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (A + A.adjoint()));
  std::vector<double> dense;
  const double scale = w * w * n * n;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()(i) > 1e-9 * scale) dense.push_back(es.eigenvalues()(i));
  std::vector<double> table = stokes_spectrum(*g);
  ASSERT_EQ(dense.size(), table.size());
  for (std::size_t i = 0; i < dense.size(); ++i) EXPECT_NEAR(dense[i], table[i], 1e-10 * table[i]);
  EXPECT_DOUBLE_EQ(table.front(), lambda1(*g));
}

TEST(Spectrum, DirichletMatchesGalerkinGeneralizedEigenproblem) {
  const int n = 8;
  const double L = 0.9;
  auto g = Grid::create(L, n, n);
  // Real basis cos/sin(k1 w x1) sin(m pi x2 / L); stiffness and mass by quadrature.
  std::vector<double> xq, wq;
  oracle::gauss_legendre(60, 0.0, L, xq, wq);
  const int nx = 32;
  struct Fn { int k1; bool cosine; int m; };
  std::vector<Fn> basis;
  for (int k1 = 0; k1 < n / 2; ++k1)
    for (int m = 1; m <= n; ++m) {
      basis.push_back({k1, true, m});
      if (k1 > 0) basis.push_back({k1, false, m});
    }
  const int B = static_cast<int>(basis.size());
  const double w = 2 * kPi / L;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(B, B), Mm = K;
  for (int a = 0; a < nx; ++a) {
    const double x1 = L * a / nx;
    for (std::size_t t = 0; t < xq.size(); ++t) {
      const double x2 = xq[t], wt = wq[t] * L / nx;
      std::vector<double> f(B), fx(B), fy(B);
      for (int i = 0; i < B; ++i) {
        const Fn& b = basis[i];
        double c = b.cosine ? std::cos(w * b.k1 * x1) : std::sin(w * b.k1 * x1);
        double cx = b.cosine ? -w * b.k1 * std::sin(w * b.k1 * x1) : w * b.k1 * std::cos(w * b.k1 * x1);
        double s = std::sin(b.m * kPi * x2 / L), sy = b.m * kPi / L * std::cos(b.m * kPi * x2 / L);
        f[i] = c * s;
        fx[i] = cx * s;
        fy[i] = c * sy;
      }
      for (int i = 0; i < B; ++i)
        for (int j = 0; j < B; ++j) {
          K(i, j) += wt * (fx[i] * fx[j] + fy[i] * fy[j]);
          Mm(i, j) += wt * f[i] * f[j];
        }
    }
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, Mm);
  std::vector<double> table = scalar_spectrum(*g, ScalarBasis::Sine);
  ASSERT_EQ(static_cast<std::size_t>(B), table.size());
  for (int i = 0; i < B; ++i) EXPECT_NEAR(es.eigenvalues()(i), table[i], 1e-10 * table[i]);
  EXPECT_DOUBLE_EQ(table.front(), lambda1_tilde(*g));
  EXPECT_NEAR(table.front(), std::pow(kPi / L, 2), 1e-13);
}

TEST(Projection, BuoyancyAndVerticalMatchQuadrature) {
  auto g = Grid::create(1.1, 8, 8);
  std::mt19937_64 rng(9);
  for (ScalarBasis b : {ScalarBasis::Sine, ScalarBasis::Periodic}) {
    ScalarField t = random_scalar(g, b, rng);
    VectorField u = random_vector(g, rng);
    VectorField bf = buoyancy(t), bo = oracle::buoyancy(t);
    EXPECT_LE(max_abs_diff(bf.data(), bo.data()), 1e-12 * max_abs(bo.data()));
    ScalarField vf = vertical_component(u, b), vo = oracle::vertical(u, b);
    EXPECT_LE(max_abs_diff(vf.data(), vo.data()), 1e-12 * max_abs(vo.data()));
    // Both are L2 projections of the same pairing.
    const double lhs = inner(buoyancy(t), u);
    const double rhs = inner(t, vertical_component(u, b));
    EXPECT_NEAR(lhs, rhs, 1e-12 * std::abs(rhs));
  }
}

TEST(Fields, VectorSpaceOpsAndMismatch) {
  auto g = Grid::create(1.0, 8, 8);
  auto h = Grid::create(1.0, 16, 16);
  std::mt19937_64 rng(10);
  VectorField a = random_vector(g, rng), b = random_vector(g, rng);
  VectorField c = a + 2.0 * b;
  c -= a;
  c *= 0.5;
  EXPECT_LE(max_abs_diff(c.data(), b.data()), 1e-15);
  EXPECT_NEAR(inner(a, a), norm_squared(a, Space::V0), 1e-14 * inner(a, a));
  VectorField x(h);
  EXPECT_THROW(a += x, GridMismatch);
  ScalarField s(g, ScalarBasis::Sine), p(g, ScalarBasis::Periodic);
  EXPECT_THROW(s += p, GridMismatch);
  EXPECT_EQ(to_string(scalar_basis_from_string("sine")), "sine");
  EXPECT_THROW(scalar_basis_from_string("cosine"), ConfigError);
}
