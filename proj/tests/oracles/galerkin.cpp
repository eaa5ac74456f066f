#include "galerkin.hpp"

#include <cmath>
#include <numbers>

namespace oracle {

using bsq::ScalarBasis;
using bsq::ScalarField;
using bsq::VectorField;

void gauss_legendre(int n, double a, double b, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = 0.5 * (a + b) + 0.5 * (b - a) * z;
    w[i] = (b - a) / ((1.0 - z * z) * dp * dp);
  }
}

namespace {
bool kept(const Grid& g, int k1, int k2) { return 2 * std::abs(k1) < g.n1() && 2 * std::abs(k2) < g.n2(); }
std::size_t at(const Grid& g, int k1, int k2) { return g.index(Grid::slot(k1, g.n1()), Grid::slot(k2, g.n2())); }
double omega(const Grid& g) { return 2.0 * std::numbers::pi / g.length(); }
}  // namespace

std::vector<cplx> direct_advection(const Grid& g, const cplx* u1, const cplx* u2, const cplx* v) {
  const int h1 = g.n1() / 2, h2 = g.n2() / 2;
  const double w = omega(g);
  const cplx I(0.0, 1.0);
  std::vector<cplx> out(g.size());
  for (int p1 = -h1 + 1; p1 < h1; ++p1)
    for (int p2 = -h2 + 1; p2 < h2; ++p2) {
      const cplx a1 = u1[at(g, p1, p2)], a2 = u2[at(g, p1, p2)];
      for (int q1 = -h1 + 1; q1 < h1; ++q1)
        for (int q2 = -h2 + 1; q2 < h2; ++q2) {
          const int k1 = p1 + q1, k2 = p2 + q2;
          if (!kept(g, k1, k2)) continue;
          out[at(g, k1, k2)] += (a1 * I * (w * q1) + a2 * I * (w * q2)) * v[at(g, q1, q2)];
        }
    }
  return out;
}

void project(const Grid& g, cplx* a, cplx* b) {
  const double w = omega(g);
  for (int i1 = 0; i1 < g.n1(); ++i1)
    for (int i2 = 0; i2 < g.n2(); ++i2) {
      const int k1 = Grid::wavenumber(i1, g.n1()), k2 = Grid::wavenumber(i2, g.n2());
      const std::size_t id = g.index(i1, i2);
      if (!kept(g, k1, k2) || (k1 == 0 && k2 == 0)) {
        a[id] = b[id] = 0.0;
        continue;
      }
      const double x = w * k1, y = w * k2;
      const cplx d = (x * a[id] + y * b[id]) / (x * x + y * y);
      a[id] -= x * d;
      b[id] -= y * d;
    }
}

VectorField advect_velocity(const VectorField& u, const VectorField& v) {
  const Grid& g = u.grid();
  VectorField out(u.grid_ptr());
  for (int c = 0; c < 2; ++c) {
    auto r = direct_advection(g, u.component(0).data(), u.component(1).data(), v.component(c).data());
    std::copy(r.begin(), r.end(), out.component(c).begin());
  }
  project(g, out.component(0).data(), out.component(1).data());
  return out;
}

namespace {
struct VerticalQuad {
  std::vector<double> x, w;
  explicit VerticalQuad(const Grid& g) { gauss_legendre(96, 0.0, g.length(), x, w); }
};
}  // namespace

ScalarField advect_scalar(const VectorField& u, const ScalarField& theta) {
  const Grid& g = u.grid();
  ScalarField out(theta.grid_ptr(), theta.basis());
  if (theta.basis() == ScalarBasis::Periodic) {
    auto r = direct_advection(g, u.component(0).data(), u.component(1).data(), theta.data().data());
    std::copy(r.begin(), r.end(), out.data().begin());
    out.data()[0] = 0.0;
    return out;
  }
  const VerticalQuad q(g);
  const int h1 = g.n1() / 2, h2 = g.n2() / 2, n2 = g.n2();
  const double w = omega(g), L = g.length(), pi = std::numbers::pi;
  const cplx I(0.0, 1.0);
  // Is(k2, m, m') and Ic(k2, m, m') on [0, L].
  auto idx = [&](int k2, int m, int mp) { return ((k2 + h2) * (n2 + 1) + m) * (n2 + 1) + mp; };
  std::vector<cplx> Is((2 * h2) * (n2 + 1) * (n2 + 1)), Ic(Is.size());
  for (int k2 = -h2 + 1; k2 < h2; ++k2)
    for (int m = 1; m <= n2; ++m)
      for (int mp = 1; mp <= n2; ++mp) {
        cplx s{}, c{};
        for (std::size_t t = 0; t < q.x.size(); ++t) {
          const double x = q.x[t];
          const cplx e = std::exp(I * (w * k2 * x));
          const double sp = std::sin(mp * pi * x / L);
          s += q.w[t] * e * std::sin(m * pi * x / L) * sp;
          c += q.w[t] * e * std::cos(m * pi * x / L) * sp;
        }
        Is[idx(k2, m, mp)] = s;
        Ic[idx(k2, m, mp)] = c;
      }
  auto th = [&](int k1, int m) { return theta.data()[g.index(Grid::slot(k1, g.n1()), m - 1)]; };
  for (int k1 = -h1 + 1; k1 < h1; ++k1)
    for (int mp = 1; mp <= n2; ++mp) {
      cplx acc{};
      for (int p1 = -h1 + 1; p1 < h1; ++p1) {
        const int q1 = k1 - p1;
        if (2 * std::abs(q1) >= g.n1()) continue;
        for (int k2 = -h2 + 1; k2 < h2; ++k2) {
          const cplx a1 = u.component(0)[at(g, p1, k2)], a2 = u.component(1)[at(g, p1, k2)];
          for (int m = 1; m <= n2; ++m) {
            const cplx t = th(q1, m);
            acc += a1 * I * (w * q1) * t * Is[idx(k2, m, mp)] + a2 * (m * pi / L) * t * Ic[idx(k2, m, mp)];
          }
        }
      }
      out.data()[g.index(Grid::slot(k1, g.n1()), mp - 1)] = (2.0 / L) * acc;
    }
  return out;
}

VectorField buoyancy(const ScalarField& theta) {
  const Grid& g = theta.grid();
  VectorField out(theta.grid_ptr());
  if (theta.basis() == ScalarBasis::Periodic) {
    std::copy(theta.data().begin(), theta.data().end(), out.component(1).begin());
  } else {
    const VerticalQuad q(g);
    const double w = omega(g), L = g.length(), pi = std::numbers::pi;
    const cplx I(0.0, 1.0);
    for (int i1 = 0; i1 < g.n1(); ++i1)
      for (int i2 = 0; i2 < g.n2(); ++i2) {
        const int k2 = Grid::wavenumber(i2, g.n2());
        cplx acc{};
        for (std::size_t t = 0; t < q.x.size(); ++t) {
          cplx f{};
          for (int m = 1; m <= g.n2(); ++m) f += theta.data()[g.index(i1, m - 1)] * std::sin(m * pi * q.x[t] / L);
          acc += q.w[t] * f * std::exp(-I * (w * k2 * q.x[t]));
        }
        out.component(1)[g.index(i1, i2)] = acc / L;
      }
  }
  project(g, out.component(0).data(), out.component(1).data());
  return out;
}

ScalarField vertical(const VectorField& u, ScalarBasis basis) {
  const Grid& g = u.grid();
  ScalarField out(u.grid_ptr(), basis);
  if (basis == ScalarBasis::Periodic) {
    std::copy(u.component(1).begin(), u.component(1).end(), out.data().begin());
    out.data()[0] = 0.0;
    return out;
  }
  const VerticalQuad q(g);
  const double w = omega(g), L = g.length(), pi = std::numbers::pi;
  const cplx I(0.0, 1.0);
  for (int i1 = 0; i1 < g.n1(); ++i1) {
    if (2 * std::abs(Grid::wavenumber(i1, g.n1())) >= g.n1()) continue;
    for (int m = 1; m <= g.n2(); ++m) {
      cplx acc{};
      for (std::size_t t = 0; t < q.x.size(); ++t) {
        cplx f{};
        for (int i2 = 0; i2 < g.n2(); ++i2) {
          const int k2 = Grid::wavenumber(i2, g.n2());
          if (2 * std::abs(k2) >= g.n2()) continue;
          f += u.component(1)[g.index(i1, i2)] * std::exp(I * (w * k2 * q.x[t]));
        }
        acc += q.w[t] * f * std::sin(m * pi * q.x[t] / L);
      }
      out.data()[g.index(i1, m - 1)] = (2.0 / L) * acc;
    }
  }
  return out;
}

}  // namespace oracle
