#include "bsq/spectral.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <cmath>
#include <numbers>
#include <string>

#include "bsq/error.hpp"
#include "bsq/transforms.hpp"

namespace bsq {

using transforms::Deriv;

VectorField leray_project(VectorField raw) {
  leray_project_inplace(raw);
  return raw;
}

void leray_project_inplace(VectorField& f) {
  const Grid& g = f.grid();
  auto u1 = f.component(0);
  auto u2 = f.component(1);
  for (int i1 = 0; i1 < g.n1(); ++i1) {
    for (int i2 = 0; i2 < g.n2(); ++i2) {
      const std::size_t id = g.index(i1, i2);
      if (!g.retained1(i1) || !g.retained2(i2) || (i1 == 0 && i2 == 0)) {
        u1[id] = u2[id] = cplx{};
        continue;
      }
      const double a = g.wave1(i1);
      const double b = g.wave2(i2);
      const cplx dot = (a * u1[id] + b * u2[id]) / (a * a + b * b);
      u1[id] -= a * dot;
      u2[id] -= b * dot;
    }
  }
}

double divergence_defect(const VectorField& f) {
  const Grid& g = f.grid();
  auto u1 = f.component(0);
  auto u2 = f.component(1);
  double worst = 0.0;
  double biggest = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) biggest = std::max({biggest, std::abs(u1[i]), std::abs(u2[i])});
  if (biggest == 0.0) return 0.0;
  worst = std::hypot(std::abs(u1[0]), std::abs(u2[0])) / biggest;
  for (int i1 = 0; i1 < g.n1(); ++i1) {
    for (int i2 = 0; i2 < g.n2(); ++i2) {
      if (i1 == 0 && i2 == 0) continue;
      const std::size_t id = g.index(i1, i2);
      const double mag = std::hypot(std::abs(u1[id]), std::abs(u2[id]));
      if (mag == 0.0) continue;
      if (!g.retained1(i1) || !g.retained2(i2)) {
        worst = std::max(worst, mag / biggest);
        continue;
      }
      const double a = g.wave1(i1);
      const double b = g.wave2(i2);
      worst = std::max(worst, std::abs(a * u1[id] + b * u2[id]) / (std::hypot(a, b) * mag));
    }
  }
  return worst;
}

double stokes_eigenvalue(const Grid& g, int i1, int i2) {
  if (!g.retained1(i1) || !g.retained2(i2)) return 0.0;
  const double a = g.wave1(i1);
  const double b = g.wave2(i2);
  return a * a + b * b;
}

double scalar_eigenvalue(const Grid& g, ScalarBasis basis, int i1, int i2) {
  if (basis == ScalarBasis::Periodic) return stokes_eigenvalue(g, i1, i2);
  if (!g.retained1(i1)) return 0.0;
  const double a = g.wave1(i1);
  const double b = std::numbers::pi * (i2 + 1) / g.length();
  return a * a + b * b;
}

std::vector<double> stokes_spectrum(const Grid& g) {
  std::vector<double> out;
  for (int i1 = 0; i1 < g.n1(); ++i1) {
    for (int i2 = 0; i2 < g.n2(); ++i2) {
      const double lam = stokes_eigenvalue(g, i1, i2);
      if (lam > 0.0) out.push_back(lam);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> scalar_spectrum(const Grid& g, ScalarBasis basis) {
  std::vector<double> out;
  for (int i1 = 0; i1 < g.n1(); ++i1) {
    for (int i2 = 0; i2 < g.n2(); ++i2) {
      const double lam = scalar_eigenvalue(g, basis, i1, i2);
      if (lam > 0.0) out.push_back(lam);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

double lambda1(const Grid& g) { return stokes_spectrum(g).front(); }

double lambda1_tilde(const Grid& g, ScalarBasis basis) { return scalar_spectrum(g, basis).front(); }

namespace {

double power_of(double lam, double s) {
  if (s == 0.0) return 1.0;
  if (s == 1.0) return lam;
  if (s == 0.5) return std::sqrt(lam);
  if (s == -1.0) return 1.0 / lam;
  return std::pow(lam, s);
}

template <class EigenFn>
void scale_modes(std::span<cplx> c, const Grid& g, double s, EigenFn eigen, const char* what) {
  for (int i1 = 0; i1 < g.n1(); ++i1) {
    for (int i2 = 0; i2 < g.n2(); ++i2) {
      const std::size_t id = g.index(i1, i2);
      const double lam = eigen(i1, i2);
      if (lam == 0.0) {
        if (s < 0.0 && c[id] != cplx{}) {
          throw std::domain_error(std::string(what) + ": negative power of a field with a kernel component");
        }
        if (s != 0.0) c[id] = cplx{};
        continue;
      }
      c[id] *= power_of(lam, s);
    }
  }
}

double sum_sq(std::span<const cplx> c) {
  double s = 0.0;
  for (const auto& z : c) s += std::norm(z);
  return s;
}

double weighted_sum_sq(std::span<const cplx> c, const Grid& g, auto eigen) {
  double s = 0.0;
  for (int i1 = 0; i1 < g.n1(); ++i1) {
    for (int i2 = 0; i2 < g.n2(); ++i2) s += eigen(i1, i2) * std::norm(c[g.index(i1, i2)]);
  }
  return s;
}

PhysicalField make_samples(const RealFft2d& fft, double e1, double e2) {
  PhysicalField p;
  p.n1 = fft.nx();
  p.n2 = fft.ny();
  p.extent1 = e1;
  p.extent2 = e2;
  p.values.assign(fft.real_size(), 0.0);
  return p;
}

void sample_periodic(const Grid& g, std::span<const cplx> c, const RealFft2d& fft, double* values) {
  AlignedBuffer<cplx> half(fft.spectral_size());
  AlignedBuffer<double> real(fft.real_size());
  transforms::scatter_periodic(g, c.data(), Deriv::None, fft, half.data());
  fft.inverse(half.data(), real.data());
  std::copy(real.data(), real.data() + real.size(), values);
}

void sample_sine(const Grid& g, std::span<const cplx> c, const RealFft2d& fft, double* values) {
  AlignedBuffer<cplx> half(fft.spectral_size());
  AlignedBuffer<double> real(fft.real_size());
  transforms::scatter_sine(g, c.data(), Deriv::None, fft, half.data());
  fft.inverse(half.data(), real.data());
  std::copy(real.data(), real.data() + real.size(), values);
}

double mean_fourth(const std::vector<double>& a, const std::vector<double>* b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double r2 = a[i] * a[i] + (b ? (*b)[i] * (*b)[i] : 0.0);
    s += r2 * r2;
  }
  return s / static_cast<double>(a.size());
}

}  // namespace

VectorField apply_fractional_power(const VectorField& f, double s) {
  VectorField out = f;
  const Grid& g = f.grid();
  auto eig = [&](int i1, int i2) { return stokes_eigenvalue(g, i1, i2); };
  scale_modes(out.component(0), g, s, eig, "apply_fractional_power");
  scale_modes(out.component(1), g, s, eig, "apply_fractional_power");
  return out;
}

ScalarField apply_fractional_power(const ScalarField& f, double s) {
  ScalarField out = f;
  const Grid& g = f.grid();
  auto eig = [&](int i1, int i2) { return scalar_eigenvalue(g, f.basis(), i1, i2); };
  scale_modes(out.data(), g, s, eig, "apply_fractional_power");
  return out;
}

double norm_squared(const VectorField& f, Space space) {
  const Grid& g = f.grid();
  const double area = g.length() * g.length();
  switch (space) {
    case Space::V0:
    case Space::H0: return area * (sum_sq(f.component(0)) + sum_sq(f.component(1)));
    case Space::V1:
    case Space::H1: {
      auto eig = [&](int i1, int i2) { return stokes_eigenvalue(g, i1, i2); };
      return area * (weighted_sum_sq(f.component(0), g, eig) + weighted_sum_sq(f.component(1), g, eig));
    }
    case Space::L4: {
      double n = norm(f, Space::L4);
      return n * n;
    }
  }
  return 0.0;
}

double norm_squared(const ScalarField& f, Space space) {
  const Grid& g = f.grid();
  switch (space) {
    case Space::V0:
    case Space::H0: return f.weight() * sum_sq(f.data());
    case Space::V1:
    case Space::H1: {
      auto eig = [&](int i1, int i2) { return scalar_eigenvalue(g, f.basis(), i1, i2); };
      return f.weight() * weighted_sum_sq(f.data(), g, eig);
    }
    case Space::L4: {
      double n = norm(f, Space::L4);
      return n * n;
    }
  }
  return 0.0;
}

double norm(const VectorField& f, Space space) {
  if (space != Space::L4) return std::sqrt(norm_squared(f, space));
  const Grid& g = f.grid();
  const RealFft2d& fft = g.quad_fft();
  std::vector<double> a(fft.real_size()), b(fft.real_size());
  sample_periodic(g, f.component(0), fft, a.data());
  sample_periodic(g, f.component(1), fft, b.data());
  return std::pow(g.length() * g.length() * mean_fourth(a, &b), 0.25);
}

double norm(const ScalarField& f, Space space) {
  if (space != Space::L4) return std::sqrt(norm_squared(f, space));
  const Grid& g = f.grid();
  std::vector<double> a;
  if (f.basis() == ScalarBasis::Sine) {
    const RealFft2d& fft = g.sine_quad_fft();
    a.resize(fft.real_size());
    sample_sine(g, f.data(), fft, a.data());
  } else {
    const RealFft2d& fft = g.quad_fft();
    a.resize(fft.real_size());
    sample_periodic(g, f.data(), fft, a.data());
  }
  return std::pow(g.length() * g.length() * mean_fourth(a, nullptr), 0.25);
}

std::array<PhysicalField, 2> to_physical(const VectorField& f) {
  const Grid& g = f.grid();
  const RealFft2d& fft = g.periodic_fft();
  std::array<PhysicalField, 2> out{make_samples(fft, g.length(), g.length()),
                                   make_samples(fft, g.length(), g.length())};
  for (int c = 0; c < 2; ++c) sample_periodic(g, f.component(c), fft, out[c].values.data());
  return out;
}

PhysicalField to_physical(const ScalarField& f) {
  const Grid& g = f.grid();
  if (f.basis() == ScalarBasis::Periodic) {
    PhysicalField p = make_samples(g.periodic_fft(), g.length(), g.length());
    sample_periodic(g, f.data(), g.periodic_fft(), p.values.data());
    return p;
  }
  PhysicalField p = make_samples(g.sine_fft(), g.length(), 2.0 * g.length());
  sample_sine(g, f.data(), g.sine_fft(), p.values.data());
  return p;
}

namespace {
void check_samples(const PhysicalField& p, const RealFft2d& fft, const char* where) {
  if (p.n1 != fft.nx() || p.n2 != fft.ny() || p.values.size() != fft.real_size()) {
    throw GridMismatch(std::string(where) + ": expected " + std::to_string(fft.nx()) + "x" +
                       std::to_string(fft.ny()) + " samples, got " + std::to_string(p.n1) + "x" +
                       std::to_string(p.n2));
  }
}

void forward_samples(const PhysicalField& p, const RealFft2d& fft, AlignedBuffer<cplx>& half) {
  AlignedBuffer<double> real(fft.real_size());
  std::copy(p.values.begin(), p.values.end(), real.data());
  fft.forward(real.data(), half.data());
}
}  // namespace

VectorField from_physical(const std::array<PhysicalField, 2>& samples, const GridPtr& grid) {
  const RealFft2d& fft = grid->periodic_fft();
  VectorField out(grid);
  AlignedBuffer<cplx> half(fft.spectral_size());
  for (int c = 0; c < 2; ++c) {
    check_samples(samples[c], fft, "from_physical");
    forward_samples(samples[c], fft, half);
    transforms::gather_periodic(*grid, half.data(), fft, out.component(c).data());
    out.component(c)[0] = cplx{};
  }
  return out;
}

ScalarField from_physical(const PhysicalField& samples, const GridPtr& grid, ScalarBasis basis) {
  ScalarField out(grid, basis);
  const RealFft2d& fft = basis == ScalarBasis::Sine ? grid->sine_fft() : grid->periodic_fft();
  check_samples(samples, fft, "from_physical");
  AlignedBuffer<cplx> half(fft.spectral_size());
  forward_samples(samples, fft, half);
  if (basis == ScalarBasis::Sine) {
    transforms::gather_sine(*grid, half.data(), fft, out.data().data());
  } else {
    transforms::gather_periodic(*grid, half.data(), fft, out.data().data());
    out.data()[0] = cplx{};
  }
  return out;
}

double sampled_l2_squared(const PhysicalField& f, double length) {
  double s = 0.0;
  for (double v : f.values) s += v * v;
  return length * length * s / static_cast<double>(f.values.size());
}

namespace {

// Odd-m block of the sine -> Fourier projection in x2:
// (1/L) int_0^L sin(m pi x / L) e^{-2 pi i k2 x / L} dx = 2 m / (pi (m^2 - 4 k2^2)) for odd m.
// The even-m entries reduce to a single mode and are applied directly.
const Eigen::MatrixXd& odd_projection(int n2) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<Eigen::MatrixXd>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[n2];
  if (!slot) {
    slot = std::make_unique<Eigen::MatrixXd>(n2, n2 / 2);
    for (int i2 = 0; i2 < n2; ++i2) {
      const int k2 = Grid::wavenumber(i2, n2);
      for (int r = 0; r < n2 / 2; ++r) {
        const double m = 2 * r + 1;
        (*slot)(i2, r) = 2 * std::abs(k2) < n2 ? 2.0 * m / (std::numbers::pi * (m * m - 4.0 * k2 * k2)) : 0.0;
      }
    }
  }
  return *slot;
}

}  // namespace

VectorField buoyancy(const ScalarField& theta) {
  const Grid& g = theta.grid();
  VectorField out(theta.grid_ptr());
  auto u2 = out.component(1);
  auto t = theta.data();
  if (theta.basis() == ScalarBasis::Periodic) {
    std::copy(t.begin(), t.end(), u2.begin());
    leray_project_inplace(out);
    return out;
  }
  const int n1 = g.n1(), n2 = g.n2();
  Eigen::MatrixXd odd(n2 / 2, 2 * n1);
  for (int i1 = 0; i1 < n1; ++i1)
    for (int r = 0; r < n2 / 2; ++r) {
      const cplx z = g.retained1(i1) ? t[g.index(i1, 2 * r)] : cplx{};
      odd(r, 2 * i1) = z.real();
      odd(r, 2 * i1 + 1) = z.imag();
    }
  const Eigen::MatrixXd res = odd_projection(n2) * odd;
  for (int i1 = 0; i1 < n1; ++i1) {
    if (!g.retained1(i1)) continue;
    for (int i2 = 0; i2 < n2; ++i2) {
      if (!g.retained2(i2)) continue;
      const int k2 = g.k2(i2);
      cplx acc(res(i2, 2 * i1), res(i2, 2 * i1 + 1));
      if (k2 != 0) acc += cplx(0.0, k2 > 0 ? -0.5 : 0.5) * t[g.index(i1, 2 * std::abs(k2) - 1)];
      u2[g.index(i1, i2)] = acc;
    }
  }
  leray_project_inplace(out);
  return out;
}

ScalarField vertical_component(const VectorField& u, ScalarBasis basis) {
  const Grid& g = u.grid();
  ScalarField out(u.grid_ptr(), basis);
  auto u2 = u.component(1);
  auto t = out.data();
  if (basis == ScalarBasis::Periodic) {
    std::copy(u2.begin(), u2.end(), t.begin());
    t[0] = cplx{};
    return out;
  }
  // (2/L) int_0^L e^{2 pi i k2 x / L} sin(m pi x / L) dx: twice the transpose for odd m.
  const int n1 = g.n1(), n2 = g.n2();
  Eigen::MatrixXd w(n2, 2 * n1);
  for (int i1 = 0; i1 < n1; ++i1)
    for (int i2 = 0; i2 < n2; ++i2) {
      const cplx z = g.retained1(i1) ? u2[g.index(i1, i2)] : cplx{};
      w(i2, 2 * i1) = z.real();
      w(i2, 2 * i1 + 1) = z.imag();
    }
  const Eigen::MatrixXd res = 2.0 * (odd_projection(n2).transpose() * w);
  for (int i1 = 0; i1 < n1; ++i1) {
    if (!g.retained1(i1)) continue;
    for (int m = 1; m <= n2; ++m) {
      cplx acc{};
      if (m % 2 == 1) {
        acc = cplx(res(m / 2, 2 * i1), res(m / 2, 2 * i1 + 1));
      } else if (m / 2 < n2 / 2) {
        acc = cplx(0.0, 1.0) * (u2[g.index(i1, m / 2)] - u2[g.index(i1, n2 - m / 2)]);
      }
      t[g.index(i1, m - 1)] = acc;
    }
  }
  return out;
}

}  // namespace bsq
