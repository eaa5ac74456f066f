#include "bsq/nonlinear.hpp"

#include <algorithm>
#include <stdexcept>

#include "bsq/error.hpp"
#include "bsq/spectral.hpp"

namespace bsq {

using transforms::Deriv;

namespace {
std::size_t max_real(const Grid& g) {
  return std::max({g.periodic_fft().real_size(), g.sine_fft().real_size()});
}
std::size_t max_half(const Grid& g) {
  return std::max({g.periodic_fft().spectral_size(), g.sine_fft().spectral_size()});
}
}  // namespace

BilinearWorkspace::BilinearWorkspace(GridPtr grid)
    : grid_(std::move(grid)),
      u1p_(grid_->periodic_fft().real_size()),
      u2p_(grid_->periodic_fft().real_size()),
      u1s_(grid_->sine_fft().real_size()),
      u2s_(grid_->sine_fft().real_size()),
      d1_(max_real(*grid_)),
      d2_(max_real(*grid_)),
      half_(max_half(*grid_)) {}

void BilinearWorkspace::sample(const cplx* c, Deriv d, bool sine_coeffs, const RealFft2d& fft, double* out) {
  if (sine_coeffs) {
    transforms::scatter_sine(*grid_, c, d, fft, half_.data());
  } else {
    const int stretch = &fft == &grid_->sine_fft() ? 2 : 1;
    transforms::scatter_periodic(*grid_, c, d, fft, half_.data(), stretch);
  }
  fft.inverse(half_.data(), out);
}

void BilinearWorkspace::freeze(const VectorField& u) {
  require_same_grid(*grid_, u.grid(), "BilinearWorkspace::freeze");
  frozen_ = true;
  frozen_zero_ = u.is_zero();
  if (frozen_zero_) return;
  const RealFft2d& pf = grid_->periodic_fft();
  const RealFft2d& sf = grid_->sine_fft();
  sample(u.component(0).data(), Deriv::None, false, pf, u1p_.data());
  sample(u.component(1).data(), Deriv::None, false, pf, u2p_.data());
  sample(u.component(0).data(), Deriv::None, false, sf, u1s_.data());
  sample(u.component(1).data(), Deriv::None, false, sf, u2s_.data());
}

VectorField BilinearWorkspace::advect_velocity(const VectorField& v) {
  if (!frozen_) throw std::logic_error("BilinearWorkspace: advect before freeze");
  require_same_grid(*grid_, v.grid(), "advect_velocity");
  VectorField out(v.grid_ptr());
  if (frozen_zero_) return out;
  const RealFft2d& fft = grid_->periodic_fft();
  const std::size_t n = fft.real_size();
  for (int c = 0; c < 2; ++c) {
    sample(v.component(c).data(), Deriv::D1, false, fft, d1_.data());
    sample(v.component(c).data(), Deriv::D2, false, fft, d2_.data());
    double* p = d1_.data();
    const double* q = d2_.data();
    for (std::size_t i = 0; i < n; ++i) p[i] = u1p_[i] * p[i] + u2p_[i] * q[i];
    fft.forward(p, half_.data());
    transforms::gather_periodic(*grid_, half_.data(), fft, out.component(c).data());
  }
  leray_project_inplace(out);
  return out;
}

ScalarField BilinearWorkspace::advect_scalar(const ScalarField& theta) {
  if (!frozen_) throw std::logic_error("BilinearWorkspace: advect before freeze");
  require_same_grid(*grid_, theta.grid(), "advect_scalar");
  ScalarField out(theta.grid_ptr(), theta.basis());
  if (frozen_zero_) return out;
  const bool sine = theta.basis() == ScalarBasis::Sine;
  const RealFft2d& fft = sine ? grid_->sine_fft() : grid_->periodic_fft();
  const double* a1 = sine ? u1s_.data() : u1p_.data();
  const double* a2 = sine ? u2s_.data() : u2p_.data();
  sample(theta.data().data(), Deriv::D1, sine, fft, d1_.data());
  sample(theta.data().data(), Deriv::D2, sine, fft, d2_.data());
  const std::size_t n = fft.real_size();
  double* p = d1_.data();
  const double* q = d2_.data();
  for (std::size_t i = 0; i < n; ++i) p[i] = a1[i] * p[i] + a2[i] * q[i];
  fft.forward(p, half_.data());
  if (sine) {
    transforms::gather_sine(*grid_, half_.data(), fft, out.data().data());
  } else {
    transforms::gather_periodic(*grid_, half_.data(), fft, out.data().data());
    out.data()[0] = cplx{};
  }
  return out;
}

VectorField advect_velocity(const VectorField& u, const VectorField& v) {
  require_same_grid(u.grid(), v.grid(), "advect_velocity");
  BilinearWorkspace ws(u.grid_ptr());
  ws.freeze(u);
  return ws.advect_velocity(v);
}

ScalarField advect_scalar(const VectorField& u, const ScalarField& theta) {
  require_same_grid(u.grid(), theta.grid(), "advect_scalar");
  BilinearWorkspace ws(u.grid_ptr());
  ws.freeze(u);
  return ws.advect_scalar(theta);
}

double trilinear_b(const VectorField& u1, const VectorField& u2, const VectorField& u3) {
  require_same_grid(u1.grid(), u2.grid(), "trilinear_b");
  require_same_grid(u1.grid(), u3.grid(), "trilinear_b");
  const Grid& g = u1.grid();
  const RealFft2d& fft = g.quad_fft();
  const std::size_t n = fft.real_size();
  AlignedBuffer<cplx> half(fft.spectral_size());
  auto sample = [&](std::span<const cplx> c, Deriv d) {
    AlignedBuffer<double> out(n);
    transforms::scatter_periodic(g, c.data(), d, fft, half.data());
    fft.inverse(half.data(), out.data());
    return out;
  };
  AlignedBuffer<double> a[2] = {sample(u1.component(0), Deriv::None), sample(u1.component(1), Deriv::None)};
  double total = 0.0;
  for (int j = 0; j < 2; ++j) {
    AlignedBuffer<double> dj1 = sample(u2.component(j), Deriv::D1);
    AlignedBuffer<double> dj2 = sample(u2.component(j), Deriv::D2);
    AlignedBuffer<double> w = sample(u3.component(j), Deriv::None);
    for (std::size_t i = 0; i < n; ++i) total += (a[0][i] * dj1[i] + a[1][i] * dj2[i]) * w[i];
  }
  return g.length() * g.length() * total / static_cast<double>(n);
}

}  // namespace bsq
