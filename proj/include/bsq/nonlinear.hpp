#pragma once

#include "bsq/fields.hpp"
#include "bsq/transforms.hpp"

namespace bsq {

/// Scratch buffers for dealiased products with one advecting velocity.
///
/// freeze(u) samples u once; every later advect_* call reuses those samples,
/// so a Krylov solve with a frozen advecting field pays only for the
/// transforms of its argument. One workspace per thread.
class BilinearWorkspace {
 public:
  explicit BilinearWorkspace(GridPtr grid);

  const Grid& grid() const noexcept { return *grid_; }

  void freeze(const VectorField& u);
  bool frozen_is_zero() const noexcept { return frozen_zero_; }

  /// Pi[(u . grad) v] for the frozen u.
  VectorField advect_velocity(const VectorField& v);
  /// Galerkin projection of (u . grad) theta onto theta's basis, frozen u.
  ScalarField advect_scalar(const ScalarField& theta);

 private:
  void sample(const cplx* c, transforms::Deriv d, bool sine_coeffs, const RealFft2d& fft, double* out);

  GridPtr grid_;
  bool frozen_ = false;
  bool frozen_zero_ = true;
  AlignedBuffer<double> u1p_, u2p_;  // padded periodic grid
  AlignedBuffer<double> u1s_, u2s_;  // doubled-period sine grid
  AlignedBuffer<double> d1_, d2_;
  AlignedBuffer<cplx> half_;
};

VectorField advect_velocity(const VectorField& u, const VectorField& v);
ScalarField advect_scalar(const VectorField& u, const ScalarField& theta);

/// int_D [(u1 . grad) u2] . u3 dx by quadrature that is exact for band-limited fields.
double trilinear_b(const VectorField& u1, const VectorField& u2, const VectorField& u3);

}  // namespace bsq
