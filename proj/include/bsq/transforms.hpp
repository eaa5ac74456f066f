#pragma once

#include "bsq/grid.hpp"

// Low-level coefficient <-> sample plumbing shared by the spectral, nonlinear
// and noise code. Coefficient arrays use the Grid storage layout; half spectra
// use the layout of the given RealFft2d.
namespace bsq::transforms {

enum class Deriv { None, D1, D2 };

/// Periodic coefficients (optionally differentiated) into the half spectrum.
/// With x2_stretch = 2 the wavenumber k2 lands on index 2 k2, i.e. the samples
/// cover [0, 2L) in x2 as used by the sine grids.
void scatter_periodic(const Grid& g, const cplx* c, Deriv d, const RealFft2d& fft, cplx* half, int x2_stretch = 1);

/// Sine coefficients into the half spectrum of a grid covering [0, 2L) in x2.
void scatter_sine(const Grid& g, const cplx* c, Deriv d, const RealFft2d& fft, cplx* half);

/// Retained periodic coefficients from an unnormalized forward transform.
void gather_periodic(const Grid& g, const cplx* half, const RealFft2d& fft, cplx* out);

/// L2 projection on [0, L] onto sin(m pi x2 / L), m = 1..n2, of the function
/// whose doubled-period transform is `half`. Exact for band-limited input.
void gather_sine(const Grid& g, const cplx* half, const RealFft2d& fft, cplx* out);

}  // namespace bsq::transforms
