#pragma once

// Reference implementations used only by the tests. Everything here is
// written from the continuum definitions (direct sums, explicit quadrature,
// dense matrices) and shares no code with the library's transform paths.

#include <Eigen/Dense>
#include <vector>

#include "bsq/fields.hpp"

namespace oracle {

using bsq::cplx;
using bsq::Grid;

/// Gauss-Legendre nodes and weights on [a, b].
void gauss_legendre(int n, double a, double b, std::vector<double>& x, std::vector<double>& w);

/// Truncated convolution sum_{p+q=k} (u(p) . i q) v(q) for retained k, p, q.
std::vector<cplx> direct_advection(const Grid& g, const cplx* u1, const cplx* u2, const cplx* v);

/// Leray projection written out per mode.
void project(const Grid& g, cplx* a, cplx* b);

/// Pi[(u . grad) v] by direct summation.
bsq::VectorField advect_velocity(const bsq::VectorField& u, const bsq::VectorField& v);

/// Galerkin projection of (u . grad) theta onto the scalar basis, by explicit
/// quadrature of basis triple products (Gauss-Legendre in x2).
bsq::ScalarField advect_scalar(const bsq::VectorField& u, const bsq::ScalarField& theta);

/// Pi(theta e2) and the projection of u2 onto the scalar basis, by quadrature.
bsq::VectorField buoyancy(const bsq::ScalarField& theta);
bsq::ScalarField vertical(const bsq::VectorField& u, bsq::ScalarBasis basis);

/// Dense complex matrix of a linear map on the full coefficient vector.
template <class Field, class Map>
Eigen::MatrixXcd assemble(const Field& shape, Map apply) {
  const std::size_t n = shape.data().size();
  Eigen::MatrixXcd m(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    Field e = shape;
    e.set_zero();
    e.data()[j] = 1.0;
    Field col = apply(e);
    for (std::size_t i = 0; i < n; ++i) m(i, j) = col.data()[i];
  }
  return m;
}

}  // namespace oracle
