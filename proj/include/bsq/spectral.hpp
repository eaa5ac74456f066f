#pragma once

#include <array>
#include <span>
#include <vector>

#include "bsq/fields.hpp"

namespace bsq {

enum class Space { V0, V1, H0, H1, L4 };

/// Real samples on a uniform tensor grid. Periodic fields are sampled on
/// [0, L)^2 at the padded resolution; sine fields on [0, L) x [0, 2L) (odd
/// extension in x2) with 4 n2 points in x2, so row entry j sits at x2 = j L / (2 n2).
struct PhysicalField {
  int n1 = 0;
  int n2 = 0;
  double extent1 = 0.0;
  double extent2 = 0.0;
  std::vector<double> values;  // row-major, x2 fastest

  double& at(int i1, int i2) { return values[static_cast<std::size_t>(i1) * n2 + i2]; }
  double at(int i1, int i2) const { return values[static_cast<std::size_t>(i1) * n2 + i2]; }
  double x1(int i1) const { return extent1 * i1 / n1; }
  double x2(int i2) const { return extent2 * i2 / n2; }
};

/// u_hat(k) -> u_hat(k) - k (k . u_hat(k)) / |k|^2; the mean mode is zeroed.
VectorField leray_project(VectorField raw);
void leray_project_inplace(VectorField& f);

/// max over retained k != 0 of |k . u_hat(k)| / (|k| |u_hat(k)|), plus |u_hat(0)| scaled by the largest coefficient.
double divergence_defect(const VectorField& f);

/// Per-mode eigenvalue of A (|k|^2) and of the scalar operator
/// (Dirichlet: (2 pi k1 / L)^2 + (m pi / L)^2; periodic: |k|^2). Non-retained slots yield 0.
double stokes_eigenvalue(const Grid& g, int i1, int i2);
double scalar_eigenvalue(const Grid& g, ScalarBasis basis, int i1, int i2);

/// Eigenvalues of A on the retained solenoidal space and of the scalar
/// operator on the retained scalar space, one entry per real dimension, ascending.
std::vector<double> stokes_spectrum(const Grid& g);
std::vector<double> scalar_spectrum(const Grid& g, ScalarBasis basis);
double lambda1(const Grid& g);
double lambda1_tilde(const Grid& g, ScalarBasis basis = ScalarBasis::Sine);

/// Per-mode multiplication by eigenvalue^s. Zero-eigenvalue slots map to 0
/// for s > 0 and are kept for s == 0; for s < 0 a nonzero kernel component throws.
VectorField apply_fractional_power(const VectorField& f, double s);
ScalarField apply_fractional_power(const ScalarField& f, double s);

/// Continuum norms. V0/H0 use Parseval, V1/H1 the square root of the operator,
/// L4 an exact quadrature of |f|^4 on an oversampled grid.
double norm(const VectorField& f, Space space);
double norm(const ScalarField& f, Space space);
double norm_squared(const VectorField& f, Space space);
double norm_squared(const ScalarField& f, Space space);

std::array<PhysicalField, 2> to_physical(const VectorField& f);
PhysicalField to_physical(const ScalarField& f);
/// Inverse of to_physical on the retained modes. Sine targets are the L2
/// projection on [0, L] of the sampled function, so arbitrary samples (not
/// only odd ones) are accepted. Throws GridMismatch on a size mismatch.
VectorField from_physical(const std::array<PhysicalField, 2>& samples, const GridPtr& grid);
ScalarField from_physical(const PhysicalField& samples, const GridPtr& grid, ScalarBasis basis);

/// L^2 * mean of the squared samples: the squared L2 norm over [0, L]^2 for
/// samples produced by to_physical (odd extensions have the same mean square).
double sampled_l2_squared(const PhysicalField& f, double length);

/// Leray projection of the buoyancy force theta * e2.
VectorField buoyancy(const ScalarField& theta);
/// L2 projection of the vertical velocity component onto the scalar basis.
ScalarField vertical_component(const VectorField& u, ScalarBasis basis);

}  // namespace bsq
