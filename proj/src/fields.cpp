#include "bsq/fields.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bsq/error.hpp"

namespace bsq {

std::string_view to_string(ScalarBasis basis) {
  return basis == ScalarBasis::Sine ? "sine" : "periodic";
}

ScalarBasis scalar_basis_from_string(std::string_view name) {
  if (name == "sine") return ScalarBasis::Sine;
  if (name == "periodic") return ScalarBasis::Periodic;
  throw ConfigError("unknown scalar basis '" + std::string(name) + "' (expected sine or periodic)");
}

namespace {
template <class Span>
bool any_nan(const Span& s) {
  return std::any_of(s.begin(), s.end(), [](const cplx& z) { return !std::isfinite(z.real()) || !std::isfinite(z.imag()); });
}
}  // namespace

VectorField::VectorField(GridPtr grid) : grid_(std::move(grid)), data_(2 * grid_->size()) {}

VectorField& VectorField::operator+=(const VectorField& other) {
  require_same_grid(*grid_, *other.grid_, "VectorField +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

VectorField& VectorField::operator-=(const VectorField& other) {
  require_same_grid(*grid_, *other.grid_, "VectorField -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

VectorField& VectorField::operator*=(double a) noexcept {
  for (auto& z : data_) z *= a;
  return *this;
}

void VectorField::axpy(double a, const VectorField& x) {
  require_same_grid(*grid_, *x.grid_, "VectorField axpy");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * x.data_[i];
}

void VectorField::set_zero() noexcept { std::fill(data_.begin(), data_.end(), cplx{}); }

bool VectorField::is_zero() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](const cplx& z) { return z == cplx{}; });
}

bool VectorField::has_nan() const noexcept { return any_nan(data_); }

ScalarField::ScalarField(GridPtr grid, ScalarBasis basis)
    : grid_(std::move(grid)), basis_(basis), data_(grid_->size()) {}

double ScalarField::weight() const noexcept {
  const double area = grid_->length() * grid_->length();
  return basis_ == ScalarBasis::Sine ? 0.5 * area : area;
}

void require_compatible(const ScalarField& a, const ScalarField& b, const char* where) {
  require_same_grid(a.grid(), b.grid(), where);
  if (a.basis() != b.basis()) throw GridMismatch(std::string(where) + ": scalar fields use different bases");
}

ScalarField& ScalarField::operator+=(const ScalarField& other) {
  require_compatible(*this, other, "ScalarField +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& other) {
  require_compatible(*this, other, "ScalarField -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

ScalarField& ScalarField::operator*=(double a) noexcept {
  for (auto& z : data_) z *= a;
  return *this;
}

void ScalarField::axpy(double a, const ScalarField& x) {
  require_compatible(*this, x, "ScalarField axpy");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * x.data_[i];
}

void ScalarField::set_zero() noexcept { std::fill(data_.begin(), data_.end(), cplx{}); }

bool ScalarField::is_zero() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](const cplx& z) { return z == cplx{}; });
}

bool ScalarField::has_nan() const noexcept { return any_nan(data_); }

VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
VectorField operator*(double s, VectorField a) { return a *= s; }
ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
ScalarField operator*(double s, ScalarField a) { return a *= s; }

double inner(const VectorField& a, const VectorField& b) {
  require_same_grid(a.grid(), b.grid(), "inner");
  auto x = a.data();
  auto y = b.data();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i].real() * y[i].real() + x[i].imag() * y[i].imag();
  return a.grid().length() * a.grid().length() * s;
}

double inner(const ScalarField& a, const ScalarField& b) {
  require_compatible(a, b, "inner");
  auto x = a.data();
  auto y = b.data();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i].real() * y[i].real() + x[i].imag() * y[i].imag();
  return a.weight() * s;
}

namespace {
// Hermitian partner of (i1, i2) in k1 only (sine) or in both directions (periodic).
double defect(std::span<const cplx> c, const Grid& g, bool both) {
  double worst = 0.0;
  for (int i1 = 0; i1 < g.n1(); ++i1) {
    for (int i2 = 0; i2 < g.n2(); ++i2) {
      const cplx z = c[g.index(i1, i2)];
      bool kept = g.retained1(i1) && (!both || g.retained2(i2));
      if (!kept) {
        worst = std::max(worst, std::abs(z));
        continue;
      }
      int j1 = Grid::slot(-g.k1(i1), g.n1());
      int j2 = both ? Grid::slot(-g.k2(i2), g.n2()) : i2;
      worst = std::max(worst, std::abs(z - std::conj(c[g.index(j1, j2)])));
    }
  }
  return worst;
}

void symmetrize_span(std::span<cplx> c, const Grid& g, bool both) {
  for (int i1 = 0; i1 < g.n1(); ++i1) {
    for (int i2 = 0; i2 < g.n2(); ++i2) {
      bool kept = g.retained1(i1) && (!both || g.retained2(i2));
      if (!kept) c[g.index(i1, i2)] = cplx{};
    }
  }
  for (int i1 = 0; i1 < g.n1(); ++i1) {
    if (!g.retained1(i1)) continue;
    for (int i2 = 0; i2 < g.n2(); ++i2) {
      if (both && !g.retained2(i2)) continue;
      int j1 = Grid::slot(-g.k1(i1), g.n1());
      int j2 = both ? Grid::slot(-g.k2(i2), g.n2()) : i2;
      std::size_t a = g.index(i1, i2);
      std::size_t b = g.index(j1, j2);
      if (b < a) continue;
      if (a == b) {
        c[a] = cplx(c[a].real(), 0.0);
      } else {
        cplx avg = 0.5 * (c[a] + std::conj(c[b]));
        c[a] = avg;
        c[b] = std::conj(avg);
      }
    }
  }
}
}  // namespace

double hermitian_defect(const VectorField& f) {
  return std::max(defect(f.component(0), f.grid(), true), defect(f.component(1), f.grid(), true));
}

double hermitian_defect(const ScalarField& f) {
  return defect(f.data(), f.grid(), f.basis() == ScalarBasis::Periodic);
}

void symmetrize(VectorField& f) {
  symmetrize_span(f.component(0), f.grid(), true);
  symmetrize_span(f.component(1), f.grid(), true);
}

void symmetrize(ScalarField& f) { symmetrize_span(f.data(), f.grid(), f.basis() == ScalarBasis::Periodic); }

}  // namespace bsq
