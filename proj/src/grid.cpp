#include "bsq/grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include "bsq/error.hpp"

namespace bsq {

namespace {
// Planner calls are not thread-safe; execution with new arrays is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

int padded_size(int n) {
  int m = (3 * n + 1) / 2;
  return m % 2 == 0 ? m : m + 1;
}
}  // namespace

template <class T>
AlignedBuffer<T>::AlignedBuffer(std::size_t n) : size_(n) {
  if (n > 0) {
    data_ = static_cast<T*>(fftw_malloc(sizeof(T) * n));
    if (data_ == nullptr) throw std::bad_alloc();
    for (std::size_t i = 0; i < n; ++i) data_[i] = T{};
  }
}

template <class T>
AlignedBuffer<T>& AlignedBuffer<T>::operator=(AlignedBuffer&& other) noexcept {
  if (this != &other) {
    if (data_ != nullptr) fftw_free(data_);
    data_ = other.data_;
    size_ = other.size_;
    other.data_ = nullptr;
    other.size_ = 0;
  }
  return *this;
}

template <class T>
AlignedBuffer<T>::~AlignedBuffer() {
  if (data_ != nullptr) fftw_free(data_);
}

template <class T>
void AlignedBuffer<T>::fill(T value) noexcept {
  for (std::size_t i = 0; i < size_; ++i) data_[i] = value;
}

template class AlignedBuffer<double>;
template class AlignedBuffer<cplx>;

RealFft2d::RealFft2d(int nx, int ny) : nx_(nx), ny_(ny) {
  AlignedBuffer<double> real(real_size());
  AlignedBuffer<cplx> spec(spectral_size());
  std::lock_guard lock(planner_mutex());
  auto* r = real.data();
  auto* c = reinterpret_cast<fftw_complex*>(spec.data());
  forward_plan_ = fftw_plan_dft_r2c_2d(nx, ny, r, c, FFTW_ESTIMATE);
  inverse_plan_ = fftw_plan_dft_c2r_2d(nx, ny, c, r, FFTW_ESTIMATE);
  if (forward_plan_ == nullptr || inverse_plan_ == nullptr) {
    throw std::runtime_error("FFT planning failed for " + std::to_string(nx) + "x" + std::to_string(ny));
  }
}

RealFft2d::~RealFft2d() {
  std::lock_guard lock(planner_mutex());
  if (forward_plan_ != nullptr) fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  if (inverse_plan_ != nullptr) fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
}

void RealFft2d::inverse(cplx* spectrum, double* values) const {
  fftw_execute_dft_c2r(static_cast<fftw_plan>(inverse_plan_), reinterpret_cast<fftw_complex*>(spectrum), values);
}

void RealFft2d::forward(const double* values, cplx* spectrum) const {
  // r2c plans never write to their input.
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_plan_), const_cast<double*>(values),
                       reinterpret_cast<fftw_complex*>(spectrum));
}

Grid::Grid(double length, int n1, int n2)
    : length_(length), n1_(n1), n2_(n2), padded_n1_(padded_size(n1)), padded_n2_(padded_size(n2)) {
  periodic_ = std::make_unique<RealFft2d>(padded_n1_, padded_n2_);
  sine_ = std::make_unique<RealFft2d>(padded_n1_, sine_period_n2());
  quad_ = std::make_unique<RealFft2d>(quad_n1(), quad_n2());
  sine_quad_ = std::make_unique<RealFft2d>(quad_n1(), sine_quad_n2());
}

GridPtr Grid::create(double length, int n1, int n2) {
  if (!(length > 0.0) || !std::isfinite(length)) throw ConfigError("grid: L must be positive and finite");
  if (n1 < 4 || n2 < 4 || n1 % 2 != 0 || n2 % 2 != 0) {
    throw ConfigError("grid: n1 and n2 must be even and >= 4 (got " + std::to_string(n1) + ", " +
                      std::to_string(n2) + ")");
  }
  return GridPtr(new Grid(length, n1, n2));
}

double Grid::base_wave() const noexcept { return 2.0 * std::numbers::pi / length_; }

void require_same_grid(const Grid& a, const Grid& b, const char* where) {
  if (&a != &b && !a.same_shape(b)) throw GridMismatch(std::string(where) + ": fields live on different grids");
}

}  // namespace bsq
