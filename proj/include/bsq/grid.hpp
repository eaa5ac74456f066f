#pragma once

#include <complex>
#include <cstddef>
#include <cstdlib>
#include <memory>
#include <span>

namespace bsq {

using cplx = std::complex<double>;

/// Owning buffer allocated with the FFT library's aligned allocator, so that
/// every buffer handed to a shared plan has the alignment the plan was made for.
template <class T>
class AlignedBuffer {
 public:
  AlignedBuffer() = default;
  explicit AlignedBuffer(std::size_t n);
  AlignedBuffer(AlignedBuffer&& other) noexcept : data_(other.data_), size_(other.size_) {
    other.data_ = nullptr;
    other.size_ = 0;
  }
  AlignedBuffer& operator=(AlignedBuffer&& other) noexcept;
  AlignedBuffer(const AlignedBuffer&) = delete;
  AlignedBuffer& operator=(const AlignedBuffer&) = delete;
  ~AlignedBuffer();

  T* data() noexcept { return data_; }
  const T* data() const noexcept { return data_; }
  std::size_t size() const noexcept { return size_; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }
  std::span<T> span() noexcept { return {data_, size_}; }
  std::span<const T> span() const noexcept { return {data_, size_}; }
  void fill(T value) noexcept;

 private:
  T* data_ = nullptr;
  std::size_t size_ = 0;
};

/// Real 2D transform pair on an nx-by-ny periodic sampling (x1 slow, x2 fast).
/// The half spectrum has nx * (ny/2 + 1) entries. Neither direction is scaled.
/// Plans are built with estimate-only planning, so results are bitwise
/// reproducible from run to run.
class RealFft2d {
 public:
  RealFft2d(int nx, int ny);
  ~RealFft2d();
  RealFft2d(const RealFft2d&) = delete;
  RealFft2d& operator=(const RealFft2d&) = delete;

  int nx() const noexcept { return nx_; }
  int ny() const noexcept { return ny_; }
  int half_ny() const noexcept { return ny_ / 2 + 1; }
  std::size_t real_size() const noexcept { return static_cast<std::size_t>(nx_) * ny_; }
  std::size_t spectral_size() const noexcept { return static_cast<std::size_t>(nx_) * half_ny(); }

  /// values(x) = sum_k spectrum(k) e^{+i k.x}. Overwrites `spectrum`.
  void inverse(cplx* spectrum, double* values) const;
  /// spectrum(k) = sum_x values(x) e^{-i k.x}. Preserves `values`.
  void forward(const double* values, cplx* spectrum) const;

 private:
  int nx_;
  int ny_;
  void* inverse_plan_ = nullptr;
  void* forward_plan_ = nullptr;
};

class Grid;
using GridPtr = std::shared_ptr<const Grid>;

/// Square periodic domain [0, L]^2 truncated to n1 x n2 Fourier modes.
///
/// Coefficient arrays are stored row-major with FFT index ordering in each
/// direction: index i holds wavenumber i for i <= n/2 and i - n above. The
/// Nyquist index n/2 is never retained, so every stored field satisfies a
/// closed Hermitian symmetry. Scalar fields in the sine basis reuse the x1
/// ordering and store sine index m = 1..n2 at column m - 1.
class Grid {
 public:
  static GridPtr create(double length, int n1, int n2);

  double length() const noexcept { return length_; }
  int n1() const noexcept { return n1_; }
  int n2() const noexcept { return n2_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(n1_) * n2_; }
  std::size_t index(int i1, int i2) const noexcept { return static_cast<std::size_t>(i1) * n2_ + i2; }

  /// Physical sampling sizes for 3/2-rule dealiased periodic products.
  int padded_n1() const noexcept { return padded_n1_; }
  int padded_n2() const noexcept { return padded_n2_; }
  /// Samples per doubled period [0, 2L) in x2 for products involving sine fields.
  int sine_period_n2() const noexcept { return 4 * n2_; }
  /// Interior sine nodes x2 = j L / (2 n2), j = 1 .. 2 n2 - 1.
  int sine_nodes() const noexcept { return 2 * n2_ - 1; }
  /// Sampling sizes on which quartic integrands are integrated exactly.
  int quad_n1() const noexcept { return 2 * n1_; }
  int quad_n2() const noexcept { return 2 * n2_; }
  /// Quartic integrands of sine fields, sampled over the doubled period [0, 2L).
  int sine_quad_n2() const noexcept { return 8 * n2_; }

  static int wavenumber(int index, int n) noexcept { return index <= n / 2 ? index : index - n; }
  int k1(int i1) const noexcept { return wavenumber(i1, n1_); }
  int k2(int i2) const noexcept { return wavenumber(i2, n2_); }
  bool retained1(int i1) const noexcept { return 2 * std::abs(k1(i1)) < n1_; }
  bool retained2(int i2) const noexcept { return 2 * std::abs(k2(i2)) < n2_; }
  /// Index of wavenumber k in an FFT-ordered array of length n (k may be negative).
  static int slot(int k, int n) noexcept { return k >= 0 ? k : k + n; }

  /// Physical wavenumbers 2 pi k / L.
  double wave1(int i1) const noexcept { return base_wave() * k1(i1); }
  double wave2(int i2) const noexcept { return base_wave() * k2(i2); }
  double base_wave() const noexcept;

  const RealFft2d& periodic_fft() const noexcept { return *periodic_; }
  const RealFft2d& sine_fft() const noexcept { return *sine_; }
  const RealFft2d& quad_fft() const noexcept { return *quad_; }
  const RealFft2d& sine_quad_fft() const noexcept { return *sine_quad_; }

  bool same_shape(const Grid& other) const noexcept {
    return length_ == other.length_ && n1_ == other.n1_ && n2_ == other.n2_;
  }

 private:
  Grid(double length, int n1, int n2);

  double length_;
  int n1_;
  int n2_;
  int padded_n1_;
  int padded_n2_;
  std::unique_ptr<RealFft2d> periodic_;
  std::unique_ptr<RealFft2d> sine_;
  std::unique_ptr<RealFft2d> quad_;
  std::unique_ptr<RealFft2d> sine_quad_;
};

/// Throws GridMismatch unless both grids describe the same discretization.
void require_same_grid(const Grid& a, const Grid& b, const char* where);

}  // namespace bsq
