#include "bsq/transforms.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <utility>

namespace bsq::transforms {

namespace {

// Projection of cos(j s) onto sin(m s) over [0, pi], normalized by 2 / pi:
// 4 m / (pi (m^2 - j^2)) when j + m is odd, zero otherwise. Split by parity of m
// so that only the nonzero blocks are stored.
struct CrossParity {
  Eigen::MatrixXd odd_m;   // rows m = 1, 3, ...; cols j = 0, 2, 4, ...
  Eigen::MatrixXd even_m;  // rows m = 2, 4, ...; cols j = 1, 3, 5, ...
};

const CrossParity& cross_parity(int n2, int jcount) {
  static std::mutex m;
  static std::map<std::pair<int, int>, std::unique_ptr<CrossParity>> cache;
  std::lock_guard lock(m);
  auto& slot = cache[{n2, jcount}];
  if (!slot) {
    auto t = std::make_unique<CrossParity>();
    const int jo = (jcount + 1) / 2;  // even j
    const int je = jcount / 2;        // odd j
    t->odd_m.resize((n2 + 1) / 2, jo);
    t->even_m.resize(n2 / 2, je);
    for (int r = 0; r < t->odd_m.rows(); ++r) {
      const double mm = 2 * r + 1;
      for (int c = 0; c < jo; ++c) {
        const double j = 2 * c;
        t->odd_m(r, c) = 4.0 * mm / (std::numbers::pi * (mm * mm - j * j));
      }
    }
    for (int r = 0; r < t->even_m.rows(); ++r) {
      const double mm = 2 * r + 2;
      for (int c = 0; c < je; ++c) {
        const double j = 2 * c + 1;
        t->even_m(r, c) = 4.0 * mm / (std::numbers::pi * (mm * mm - j * j));
      }
    }
    slot = std::move(t);
  }
  return *slot;
}

cplx factor(const Grid& g, Deriv d, int i1, int k2) {
  switch (d) {
    case Deriv::D1: return {0.0, g.wave1(i1)};
    case Deriv::D2: return {0.0, g.base_wave() * k2};
    default: return {1.0, 0.0};
  }
}

}  // namespace

void scatter_periodic(const Grid& g, const cplx* c, Deriv d, const RealFft2d& fft, cplx* half, int x2_stretch) {
  const int hy = fft.half_ny();
  std::fill(half, half + fft.spectral_size(), cplx{});
  for (int i1 = 0; i1 < g.n1(); ++i1) {
    if (!g.retained1(i1)) continue;
    const int r = Grid::slot(g.k1(i1), fft.nx());
    for (int k2 = 0; 2 * k2 < g.n2(); ++k2) {
      half[static_cast<std::size_t>(r) * hy + k2 * x2_stretch] = c[g.index(i1, k2)] * factor(g, d, i1, k2);
    }
  }
}

void scatter_sine(const Grid& g, const cplx* c, Deriv d, const RealFft2d& fft, cplx* half) {
  const int hy = fft.half_ny();
  const double vert = std::numbers::pi / g.length();
  std::fill(half, half + fft.spectral_size(), cplx{});
  for (int i1 = 0; i1 < g.n1(); ++i1) {
    if (!g.retained1(i1)) continue;
    const int r = Grid::slot(g.k1(i1), fft.nx());
    cplx* row = half + static_cast<std::size_t>(r) * hy;
    const double w1 = g.wave1(i1);
    for (int m = 1; m <= g.n2(); ++m) {
      const cplx t = c[g.index(i1, m - 1)];
      switch (d) {
        case Deriv::None: row[m] = cplx(0.0, -0.5) * t; break;
        case Deriv::D1: row[m] = 0.5 * w1 * t; break;
        case Deriv::D2: row[m] = 0.5 * vert * m * t; break;
      }
    }
  }
}

void gather_periodic(const Grid& g, const cplx* half, const RealFft2d& fft, cplx* out) {
  const int hy = fft.half_ny();
  const double scale = 1.0 / (static_cast<double>(fft.nx()) * fft.ny());
  std::fill(out, out + g.size(), cplx{});
  for (int i1 = 0; i1 < g.n1(); ++i1) {
    if (!g.retained1(i1)) continue;
    const int k1 = g.k1(i1);
    const int r = Grid::slot(k1, fft.nx());
    const int rn = Grid::slot(-k1, fft.nx());
    for (int i2 = 0; i2 < g.n2(); ++i2) {
      if (!g.retained2(i2)) continue;
      const int k2 = g.k2(i2);
      cplx v = k2 >= 0 ? half[static_cast<std::size_t>(r) * hy + k2]
                       : std::conj(half[static_cast<std::size_t>(rn) * hy - k2]);
      out[g.index(i1, i2)] = scale * v;
    }
  }
}

void gather_sine(const Grid& g, const cplx* half, const RealFft2d& fft, cplx* out) {
  const int hy = fft.half_ny();
  const int jcount = fft.ny() / 2;  // j = 0..ny/2-1; the Nyquist bin is dropped
  const int n1 = g.n1();
  const int n2 = g.n2();
  const double scale = 1.0 / (static_cast<double>(fft.nx()) * fft.ny());
  const CrossParity& P = cross_parity(n2, jcount);

  // Even part e_j = c_j + c_{-j} (split by parity of j), columns (Re, Im) per x1 row.
  Eigen::MatrixXd even_j(P.odd_m.cols(), 2 * n1);
  Eigen::MatrixXd odd_j(P.even_m.cols(), 2 * n1);
  even_j.setZero();
  odd_j.setZero();
  std::fill(out, out + g.size(), cplx{});
  for (int i1 = 0; i1 < n1; ++i1) {
    if (!g.retained1(i1)) continue;
    const int k1 = g.k1(i1);
    const cplx* pos = half + static_cast<std::size_t>(Grid::slot(k1, fft.nx())) * hy;
    const cplx* neg = half + static_cast<std::size_t>(Grid::slot(-k1, fft.nx())) * hy;
    for (int j = 0; j < jcount; ++j) {
      cplx e = j == 0 ? pos[0] : pos[j] + std::conj(neg[j]);
      e *= scale;
      if (j % 2 == 0) {
        even_j(j / 2, 2 * i1) = e.real();
        even_j(j / 2, 2 * i1 + 1) = e.imag();
      } else {
        odd_j(j / 2, 2 * i1) = e.real();
        odd_j(j / 2, 2 * i1 + 1) = e.imag();
      }
    }
    // Odd part: i (c_m - c_{-m}).
    for (int m = 1; m <= n2; ++m) {
      cplx dm = scale * (pos[m] - std::conj(neg[m]));
      out[g.index(i1, m - 1)] = cplx(0.0, 1.0) * dm;
    }
  }
  Eigen::MatrixXd ro = P.odd_m * even_j;
  Eigen::MatrixXd re = P.even_m * odd_j;
  for (int i1 = 0; i1 < n1; ++i1) {
    if (!g.retained1(i1)) continue;
    for (int r = 0; r < ro.rows(); ++r) out[g.index(i1, 2 * r)] += cplx(ro(r, 2 * i1), ro(r, 2 * i1 + 1));
    for (int r = 0; r < re.rows(); ++r) out[g.index(i1, 2 * r + 1)] += cplx(re(r, 2 * i1), re(r, 2 * i1 + 1));
  }
}

}  // namespace bsq::transforms
