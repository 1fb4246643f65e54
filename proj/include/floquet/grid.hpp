#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "floquet/errors.hpp"
#include "floquet/fft.hpp"
#include "floquet/params.hpp"

namespace floquet {

// Uniform periodic spatial grid on [-x_max, x_max). The domain length must
// hold an integer number of lattice periods 2*pi/k so the sampled fields
// stay exactly periodic.
struct Grid {
  int n = 0;                // number of points, power of two
  double x_max = 0.0;       // half-length of the domain
  double dx = 0.0;          // 2*x_max / n
  int lattice_periods = 0;  // number of 2*pi/k periods in the domain

  double length() const { return 2.0 * x_max; }
  double x(int j) const { return -x_max + j * dx; }

  // Wavenumber of FFT mode index j (standard order: 0..n/2-1, -n/2..-1).
  double wavenumber(int j) const {
    const int m = (j < n / 2) ? j : j - n;
    return 2.0 * kPi * m / length();
  }

  friend bool operator==(const Grid&, const Grid&) = default;
};

inline Grid make_grid(int n_points, double x_max, double lattice_k) {
  if (n_points < 4 || (n_points & (n_points - 1)) != 0)
    throw std::invalid_argument("make_grid: n_points must be a power of two >= 4");
  if (!(x_max > 0.0) || !(lattice_k > 0.0))
    throw std::invalid_argument("make_grid: x_max and k must be positive");
  const double periods = 2.0 * x_max * lattice_k / (2.0 * kPi);
  const double rounded = std::round(periods);
  if (rounded < 1.0 || std::abs(periods - rounded) > 1e-9 * std::max(1.0, periods))
    throw std::invalid_argument(
        "make_grid: domain length must be an integer multiple of the lattice period 2*pi/k");
  Grid g;
  g.n = n_points;
  g.x_max = x_max;
  g.dx = 2.0 * x_max / n_points;
  g.lattice_periods = static_cast<int>(rounded);
  return g;
}

// Complex wavefunction samples on a Grid at one time instant.
struct WaveField {
  Grid grid;
  double t = 0.0;
  std::vector<std::complex<double>> values;
};

inline WaveField make_field(const Grid& grid, double t = 0.0) {
  return WaveField{grid, t, std::vector<std::complex<double>>(grid.n)};
}

inline void require_same_grid(const WaveField& a, const WaveField& b,
                              const char* what) {
  if (!(a.grid == b.grid))
    throw GridMismatch(std::string(what) + ": fields live on different grids");
}

namespace detail {
// Shared plans for the free-function spectral helpers; hot paths own their
// Fft instance instead.
inline const Fft& cached_fft(int n) {
  thread_local std::map<int, Fft> cache;
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, Fft(n)).first;
  return it->second;
}
}  // namespace detail

// Spectral d^order/dx^order of a periodic sample vector (order 1 or 2).
// The Nyquist mode is zeroed for odd orders.
inline std::vector<std::complex<double>> spectral_derivative(
    const Grid& grid, std::span<const std::complex<double>> f, int order) {
  if (static_cast<int>(f.size()) != grid.n)
    throw std::invalid_argument("spectral_derivative: size mismatch");
  if (order != 1 && order != 2)
    throw std::invalid_argument("spectral_derivative: order must be 1 or 2");
  std::vector<std::complex<double>> hat(f.begin(), f.end());
  const Fft& fft = detail::cached_fft(grid.n);
  fft.forward(hat);
  for (int j = 0; j < grid.n; ++j) {
    const double q = grid.wavenumber(j);
    if (order == 1) {
      hat[j] *= std::complex<double>(0.0, q);
      if (j == grid.n / 2) hat[j] = 0.0;
    } else {
      hat[j] *= -q * q;
    }
  }
  fft.inverse(hat);
  return hat;
}

}  // namespace floquet
