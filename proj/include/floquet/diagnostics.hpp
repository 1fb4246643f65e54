#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "floquet/exact_state.hpp"
#include "floquet/grid.hpp"

namespace floquet {

// Time series of run diagnostics. One row per sample; columns without a
// meaning for a given run (e.g. fidelity with no reference state) hold NaN.
struct DiagnosticsTrace {
  std::vector<double> times;
  std::vector<double> fidelity;
  std::vector<double> norm;
  std::vector<double> mean_density;
  std::vector<double> spread;
  std::vector<double> max_density_dev;
  std::optional<double> blowup_time;

  std::size_t size() const { return times.size(); }
};

// Rectangle-rule atom number integral(|psi|^2 dx); spectrally accurate for
// periodic band-limited integrands.
inline double conserved_norm(const WaveField& f) {
  double s = 0.0;
  for (const auto& v : f.values) s += std::norm(v);
  return s * f.grid.dx;
}

// Normalized squared overlap |<num, ex>|^2 / (<num,num><ex,ex>); lies in
// [0, 1], equals 1 iff the fields agree up to a global complex factor.
inline double fidelity(const WaveField& num, const WaveField& ex) {
  require_same_grid(num, ex, "fidelity");
  if (std::abs(num.t - ex.t) > 1e-9 * std::max(1.0, std::abs(num.t)))
    throw GridMismatch("fidelity: fields sampled at different times");
  std::complex<double> overlap = 0.0;
  double na = 0.0, nb = 0.0;
  for (int j = 0; j < num.grid.n; ++j) {
    overlap += std::conj(num.values[j]) * ex.values[j];
    na += std::norm(num.values[j]);
    nb += std::norm(ex.values[j]);
  }
  if (na == 0.0 || nb == 0.0)
    throw std::invalid_argument("fidelity: zero-norm field");
  const double f = std::norm(overlap) / (na * nb);
  return std::clamp(f, 0.0, 1.0);
}

struct UniformityStats {
  double mean = 0.0;
  double relative_spread = 0.0;  // (max - min) / mean
};

inline UniformityStats density_uniformity(const WaveField& f) {
  double mean = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& v : f.values) {
    const double rho = std::norm(v);
    mean += rho;
    lo = std::min(lo, rho);
    hi = std::max(hi, rho);
  }
  mean /= static_cast<double>(f.values.size());
  UniformityStats s;
  s.mean = mean;
  s.relative_spread = (mean != 0.0) ? (hi - lo) / mean : 0.0;
  return s;
}

// Max pointwise density deviation from a reference field, normalized by
// the reference mean density.
inline double max_density_deviation(const WaveField& f, const WaveField& ref) {
  require_same_grid(f, ref, "max_density_deviation");
  double dev = 0.0, mean = 0.0;
  for (int j = 0; j < f.grid.n; ++j) {
    dev = std::max(dev, std::abs(std::norm(f.values[j]) - std::norm(ref.values[j])));
    mean += std::norm(ref.values[j]);
  }
  mean /= static_cast<double>(f.grid.n);
  return (mean != 0.0) ? dev / mean : dev;
}

// A phase singularity found by the plaquette scan.
struct DetectedVortex {
  double x = 0.0;  // cell-center position
  double t = 0.0;  // cell-center time
  int charge = 0;  // +1 or -1
};

// Plaquette phase-winding scan over the (x, t) sample lattice formed by a
// time-ordered snapshot sequence. The spatial direction wraps periodically.
// Cells whose boundary accumulates +-2*pi are reported with their centers.
inline std::vector<DetectedVortex> detect_vortices_numerical(
    const std::vector<WaveField>& snapshots) {
  std::vector<DetectedVortex> found;
  if (snapshots.size() < 2) return found;
  const Grid& grid = snapshots.front().grid;
  for (const auto& s : snapshots)
    if (!(s.grid == grid))
      throw GridMismatch("detect_vortices_numerical: snapshots on different grids");

  const auto wrap = [](double d) { return std::remainder(d, 2.0 * kPi); };
  const int n = grid.n;
  for (std::size_t m = 0; m + 1 < snapshots.size(); ++m) {
    const auto& lo = snapshots[m];
    const auto& hi = snapshots[m + 1];
    for (int j = 0; j < n; ++j) {
      const int jn = (j + 1) % n;
      const double t1 = std::arg(lo.values[j]);
      const double t2 = std::arg(lo.values[jn]);
      const double t3 = std::arg(hi.values[jn]);
      const double t4 = std::arg(hi.values[j]);
      const double w =
          wrap(t2 - t1) + wrap(t3 - t2) + wrap(t4 - t3) + wrap(t1 - t4);
      if (std::abs(w) > kPi) {
        DetectedVortex v;
        v.x = grid.x(j) + 0.5 * grid.dx;
        v.t = 0.5 * (lo.t + hi.t);
        v.charge = (w > 0.0) ? +1 : -1;
        found.push_back(v);
      }
    }
  }
  return found;
}

}  // namespace floquet
