#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "floquet/diagnostics.hpp"
#include "floquet/errors.hpp"
#include "floquet/fft.hpp"
#include "floquet/grid.hpp"
#include "floquet/params.hpp"
#include "floquet/random.hpp"
#include "floquet/schedule.hpp"

namespace floquet {

// Largest resonance-free time step for the given grid, returned as an
// exact divisor of the drive period. Split-step temporal resonances sit
// where dt*q^2/2 crosses multiples of pi for a grid mode q, so the kinetic
// phase advance of the highest mode is kept below safety*pi. Coarser steps
// let roundoff-seeded resonant modes grow and can destroy even unperturbed
// runs within a few drive periods.
inline double default_dt(const Grid& grid, const FloquetParams& p,
                         double safety = 0.75) {
  const double q_max = kPi / grid.dx;
  const double dt_max = safety * 2.0 * kPi / (q_max * q_max);
  const double period = p.drive_period();
  return period / std::ceil(period / dt_max);
}

// Adds independent complex Gaussian noise per grid point with standard
// deviation epsilon*max|psi| per real component. Deterministic for a fixed
// seed; epsilon = 0 leaves the field untouched.
inline WaveField add_white_noise(WaveField f, double epsilon, std::uint64_t seed) {
  if (epsilon < 0.0)
    throw std::invalid_argument("add_white_noise: epsilon must be >= 0");
  if (epsilon == 0.0) return f;
  double peak = 0.0;
  for (const auto& v : f.values) peak = std::max(peak, std::abs(v));
  const double sigma = epsilon * peak;
  GaussianRng rng(seed);
  for (auto& v : f.values) v += std::complex<double>(sigma * rng(), sigma * rng());
  return f;
}

// Strang split-step integrator for
//   i psi_t = -1/2 psi_xx + [g1d |psi|^2 + V(x,t)] psi
// on a periodic grid: a half step of the local nonlinear-plus-potential
// phase with V frozen at the interval midpoint, a full kinetic step in
// spectral space, and the second local half step. The instance caches the
// lattice profile and kinetic phase factors; it is not thread-safe, use one
// per concurrent evolution.
class Stepper {
 public:
  Stepper(const Grid& grid, const FloquetParams& params, const RampSchedule& schedule)
      : grid_(grid),
        params_(params),
        schedule_(schedule),
        fft_(grid.n),
        cos_kx_(grid.n),
        half_qsq_(grid.n),
        kinetic_(grid.n),
        v_mid_(grid.n) {
    for (int j = 0; j < grid.n; ++j) {
      cos_kx_[j] = std::cos(params.k * grid.x(j));
      const double q = grid.wavenumber(j);
      half_qsq_[j] = 0.5 * q * q;
    }
  }

  const Grid& grid() const { return grid_; }

  // Advances the field by dt (dt < 0 steps backward). Throws NonFiniteField
  // when the result contains NaN or Inf.
  void step(WaveField& f, double dt) {
    if (dt == 0.0) throw std::invalid_argument("Stepper::step: dt must be nonzero");
    const double tm = f.t + 0.5 * dt;
    const double a = schedule_.amplitude(tm);
    const double ratio = (params_.V0 != 0.0) ? params_.V1 / params_.V0 : 0.0;
    const double cos_wt = std::cos(params_.omega * tm);
    for (int j = 0; j < grid_.n; ++j) {
      const double c = cos_kx_[j];
      v_mid_[j] = a * (c * c + ratio * c * cos_wt);
    }

    local_half_step(f, dt);
    if (dt != kinetic_dt_) {
      for (int j = 0; j < grid_.n; ++j)
        kinetic_[j] = std::polar(1.0, -half_qsq_[j] * dt);
      kinetic_dt_ = dt;
    }
    fft_.forward(f.values);
    for (int j = 0; j < grid_.n; ++j) f.values[j] *= kinetic_[j];
    fft_.inverse(f.values);
    local_half_step(f, dt);

    f.t += dt;
    double probe = 0.0;
    for (const auto& v : f.values) probe += v.real() + v.imag();
    if (!std::isfinite(probe))
      throw NonFiniteField("field became non-finite at t = " + std::to_string(f.t), f.t);
  }

 private:
  void local_half_step(WaveField& f, double dt) {
    const double half = 0.5 * dt;
    for (int j = 0; j < grid_.n; ++j) {
      const double local = params_.g1d * std::norm(f.values[j]) + v_mid_[j];
      f.values[j] *= std::polar(1.0, -local * half);
    }
  }

  Grid grid_;
  FloquetParams params_;
  RampSchedule schedule_;
  Fft fft_;
  std::vector<double> cos_kx_;
  std::vector<double> half_qsq_;
  std::vector<std::complex<double>> kinetic_;
  std::vector<double> v_mid_;
  double kinetic_dt_ = std::numeric_limits<double>::quiet_NaN();
};

// One Strang step as a standalone operation.
inline WaveField step(WaveField f, double dt, const FloquetParams& p,
                      const RampSchedule& s) {
  Stepper stepper(f.grid, p, s);
  stepper.step(f, dt);
  return f;
}

struct EvolveObservers {
  // Sampling interval for the diagnostics trace; 0 disables sampling.
  double sample_interval = 0.0;
  // Optional reference state for fidelity / density-deviation columns.
  std::function<WaveField(double)> reference;
  // Optional snapshot hook, called at every sample.
  std::function<void(const WaveField&)> on_sample;
};

// Repeated stepping with per-interval observer sampling; the last step is
// shortened to land exactly on t_end. On blow-up the failure time is
// recorded in the trace and NonFiniteField propagates.
inline WaveField evolve(WaveField f, double t_end, double dt,
                        const FloquetParams& p, const RampSchedule& s,
                        const EvolveObservers& obs, DiagnosticsTrace& trace) {
  if (!(dt > 0.0)) throw std::invalid_argument("evolve: dt must be positive");
  if (t_end < f.t) throw std::invalid_argument("evolve: t_end precedes field time");

  const auto sample = [&](const WaveField& field) {
    if (!trace.times.empty() &&
        std::abs(trace.times.back() - field.t) < 1e-9 * std::max(1.0, std::abs(field.t)))
      return;
    trace.times.push_back(field.t);
    trace.norm.push_back(conserved_norm(field));
    const UniformityStats u = density_uniformity(field);
    trace.mean_density.push_back(u.mean);
    trace.spread.push_back(u.relative_spread);
    if (obs.reference) {
      const WaveField ref = obs.reference(field.t);
      trace.fidelity.push_back(fidelity(field, ref));
      trace.max_density_dev.push_back(max_density_deviation(field, ref));
    } else {
      trace.fidelity.push_back(std::numeric_limits<double>::quiet_NaN());
      trace.max_density_dev.push_back(std::numeric_limits<double>::quiet_NaN());
    }
    if (obs.on_sample) obs.on_sample(field);
  };

  Stepper stepper(f.grid, p, s);
  const bool sampling = obs.sample_interval > 0.0;
  if (sampling) sample(f);
  double next_sample = f.t + (sampling ? obs.sample_interval : 0.0);

  const double eps = 1e-12 * std::max(1.0, std::abs(t_end));
  try {
    while (f.t < t_end - eps) {
      const double h = std::min(dt, t_end - f.t);
      stepper.step(f, h);
      if (sampling && f.t >= next_sample - eps) {
        sample(f);
        while (next_sample <= f.t + eps) next_sample += obs.sample_interval;
      }
    }
  } catch (const NonFiniteField& e) {
    trace.blowup_time = e.failure_time();
    throw;
  }
  if (sampling) sample(f);
  return f;
}

}  // namespace floquet
