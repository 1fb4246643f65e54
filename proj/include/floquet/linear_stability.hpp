#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "floquet/errors.hpp"
#include "floquet/exact_state.hpp"
#include "floquet/fft.hpp"
#include "floquet/grid.hpp"
#include "floquet/params.hpp"
#include "floquet/random.hpp"
#include "floquet/solver.hpp"

namespace floquet {

// Real/imaginary perturbation pair around the exact Floquet state,
// psi = [R + eps*(phi + i*vphi)] * exp(i*theta).
struct PerturbationField {
  Grid grid;
  double t = 0.0;
  std::vector<double> phi;   // real part
  std::vector<double> vphi;  // imaginary part
};

inline PerturbationField make_perturbation(const Grid& grid, double t = 0.0) {
  return {grid, t, std::vector<double>(grid.n, 0.0), std::vector<double>(grid.n, 0.0)};
}

// Seeded band-limited random field: unit-normalized sum of the lowest
// Fourier modes with random amplitudes and phases in both components.
inline PerturbationField random_smooth_perturbation(const Grid& grid, int mode_cutoff,
                                                    std::uint64_t seed) {
  PerturbationField p = make_perturbation(grid);
  GaussianRng rng(seed);
  for (auto* comp : {&p.phi, &p.vphi}) {
    for (int m = 1; m <= mode_cutoff; ++m) {
      const double q = 2.0 * kPi * m / grid.length();
      const double amp = rng();
      const double shift = 2.0 * kPi * rng.uniform();
      for (int j = 0; j < grid.n; ++j)
        (*comp)[j] += amp * std::cos(q * grid.x(j) + shift);
    }
  }
  double peak = 0.0;
  for (int j = 0; j < grid.n; ++j)
    peak = std::max(peak, std::hypot(p.phi[j], p.vphi[j]));
  if (peak > 0.0) {
    for (int j = 0; j < grid.n; ++j) {
      p.phi[j] /= peak;
      p.vphi[j] /= peak;
    }
  }
  return p;
}

// Gaussian bump in the real component, zero imaginary component.
inline PerturbationField gaussian_bump_perturbation(const Grid& grid, double center,
                                                    double width) {
  PerturbationField p = make_perturbation(grid);
  for (int j = 0; j < grid.n; ++j) {
    const double d = grid.x(j) - center;
    p.phi[j] = std::exp(-0.5 * d * d / (width * width));
  }
  return p;
}

struct MaskPolicy {
  bool enabled = false;      // clamp singular coefficients instead of throwing
  double rel_floor = 1e-6;   // density floor relative to the global maximum
};

// Coefficient fields of the linearized equations around the exact state,
//   L_j = -1/2 [d^2/dx^2 - theta_x^2] + j*g1d*R^2 + V + theta_t,
//   S   =  1/2 [2*theta_x d/dx + theta_xx],
// with theta the total phase (including the -EF*t factor). The coefficients
// are singular at zero-density nodes: with masking disabled any affected
// grid point raises SingularCoefficient; with masking enabled the density
// entering theta_x, theta_xx and theta_t is clamped to the floor and the
// point is counted. Instances hold scratch buffers and are not thread-safe;
// use one per concurrent run.
class StabilityOperators {
 public:
  StabilityOperators(const FloquetParams& params, const Grid& grid, MaskPolicy mask = {})
      : params_(params),
        grid_(grid),
        mask_(mask),
        fft_(grid.n),
        floor_abs_(mask.rel_floor * params.density_scale()) {}

  const FloquetParams& params() const { return params_; }
  const Grid& grid() const { return grid_; }
  const MaskPolicy& mask() const { return mask_; }

  struct Coefficients {
    std::vector<double> theta_x, theta_xx, theta_t, V, R2, R;
    int masked = 0;
  };

  Coefficients coefficients(double t) const {
    Coefficients c;
    const int n = grid_.n;
    c.theta_x.resize(n);
    c.theta_xx.resize(n);
    c.theta_t.resize(n);
    c.V.resize(n);
    c.R2.resize(n);
    c.R.resize(n);
    for (int j = 0; j < n; ++j) {
      const double x = grid_.x(j);
      const double rho = density(x, t, params_);
      double rho_eff = rho;
      if (rho < floor_abs_) {
        ++c.masked;
        rho_eff = floor_abs_;
      }
      const double flow = flow_density(x, t, params_);
      c.theta_x[j] = flow / rho_eff;
      c.theta_xx[j] = flow_density_dx(x, t, params_) / rho_eff -
                      flow * density_dx(x, t, params_) / (rho_eff * rho_eff);
      c.theta_t[j] = theta_t_numerator(x, t, params_) / rho_eff - params_.EF;
      const double ckx = std::cos(params_.k * x);
      c.V[j] = params_.V0 * ckx * ckx +
               params_.V1 * ckx * std::cos(params_.omega * t);
      c.R2[j] = std::max(rho, 0.0);
      c.R[j] = std::sqrt(c.R2[j]);
    }
    if (c.masked > 0 && !mask_.enabled)
      throw SingularCoefficient(
          std::to_string(c.masked) + " grid points inside the zero-density " +
          "neighborhood of a vortex node at t = " + std::to_string(t));
    return c;
  }

  // L_j f with a spectral second derivative, j in {1, 3}.
  std::vector<double> apply_L(int j, std::span<const double> f, double t) const {
    if (j != 1 && j != 3)
      throw std::invalid_argument("apply_L: j must be 1 or 3");
    const Coefficients c = coefficients(t);
    return apply_L(j, f, c);
  }

  std::vector<double> apply_L(int j, std::span<const double> f,
                              const Coefficients& c) const {
    check_size(f.size());
    const std::vector<double> fxx = second_derivative(f);
    std::vector<double> out(grid_.n);
    for (int i = 0; i < grid_.n; ++i) {
      out[i] = -0.5 * (fxx[i] - c.theta_x[i] * c.theta_x[i] * f[i]) +
               j * params_.g1d * c.R2[i] * f[i] + c.V[i] * f[i] + c.theta_t[i] * f[i];
    }
    return out;
  }

  std::vector<double> apply_S(std::span<const double> f, double t) const {
    const Coefficients c = coefficients(t);
    return apply_S(f, c);
  }

  std::vector<double> apply_S(std::span<const double> f, const Coefficients& c) const {
    check_size(f.size());
    const std::vector<double> fx = first_derivative(f);
    std::vector<double> out(grid_.n);
    for (int i = 0; i < grid_.n; ++i)
      out[i] = c.theta_x[i] * fx[i] + 0.5 * c.theta_xx[i] * f[i];
    return out;
  }

  std::vector<double> first_derivative(std::span<const double> f) const {
    return real_derivative(f, 1);
  }

  std::vector<double> second_derivative(std::span<const double> f) const {
    return real_derivative(f, 2);
  }

  // Fused right-hand side of the linearized system,
  //   dphi  =  L1 vphi - S phi,
  //   dvphi = -(L3 phi + S vphi),
  // taking both spectral derivatives of each component from a single
  // forward transform. Same arithmetic as the apply_L/apply_S composition.
  void apply_rhs(std::span<const double> phi, std::span<const double> vphi,
                 const Coefficients& c, std::vector<double>& dphi,
                 std::vector<double>& dvphi) const {
    check_size(phi.size());
    check_size(vphi.size());
    const int n = grid_.n;
    derivative_pair(phi, dx_a_, dxx_a_);
    derivative_pair(vphi, dx_b_, dxx_b_);
    dphi.resize(n);
    dvphi.resize(n);
    for (int j = 0; j < n; ++j) {
      const double tx = c.theta_x[j];
      const double local1 = params_.g1d * c.R2[j] + c.V[j] + c.theta_t[j];
      const double l1_vphi =
          -0.5 * (dxx_b_[j] - tx * tx * vphi[j]) + local1 * vphi[j];
      const double l3_phi = -0.5 * (dxx_a_[j] - tx * tx * phi[j]) +
                            (local1 + 2.0 * params_.g1d * c.R2[j]) * phi[j];
      const double s_phi = tx * dx_a_[j] + 0.5 * c.theta_xx[j] * phi[j];
      const double s_vphi = tx * dx_b_[j] + 0.5 * c.theta_xx[j] * vphi[j];
      dphi[j] = l1_vphi - s_phi;
      dvphi[j] = -(l3_phi + s_vphi);
    }
  }

  // 2/3-rule truncation. The variable-coefficient products alias near the
  // Nyquist scale and pump those modes parametrically through the periodic
  // coefficients; zeroing the top third of the spectrum removes the
  // spurious coupling without touching resolved structure.
  void dealias(std::vector<double>& f) const {
    check_size(f.size());
    scratch_.assign(f.begin(), f.end());
    fft_.forward(scratch_);
    const double q_cut = 2.0 / 3.0 * kPi / grid_.dx;
    for (int j = 0; j < grid_.n; ++j) {
      if (std::abs(grid_.wavenumber(j)) > q_cut) scratch_[j] = 0.0;
    }
    fft_.inverse(scratch_);
    for (int j = 0; j < grid_.n; ++j) f[j] = scratch_[j].real();
  }

 private:
  void check_size(std::size_t m) const {
    if (static_cast<int>(m) != grid_.n)
      throw std::invalid_argument("StabilityOperators: field size mismatch");
  }

  std::vector<double> real_derivative(std::span<const double> f, int order) const {
    scratch_.assign(f.begin(), f.end());
    fft_.forward(scratch_);
    for (int j = 0; j < grid_.n; ++j) {
      const double q = grid_.wavenumber(j);
      if (order == 1) {
        scratch_[j] *= std::complex<double>(0.0, q);
        if (j == grid_.n / 2) scratch_[j] = 0.0;
      } else {
        scratch_[j] *= -q * q;
      }
    }
    fft_.inverse(scratch_);
    std::vector<double> out(grid_.n);
    for (int j = 0; j < grid_.n; ++j) out[j] = scratch_[j].real();
    return out;
  }

  // First and second derivative from one forward transform.
  void derivative_pair(std::span<const double> f, std::vector<double>& fx,
                       std::vector<double>& fxx) const {
    const int n = grid_.n;
    scratch_.assign(f.begin(), f.end());
    fft_.forward(scratch_);
    scratch2_.resize(n);
    for (int j = 0; j < n; ++j) {
      const double q = grid_.wavenumber(j);
      scratch2_[j] = scratch_[j] * std::complex<double>(0.0, q);
      if (j == n / 2) scratch2_[j] = 0.0;
      scratch_[j] *= -q * q;
    }
    fft_.inverse(scratch_);
    fft_.inverse(scratch2_);
    fx.resize(n);
    fxx.resize(n);
    for (int j = 0; j < n; ++j) {
      fx[j] = scratch2_[j].real();
      fxx[j] = scratch_[j].real();
    }
  }

  FloquetParams params_;
  Grid grid_;
  MaskPolicy mask_;
  Fft fft_;
  double floor_abs_;
  mutable std::vector<std::complex<double>> scratch_;
  mutable std::vector<std::complex<double>> scratch2_;
  mutable std::vector<double> dx_a_, dxx_a_, dx_b_, dxx_b_;
};

// Stable explicit step for the coupled system: the spectral Laplacian
// dominates the spectrum, so the classical 4th-order scheme needs
// dt <= 2*sqrt(2) / (q_max^2/2); a safety factor keeps a margin for the
// bounded potential-like coefficients.
inline double stable_perturbation_dt(const Grid& grid, double safety = 0.7) {
  const double q_max = kPi / grid.dx;
  return safety * 2.0 * std::sqrt(2.0) / (0.5 * q_max * q_max);
}

struct BlowupReport {
  enum class Reason { None, Amplitude, NonFinite };
  bool flagged = false;
  double time = std::numeric_limits<double>::quiet_NaN();
  Reason reason = Reason::None;
};

struct PerturbationTrace {
  std::vector<double> times;
  std::vector<double> max_norm;  // max_x ||psi_1||
  std::vector<double> l2_norm;   // sqrt(int ||psi_1||^2 dx)
  std::vector<int> masked_points;
  BlowupReport blowup;
};

struct PerturbationRunOptions {
  double blowup_threshold = 1e6;  // amplification of max||psi_1|| that flags blow-up
  double sample_interval = 0.0;   // 0 disables trace sampling
};

struct PerturbationResult {
  PerturbationField field;
  PerturbationTrace trace;
};

// Classical 4th-order explicit integration of
//   phi_t  =  L1 vphi - S phi,
//   vphi_t = -(L3 phi + S vphi),
// with coefficients evaluated at the stage times. Raises the blow-up flag
// when max||psi_1|| exceeds blowup_threshold times its initial value or the
// field stops being finite; the crossing time is recorded and the evolution
// stops there.
inline PerturbationResult evolve_perturbation(PerturbationField p, double t_end,
                                              double dt, const StabilityOperators& ops,
                                              PerturbationRunOptions opts = {}) {
  if (!(dt > 0.0))
    throw std::invalid_argument("evolve_perturbation: dt must be positive");
  if (t_end < p.t)
    throw std::invalid_argument("evolve_perturbation: t_end precedes field time");
  if (!(p.grid == ops.grid()))
    throw GridMismatch("evolve_perturbation: field grid differs from operator grid");

  const int n = p.grid.n;
  const auto max_norm = [&](const PerturbationField& f) {
    double m = 0.0;
    for (int j = 0; j < n; ++j) m = std::max(m, std::hypot(f.phi[j], f.vphi[j]));
    return m;
  };
  const auto l2_norm = [&](const PerturbationField& f) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += f.phi[j] * f.phi[j] + f.vphi[j] * f.vphi[j];
    return std::sqrt(s * f.grid.dx);
  };

  PerturbationTrace trace;
  const double initial_max = max_norm(p);
  int last_masked = 0;
  const auto sample = [&](const PerturbationField& f) {
    if (!trace.times.empty() && trace.times.back() == f.t) return;
    trace.times.push_back(f.t);
    trace.max_norm.push_back(max_norm(f));
    trace.l2_norm.push_back(l2_norm(f));
    trace.masked_points.push_back(last_masked);
  };

  struct Deriv {
    std::vector<double> dphi, dvphi;
  };
  const auto rhs = [&](const std::vector<double>& phi, const std::vector<double>& vphi,
                       const StabilityOperators::Coefficients& c) {
    last_masked = std::max(last_masked, c.masked);
    Deriv d;
    ops.apply_rhs(phi, vphi, c, d.dphi, d.dvphi);
    return d;
  };

  const bool sampling = opts.sample_interval > 0.0;
  if (sampling) sample(p);
  double next_sample = p.t + (sampling ? opts.sample_interval : 0.0);
  const double eps = 1e-12 * std::max(1.0, std::abs(t_end));

  std::vector<double> phi2(n), vphi2(n);
  while (p.t < t_end - eps) {
    const double h = std::min(dt, t_end - p.t);
    last_masked = 0;
    const auto c_start = ops.coefficients(p.t);
    const auto c_mid = ops.coefficients(p.t + 0.5 * h);  // shared by k2 and k3
    const auto c_end = ops.coefficients(p.t + h);
    const Deriv k1 = rhs(p.phi, p.vphi, c_start);
    for (int j = 0; j < n; ++j) {
      phi2[j] = p.phi[j] + 0.5 * h * k1.dphi[j];
      vphi2[j] = p.vphi[j] + 0.5 * h * k1.dvphi[j];
    }
    const Deriv k2 = rhs(phi2, vphi2, c_mid);
    for (int j = 0; j < n; ++j) {
      phi2[j] = p.phi[j] + 0.5 * h * k2.dphi[j];
      vphi2[j] = p.vphi[j] + 0.5 * h * k2.dvphi[j];
    }
    const Deriv k3 = rhs(phi2, vphi2, c_mid);
    for (int j = 0; j < n; ++j) {
      phi2[j] = p.phi[j] + h * k3.dphi[j];
      vphi2[j] = p.vphi[j] + h * k3.dvphi[j];
    }
    const Deriv k4 = rhs(phi2, vphi2, c_end);
    for (int j = 0; j < n; ++j) {
      p.phi[j] += h / 6.0 * (k1.dphi[j] + 2.0 * k2.dphi[j] + 2.0 * k3.dphi[j] + k4.dphi[j]);
      p.vphi[j] +=
          h / 6.0 * (k1.dvphi[j] + 2.0 * k2.dvphi[j] + 2.0 * k3.dvphi[j] + k4.dvphi[j]);
    }
    ops.dealias(p.phi);
    ops.dealias(p.vphi);
    p.t += h;

    const double m = max_norm(p);
    if (!std::isfinite(m)) {
      trace.blowup.flagged = true;
      trace.blowup.time = p.t;
      trace.blowup.reason = BlowupReport::Reason::NonFinite;
      sample(p);
      break;
    }
    if (initial_max > 0.0 && m > opts.blowup_threshold * initial_max) {
      trace.blowup.flagged = true;
      trace.blowup.time = p.t;
      trace.blowup.reason = BlowupReport::Reason::Amplitude;
      sample(p);
      break;
    }
    if (sampling && p.t >= next_sample - eps) {
      sample(p);
      while (next_sample <= p.t + eps) next_sample += opts.sample_interval;
    }
  }
  if (sampling && !trace.blowup.flagged) sample(p);
  return {std::move(p), std::move(trace)};
}

// Ties the linearized evolution to the full equation: evolves the full
// dynamics from psi_exact + eps*psi_1 and from psi_exact, forms the
// finite-difference perturbation in the co-rotating frame, and returns its
// relative L2 deviation from the linearized evolution at t_probe. The
// deviation contracts to zero linearly in eps.
inline double linearization_consistency(double eps, const PerturbationField& init,
                                        const FloquetParams& params, double t_probe,
                                        double solver_dt = 0.0, double lin_dt = 0.0) {
  if (!(eps > 0.0))
    throw std::invalid_argument("linearization_consistency: eps must be positive");
  const Grid& grid = init.grid;
  if (solver_dt <= 0.0) solver_dt = default_dt(grid, params);
  if (lin_dt <= 0.0)
    lin_dt = std::min(0.25 * solver_dt, stable_perturbation_dt(grid));

  const PhaseOptions raw{false, false};
  const auto frame_phase = [&](double x, double t) {
    const auto th = phase(x, t, params, raw);
    if (!th)
      throw SingularCoefficient("linearization_consistency: node on the grid");
    return *th;
  };

  // perturbed and unperturbed full evolutions
  WaveField pert = sample_exact(params, grid, init.t);
  for (int j = 0; j < grid.n; ++j) {
    const std::complex<double> psi1(init.phi[j], init.vphi[j]);
    pert.values[j] += eps * psi1 * std::polar(1.0, frame_phase(grid.x(j), init.t));
  }
  WaveField unpert = sample_exact(params, grid, init.t);

  const RampSchedule lattice_on = RampSchedule::constant(params.V0);
  Stepper stepper_a(grid, params, lattice_on);
  Stepper stepper_b(grid, params, lattice_on);
  const double t_end = init.t + t_probe;
  while (pert.t < t_end - 1e-12) {
    const double h = std::min(solver_dt, t_end - pert.t);
    stepper_a.step(pert, h);
    stepper_b.step(unpert, h);
  }

  // linearized evolution of the same initial data
  StabilityOperators ops(params, grid);
  const PerturbationResult lin = evolve_perturbation(init, t_end, lin_dt, ops);

  double diff = 0.0, ref = 0.0;
  for (int j = 0; j < grid.n; ++j) {
    const std::complex<double> fd = (pert.values[j] - unpert.values[j]) *
                                    std::polar(1.0, -frame_phase(grid.x(j), pert.t)) /
                                    eps;
    const std::complex<double> lin_j(lin.field.phi[j], lin.field.vphi[j]);
    diff += std::norm(fd - lin_j);
    ref += std::norm(lin_j);
  }
  if (ref == 0.0) return std::sqrt(diff * grid.dx);
  return std::sqrt(diff / ref);
}

}  // namespace floquet
