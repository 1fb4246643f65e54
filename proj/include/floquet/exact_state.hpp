#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <vector>

#include "floquet/errors.hpp"
#include "floquet/grid.hpp"
#include "floquet/params.hpp"

namespace floquet {

// Closed-form evaluation of the exact Floquet state and its derived fields.
//
// The state is psi(x,t) = [a + c_amp*cos(kx)*exp(-i*omega*t)] * exp(-i*EF*t)
// with a = sqrt(EF/g1d), c_amp = -alpha*sign(g1d)*sqrt(-V0/g1d). The sign of
// the standing-wave amplitude is fixed by requiring the balance identity
// g1d*|psi|^2 + V0*cos^2(kx) + V1*cos(kx)*cos(omega*t) = EF to hold exactly
// with V1 = 2*alpha*sqrt(-EF*V0).

namespace detail {

struct StateAmplitudes {
  double a;      // uniform background sqrt(EF/g1d)
  double c_amp;  // standing-wave coefficient
};

inline StateAmplitudes amplitudes(const FloquetParams& p) {
  const double a = std::sqrt(std::max(0.0, p.EF / p.g1d));
  const double bc = std::sqrt(std::max(0.0, -p.V0 / p.g1d));
  const double sign_g = (p.g1d > 0.0) ? 1.0 : -1.0;
  return {a, -p.alpha * sign_g * bc};
}

}  // namespace detail

inline std::complex<double> psi_exact(double x, double t, const FloquetParams& p) {
  const auto [a, c_amp] = detail::amplitudes(p);
  const double c = std::cos(p.k * x);
  const std::complex<double> drive{std::cos(p.omega * t), -std::sin(p.omega * t)};
  const std::complex<double> bracket = a + c_amp * c * drive;
  const std::complex<double> floquet{std::cos(p.EF * t), -std::sin(p.EF * t)};
  return bracket * floquet;
}

// Analytic d(psi)/dt, used as the time-derivative oracle when checking the
// equation residual spectrally.
inline std::complex<double> psi_exact_dt(double x, double t, const FloquetParams& p) {
  const auto [a, c_amp] = detail::amplitudes(p);
  const double c = std::cos(p.k * x);
  const std::complex<double> i_unit{0.0, 1.0};
  const std::complex<double> drive{std::cos(p.omega * t), -std::sin(p.omega * t)};
  const std::complex<double> bracket = a + c_amp * c * drive;
  const std::complex<double> bracket_dt = -i_unit * p.omega * c_amp * c * drive;
  const std::complex<double> floquet{std::cos(p.EF * t), -std::sin(p.EF * t)};
  return (bracket_dt - i_unit * p.EF * bracket) * floquet;
}

// Atomic-number density R^2 = (EF - V0*cos^2(kx) - V1*cos(kx)*cos(omega*t))/g1d.
inline double density(double x, double t, const FloquetParams& p) {
  const double c = std::cos(p.k * x);
  return (p.EF - p.V0 * c * c - p.V1 * c * std::cos(p.omega * t)) / p.g1d;
}

inline double density_dx(double x, double t, const FloquetParams& p) {
  const double c = std::cos(p.k * x);
  return p.k * std::sin(p.k * x) * (2.0 * p.V0 * c + p.V1 * std::cos(p.omega * t)) / p.g1d;
}

inline double density_dt(double x, double t, const FloquetParams& p) {
  const double c = std::cos(p.k * x);
  return p.V1 * c * p.omega * std::sin(p.omega * t) / p.g1d;
}

// Spatial mean of the density (independent of t on commensurate domains).
inline double density_mean(const FloquetParams& p) {
  return (p.EF - 0.5 * p.V0) / p.g1d;
}

// Flow density J = R^2 * theta_x; finite everywhere, proportional to V1.
inline double flow_density(double x, double t, const FloquetParams& p) {
  return -p.k * p.V1 * std::sin(p.k * x) * std::sin(p.omega * t) / (2.0 * p.g1d);
}

inline double flow_density_dx(double x, double t, const FloquetParams& p) {
  return -p.k * p.k * p.V1 * std::cos(p.k * x) * std::sin(p.omega * t) / (2.0 * p.g1d);
}

// Numerator of the drive part of theta_t: theta_t = chi/R^2 - EF with
// chi = omega*(V1*cos(kx)*cos(omega*t)/2 + V0*cos^2(kx))/g1d.
inline double theta_t_numerator(double x, double t, const FloquetParams& p) {
  const double c = std::cos(p.k * x);
  return p.omega * (0.5 * p.V1 * c * std::cos(p.omega * t) + p.V0 * c * c) / p.g1d;
}

namespace detail {
// Density below this threshold is treated as a zero-density node.
inline double node_density_tol(const FloquetParams& p) {
  return 1e-12 * p.density_scale();
}
}  // namespace detail

struct PhaseOptions {
  // Remove the overall exp(-i*EF*t) contribution (field maps usually do).
  bool remove_floquet_term = false;
  // Lift the principal arctangent to a branch continuous in t at fixed x.
  bool lift = true;
};

// Phase of the exact state. Returns nullopt at zero-density nodes, where
// the phase is undefined, so field maps remain total.
inline std::optional<double> phase(double x, double t, const FloquetParams& p,
                                   PhaseOptions opts = {}) {
  const double rho = density(x, t, p);
  if (std::abs(rho) <= detail::node_density_tol(p)) return std::nullopt;
  const auto [a, c_amp] = detail::amplitudes(p);
  const double c = std::cos(p.k * x);
  const double re = a + c_amp * c * std::cos(p.omega * t);
  const double im = -c_amp * c * std::sin(p.omega * t);
  double theta = std::atan2(im, re);
  if (opts.lift) {
    // The bracket traces a circle of radius |c_amp*c| around a once per
    // drive period. When the circle encloses the origin the principal
    // branch wraps once per period at t_m = m*pi/omega; each wrap crosses
    // the negative real axis going upward, so the lifted branch loses 2*pi.
    const double cc = c_amp * c;
    const bool cross_even = a + cc < 0.0;  // crossings with cos(omega*t) = +1
    const bool cross_odd = a - cc < 0.0;   // crossings with cos(omega*t) = -1
    if (cross_even || cross_odd) {
      const auto crossing_at = [&](long m) {
        return (std::labs(m) % 2 == 0) ? cross_even : cross_odd;
      };
      const double s = t * p.omega / kPi;
      const long m_near = std::lround(s);
      // A sample landing numerically on a wrap instant sits on either side
      // of the cut depending on rounding in sin(omega*t); let the sign of
      // the principal value decide which side the count follows.
      const bool on_wrap = std::abs(s - m_near) < 1e-9 && crossing_at(m_near);
      long wraps = 0;
      if (t >= 0.0) {
        long m_last;
        if (on_wrap && m_near >= 1)
          m_last = m_near - (theta < 0.0 ? 1 : 0);
        else
          m_last = static_cast<long>(std::floor(s + 1e-12));
        if (m_last >= 1) {
          const long n_odd = (m_last + 1) / 2;
          const long n_even = m_last / 2;
          wraps = -(n_odd * (cross_odd ? 1 : 0) + n_even * (cross_even ? 1 : 0));
        }
      } else {
        long m_first;
        if (on_wrap && m_near <= -1)
          m_first = m_near + (theta < 0.0 ? 0 : 1);
        else
          m_first = static_cast<long>(std::ceil(s - 1e-12));
        if (m_first <= -1) {
          const long count = -m_first;  // crossings in (t, 0)
          const long n_odd = (count + 1) / 2;
          const long n_even = count / 2;
          wraps = n_odd * (cross_odd ? 1 : 0) + n_even * (cross_even ? 1 : 0);
        }
      }
      theta += 2.0 * kPi * wraps;
    }
  }
  if (!opts.remove_floquet_term) theta -= p.EF * t;
  return theta;
}

struct GradientValue {
  double value = 0.0;
  bool divergent = false;
};

// Phase gradient theta_x = J/R^2. At zero-density nodes with
// sin(k*x) != 0 the gradient diverges and is reported as an in-band tag;
// at nodes with sin(k*x) = 0 the limit along t is zero.
inline GradientValue phase_gradient(double x, double t, const FloquetParams& p) {
  const double rho = density(x, t, p);
  const double sin_kx = std::sin(p.k * x);
  if (std::abs(rho) <= detail::node_density_tol(p)) {
    if (std::abs(sin_kx) < 1e-7) return {0.0, false};
    return {std::numeric_limits<double>::infinity(), true};
  }
  return {flow_density(x, t, p) / rho, false};
}

// Spatiotemporal zero-density node (vortex core candidate).
struct VortexNode {
  double x = 0.0;
  double t = 0.0;
  int n = 0;       // node time index, t = n*pi/omega
  int l = 0;       // lattice-period offset
  int branch = 0;  // +1 or -1, arccos branch
  int charge = 0;  // winding charge, +1 or -1
};

// All zero-density nodes with time index 0..n_max and position inside
// [x_min, x_max). Only phase-jumping parameters have vortex nodes: in the
// other regions (including the boundary, where the would-be nodes have
// sin(k*x) = 0 and carry no phase jump) the list is empty.
inline std::vector<VortexNode> vortex_nodes(const FloquetParams& p, int n_max,
                                            double x_min, double x_max) {
  std::vector<VortexNode> nodes;
  if (classify_region(p) != Region::PhaseJumping) return nodes;
  const double period_x = 2.0 * kPi / p.k;
  const double sign_g = (p.g1d > 0.0) ? 1.0 : -1.0;
  for (int n = 0; n <= n_max; ++n) {
    const double cos_n = (n % 2 == 0) ? 1.0 : -1.0;
    const double u = -p.V1 * cos_n / (2.0 * p.V0);
    if (std::abs(u) >= 1.0) continue;  // |V1/(2V0)| < 1 in the jumping region
    const double t_n = n * kPi / p.omega;
    const double x_base = std::acos(u) / p.k;
    for (int branch : {+1, -1}) {
      const double x0 = branch * x_base;
      const int l_lo = static_cast<int>(std::ceil((x_min - x0) / period_x - 1e-12));
      const int l_hi = static_cast<int>(std::floor((x_max - x0) / period_x - 1e-12));
      for (int l = l_lo; l <= l_hi; ++l) {
        VortexNode node;
        node.x = x0 + l * period_x;
        if (node.x < x_min || node.x >= x_max) continue;
        node.t = t_n;
        node.n = n;
        node.l = l;
        node.branch = branch;
        node.charge = static_cast<int>(branch * p.alpha * sign_g * cos_n);
        nodes.push_back(node);
      }
    }
  }
  std::sort(nodes.begin(), nodes.end(), [](const VortexNode& a, const VortexNode& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.x < b.x;
  });
  return nodes;
}

struct WindingOptions {
  double half_width_x = 0.0;  // 0 selects the default 0.1/k
  double half_width_t = 0.0;  // 0 selects the default 0.1/omega
  int samples_per_side = 400;
  bool remove_floquet_term = false;
};

// Accumulated phase around a counterclockwise rectangle in the (x, t)
// plane, divided by 2*pi and rounded. Throws LoopAmbiguous when the
// accumulated phase is not within 0.1*2*pi of an integer multiple.
inline int winding_number(const FloquetParams& p, double x0, double t0,
                          WindingOptions opts = {}) {
  const double hx = (opts.half_width_x > 0.0) ? opts.half_width_x : 0.1 / p.k;
  const double ht = (opts.half_width_t > 0.0) ? opts.half_width_t : 0.1 / p.omega;
  const int m = std::max(opts.samples_per_side, 4);
  const PhaseOptions popts{opts.remove_floquet_term, false};

  std::vector<std::pair<double, double>> loop;
  loop.reserve(4 * m);
  for (int i = 0; i < m; ++i) {  // bottom: left -> right
    loop.emplace_back(x0 - hx + 2.0 * hx * i / m, t0 - ht);
  }
  for (int i = 0; i < m; ++i) {  // right: bottom -> top
    loop.emplace_back(x0 + hx, t0 - ht + 2.0 * ht * i / m);
  }
  for (int i = 0; i < m; ++i) {  // top: right -> left
    loop.emplace_back(x0 + hx - 2.0 * hx * i / m, t0 + ht);
  }
  for (int i = 0; i < m; ++i) {  // left: top -> bottom
    loop.emplace_back(x0 - hx, t0 + ht - 2.0 * ht * i / m);
  }

  double accumulated = 0.0;
  std::optional<double> first, prev;
  for (const auto& [x, t] : loop) {
    const auto th = phase(x, t, p, popts);
    if (!th)
      throw LoopAmbiguous("winding_number: loop sample fell on a zero-density point");
    if (prev) accumulated += std::remainder(*th - *prev, 2.0 * kPi);
    else first = th;
    prev = th;
  }
  accumulated += std::remainder(*first - *prev, 2.0 * kPi);

  const double w = accumulated / (2.0 * kPi);
  const double nearest = std::round(w);
  if (std::abs(w - nearest) > 0.1)
    throw LoopAmbiguous("winding_number: accumulated phase " + std::to_string(w) +
                        "*2*pi is not close to an integer (under-sampled loop or "
                        "multiple nodes enclosed)");
  return static_cast<int>(nearest);
}

inline WaveField sample_exact(const FloquetParams& p, const Grid& grid, double t) {
  WaveField f = make_field(grid, t);
  for (int j = 0; j < grid.n; ++j) f.values[j] = psi_exact(grid.x(j), t, p);
  return f;
}

}  // namespace floquet
