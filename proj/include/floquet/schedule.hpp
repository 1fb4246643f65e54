#pragma once

#include <cmath>
#include <stdexcept>

#include "floquet/params.hpp"

namespace floquet {

enum class RampKind { Constant, LinearUp, LinearDown };

inline const char* to_string(RampKind k) {
  switch (k) {
    case RampKind::Constant: return "constant";
    case RampKind::LinearUp: return "linear_up";
    case RampKind::LinearDown: return "linear_down";
  }
  return "constant";
}

// Amplitude schedule A(t) of the external potential. A is continuous,
// linear on [0, t_ramp] and equal to A_end for t >= t_ramp.
struct RampSchedule {
  RampKind kind = RampKind::Constant;
  double t_ramp = 0.0;
  double A_start = 0.0;
  double A_end = 0.0;

  double amplitude(double t) const {
    if (kind == RampKind::Constant || t_ramp <= 0.0 || t >= t_ramp) return A_end;
    if (t <= 0.0) return A_start;
    return A_start + (A_end - A_start) * (t / t_ramp);
  }

  static RampSchedule constant(double amplitude) {
    return {RampKind::Constant, 0.0, amplitude, amplitude};
  }

  static RampSchedule linear(double a_start, double a_end, double t_ramp) {
    const RampKind kind = (std::abs(a_end) >= std::abs(a_start))
                              ? RampKind::LinearUp
                              : RampKind::LinearDown;
    return {kind, t_ramp, a_start, a_end};
  }
};

// Time-dependent external potential
//   V(x,t) = A(t) * [cos^2(kx) + (V1/V0)*cos(kx)*cos(omega*t)].
// With a constant A = V0 this reduces to the exact-state potential
// V0*cos^2(kx) + V1*cos(kx)*cos(omega*t); for balanced parameters with
// V0 = 0 the drive vanishes too (V1 = 0), so the ratio is taken as zero.
inline double potential(double x, double t, const FloquetParams& p,
                        const RampSchedule& s) {
  const double a = s.amplitude(t);
  const double c = std::cos(p.k * x);
  const double ratio = (p.V0 != 0.0) ? p.V1 / p.V0 : 0.0;
  return a * (c * c + ratio * c * std::cos(p.omega * t));
}

}  // namespace floquet
