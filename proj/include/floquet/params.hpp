#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "floquet/errors.hpp"

namespace floquet {

inline constexpr double kPi = std::numbers::pi;

// Default lattice wave vector. With k = pi/2 the standard domain
// x in [-4, 4) holds exactly two lattice periods 2*pi/k = 4.
inline constexpr double kDefaultWaveVector = kPi / 2.0;

// Physical parameter set of the driven condensate, hbar = m = 1.
//
// The drive frequency is always slaved to the wave vector (omega = k^2/2)
// and the driving strength to the balance condition V1 = 2*alpha*sqrt(-EF*V0),
// so feasible instances require EF/g1d >= 0 and V0/g1d <= 0. Instances are
// built through make_balanced_params and treated as immutable afterwards;
// they are safe to share across threads.
struct FloquetParams {
  double g1d = 1.0;    // quasi-1D interaction strength, nonzero
  double V0 = 0.0;     // lattice depth
  double V1 = 0.0;     // driving strength, derived
  double EF = 0.0;     // Floquet energy
  double k = kDefaultWaveVector;  // lattice wave vector, > 0
  double omega = 0.0;  // driving frequency, derived (= k^2/2)
  int alpha = 1;       // branch sign, +1 or -1
  double atoms_per_well = 0.0;  // N = pi*(EF - V0/2)/(k*g1d)
  double V_critical = 0.0;      // Vc = 2*k*N*|g1d|/pi

  double drive_period() const { return 2.0 * kPi / omega; }
  // Chemical potential of the uniform state reached by ramping the
  // external potential off: mu = EF - V0/2.
  double uniform_mu() const { return EF - 0.5 * V0; }
  // Upper bound of the density; convenient scale for tolerances.
  double density_scale() const {
    return (std::abs(EF) + std::abs(V0) + std::abs(V1)) / std::abs(g1d);
  }
};

// Parametric region of the balanced solution family.
enum class Region { PhaseContinuing, Boundary, PhaseJumping, Infeasible };

inline const char* to_string(Region r) {
  switch (r) {
    case Region::PhaseContinuing: return "phase-continuing";
    case Region::Boundary: return "boundary";
    case Region::PhaseJumping: return "phase-jumping";
    case Region::Infeasible: return "infeasible";
  }
  return "infeasible";
}

// Builds the full parameter set from the free inputs, deriving omega, V1,
// N and Vc. Returns std::nullopt (with a reason) when a sign condition
// fails and a square root would be imaginary.
inline std::optional<FloquetParams> try_make_balanced_params(
    double g1d, double V0, double EF, double k = kDefaultWaveVector,
    int alpha = 1, std::string* why = nullptr) {
  const auto fail = [&](const std::string& reason) -> std::optional<FloquetParams> {
    if (why) *why = reason;
    return std::nullopt;
  };
  if (!(std::isfinite(g1d) && std::isfinite(V0) && std::isfinite(EF) &&
        std::isfinite(k)))
    return fail("non-finite input");
  if (g1d == 0.0) return fail("g1d must be nonzero");
  if (!(k > 0.0)) return fail("k must be positive");
  if (alpha != 1 && alpha != -1) return fail("alpha must be +1 or -1");
  if (EF / g1d < 0.0)
    return fail("sqrt(EF/g1d) imaginary: EF/g1d < 0 (EF and g1d must share sign)");
  if (V0 / g1d > 0.0)
    return fail("sqrt(-V0/g1d) imaginary: V0/g1d > 0 (V0 must oppose g1d)");

  FloquetParams p;
  p.g1d = g1d;
  p.V0 = V0;
  p.EF = EF;
  p.k = k;
  p.alpha = alpha;
  p.omega = 0.5 * k * k;
  // EF*V0 <= 0 is implied by the two sign conditions above.
  p.V1 = 2.0 * alpha * std::sqrt(std::max(0.0, -EF * V0));
  p.atoms_per_well = kPi * (EF - 0.5 * V0) / (k * g1d);
  p.V_critical = 2.0 * k * p.atoms_per_well * std::abs(g1d) / kPi;
  return p;
}

// Throwing variant; reports which square root would be imaginary.
inline FloquetParams make_balanced_params(double g1d, double V0, double EF,
                                          double k = kDefaultWaveVector,
                                          int alpha = 1) {
  std::string why;
  if (auto p = try_make_balanced_params(g1d, V0, EF, k, alpha, &why)) return *p;
  throw InfeasibleParameters(why);
}

// Critical lattice depth Vc = 2*k*N*|g1d|/pi (= |2*EF - V0| under balance).
inline double critical_depth(const FloquetParams& p) {
  return 2.0 * p.k * p.atoms_per_well * std::abs(p.g1d) / kPi;
}

// Total feasibility check: sign conditions plus consistency of all derived
// quantities. Never throws; usable on arbitrary (possibly hand-built) values.
inline bool params_feasible(const FloquetParams& p) {
  if (!(std::isfinite(p.g1d) && std::isfinite(p.V0) && std::isfinite(p.V1) &&
        std::isfinite(p.EF) && std::isfinite(p.k) && std::isfinite(p.omega) &&
        std::isfinite(p.atoms_per_well) && std::isfinite(p.V_critical)))
    return false;
  if (p.g1d == 0.0 || !(p.k > 0.0)) return false;
  if (p.alpha != 1 && p.alpha != -1) return false;
  if (p.EF / p.g1d < 0.0) return false;
  if (p.V0 / p.g1d > 0.0) return false;
  if (p.EF * p.V0 > 0.0) return false;

  const double scale = std::abs(p.EF) + std::abs(p.V0) + std::abs(p.g1d);
  const double tol = 1e-9;
  if (std::abs(p.omega - 0.5 * p.k * p.k) > tol * p.k * p.k) return false;
  const double v1_balance = 2.0 * p.alpha * std::sqrt(std::max(0.0, -p.EF * p.V0));
  if (std::abs(p.V1 - v1_balance) > tol * (std::abs(v1_balance) + scale)) return false;
  const double n_wells = kPi * (p.EF - 0.5 * p.V0) / (p.k * p.g1d);
  if (std::abs(p.atoms_per_well - n_wells) > tol * (std::abs(n_wells) + 1.0)) return false;
  if (p.atoms_per_well < -tol) return false;
  const double vc = critical_depth(p);
  if (std::abs(p.V_critical - vc) > tol * (std::abs(vc) + scale)) return false;
  if (std::abs(p.V0) > vc * (1.0 + tol) + tol * scale) return false;
  if (std::abs(p.V1) > vc / std::sqrt(2.0) * (1.0 + tol) + tol * scale) return false;
  return true;
}

// Deterministic region classification. Pure and total: infeasible inputs
// classify as Infeasible, and the boundary |V1| = 2|V0| (checked with a
// 1e-12 relative tolerance to absorb floating-point noise in the derived
// V1) takes precedence over the strict inequalities.
inline Region classify_region(const FloquetParams& p) {
  if (!params_feasible(p)) return Region::Infeasible;
  const double v1 = std::abs(p.V1);
  const double two_v0 = 2.0 * std::abs(p.V0);
  if (std::abs(v1 - two_v0) <= 1e-12 * std::max(v1, two_v0))
    return Region::Boundary;
  const double vc = p.V_critical;
  if (v1 < two_v0 && vc / 3.0 < std::abs(p.V0) && std::abs(p.V0) < vc)
    return Region::PhaseJumping;
  return Region::PhaseContinuing;
}

}  // namespace floquet
