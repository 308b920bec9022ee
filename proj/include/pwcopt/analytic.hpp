#pragma once

// Closed-form continuous-time references, the exactly solvable linearized
// model, the adjoint-sphere map and unit conversion.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "pwcopt/dynamics.hpp"
#include "pwcopt/error.hpp"
#include "pwcopt/pmp.hpp"

namespace pwcopt {

/// A constant-control arc of a continuous schedule.
struct Segment {
  double value = 0.0;
  double duration = 0.0;
};

struct ContinuousSolution {
  double final_time = 0.0;
  ControlFamily family;
  Vec3 initial = Vec3::Zero();
  Vec3 target = Vec3::Zero();
  /// u(t) on [0, final_time].
  std::function<double(double)> control;
  /// Non-empty for bang / singular schedules.
  std::vector<Segment> schedule;
  /// Admissible initial costates, indexed by the free parameter (p_x(0) for
  /// two controls, p_z(0) for one control).
  std::function<Vec3(double)> adjoint_family;
};

/// Propagates the stored control. Schedules are propagated exactly; smooth
/// laws use a fourth-order commutator-free Magnus scheme built from the
/// closed-form interval rotations.
inline Vec3 simulate(const ContinuousSolution& sol, int steps = 2000) {
  if (!sol.schedule.empty()) {
    Vec3 x = sol.initial;
    for (const Segment& s : sol.schedule) {
      x = rotation(sol.family.generator(s.value, s.duration)).matrix * x;
    }
    return x;
  }
  const double h = sol.final_time / steps;
  const double c1 = 0.5 - std::sqrt(3.0) / 6.0;
  const double c2 = 0.5 + std::sqrt(3.0) / 6.0;
  const double a1 = 0.25 + std::sqrt(3.0) / 6.0;
  const double a2 = 0.25 - std::sqrt(3.0) / 6.0;
  auto rate = [&](double t) {
    return sol.family.generator(sol.control(t), 0.0).rate_vector();
  };
  Vec3 x = sol.initial;
  for (int i = 0; i < steps; ++i) {
    const double t = i * h;
    const Vec3 r1 = rate(t + c1 * h);
    const Vec3 r2 = rate(t + c2 * h);
    x = rotation_about(a2 * r1 + a1 * r2, h).matrix *
        (rotation_about(a1 * r1 + a2 * r2, h).matrix * x);
  }
  return x;
}

// ---------------------------------------------------------------------------
// Two resonant controls, (1,0,0) -> (0,1,0)
// ---------------------------------------------------------------------------

inline constexpr double kTwoControlMinimumTime =
    std::numbers::pi * std::numbers::sqrt3 / 2.0;
inline constexpr double kTwoControlAzimuthalMomentum =
    1.0 / std::numbers::sqrt3;

/// Optimal phase law phi(t) = phi0 - (L_z / rho) t for the costate
/// (p_x, 1/sqrt3, p_z_sign); L_z and rho = |(L_x, L_y)| are constants of the
/// continuous extremal flow.
inline ContinuousSolution two_control_continuous(double p_z_sign = -1.0) {
  ContinuousSolution sol;
  sol.final_time = kTwoControlMinimumTime;
  sol.family = ControlFamily::two_control();
  sol.initial = Vec3::UnitX();
  sol.target = Vec3::UnitY();
  const double pz = p_z_sign < 0 ? -1.0 : 1.0;
  sol.adjoint_family = [pz](double px) {
    return Vec3(px, kTwoControlAzimuthalMomentum, pz);
  };
  const Vec3 l0 = angular_momentum(sol.initial, sol.adjoint_family(0.0));
  const double phi0 = std::atan2(l0.y(), l0.x());
  const double rate = -l0.z() / std::hypot(l0.x(), l0.y());
  sol.control = [phi0, rate](double t) { return phi0 + rate * t; };
  return sol;
}

/// Exact state and costate along the two-control continuous extremal:
/// in the frame co-rotating with the control, the generator is constant.
inline std::pair<Vec3, Vec3> two_control_continuous_flow(
    double t, double px = 0.0, double p_z_sign = -1.0) {
  const ContinuousSolution sol = two_control_continuous(p_z_sign);
  const Vec3 p0 = sol.adjoint_family(px);
  const double phi0 = sol.control(0.0);
  const double rate = sol.control(1.0) - phi0;
  const Vec3 n0(std::cos(phi0), std::sin(phi0), 0.0);
  const Mat3 frame = rotation_about(Vec3(0, 0, rate), t).matrix;
  const Mat3 body = rotation_about(n0 - Vec3(0, 0, rate), t).matrix;
  return {frame * body * sol.initial, frame * body * p0};
}

/// Polar angle on the increasing branch, theta(0) = pi/2.
inline double two_control_polar_angle(double t) {
  const double k = std::sqrt(1.0 + kTwoControlAzimuthalMomentum *
                                       kTwoControlAzimuthalMomentum);
  return std::numbers::pi / 2.0 + std::asin(std::sin(k * t) / k);
}

// ---------------------------------------------------------------------------
// One control, north pole -> south pole, |omega| <= 1
// ---------------------------------------------------------------------------

struct BangBangPair {
  ContinuousSolution early_switch;  // switch at t1
  ContinuousSolution late_switch;   // switch at t2
  double t1 = 0.0;
  double t2 = 0.0;
};

inline BangBangPair one_control_continuous(double detuning) {
  if (std::abs(detuning) > 1.0) {
    throw Error(ErrorKind::kDomainError, "|Delta| must not exceed 1");
  }
  const double d2 = detuning * detuning;
  const double big_omega = std::sqrt(1.0 + d2);
  BangBangPair out;
  out.t1 = (std::numbers::pi - std::acos(d2)) / big_omega;
  out.t2 = (std::numbers::pi + std::acos(d2)) / big_omega;
  const double tf = 2.0 * std::numbers::pi / big_omega;
  const double root = std::sqrt(std::max(0.0, 1.0 - d2 * d2));

  auto make = [&](double t_switch, double px_sign) {
    ContinuousSolution sol;
    sol.final_time = tf;
    sol.family = ControlFamily::one_control(detuning);
    sol.initial = Vec3::UnitZ();
    sol.target = -Vec3::UnitZ();
    sol.schedule = {{-1.0, t_switch}, {1.0, tf - t_switch}};
    sol.control = [t_switch](double t) { return t < t_switch ? -1.0 : 1.0; };
    // H_P(0) = 1 with omega = -1 fixes p_y = 1; the switching function
    // L_x vanishes at t_switch. p_z(0) is free (parallel to X0).
    const double px =
        detuning == 0.0 ? 0.0 : px_sign * root / (detuning * big_omega);
    sol.adjoint_family = [px](double pz) { return Vec3(px, 1.0, pz); };
    return sol;
  };
  out.early_switch = make(out.t1, -1.0);
  out.late_switch = make(out.t2, 1.0);
  return out;
}

// ---------------------------------------------------------------------------
// Landau-Zener: control Delta, fixed coupling omega, |Delta| <= Delta_max
// ---------------------------------------------------------------------------

struct BoundaryStates {
  Vec3 initial;
  Vec3 target;
};

/// Adiabatic states aligned with the field (omega, 0, Delta) at Delta = +1
/// (initial, near the north pole) and Delta = -1 (target).
inline BoundaryStates lz_boundary_states(double coupling) {
  const double n = std::hypot(coupling, 1.0);
  return {Vec3(coupling, 0.0, 1.0) / n, Vec3(coupling, 0.0, -1.0) / n};
}

struct LandauZenerReference {
  ContinuousSolution solution;
  double first_bang = 0.0;
  double singular = 0.0;
  double last_bang = 0.0;
  double first_sign = -1.0;
  double endpoint_error = 0.0;
  Vec3 costate0 = Vec3::Zero();  // L x X at t = 0 with H_P = 1
};

namespace detail {

struct LzCompletion {
  double singular = 0.0;
  double last_bang = 0.0;
  bool ok = false;
};

// Given the state after the first bang, find the shortest (singular, bang)
// completion reaching the target. A rotation about x preserves x, so the last
// bang run backwards from the target must return to x = state.x(). With the
// axis and target in the xz plane, that x is c0 + c1 cos(nu tau).
inline LzCompletion complete_lz(const Vec3& after_first, const Vec3& target,
                                double coupling, double last_detuning) {
  const Vec3 rate(coupling, 0.0, last_detuning);
  const double nu = rate.norm();
  const Vec3 axis = rate / nu;
  const double c0 = axis.dot(target) * axis.x();
  const double c1 = target.x() - c0;
  LzCompletion best;
  if (std::abs(c1) < 1e-300) return best;
  const double cosine = (after_first.x() - c0) / c1;
  if (std::abs(cosine) > 1.0 + 1e-12) return best;
  const double base = std::acos(std::clamp(cosine, -1.0, 1.0)) / nu;
  const double period = 2.0 * std::numbers::pi / nu;
  auto singular_time = [&](double tau) {
    const Vec3 z = rotation_about(rate, -tau).matrix * target;
    double angle = std::atan2(z.z(), z.y()) -
                   std::atan2(after_first.z(), after_first.y());
    angle = std::fmod(angle, 2.0 * std::numbers::pi);
    if (angle < 0) angle += 2.0 * std::numbers::pi;
    return angle / coupling;
  };
  double best_total = std::numeric_limits<double>::infinity();
  for (double tau : {base, period - base}) {
    const double ts = singular_time(tau);
    if (ts + tau < best_total) {
      best_total = ts + tau;
      best = {ts, tau, true};
    }
  }
  return best;
}

}  // namespace detail

/// Bang(-/+ Delta_max) - singular(Delta = 0) - bang schedule of minimal total
/// time. The last two durations come from boundary matching; the first is
/// chosen by a coarse scan refined with golden-section search.
inline LandauZenerReference lz_continuous_reference(double coupling,
                                                    double max_detuning) {
  if (!(max_detuning > 0.0)) {
    throw Error(ErrorKind::kNoConvergence, "no bang segments possible");
  }
  if (!(coupling > 0.0)) {
    throw Error(ErrorKind::kDomainError, "coupling must be positive");
  }
  const BoundaryStates bs = lz_boundary_states(coupling);
  LandauZenerReference best;
  double best_total = std::numeric_limits<double>::infinity();

  for (double sign : {-1.0, 1.0}) {
    const Vec3 first_rate(coupling, 0.0, sign * max_detuning);
    auto total = [&](double tau1, detail::LzCompletion* out) {
      const Vec3 y = rotation_about(first_rate, tau1).matrix * bs.initial;
      const auto c = detail::complete_lz(y, bs.target, coupling,
                                         -sign * max_detuning);
      if (out) *out = c;
      return c.ok ? tau1 + c.singular + c.last_bang
                  : std::numeric_limits<double>::infinity();
    };
    const double span = 2.0 * std::numbers::pi / first_rate.norm();
    constexpr int kScan = 200;
    int arg = -1;
    double arg_val = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kScan; ++i) {
      const double v = total(span * i / kScan, nullptr);
      if (v < arg_val) {
        arg_val = v;
        arg = i;
      }
    }
    if (arg < 0) continue;
    double lo = span * std::max(0, arg - 1) / kScan;
    double hi = span * std::min(kScan, arg + 1) / kScan;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = hi - g * (hi - lo);
    double b = lo + g * (hi - lo);
    double fa = total(a, nullptr);
    double fb = total(b, nullptr);
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
      if (fa < fb) {
        hi = b;
        b = a;
        fb = fa;
        a = hi - g * (hi - lo);
        fa = total(a, nullptr);
      } else {
        lo = a;
        a = b;
        fa = fb;
        b = lo + g * (hi - lo);
        fb = total(b, nullptr);
      }
    }
    double tau1 = 0.5 * (lo + hi);
    // The singular arc needs L along e_x and L orthogonal to X, i.e. x = 0 at
    // the junction. Golden section locates that only to ~sqrt(eps); polish by
    // bisection on x when a sign change brackets the estimate.
    {
      auto x_at = [&](double tau) {
        return (rotation_about(first_rate, tau).matrix * bs.initial).x();
      };
      double a0 = tau1 - 1e-4;
      double b0 = tau1 + 1e-4;
      double fa0 = x_at(a0);
      if (a0 > 0.0 && fa0 * x_at(b0) < 0.0) {
        for (int it = 0; it < 100 && b0 - a0 > 1e-16; ++it) {
          const double m = 0.5 * (a0 + b0);
          const double fm = x_at(m);
          if (fa0 * fm <= 0.0) {
            b0 = m;
          } else {
            a0 = m;
            fa0 = fm;
          }
        }
        const double polished = 0.5 * (a0 + b0);
        if (total(polished, nullptr) <= total(tau1, nullptr) + 1e-9) {
          tau1 = polished;
        }
      }
    }
    detail::LzCompletion c;
    const double tf = total(tau1, &c);
    if (!(tf < best_total)) continue;
    best_total = tf;
    best.first_bang = tau1;
    best.singular = c.singular;
    best.last_bang = c.last_bang;
    best.first_sign = sign;
  }
  if (!std::isfinite(best_total)) {
    throw Error(ErrorKind::kNoConvergence, "no bang-singular-bang schedule");
  }

  ContinuousSolution& sol = best.solution;
  sol.final_time = best_total;
  sol.family = ControlFamily::landau_zener(coupling, max_detuning);
  sol.initial = bs.initial;
  sol.target = bs.target;
  const double d1 = best.first_sign * max_detuning;
  sol.schedule = {{d1, best.first_bang}, {0.0, best.singular},
                  {-d1, best.last_bang}};
  const double t1 = best.first_bang;
  const double t2 = best.first_bang + best.singular;
  sol.control = [=](double t) { return t < t1 ? d1 : (t < t2 ? 0.0 : -d1); };

  // On the singular arc L_z = 0 and H_P = omega L_x = 1, so L = (1/omega)
  // e_x there; rotating back through the first bang gives L(0).
  const Vec3 l_switch(1.0 / coupling, 0.0, 0.0);
  const Vec3 l0 =
      rotation_about(Vec3(coupling, 0.0, d1), -t1).matrix * l_switch;
  best.costate0 = l0.cross(bs.initial);
  sol.adjoint_family = [l0, x0 = bs.initial](double along) {
    return Vec3(l0.cross(x0) + along * x0);
  };
  best.endpoint_error = (simulate(sol) - sol.target).norm();
  return best;
}

// ---------------------------------------------------------------------------
// Linearized model: dZ/dt = i omega Z - i exp(i phi), Z = x + i y
// ---------------------------------------------------------------------------

using Complex = std::complex<double>;

/// Exact step with constant phase over tau.
inline Complex linear_step(Complex z, double phase, double omega, double tau) {
  const Complex rot = std::polar(1.0, omega * tau);
  return rot * z - std::polar(1.0, phase) * (rot - 1.0) / omega;
}

struct LinearContinuous {
  double final_time = 1.0;
  double theta = 0.0;  // costate angle
  double omega = 0.0;

  double control(double t) const {
    return theta + omega * t - std::numbers::pi / 2.0;
  }
  Complex state(double t) const {
    return std::polar(1.0, omega * t) * (Complex(0.0) - std::polar(1.0, theta) * t);
  }
};

inline LinearContinuous linear_continuous(double omega) {
  if (omega == 0.0) {
    throw Error(ErrorKind::kDomainError, "omega must be nonzero");
  }
  return {1.0, std::numbers::pi - omega, omega};
}

struct LinearDiscrete {
  double period = 0.0;
  double final_time = 0.0;
  double theta = 0.0;
  std::vector<double> phases;
  Complex final_state;  // from exact interval propagation
};

inline LinearDiscrete linear_discrete(double omega, int intervals) {
  if (omega == 0.0 || intervals < 1) {
    throw Error(ErrorKind::kDomainError, "need omega != 0 and N >= 1");
  }
  const double ratio = omega / (2.0 * intervals);
  if (std::abs(ratio) > 1.0) {
    throw Error(ErrorKind::kDomainError, "omega / 2N exceeds 1");
  }
  LinearDiscrete out;
  out.period = 2.0 / omega * std::asin(ratio);
  out.final_time = intervals * out.period;
  out.theta = std::numbers::pi - omega * out.final_time;
  out.phases.resize(intervals);
  Complex z = 0.0;
  for (int k = 0; k < intervals; ++k) {
    out.phases[k] =
        out.theta + (k + 0.5) * omega * out.period - std::numbers::pi / 2.0;
    z = linear_step(z, out.phases[k], omega, out.period);
  }
  out.final_state = z;
  return out;
}

// ---------------------------------------------------------------------------
// Adjoint-sphere map (two controls, (1,0,0) -> (0,1,0))
// ---------------------------------------------------------------------------

struct SphereMapPoint {
  double polar = 0.0;      // Theta_p
  double azimuth = 0.0;    // Phi_p
  double distance = 0.0;   // |X(t_f) - X_target|, NaN when degenerate
};

/// Costate on the sphere of radius sqrt(4/3 + p_x^2); p_x follows from the
/// angles.
inline Vec3 sphere_costate(double polar, double azimuth) {
  const double sx = std::sin(polar) * std::cos(azimuth);
  const double radius = std::sqrt(4.0 / 3.0) / std::sqrt(1.0 - sx * sx);
  return radius * Vec3(sx, std::sin(polar) * std::sin(azimuth),
                       std::cos(polar));
}

/// Continuous-limit curve (Theta_p, Phi_p) of the costate family
/// (p_x, 1/sqrt3, p_z_sign). The p_z > 0 branch is the reflection
/// Theta_p -> pi - Theta_p.
inline std::pair<double, double> sphere_curve(double px,
                                              double p_z_sign = -1.0) {
  const double theta = std::acos(-1.0 / std::sqrt(4.0 / 3.0 + px * px));
  return {p_z_sign < 0 ? theta : std::numbers::pi - theta,
          std::atan(1.0 / (std::sqrt(3.0) * px))};
}

inline double sphere_map_distance(const Vec3& costate, int intervals,
                                  double period) {
  try {
    const auto traj = propagate_extremal(Vec3::UnitX(), costate,
                                         ControlFamily::two_control(),
                                         intervals, period, period);
    return (traj.final_state - Vec3::UnitY()).norm();
  } catch (const Error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

struct SphereMap {
  int grid_size = 0;
  std::vector<SphereMapPoint> grid;  // row-major, polar index outer
  std::vector<std::pair<double, double>> curve;  // (Theta_p, Phi_p), p_z < 0
  std::vector<std::pair<double, double>> mirror_curve;  // p_z > 0
};

/// Grid of cell centres over Theta_p in (0, pi), Phi_p in (-pi/2, pi/2).
inline SphereMap adjoint_sphere_map(int intervals, double period,
                                    int grid_size, int curve_points = 400) {
  SphereMap map;
  map.grid_size = grid_size;
  map.grid.reserve(static_cast<std::size_t>(grid_size) * grid_size);
  const double step = std::numbers::pi / grid_size;
  for (int i = 0; i < grid_size; ++i) {
    const double polar = (i + 0.5) * step;
    for (int j = 0; j < grid_size; ++j) {
      const double azimuth = -std::numbers::pi / 2.0 + (j + 0.5) * step;
      map.grid.push_back(
          {polar, azimuth,
           sphere_map_distance(sphere_costate(polar, azimuth), intervals,
                               period)});
    }
  }
  // p_x = tan(s) covers (0, inf), the part of the curve inside the grid.
  for (int k = 1; k < curve_points; ++k) {
    const double s = 0.5 * std::numbers::pi * k / curve_points;
    map.curve.push_back(sphere_curve(std::tan(s), -1.0));
    map.mirror_curve.push_back(sphere_curve(std::tan(s), 1.0));
  }
  return map;
}

// ---------------------------------------------------------------------------
// Units
// ---------------------------------------------------------------------------

/// Dimensionless time -> microseconds for a pulse amplitude nu in Hz.
inline double nmr_time(double normalized_time, double nu_hz) {
  if (!(nu_hz > 0.0)) {
    throw Error(ErrorKind::kDomainError, "nu must be positive");
  }
  return normalized_time / (2.0 * std::numbers::pi * nu_hz) * 1e6;
}

/// Sampling period in dimensionless units for a digitization step in us.
inline double nmr_period(double step_us, double nu_hz) {
  return 2.0 * std::numbers::pi * nu_hz * step_us * 1e-6;
}

}  // namespace pwcopt
