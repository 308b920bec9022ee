#pragma once

// Discrete maximization conditions for piecewise-constant controls.
//
// The state X and costate P rotate together inside an interval, so
// L = X x P rotates with them and every Pontryagin Hamiltonian is of the
// form H_P = n . L with n the rate vector of the generator. The moments
// I_{x,y,z} = P^T M_{x,y,z} X are the components of L.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "pwcopt/dynamics.hpp"
#include "pwcopt/error.hpp"

namespace pwcopt {

struct MomentTriple {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// I = (P^T Mx X, P^T My X, P^T Mz X).
inline MomentTriple moments(const Vec3& state, const Vec3& costate) {
  return {costate.dot(generators::mx() * state),
          costate.dot(generators::my() * state),
          costate.dot(generators::mz() * state)};
}

/// L = X x P. L_x is the one-control switching function.
inline Vec3 angular_momentum(const Vec3& state, const Vec3& costate) {
  return state.cross(costate);
}

// ---------------------------------------------------------------------------
// Two resonant controls
// ---------------------------------------------------------------------------

/// Coefficients of a h^2 + b h + c = 0 in h = tan(phi/2).
struct PhaseQuadratic {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

// c is read as (1 - cos tau) I_z - I_y sin tau, the only parenthesization
// whose tau -> 0 limit gives tan(phi) = I_y / I_x.
inline PhaseQuadratic phase_quadratic(const MomentTriple& m, double tau) {
  const double s = std::sin(tau);
  const double omc = 1.0 - std::cos(tau);
  return {m.y * s + omc * m.z, 2.0 * m.x * s, omc * m.z - m.y * s};
}

enum class RootSelection {
  kMaximizing,       // root with positive interval Hamiltonian
  kPositiveTangent,  // larger h = tan(phi/2)
  kNegativeTangent,  // smaller h
};

/// Both phases solving the quadratic; `phases[1]` may be pi when a = 0.
struct PhaseRoots {
  double phases[2] = {0.0, 0.0};
  double tangents[2] = {0.0, 0.0};  // +inf for phi = pi
};

inline PhaseRoots phase_roots(const MomentTriple& m, double tau) {
  const PhaseQuadratic q = phase_quadratic(m, tau);
  const double scale = std::max({std::abs(q.a), std::abs(q.b), std::abs(q.c)});
  if (!(scale > 1e-14)) {
    throw Error(ErrorKind::kDegenerateMoments, "costate parallel to state");
  }
  const double a = q.a / scale;
  const double b = q.b / scale;
  const double c = q.c / scale;
  double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) {
    if (disc > -1e-14) {
      disc = 0.0;
    } else {
      throw Error(ErrorKind::kNoRealRoot, "negative discriminant");
    }
  }
  const double inf = std::numeric_limits<double>::infinity();
  PhaseRoots roots;
  if (std::abs(a) <= 1e-15) {
    // One root escapes to h = inf, i.e. phi = pi.
    roots.tangents[0] = b != 0.0 ? -c / b : 0.0;
    roots.tangents[1] = inf;
  } else {
    const double sq = std::sqrt(disc);
    const double qq = -0.5 * (b + std::copysign(sq, b));
    roots.tangents[0] = qq / a;
    roots.tangents[1] = qq != 0.0 ? c / qq : roots.tangents[0];
  }
  for (int i = 0; i < 2; ++i) {
    roots.phases[i] = std::isinf(roots.tangents[i])
                          ? M_PI
                          : 2.0 * std::atan(roots.tangents[i]);
  }
  return roots;
}

/// Phase of interval k such that (cos phi, sin phi) is aligned with the
/// interval integrals of (L_x, L_y) along the trajectory it generates.
inline double extremal_phase_two_control(
    const MomentTriple& m, double tau,
    RootSelection selection = RootSelection::kMaximizing) {
  const PhaseRoots r = phase_roots(m, tau);
  switch (selection) {
    case RootSelection::kPositiveTangent:
      return r.tangents[0] >= r.tangents[1] ? r.phases[0] : r.phases[1];
    case RootSelection::kNegativeTangent:
      return r.tangents[0] < r.tangents[1] ? r.phases[0] : r.phases[1];
    case RootSelection::kMaximizing:
      break;
  }
  auto hamiltonian = [&](double phi) {
    return std::cos(phi) * m.x + std::sin(phi) * m.y;
  };
  return hamiltonian(r.phases[0]) >= hamiltonian(r.phases[1]) ? r.phases[0]
                                                              : r.phases[1];
}

/// Closed-form integrals over [0, tau] of (L_x, L_y, L_z) when L0 rotates
/// about the unit vector n by angle t.
inline Vec3 integrated_rotation(const Vec3& axis, const Vec3& l0, double tau) {
  return l0 * std::sin(tau) + axis.cross(l0) * (1.0 - std::cos(tau)) +
         axis * axis.dot(l0) * (tau - std::sin(tau));
}

// ---------------------------------------------------------------------------
// One control (amplitude omega, fixed Delta) and Landau-Zener (detuning
// Delta, fixed coupling omega)
// ---------------------------------------------------------------------------

namespace detail {

inline double sinc(double x) {
  return std::abs(x) < 1e-4 ? 1.0 - x * x / 6.0 + x * x * x * x / 120.0
                            : std::sin(x) / x;
}

// (cos x - 1) / x
inline double cosc(double x) {
  return std::abs(x) < 1e-4 ? -x / 2.0 + x * x * x / 24.0
                            : (std::cos(x) - 1.0) / x;
}

}  // namespace detail

/// Interval average of the switching function L_x for the generator
/// Delta Mz + omega Mx.
inline double gamma_one_control(const Vec3& state, const Vec3& costate,
                                double detuning, double amplitude,
                                double tau) {
  const double omega0_sq = amplitude * amplitude + detuning * detuning;
  if (omega0_sq == 0.0) {
    throw Error(ErrorKind::kZeroGenerator, "Delta = omega = 0");
  }
  const double omega0 = std::sqrt(omega0_sq);
  const Vec3 l = angular_momentum(state, costate);
  const double x = omega0 * tau;
  return amplitude / omega0_sq * (detuning * l.z() + amplitude * l.x()) +
         detuning / omega0_sq * (detuning * l.x() - amplitude * l.z()) *
             detail::sinc(x) +
         detuning / omega0 * l.y() * detail::cosc(x);
}

/// Interval average of L_z (= dH_P/dDelta) by 32-point Gauss-Legendre
/// quadrature over the exact trajectory.
inline double gamma_landau_zener(const Vec3& state, const Vec3& costate,
                                 double coupling, double detuning,
                                 double tau) {
  const Vec3 l0 = angular_momentum(state, costate);
  if (tau == 0.0) return l0.z();
  const Vec3 rate(coupling, 0.0, detuning);
  auto lz = [&](double t) {
    return (rotation_about(rate, t).matrix * l0).z();
  };
  using Rule = boost::math::quadrature::gauss<double, 32>;
  return Rule::integrate(lz, 0.0, tau) / tau;
}

/// Bounded scalar control picked from the sign pattern of an interval
/// average Gamma(u).
struct BoundedChoice {
  double value = 0.0;
  bool degenerate = false;  // Gamma vanished identically (P parallel to X)
  int interior_roots = 0;
};

/// min Gamma > 0 -> +bound, max Gamma < 0 -> -bound, otherwise a root of
/// Gamma. Gamma is sampled on 101 points; each sign change is bisected to
/// 1e-12 and ties go to the root with the largest interval Hamiltonian.
inline BoundedChoice three_case_control(
    const std::function<double(double)>& gamma, double bound,
    const std::function<double(double)>& hamiltonian) {
  constexpr int kGrid = 101;
  std::vector<double> us(kGrid);
  std::vector<double> gs(kGrid);
  double gmin = std::numeric_limits<double>::infinity();
  double gmax = -gmin;
  for (int i = 0; i < kGrid; ++i) {
    us[i] = -bound + 2.0 * bound * i / (kGrid - 1);
    gs[i] = gamma(us[i]);
    gmin = std::min(gmin, gs[i]);
    gmax = std::max(gmax, gs[i]);
  }
  if (gmin > 0.0) return {bound, false, 0};
  if (gmax < 0.0) return {-bound, false, 0};
  if (gmin == 0.0 && gmax == 0.0) return {0.0, true, 0};

  std::vector<double> roots;
  for (int i = 0; i < kGrid; ++i) {
    if (gs[i] == 0.0) roots.push_back(us[i]);
    if (i + 1 < kGrid && gs[i] * gs[i + 1] < 0.0) {
      double lo = us[i];
      double hi = us[i + 1];
      double glo = gs[i];
      while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        const double gm = gamma(mid);
        if (gm == 0.0) {
          lo = hi = mid;
          break;
        }
        if ((gm < 0.0) == (glo < 0.0)) {
          lo = mid;
          glo = gm;
        } else {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
  }
  const auto best = std::max_element(
      roots.begin(), roots.end(),
      [&](double u, double v) { return hamiltonian(u) < hamiltonian(v); });
  return {*best, false, static_cast<int>(roots.size())};
}

inline BoundedChoice extremal_amplitude_one_control(const Vec3& state,
                                                    const Vec3& costate,
                                                    double detuning,
                                                    double tau,
                                                    double bound = 1.0) {
  const Vec3 l = angular_momentum(state, costate);
  if (l.norm() <= 1e-13 * costate.norm() || costate.norm() == 0.0) {
    return {0.0, true, 0};
  }
  return three_case_control(
      [&](double w) {
        // Zero generator: the trajectory is frozen and Gamma reduces to L_x.
        if (w == 0.0 && detuning == 0.0) return l.x();
        return gamma_one_control(state, costate, detuning, w, tau);
      },
      bound, [&](double w) { return w * l.x() + detuning * l.z(); });
}

inline BoundedChoice extremal_amplitude_lz(const Vec3& state,
                                           const Vec3& costate,
                                           double coupling, double tau,
                                           double bound) {
  if (coupling == 0.0) {
    throw Error(ErrorKind::kZeroCoupling, "omega = 0");
  }
  const Vec3 l = angular_momentum(state, costate);
  if (l.norm() <= 1e-13 * costate.norm() || costate.norm() == 0.0) {
    return {0.0, true, 0};
  }
  return three_case_control(
      [&](double d) {
        return gamma_landau_zener(state, costate, coupling, d, tau);
      },
      bound, [&](double d) { return coupling * l.x() + d * l.z(); });
}

// ---------------------------------------------------------------------------
// Sequential extremal construction
// ---------------------------------------------------------------------------

struct ControlFamily {
  Family kind = Family::kTwoControl;
  double detuning = 0.0;  // fixed Delta (one-control)
  double coupling = 0.0;  // fixed omega (Landau-Zener)
  double bound = 1.0;     // |omega| <= 1 or |Delta| <= Delta_max
  RootSelection roots = RootSelection::kMaximizing;

  static ControlFamily two_control(
      RootSelection roots = RootSelection::kMaximizing) {
    return {Family::kTwoControl, 0.0, 0.0, 1.0, roots};
  }
  static ControlFamily one_control(double detuning, double bound = 1.0) {
    return {Family::kOneControl, detuning, 0.0, bound,
            RootSelection::kMaximizing};
  }
  static ControlFamily landau_zener(double coupling, double max_detuning) {
    return {Family::kLandauZener, 0.0, coupling, max_detuning,
            RootSelection::kMaximizing};
  }

  IntervalGenerator generator(double control, double duration) const {
    switch (kind) {
      case Family::kTwoControl:
        return IntervalGenerator::two_control(control, duration);
      case Family::kOneControl:
        return IntervalGenerator::one_control(detuning, control, duration);
      case Family::kLandauZener:
        return IntervalGenerator::landau_zener(control, coupling, duration);
    }
    return {};
  }
};

/// Extremal control value for one interval starting at (X, P).
inline double extremal_control(const ControlFamily& family, const Vec3& state,
                               const Vec3& costate, double tau,
                               std::optional<int> interval = std::nullopt) {
  try {
    switch (family.kind) {
      case Family::kTwoControl:
        return extremal_phase_two_control(moments(state, costate), tau,
                                          family.roots);
      case Family::kOneControl: {
        const auto c = extremal_amplitude_one_control(
            state, costate, family.detuning, tau, family.bound);
        if (c.degenerate) {
          throw Error(ErrorKind::kDegenerateMoments,
                      "costate parallel to state");
        }
        return c.value;
      }
      case Family::kLandauZener: {
        const auto c = extremal_amplitude_lz(state, costate, family.coupling,
                                             tau, family.bound);
        if (c.degenerate) {
          throw Error(ErrorKind::kDegenerateMoments,
                      "costate parallel to state");
        }
        return c.value;
      }
    }
  } catch (const Error& e) {
    if (interval && !e.interval()) throw Error(e.kind(), e.what(), interval);
    throw;
  }
  return 0.0;
}

/// N values held for T each, except the last one held for tail <= T.
struct PiecewiseControl {
  double period = 0.0;
  double tail = 0.0;
  std::vector<double> values;

  int intervals() const { return static_cast<int>(values.size()); }
  double total_time() const {
    return values.empty() ? 0.0 : (intervals() - 1) * period + tail;
  }
};

struct IntervalRecord {
  Vec3 state;    // X_k at the start of the interval
  Vec3 costate;  // P_k
  double control = 0.0;
  double duration = 0.0;
  double hamiltonian = 0.0;  // constant over the interval
};

struct ExtremalTrajectory {
  std::vector<IntervalRecord> intervals;
  Vec3 final_state;
  Vec3 final_costate;

  /// H_P at t_f, i.e. over the last interval.
  double final_hamiltonian() const {
    return intervals.empty() ? 0.0 : intervals.back().hamiltonian;
  }
  std::vector<double> controls() const {
    std::vector<double> out;
    out.reserve(intervals.size());
    for (const auto& r : intervals) out.push_back(r.control);
    return out;
  }
  double total_time() const {
    double t = 0.0;
    for (const auto& r : intervals) t += r.duration;
    return t;
  }
  PiecewiseControl control() const {
    PiecewiseControl c;
    if (intervals.empty()) return c;
    c.period = intervals.front().duration;
    c.tail = intervals.back().duration;
    c.values = controls();
    return c;
  }
};

/// Builds the extremal interval by interval: N - 1 intervals of length T and
/// a final one of length tail.
inline ExtremalTrajectory propagate_extremal(const Vec3& state0,
                                             const Vec3& costate0,
                                             const ControlFamily& family,
                                             int intervals, double period,
                                             double tail) {
  if (intervals < 1) {
    throw Error(ErrorKind::kDomainError, "need at least one interval");
  }
  if (!(tail > 0.0) || tail > period * (1.0 + 1e-12)) {
    throw Error(ErrorKind::kInvalidTail, "require 0 < dT <= T");
  }
  ExtremalTrajectory out;
  out.intervals.reserve(intervals);
  Vec3 x = state0;
  Vec3 p = costate0;
  for (int k = 0; k < intervals; ++k) {
    const double tau = k + 1 == intervals ? tail : period;
    const double u = extremal_control(family, x, p, tau, k);
    const IntervalGenerator g = family.generator(u, tau);
    const double h = g.rate_vector().dot(angular_momentum(x, p));
    out.intervals.push_back({x, p, u, tau, h});
    const Mat3 r = rotation(g).matrix;
    x = r * x;
    p = r * p;
  }
  out.final_state = x;
  out.final_costate = p;
  return out;
}

/// Open-loop simulation of given piecewise-constant controls.
inline Vec3 simulate_controls(const Vec3& state0, const ControlFamily& family,
                              const std::vector<double>& controls,
                              double period, double tail) {
  Vec3 x = state0;
  for (std::size_t k = 0; k < controls.size(); ++k) {
    const double tau = k + 1 == controls.size() ? tail : period;
    x = rotation(family.generator(controls[k], tau)).matrix * x;
  }
  return x;
}

}  // namespace pwcopt
