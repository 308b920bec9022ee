#pragma once

// Closed-form propagation over one sampling interval. The Bloch vector X and
// the costate P obey the same linear equation dX/dt = A X with A a real
// skew-symmetric generator, so one interval is a rotation:
//
//   two resonant controls   A = cos(phi) Mx + sin(phi) My      (unit rate)
//   detuned / Landau-Zener  A = Delta Mz + omega Mx            (rate Omega0)

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "pwcopt/error.hpp"

namespace pwcopt {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using BlochVector = Eigen::Vector3d;
using AdjointVector = Eigen::Vector3d;
using QubitState = Eigen::Vector2cd;
using Mat2c = Eigen::Matrix2cd;

namespace generators {

inline Mat3 mx() {
  Mat3 m;
  m << 0, 0, 0,
       0, 0, -1,
       0, 1, 0;
  return m;
}

inline Mat3 my() {
  Mat3 m;
  m << 0, 0, 1,
       0, 0, 0,
       -1, 0, 0;
  return m;
}

inline Mat3 mz() {
  Mat3 m;
  m << 0, -1, 0,
       1, 0, 0,
       0, 0, 0;
  return m;
}

}  // namespace generators

enum class Family { kTwoControl, kOneControl, kLandauZener };

/// Constant generator held over one interval.
struct IntervalGenerator {
  Family family = Family::kTwoControl;
  double phase = 0.0;      // two-control only
  double detuning = 0.0;   // Delta
  double amplitude = 0.0;  // omega (one-control amplitude or LZ coupling)
  double duration = 0.0;

  static IntervalGenerator two_control(double phase, double duration) {
    return {Family::kTwoControl, phase, 0.0, 0.0, duration};
  }
  static IntervalGenerator one_control(double detuning, double amplitude,
                                       double duration) {
    return {Family::kOneControl, 0.0, detuning, amplitude, duration};
  }
  static IntervalGenerator landau_zener(double detuning, double coupling,
                                        double duration) {
    return {Family::kLandauZener, 0.0, detuning, coupling, duration};
  }

  /// Vector n with A X = n x X; its norm is the rotation rate.
  Vec3 rate_vector() const {
    if (family == Family::kTwoControl) {
      return {std::cos(phase), std::sin(phase), 0.0};
    }
    return {amplitude, 0.0, detuning};
  }
};

/// R(tau) for the resonant pair, entry by entry as derived from
/// exp[(cos(phi) Mx + sin(phi) My) tau].
inline Mat3 rotation_two_control(double phase, double tau) {
  const double s = std::sin(phase);
  const double c = std::cos(phase);
  const double st = std::sin(tau);
  const double ct = std::cos(tau);
  Mat3 r;
  r << s * s * ct + c * c, (1.0 - ct) * s * c, st * s,
       (1.0 - ct) * s * c, s * s + ct * c * c, -st * c,
       -st * s, st * c, ct;
  return r;
}

struct AxisRotation {
  Mat3 matrix = Mat3::Identity();
  bool zero_generator = false;
};

/// Rodrigues rotation exp(tau [rate]x) for an arbitrary rate vector.
inline AxisRotation rotation_about(const Vec3& rate, double tau) {
  const double speed = rate.norm();
  if (speed == 0.0) return {Mat3::Identity(), true};
  const Vec3 axis = rate / speed;
  Mat3 k;
  k << 0, -axis.z(), axis.y(),
       axis.z(), 0, -axis.x(),
       -axis.y(), axis.x(), 0;
  const double angle = speed * tau;
  Mat3 r = Mat3::Identity() + std::sin(angle) * k +
           (1.0 - std::cos(angle)) * (k * k);
  return {r, false};
}

/// Rotation about (omega, 0, Delta)/Omega0 by Omega0*tau.
inline AxisRotation rotation_axis(double detuning, double amplitude,
                                  double tau) {
  return rotation_about(Vec3(amplitude, 0.0, detuning), tau);
}

inline AxisRotation rotation(const IntervalGenerator& g) {
  if (g.family == Family::kTwoControl) {
    return {rotation_two_control(g.phase, g.duration), false};
  }
  return rotation_axis(g.detuning, g.amplitude, g.duration);
}

struct Propagated {
  Vec3 vector;
  bool zero_generator = false;
};

/// Works for both state and costate vectors.
inline Propagated propagate(const Vec3& v, const IntervalGenerator& g) {
  const AxisRotation r = rotation(g);
  return {r.matrix * v, r.zero_generator};
}

/// Component-wise interval solution for dX/dt = (Delta Mz + omega Mx) X,
/// written with A = y0, B = (Delta x0 - omega z0)/Omega0. Singular at
/// Omega0 = 0; `rotation_axis` is the production path.
inline Vec3 detuned_component_solution(const Vec3& x0, double detuning,
                                       double amplitude, double t) {
  const double omega0 = std::hypot(amplitude, detuning);
  if (omega0 == 0.0) {
    throw Error(ErrorKind::kZeroGenerator, "Delta = omega = 0");
  }
  const double a = x0.y();
  const double b = (detuning * x0.x() - amplitude * x0.z()) / omega0;
  const double s = std::sin(omega0 * t);
  const double c = std::cos(omega0 * t);
  return {x0.x() - detuning * b / omega0 - detuning / omega0 * (a * s - b * c),
          a * c + b * s,
          x0.z() + amplitude * b / omega0 + amplitude / omega0 * (a * s - b * c)};
}

namespace pauli {

inline Mat2c sx() {
  Mat2c m;
  m << 0, 1, 1, 0;
  return m;
}
inline Mat2c sy() {
  using namespace std::complex_literals;
  Mat2c m;
  m << 0, -1i, 1i, 0;
  return m;
}
inline Mat2c sz() {
  Mat2c m;
  m << 1, 0, 0, -1;
  return m;
}

}  // namespace pauli

/// exp[-i (cos(phi) sx/2 + sin(phi) sy/2) tau]
/// = cos(tau/2) I - i sin(tau/2) (cos(phi) sx + sin(phi) sy).
inline Mat2c spinor_propagator(double phase, double tau) {
  using namespace std::complex_literals;
  const double c = std::cos(0.5 * tau);
  const double s = std::sin(0.5 * tau);
  const std::complex<double> off_lower = -1i * s * std::polar(1.0, phase);
  const std::complex<double> off_upper = -1i * s * std::polar(1.0, -phase);
  Mat2c u;
  u << c, off_upper, off_lower, c;
  return u;
}

/// Pauli expectation values (<sx>, <sy>, <sz>).
inline Vec3 bloch_vector(const QubitState& psi) {
  const std::complex<double> a = psi(0);
  const std::complex<double> b = psi(1);
  const std::complex<double> cross = std::conj(a) * b;
  return {2.0 * cross.real(), 2.0 * cross.imag(),
          std::norm(a) - std::norm(b)};
}

}  // namespace pwcopt
