#pragma once

// Fixed-time fidelity maximization for the two-control spinor problem,
// H(phi) = (cos(phi) sx + sin(phi) sy) / 2, piecewise constant phases.

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "pwcopt/dynamics.hpp"
#include "pwcopt/error.hpp"
#include "pwcopt/parallel.hpp"

namespace pwcopt {

using Complex = std::complex<double>;

enum class GradientMethod { kSplitOperator, kAuxiliaryMatrix, kPmpExact };

inline std::string to_string(GradientMethod m) {
  switch (m) {
    case GradientMethod::kSplitOperator:
      return "split-operator";
    case GradientMethod::kAuxiliaryMatrix:
      return "auxiliary-matrix";
    case GradientMethod::kPmpExact:
      return "pmp-exact";
  }
  return "unknown";
}

struct GrapeProblem {
  QubitState initial;
  QubitState target;
  int intervals = 3;
  double final_time = 2.77;
  GradientMethod method = GradientMethod::kPmpExact;

  double period() const { return final_time / intervals; }

  /// (|1> + |2>)/sqrt2 -> (|1> + i|2>)/sqrt2, i.e. (1,0,0) -> (0,1,0).
  static GrapeProblem equator_quarter_turn(int n, double tf) {
    using namespace std::complex_literals;
    GrapeProblem p;
    p.initial = QubitState(1.0, 1.0) / std::numbers::sqrt2;
    p.target = QubitState(1.0, 1.0i) / std::numbers::sqrt2;
    p.intervals = n;
    p.final_time = tf;
    return p;
  }

  void validate() const {
    if (intervals < 1 || !(final_time > 0.0)) {
      throw Error(ErrorKind::kDomainError, "need N >= 1 and t_f > 0");
    }
    if (std::abs(initial.norm() - 1.0) > 1e-12 ||
        std::abs(target.norm() - 1.0) > 1e-12) {
      throw Error(ErrorKind::kDomainError, "states must be normalized");
    }
  }
};

/// Forward states psi[k] (k = 0..N), psi[k+1] = U_k psi[k], and backward
/// states chi[k] with chi[N] = target, chi[k] = U_k^dagger chi[k+1].
struct FidelityReport {
  double fidelity = 0.0;
  Complex overlap;  // <target|psi_N>
  std::vector<QubitState> forward;
  std::vector<QubitState> backward;
  std::vector<Mat2c> propagators;
};

inline FidelityReport fidelity(const GrapeProblem& problem,
                               const std::vector<double>& phases) {
  const int n = problem.intervals;
  if (static_cast<int>(phases.size()) != n) {
    throw Error(ErrorKind::kDomainError, "phase vector length != N");
  }
  const double t = problem.period();
  FidelityReport out;
  out.propagators.reserve(n);
  out.forward.resize(n + 1);
  out.backward.resize(n + 1);
  out.forward[0] = problem.initial;
  for (int k = 0; k < n; ++k) {
    out.propagators.push_back(spinor_propagator(phases[k], t));
    out.forward[k + 1] = out.propagators[k] * out.forward[k];
  }
  out.backward[n] = problem.target;
  for (int k = n - 1; k >= 0; --k) {
    out.backward[k] = out.propagators[k].adjoint() * out.backward[k + 1];
  }
  out.overlap = problem.target.dot(out.forward[n]);
  out.fidelity = std::norm(out.overlap);
  return out;
}

struct GradientReport {
  std::vector<double> values;
  GradientMethod method = GradientMethod::kPmpExact;
  double fidelity = 0.0;
  // PMP engine only: the time integrals I_x^(k), I_y^(k).
  std::vector<double> integral_x;
  std::vector<double> integral_y;

  double norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
  }
};

namespace detail {

// Integral over [0, tau] of U(s)^dagger (u . sigma) U(s) ds, returned as the
// coefficient vector on (sx, sy, sz). U(s) rotates operators about the
// in-plane axis n = (cos phi, sin phi, 0).
inline Vec3 integrated_heisenberg(double phase, const Vec3& u, double tau) {
  const Vec3 n(std::cos(phase), std::sin(phase), 0.0);
  const Vec3 along = u.dot(n) * n;
  const Vec3 perp = u - along;
  return along * tau + perp * std::sin(tau) -
         n.cross(perp) * (1.0 - std::cos(tau));
}

inline Eigen::Vector3cd sigma_expectations(const QubitState& bra,
                                           const QubitState& ket) {
  return {bra.dot(pauli::sx() * ket), bra.dot(pauli::sy() * ket),
          bra.dot(pauli::sz() * ket)};
}

inline Mat2c phase_derivative_hamiltonian(double phase) {
  return 0.5 * (-std::sin(phase) * pauli::sx() + std::cos(phase) * pauli::sy());
}

}  // namespace detail

/// I_x^(k) = 2 Im[<psi_N|target> int <chi_k(t)|H_x|psi_k(t)> dt] and the
/// same for H_y; dJ/dphi_k = -sin(phi_k) I_x^(k) + cos(phi_k) I_y^(k).
/// Closed form unless `quadrature` is set (32-point Gauss-Legendre).
inline GradientReport gradient_pmp(const GrapeProblem& problem,
                                   const std::vector<double>& phases,
                                   bool quadrature = false) {
  const FidelityReport f = fidelity(problem, phases);
  const int n = problem.intervals;
  const double t = problem.period();
  const Complex lead = std::conj(f.overlap);
  GradientReport out;
  out.method = GradientMethod::kPmpExact;
  out.fidelity = f.fidelity;
  out.values.resize(n);
  out.integral_x.resize(n);
  out.integral_y.resize(n);
  for (int k = 0; k < n; ++k) {
    Complex ix;
    Complex iy;
    if (!quadrature) {
      const Eigen::Vector3cd v =
          detail::sigma_expectations(f.backward[k], f.forward[k]);
      const Vec3 wx = detail::integrated_heisenberg(phases[k], Vec3::UnitX(), t);
      const Vec3 wy = detail::integrated_heisenberg(phases[k], Vec3::UnitY(), t);
      ix = 0.5 * (wx.cast<Complex>().dot(v));
      iy = 0.5 * (wy.cast<Complex>().dot(v));
    } else {
      auto integrand = [&](const Mat2c& op) {
        auto re = [&](double s) {
          const Mat2c u = spinor_propagator(phases[k], s);
          return std::real((u * f.backward[k]).dot(op * (u * f.forward[k])));
        };
        auto im = [&](double s) {
          const Mat2c u = spinor_propagator(phases[k], s);
          return std::imag((u * f.backward[k]).dot(op * (u * f.forward[k])));
        };
        using boost::math::quadrature::gauss;
        return Complex(gauss<double, 32>::integrate(re, 0.0, t),
                       gauss<double, 32>::integrate(im, 0.0, t));
      };
      ix = integrand(0.5 * pauli::sx());
      iy = integrand(0.5 * pauli::sy());
    }
    out.integral_x[k] = 2.0 * std::imag(lead * ix);
    out.integral_y[k] = 2.0 * std::imag(lead * iy);
    out.values[k] = -std::sin(phases[k]) * out.integral_x[k] +
                    std::cos(phases[k]) * out.integral_y[k];
  }
  return out;
}

/// dU_k/dphi_k from the upper-right block of exp([[A, B], [0, A]]),
/// A = -i T H(phi_k), B = -i T dH/dphi_k.
inline Mat2c propagator_derivative_aux(double phase, double tau) {
  using namespace std::complex_literals;
  const Mat2c h =
      0.5 * (std::cos(phase) * pauli::sx() + std::sin(phase) * pauli::sy());
  Eigen::Matrix4cd block = Eigen::Matrix4cd::Zero();
  block.topLeftCorner<2, 2>() = -1.0i * tau * h;
  block.bottomRightCorner<2, 2>() = -1.0i * tau * h;
  block.topRightCorner<2, 2>() =
      -1.0i * tau * detail::phase_derivative_hamiltonian(phase);
  const Eigen::Matrix4cd e = block.exp();
  return e.topRightCorner<2, 2>();
}

inline GradientReport gradient_aux(const GrapeProblem& problem,
                                   const std::vector<double>& phases) {
  const FidelityReport f = fidelity(problem, phases);
  const double t = problem.period();
  const Complex lead = std::conj(f.overlap);
  GradientReport out;
  out.method = GradientMethod::kAuxiliaryMatrix;
  out.fidelity = f.fidelity;
  out.values.resize(problem.intervals);
  for (int k = 0; k < problem.intervals; ++k) {
    const Mat2c du = propagator_derivative_aux(phases[k], t);
    out.values[k] =
        2.0 * std::real(lead * f.backward[k + 1].dot(du * f.forward[k]));
  }
  return out;
}

/// First-order approximation dU_k/dphi_k ~ -i T (dH/dphi_k) U_k.
inline GradientReport gradient_split(const GrapeProblem& problem,
                                     const std::vector<double>& phases) {
  const FidelityReport f = fidelity(problem, phases);
  const double t = problem.period();
  const Complex lead = std::conj(f.overlap);
  GradientReport out;
  out.method = GradientMethod::kSplitOperator;
  out.fidelity = f.fidelity;
  out.values.resize(problem.intervals);
  for (int k = 0; k < problem.intervals; ++k) {
    const Mat2c dh = detail::phase_derivative_hamiltonian(phases[k]);
    out.values[k] = 2.0 * t *
                    std::imag(lead * f.backward[k + 1].dot(dh * f.forward[k + 1]));
  }
  return out;
}

inline GradientReport gradient(const GrapeProblem& problem,
                               const std::vector<double>& phases) {
  switch (problem.method) {
    case GradientMethod::kSplitOperator:
      return gradient_split(problem, phases);
    case GradientMethod::kAuxiliaryMatrix:
      return gradient_aux(problem, phases);
    case GradientMethod::kPmpExact:
      break;
  }
  return gradient_pmp(problem, phases);
}

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

struct OptimizeOptions {
  double initial_step = 1.0;
  double shrink = 0.5;
  double armijo = 1e-4;
  double gradient_tolerance = 1e-10;
  int max_iterations = 10000;
  int max_halvings = 60;
  // J is only resolved to a few ulps, so no line search can certify a gain
  // below that; the run stops once even the full step predicts less.
  double resolution_ulps = 64.0;
  bool keep_trace = true;
};

struct TraceEntry {
  int iteration = 0;
  double fidelity = 0.0;
  double gradient_norm = 0.0;
  std::vector<double> phases;
};

struct OptimizeResult {
  std::vector<TraceEntry> trace;  // every iterate, or only the last one
  std::vector<double> phases;
  double fidelity = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;  // gradient below tolerance or at J's resolution
  bool precision_limited = false;  // stopped by the resolution test
  bool stalled = false;    // line search failed
  double distance() const { return 1.0 - fidelity; }
};

/// Gradient ascent on J with Armijo backtracking. J increases strictly along
/// the trace.
inline OptimizeResult optimize(const GrapeProblem& problem,
                               std::vector<double> phases,
                               const OptimizeOptions& opt = {}) {
  problem.validate();
  OptimizeResult out;
  GradientReport g = gradient(problem, phases);
  double j = g.fidelity;
  int it = 0;
  auto record = [&] {
    if (opt.keep_trace) out.trace.push_back({it, j, g.norm(), phases});
  };
  record();
  for (; it < opt.max_iterations;) {
    const double gn = g.norm();
    if (gn < opt.gradient_tolerance) {
      out.converged = true;
      break;
    }
    const double resolution = opt.resolution_ulps *
                              std::numeric_limits<double>::epsilon() *
                              std::max(1.0, std::abs(j));
    if (opt.initial_step * gn * gn <= resolution) {
      out.converged = true;
      out.precision_limited = true;
      break;
    }
    double step = opt.initial_step;
    bool accepted = false;
    std::vector<double> trial(phases.size());
    for (int h = 0; h <= opt.max_halvings; ++h, step *= opt.shrink) {
      for (std::size_t k = 0; k < phases.size(); ++k) {
        trial[k] = phases[k] + step * g.values[k];
      }
      const double jt = fidelity(problem, trial).fidelity;
      if (jt > j && jt >= j + opt.armijo * step * gn * gn) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.stalled = true;
      break;
    }
    phases = trial;
    g = gradient(problem, phases);
    j = g.fidelity;
    ++it;
    record();
  }
  if (!opt.keep_trace) out.trace.push_back({it, j, g.norm(), phases});
  out.phases = phases;
  out.fidelity = j;
  out.gradient_norm = g.norm();
  out.iterations = it;
  if (!out.converged && out.gradient_norm < opt.gradient_tolerance) {
    out.converged = true;
  }
  return out;
}

/// Uniform random initial phases in [0, 2 pi), one independent draw per
/// start from a fixed stream.
inline std::vector<std::vector<double>> random_phases(int starts, int n,
                                                      std::uint64_t stream) {
  std::mt19937_64 rng(stream);
  std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
  std::vector<std::vector<double>> out(starts, std::vector<double>(n));
  for (auto& v : out) {
    for (double& x : v) x = u(rng);
  }
  return out;
}

/// Best optimize result over the given starts (largest J, ties to the lower
/// start index).
inline OptimizeResult multistart_optimize(
    const GrapeProblem& problem,
    const std::vector<std::vector<double>>& starts,
    OptimizeOptions opt = {}, unsigned workers = worker_count()) {
  opt.keep_trace = false;
  const auto results = parallel_map<OptimizeResult>(
      starts.size(),
      [&](std::size_t i) { return optimize(problem, starts[i], opt); },
      workers);
  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (results[i].fidelity > results[best].fidelity) best = i;
  }
  return results.at(best);
}

struct TimeScanRow {
  double final_time = 0.0;
  double distance = 1.0;  // best 1 - J
  std::vector<double> phases;
};

struct TimeScan {
  std::vector<TimeScanRow> rows;
  double threshold = 1e-6;
  // Smallest grid time with d <= threshold; NaN when none qualifies.
  double minimum_time = std::numeric_limits<double>::quiet_NaN();
};

inline TimeScan time_scan(const GrapeProblem& base,
                          const std::vector<double>& times, int starts = 50,
                          std::uint64_t stream = 42, double threshold = 1e-6,
                          const OptimizeOptions& opt = {}) {
  TimeScan scan;
  scan.threshold = threshold;
  const auto inits = random_phases(starts, base.intervals, stream);
  for (double tf : times) {
    GrapeProblem p = base;
    p.final_time = tf;
    const OptimizeResult r = multistart_optimize(p, inits, opt);
    scan.rows.push_back({tf, r.distance(), r.phases});
  }
  for (const auto& row : scan.rows) {
    if (row.distance <= threshold &&
        (std::isnan(scan.minimum_time) || row.final_time < scan.minimum_time)) {
      scan.minimum_time = row.final_time;
    }
  }
  return scan;
}

}  // namespace pwcopt
