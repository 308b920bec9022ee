#pragma once

// Shooting on the initial costate (and the time scale) so that the extremal
// reaches the target with H_P(t_f) = 1.
//
// The costate component along X(0) never enters L = X x P, so the residual
// has a one-dimensional null direction. Newton steps are computed as
// minimum-norm least-squares solutions with a truncated SVD, which keeps the
// iterates from drifting along it.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "pwcopt/analytic.hpp"
#include "pwcopt/dynamics.hpp"
#include "pwcopt/error.hpp"
#include "pwcopt/parallel.hpp"
#include "pwcopt/pmp.hpp"

namespace pwcopt {

using Vec4 = Eigen::Vector4d;

enum class TimeMode {
  kLockedGrid,  // unknowns (P(0), T), t_f = N T
  kFreeTail,    // unknowns (P(0), t_f), T fixed, dT = t_f - (N - 1) T
};

struct ShootingOptions {
  double tolerance = 1e-10;
  int max_iterations = 200;
  double jacobian_step = 1e-7;
  int max_halvings = 30;
  double singular_cutoff = 1e-6;  // relative, for the truncated SVD
};

struct ShootingProblem {
  ControlFamily family;
  Vec3 initial = Vec3::UnitX();
  Vec3 target = Vec3::UnitY();
  TimeMode mode = TimeMode::kLockedGrid;
  int intervals = 3;    // LockedGrid
  double period = 0.0;  // FreeTail
  double branch = -1.0;  // sign of p_z(0) for the two-control analytic seed
  ShootingOptions options;

  static ShootingProblem two_control_locked(int n) {
    ShootingProblem p;
    p.family = ControlFamily::two_control();
    p.intervals = n;
    return p;
  }
  static ShootingProblem two_control_free(double period) {
    ShootingProblem p;
    p.family = ControlFamily::two_control();
    p.mode = TimeMode::kFreeTail;
    p.period = period;
    return p;
  }
  static ShootingProblem one_control_locked(double detuning, int n) {
    ShootingProblem p;
    p.family = ControlFamily::one_control(detuning);
    p.initial = Vec3::UnitZ();
    p.target = -Vec3::UnitZ();
    p.intervals = n;
    return p;
  }
  static ShootingProblem landau_zener_locked(double coupling,
                                             double max_detuning, int n) {
    ShootingProblem p;
    p.family = ControlFamily::landau_zener(coupling, max_detuning);
    const BoundaryStates bs = lz_boundary_states(coupling);
    p.initial = bs.initial;
    p.target = bs.target;
    p.intervals = n;
    return p;
  }
};

/// Interval layout implied by the time unknown.
struct GridLayout {
  int intervals = 0;
  double period = 0.0;
  double tail = 0.0;
  double final_time() const { return (intervals - 1) * period + tail; }
};

inline GridLayout layout(const ShootingProblem& problem, double time_unknown) {
  if (problem.mode == TimeMode::kLockedGrid) {
    if (!(time_unknown > 0.0) || problem.intervals < 1) {
      throw Error(ErrorKind::kInvalidTail, "sampling period must be positive");
    }
    return {problem.intervals, time_unknown, time_unknown};
  }
  const double period = problem.period;
  if (!(period > 0.0) || !(time_unknown > 0.0)) {
    throw Error(ErrorKind::kInvalidTail, "need T > 0 and t_f > 0");
  }
  int n = static_cast<int>(std::ceil(time_unknown / period - 1e-12));
  n = std::max(n, 1);
  const double tail = time_unknown - (n - 1) * period;
  if (!(tail > 0.0) || tail > period * (1.0 + 1e-12)) {
    throw Error(ErrorKind::kInvalidTail, "derived dT outside (0, T]");
  }
  return {n, period, tail};
}

inline ExtremalTrajectory shoot(const ShootingProblem& problem,
                                const Vec4& unknowns) {
  const GridLayout g = layout(problem, unknowns(3));
  return propagate_extremal(problem.initial, unknowns.head<3>(),
                            problem.family, g.intervals, g.period, g.tail);
}

/// (X(t_f) - X_target, H_P(t_f) - 1).
inline Vec4 residual(const ShootingProblem& problem, const Vec4& unknowns) {
  const ExtremalTrajectory traj = shoot(problem, unknowns);
  Vec4 r;
  r.head<3>() = traj.final_state - problem.target;
  r(3) = traj.final_hamiltonian() - 1.0;
  return r;
}

struct ShootingResult {
  AdjointVector costate0 = AdjointVector::Zero();
  double period = 0.0;
  double tail = 0.0;
  int intervals = 0;
  double final_time = 0.0;
  double residual_norm = std::numeric_limits<double>::infinity();
  ExtremalTrajectory trajectory;
  PiecewiseControl controls;
  bool converged = false;
  int iterations = 0;
  int seed_id = -1;
  Vec4 unknowns = Vec4::Zero();
};

namespace detail {

inline ShootingResult make_result(const ShootingProblem& problem,
                                  const Vec4& u, double norm, int iterations) {
  ShootingResult out;
  const GridLayout g = layout(problem, u(3));
  out.unknowns = u;
  out.costate0 = u.head<3>();
  out.period = g.period;
  out.tail = g.tail;
  out.intervals = g.intervals;
  out.final_time = g.final_time();
  out.residual_norm = norm;
  out.trajectory = shoot(problem, u);
  out.controls = out.trajectory.control();
  out.controls.period = g.period;
  out.controls.tail = g.tail;
  out.iterations = iterations;
  return out;
}

inline std::optional<Vec4> try_residual(const ShootingProblem& problem,
                                        const Vec4& u) {
  try {
    Vec4 r = residual(problem, u);
    if (!r.allFinite()) return std::nullopt;
    return r;
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// Damped Newton with a forward-difference Jacobian and backtracking on the
/// residual norm. Returns the last (best) iterate with `converged` unset when
/// the tolerance is not met. Throws if the seed itself cannot be propagated.
inline ShootingResult solve(const ShootingProblem& problem, const Vec4& seed,
                            int seed_id = -1) {
  const ShootingOptions& opt = problem.options;
  Vec4 u = seed;
  Vec4 r;
  try {
    r = residual(problem, u);
  } catch (const Error& e) {
    throw e.with_seed(seed_id);
  }
  double norm = r.norm();
  int it = 0;
  for (; it < opt.max_iterations && norm >= opt.tolerance; ++it) {
    Eigen::Matrix4d jac;
    bool jac_ok = true;
    for (int j = 0; j < 4 && jac_ok; ++j) {
      const double h = opt.jacobian_step * (std::abs(u(j)) + 1.0);
      Vec4 v = u;
      v(j) += h;
      auto rp = detail::try_residual(problem, v);
      if (!rp) {
        v(j) = u(j) - h;
        rp = detail::try_residual(problem, v);
        if (!rp) {
          jac_ok = false;
          break;
        }
        jac.col(j) = (r - *rp) / h;
      } else {
        jac.col(j) = (*rp - r) / h;
      }
    }
    if (!jac_ok) break;
    Eigen::JacobiSVD<Eigen::Matrix4d> svd(jac, Eigen::ComputeFullU |
                                                   Eigen::ComputeFullV);
    svd.setThreshold(opt.singular_cutoff);
    const Vec4 step = svd.solve(-r);
    double lambda = 1.0;
    bool accepted = false;
    for (int k = 0; k <= opt.max_halvings; ++k, lambda *= 0.5) {
      const Vec4 trial = u + lambda * step;
      const auto rt = detail::try_residual(problem, trial);
      if (rt && rt->norm() < norm) {
        u = trial;
        r = *rt;
        norm = rt->norm();
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  ShootingResult out = detail::make_result(problem, u, norm, it);
  out.converged = norm < opt.tolerance;
  out.seed_id = seed_id;
  return out;
}

// ---------------------------------------------------------------------------
// Seeds
// ---------------------------------------------------------------------------

/// Continuous-limit seeds: costate from the analytic extremal, time scale
/// from the continuous minimum time.
inline std::vector<Vec4> continuous_seeds(const ShootingProblem& problem) {
  std::vector<Vec4> seeds;
  auto time_unknown = [&](double tf) {
    return problem.mode == TimeMode::kLockedGrid ? tf / problem.intervals : tf;
  };
  auto push = [&](const Vec3& p, double tf) {
    Vec4 s;
    s.head<3>() = p;
    s(3) = time_unknown(tf);
    seeds.push_back(s);
  };
  switch (problem.family.kind) {
    case Family::kTwoControl: {
      push(two_control_continuous(problem.branch).adjoint_family(0.0),
           kTwoControlMinimumTime);
      break;
    }
    case Family::kOneControl: {
      const auto pair = one_control_continuous(
          std::clamp(problem.family.detuning, -1.0, 1.0));
      for (const auto* sol : {&pair.early_switch, &pair.late_switch}) {
        const Vec3 p = sol->adjoint_family(0.0);
        push(p, sol->final_time);
        // omega -> -omega mirror (rotation by pi about z).
        push(Vec3(-p.x(), -p.y(), p.z()), sol->final_time);
      }
      break;
    }
    case Family::kLandauZener: {
      const auto ref =
          lz_continuous_reference(problem.family.coupling, problem.family.bound);
      push(ref.costate0, ref.solution.final_time);
      break;
    }
  }
  return seeds;
}

/// Continuous seeds followed by `count` Gaussian perturbations of the
/// costate part of each, drawn from a fixed stream.
inline std::vector<Vec4> default_seeds(const ShootingProblem& problem,
                                       int count = 20, double sigma = 0.1,
                                       std::uint64_t stream = 42) {
  const std::vector<Vec4> base = continuous_seeds(problem);
  std::vector<Vec4> seeds = base;
  std::mt19937_64 rng(stream);
  std::normal_distribution<double> normal(0.0, sigma);
  for (int i = 0; i < count; ++i) {
    Vec4 s = base[static_cast<std::size_t>(i) % base.size()];
    for (int j = 0; j < 3; ++j) s(j) += normal(rng);
    seeds.push_back(s);
  }
  return seeds;
}

/// Solves from every seed and returns the converged result with minimal
/// t_f. Seeds are processed concurrently; the reduction is in seed order so
/// the outcome is deterministic.
inline ShootingResult multistart(const ShootingProblem& problem,
                                 const std::vector<Vec4>& seeds,
                                 unsigned workers = worker_count()) {
  if (seeds.empty()) {
    throw Error(ErrorKind::kAllSeedsFailed, "no seeds");
  }
  const auto results = parallel_map<std::optional<ShootingResult>>(
      seeds.size(),
      [&](std::size_t i) -> std::optional<ShootingResult> {
        try {
          return solve(problem, seeds[i], static_cast<int>(i));
        } catch (const Error&) {
          return std::nullopt;
        }
      },
      workers);
  const ShootingResult* best = nullptr;
  for (const auto& r : results) {
    if (!r || !r->converged) continue;
    if (!best || r->final_time < best->final_time - 1e-12) best = &*r;
  }
  if (!best) {
    throw Error(ErrorKind::kAllSeedsFailed,
                "no seed converged out of " + std::to_string(seeds.size()));
  }
  return *best;
}

inline ShootingResult multistart(const ShootingProblem& problem) {
  return multistart(problem, default_seeds(problem));
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct SweepRow {
  int intervals = 0;
  double period = 0.0;
  double tail = 0.0;
  double final_time = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::quiet_NaN();  // t_f - t_f^(c)
  bool converged = false;
  double residual_norm = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> controls;
};

/// Continuous minimum time for a problem family.
inline double continuous_minimum_time(const ShootingProblem& problem) {
  switch (problem.family.kind) {
    case Family::kTwoControl:
      return kTwoControlMinimumTime;
    case Family::kOneControl:
      return 2.0 * std::numbers::pi /
             std::sqrt(1.0 + problem.family.detuning * problem.family.detuning);
    case Family::kLandauZener:
      return lz_continuous_reference(problem.family.coupling,
                                     problem.family.bound)
          .solution.final_time;
  }
  return 0.0;
}

/// One row per grid value (N for LockedGrid, T for FreeTail). Each solve is
/// warm-started from the previous converged row and falls back to a
/// multistart when the warm start fails.
inline std::vector<SweepRow> convergence_sweep(const ShootingProblem& base,
                                               const std::vector<double>& grid) {
  const double reference = continuous_minimum_time(base);
  std::vector<SweepRow> rows;
  rows.reserve(grid.size());
  std::optional<ShootingResult> previous;
  for (double value : grid) {
    ShootingProblem problem = base;
    if (base.mode == TimeMode::kLockedGrid) {
      problem.intervals = static_cast<int>(std::lround(value));
    } else {
      problem.period = value;
    }
    std::optional<ShootingResult> result;
    if (previous) {
      Vec4 seed = previous->unknowns;
      if (base.mode == TimeMode::kLockedGrid) {
        seed(3) = previous->final_time / problem.intervals;
      }
      try {
        ShootingResult r = solve(problem, seed);
        if (r.converged) result = r;
      } catch (const Error&) {
      }
    }
    if (!result) {
      try {
        result = multistart(problem);
      } catch (const Error&) {
      }
    }
    SweepRow row;
    if (base.mode == TimeMode::kLockedGrid) {
      row.intervals = problem.intervals;
    } else {
      row.period = problem.period;
    }
    if (result) {
      row.intervals = result->intervals;
      row.period = result->period;
      row.tail = result->tail;
      row.final_time = result->final_time;
      row.gap = result->final_time - reference;
      row.converged = result->converged;
      row.residual_norm = result->residual_norm;
      row.controls = result->controls.values;
      previous = result;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace pwcopt
