#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "pwcopt/pmp.hpp"
#include "support/oracles.hpp"

namespace {

using pwcopt::ControlFamily;
using pwcopt::ErrorKind;
using pwcopt::MomentTriple;
using pwcopt::Vec3;

constexpr double kPi = std::numbers::pi;

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Vec3(n(rng), n(rng), n(rng)).normalized();
}

Vec3 random_vector(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  return Vec3(n(rng), n(rng), n(rng));
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const pwcopt::Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kDomainError;
}

// Integral over [0, tau] of L(t) = exp(t [n]x) L0, with the rotation taken
// from the series exponential.
Vec3 integrated_l(const Vec3& rate, const Vec3& l0, double tau) {
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    out(i) = oracle::simpson(
        [&](double t) { return (oracle::rotation_series(rate, t) * l0)(i); },
        0.0, tau, 400);
  }
  return out;
}

TEST(Moments, Examples) {
  const auto m0 = pwcopt::moments(Vec3::UnitX(), Vec3::UnitX());
  EXPECT_EQ(m0.x, 0.0);
  EXPECT_EQ(m0.y, 0.0);
  EXPECT_EQ(m0.z, 0.0);
  const auto m1 = pwcopt::moments(Vec3::UnitX(), Vec3::UnitY());
  EXPECT_EQ(m1.x, 0.0);
  EXPECT_EQ(m1.y, 0.0);
  EXPECT_EQ(m1.z, 1.0);
}

TEST(Moments, EqualCrossProduct) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 x = random_unit(rng);
    const Vec3 p = random_vector(rng, 2.0);
    const auto m = pwcopt::moments(x, p);
    const Vec3 l = x.cross(p);
    EXPECT_NEAR(m.x, l.x(), 1e-14);
    EXPECT_NEAR(m.y, l.y(), 1e-14);
    EXPECT_NEAR(m.z, l.z(), 1e-14);
    const Vec3 am = pwcopt::angular_momentum(x, p);
    EXPECT_NEAR(am.x(), x.y() * p.z() - x.z() * p.y(), 1e-14);
  }
}

TEST(Moments, ParallelCostateVanishes) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const Vec3 x = random_unit(rng);
    const auto m = pwcopt::moments(x, -3.2 * x);
    EXPECT_LT(std::abs(m.x) + std::abs(m.y) + std::abs(m.z), 1e-13);
  }
}

TEST(ExtremalPhase, Errors) {
  EXPECT_EQ(kind_of([] {
              pwcopt::extremal_phase_two_control(MomentTriple{}, 0.4);
            }),
            ErrorKind::kDegenerateMoments);
  EXPECT_EQ(kind_of([] {
              pwcopt::extremal_phase_two_control(MomentTriple{0.1, 0.0, 1.0},
                                                 kPi);
            }),
            ErrorKind::kNoRealRoot);
}

TEST(ExtremalPhase, ShortIntervalLimit) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const Vec3 l = random_vector(rng);
    const MomentTriple m{l.x(), l.y(), l.z()};
    const double tau = 1e-5;
    const double phi = pwcopt::extremal_phase_two_control(m, tau);
    EXPECT_LT(std::abs(std::remainder(phi - std::atan2(l.y(), l.x()), 2 * kPi)),
              20 * tau * (1.0 + std::abs(l.z()) / std::hypot(l.x(), l.y())));
  }
}

TEST(ExtremalPhase, QuadraticRootsSolveQuadratic) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 500; ++i) {
    const Vec3 l = random_vector(rng);
    const MomentTriple m{l.x(), l.y(), l.z()};
    const double tau = 0.4;
    const auto q = pwcopt::phase_quadratic(m, tau);
    ASSERT_NEAR(q.c, (1.0 - std::cos(tau)) * m.z - m.y * std::sin(tau), 1e-15);
    pwcopt::PhaseRoots r;
    try {
      r = pwcopt::phase_roots(m, tau);
    } catch (const pwcopt::Error&) {
      continue;
    }
    for (double h : r.tangents) {
      if (std::isinf(h)) continue;
      const double scale = std::abs(q.a) * h * h + std::abs(q.b * h) +
                           std::abs(q.c);
      EXPECT_LT(std::abs(q.a * h * h + q.b * h + q.c), 1e-12 * (1.0 + scale));
    }
  }
}

// The returned phase aligns (cos, sin) with the interval integrals of
// (L_x, L_y) along its own trajectory.
TEST(ExtremalPhase, IntegralConditionByQuadrature) {
  std::mt19937_64 rng(5);
  int checked = 0;
  for (int i = 0; i < 60; ++i) {
    const Vec3 x = random_unit(rng);
    const Vec3 p = random_vector(rng);
    const double tau = 0.4;
    double phi = 0.0;
    try {
      phi = pwcopt::extremal_phase_two_control(pwcopt::moments(x, p), tau);
    } catch (const pwcopt::Error&) {
      continue;
    }
    const Vec3 rate(std::cos(phi), std::sin(phi), 0.0);
    const Vec3 j = integrated_l(rate, x.cross(p), tau);
    EXPECT_LT(std::abs(std::cos(phi) * j.y() - std::sin(phi) * j.x()), 1e-10);
    ++checked;
  }
  EXPECT_GT(checked, 40);
}

// Discrete maximum condition: with P_{k+1} fixed, the phase maximizes
// P_{k+1}^T R(psi) X_k over psi.
TEST(ExtremalPhase, GridSearchOracle) {
  std::mt19937_64 rng(6);
  const double tau = 0.4;
  constexpr int kGrid = 100000;
  int checked = 0;
  for (int i = 0; i < 12; ++i) {
    const Vec3 x = random_unit(rng);
    const Vec3 p = random_vector(rng);
    double phi = 0.0;
    try {
      phi = pwcopt::extremal_phase_two_control(pwcopt::moments(x, p), tau);
    } catch (const pwcopt::Error&) {
      continue;
    }
    const Vec3 rate(std::cos(phi), std::sin(phi), 0.0);
    const Vec3 p_next = oracle::rotation_series(rate, tau) * p;
    double best = -1e300;
    double arg = 0.0;
    for (int g = 0; g < kGrid; ++g) {
      const double psi = -kPi + 2.0 * kPi * g / kGrid;
      const double h =
          p_next.dot(oracle::rotation_series(
                         Vec3(std::cos(psi), std::sin(psi), 0.0), tau) *
                     x);
      if (h > best) {
        best = h;
        arg = psi;
      }
    }
    EXPECT_LT(std::abs(std::remainder(arg - phi, 2 * kPi)), 1e-4)
        << "sample " << i;
    ++checked;
  }
  EXPECT_GE(checked, 8);
}

TEST(GammaOneControl, NoDetuningIsSwitchingFunction) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const Vec3 x = random_unit(rng);
    const Vec3 p = random_vector(rng);
    const double w = 0.3 + i * 0.005;
    EXPECT_DOUBLE_EQ(pwcopt::gamma_one_control(x, p, 0.0, w, 0.7),
                     x.cross(p).x());
  }
}

TEST(GammaOneControl, ShortIntervalLimit) {
  std::mt19937_64 rng(8);
  const Vec3 x = random_unit(rng);
  const Vec3 p = random_vector(rng);
  const double lx = x.cross(p).x();
  EXPECT_NEAR(pwcopt::gamma_one_control(x, p, 0.5, 0.8, 1e-7), lx, 1e-6);
  EXPECT_NEAR(pwcopt::gamma_one_control(x, p, 0.5, 0.8, 0.0), lx, 1e-15);
}

TEST(GammaOneControl, MatchesQuadrature) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Vec3 x = random_unit(rng);
    const Vec3 p = random_vector(rng);
    const double d = u(rng);
    const double w = u(rng);
    const double tau = 0.05 + 2.0 * std::abs(u(rng));
    const Vec3 rate(w, 0.0, d);
    const double quad =
        oracle::simpson(
            [&](double t) {
              const auto r = oracle::rotation_series(rate, t);
              const Vec3 xt = r * x;
              const Vec3 pt = r * p;
              return xt.y() * pt.z() - xt.z() * pt.y();
            },
            0.0, tau, 10000) /
        tau;
    EXPECT_NEAR(pwcopt::gamma_one_control(x, p, d, w, tau), quad, 1e-9);
  }
}

TEST(GammaOneControl, ZeroGenerator) {
  EXPECT_EQ(kind_of([] {
              pwcopt::gamma_one_control(Vec3::UnitX(), Vec3::UnitY(), 0, 0, 1);
            }),
            ErrorKind::kZeroGenerator);
}

TEST(OneControlAmplitude, BangsWithoutDetuning) {
  // L_x = y p_z - z p_y.
  const Vec3 x = Vec3::UnitY();
  EXPECT_EQ(pwcopt::extremal_amplitude_one_control(x, Vec3::UnitZ(), 0.0, 0.5)
                .value,
            1.0);
  EXPECT_EQ(pwcopt::extremal_amplitude_one_control(x, -Vec3::UnitZ(), 0.0, 0.5)
                .value,
            -1.0);
}

double variational_violation(double u, double bound,
                             const std::function<double(double)>& gamma) {
  const double g = gamma(u);
  double worst = -1e300;
  for (int i = 0; i <= 1000; ++i) {
    const double v = -bound + 2.0 * bound * i / 1000.0;
    worst = std::max(worst, (v - u) * g);
  }
  return worst;
}

TEST(OneControlAmplitude, VariationalInequality) {
  std::mt19937_64 rng(10);
  int interior = 0;
  for (int i = 0; i < 300; ++i) {
    const Vec3 x = random_unit(rng);
    const Vec3 p = random_vector(rng);
    const auto c = pwcopt::extremal_amplitude_one_control(x, p, 0.5, 0.3);
    ASSERT_FALSE(c.degenerate);
    ASSERT_LE(std::abs(c.value), 1.0);
    if (std::abs(c.value) < 1.0) ++interior;
    EXPECT_LE(variational_violation(c.value, 1.0,
                                    [&](double w) {
                                      return pwcopt::gamma_one_control(
                                          x, p, 0.5, w, 0.3);
                                    }),
              1e-10);
  }
  EXPECT_GT(interior, 0);
}

TEST(OneControlAmplitude, ParallelCostateIsDegenerate) {
  const Vec3 x = Vec3(1, 2, 2).normalized();
  EXPECT_TRUE(
      pwcopt::extremal_amplitude_one_control(x, 2.0 * x, 0.5, 0.3).degenerate);
}

TEST(LandauZenerAmplitude, GammaMatchesQuadrature) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 60; ++i) {
    const Vec3 x = random_unit(rng);
    const Vec3 p = random_vector(rng);
    const double w = 0.5;
    const double d = u(rng);
    const double tau = 0.05 + 0.5 * std::abs(u(rng));
    const Vec3 rate(w, 0.0, d);
    const double quad =
        oracle::simpson(
            [&](double t) {
              const auto r = oracle::rotation_series(rate, t);
              return (r * x).cross(r * p).z();
            },
            0.0, tau, 2000) /
        tau;
    EXPECT_NEAR(pwcopt::gamma_landau_zener(x, p, w, d, tau), quad, 1e-11);
  }
}

TEST(LandauZenerAmplitude, StrongCouplingSign) {
  // omega >> Delta_max: Gamma_Delta is close to the average of L_z under the
  // x-rotation alone, so the chosen bang follows its sign.
  std::mt19937_64 rng(12);
  int bangs = 0;
  for (int i = 0; i < 100; ++i) {
    const Vec3 x = random_unit(rng);
    const Vec3 p = random_vector(rng);
    const double tau = 0.3;
    const double w = 50.0;
    const double bound = 0.01;
    const double avg =
        oracle::simpson(
            [&](double t) {
              const auto r = oracle::rotation_series(Vec3(w, 0, 0), t);
              return (r * x).cross(r * p).z();
            },
            0.0, tau, 4000) /
        tau;
    const auto c = pwcopt::extremal_amplitude_lz(x, p, w, tau, bound);
    if (std::abs(avg) < 1e-2) continue;
    ++bangs;
    EXPECT_EQ(c.value, std::copysign(bound, avg));
  }
  EXPECT_GT(bangs, 50);
}

TEST(LandauZenerAmplitude, VariationalInequality) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 60; ++i) {
    const Vec3 x = random_unit(rng);
    const Vec3 p = random_vector(rng);
    const auto c = pwcopt::extremal_amplitude_lz(x, p, 0.5, 0.4, 2.0);
    EXPECT_LE(variational_violation(c.value, 2.0,
                                    [&](double d) {
                                      return pwcopt::gamma_landau_zener(
                                          x, p, 0.5, d, 0.4);
                                    }),
              1e-10);
  }
}

TEST(LandauZenerAmplitude, DegenerateAndZeroCoupling) {
  const Vec3 x = Vec3(0.5, 0, 1).normalized();
  const auto c = pwcopt::extremal_amplitude_lz(x, x, 0.5, 0.3, 2.0);
  EXPECT_TRUE(c.degenerate);
  EXPECT_EQ(c.value, 0.0);
  EXPECT_EQ(kind_of([&] {
              pwcopt::extremal_amplitude_lz(x, Vec3::UnitY(), 0.0, 0.3, 2.0);
            }),
            ErrorKind::kZeroCoupling);
}

TEST(PropagateExtremal, SingleIntervalPureZMomentHasNoPhase) {
  // X = e_x, P = e_y gives L = e_z: every equatorial axis has H_P = 0 and the
  // quadratic has no real root.
  EXPECT_EQ(kind_of([] {
              pwcopt::propagate_extremal(Vec3::UnitX(), Vec3::UnitY(),
                                         ControlFamily::two_control(), 1, 0.9,
                                         0.9);
            }),
            ErrorKind::kNoRealRoot);
}

TEST(PropagateExtremal, SingleInterval) {
  const Vec3 p0(0.0, 1.0, -1.0);
  const auto t = pwcopt::propagate_extremal(Vec3::UnitX(), p0,
                                            ControlFamily::two_control(), 1,
                                            0.9, 0.9);
  ASSERT_EQ(t.intervals.size(), 1u);
  EXPECT_NEAR(t.final_state.norm(), 1.0, 1e-15);
  const double phi = pwcopt::extremal_phase_two_control(
      pwcopt::moments(Vec3::UnitX(), p0), 0.9);
  EXPECT_EQ(t.intervals[0].control, phi);
  EXPECT_DOUBLE_EQ(t.total_time(), 0.9);
}

TEST(PropagateExtremal, HamiltonianConstantWithinIntervals) {
  std::mt19937_64 rng(14);
  const std::vector<ControlFamily> families = {
      ControlFamily::two_control(), ControlFamily::one_control(0.5),
      ControlFamily::landau_zener(0.5, 2.0)};
  for (const auto& family : families) {
    for (int s = 0; s < 5; ++s) {
      const Vec3 x0 = random_unit(rng);
      const Vec3 p0 = random_vector(rng);
      pwcopt::ExtremalTrajectory traj;
      try {
        traj = pwcopt::propagate_extremal(x0, p0, family, 6, 0.45, 0.3);
      } catch (const pwcopt::Error&) {
        continue;
      }
      for (const auto& rec : traj.intervals) {
        const Vec3 rate =
            family.generator(rec.control, rec.duration).rate_vector();
        double lo = 1e300;
        double hi = -1e300;
        for (int i = 1; i <= 10; ++i) {
          const auto r =
              oracle::rotation_series(rate, rec.duration * i / 11.0);
          const double h = (r * rec.costate).dot(rate.cross(r * rec.state));
          lo = std::min(lo, h);
          hi = std::max(hi, h);
        }
        EXPECT_LT(hi - lo, 1e-10);
        EXPECT_NEAR(hi, rec.hamiltonian, 1e-10);
      }
    }
  }
}

TEST(PropagateExtremal, IndependentOfCostateAlongInitialState) {
  // p_x(0) is the component of P(0) along X(0) = (1,0,0).
  for (int n : {3, 7}) {
    const auto a = pwcopt::propagate_extremal(
        Vec3::UnitX(), Vec3(0.0, 0.55, -1.0), ControlFamily::two_control(), n,
        2.75 / n, 2.75 / n);
    const auto b = pwcopt::propagate_extremal(
        Vec3::UnitX(), Vec3(1.7, 0.55, -1.0), ControlFamily::two_control(), n,
        2.75 / n, 2.75 / n);
    for (int k = 0; k < n; ++k) {
      EXPECT_NEAR(a.intervals[k].control, b.intervals[k].control, 1e-8);
    }
  }
}

TEST(PropagateExtremal, Errors) {
  const auto fam = ControlFamily::two_control();
  EXPECT_EQ(kind_of([&] {
              pwcopt::propagate_extremal(Vec3::UnitX(), Vec3::UnitY(), fam, 3,
                                         0.5, 0.6);
            }),
            ErrorKind::kInvalidTail);
  EXPECT_EQ(kind_of([&] {
              pwcopt::propagate_extremal(Vec3::UnitX(), Vec3::UnitY(), fam, 0,
                                         0.5, 0.5);
            }),
            ErrorKind::kDomainError);
  try {
    pwcopt::propagate_extremal(Vec3::UnitX(), 2.0 * Vec3::UnitX(), fam, 3, 0.5,
                               0.5);
    FAIL() << "expected DegenerateMoments";
  } catch (const pwcopt::Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerateMoments);
    ASSERT_TRUE(e.interval().has_value());
    EXPECT_EQ(*e.interval(), 0);
  }
}

TEST(PropagateExtremal, SimulationReproducesTrajectory) {
  const auto fam = ControlFamily::one_control(0.5);
  const auto traj = pwcopt::propagate_extremal(Vec3::UnitZ(), Vec3(0.3, 1, 0.2),
                                               fam, 8, 0.6, 0.4);
  const Vec3 sim = pwcopt::simulate_controls(Vec3::UnitZ(), fam,
                                             traj.controls(), 0.6, 0.4);
  EXPECT_LT((sim - traj.final_state).norm(), 1e-15);
  EXPECT_DOUBLE_EQ(traj.control().total_time(), 7 * 0.6 + 0.4);
}

}  // namespace
