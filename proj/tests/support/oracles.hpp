#pragma once

// Independent reference computations for the tests. Nothing here calls the
// closed-form propagators of the library.

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vec3 = Eigen::Vector3d;

/// Classical RK4 for dX/dt = n(t) x X.
inline Vec3 rk4_bloch(const std::function<Vec3(double)>& rate, Vec3 x,
                      double t0, double t1, int steps) {
  const double h = (t1 - t0) / steps;
  for (int i = 0; i < steps; ++i) {
    const double t = t0 + i * h;
    const Vec3 k1 = rate(t).cross(x);
    const Vec3 k2 = rate(t + 0.5 * h).cross(x + 0.5 * h * k1);
    const Vec3 k3 = rate(t + 0.5 * h).cross(x + 0.5 * h * k2);
    const Vec3 k4 = rate(t + h).cross(x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

/// RK4 for the adjoint pair (X, P) under a constant rate vector.
inline std::pair<Vec3, Vec3> rk4_pair(const Vec3& rate, Vec3 x, Vec3 p,
                                      double tau, int steps) {
  auto f = [&](double) { return rate; };
  return {rk4_bloch(f, x, 0.0, tau, steps), rk4_bloch(f, p, 0.0, tau, steps)};
}

/// RK4 for the linearized model dz/dt = i w z - i exp(i phi(t)).
inline std::complex<double> rk4_linear(
    const std::function<double(double)>& phase, double omega,
    std::complex<double> z, double t0, double t1, int steps) {
  using namespace std::complex_literals;
  auto f = [&](double t, std::complex<double> v) {
    return 1.0i * omega * v - 1.0i * std::polar(1.0, phase(t));
  };
  const double h = (t1 - t0) / steps;
  for (int i = 0; i < steps; ++i) {
    const double t = t0 + i * h;
    const auto k1 = f(t, z);
    const auto k2 = f(t + 0.5 * h, z + 0.5 * h * k1);
    const auto k3 = f(t + 0.5 * h, z + 0.5 * h * k2);
    const auto k4 = f(t + h, z + h * k3);
    z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return z;
}

/// Composite Simpson rule with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a,
                      double b, int panels = 2000) {
  if (panels % 2) ++panels;
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

inline double central_difference(const std::function<double(double)>& f,
                                 double x, double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Exact minimum distance between two point clouds, using a bucket grid of
/// cell size h. Pairs further apart than h may be missed, in which case the
/// result is +inf.
inline double min_pair_distance(const std::vector<Vec3>& a,
                                const std::vector<Vec3>& b, double h) {
  using Key = std::array<long long, 3>;
  auto key = [&](const Vec3& p) {
    return Key{static_cast<long long>(std::floor(p.x() / h)),
               static_cast<long long>(std::floor(p.y() / h)),
               static_cast<long long>(std::floor(p.z() / h))};
  };
  auto hash = [](const Key& k) {
    return static_cast<std::size_t>(k[0] * 73856093LL ^ k[1] * 19349663LL ^
                                    k[2] * 83492791LL);
  };
  std::unordered_multimap<std::size_t, std::size_t> buckets;
  buckets.reserve(b.size() * 2);
  for (std::size_t j = 0; j < b.size(); ++j) buckets.emplace(hash(key(b[j])), j);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : a) {
    const Key c = key(p);
    for (int di = -1; di <= 1; ++di) {
      for (int dj = -1; dj <= 1; ++dj) {
        for (int dk = -1; dk <= 1; ++dk) {
          const auto range =
              buckets.equal_range(hash({c[0] + di, c[1] + dj, c[2] + dk}));
          for (auto it = range.first; it != range.second; ++it) {
            best = std::min(best, (p - b[it->second]).norm());
          }
        }
      }
    }
  }
  return best;
}

/// Rotation about a unit axis through angle theta by the matrix exponential
/// series (independent of the Rodrigues form).
inline Eigen::Matrix3d rotation_series(const Vec3& rate, double tau) {
  Eigen::Matrix3d k;
  k << 0, -rate.z(), rate.y(), rate.z(), 0, -rate.x(), -rate.y(), rate.x(), 0;
  k *= tau;
  // Scaling and squaring with a 20-term Taylor series.
  int squarings = 0;
  double norm = k.norm();
  while (norm > 0.5) {
    norm *= 0.5;
    ++squarings;
  }
  const Eigen::Matrix3d a = k / std::pow(2.0, squarings);
  Eigen::Matrix3d term = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d sum = term;
  for (int i = 1; i <= 20; ++i) {
    term = term * a / i;
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

}  // namespace oracle
