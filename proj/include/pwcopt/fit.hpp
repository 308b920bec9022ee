#pragma once

// Convergence-law fits of t_f(N) - t_f^(c):
//   exponential  log(gap) ~ a + b N
//   polynomial   log(gap) ~ a + b log N

#include <cmath>
#include <string>
#include <vector>

#include "pwcopt/error.hpp"

namespace pwcopt {

enum class FitModel { kExponential, kPolynomial };

inline std::string to_string(FitModel m) {
  return m == FitModel::kExponential ? "exponential" : "polynomial";
}

struct ConvergenceRow {
  double n = 0.0;
  double final_time = 0.0;
  bool converged = true;
};

struct ConvergenceFit {
  FitModel model = FitModel::kExponential;
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
  int rows_used = 0;
};

inline ConvergenceFit fit_convergence(const std::vector<ConvergenceRow>& rows,
                                      double reference, FitModel model) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& r : rows) {
    if (!r.converged || !(r.final_time > reference) || !(r.n > 0.0)) continue;
    xs.push_back(model == FitModel::kExponential ? r.n : std::log(r.n));
    ys.push_back(std::log(r.final_time - reference));
  }
  if (xs.size() < 5) {
    throw Error(ErrorKind::kInsufficientData,
                "need at least 5 converged rows above the reference, got " +
                    std::to_string(xs.size()));
  }
  const double m = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) {
    throw Error(ErrorKind::kInsufficientData, "abscissae are all equal");
  }
  ConvergenceFit fit;
  fit.model = model;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - (fit.intercept + fit.slope * xs[i]);
    sse += e * e;
  }
  fit.r_squared = syy > 0.0 ? std::max(0.0, 1.0 - sse / syy) : 1.0;
  fit.rows_used = static_cast<int>(xs.size());
  return fit;
}

}  // namespace pwcopt
