#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace divkit {

struct FitResult {
  std::string kind;            // "saturating_exp", "growth_exp", "none"
  std::vector<double> params;
  double r_squared = 0.0;      // 1 - SS_res / SS_tot
  bool converged = false;
};

using CurveModel = std::function<double(double x, std::span<const double> params)>;

/// y = a - b exp(-c x); params (a, b, c).
double saturating_exp(double x, std::span<const double> p);
/// y = a exp(c x) + d; params (a, c, d).
double growth_exp(double x, std::span<const double> p);

/// Levenberg-Marquardt with a central-difference Jacobian. Non-finite model
/// values reject the step, so overflow-prone parameter regions are escaped
/// rather than crashed on.
FitResult fit_curve(std::span<const double> x, std::span<const double> y,
                    const CurveModel& model, std::vector<double> init, std::string kind,
                    int max_iterations = 200);

/// Multi-start saturating fit for concept sweeps.
FitResult fit_saturating(std::span<const double> x, std::span<const double> y);
/// Log-linearized init plus refinement for vocab sweeps.
FitResult fit_growth(std::span<const double> x, std::span<const double> y);

double r_squared(std::span<const double> x, std::span<const double> y,
                 const CurveModel& model, std::span<const double> params);

/// Spearman rank correlation with average ranks for ties.
double spearman_rho(std::span<const double> a, std::span<const double> b);

}  // namespace divkit
