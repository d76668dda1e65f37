#include "divkit/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "divkit/errors.hpp"

namespace divkit {

double saturating_exp(double x, std::span<const double> p) {
  const double e = -p[2] * x;
  if (e > 700.0) return std::numeric_limits<double>::infinity();
  return p[0] - p[1] * std::exp(e);
}

double growth_exp(double x, std::span<const double> p) {
  const double e = p[1] * x;
  if (e > 700.0) return std::numeric_limits<double>::infinity();
  return p[0] * std::exp(e) + p[2];
}

namespace {

double sum_squared_residuals(std::span<const double> x, std::span<const double> y,
                             const CurveModel& model, std::span<const double> params) {
  double ss = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - model(x[i], params);
    if (!std::isfinite(r)) return std::numeric_limits<double>::infinity();
    ss += r * r;
  }
  return ss;
}

/// Solves the k x k normal system (A + lambda diag(A)) step = g in place via
/// Gaussian elimination with partial pivoting. Returns false if singular.
bool solve_damped(std::vector<double> a, std::vector<double> g, double lambda, size_t k,
                  std::vector<double>& step) {
  for (size_t i = 0; i < k; ++i) a[i * k + i] *= 1.0 + lambda;
  for (size_t col = 0; col < k; ++col) {
    size_t pivot = col;
    for (size_t r = col + 1; r < k; ++r) {
      if (std::abs(a[r * k + col]) > std::abs(a[pivot * k + col])) pivot = r;
    }
    if (std::abs(a[pivot * k + col]) < 1e-300) return false;
    if (pivot != col) {
      for (size_t c = 0; c < k; ++c) std::swap(a[pivot * k + c], a[col * k + c]);
      std::swap(g[pivot], g[col]);
    }
    for (size_t r = col + 1; r < k; ++r) {
      const double f = a[r * k + col] / a[col * k + col];
      for (size_t c = col; c < k; ++c) a[r * k + c] -= f * a[col * k + c];
      g[r] -= f * g[col];
    }
  }
  step.assign(k, 0.0);
  for (size_t i = k; i-- > 0;) {
    double v = g[i];
    for (size_t c = i + 1; c < k; ++c) v -= a[i * k + c] * step[c];
    step[i] = v / a[i * k + i];
  }
  return true;
}

}  // namespace

FitResult fit_curve(std::span<const double> x, std::span<const double> y,
                    const CurveModel& model, std::vector<double> init, std::string kind,
                    int max_iterations) {
  if (x.size() != y.size() || x.size() < init.size()) {
    throw DataError("fit_curve: need at least as many points as parameters");
  }
  const size_t k = init.size();
  const size_t n = x.size();

  std::vector<double> params = std::move(init);
  double ss = sum_squared_residuals(x, y, model, params);
  double lambda = 1e-3;
  bool converged = false;

  std::vector<double> jac(n * k);
  std::vector<double> residuals(n);
  std::vector<double> jtj(k * k);
  std::vector<double> jtr(k);
  std::vector<double> step;
  std::vector<double> trial(k);

  for (int iter = 0; iter < max_iterations && std::isfinite(ss); ++iter) {
    for (size_t i = 0; i < n; ++i) residuals[i] = y[i] - model(x[i], params);

    // Central-difference Jacobian of the model w.r.t. each parameter.
    for (size_t j = 0; j < k; ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(params[j]));
      std::vector<double> plus(params), minus(params);
      plus[j] += h;
      minus[j] -= h;
      for (size_t i = 0; i < n; ++i) {
        const double d = (model(x[i], plus) - model(x[i], minus)) / (2.0 * h);
        jac[i * k + j] = std::isfinite(d) ? d : 0.0;
      }
    }

    std::fill(jtj.begin(), jtj.end(), 0.0);
    std::fill(jtr.begin(), jtr.end(), 0.0);
    for (size_t i = 0; i < n; ++i) {
      for (size_t a = 0; a < k; ++a) {
        jtr[a] += jac[i * k + a] * residuals[i];
        for (size_t b = 0; b < k; ++b) jtj[a * k + b] += jac[i * k + a] * jac[i * k + b];
      }
    }

    bool improved = false;
    for (int attempt = 0; attempt < 20; ++attempt) {
      if (!solve_damped(jtj, jtr, lambda, k, step)) {
        lambda *= 10.0;
        continue;
      }
      for (size_t j = 0; j < k; ++j) trial[j] = params[j] + step[j];
      const double trial_ss = sum_squared_residuals(x, y, model, trial);
      if (trial_ss < ss) {
        if (ss - trial_ss < 1e-14 * (1.0 + ss)) converged = true;
        params = trial;
        ss = trial_ss;
        lambda = std::max(lambda * 0.3, 1e-12);
        improved = true;
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
    if (!improved) {
      converged = true;
      break;
    }
    if (converged) break;
  }

  FitResult result;
  result.kind = std::move(kind);
  result.params = std::move(params);
  result.converged = converged;
  result.r_squared = r_squared(x, y, model, result.params);
  return result;
}

double r_squared(std::span<const double> x, std::span<const double> y,
                 const CurveModel& model, std::span<const double> params) {
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double ss_tot = 0.0;
  for (double v : y) ss_tot += (v - mean) * (v - mean);
  const double ss_res = sum_squared_residuals(x, y, model, params);
  if (!(ss_tot > 0.0)) {
    return ss_res <= 1e-24 ? 1.0 : 0.0;  // constant series
  }
  if (!std::isfinite(ss_res)) return -std::numeric_limits<double>::infinity();
  return 1.0 - ss_res / ss_tot;
}

FitResult fit_saturating(std::span<const double> x, std::span<const double> y) {
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  const double span = std::max(*std::max_element(x.begin(), x.end()) -
                                   *std::min_element(x.begin(), x.end()),
                               1e-9);
  FitResult best;
  best.r_squared = -std::numeric_limits<double>::infinity();
  for (double c0 : {0.5 / span, 2.0 / span, 8.0 / span, 32.0 / span}) {
    auto fit = fit_curve(x, y, saturating_exp, {*hi, std::max(*hi - *lo, 1e-9), c0},
                         "saturating_exp");
    if (fit.r_squared > best.r_squared) best = std::move(fit);
  }
  return best;
}

FitResult fit_growth(std::span<const double> x, std::span<const double> y) {
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  const double range = std::max(*hi - *lo, 1e-9);

  FitResult best;
  best.r_squared = -std::numeric_limits<double>::infinity();
  for (double shift : {0.5, 0.1, 0.9}) {
    // Linear regression of log(y - d0) on x seeds (a, c).
    const double d0 = *lo - shift * range;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    size_t n = 0;
    for (size_t i = 0; i < x.size(); ++i) {
      const double v = y[i] - d0;
      if (v <= 0.0) continue;
      const double ly = std::log(v);
      sx += x[i];
      sy += ly;
      sxx += x[i] * x[i];
      sxy += x[i] * ly;
      ++n;
    }
    if (n < 2) continue;
    const double denom = static_cast<double>(n) * sxx - sx * sx;
    const double c0 = denom != 0.0 ? (static_cast<double>(n) * sxy - sx * sy) / denom : 0.0;
    const double a0 = std::exp((sy - c0 * sx) / static_cast<double>(n));
    auto fit = fit_curve(x, y, growth_exp, {a0, c0, d0}, "growth_exp");
    if (fit.r_squared > best.r_squared) best = std::move(fit);
  }
  if (best.params.empty()) {
    best = fit_curve(x, y, growth_exp, {range, 1e-3, *lo}, "growth_exp");
  }
  return best;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  const size_t n = v.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman_rho(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw DataError("spearman_rho: need two equal-length series of >= 2 points");
  }
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double num = 0.0, da = 0.0, db = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    num += (ra[i] - mean) * (rb[i] - mean);
    da += (ra[i] - mean) * (ra[i] - mean);
    db += (rb[i] - mean) * (rb[i] - mean);
  }
  if (da <= 0.0 || db <= 0.0) return 0.0;
  return num / std::sqrt(da * db);
}

}  // namespace divkit
