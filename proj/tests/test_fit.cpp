#include <doctest.h>

#include <cmath>
#include <vector>

#include "divkit/fit.hpp"
#include "divkit/rng.hpp"

using namespace divkit;

TEST_CASE("perfect saturating series fits with R^2 = 1") {
  const std::vector<double> truth{0.45, 0.25, 0.08};
  std::vector<double> x{1, 2, 5, 10, 20, 50, 100};
  std::vector<double> y;
  for (double xv : x) y.push_back(saturating_exp(xv, truth));

  const FitResult fit = fit_saturating(x, y);
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(fit.params[0] == doctest::Approx(0.45).epsilon(1e-3));
}

TEST_CASE("perfect exponential series fits with R^2 >= 0.999") {
  const std::vector<double> truth{0.02, 0.003, 0.1};
  std::vector<double> x{50, 100, 200, 500, 1000};
  std::vector<double> y;
  for (double xv : x) y.push_back(growth_exp(xv, truth));

  const FitResult fit = fit_growth(x, y);
  CHECK(fit.r_squared >= 0.999);
}

TEST_CASE("noisy saturating data still fits well") {
  const std::vector<double> truth{0.4, 0.3, 0.05};
  std::vector<double> x{1, 2, 5, 10, 20, 50, 100};
  std::vector<double> y;
  Rng rng(7);
  for (double xv : x) y.push_back(saturating_exp(xv, truth) + 0.004 * rng.normal());
  CHECK(fit_saturating(x, y).r_squared >= 0.9);
}

TEST_CASE("constant series is handled without crashing") {
  std::vector<double> x{1, 2, 5, 10};
  std::vector<double> y(4, 0.3);
  const FitResult sat = fit_saturating(x, y);
  CHECK(std::abs(sat.params[1]) < 1e-3);  // b ~ 0: flat curve
  CHECK(sat.r_squared == doctest::Approx(1.0));
  const FitResult gro = fit_growth(x, y);
  CHECK(std::isfinite(gro.r_squared));
}

TEST_CASE("r_squared guards zero variance") {
  std::vector<double> x{1, 2, 3};
  std::vector<double> y{2, 2, 2};
  CHECK(r_squared(x, y, saturating_exp, std::vector<double>{2.0, 0.0, 1.0}) == 1.0);
  CHECK(r_squared(x, y, saturating_exp, std::vector<double>{5.0, 0.0, 1.0}) == 0.0);
}

TEST_CASE("spearman rank correlation") {
  SUBCASE("perfect monotone is 1") {
    std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> y{0.1, 0.4, 0.5, 0.9, 2.0};
    CHECK(spearman_rho(x, y) == doctest::Approx(1.0));
  }
  SUBCASE("reversed is -1") {
    std::vector<double> x{1, 2, 3, 4};
    std::vector<double> y{9, 7, 5, 1};
    CHECK(spearman_rho(x, y) == doctest::Approx(-1.0));
  }
  SUBCASE("one adjacent swap among six points") {
    std::vector<double> x{1, 2, 3, 4, 5, 6};
    std::vector<double> y{1, 2, 4, 3, 5, 6};
    // 1 - 6*2 / (6*35) = 0.9428...
    CHECK(spearman_rho(x, y) == doctest::Approx(1.0 - 12.0 / 210.0).epsilon(1e-12));
  }
  SUBCASE("ties get average ranks") {
    std::vector<double> x{1, 2, 3, 4};
    std::vector<double> y{1, 1, 2, 3};
    CHECK(spearman_rho(x, y) > 0.9);
  }
}
