#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "maips/diagnostics.hpp"
#include "maips/errors.hpp"

using namespace maips;

namespace {

std::vector<double> ar1(double phi, int n, std::uint64_t tag) {
  auto s = testing::stream(40, tag);
  std::vector<double> x(static_cast<std::size_t>(n));
  double v = s.normal() / std::sqrt(1.0 - phi * phi);
  for (auto &xi : x) {
    xi = v;
    v = phi * v + s.normal();
  }
  return x;
}

} // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("autocorrelation agrees with the direct formula") {
  const std::vector<double> x = ar1(0.7, 500, 1);
  const auto rho = autocorrelation(x, 20);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= x.size();
  double c0 = 0.0;
  for (double v : x) c0 += (v - mean) * (v - mean);
  c0 /= x.size();
  for (int k = 0; k <= 20; ++k) {
    double ck = 0.0;
    for (std::size_t i = 0; i + k < x.size(); ++i) ck += (x[i] - mean) * (x[i + k] - mean);
    ck /= static_cast<double>(x.size() - k);
    CHECK(rho[k] == doctest::Approx(ck / c0).epsilon(1e-12));
  }
}

TEST_CASE("autocorrelation rejects constant and short series") {
  const std::vector<double> c(100, 3.0);
  CHECK_THROWS_AS(autocorrelation(c, 5), ZeroVariance);
  CHECK_THROWS_AS(integrated_autocorr_series(c), ZeroVariance);
  CHECK_THROWS_AS(autocorrelation(std::vector<double>{1.0, 2.0}, 5), ConfigError);
}

TEST_CASE("integrated autocorrelation of iid noise is near one") {
  auto s = testing::stream(41);
  std::vector<double> x(100000);
  for (auto &v : x) v = s.normal();
  const IntAcResult r = integrated_autocorr_series(x);
  CHECK(r.int_ac == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("integrated autocorrelation of AR(1) matches (1+phi)/(1-phi)") {
  for (double phi : {0.5, 0.9}) {
    const std::vector<double> x = ar1(phi, 200000, static_cast<std::uint64_t>(phi * 10));
    const double expect = (1.0 + phi) / (1.0 - phi);
    CHECK(integrated_autocorr_series(x).int_ac == doctest::Approx(expect).epsilon(0.1));
    CHECK(integrated_autocorr(autocorrelation(x, 400)) == doctest::Approx(expect).epsilon(0.1));
  }
}

TEST_CASE("integrated autocorrelation truncation") {
  CHECK(integrated_autocorr(std::vector<double>{1.0, 0.5, 0.25, 0.125}) ==
        doctest::Approx(1.0 + 2.0 * (0.5 + 0.25 + 0.125)));
  // Second pair 0.1 - 0.3 is negative and stops the sum.
  CHECK(integrated_autocorr(std::vector<double>{1.0, 0.2, 0.1, -0.3, 0.5, 0.5}) ==
        doctest::Approx(1.4));
  CHECK(integrated_autocorr(std::vector<double>{}) == 1.0);
}

TEST_CASE("efficiency cost") {
  CHECK(efficiency_cost(2.0, 100, 10, 5, 1) == doctest::Approx(2000.0));
  CHECK(efficiency_cost(2.0, 100, 10, 5, 20) == doctest::Approx(400.0));
  CHECK(efficiency_cost(2.0, 100, 10, 1, 20) == doctest::Approx(2000.0));
  // Homogeneous of degree one in int_ac, N and M.
  CHECK(efficiency_cost(6.0, 100, 10, 5, 2) == doctest::Approx(3 * efficiency_cost(2.0, 100, 10, 5, 2)));
  CHECK(efficiency_cost(2.0, 300, 10, 5, 2) == doctest::Approx(3 * efficiency_cost(2.0, 100, 10, 5, 2)));
  CHECK_THROWS_AS(efficiency_cost(1.0, 10, 5, 6, 1), ConfigError);
}

TEST_CASE("replica MSE is squared bias plus variance") {
  const std::vector<double> e = {0.4, 0.6, 0.55, 0.45, 0.52};
  const double truth = 0.5;
  double mean = 0.0;
  for (double v : e) mean += v;
  mean /= e.size();
  double var = 0.0;
  for (double v : e) var += (v - mean) * (v - mean);
  var /= e.size();
  CHECK(replica_mse(e, truth) == doctest::Approx((mean - truth) * (mean - truth) + var));
  CHECK_THROWS_AS(replica_mse(std::vector<double>{0.5}, truth), ConfigError);
}

TEST_CASE("chi-square distribution") {
  CHECK(chi2_cdf(2.0, 2.0) == doctest::Approx(1.0 - std::exp(-1.0)));
  CHECK(chi2_quantile(0.5, 2.0) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(chi2_cdf(-1.0, 3.0) == 0.0);
  CHECK_THROWS_AS(chi2_quantile(1.0, 2.0), ConfigError);

  // dof 4: integrate the density x e^{-x/2} / 4 up to the computed median.
  const double q = chi2_quantile(0.5, 4.0);
  CHECK(q == doctest::Approx(3.356694).epsilon(1e-6));
  const int n = 20000;
  const double h = q / n;
  double total = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double x = i * h;
    total += w * x * std::exp(-x / 2.0) / 4.0;
  }
  CHECK(total * h / 3.0 == doctest::Approx(0.5).epsilon(1e-10));
  for (double p : {0.01, 0.3, 0.9, 0.999}) {
    CHECK(std::abs(chi2_cdf(chi2_quantile(p, 7.0), 7.0) - p) < 1e-12);
  }
}

TEST_CASE("means and estimators") {
  const std::vector<double> x = {1.0, 2.0, 3.0, 6.0};
  CHECK(series_mean(x) == 3.0);
  const auto r = running_mean(x);
  CHECK(r[0] == 1.0);
  CHECK(r[1] == 1.5);
  CHECK(r[3] == 3.0);
  Ensemble e(2, 1);
  e << 1.0, 3.0;
  const ParticleFunction sq = [](const Vector &v) { return v(0) * v(0); };
  CHECK(ensemble_average(sq, e) == 5.0);
  CHECK(ensemble_recorder("sq", sq).fn(e) == 5.0);
  CHECK(ensemble_estimator(sq, {e, 2.0 * e}) == std::vector<double>{5.0, 20.0});
}

} // TEST_SUITE
