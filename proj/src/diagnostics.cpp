#include "maips/diagnostics.hpp"

#include <cmath>
#include <numeric>

#include <boost/math/special_functions/gamma.hpp>

#include "maips/errors.hpp"

namespace maips {

double ensemble_average(const ParticleFunction &f, const Ensemble &e) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < e.rows(); ++i) total += f(e.row(i).transpose());
  return total / static_cast<double>(e.rows());
}

Recorder ensemble_recorder(std::string name, ParticleFunction f) {
  return {std::move(name), [f = std::move(f)](const Ensemble &e) {
            return ensemble_average(f, e);
          }};
}

std::vector<double> ensemble_estimator(const ParticleFunction &f,
                                       const std::vector<Ensemble> &snapshots) {
  std::vector<double> out;
  out.reserve(snapshots.size());
  for (const auto &e : snapshots) out.push_back(ensemble_average(f, e));
  return out;
}

double series_mean(std::span<const double> series) {
  if (series.empty()) return 0.0;
  return std::accumulate(series.begin(), series.end(), 0.0) /
         static_cast<double>(series.size());
}

std::vector<double> running_mean(std::span<const double> series) {
  std::vector<double> out(series.size());
  double total = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    total += series[i];
    out[i] = total / static_cast<double>(i + 1);
  }
  return out;
}

namespace {

struct Centered {
  std::vector<double> x;
  double c0 = 0.0;
};

Centered center(std::span<const double> series) {
  Centered c;
  const double mean = series_mean(series);
  c.x.resize(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) c.x[i] = series[i] - mean;
  for (double v : c.x) c.c0 += v * v;
  c.c0 /= static_cast<double>(series.size());
  if (!(c.c0 > 0.0)) throw ZeroVariance("autocorrelation: series has zero variance");
  return c;
}

double lag_cov(const std::vector<double> &x, std::size_t k) {
  const std::size_t n = x.size();
  double total = 0.0;
  for (std::size_t i = 0; i + k < n; ++i) total += x[i] * x[i + k];
  return total / static_cast<double>(n - k);
}

} // namespace

std::vector<double> autocorrelation(std::span<const double> series, int max_lag) {
  if (max_lag < 0 || series.size() < static_cast<std::size_t>(max_lag) + 2) {
    throw ConfigError("autocorrelation: need N >= max_lag + 2");
  }
  const Centered c = center(series);
  std::vector<double> rho(static_cast<std::size_t>(max_lag) + 1);
  rho[0] = 1.0;
  for (int k = 1; k <= max_lag; ++k) rho[k] = lag_cov(c.x, k) / c.c0;
  return rho;
}

double integrated_autocorr(std::span<const double> rho) {
  if (rho.empty()) return 1.0;
  double total = 0.0;
  for (std::size_t t = 0; 2 * t + 1 < rho.size(); ++t) {
    const double pair = rho[2 * t] + rho[2 * t + 1];
    if (!(pair > 0.0)) break;
    total += pair;
  }
  return total > 0.0 ? -1.0 + 2.0 * total : 1.0;
}

IntAcResult integrated_autocorr_series(std::span<const double> series) {
  const Centered c = center(series);
  const std::size_t n = series.size();
  IntAcResult res;
  double total = 0.0;
  // Lags up to N/2 keep every c_k averaged over at least half the series.
  for (std::size_t t = 0; 2 * t + 1 <= n / 2; ++t) {
    const double r0 = t == 0 ? 1.0 : lag_cov(c.x, 2 * t) / c.c0;
    const double r1 = lag_cov(c.x, 2 * t + 1) / c.c0;
    if (!(r0 + r1 > 0.0)) break;
    total += r0 + r1;
    res.lag = static_cast<int>(2 * t + 1);
  }
  res.int_ac = total > 0.0 ? -1.0 + 2.0 * total : 1.0;
  return res;
}

double efficiency_cost(double int_ac, double n, double m, double b, double cores) {
  if (!(n > 0 && m > 0 && b > 0 && cores > 0) || b > m) {
    throw ConfigError("efficiency_cost: need positive N, M, B, cores and B <= M");
  }
  return int_ac * n * m / std::min(cores, b);
}

double replica_mse(std::span<const double> estimates, double truth) {
  if (estimates.size() < 2) throw ConfigError("replica_mse: need at least 2 replicas");
  double total = 0.0;
  for (double e : estimates) total += (e - truth) * (e - truth);
  return total / static_cast<double>(estimates.size());
}

double chi2_cdf(double x, double dof) {
  if (!(dof > 0.0)) throw ConfigError("chi2: dof must be positive");
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_p(0.5 * dof, 0.5 * x);
}

double chi2_quantile(double p, double dof) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("chi2_quantile: p must lie in (0, 1)");
  double lo = 0.0;
  double hi = std::max(1.0, dof);
  while (chi2_cdf(hi, dof) < p) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (chi2_cdf(mid, dof) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

} // namespace maips
