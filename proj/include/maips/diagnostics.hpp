#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "maips/dynamics.hpp"
#include "maips/metropolis.hpp"

namespace maips {

using ParticleFunction = std::function<double(const Vector &)>;

/// (1/M) sum_i F(x_i) over the rows of e.
double ensemble_average(const ParticleFunction &f, const Ensemble &e);

/// Recorder producing the ensemble average of f at every iteration.
Recorder ensemble_recorder(std::string name, ParticleFunction f);

/// Per-snapshot ensemble averages.
std::vector<double> ensemble_estimator(const ParticleFunction &f,
                                       const std::vector<Ensemble> &snapshots);

double series_mean(std::span<const double> series);
std::vector<double> running_mean(std::span<const double> series);

/// rho_k = c_k / c_0 for k = 0..max_lag with
/// c_k = 1/(N-k) sum_i (F_i - mean)(F_{i+k} - mean).
/// Throws ZeroVariance for a constant series.
std::vector<double> autocorrelation(std::span<const double> series, int max_lag);

/// 1 + 2 sum rho_k, truncated by Geyer's initial positive sequence: pairs
/// rho_{2t} + rho_{2t+1} (t >= 0, rho_0 = 1) are summed while positive.
double integrated_autocorr(std::span<const double> rho);

struct IntAcResult {
  double int_ac = 1.0;
  int lag = 0;  // last lag included
};

/// Same truncation, computing autocorrelations lazily from the series.
IntAcResult integrated_autocorr_series(std::span<const double> series);

/// int_ac * N * M / min(cores, B).
double efficiency_cost(double int_ac, double n, double m, double b, double cores);

double replica_mse(std::span<const double> estimates, double truth);

double chi2_cdf(double x, double dof);
/// Bisection on chi2_cdf; |cdf(q) - p| < 1e-12 on return.
double chi2_quantile(double p, double dof);

} // namespace maips
