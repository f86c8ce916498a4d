#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "maips/bias_lab.hpp"
#include "maips/config.hpp"
#include "maips/metropolis.hpp"
#include "maips/ode_problem.hpp"

namespace maips {

/// "ew", "pw", "pw-rs", "bw<B>", "bw<B>-rs", "sim", "ua".
KernelMode parse_mode(const std::string &label, int particles);

/// Worker count from MAIPS_WORKERS, else 1.
int default_workers();

/// Runs fn(0..n-1) on up to `workers` threads. The exception of the lowest
/// failing index is rethrown after all workers finish.
void parallel_for(int n, int workers, const std::function<void(int)> &fn);

/// Rows mean + sqrt(var) * N(0, I), one Init stream per particle.
Ensemble gaussian_init(int m, const Vector &mean, const Vector &var, std::uint64_t seed,
                       std::uint64_t replica);

// Target and initial ensemble an experiment starts from.
struct ExperimentTarget {
  TargetPtr target;
  Ensemble init;
  LinearGaussianIPPtr problem;  // exp3 only
};

ExperimentTarget experiment_target(const Config &cfg, const std::string &experiment);

// ---------------------------------------------------------------------------
// Bimodal target, adjusted vs unadjusted.

struct Exp1Run {
  std::string method;
  std::string mode;  // "ew" or "ua"
  DynamicsSpec spec;
  double acceptance = 0.0;
  double burn_in_acceptance = 0.0;
  double tv_distance = 1.0;
  bool failed = false;  // numerical breakdown; tv_distance stays 1
  std::string error;
  std::vector<double> histogram;     // probability per bin
  std::vector<double> ensemble_mean;  // per sampling iteration
};

struct Exp1Result {
  std::uint64_t seed = 0;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> reference;  // quadrature probability per bin
  std::vector<Exp1Run> runs;

  const Exp1Run &find(const std::string &method, const std::string &mode) const;
};

/// Bin probabilities of exp(log pi) on [lo, hi], normalized on that interval.
std::vector<double> quadrature_reference(const Target &target, double lo, double hi,
                                         int bins, int points_per_bin = 200);

Exp1Result run_exp1(const Config &cfg, int workers);
void write_exp1(const Exp1Result &r, const std::filesystem::path &dir);

// ---------------------------------------------------------------------------
// 4D Gaussian, probability of the median chi-square ball.

struct Exp2Chain {
  std::string label;  // e.g. "aldi-ew", "pmala-pw"
  std::string method;
  std::string mode;
  int block_size = 0;  // B entering the cost model
  double step = 0.0;
  double gamma = 0.0;
  double acceptance = 0.0;
  double estimate = 0.0;  // P_N
  double int_ac = 0.0;    // NaN for a constant series
  int lag = 0;
  std::vector<double> series;
  std::vector<double> rho;
};

struct Exp2SweepSample {
  std::string label;
  double target_rate = 0.0;
  double step = 0.0;
  double acceptance = 0.0;
  double estimate = 0.0;
};

struct Exp2Replica {
  int replica = 0;
  double aldi_step = 0.0;
  double pmala_step = 0.0;
  std::vector<TunerEpoch> aldi_trace;
  std::vector<TunerEpoch> pmala_trace;
  std::vector<Exp2Chain> chains;
  std::vector<Exp2SweepSample> sweep;

  const Exp2Chain &find(const std::string &label) const;
};

struct Exp2SweepPoint {
  std::string label;
  double target_rate = 0.0;
  double mean_acceptance = 0.0;
  double mean_step = 0.0;
  double mse = 0.0;
};

struct Exp2Result {
  std::uint64_t seed = 0;
  int particles = 0;
  int iterations = 0;
  double quantile = 0.0;
  std::vector<Exp2Replica> replicas;
  std::vector<int> cores;
  std::vector<Exp2SweepPoint> sweep;

  std::vector<std::string> labels() const;
  /// Mean over replicas, ignoring NaN entries.
  double mean_int_ac(const std::string &label) const;
  double mean_estimate(const std::string &label) const;
  double mean_acceptance(const std::string &label) const;
  int block_size(const std::string &label) const;
};

Exp2Result run_exp2(const Config &cfg, int workers);
void write_exp2(const Exp2Result &r, const std::filesystem::path &dir);

// ---------------------------------------------------------------------------
// Linear inverse problem for an elliptic ODE.

struct Exp3Chain {
  std::string label;  // "<method>-<mode>"
  std::string method;
  std::string mode;
  double step = 0.0;
  double gamma = 0.0;
  double acceptance = 0.0;
  Vector mean;            // chain posterior mean (time and ensemble average)
  Matrix cov;             // pooled particle covariance
  Vector standard_error;  // of each mean component, from int_ac
  Vector int_ac;          // per component of the ensemble mean
  std::vector<std::vector<double>> series;  // [component][iteration]
  // Ensemble fraction inside the posterior's median chi-square ball.
  std::vector<double> ball;
  double ball_estimate = 0.0;
  double ball_int_ac = 0.0;  // NaN for a constant series
  std::vector<double> ball_rho;

  double mean_int_ac() const;
  /// max_k |mean_k - m*_k| / se_k
  double max_z(const Vector &truth) const;
};

struct Exp3Tuning {
  std::string method;
  std::string mode;
  double step = 0.0;
  std::vector<TunerEpoch> trace;
};

struct Exp3Result {
  std::uint64_t seed = 0;
  LinearGaussianIPPtr problem;
  double quantile = 0.0;
  std::vector<Exp3Tuning> tuning;
  std::vector<Exp3Chain> chains;

  const Exp3Chain &find(const std::string &label) const;
};

LinearGaussianIP exp3_problem(const Config &cfg);
Exp3Result run_exp3(const Config &cfg, int workers);
void write_exp3(const Exp3Result &r, const std::filesystem::path &dir);

// ---------------------------------------------------------------------------
// Exact transition-matrix studies.

struct DiscreteReport {
  std::string construction;  // "printed" or "constructed"
  Vector invariant;          // over (x1,x1), (x1,x2), (x2,x1), (x2,x2)
  Vector first_marginal;
  Vector second_marginal;
  Vector one_step_first;
  Vector one_step_second;
};

struct GridKernelReport {
  std::string example;
  std::string kernel;
  double residual = 0.0;  // of the product target after one application
};

struct GridSimReport {
  std::string example;
  GridKernelSpec spec;
  PowerResult power;
  BiasSummary summary;
  Vector target;
  Vector nodes;
};

struct BiasLabResult {
  std::vector<DiscreteReport> discrete;
  std::vector<GridKernelReport> kernels;
  std::vector<GridSimReport> simultaneous;

  const DiscreteReport &find_discrete(const std::string &construction) const;
  const GridSimReport &find_sim(const std::string &example) const;
};

BiasLabResult run_bias_lab(const Config &cfg, int workers);
void write_bias_lab(const BiasLabResult &r, const std::filesystem::path &dir);

// ---------------------------------------------------------------------------

struct RunSummary {
  std::string experiment;
  std::filesystem::path directory;
  std::vector<std::pair<std::string, std::string>> facts;  // for the manifest
};

/// Writes the CSVs of a finished experiment plus manifest.ini into
/// out/<experiment>, via a staging directory that is removed on failure.
RunSummary publish(const Config &cfg, const std::filesystem::path &out, const Exp1Result &r);
RunSummary publish(const Config &cfg, const std::filesystem::path &out, const Exp2Result &r);
RunSummary publish(const Config &cfg, const std::filesystem::path &out, const Exp3Result &r);
RunSummary publish(const Config &cfg, const std::filesystem::path &out,
                   const BiasLabResult &r);

/// Runs cfg's [run] experiment and writes its CSVs plus manifest.ini into
/// out/<experiment>. Output goes to a staging directory first and is
/// removed if anything fails.
RunSummary run_to_directory(const Config &cfg, const std::filesystem::path &out,
                            int workers);

/// Defaults, then the file (unknown keys rejected). A [manifest] section
/// is ignored so manifests can be re-run.
Config load_run_config(const std::filesystem::path &path);

} // namespace maips
