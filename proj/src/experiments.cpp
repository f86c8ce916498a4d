#include "maips/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <thread>
#include <tuple>

#include "maips/csv.hpp"
#include "maips/diagnostics.hpp"
#include "maips/errors.hpp"
#include "maips/format.hpp"

namespace maips {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Shortest round-trip text, for labels.
std::string short_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

int positive_int(const Config &cfg, const std::string &key, long long min = 1) {
  const long long v = cfg.get_int(key);
  if (v < min || v > std::numeric_limits<int>::max()) {
    throw ConfigError("config: '" + key + "' must be >= " + std::to_string(min));
  }
  return static_cast<int>(v);
}

double positive_double(const Config &cfg, const std::string &key) {
  const double v = cfg.get_double(key);
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError("config: '" + key + "' must be positive");
  }
  return v;
}

TuneOptions tune_options(const Config &cfg, const std::string &section) {
  TuneOptions o;
  o.target_rate = cfg.get_double(section + ".target_rate");
  o.epoch_length = positive_int(cfg, section + ".tune_epoch_length");
  o.c0 = positive_double(cfg, section + ".tune_c0");
  if (!(o.target_rate > 0.05 && o.target_rate < 0.95)) {
    throw ConfigError("config: '" + section + ".target_rate' must lie in (0.05, 0.95)");
  }
  return o;
}

// Tuning runs draw from their own streams so the chains that follow never
// reuse tuning noise.
std::uint64_t tuning_seed(std::uint64_t seed) { return mix64(seed ^ 0x74756e65ULL); }

double nan_mean(const std::vector<double> &v) {
  double s = 0.0;
  int n = 0;
  for (double x : v) {
    if (std::isnan(x)) continue;
    s += x;
    ++n;
  }
  return n ? s / n : kNaN;
}

} // namespace

Ensemble gaussian_init(int m, const Vector &mean, const Vector &var, std::uint64_t seed,
                       std::uint64_t replica) {
  Ensemble e(m, mean.size());
  for (int i = 0; i < m; ++i) {
    RngStream s({seed, replica, 0, 0, static_cast<std::uint64_t>(i), DrawPurpose::Init});
    for (Eigen::Index a = 0; a < mean.size(); ++a) {
      e(i, a) = mean(a) + std::sqrt(var(a)) * s.normal();
    }
  }
  return e;
}

ExperimentTarget experiment_target(const Config &cfg, const std::string &experiment) {
  ExperimentTarget t;
  const std::uint64_t seed = cfg.get_u64("run.seed");
  if (experiment == "exp1") {
    const double m0 = cfg.get_double("exp1.m0");
    t.target = std::make_shared<BimodalTarget>(positive_double(cfg, "exp1.sigma"), m0);
    t.init = gaussian_init(positive_int(cfg, "exp1.particles"), Vector::Constant(1, m0),
                           Vector::Ones(1), seed, 0);
  } else if (experiment == "exp2") {
    Vector var(4);
    var << 1.0, 0.1, 0.01, 0.001;
    t.target = std::make_shared<DiagGaussianTarget>(var);
    t.init = gaussian_init(positive_int(cfg, "exp2.particles"), Vector::Zero(4), Vector::Ones(4),
                           seed, 0);
  } else if (experiment == "exp3") {
    t.problem = std::make_shared<const LinearGaussianIP>(exp3_problem(cfg));
    t.target = std::make_shared<GaussianPosteriorTarget>(t.problem);
    t.init = gaussian_init(positive_int(cfg, "exp3.particles"), Vector::Zero(t.problem->dim()),
                           t.problem->prior_variances, seed, 0);
  } else {
    throw ConfigError("no sampling target for experiment '" + experiment + "'");
  }
  return t;
}

KernelMode parse_mode(const std::string &label, int particles) {
  if (label == "ew") return KernelMode::ensemble_wise();
  if (label == "pw") return KernelMode::sequential();
  if (label == "pw-rs") return KernelMode::sequential(ScanOrder::RandomPermutation);
  if (label == "sim") return KernelMode::simultaneous();
  if (label == "ua") return KernelMode::unadjusted();
  if (label.rfind("bw", 0) == 0) {
    std::string rest = label.substr(2);
    ScanOrder scan = ScanOrder::Deterministic;
    if (rest.size() > 3 && rest.compare(rest.size() - 3, 3, "-rs") == 0) {
      scan = ScanOrder::RandomPermutation;
      rest.resize(rest.size() - 3);
    }
    int b = 0;
    const auto res = std::from_chars(rest.data(), rest.data() + rest.size(), b);
    if (res.ec == std::errc() && res.ptr == rest.data() + rest.size() && b > 0) {
      return KernelMode::block_wise(BlockPartition::uniform(particles, b), scan);
    }
  }
  throw ConfigError("unknown kernel mode '" + label + "'");
}

int default_workers() {
  if (const char *env = std::getenv("MAIPS_WORKERS")) {
    int w = 0;
    const std::string s(env);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), w);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || w < 1) {
      throw ConfigError("MAIPS_WORKERS must be a positive integer");
    }
    return w;
  }
  return 1;
}

void parallel_for(int n, int workers, const std::function<void(int)> &fn) {
  if (n <= 0) return;
  const int threads = std::max(1, std::min(workers, n));
  std::vector<std::exception_ptr> errors(n);
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(work);
  for (auto &t : pool) t.join();
  for (auto &e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------

const Exp1Run &Exp1Result::find(const std::string &method, const std::string &mode) const {
  for (const auto &r : runs) {
    if (r.method == method && r.mode == mode) return r;
  }
  throw ConfigError("exp1: no run " + method + "-" + mode);
}

std::vector<double> quadrature_reference(const Target &target, double lo, double hi,
                                         int bins, int points_per_bin) {
  const double w = (hi - lo) / bins;
  std::vector<double> ref(bins, 0.0);
  double total = 0.0;
  Vector x(1);
  for (int b = 0; b < bins; ++b) {
    for (int k = 0; k < points_per_bin; ++k) {
      x(0) = lo + w * (b + (k + 0.5) / points_per_bin);
      ref[b] += std::exp(target.log_density(x));
    }
    total += ref[b];
  }
  for (auto &r : ref) r /= total;
  return ref;
}

Exp1Result run_exp1(const Config &cfg, int workers) {
  Exp1Result result;
  result.seed = cfg.get_u64("run.seed");
  const double sigma = positive_double(cfg, "exp1.sigma");
  const double m0 = cfg.get_double("exp1.m0");
  const int m = positive_int(cfg, "exp1.particles");
  const int burn_in = positive_int(cfg, "exp1.burn_in", 0);
  const int iterations = positive_int(cfg, "exp1.iterations");
  const int bins = positive_int(cfg, "exp1.hist_bins");
  result.lo = cfg.get_double("exp1.hist_lo");
  result.hi = cfg.get_double("exp1.hist_hi");
  if (!(result.hi > result.lo)) throw ConfigError("config: exp1.hist_hi must exceed hist_lo");

  std::vector<std::pair<std::string, DynamicsSpec>> methods;
  for (const auto &name : cfg.get_strings("exp1.methods")) {
    DynamicsSpec spec;
    if (name == "aldi") {
      spec = DynamicsSpec::aldi(cfg.get_double("exp1.aldi_h"), cfg.get_double("exp1.aldi_gamma"));
    } else if (name == "svgd") {
      spec = DynamicsSpec::svgd(cfg.get_double("exp1.svgd_h"),
                                cfg.get_double("exp1.svgd_bandwidth"));
    } else if (name == "cbs") {
      spec = DynamicsSpec::cbs(cfg.get_double("exp1.cbs_h"), cfg.get_double("exp1.cbs_gamma"));
    } else if (name == "pmala") {
      spec = DynamicsSpec::pmala(cfg.get_double("exp1.aldi_h"));
    } else {
      throw ConfigError("exp1: unknown method '" + name + "'");
    }
    spec.validate();
    methods.emplace_back(name, spec);
  }
  if (methods.empty()) throw ConfigError("exp1: no methods configured");

  const BimodalTarget target(sigma, m0);
  result.reference = quadrature_reference(target, result.lo, result.hi, bins);
  const Ensemble init =
      gaussian_init(m, Vector::Constant(1, m0), Vector::Ones(1), result.seed, 0);

  const std::vector<std::string> modes = {"ew", "ua"};
  result.runs.resize(methods.size() * modes.size());
  const double width = (result.hi - result.lo) / bins;

  parallel_for(static_cast<int>(result.runs.size()), workers, [&](int job) {
    const auto &[name, spec] = methods[job / modes.size()];
    Exp1Run &run = result.runs[job];
    run.method = name;
    run.mode = modes[job % modes.size()];
    run.spec = spec;
    std::vector<double> counts(bins, 0.0);
    const double lo = result.lo;
    const double hi = result.hi;
    Recorder rec{"mean", [&](const Ensemble &e) {
                   for (Eigen::Index i = 0; i < e.rows(); ++i) {
                     const double x = e(i, 0);
                     if (std::isfinite(x) && x >= lo && x < hi) {
                       counts[std::min(bins - 1, static_cast<int>((x - lo) / width))] += 1.0;
                     }
                   }
                   return e.col(0).mean();
                 }};
    ChainConfig cc;
    cc.iterations = iterations;
    cc.burn_in = burn_in;
    cc.seed = result.seed;
    try {
      const ChainOutput out =
          run_chain(parse_mode(run.mode, m), spec, target, init, cc, {rec});
      run.acceptance = out.acceptance_rate();
      run.burn_in_acceptance = out.burn_in_rate();
      run.ensemble_mean = out.get("mean");
      const double total = static_cast<double>(m) * iterations;
      run.histogram.resize(bins);
      double inside = 0.0;
      double diff = 0.0;
      for (int b = 0; b < bins; ++b) {
        run.histogram[b] = counts[b] / total;
        inside += run.histogram[b];
        diff += std::abs(run.histogram[b] - result.reference[b]);
      }
      run.tv_distance = 0.5 * (diff + (1.0 - inside));
    } catch (const Error &e) {
      run.failed = true;
      run.error = e.what();
      run.tv_distance = 1.0;
      run.histogram.assign(bins, 0.0);
    }
  });
  return result;
}

void write_exp1(const Exp1Result &r, const fs::path &dir) {
  const int bins = static_cast<int>(r.reference.size());
  const double w = (r.hi - r.lo) / bins;
  for (const auto &run : r.runs) {
    if (static_cast<int>(run.histogram.size()) != bins) {
      throw Error("exp1: histogram of " + run.method + "-" + run.mode + " has the wrong bin count");
    }
  }
  {
    CsvWriter csv(dir / "histogram.csv",
                  {"method", "mode", "bin", "lo", "hi", "probability", "reference"});
    for (const auto &run : r.runs) {
      for (int b = 0; b < bins; ++b) {
        csv << run.method << run.mode << b << r.lo + w * b << r.lo + w * (b + 1)
            << run.histogram[b] << r.reference[b];
        csv.end_row();
      }
    }
  }
  {
    CsvWriter csv(dir / "summary.csv",
                  {"method", "mode", "step", "gamma", "bandwidth", "acceptance_rate",
                   "burn_in_acceptance_rate", "tv_distance", "failed", "error"});
    for (const auto &run : r.runs) {
      csv << run.method << run.mode << run.spec.step << run.spec.gamma
          << run.spec.bandwidth << run.acceptance << run.burn_in_acceptance
          << run.tv_distance << (run.failed ? 1 : 0) << run.error;
      csv.end_row();
    }
  }
  CsvWriter csv(dir / "series.csv", {"method", "mode", "iteration", "ensemble_mean"});
  for (const auto &run : r.runs) {
    for (std::size_t k = 0; k < run.ensemble_mean.size(); ++k) {
      csv << run.method << run.mode << k << run.ensemble_mean[k];
      csv.end_row();
    }
  }
}

// ---------------------------------------------------------------------------

const Exp2Chain &Exp2Replica::find(const std::string &label) const {
  for (const auto &c : chains) {
    if (c.label == label) return c;
  }
  throw ConfigError("exp2: no chain " + label);
}

std::vector<std::string> Exp2Result::labels() const {
  std::vector<std::string> out;
  if (replicas.empty()) return out;
  for (const auto &c : replicas.front().chains) out.push_back(c.label);
  return out;
}

double Exp2Result::mean_int_ac(const std::string &label) const {
  std::vector<double> v;
  for (const auto &r : replicas) v.push_back(r.find(label).int_ac);
  return nan_mean(v);
}

double Exp2Result::mean_estimate(const std::string &label) const {
  std::vector<double> v;
  for (const auto &r : replicas) v.push_back(r.find(label).estimate);
  return nan_mean(v);
}

double Exp2Result::mean_acceptance(const std::string &label) const {
  std::vector<double> v;
  for (const auto &r : replicas) v.push_back(r.find(label).acceptance);
  return nan_mean(v);
}

int Exp2Result::block_size(const std::string &label) const {
  return replicas.at(0).find(label).block_size;
}

namespace {

DynamicsSpec exp2_spec(const std::string &method, const Config &cfg, double gamma) {
  if (method == "aldi") return DynamicsSpec::aldi(cfg.get_double("exp2.aldi_h0"), gamma);
  if (method == "pmala") return DynamicsSpec::pmala(cfg.get_double("exp2.pmala_h0"));
  throw ConfigError("exp2: unknown method '" + method + "'");
}

// "aldi-ew" -> ("aldi", "ew").
std::pair<std::string, std::string> split_label(const std::string &label) {
  const auto dash = label.find('-');
  if (dash == std::string::npos) {
    throw ConfigError("expected <method>-<mode>, got '" + label + "'");
  }
  return {label.substr(0, dash), label.substr(dash + 1)};
}

int cost_block_size(const std::string &method, const KernelMode &mode, int m) {
  // pMALA particles never interact, so every particle can run on its own core.
  if (method == "pmala") return m;
  switch (mode.kind) {
  case ModeKind::EnsembleWise:
  case ModeKind::Unadjusted:
  case ModeKind::SimultaneousPW:
    return m;
  case ModeKind::SequentialPW:
    return 1;
  case ModeKind::BlockWise:
    return mode.partition.uniform_size();
  }
  return m;
}

} // namespace

Exp2Result run_exp2(const Config &cfg, int workers) {
  Exp2Result result;
  result.seed = cfg.get_u64("run.seed");
  const int m = positive_int(cfg, "exp2.particles");
  const int burn_in = positive_int(cfg, "exp2.burn_in", 0);
  const int n = positive_int(cfg, "exp2.iterations", 2);
  const int replicas = positive_int(cfg, "exp2.replicas");
  const double gamma = cfg.get_double("exp2.gamma");
  const TuneOptions tune = tune_options(cfg, "exp2");
  const int epochs = positive_int(cfg, "exp2.tune_epochs");
  const int max_lag = positive_int(cfg, "exp2.max_lag");
  result.particles = m;
  result.iterations = n;
  for (long long c : cfg.get_ints("exp2.cores")) {
    if (c < 1) throw ConfigError("config: exp2.cores entries must be positive");
    result.cores.push_back(static_cast<int>(c));
  }
  const auto block_sizes = cfg.get_ints("exp2.block_sizes");
  for (long long b : block_sizes) {
    if (b < 1 || m % b != 0) {
      throw ConfigError("config: block size " + std::to_string(b) + " must divide " +
                        std::to_string(m));
    }
  }
  const auto extra_gammas = cfg.get_doubles("exp2.extra_gammas");
  const auto mse_labels = cfg.get_strings("exp2.mse_methods");
  const auto mse_rates = cfg.get_doubles("exp2.mse_rates");
  for (const auto &l : mse_labels) {
    const auto [method, mode] = split_label(l);
    exp2_spec(method, cfg, gamma).validate();
    parse_mode(mode, m);
  }
  for (double r : mse_rates) {
    if (!(r > 0.05 && r < 0.95)) throw ConfigError("config: exp2.mse_rates must lie in (0.05, 0.95)");
  }
  DynamicsSpec::aldi(cfg.get_double("exp2.aldi_h0"), gamma).validate();
  DynamicsSpec::pmala(cfg.get_double("exp2.pmala_h0")).validate();

  Vector var(4);
  var << 1.0, 0.1, 0.01, 0.001;
  const auto target = std::make_shared<DiagGaussianTarget>(var);
  result.quantile = chi2_quantile(0.5, 4.0);
  const double q = result.quantile;
  const Vector precision = var.cwiseInverse();
  const ParticleFunction indicator = [q, precision](const Vector &x) {
    return x.cwiseProduct(x).dot(precision) <= q ? 1.0 : 0.0;
  };

  result.replicas.resize(replicas);
  parallel_for(replicas, workers, [&](int r) {
    Exp2Replica &rep = result.replicas[r];
    rep.replica = r;
    const std::uint64_t seed = result.seed;
    const Ensemble init = gaussian_init(m, Vector::Zero(4), Vector::Ones(4), seed, r);

    const TuneResult ta = tune_step_size(KernelMode::ensemble_wise(),
                                         exp2_spec("aldi", cfg, gamma), *target, init, tune,
                                         epochs, tuning_seed(seed), r);
    const TuneResult tp = tune_step_size(KernelMode::sequential(),
                                         exp2_spec("pmala", cfg, gamma), *target, init, tune,
                                         epochs, tuning_seed(seed), r);
    rep.aldi_step = ta.step;
    rep.pmala_step = tp.step;
    rep.aldi_trace = ta.trace;
    rep.pmala_trace = tp.trace;

    auto run = [&](const std::string &label, const std::string &method,
                   const std::string &mode_label, const DynamicsSpec &spec,
                   const Ensemble &start) {
      const KernelMode mode = parse_mode(mode_label, m);
      ChainConfig cc;
      cc.iterations = n;
      cc.burn_in = burn_in;
      cc.seed = seed;
      cc.replica = r;
      const ChainOutput out =
          run_chain(mode, spec, *target, start, cc, {ensemble_recorder("F", indicator)});
      Exp2Chain c;
      c.label = label;
      c.method = method;
      c.mode = mode_label;
      c.block_size = cost_block_size(method, mode, m);
      c.step = spec.step;
      c.gamma = spec.kind == DynamicsKind::PMala ? 0.0 : spec.gamma;
      c.acceptance = out.acceptance_rate();
      c.series = out.get("F");
      c.estimate = series_mean(c.series);
      try {
        const IntAcResult ia = integrated_autocorr_series(c.series);
        c.int_ac = ia.int_ac;
        c.lag = ia.lag;
        c.rho = autocorrelation(c.series, std::min(max_lag, n - 2));
      } catch (const ZeroVariance &) {
        c.int_ac = kNaN;
        c.lag = 0;
      }
      rep.chains.push_back(std::move(c));
    };

    DynamicsSpec aldi = DynamicsSpec::aldi(ta.step, gamma);
    run("aldi-ew", "aldi", "ew", aldi, ta.state);
    for (long long b : block_sizes) {
      const std::string mode = "bw" + std::to_string(b);
      run("aldi-" + mode, "aldi", mode, aldi, ta.state);
    }
    run("aldi-pw", "aldi", "pw", aldi, ta.state);
    run("pmala-pw", "pmala", "pw", DynamicsSpec::pmala(tp.step), ta.state);

    for (double g : extra_gammas) {
      const TuneResult tg = tune_step_size(KernelMode::ensemble_wise(),
                                           exp2_spec("aldi", cfg, g), *target, init, tune,
                                           epochs, tuning_seed(seed), r);
      run("aldi-ew-g" + short_double(g), "aldi", "ew", DynamicsSpec::aldi(tg.step, g),
          tg.state);
    }

    for (const auto &l : mse_labels) {
      const auto [method, mode_label] = split_label(l);
      const KernelMode mode = parse_mode(mode_label, m);
      for (double rate : mse_rates) {
        TuneOptions o = tune;
        o.target_rate = rate;
        const TuneResult t =
            tune_step_size(mode, exp2_spec(method, cfg, gamma), *target, init, o, epochs, tuning_seed(seed), r);
        DynamicsSpec spec = exp2_spec(method, cfg, gamma);
        spec.step = t.step;
        ChainConfig cc;
        cc.iterations = n;
        cc.burn_in = burn_in;
        cc.seed = seed;
        cc.replica = r;
        const ChainOutput out =
            run_chain(mode, spec, *target, t.state, cc, {ensemble_recorder("F", indicator)});
        rep.sweep.push_back({l, rate, t.step, out.acceptance_rate(), series_mean(out.get("F"))});
      }
    }
  });

  // Aggregate the sweep across replicas.
  if (!result.replicas.empty()) {
    const auto &first = result.replicas.front().sweep;
    for (std::size_t k = 0; k < first.size(); ++k) {
      Exp2SweepPoint p;
      p.label = first[k].label;
      p.target_rate = first[k].target_rate;
      std::vector<double> est;
      for (const auto &rep : result.replicas) {
        p.mean_acceptance += rep.sweep[k].acceptance / replicas;
        p.mean_step += rep.sweep[k].step / replicas;
        est.push_back(rep.sweep[k].estimate);
      }
      p.mse = replicas >= 2 ? replica_mse(est, 0.5) : kNaN;
      result.sweep.push_back(p);
    }
  }
  return result;
}

void write_exp2(const Exp2Result &r, const fs::path &dir) {
  {
    CsvWriter csv(dir / "replicas.csv",
                  {"replica", "label", "method", "mode", "block_size", "step", "gamma",
                   "acceptance_rate", "estimate", "int_ac", "lag"});
    for (const auto &rep : r.replicas) {
      for (const auto &c : rep.chains) {
        csv << rep.replica << c.label << c.method << c.mode << c.block_size << c.step
            << c.gamma << c.acceptance << c.estimate << c.int_ac << c.lag;
        csv.end_row();
      }
    }
  }
  {
    CsvWriter csv(dir / "tuning.csv", {"replica", "method", "epoch", "step", "rate"});
    for (const auto &rep : r.replicas) {
      for (const auto &[name, trace] :
           {std::pair{"aldi-ew", &rep.aldi_trace}, std::pair{"pmala-pw", &rep.pmala_trace}}) {
        for (const auto &e : *trace) {
          csv << rep.replica << name << e.epoch << e.step << e.rate;
          csv.end_row();
        }
      }
    }
  }
  if (!r.replicas.empty()) {
    const auto &rep = r.replicas.front();
    CsvWriter series(dir / "series.csv", {"label", "iteration", "value"});
    CsvWriter running(dir / "running.csv", {"label", "iteration", "running_mean"});
    for (const auto &c : rep.chains) {
      const auto rm = running_mean(c.series);
      for (std::size_t k = 0; k < c.series.size(); ++k) {
        series << c.label << k << c.series[k];
        series.end_row();
        running << c.label << k << rm[k];
        running.end_row();
      }
    }
  }
  {
    CsvWriter csv(dir / "autocorr.csv", {"replica", "label", "lag", "rho"});
    for (const auto &rep : r.replicas) {
      for (const auto &c : rep.chains) {
        for (std::size_t k = 0; k < c.rho.size(); ++k) {
          csv << rep.replica << c.label << k << c.rho[k];
          csv.end_row();
        }
      }
    }
  }
  {
    CsvWriter csv(dir / "cost.csv", {"label", "block_size", "cores", "int_ac_mean", "iterations",
                                     "particles", "cost"});
    for (const auto &label : r.labels()) {
      const double ia = r.mean_int_ac(label);
      const int b = r.block_size(label);
      for (int cores : r.cores) {
        csv << label << b << cores << ia << r.iterations << r.particles
            << efficiency_cost(ia, r.iterations, r.particles, b, cores);
        csv.end_row();
      }
    }
  }
  if (!r.sweep.empty()) {
    CsvWriter csv(dir / "mse.csv",
                  {"label", "target_rate", "mean_acceptance_rate", "mean_step", "mse"});
    for (const auto &p : r.sweep) {
      csv << p.label << p.target_rate << p.mean_acceptance << p.mean_step << p.mse;
      csv.end_row();
    }
  }
}

// ---------------------------------------------------------------------------

double Exp3Chain::mean_int_ac() const {
  std::vector<double> v(int_ac.data(), int_ac.data() + int_ac.size());
  return nan_mean(v);
}

double Exp3Chain::max_z(const Vector &truth) const {
  double z = 0.0;
  for (Eigen::Index k = 0; k < truth.size(); ++k) {
    const double zk = std::abs(mean(k) - truth(k)) / standard_error(k);
    if (std::isnan(zk)) return kNaN;
    z = std::max(z, zk);
  }
  return z;
}

const Exp3Chain &Exp3Result::find(const std::string &label) const {
  for (const auto &c : chains) {
    if (c.label == label) return c;
  }
  throw ConfigError("exp3: no chain " + label);
}

LinearGaussianIP exp3_problem(const Config &cfg) {
  const std::string file = cfg.get_string("exp3.problem_file");
  if (!file.empty()) return load_problem(file);
  OdeProblemConfig pc;
  pc.mesh_power = positive_int(cfg, "exp3.mesh_power", 3);
  pc.observations = positive_int(cfg, "exp3.observations");
  pc.basis_terms = positive_int(cfg, "exp3.basis_terms");
  pc.tau = cfg.get_double("exp3.tau");
  pc.noise_std = positive_double(cfg, "exp3.noise_std");
  pc.seed = cfg.get_u64("exp3.problem_seed");
  if (!(pc.tau > 1.0)) throw ConfigError("config: exp3.tau must exceed 1");
  return assemble_ode_posterior(pc);
}

namespace {

// Tuning mode of each method; other modes reuse that step size.
std::string exp3_tuning_mode(const std::string &method) {
  return method == "pmala" ? "pw" : "ew";
}

DynamicsSpec exp3_spec(const std::string &method, const Config &cfg, double gamma,
                       const LinearGaussianIPPtr &problem) {
  if (method == "aldi") return DynamicsSpec::aldi(cfg.get_double("exp3.aldi_h0"), gamma);
  if (method == "pmala") return DynamicsSpec::pmala(cfg.get_double("exp3.pmala_h0"));
  if (method == "eksdf") {
    return DynamicsSpec::eksdf(cfg.get_double("exp3.aldi_h0"), gamma, make_forward_model(problem));
  }
  throw ConfigError("exp3: unknown method '" + method + "'");
}

} // namespace

Exp3Result run_exp3(const Config &cfg, int workers) {
  Exp3Result result;
  result.seed = cfg.get_u64("run.seed");
  const int m = positive_int(cfg, "exp3.particles");
  const int burn_in = positive_int(cfg, "exp3.burn_in", 0);
  const int n = positive_int(cfg, "exp3.iterations", 2);
  const double gamma = cfg.get_double("exp3.gamma");
  const TuneOptions tune = tune_options(cfg, "exp3");
  const int epochs = positive_int(cfg, "exp3.tune_epochs");
  const int max_lag = positive_int(cfg, "exp2.max_lag");
  result.problem = std::make_shared<const LinearGaussianIP>(exp3_problem(cfg));
  const auto &problem = *result.problem;
  const int d = problem.dim();
  const GaussianPosteriorTarget target(result.problem);

  const auto labels = cfg.get_strings("exp3.methods");
  if (labels.empty()) throw ConfigError("exp3: no methods configured");
  std::vector<std::string> methods;
  for (const auto &l : labels) {
    const auto [method, mode] = split_label(l);
    exp3_spec(method, cfg, gamma, result.problem).validate();
    parse_mode(mode, m);
    if (std::find(methods.begin(), methods.end(), method) == methods.end()) {
      methods.push_back(method);
    }
  }

  // Ball around the posterior mean holding half of the posterior mass.
  result.quantile = chi2_quantile(0.5, d);
  const double q = result.quantile;
  const Eigen::LLT<Matrix> llt(problem.posterior_cov);
  const Vector centre = problem.posterior_mean;
  const ParticleFunction in_ball = [q, llt, centre](const Vector &x) {
    const Vector w = llt.matrixL().solve(x - centre);
    return w.squaredNorm() <= q ? 1.0 : 0.0;
  };

  const Ensemble init = gaussian_init(m, Vector::Zero(d), problem.prior_variances,
                                      result.seed, 0);
  result.tuning.resize(methods.size());
  std::vector<Ensemble> tuned_state(methods.size());
  parallel_for(static_cast<int>(methods.size()), workers, [&](int j) {
    const std::string mode = exp3_tuning_mode(methods[j]);
    const TuneResult t =
        tune_step_size(parse_mode(mode, m), exp3_spec(methods[j], cfg, gamma, result.problem),
                       target, init, tune, epochs, tuning_seed(result.seed), j);
    result.tuning[j] = {methods[j], mode, t.step, t.trace};
    tuned_state[j] = t.state;
  });

  result.chains.resize(labels.size());
  parallel_for(static_cast<int>(labels.size()), workers, [&](int j) {
    const auto [method, mode_label] = split_label(labels[j]);
    const auto mi = static_cast<std::size_t>(
        std::find(methods.begin(), methods.end(), method) - methods.begin());
    DynamicsSpec spec = exp3_spec(method, cfg, gamma, result.problem);
    spec.step = result.tuning[mi].step;
    const KernelMode mode = parse_mode(mode_label, m);

    Vector sum = Vector::Zero(d);
    Matrix outer = Matrix::Zero(d, d);
    std::vector<Recorder> recs;
    for (int k = 0; k < d; ++k) {
      recs.push_back({"x" + std::to_string(k + 1),
                      [k](const Ensemble &e) { return e.col(k).mean(); }});
    }
    recs.push_back(ensemble_recorder("ball", in_ball));
    recs.push_back({"spread", [&](const Ensemble &e) {
                      sum += e.colwise().sum().transpose();
                      outer.noalias() += e.transpose() * e;
                      const Vector mu = e.colwise().mean().transpose();
                      return (e.rowwise() - mu.transpose()).squaredNorm() / e.rows();
                    }});
    ChainConfig cc;
    cc.iterations = n;
    cc.burn_in = burn_in;
    cc.seed = result.seed;
    cc.replica = j;
    const ChainOutput out = run_chain(mode, spec, target, tuned_state[mi], cc, recs);

    Exp3Chain &c = result.chains[j];
    c.label = labels[j];
    c.method = method;
    c.mode = mode_label;
    c.step = spec.step;
    c.gamma = method == "pmala" ? 0.0 : gamma;
    c.acceptance = out.acceptance_rate();
    const double count = static_cast<double>(m) * n;
    c.mean = sum / count;
    c.cov = outer / count - c.mean * c.mean.transpose();
    c.standard_error.resize(d);
    c.int_ac.resize(d);
    for (int k = 0; k < d; ++k) {
      c.series.push_back(out.get("x" + std::to_string(k + 1)));
      const auto &s = c.series.back();
      const double mu = series_mean(s);
      double var = 0.0;
      for (double v : s) var += (v - mu) * (v - mu);
      var /= n;
      try {
        c.int_ac(k) = integrated_autocorr_series(s).int_ac;
      } catch (const ZeroVariance &) {
        c.int_ac(k) = kNaN;
      }
      c.standard_error(k) = std::sqrt(var * c.int_ac(k) / n);
    }
    c.ball = out.get("ball");
    c.ball_estimate = series_mean(c.ball);
    try {
      c.ball_int_ac = integrated_autocorr_series(c.ball).int_ac;
      c.ball_rho = autocorrelation(c.ball, std::min(max_lag, n - 2));
    } catch (const ZeroVariance &) {
      c.ball_int_ac = kNaN;
    }
  });
  return result;
}

void write_exp3(const Exp3Result &r, const fs::path &dir) {
  const auto &p = *r.problem;
  const int d = p.dim();
  save_problem(p, (dir / "problem.txt").string());
  {
    std::vector<std::string> header = {"s", "truth", "posterior_mean", "posterior_std"};
    for (const auto &c : r.chains) {
      header.push_back(c.label + "_mean");
      header.push_back(c.label + "_std");
    }
    CsvWriter csv(dir / "posterior.csv", header);
    const Matrix &phi = p.basis_on_grid;
    const Vector truth = phi * p.truth;
    const Vector mean = phi * p.posterior_mean;
    const Vector var = (phi * p.posterior_cov * phi.transpose()).diagonal();
    std::vector<Vector> cm, cv;
    for (const auto &c : r.chains) {
      cm.push_back(phi * c.mean);
      cv.push_back((phi * c.cov * phi.transpose()).diagonal());
    }
    for (Eigen::Index i = 0; i < p.grid.size(); ++i) {
      csv << p.grid(i) << truth(i) << mean(i) << std::sqrt(std::max(0.0, var(i)));
      for (std::size_t k = 0; k < cm.size(); ++k) {
        csv << cm[k](i) << std::sqrt(std::max(0.0, cv[k](i)));
      }
      csv.end_row();
    }
  }
  {
    CsvWriter csv(dir / "components.csv",
                  {"label", "component", "truth", "posterior_mean", "posterior_std",
                   "chain_mean", "chain_std", "standard_error", "int_ac", "z_score"});
    for (const auto &c : r.chains) {
      for (int k = 0; k < d; ++k) {
        csv << c.label << k + 1 << p.truth(k) << p.posterior_mean(k)
            << std::sqrt(p.posterior_cov(k, k)) << c.mean(k)
            << std::sqrt(std::max(0.0, c.cov(k, k))) << c.standard_error(k) << c.int_ac(k)
            << (c.mean(k) - p.posterior_mean(k)) / c.standard_error(k);
        csv.end_row();
      }
    }
  }
  {
    CsvWriter csv(dir / "summary.csv",
                  {"label", "method", "mode", "step", "gamma", "acceptance_rate", "estimate",
                   "int_ac", "mean_component_int_ac", "max_abs_z"});
    for (const auto &c : r.chains) {
      csv << c.label << c.method << c.mode << c.step << c.gamma << c.acceptance
          << c.ball_estimate << c.ball_int_ac << c.mean_int_ac() << c.max_z(p.posterior_mean);
      csv.end_row();
    }
  }
  {
    CsvWriter csv(dir / "tuning.csv", {"method", "mode", "epoch", "step", "rate"});
    for (const auto &t : r.tuning) {
      for (const auto &e : t.trace) {
        csv << t.method << t.mode << e.epoch << e.step << e.rate;
        csv.end_row();
      }
    }
  }
  {
    CsvWriter csv(dir / "autocorr.csv", {"label", "lag", "rho"});
    for (const auto &c : r.chains) {
      for (std::size_t k = 0; k < c.ball_rho.size(); ++k) {
        csv << c.label << k << c.ball_rho[k];
        csv.end_row();
      }
    }
  }
  {
    CsvWriter csv(dir / "running.csv", {"label", "iteration", "value", "running_mean"});
    for (const auto &c : r.chains) {
      const auto rm = running_mean(c.ball);
      for (std::size_t k = 0; k < c.ball.size(); ++k) {
        csv << c.label << k << c.ball[k] << rm[k];
        csv.end_row();
      }
    }
  }
  std::vector<std::string> header = {"label", "iteration"};
  for (int k = 0; k < d; ++k) header.push_back("x" + std::to_string(k + 1));
  CsvWriter csv(dir / "series.csv", header);
  for (const auto &c : r.chains) {
    const std::size_t n = c.series.empty() ? 0 : c.series.front().size();
    for (std::size_t it = 0; it < n; ++it) {
      csv << c.label << it;
      for (int k = 0; k < d; ++k) csv << c.series[k][it];
      csv.end_row();
    }
  }
}

// ---------------------------------------------------------------------------

const DiscreteReport &BiasLabResult::find_discrete(const std::string &construction) const {
  for (const auto &d : discrete) {
    if (d.construction == construction) return d;
  }
  throw ConfigError("bias-lab: no discrete report " + construction);
}

const GridSimReport &BiasLabResult::find_sim(const std::string &example) const {
  for (const auto &s : simultaneous) {
    if (s.example == example) return s;
  }
  throw ConfigError("bias-lab: no grid example " + example);
}

namespace {

DiscreteReport discrete_report(const std::string &name, const Matrix &p) {
  DiscreteReport d;
  d.construction = name;
  d.invariant = invariant_measure(p);
  std::tie(d.first_marginal, d.second_marginal) = pair_marginals(d.invariant, 2);
  const Vector pi = Vector::Constant(2, 0.5);
  std::tie(d.one_step_first, d.one_step_second) =
      pair_marginals(one_step_from_product(p, pi), 2);
  return d;
}

} // namespace

BiasLabResult run_bias_lab(const Config &cfg, int workers) {
  BiasLabResult result;
  result.discrete.push_back(discrete_report("printed", printed_two_state_psim()));
  result.discrete.push_back(discrete_report(
      "constructed", build_discrete_psim(two_state_proposals(), Vector::Constant(2, 0.5)).psim));

  const int nodes = positive_int(cfg, "bias.nodes", 3);
  if (nodes % 2 == 0) throw ConfigError("config: bias.nodes must be odd");
  const double tol = positive_double(cfg, "bias.tolerance");

  GridKernelSpec tri;
  tri.nodes = nodes;
  tri.target = GridTarget::Triangular;
  tri.proposal = GridProposal::MeanPair;
  tri.h = positive_double(cfg, "bias.triangular_h");
  GridKernelSpec uni;
  uni.nodes = nodes;
  uni.target = GridTarget::Uniform;
  uni.proposal = GridProposal::Spread;
  uni.h = positive_double(cfg, "bias.uniform_h");
  uni.gamma = cfg.get_double("bias.uniform_gamma");
  if (!(uni.gamma >= 0.0 && uni.gamma <= 1.0)) {
    throw ConfigError("config: bias.uniform_gamma must lie in [0, 1]");
  }

  const std::vector<std::pair<std::string, GridKernelSpec>> examples = {{"triangular", tri},
                                                                       {"uniform", uni}};
  std::vector<GridModel> models;
  for (const auto &[name, spec] : examples) models.emplace_back(spec);

  const std::vector<KernelMode> kernels = {
      KernelMode::ensemble_wise(),
      KernelMode::sequential(),
      KernelMode::sequential(ScanOrder::RandomPermutation),
      KernelMode::block_wise(BlockPartition::singletons(2)),
      KernelMode::block_wise(BlockPartition::single(2)),
      KernelMode::simultaneous(),
  };
  const int nk = static_cast<int>(kernels.size());
  const int ne = static_cast<int>(examples.size());
  result.kernels.resize(ne * nk);
  result.simultaneous.resize(ne);

  // Power iterations first: they are the long jobs.
  parallel_for(ne + ne * nk, workers, [&](int job) {
    if (job < ne) {
      GridSimReport &s = result.simultaneous[job];
      s.example = examples[job].first;
      s.spec = examples[job].second;
      s.power = grid_invariant_measure(models[job], KernelMode::simultaneous(), tol);
      s.summary = bias_summary(s.power.nu, models[job].target());
      s.target = models[job].target();
      s.nodes = models[job].nodes();
      return;
    }
    const int e = (job - ne) / nk;
    const int k = (job - ne) % nk;
    GridKernelReport &rep = result.kernels[job - ne];
    rep.example = examples[e].first;
    rep.kernel = kernels[k].label();
    rep.residual =
        invariance_residual(models[e], kernels[k], models[e].product_target());
  });
  return result;
}

void write_bias_lab(const BiasLabResult &r, const fs::path &dir) {
  {
    CsvWriter csv(dir / "discrete.csv", {"construction", "quantity", "index", "value"});
    for (const auto &d : r.discrete) {
      const std::vector<std::pair<const char *, const Vector *>> parts = {
          {"invariant", &d.invariant},
          {"first_marginal", &d.first_marginal},
          {"second_marginal", &d.second_marginal},
          {"one_step_first_marginal", &d.one_step_first},
          {"one_step_second_marginal", &d.one_step_second}};
      for (const auto &[name, v] : parts) {
        for (Eigen::Index i = 0; i < v->size(); ++i) {
          csv << d.construction << name << i << (*v)(i);
          csv.end_row();
        }
      }
    }
  }
  {
    CsvWriter csv(dir / "kernels.csv", {"example", "kernel", "residual_l1"});
    for (const auto &k : r.kernels) {
      csv << k.example << k.kernel << k.residual;
      csv.end_row();
    }
  }
  {
    CsvWriter csv(dir / "summary.csv",
                  {"example", "target", "proposal", "h", "gamma", "iterations",
                   "power_residual", "max_rel_joint", "l1_joint", "max_rel_marginal",
                   "mean_rel_marginal"});
    for (const auto &s : r.simultaneous) {
      csv << s.example << to_string(s.spec.target) << to_string(s.spec.proposal) << s.spec.h
          << s.spec.gamma << s.power.iterations << s.power.residual << s.summary.max_rel_joint
          << s.summary.l1_joint << s.summary.max_rel_marginal << s.summary.mean_rel_marginal;
      csv.end_row();
    }
  }
  {
    CsvWriter csv(dir / "grid.csv", {"example", "i", "j", "x_i", "x_j", "invariant",
                                     "product_target", "relative_error"});
    for (const auto &s : r.simultaneous) {
      const auto n = s.nodes.size();
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          const double pi = s.target(i) * s.target(j);
          csv << s.example << static_cast<long long>(i) << static_cast<long long>(j)
              << s.nodes(i) << s.nodes(j) << s.power.nu(i, j) << pi
              << (pi > 0.0 ? (s.power.nu(i, j) - pi) / pi : kNaN);
          csv.end_row();
        }
      }
    }
  }
  CsvWriter csv(dir / "marginals.csv", {"example", "particle", "node", "x", "invariant_marginal",
                                        "target", "relative_error"});
  for (const auto &s : r.simultaneous) {
    const Vector first = s.power.nu.rowwise().sum();
    const Vector second = s.power.nu.colwise().sum().transpose();
    for (int particle = 1; particle <= 2; ++particle) {
      const Vector &mg = particle == 1 ? first : second;
      for (Eigen::Index i = 0; i < s.nodes.size(); ++i) {
        csv << s.example << particle << static_cast<long long>(i) << s.nodes(i) << mg(i)
            << s.target(i) << (s.target(i) > 0.0 ? (mg(i) - s.target(i)) / s.target(i) : kNaN);
        csv.end_row();
      }
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

using Facts = std::vector<std::pair<std::string, std::string>>;

Facts facts_of(const Exp1Result &r) {
  Facts f;
  for (const auto &run : r.runs) {
    const std::string key = run.method + "_" + run.mode;
    f.emplace_back(key + "_acceptance_rate", format_double(run.acceptance));
    f.emplace_back(key + "_tv_distance", format_double(run.tv_distance));
    if (run.failed) f.emplace_back(key + "_error", run.error);
  }
  return f;
}

Facts facts_of(const Exp2Result &r) {
  Facts f;
  f.emplace_back("quantile", format_double(r.quantile));
  for (const auto &rep : r.replicas) {
    const std::string p = "replica" + std::to_string(rep.replica) + "_";
    f.emplace_back(p + "aldi_step", format_double(rep.aldi_step));
    f.emplace_back(p + "pmala_step", format_double(rep.pmala_step));
  }
  for (const auto &label : r.labels()) {
    f.emplace_back(label + "_acceptance_rate", format_double(r.mean_acceptance(label)));
    f.emplace_back(label + "_int_ac", format_double(r.mean_int_ac(label)));
  }
  return f;
}

Facts facts_of(const Exp3Result &r) {
  Facts f;
  f.emplace_back("problem_seed", std::to_string(r.problem->config.seed));
  for (const auto &t : r.tuning) f.emplace_back(t.method + "_step", format_double(t.step));
  for (const auto &c : r.chains) {
    f.emplace_back(c.label + "_acceptance_rate", format_double(c.acceptance));
    f.emplace_back(c.label + "_int_ac", format_double(c.ball_int_ac));
  }
  return f;
}

Facts facts_of(const BiasLabResult &r) {
  Facts f;
  for (const auto &s : r.simultaneous) {
    f.emplace_back(s.example + "_iterations", std::to_string(s.power.iterations));
    f.emplace_back(s.example + "_max_rel_joint", format_double(s.summary.max_rel_joint));
  }
  return f;
}

} // namespace

namespace {

template <class Result>
RunSummary publish_impl(const Config &cfg, const fs::path &out, const std::string &ex,
                        const Result &r, void (*write)(const Result &, const fs::path &)) {
  RunSummary summary;
  summary.experiment = ex;
  summary.directory = out / ex;
  summary.facts = facts_of(r);
  fs::create_directories(out);
  const fs::path staging = out / ("." + ex + ".partial");
  fs::remove_all(staging);
  fs::create_directories(staging);
  try {
    write(r, staging);
    Config manifest = cfg;
    manifest.set("run.experiment", ex);
    for (const auto &[k, v] : summary.facts) manifest.set("manifest." + k, v);
    manifest.write_file(staging / "manifest.ini");
    fs::remove_all(summary.directory);
    fs::rename(staging, summary.directory);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
  return summary;
}

} // namespace

RunSummary publish(const Config &cfg, const fs::path &out, const Exp1Result &r) {
  return publish_impl(cfg, out, "exp1", r, &write_exp1);
}
RunSummary publish(const Config &cfg, const fs::path &out, const Exp2Result &r) {
  return publish_impl(cfg, out, "exp2", r, &write_exp2);
}
RunSummary publish(const Config &cfg, const fs::path &out, const Exp3Result &r) {
  return publish_impl(cfg, out, "exp3", r, &write_exp3);
}
RunSummary publish(const Config &cfg, const fs::path &out, const BiasLabResult &r) {
  return publish_impl(cfg, out, "bias-lab", r, &write_bias_lab);
}

RunSummary run_to_directory(const Config &cfg, const fs::path &out, int workers) {
  const std::string ex = cfg.get_string("run.experiment");
  if (workers < 1) throw ConfigError("workers must be positive");
  if (ex == "exp1") return publish(cfg, out, run_exp1(cfg, workers));
  if (ex == "exp2") return publish(cfg, out, run_exp2(cfg, workers));
  if (ex == "exp3") return publish(cfg, out, run_exp3(cfg, workers));
  if (ex == "bias-lab") return publish(cfg, out, run_bias_lab(cfg, workers));
  throw ConfigError("unknown experiment '" + ex + "' (exp1, exp2, exp3, bias-lab)");
}

Config load_run_config(const fs::path &path) {
  Config cfg = default_config();
  Config file = Config::from_file(path);
  file.erase_section("manifest");
  cfg.merge(file, true);
  return cfg;
}

} // namespace maips
