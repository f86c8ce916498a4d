#include <doctest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "maips/diagnostics.hpp"
#include "maips/errors.hpp"
#include "maips/metropolis.hpp"

using namespace maips;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Ensemble random_ensemble(int m, int d, std::uint64_t tag, double scale = 1.0) {
  auto s = testing::stream(30, tag);
  return scale * testing::random_matrix(m, d, s);
}

DiagGaussianTarget gaussian4() {
  Vector var(4);
  var << 1.0, 0.1, 0.01, 0.001;
  return DiagGaussianTarget(var);
}

ChainOutput chain(const KernelMode &mode, const DynamicsSpec &spec, const Target &t,
                  const Ensemble &init, int n, std::uint64_t seed = 5) {
  ChainConfig cfg;
  cfg.iterations = n;
  cfg.seed = seed;
  return run_chain(mode, spec, t, init, cfg);
}

} // namespace

TEST_SUITE("metropolis") {

TEST_CASE("log acceptance probability") {
  CHECK(log_accept(0.0, 1.0, 0.0, 0.0) == 0.0);
  CHECK(log_accept(0.0, -1.0, 0.0, 0.0) == doctest::Approx(-1.0));
  CHECK(log_accept(0.0, 0.0, -2.0, -3.0) == doctest::Approx(-1.0));
  CHECK(log_accept(-kInf, -5.0, 0.0, 0.0) == 0.0);
  CHECK(log_accept(0.0, -kInf, 0.0, 0.0) == -kInf);
  CHECK(log_accept(0.0, std::nan(""), 0.0, 0.0) == -kInf);
  CHECK(log_accept(0.0, 0.0, kInf, kInf) == -kInf);
}

TEST_CASE("pMALA acceptance agrees with the direct density ratio") {
  // N(0,1), h = 0.25, x = 0, y = 1: q(x,.) = N(x - h x, 2h).
  const double h = 0.25, x = 0.0, y = 1.0;
  auto normal = [](double v, double m, double var) {
    return std::exp(-(v - m) * (v - m) / (2 * var)) / std::sqrt(2 * M_PI * var);
  };
  const double direct = std::min(1.0, std::exp(-0.5 * y * y) * normal(x, y - h * y, 2 * h) /
                                          (std::exp(-0.5 * x * x) * normal(y, x - h * x, 2 * h)));
  const DiagGaussianTarget t(Vector::Ones(1));
  Ensemble ex(1, 1), ey(1, 1);
  ex << x;
  ey << y;
  const auto spec = DynamicsSpec::pmala(h);
  const double fwd = proposal_logpdf(block_proposal(spec, t, ex, {0}), ey);
  const double rev = proposal_logpdf(block_proposal(spec, t, ey, {0}), ex);
  const double la = log_accept(t.log_density(ex.row(0)), t.log_density(ey.row(0)), fwd, rev);
  CHECK(std::abs(std::exp(la) - direct) < 1e-12);
}

TEST_CASE("partitions") {
  CHECK(BlockPartition::uniform(100, 25).blocks.size() == 4);
  CHECK(BlockPartition::uniform(100, 25).uniform_size() == 25);
  CHECK_THROWS_AS(BlockPartition::uniform(10, 3), ConfigError);
  BlockPartition bad;
  bad.blocks = {{0, 1}, {1, 2}};
  CHECK_THROWS_AS(bad.validate(3), ConfigError);
  bad.blocks = {{0}, {2}};
  CHECK_THROWS_AS(bad.validate(3), ConfigError);
  CHECK(KernelMode::block_wise(BlockPartition::uniform(10, 5)).label() == "bw5");
  CHECK(KernelMode::sequential(ScanOrder::RandomPermutation).label() == "pw-rs");
}

TEST_CASE("one block is bit-identical to the ensemble-wise kernel") {
  const auto t = gaussian4();
  const Ensemble init = random_ensemble(6, 4, 1, 0.1);
  const auto spec = DynamicsSpec::aldi(0.05, 0.01);
  const auto a = chain(KernelMode::ensemble_wise(), spec, t, init, 200);
  const auto b = chain(KernelMode::block_wise(BlockPartition::single(6)), spec, t, init, 200);
  CHECK((a.final_state - b.final_state).norm() == 0.0);
  CHECK(a.accepted == b.accepted);
}

TEST_CASE("singleton blocks are bit-identical to the sequential kernel") {
  const auto t = gaussian4();
  const Ensemble init = random_ensemble(6, 4, 2, 0.1);
  const auto spec = DynamicsSpec::aldi(0.05, 0.01);
  const auto a = chain(KernelMode::sequential(), spec, t, init, 200);
  const auto b = chain(KernelMode::block_wise(BlockPartition::singletons(6)), spec, t, init, 200);
  CHECK((a.final_state - b.final_state).norm() == 0.0);
}

TEST_CASE("runs are deterministic in the seed") {
  const auto t = gaussian4();
  const Ensemble init = random_ensemble(8, 4, 3, 0.1);
  const auto spec = DynamicsSpec::cbs(0.1, 0.05);
  const auto mode = KernelMode::block_wise(BlockPartition::uniform(8, 2), ScanOrder::RandomPermutation);
  const auto a = chain(mode, spec, t, init, 100, 11);
  const auto b = chain(mode, spec, t, init, 100, 11);
  const auto c = chain(mode, spec, t, init, 100, 12);
  CHECK((a.final_state - b.final_state).norm() == 0.0);
  CHECK((a.final_state - c.final_state).norm() > 0.0);
}

TEST_CASE("zero iterations leave the ensemble untouched") {
  const auto t = gaussian4();
  const Ensemble init = random_ensemble(4, 4, 4);
  ChainConfig cfg;
  const auto out = run_chain(KernelMode::ensemble_wise(), DynamicsSpec::pmala(0.1), t, init, cfg,
                             {ensemble_recorder("x", [](const Vector &x) { return x(0); })});
  CHECK(out.series[0].empty());
  CHECK(out.acceptance_rate() == 0.0);
  CHECK((out.final_state - init).norm() == 0.0);
  cfg.iterations = -1;
  CHECK_THROWS_AS(run_chain(KernelMode::ensemble_wise(), DynamicsSpec::pmala(0.1), t, init, cfg),
                  ConfigError);
}

TEST_CASE("proposals outside the support are rejected") {
  const Uniform01Target u;
  Ensemble init(4, 1);
  init << 0.1, 0.4, 0.7, 0.99;
  const auto out = chain(KernelMode::sequential(), DynamicsSpec::cbs(0.5, 0.5), u, init, 500);
  CHECK(out.final_state.minCoeff() >= 0.0);
  CHECK(out.final_state.maxCoeff() <= 1.0);
  CHECK(out.acceptance_rate() > 0.0);
  CHECK(out.acceptance_rate() < 1.0);
}

TEST_CASE("tiny steps are almost always accepted") {
  const auto t = gaussian4();
  const BimodalTarget b(0.1, 0.8);
  const Ensemble init = random_ensemble(10, 4, 5, 0.05);
  const Ensemble init1 = random_ensemble(10, 1, 5);
  for (const auto &spec : {DynamicsSpec::aldi(1e-12, 0.0), DynamicsSpec::pmala(1e-12),
                           DynamicsSpec::cbs(1e-12, 0.1)}) {
    CHECK(chain(KernelMode::ensemble_wise(), spec, t, init, 1000).acceptance_rate() >= 0.999);
    CHECK(chain(KernelMode::sequential(), spec, b, init1, 1000).acceptance_rate() >= 0.999);
  }
}

TEST_CASE("long pMALA run on a standard normal") {
  const DiagGaussianTarget t(Vector::Ones(1));
  const Ensemble init = random_ensemble(8, 1, 6);
  ChainConfig cfg;
  cfg.iterations = 200000;
  cfg.seed = 3;
  const auto out = run_chain(KernelMode::sequential(), DynamicsSpec::pmala(0.1), t, init, cfg,
                             {ensemble_recorder("x", [](const Vector &x) { return x(0); }),
                              ensemble_recorder("x2", [](const Vector &x) { return x(0) * x(0); })});
  const auto &x = out.get("x");
  const double mean = series_mean(x);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  const double se = std::sqrt(var * integrated_autocorr_series(x).int_ac / x.size());
  CHECK(std::abs(mean) < 3.0 * se);
  CHECK(out.acceptance_rate() > 0.5);
  CHECK(out.acceptance_rate() < 1.0);
  CHECK(series_mean(out.get("x2")) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("SVGD is only offered ensemble-wise") {
  const auto t = gaussian4();
  Ensemble state = random_ensemble(4, 4, 7, 0.1);
  const auto spec = DynamicsSpec::svgd(0.001, 1.0);
  CHECK_THROWS_AS(kernel_step(KernelMode::sequential(), spec, t, state, {}), UnsupportedMode);
  CHECK_NOTHROW(kernel_step(KernelMode::ensemble_wise(), spec, t, state, {}));
}

TEST_CASE("block update satisfies detailed balance for a fixed complement") {
  const auto t = gaussian4();
  const Ensemble base = random_ensemble(6, 4, 8, 0.2);
  const std::vector<int> block = {1, 3};
  const auto spec = DynamicsSpec::aldi(0.02, 0.05);
  for (int p = 0; p < 50; ++p) {
    const Matrix z = random_ensemble(2, 4, 100 + p, 0.2);
    const Matrix y = random_ensemble(2, 4, 200 + p, 0.2);
    auto flow = [&](const Matrix &from, const Matrix &to) {
      const BlockProposal fwd = block_proposal(spec, t, base, block, from);
      const BlockProposal rev = block_proposal(spec, t, base, block, to);
      double lf = 0.0, lt = 0.0;
      for (int k = 0; k < 2; ++k) {
        lf += t.log_density(from.row(k).transpose());
        lt += t.log_density(to.row(k).transpose());
      }
      const double qf = proposal_logpdf(fwd, to);
      return lf + qf + log_accept(lf, lt, qf, proposal_logpdf(rev, from));
    };
    const double a = flow(z, y);
    const double b = flow(y, z);
    CHECK(std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)));
  }
}

TEST_CASE("tuner reaches the target rate") {
  const auto t = gaussian4();
  const Ensemble init = random_ensemble(10, 4, 9, 0.1);
  TuneOptions o;
  o.target_rate = 0.5;
  o.epoch_length = 50;
  o.c0 = 3.0;
  const auto res = tune_step_size(KernelMode::sequential(), DynamicsSpec::pmala(0.1), t, init, o,
                                  60, 17);
  CHECK(res.trace.size() == 60);
  CHECK_FALSE(res.saturated);
  const auto check = chain(KernelMode::sequential(), DynamicsSpec::pmala(res.step), t, res.state,
                           2000, 18);
  CHECK(check.acceptance_rate() == doctest::Approx(0.5).epsilon(0.15));
}

TEST_CASE("tuner reaches 0.574 for pMALA on a standard normal") {
  const DiagGaussianTarget t(Vector::Ones(1));
  const Ensemble init = random_ensemble(1, 1, 11);
  TuneOptions o;
  o.target_rate = 0.574;
  o.epoch_length = 200;
  const auto res =
      tune_step_size(KernelMode::sequential(), DynamicsSpec::pmala(0.1), t, init, o, 50, 21);
  const auto check = chain(KernelMode::sequential(), DynamicsSpec::pmala(res.step), t, res.state,
                           20000, 22);
  CHECK(std::abs(check.acceptance_rate() - 0.574) <= 0.05);
}

TEST_CASE("doubling h lowers the acceptance rate") {
  const auto t = gaussian4();
  int lower = 0;
  for (int r = 0; r < 10; ++r) {
    const Ensemble init = random_ensemble(10, 4, 300 + r, 0.1);
    const double a = chain(KernelMode::sequential(), DynamicsSpec::pmala(0.002), t, init, 300,
                           40 + r).acceptance_rate();
    const double b = chain(KernelMode::sequential(), DynamicsSpec::pmala(0.004), t, init, 300,
                           40 + r).acceptance_rate();
    lower += b < a ? 1 : 0;
  }
  CHECK(lower >= 6);
}

TEST_CASE("tuner reports clamping and invalid targets") {
  const auto t = gaussian4();
  const Ensemble init = random_ensemble(4, 4, 10, 0.1);
  TuneOptions o;
  o.epoch_length = 10;
  o.h_max = 1e-6;
  o.target_rate = 0.3;
  const auto res =
      tune_step_size(KernelMode::sequential(), DynamicsSpec::pmala(1e-6), t, init, o, 5, 1);
  CHECK(res.saturated);
  o.target_rate = 0.99;
  CHECK_THROWS_AS(
      tune_step_size(KernelMode::sequential(), DynamicsSpec::pmala(0.1), t, init, o, 5, 1),
      ConfigError);
}

} // TEST_SUITE
