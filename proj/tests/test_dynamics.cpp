#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "maips/dynamics.hpp"
#include "maips/errors.hpp"

using namespace maips;

namespace {

Ensemble random_ensemble(int m, int d, std::uint64_t tag) {
  auto s = testing::stream(20, tag);
  return testing::random_matrix(m, d, s);
}

DiagGaussianTarget gaussian4() {
  Vector var(4);
  var << 1.0, 0.1, 0.01, 0.001;
  return DiagGaussianTarget(var);
}

std::vector<int> all(int m) {
  std::vector<int> b(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) b[i] = i;
  return b;
}

} // namespace

TEST_SUITE("dynamics") {

TEST_CASE("empirical moments of small ensembles") {
  Ensemble e(4, 1);
  e << 0, 1, 2, 3;
  const Moments m = empirical_moments(e);
  CHECK(m.mean(0) == doctest::Approx(1.5));
  CHECK(m.cov(0, 0) == doctest::Approx(1.25));
  CHECK(empirical_moments(e, true).cov(0, 0) == doctest::Approx(5.0 / 3.0));

  Ensemble two(2, 2);
  two << 1, 0, -1, 0;
  const Moments t = empirical_moments(two);
  CHECK(t.mean.norm() == 0.0);
  CHECK(t.cov(0, 0) == doctest::Approx(1.0));
  CHECK(t.cov(1, 1) == 0.0);
}

TEST_CASE("weighted moments with weights 3:1") {
  Ensemble e(2, 1);
  e << 0, 1;
  const std::vector<double> lw = {std::log(3.0), 0.0};
  const Moments m = weighted_moments(e, lw);
  CHECK(m.mean(0) == doctest::Approx(0.25));
  CHECK(m.cov(0, 0) == doctest::Approx(0.1875));
  const std::vector<double> shifted = {std::log(3.0) - 700.0, -700.0};
  CHECK(weighted_moments(e, shifted).mean(0) == doctest::Approx(0.25));
  CHECK_THROWS_AS(weighted_moments(e, std::vector<double>{1.0}), DimensionMismatch);
}

TEST_CASE("ALDI with gamma 1 reduces to pMALA") {
  const auto t = gaussian4();
  const Ensemble e = random_ensemble(6, 4, 1);
  const BlockProposal a = block_proposal(DynamicsSpec::aldi(0.01, 1.0), t, e, all(6));
  const BlockProposal p = block_proposal(DynamicsSpec::pmala(0.01), t, e, all(6));
  CHECK((a.means - p.means).norm() < 1e-14);
  CHECK(a.scale == p.scale);
  CHECK((a.factors[0]->lower - p.factors[0]->lower).norm() == 0.0);
}

TEST_CASE("CBS with h = 1 is centred at the weighted mean") {
  const auto t = gaussian4();
  const Ensemble e = random_ensemble(5, 4, 2);
  const BlockProposal p = block_proposal(DynamicsSpec::cbs(1.0, 0.0), t, e, all(5));
  std::vector<double> lw;
  for (int i = 0; i < 5; ++i) lw.push_back(t.log_density(e.row(i).transpose()));
  const Moments wm = weighted_moments(e, lw);
  for (int i = 0; i < 5; ++i) CHECK((p.means.row(i).transpose() - wm.mean).norm() < 1e-12);
  CHECK(p.scale == 4.0);
}

TEST_CASE("ALDI scalar case with three particles") {
  // pi = N(0, 1), particles -1, 0, 2: mean 1/3, C = 14/9.
  const DiagGaussianTarget t(Vector::Ones(1));
  Ensemble e(3, 1);
  e << -1, 0, 2;
  const double h = 0.1;
  const BlockProposal p = block_proposal(DynamicsSpec::aldi(h, 0.0), t, e, {0, 1, 2});
  const double c = 14.0 / 9.0;
  const double mbar = 1.0 / 3.0;
  for (int i = 0; i < 3; ++i) {
    const double x = e(i, 0);
    const double expect = x + h * (-c * x + (2.0 / 3.0) * (x - mbar));
    CHECK(p.means(i, 0) == doctest::Approx(expect).epsilon(1e-14));
  }
  CHECK(std::pow(p.factors[0]->lower(0, 0), 2) == doctest::Approx(c));
  CHECK(p.scale == doctest::Approx(0.2));
}

TEST_CASE("block proposal depends only on the evaluation ensemble") {
  const auto t = gaussian4();
  const Ensemble work = random_ensemble(8, 4, 3);
  const Matrix vals = random_ensemble(2, 4, 4);
  const std::vector<int> block = {2, 5};
  Ensemble eval = work;
  eval.row(2) = vals.row(0);
  eval.row(5) = vals.row(1);
  for (const auto &spec :
       {DynamicsSpec::aldi(0.05, 0.1), DynamicsSpec::cbs(0.05, 0.1), DynamicsSpec::pmala(0.05)}) {
    const BlockProposal a = block_proposal(spec, t, work, block, vals);
    const BlockProposal b = block_proposal(spec, t, eval, block);
    CHECK((a.means - b.means).norm() == 0.0);
  }
}

TEST_CASE("pMALA proposal density has the closed form") {
  const auto t = gaussian4();
  const Ensemble e = random_ensemble(3, 4, 5);
  const double h = 0.02;
  const BlockProposal p = block_proposal(DynamicsSpec::pmala(h), t, e, {0, 1, 2});
  const Matrix y = random_ensemble(3, 4, 6);
  double expect = 0.0;
  for (int i = 0; i < 3; ++i) {
    const Vector z = e.row(i).transpose();
    const Vector mu = z + h * t.gradient(z);
    const Vector r = y.row(i).transpose() - mu;
    expect += -0.5 * 4 * kLogTwoPi - 0.5 * 4 * std::log(2 * h) - r.squaredNorm() / (4 * h);
  }
  CHECK(proposal_logpdf(p, y) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("block proposal density is the product over particles") {
  const auto t = gaussian4();
  const Ensemble e = random_ensemble(7, 4, 7);
  const auto spec = DynamicsSpec::aldi(0.03, 0.2);
  const BlockProposal p = block_proposal(spec, t, e, {1, 4, 6});
  const Matrix y = random_ensemble(3, 4, 8);
  double sum = 0.0;
  for (int k = 0; k < 3; ++k) {
    sum += gaussian_logpdf(y.row(k).transpose(), p.means.row(k).transpose(), *p.factors[k],
                           p.scale);
  }
  CHECK(proposal_logpdf(p, y) == doctest::Approx(sum).epsilon(1e-14));
}

TEST_CASE("particle noise does not depend on the partition") {
  const auto t = gaussian4();
  const Ensemble e = random_ensemble(4, 4, 9);
  const auto spec = DynamicsSpec::pmala(0.01);
  const StreamKey key{7, 0, 3, 0, 0, DrawPurpose::Proposal};
  const Matrix joint = sample_proposal(block_proposal(spec, t, e, all(4)), key);
  const Matrix single = sample_proposal(block_proposal(spec, t, e, {2}), key);
  CHECK((joint.row(2) - single.row(0)).norm() == 0.0);
}

TEST_CASE("rbf kernel values and gradient") {
  Vector x(2), y(2);
  x << 1.0, 0.0;
  y << 0.0, 0.0;
  const KernelValue k = rbf_kernel(1.0, x, y);
  CHECK(k.value == doctest::Approx(std::exp(-0.5)));
  CHECK(k.gradient(0) == doctest::Approx(-std::exp(-0.5)));
  CHECK(k.gradient(1) == 0.0);
  CHECK(rbf_kernel(0.3, x, x).value == 1.0);
}

TEST_CASE("SVGD with one particle is a Langevin step") {
  const auto t = gaussian4();
  const Ensemble e = random_ensemble(1, 4, 10);
  const double h = 0.01;
  const FullCoupledProposal p = svgd_proposal(DynamicsSpec::svgd(h, 0.5), t, e);
  const Vector z = e.row(0).transpose();
  CHECK((p.mean.row(0).transpose() - (z + h * t.gradient(z))).norm() < 1e-14);
  CHECK(p.scale == doctest::Approx(2 * h));
  CHECK(p.kernel_root.root(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("SVGD density agrees with the dense Gaussian") {
  const auto t = gaussian4();
  const Ensemble e = random_ensemble(3, 4, 11);
  const FullCoupledProposal p = svgd_proposal(DynamicsSpec::svgd(0.05, 1.5), t, e);
  const Matrix y = random_ensemble(3, 4, 12);
  const Matrix cov = dense_covariance(p);
  const SpdFactor f = spd_factor(cov);
  Vector yv(12), mv(12);
  for (int i = 0; i < 3; ++i) {
    for (int a = 0; a < 4; ++a) {
      yv(i * 4 + a) = y(i, a);
      mv(i * 4 + a) = p.mean(i, a);
    }
  }
  CHECK(proposal_logpdf(p, y) == doctest::Approx(gaussian_logpdf(yv, mv, f, 1.0)).epsilon(1e-10));
  CHECK(p.joint_log_det() == doctest::Approx(f.log_det).epsilon(1e-10));
}

TEST_CASE("SVGD is rejected by block proposals") {
  const auto t = gaussian4();
  const Ensemble e = random_ensemble(3, 4, 13);
  CHECK_THROWS_AS(block_proposal(DynamicsSpec::svgd(0.01, 1.0), t, e, {0}), UnsupportedMode);
  CHECK_THROWS_AS(svgd_proposal(DynamicsSpec::aldi(0.01, 0.0), t, e), UnsupportedMode);
}

TEST_CASE("spec validation") {
  CHECK_THROWS_AS(DynamicsSpec::aldi(0.0, 0.1).validate(), ConfigError);
  CHECK_THROWS_AS(DynamicsSpec::aldi(0.1, 1.5).validate(), ConfigError);
  CHECK_THROWS_AS(DynamicsSpec::svgd(0.1, 0.0).validate(), ConfigError);
  CHECK_THROWS_AS(DynamicsSpec::eksdf(0.1, 0.0, nullptr).validate(), ConfigError);
  CHECK_NOTHROW(DynamicsSpec::cbs(0.1, 0.0).validate());
  CHECK(parse_dynamics_kind("cbs") == DynamicsKind::Cbs);
  CHECK_THROWS_AS(parse_dynamics_kind("hmc"), ConfigError);
}

TEST_CASE("bad blocks are rejected") {
  const auto t = gaussian4();
  const Ensemble e = random_ensemble(3, 4, 14);
  const auto spec = DynamicsSpec::pmala(0.01);
  CHECK_THROWS_AS(block_proposal(spec, t, e, {}), DimensionMismatch);
  CHECK_THROWS_AS(block_proposal(spec, t, e, {0, 0}), DimensionMismatch);
  CHECK_THROWS_AS(block_proposal(spec, t, e, {3}), DimensionMismatch);
}

} // TEST_SUITE
