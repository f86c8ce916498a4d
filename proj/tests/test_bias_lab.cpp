#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "maips/bias_lab.hpp"
#include "maips/errors.hpp"

using namespace maips;

namespace {

Vector fractions(std::initializer_list<double> num, double den) {
  Vector v(static_cast<Eigen::Index>(num.size()));
  Eigen::Index k = 0;
  for (double x : num) v(k++) = x / den;
  return v;
}

GridKernelSpec small_spec(GridTarget t, GridProposal p) {
  GridKernelSpec s;
  s.nodes = 11;
  s.target = t;
  s.proposal = p;
  s.h = 0.25;
  s.gamma = 0.1;
  return s;
}

// Consensus-proposal tables whose forward and reverse densities use the
// variance factors fwd_factor * h and rev_factor * h.
std::vector<Matrix> cbs_tables(const GridModel &g, double h, double gamma, double fwd_factor,
                               double rev_factor) {
  const int n = g.size();
  const Vector &x = g.nodes();
  const Vector &w = g.weights();
  Vector dens(n);
  for (int i = 0; i < n; ++i) dens(i) = 0.5 + 2.0 * std::min(x(i), 1.0 - x(i));
  auto lq = [&](int from, int partner, double to, double factor) {
    const double wa = dens(from), wb = dens(partner);
    const double m = (wa * x(from) + wb * x(partner)) / (wa + wb);
    const double c = (wa * std::pow(x(from) - m, 2) + wb * std::pow(x(partner) - m, 2)) / (wa + wb);
    const double var = factor * h * (gamma + (1.0 - gamma) * c);
    const double r = to - ((1.0 - h) * x(from) + h * m);
    return -0.5 * (kLogTwoPi + std::log(var) + r * r / var);
  };
  std::vector<Matrix> t(n, Matrix::Zero(n, n));
  for (int z = 0; z < n; ++z) {
    for (int i = 0; i < n; ++i) {
      double moved = 0.0;
      for (int k = 0; k < n; ++k) {
        if (k == i) continue;
        const double fwd = lq(i, z, x(k), fwd_factor);
        const double rev = lq(k, z, x(i), rev_factor);
        t[z](i, k) = w(k) * std::exp(std::min(fwd, std::log(dens(k) / dens(i)) + rev));
        moved += t[z](i, k);
      }
      t[z](i, i) = 1.0 - moved;
    }
  }
  return t;
}

} // namespace

TEST_SUITE("bias_lab") {

TEST_CASE("printed two-state matrix") {
  const Matrix p = printed_two_state_psim();
  CHECK(max_row_sum_error(p) < 1e-15);
  const Vector nu = invariant_measure(p);
  CHECK((nu - fractions({45, 49, 35, 44}, 173)).cwiseAbs().maxCoeff() < 1e-15);
  const auto [m1, m2] = pair_marginals(nu, 2);
  CHECK(m1(0) == doctest::Approx(94.0 / 173));
  CHECK(m2(0) == doctest::Approx(80.0 / 173));
}

TEST_CASE("two-state matrix built from the MH kernels") {
  const DiscreteSim sim = build_discrete_psim(two_state_proposals(), Vector::Constant(2, 0.5));
  CHECK(max_row_sum_error(sim.psim) < 1e-15);
  // Single-particle kernels are reversible for pi = 1/2.
  for (const Matrix &k : sim.parts.kernels) CHECK(std::abs(k(0, 1) - k(1, 0)) < 1e-15);
  const Vector nu = invariant_measure(sim.psim);
  CHECK((nu - fractions({45, 42, 42, 44}, 173)).cwiseAbs().maxCoeff() < 1e-15);
  const auto [m1, m2] = pair_marginals(nu, 2);
  CHECK(m1(0) == doctest::Approx(87.0 / 173));
  CHECK(m1(0) != doctest::Approx(0.5));
  CHECK((m1 - m2).norm() < 1e-15);

  // One step from the product target keeps both marginals at 1/2.
  const Vector one = one_step_from_product(sim.psim, Vector::Constant(2, 0.5));
  const auto [o1, o2] = pair_marginals(one, 2);
  CHECK(o1(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(o2(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(one(1) == doctest::Approx(35.0 / 144));
}

TEST_CASE("discrete MH acceptance and rejection") {
  const DiscreteMH mh = discrete_mh(two_state_proposals(), Vector::Constant(2, 0.5));
  CHECK(mh.alpha[0](0, 1) == doctest::Approx(1.0));
  CHECK(mh.alpha[0](1, 0) == doctest::Approx(0.5));
  CHECK(mh.rejection[0](1) == doctest::Approx(1.0 / 3));
  CHECK(mh.kernels[1](0, 1) == doctest::Approx(0.5));
}

TEST_CASE("reducible chains are rejected") {
  const Matrix id = Matrix::Identity(3, 3);
  CHECK(closed_class_count(id) == 3);
  CHECK_THROWS_AS(invariant_measure(id), Reducible);
  Matrix bad = Matrix::Constant(2, 2, 0.6);
  CHECK_THROWS_AS(invariant_measure(bad), ConfigError);
}

TEST_CASE("grid kernels are stochastic") {
  for (auto prop : {GridProposal::MeanPair, GridProposal::Spread, GridProposal::Cbs}) {
    const GridModel g(small_spec(GridTarget::Triangular, prop));
    CHECK(std::abs(g.target().sum() - 1.0) < 1e-14);
    for (const auto &mode : {KernelMode::ensemble_wise(), KernelMode::sequential(),
                             KernelMode::simultaneous()}) {
      const Matrix p = g.dense(mode);
      CHECK(max_row_sum_error(p) < 1e-13);
      CHECK(p.minCoeff() >= -1e-15);
    }
  }
}

TEST_CASE("ensemble-wise grid kernel is reversible") {
  const GridModel g(small_spec(GridTarget::Triangular, GridProposal::MeanPair));
  const Matrix p = g.dense(KernelMode::ensemble_wise());
  const Matrix pi = g.product_target();
  const int n = g.size();
  double worst = 0.0;
  for (int a = 0; a < n * n; ++a) {
    for (int b = 0; b < n * n; ++b) {
      const double fa = pi(a / n, a % n) * p(a, b);
      const double fb = pi(b / n, b % n) * p(b, a);
      worst = std::max(worst, std::abs(fa - fb));
    }
  }
  CHECK(worst < 1e-15);
  CHECK(g.ensemble_entry(2, 3, 4, 5) == doctest::Approx(p(2 * n + 3, 4 * n + 5)).epsilon(1e-12));
  CHECK(g.ensemble_entry(2, 3, 2, 3) == doctest::Approx(p(2 * n + 3, 2 * n + 3)).epsilon(1e-12));
}

TEST_CASE("correct grid kernels keep the product target, the simultaneous one does not") {
  const GridModel g(small_spec(GridTarget::Triangular, GridProposal::MeanPair));
  const Matrix pi = g.product_target();
  CHECK(invariance_residual(g, KernelMode::ensemble_wise(), pi) < 1e-13);
  CHECK(invariance_residual(g, KernelMode::sequential(), pi) < 1e-13);
  CHECK(invariance_residual(g, KernelMode::sequential(ScanOrder::RandomPermutation), pi) < 1e-13);
  CHECK(invariance_residual(g, KernelMode::block_wise(BlockPartition::singletons(2)), pi) < 1e-13);
  CHECK(invariance_residual(g, KernelMode::simultaneous(), pi) >= 1e-3);
  CHECK_THROWS_AS(g.apply(KernelMode::unadjusted(), pi), UnsupportedMode);
}

TEST_CASE("a single block equals the ensemble-wise grid kernel") {
  const GridModel g(small_spec(GridTarget::Uniform, GridProposal::Spread));
  auto s = testing::stream(50);
  Matrix v = testing::random_matrix(g.size(), g.size(), s).cwiseAbs();
  v /= v.sum();
  const Matrix a = g.apply(KernelMode::block_wise(BlockPartition::single(2)), v);
  const Matrix b = g.apply(KernelMode::ensemble_wise(), v);
  CHECK((a - b).norm() == 0.0);
}

TEST_CASE("power iteration finds the invariant measure of the simultaneous kernel") {
  const GridModel g(small_spec(GridTarget::Triangular, GridProposal::MeanPair));
  const PowerResult r = grid_invariant_measure(g, KernelMode::simultaneous(), 1e-13);
  CHECK(r.residual < 1e-13);
  CHECK(std::abs(r.nu.sum() - 1.0) < 1e-13);
  const Matrix p = g.dense(KernelMode::simultaneous());
  const Vector nu = invariant_measure(p);
  const int n = g.size();
  for (int a = 0; a < n * n; ++a) CHECK(std::abs(nu(a) - r.nu(a / n, a % n)) < 1e-11);
  const BiasSummary s = bias_summary(r.nu, g.target());
  CHECK(s.max_rel_joint > 1e-3);
  CHECK(bias_summary(g.product_target(), g.target()).max_rel_joint < 1e-14);
}

TEST_CASE("precomputed tables reproduce the consensus kernel and catch a variance slip") {
  auto spec = small_spec(GridTarget::Triangular, GridProposal::Cbs);
  const GridModel g(spec);
  const auto same = cbs_tables(g, spec.h, spec.gamma, 4.0, 4.0);
  for (int z = 0; z < g.size(); ++z) CHECK((same[z] - g.tables()[z]).cwiseAbs().maxCoeff() < 1e-14);

  const GridModel slip(g.nodes(), g.target(), cbs_tables(g, spec.h, spec.gamma, 4.0, 2.0));
  const Matrix pi = g.product_target();
  CHECK(invariance_residual(g, KernelMode::sequential(), pi) < 1e-13);
  CHECK(invariance_residual(slip, KernelMode::sequential(), pi) > 1e-6);
  CHECK_THROWS_AS(slip.apply(KernelMode::ensemble_wise(), pi), UnsupportedMode);
}

TEST_CASE("doubly stochastic matrices have a uniform invariant measure") {
  Matrix p(3, 3);
  p << 0.2, 0.3, 0.5, 0.5, 0.2, 0.3, 0.3, 0.5, 0.2;
  CHECK((invariant_measure(p) - Vector::Constant(3, 1.0 / 3)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("non-interacting proposals leave the simultaneous kernel unbiased") {
  GridKernelSpec s;
  s.nodes = 101;
  s.target = GridTarget::Triangular;
  s.proposal = GridProposal::Independent;
  s.h = 0.25;
  const GridModel g(s);
  const PowerResult r = grid_invariant_measure(g, KernelMode::simultaneous(), 1e-12);
  CHECK((r.nu - g.product_target()).cwiseAbs().sum() < 2e-3);
}

TEST_CASE("one step from the product target keeps the grid marginals") {
  GridKernelSpec s;
  s.nodes = 101;
  const GridModel g(s);
  const Matrix one = g.apply(KernelMode::simultaneous(), g.product_target());
  const Vector m1 = one.rowwise().sum();
  const Vector m2 = one.colwise().sum().transpose();
  CHECK((m1 - g.target()).cwiseAbs().sum() < 2e-3);
  CHECK((m2 - g.target()).cwiseAbs().sum() < 2e-3);
}

TEST_CASE("grid spec validation") {
  GridKernelSpec s;
  s.nodes = 10;
  CHECK_THROWS_AS(GridModel{s}, ConfigError);
  s.nodes = 11;
  s.proposal = GridProposal::Cbs;
  s.gamma = 0.0;
  CHECK_THROWS_AS(GridModel{s}, ConfigError);
}

} // TEST_SUITE
