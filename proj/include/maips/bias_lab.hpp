#pragma once

#include <string>
#include <utility>
#include <vector>

#include "maips/linalg.hpp"
#include "maips/metropolis.hpp"

namespace maips {

// ---------------------------------------------------------------------------
// Finite state spaces. Pair states (a, b) of two particles are ordered
// lexicographically: index a * s + b.

/// Stationary distribution of an irreducible right-stochastic matrix via a
/// dense linear solve. Throws Reducible when more than one closed class
/// exists.
Vector invariant_measure(const Matrix &p);

/// Closed communicating classes of the transition graph (entries > 0).
int closed_class_count(const Matrix &p);

double max_row_sum_error(const Matrix &p);

struct DiscreteMH {
  std::vector<Matrix> alpha;      // alpha[z](x, y)
  std::vector<Vector> rejection;  // r[z](x)
  std::vector<Matrix> kernels;    // P[z](x, y), right stochastic
};

/// Metropolis-Hastings kernels for each proposal parameter z.
DiscreteMH discrete_mh(const std::vector<Matrix> &proposals, const Vector &pi);

/// P_sim((a,b),(c,d)) = P_b(a, c) * P_a(b, d).
Matrix simultaneous_product(const std::vector<Matrix> &kernels);

struct DiscreteSim {
  DiscreteMH parts;
  Matrix psim;
};

DiscreteSim build_discrete_psim(const std::vector<Matrix> &proposals, const Vector &pi);

/// The two-state example: Q_{x1} = [[2/3,1/3],[2/3,1/3]], Q_{x2} = 1/2, pi = 1/2.
std::vector<Matrix> two_state_proposals();
/// The 4 x 4 matrix as it appears in print for that example.
Matrix printed_two_state_psim();

/// Particle-wise marginals of a distribution on s x s pair states.
std::pair<Vector, Vector> pair_marginals(const Vector &nu, int s);

/// (pi x pi) P.
Vector one_step_from_product(const Matrix &p, const Vector &pi);

// ---------------------------------------------------------------------------
// Two particles on a uniform grid over [0, 1]. A distribution is an n x n
// matrix V(i, j) = mass at (x_i, x_j).

enum class GridTarget { Triangular, Uniform };

enum class GridProposal {
  MeanPair,     // N((x + z)/2, h)
  Spread,       // N(x, h (gamma + (1 - gamma) (z - x)^2 / 2))
  Independent,  // N(x, h)
  Cbs,          // N((1-h) x + h m_pi, 4h (gamma + (1 - gamma) C_pi))
};

struct GridKernelSpec {
  int nodes = 101;
  GridTarget target = GridTarget::Triangular;
  GridProposal proposal = GridProposal::MeanPair;
  double h = 0.25;
  double gamma = 0.01;
};

std::string to_string(GridTarget t);
std::string to_string(GridProposal p);

class GridModel {
public:
  explicit GridModel(const GridKernelSpec &spec);

  /// From precomputed conditional kernels: tables[z](i, k) moves a particle
  /// from node i to node k while its partner sits at node z. The joint
  /// (ensemble-wise) kernel is unavailable for such a model.
  GridModel(Vector nodes, Vector target, std::vector<Matrix> tables);

  int size() const { return static_cast<int>(nodes_.size()); }
  const Vector &nodes() const { return nodes_; }
  const Vector &weights() const { return weights_; }
  // Discretized one-particle target, sums to 1.
  const Vector &target() const { return target_; }
  Matrix product_target() const;
  const std::vector<Matrix> &tables() const { return tables_; }

  Matrix apply_first(const Matrix &v) const;   // move particle 1
  Matrix apply_second(const Matrix &v) const;  // move particle 2
  Matrix apply_simultaneous(const Matrix &v) const;
  Matrix apply_ensemble(const Matrix &v) const;
  Matrix apply(const KernelMode &mode, const Matrix &v) const;

  /// Transition probability of the joint kernel between pair states.
  double ensemble_entry(int i, int j, int k, int l) const;

  /// Dense n^2 x n^2 matrix of a kernel, for small grids.
  Matrix dense(const KernelMode &mode) const;

private:
  double log_q(int x, int z, double y) const;  // needs spec_
  void build_tables();

  GridKernelSpec spec_;
  bool has_density_ = false;
  Vector nodes_;
  Vector weights_;
  Vector log_pi_;  // unnormalized log density at the nodes
  Vector target_;
  std::vector<Matrix> tables_;     // tables_[z](i, k)
  std::vector<Matrix> by_origin_;  // by_origin_[i](z, k) = tables_[z](i, k)
  std::vector<double> lq_;         // log q for (x, z, y) on the grid
};

/// ||v P - v||_1 after one application.
double invariance_residual(const GridModel &g, const KernelMode &mode, const Matrix &v);

struct PowerResult {
  Matrix nu;
  int iterations = 0;
  double residual = 0.0;
};

/// Power iteration started from the product target, until ||nu P - nu||_1 < tol.
PowerResult grid_invariant_measure(const GridModel &g, const KernelMode &mode,
                                   double tol = 1e-13, int max_iter = 20000);

struct BiasSummary {
  double max_rel_joint = 0.0;     // max |nu - pi| / pi over pair states
  double l1_joint = 0.0;          // ||nu - pi||_1
  double max_rel_marginal = 0.0;  // over both particles and all nodes
  double mean_rel_marginal = 0.0;
};

BiasSummary bias_summary(const Matrix &nu, const Vector &target);

} // namespace maips
