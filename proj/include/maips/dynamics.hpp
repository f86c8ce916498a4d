#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "maips/linalg.hpp"
#include "maips/rng.hpp"
#include "maips/targets.hpp"

namespace maips {

// M x d, one particle per row.
using Ensemble = Matrix;

enum class DynamicsKind { PMala, Aldi, Eksdf, Cbs, Svgd };

struct DynamicsSpec {
  DynamicsKind kind = DynamicsKind::PMala;
  double step = 0.01;       // h
  double gamma = 0.0;       // variance inflation, ALDI / EKSDF / CBS
  double bandwidth = 1.0;   // s, SVGD only
  bool unbiased_cov = false;  // 1/(M-1) instead of 1/M
  ForwardModelPtr forward;  // EKSDF only

  static DynamicsSpec pmala(double h);
  static DynamicsSpec aldi(double h, double gamma);
  static DynamicsSpec eksdf(double h, double gamma, ForwardModelPtr forward);
  static DynamicsSpec cbs(double h, double gamma);
  static DynamicsSpec svgd(double h, double bandwidth);

  // Throws ConfigError on out-of-range parameters.
  void validate() const;
  std::string label() const;
};

std::string to_string(DynamicsKind kind);
DynamicsKind parse_dynamics_kind(const std::string &name);

struct Moments {
  Vector mean;
  Matrix cov;
};

Moments empirical_moments(const Ensemble &e, bool unbiased = false);

/// Weights exp(l_i) normalized; `log_weights` has one entry per row of `e`.
Moments weighted_moments(const Ensemble &e, std::span<const double> log_weights);

// Gaussian proposal for the particles of one block. The covariance is block
// diagonal across particles; factors[k] belongs to particle block[k] and
// several entries may point at the same factor.
struct BlockProposal {
  std::vector<int> block;
  Matrix means;  // |b| x d
  std::vector<std::shared_ptr<const SpdFactor>> factors;
  double scale = 1.0;

  double joint_log_det() const;  // of the full scaled covariance
};

// SVGD proposal over the whole ensemble. The covariance couples particles
// through the kernel matrix: Cov(Y_i, Y_j) = scale * K_ij * Id_d.
struct FullCoupledProposal {
  Matrix mean;  // M x d
  SymSqrt kernel_root;
  double scale = 1.0;  // 2h/M
  double jitter = 0.0;  // added to the diagonal of K

  double joint_log_det() const;
};

struct KernelValue {
  double value = 0.0;
  Vector gradient;  // w.r.t. the first argument
};

KernelValue rbf_kernel(double s, const Vector &x, const Vector &y);

/// Builds the proposal for `block`. `eval` is the evaluation ensemble, i.e.
/// the working ensemble with the rows in `block` set to the values the
/// proposal starts from.
BlockProposal block_proposal(const DynamicsSpec &spec, const Target &target,
                             const Ensemble &eval, const std::vector<int> &block);

/// Same, with the block values given separately from the complement.
BlockProposal block_proposal(const DynamicsSpec &spec, const Target &target,
                             const Ensemble &working, const std::vector<int> &block,
                             const Matrix &block_values);

FullCoupledProposal svgd_proposal(const DynamicsSpec &spec, const Target &target,
                                  const Ensemble &e);

/// y holds the proposed rows of the block, in block order.
double proposal_logpdf(const BlockProposal &p, const Matrix &y);
double proposal_logpdf(const FullCoupledProposal &p, const Matrix &y);

/// Draws the proposed block rows. Row k uses the stream `key` with
/// particle = block[k], so a particle's noise does not depend on how the
/// ensemble is partitioned.
Matrix sample_proposal(const BlockProposal &p, StreamKey key);
Matrix sample_proposal(const FullCoupledProposal &p, StreamKey key);

/// Dense (Md x Md) covariance of a coupled proposal, coordinates ordered
/// particle-major. For tests and small problems only.
Matrix dense_covariance(const FullCoupledProposal &p);

} // namespace maips
