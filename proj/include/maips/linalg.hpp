#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "maips/rng.hpp"

namespace maips {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Cholesky factor of a symmetric positive definite matrix, possibly after a
/// small diagonal jitter. `log_det` is the log-determinant of L * L^T.
struct SpdFactor {
  Matrix lower;
  double log_det = 0.0;
  double jitter = 0.0;

  int dim() const { return static_cast<int>(lower.rows()); }
};

/// Symmetric square root of a PSD matrix, kept together with the
/// eigendecomposition it came from so that sampling and density evaluation
/// use exactly the same matrix.
struct SymSqrt {
  Matrix root;
  Vector eigenvalues; // clamped, ascending
  Matrix eigenvectors;

  int dim() const { return static_cast<int>(root.rows()); }
  bool regular() const;
  double log_det() const;
  // Solves (root * root) x = rhs, column by column.
  Matrix solve(const Matrix &rhs) const;
};

/// Relative jitter levels, multiplied by trace(S)/d.
inline constexpr double kJitterSchedule[] = {0.0, 1e-12, 1e-10, 1e-8, 1e-6};

/// Factors S + eps*I with the smallest eps from kJitterSchedule for which the
/// Cholesky succeeds. Throws NotPositiveDefinite otherwise.
SpdFactor spd_factor(const Matrix &s);

/// Symmetric root of a PSD matrix. Eigenvalues in [-1e-10*||K||, 0) are
/// clamped to zero, anything below throws NotPsd.
SymSqrt sym_sqrt(const Matrix &k);

/// log N(x; mean, scale * L L^T).
double gaussian_logpdf(const Vector &x, const Vector &mean,
                       const SpdFactor &factor, double scale);

/// mean + sqrt(scale) * L z with z drawn from `stream`.
Vector gaussian_sample(const Vector &mean, const SpdFactor &factor,
                       double scale, RngStream &stream);

/// exp(l_i - logsumexp(l)). Throws AllWeightsZero if all entries are -inf.
std::vector<double> normalized_log_weights(std::span<const double> log_values);

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

} // namespace maips
