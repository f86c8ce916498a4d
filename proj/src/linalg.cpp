#include "maips/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "maips/errors.hpp"

namespace maips {

namespace {

bool valid_factor(const Matrix &lower) {
  for (Eigen::Index i = 0; i < lower.rows(); ++i) {
    const double v = lower(i, i);
    if (!(v > 0.0) || !std::isfinite(v)) return false;
  }
  return lower.allFinite();
}

} // namespace

SpdFactor spd_factor(const Matrix &s) {
  const Eigen::Index d = s.rows();
  if (d < 1 || s.cols() != d) {
    throw DimensionMismatch("spd_factor: matrix must be square and non-empty");
  }
  if (!s.allFinite()) {
    throw NotPositiveDefinite("spd_factor: matrix has non-finite entries");
  }
  const double base = std::abs(s.trace()) / static_cast<double>(d);
  for (double level : kJitterSchedule) {
    const double eps = level * base;
    if (level > 0.0 && !(eps > 0.0)) break;
    Matrix shifted = s;
    shifted.diagonal().array() += eps;
    Eigen::LLT<Matrix> llt(shifted);
    if (llt.info() != Eigen::Success) continue;
    Matrix lower = llt.matrixL();
    if (!valid_factor(lower)) continue;
    SpdFactor f;
    f.log_det = 2.0 * lower.diagonal().array().log().sum();
    f.lower = std::move(lower);
    f.jitter = eps;
    return f;
  }
  throw NotPositiveDefinite("spd_factor: factorization failed at maximum jitter"
                            " (degenerate covariance)");
}

bool SymSqrt::regular() const {
  return eigenvalues.size() > 0 && eigenvalues.minCoeff() > 0.0;
}

double SymSqrt::log_det() const {
  if (!regular()) return -std::numeric_limits<double>::infinity();
  return eigenvalues.array().log().sum();
}

Matrix SymSqrt::solve(const Matrix &rhs) const {
  if (!regular()) throw NotPositiveDefinite("SymSqrt::solve: singular matrix");
  Matrix t = eigenvectors.transpose() * rhs;
  t = eigenvalues.cwiseInverse().asDiagonal() * t;
  return eigenvectors * t;
}

SymSqrt sym_sqrt(const Matrix &k) {
  const Eigen::Index n = k.rows();
  if (n < 1 || k.cols() != n) {
    throw DimensionMismatch("sym_sqrt: matrix must be square and non-empty");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(k);
  if (eig.info() != Eigen::Success) {
    throw NotPsd("sym_sqrt: eigendecomposition failed");
  }
  const double norm = k.norm();
  Vector lambda = eig.eigenvalues();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (lambda(i) < 0.0) {
      if (lambda(i) < -1e-10 * norm) {
        throw NotPsd("sym_sqrt: eigenvalue " + std::to_string(lambda(i)) +
                     " below clamping tolerance");
      }
      lambda(i) = 0.0;
    }
  }
  SymSqrt out;
  out.eigenvectors = eig.eigenvectors();
  out.root = out.eigenvectors * lambda.cwiseSqrt().asDiagonal() *
             out.eigenvectors.transpose();
  // Exact symmetry for downstream consumers.
  out.root = 0.5 * (out.root + out.root.transpose()).eval();
  out.eigenvalues = std::move(lambda);
  return out;
}

double gaussian_logpdf(const Vector &x, const Vector &mean,
                       const SpdFactor &factor, double scale) {
  const Eigen::Index n = x.size();
  if (mean.size() != n || factor.dim() != n) {
    throw DimensionMismatch("gaussian_logpdf: dimension mismatch");
  }
  Vector r = factor.lower.triangularView<Eigen::Lower>().solve(x - mean);
  const double nd = static_cast<double>(n);
  return -0.5 * r.squaredNorm() / scale -
         0.5 * (nd * (kLogTwoPi + std::log(scale)) + factor.log_det);
}

Vector gaussian_sample(const Vector &mean, const SpdFactor &factor,
                       double scale, RngStream &stream) {
  if (mean.size() != factor.dim()) {
    throw DimensionMismatch("gaussian_sample: dimension mismatch");
  }
  Vector z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = stream.normal();
  const Vector lz = factor.lower.triangularView<Eigen::Lower>() * z;
  return mean + std::sqrt(scale) * lz;
}

std::vector<double> normalized_log_weights(std::span<const double> log_values) {
  double top = -std::numeric_limits<double>::infinity();
  for (double v : log_values) top = std::max(top, v);
  if (log_values.empty() || top == -std::numeric_limits<double>::infinity()) {
    throw AllWeightsZero("normalized_log_weights: every weight is zero");
  }
  std::vector<double> w(log_values.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(log_values[i] - top);
    total += w[i];
  }
  for (double &v : w) v /= total;
  return w;
}

} // namespace maips
