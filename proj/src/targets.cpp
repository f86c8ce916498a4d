#include "maips/targets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "maips/errors.hpp"

namespace maips {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_dim(const Target &t, const Vector &x) {
  if (x.size() != t.dim()) {
    throw DimensionMismatch(t.name() + ": expected dimension " +
                            std::to_string(t.dim()) + ", got " +
                            std::to_string(x.size()));
  }
}
} // namespace

Vector Target::gradient(const Vector &) const {
  throw NoGradient(name() + " has no gradient");
}

TargetEval evaluate_target(const Target &target, const Vector &x) {
  check_dim(target, x);
  if (!target.differentiable()) {
    throw NoGradient(target.name() + " has no gradient");
  }
  return {target.log_density(x), target.gradient(x)};
}

BimodalTarget::BimodalTarget(double sigma, double m0) : sigma_(sigma), m0_(m0) {
  if (!(sigma > 0.0)) throw ConfigError("bimodal: sigma must be positive");
}

double BimodalTarget::log_density(const Vector &x) const {
  check_dim(*this, x);
  const double v = x(0);
  const double misfit = v * v - 1.0;
  return -misfit * misfit / (2.0 * sigma_ * sigma_) - 0.5 * (v - m0_) * (v - m0_);
}

Vector BimodalTarget::gradient(const Vector &x) const {
  check_dim(*this, x);
  const double v = x(0);
  Vector g(1);
  g(0) = -2.0 * v * (v * v - 1.0) / (sigma_ * sigma_) - (v - m0_);
  return g;
}

DiagGaussianTarget::DiagGaussianTarget(Vector variances)
    : variances_(std::move(variances)) {
  if (variances_.size() < 1 || (variances_.array() <= 0.0).any()) {
    throw ConfigError("diag_gaussian: variances must be positive");
  }
  precisions_ = variances_.cwiseInverse();
}

double DiagGaussianTarget::log_density(const Vector &x) const {
  check_dim(*this, x);
  return -0.5 * (x.array().square() * precisions_.array()).sum();
}

Vector DiagGaussianTarget::gradient(const Vector &x) const {
  check_dim(*this, x);
  return -(x.array() * precisions_.array()).matrix();
}

double Uniform01Target::log_density(const Vector &x) const {
  check_dim(*this, x);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(x(i) >= 0.0 && x(i) <= 1.0)) return kNegInf;
  }
  return 0.0;
}

double TriangularTarget::log_density(const Vector &x) const {
  check_dim(*this, x);
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x(i);
    if (!(v >= 0.0 && v <= 1.0)) return kNegInf;
    total += std::log(0.5 + 2.0 * std::min(v, 1.0 - v));
  }
  return total;
}

Vector finite_difference_gradient(const Target &target, const Vector &x,
                                  double step) {
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + step;
    const double up = target.log_density(probe);
    probe(i) = x(i) - step;
    const double down = target.log_density(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2.0 * step);
  }
  return g;
}

} // namespace maips
