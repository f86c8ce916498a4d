#pragma once

#include <functional>
#include <memory>
#include <string>

#include "maips/linalg.hpp"

namespace maips {

// Unnormalized log-density of a target distribution on R^d. Implementations
// are immutable after construction and safe to evaluate concurrently.
class Target {
public:
  virtual ~Target() = default;

  virtual int dim() const = 0;
  virtual std::string name() const = 0;
  // -inf outside the support.
  virtual double log_density(const Vector &x) const = 0;
  // Gradient of log_density. Throws NoGradient for non-differentiable kinds.
  virtual Vector gradient(const Vector &x) const;
  virtual bool differentiable() const { return true; }
};

using TargetPtr = std::shared_ptr<const Target>;

struct TargetEval {
  double log_density = 0.0;
  Vector gradient;
};

/// Log-density and gradient in one call. Throws NoGradient for Uniform01 and
/// Triangular.
TargetEval evaluate_target(const Target &target, const Vector &x);

// Posterior of the scalar problem y = x^2 + noise with N(m0, 1) prior:
//   log pi(x) = -(x^2 - 1)^2 / (2 sigma^2) - (x - m0)^2 / 2.
class BimodalTarget final : public Target {
public:
  BimodalTarget(double sigma, double m0);
  int dim() const override { return 1; }
  std::string name() const override { return "bimodal"; }
  double log_density(const Vector &x) const override;
  Vector gradient(const Vector &x) const override;

  double sigma() const { return sigma_; }
  double m0() const { return m0_; }

private:
  double sigma_;
  double m0_;
};

// Centered Gaussian with diagonal covariance; the normalizing constant is
// dropped so log_density(0) == 0.
class DiagGaussianTarget final : public Target {
public:
  explicit DiagGaussianTarget(Vector variances);
  int dim() const override { return static_cast<int>(variances_.size()); }
  std::string name() const override { return "diag_gaussian"; }
  double log_density(const Vector &x) const override;
  Vector gradient(const Vector &x) const override;

  const Vector &variances() const { return variances_; }

private:
  Vector variances_;
  Vector precisions_;
};

// Product of U[0,1] marginals.
class Uniform01Target final : public Target {
public:
  explicit Uniform01Target(int dim = 1) : dim_(dim) {}
  int dim() const override { return dim_; }
  std::string name() const override { return "uniform01"; }
  double log_density(const Vector &x) const override;
  bool differentiable() const override { return false; }

private:
  int dim_;
};

// Product of triangular marginals 1/2 + 2 min(x, 1 - x) on [0,1]; each
// marginal is already normalized.
class TriangularTarget final : public Target {
public:
  explicit TriangularTarget(int dim = 1) : dim_(dim) {}
  int dim() const override { return dim_; }
  std::string name() const override { return "triangular"; }
  double log_density(const Vector &x) const override;
  bool differentiable() const override { return false; }

private:
  int dim_;
};

// Least-squares forward model G: R^d -> R^{d_z} with Gaussian noise, used by
// the derivative-free ensemble Kalman drift.
struct ForwardModel {
  int input_dim = 0;
  int output_dim = 0;
  std::function<Vector(const Vector &)> map;
  Matrix noise_cov;
  Vector data;
};

using ForwardModelPtr = std::shared_ptr<const ForwardModel>;

/// Central finite-difference gradient, used by tests and the acceptance
/// suite as an independent check of Target::gradient.
Vector finite_difference_gradient(const Target &target, const Vector &x,
                                  double step = 1e-6);

} // namespace maips
