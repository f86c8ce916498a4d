#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>

#include "maips/linalg.hpp"
#include "maips/targets.hpp"

namespace maips {

// Inputs for the linear inverse problem built on
//   -p'' + p = theta on (0,1),  p(0) = p(1) = 0,
// with theta = sum_i x_i phi_i, phi_i(s) = sqrt(2)/pi sin(i pi s).
struct OdeProblemConfig {
  int mesh_power = 6;  // mesh size 2^-mesh_power
  int observations = 64;
  int basis_terms = 10;
  double tau = 2.0;    // prior variances i^(-2 tau)
  double noise_std = 0.01;
  std::uint64_t seed = 2024;
};

// Discretized linear-Gaussian inverse problem together with its exact
// posterior.
struct LinearGaussianIP {
  OdeProblemConfig config;
  Matrix forward;          // K x d, maps coefficients to observations
  Vector prior_variances;  // d
  Matrix noise_cov;        // K x K
  Vector data;             // K
  Vector truth;            // d, drawn from the prior
  Vector posterior_mean;   // d
  Matrix posterior_cov;    // d x d
  Vector grid;             // interior nodes j * delta
  Matrix basis_on_grid;    // (#grid) x d, phi_i at the nodes

  int observations() const { return static_cast<int>(forward.rows()); }
  int dim() const { return static_cast<int>(forward.cols()); }
};

using LinearGaussianIPPtr = std::shared_ptr<const LinearGaussianIP>;

/// Second-difference-plus-identity solve on the interior grid, column by
/// column over the basis, then observation by interpolation at s_k = k/K.
LinearGaussianIP assemble_ode_posterior(const OdeProblemConfig &config);

/// Same problem with the data vector replaced; recomputes the posterior.
LinearGaussianIP with_data(LinearGaussianIP problem, Vector data);

/// Gaussian conditioning: fills posterior_mean / posterior_cov from forward,
/// prior_variances, noise_cov and data.
void compute_posterior(LinearGaussianIP &problem);

void save_problem(const LinearGaussianIP &problem, std::ostream &out);
LinearGaussianIP load_problem(std::istream &in);
void save_problem(const LinearGaussianIP &problem, const std::string &path);
LinearGaussianIP load_problem(const std::string &path);

// Unnormalized posterior
//   -1/2 |Gamma^{-1/2}(y - A x)|^2 - 1/2 |Gamma_0^{-1/2} x|^2.
class GaussianPosteriorTarget final : public Target {
public:
  explicit GaussianPosteriorTarget(LinearGaussianIPPtr problem);
  int dim() const override { return problem_->dim(); }
  std::string name() const override { return "linear_ip_posterior"; }
  double log_density(const Vector &x) const override;
  Vector gradient(const Vector &x) const override;

  const LinearGaussianIP &problem() const { return *problem_; }

private:
  LinearGaussianIPPtr problem_;
  // Expanded quadratic form: -1/2 x^T H x + b^T x + c.
  Matrix hessian_;
  Vector linear_;
  double constant_ = 0.0;
};

/// Forward model for the derivative-free drift. The prior is folded in as
/// extra observations: G(x) = (A x, x), data (y, 0), noise diag(Gamma, Gamma_0).
ForwardModelPtr make_forward_model(const LinearGaussianIPPtr &problem);

} // namespace maips
