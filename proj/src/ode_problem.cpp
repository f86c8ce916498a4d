#include "maips/ode_problem.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <vector>

#include "maips/errors.hpp"
#include "maips/format.hpp"
#include "maips/rng.hpp"

namespace maips {

namespace {

// Thomas algorithm for the constant-coefficient tridiagonal system
// (off, diag, off) p = rhs.
Vector solve_tridiagonal(double diag, double off, const Vector &rhs) {
  const Eigen::Index n = rhs.size();
  Vector c(n), d(n), p(n);
  c(0) = off / diag;
  d(0) = rhs(0) / diag;
  for (Eigen::Index i = 1; i < n; ++i) {
    const double denom = diag - off * c(i - 1);
    c(i) = off / denom;
    d(i) = (rhs(i) - off * d(i - 1)) / denom;
  }
  p(n - 1) = d(n - 1);
  for (Eigen::Index i = n - 2; i >= 0; --i) p(i) = d(i) - c(i) * p(i + 1);
  return p;
}

void check_config(const OdeProblemConfig &c) {
  if (c.mesh_power < 3) throw ConfigError("ode: mesh size must be 2^-p, p >= 3");
  if (c.observations < 1 || c.basis_terms < 1) {
    throw ConfigError("ode: observation count and basis size must be >= 1");
  }
  if (!(c.tau > 1.0)) throw ConfigError("ode: tau must exceed 1");
  if (!(c.noise_std > 0.0)) throw ConfigError("ode: noise_std must be positive");
}

void write_matrix(std::ostream &out, const std::string &name, const Matrix &m) {
  out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

Matrix read_matrix(std::istream &in, const std::string &name) {
  std::string tag;
  Eigen::Index rows = 0, cols = 0;
  if (!(in >> tag >> rows >> cols) || tag != name) {
    throw ConfigError("problem file: expected section '" + name + "'");
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!(in >> m(i, j))) {
        throw ConfigError("problem file: truncated section '" + name + "'");
      }
    }
  }
  return m;
}

} // namespace

void compute_posterior(LinearGaussianIP &p) {
  const Matrix &a = p.forward;
  const Matrix a_prior = a * p.prior_variances.asDiagonal();  // A Gamma_0
  Matrix s = a_prior * a.transpose() + p.noise_cov;
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("ode: data covariance is not positive definite");
  }
  p.posterior_mean = a_prior.transpose() * llt.solve(p.data);
  Matrix gain = a_prior.transpose() * llt.solve(a_prior);
  Matrix cov = Matrix(p.prior_variances.asDiagonal()) - gain;
  p.posterior_cov = 0.5 * (cov + cov.transpose());
}

LinearGaussianIP assemble_ode_posterior(const OdeProblemConfig &config) {
  check_config(config);
  LinearGaussianIP p;
  p.config = config;
  const int cells = 1 << config.mesh_power;
  const double delta = 1.0 / cells;
  const int interior = cells - 1;
  const int d = config.basis_terms;
  const int k_obs = config.observations;

  p.grid.resize(interior);
  for (int j = 0; j < interior; ++j) p.grid(j) = (j + 1) * delta;

  p.basis_on_grid.resize(interior, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < interior; ++j) {
      p.basis_on_grid(j, i) = std::numbers::sqrt2 / std::numbers::pi *
                              std::sin((i + 1) * std::numbers::pi * p.grid(j));
    }
  }

  const double diag = 2.0 / (delta * delta) + 1.0;
  const double off = -1.0 / (delta * delta);
  p.forward.resize(k_obs, d);
  for (int i = 0; i < d; ++i) {
    Vector sol = solve_tridiagonal(diag, off, p.basis_on_grid.col(i));
    // Nodal values including the Dirichlet boundary.
    Vector nodal = Vector::Zero(cells + 1);
    nodal.segment(1, interior) = sol;
    for (int k = 0; k < k_obs; ++k) {
      const double pos = (static_cast<double>(k + 1) / k_obs) / delta;
      int j0 = static_cast<int>(std::floor(pos));
      if (j0 >= cells) j0 = cells - 1;
      const double t = pos - j0;
      p.forward(k, i) = (1.0 - t) * nodal(j0) + t * nodal(j0 + 1);
    }
  }

  p.prior_variances.resize(d);
  for (int i = 0; i < d; ++i) {
    p.prior_variances(i) = std::pow(static_cast<double>(i + 1), -2.0 * config.tau);
  }
  p.noise_cov = Matrix::Identity(k_obs, k_obs) * (config.noise_std * config.noise_std);

  RngStream truth_stream({config.seed, 0, 0, 0, 0, DrawPurpose::Problem});
  p.truth.resize(d);
  for (int i = 0; i < d; ++i) {
    p.truth(i) = std::sqrt(p.prior_variances(i)) * truth_stream.normal();
  }
  RngStream noise_stream({config.seed, 0, 0, 0, 1, DrawPurpose::Problem});
  p.data = p.forward * p.truth;
  for (int k = 0; k < k_obs; ++k) p.data(k) += config.noise_std * noise_stream.normal();

  compute_posterior(p);
  return p;
}

LinearGaussianIP with_data(LinearGaussianIP problem, Vector data) {
  if (data.size() != problem.observations()) {
    throw DimensionMismatch("with_data: data has wrong length");
  }
  problem.data = std::move(data);
  compute_posterior(problem);
  return problem;
}

void save_problem(const LinearGaussianIP &p, std::ostream &out) {
  const auto &c = p.config;
  out << "maips-linear-ip 1\n";
  out << "config " << c.mesh_power << ' ' << c.observations << ' '
      << c.basis_terms << ' ' << format_double(c.tau) << ' '
      << format_double(c.noise_std) << ' ' << c.seed << '\n';
  write_matrix(out, "forward", p.forward);
  write_matrix(out, "prior_variances", p.prior_variances);
  write_matrix(out, "noise_cov", p.noise_cov);
  write_matrix(out, "data", p.data);
  write_matrix(out, "truth", p.truth);
  write_matrix(out, "posterior_mean", p.posterior_mean);
  write_matrix(out, "posterior_cov", p.posterior_cov);
  write_matrix(out, "grid", p.grid);
  write_matrix(out, "basis_on_grid", p.basis_on_grid);
}

LinearGaussianIP load_problem(std::istream &in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "maips-linear-ip" || version != 1) {
    throw ConfigError("problem file: bad header");
  }
  LinearGaussianIP p;
  std::string tag;
  auto &c = p.config;
  if (!(in >> tag >> c.mesh_power >> c.observations >> c.basis_terms >> c.tau >>
        c.noise_std >> c.seed) ||
      tag != "config") {
    throw ConfigError("problem file: bad config line");
  }
  p.forward = read_matrix(in, "forward");
  p.prior_variances = read_matrix(in, "prior_variances");
  p.noise_cov = read_matrix(in, "noise_cov");
  p.data = read_matrix(in, "data");
  p.truth = read_matrix(in, "truth");
  p.posterior_mean = read_matrix(in, "posterior_mean");
  p.posterior_cov = read_matrix(in, "posterior_cov");
  p.grid = read_matrix(in, "grid");
  p.basis_on_grid = read_matrix(in, "basis_on_grid");
  return p;
}

void save_problem(const LinearGaussianIP &problem, const std::string &path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  save_problem(problem, out);
}

LinearGaussianIP load_problem(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  return load_problem(in);
}

GaussianPosteriorTarget::GaussianPosteriorTarget(LinearGaussianIPPtr problem)
    : problem_(std::move(problem)) {
  Eigen::LLT<Matrix> llt(problem_->noise_cov);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite("linear_ip: noise covariance not SPD");
  }
  const Matrix &a = problem_->forward;
  const Matrix whitened_a = llt.solve(a);
  const Vector whitened_y = llt.solve(problem_->data);
  hessian_ = a.transpose() * whitened_a;
  hessian_.diagonal() += problem_->prior_variances.cwiseInverse();
  hessian_ = 0.5 * (hessian_ + hessian_.transpose()).eval();
  linear_ = a.transpose() * whitened_y;
  constant_ = -0.5 * problem_->data.dot(whitened_y);
}

double GaussianPosteriorTarget::log_density(const Vector &x) const {
  if (x.size() != dim()) throw DimensionMismatch("linear_ip: dimension mismatch");
  return -0.5 * x.dot(hessian_ * x) + linear_.dot(x) + constant_;
}

Vector GaussianPosteriorTarget::gradient(const Vector &x) const {
  if (x.size() != dim()) throw DimensionMismatch("linear_ip: dimension mismatch");
  return linear_ - hessian_ * x;
}

ForwardModelPtr make_forward_model(const LinearGaussianIPPtr &problem) {
  auto model = std::make_shared<ForwardModel>();
  const int k = problem->observations();
  const int d = problem->dim();
  model->input_dim = d;
  model->output_dim = k + d;
  model->map = [problem, k, d](const Vector &x) {
    Vector out(k + d);
    out.head(k) = problem->forward * x;
    out.tail(d) = x;
    return out;
  };
  model->noise_cov = Matrix::Zero(k + d, k + d);
  model->noise_cov.topLeftCorner(k, k) = problem->noise_cov;
  model->noise_cov.bottomRightCorner(d, d) = problem->prior_variances.asDiagonal();
  model->data = Vector::Zero(k + d);
  model->data.head(k) = problem->data;
  return model;
}

} // namespace maips
