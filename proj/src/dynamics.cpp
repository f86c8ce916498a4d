#include "maips/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "maips/errors.hpp"

namespace maips {

namespace {

void check_block(const Ensemble &eval, const std::vector<int> &block) {
  if (block.empty()) throw DimensionMismatch("block must be non-empty");
  std::vector<char> seen(static_cast<std::size_t>(eval.rows()), 0);
  for (int i : block) {
    if (i < 0 || i >= eval.rows()) {
      throw DimensionMismatch("block index " + std::to_string(i) + " out of range");
    }
    if (seen[i]++) throw DimensionMismatch("block index repeated");
  }
}

double normalizer(Eigen::Index m, bool unbiased) {
  if (unbiased && m > 1) return 1.0 / static_cast<double>(m - 1);
  return 1.0 / static_cast<double>(m);
}

// gamma * I + (1 - gamma) * c
Matrix inflate(const Matrix &c, double gamma) {
  Matrix p = (1.0 - gamma) * c;
  p.diagonal().array() += gamma;
  return p;
}

constexpr double kMinKernelEigen = 1e-12;

std::shared_ptr<const SpdFactor> identity_factor(int d) {
  auto f = std::make_shared<SpdFactor>();
  f->lower = Matrix::Identity(d, d);
  return f;
}

} // namespace

DynamicsSpec DynamicsSpec::pmala(double h) {
  DynamicsSpec s;
  s.kind = DynamicsKind::PMala;
  s.step = h;
  return s;
}

DynamicsSpec DynamicsSpec::aldi(double h, double gamma) {
  DynamicsSpec s;
  s.kind = DynamicsKind::Aldi;
  s.step = h;
  s.gamma = gamma;
  return s;
}

DynamicsSpec DynamicsSpec::eksdf(double h, double gamma, ForwardModelPtr forward) {
  DynamicsSpec s;
  s.kind = DynamicsKind::Eksdf;
  s.step = h;
  s.gamma = gamma;
  s.forward = std::move(forward);
  return s;
}

DynamicsSpec DynamicsSpec::cbs(double h, double gamma) {
  DynamicsSpec s;
  s.kind = DynamicsKind::Cbs;
  s.step = h;
  s.gamma = gamma;
  return s;
}

DynamicsSpec DynamicsSpec::svgd(double h, double bandwidth) {
  DynamicsSpec s;
  s.kind = DynamicsKind::Svgd;
  s.step = h;
  s.bandwidth = bandwidth;
  return s;
}

void DynamicsSpec::validate() const {
  if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("step size h must be > 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (kind == DynamicsKind::Svgd && !(bandwidth > 0.0)) {
    throw ConfigError("SVGD bandwidth must be > 0");
  }
  if (kind == DynamicsKind::Eksdf) {
    if (!forward || !forward->map) throw ConfigError("EKSDF needs a forward model");
    if (forward->noise_cov.rows() != forward->output_dim ||
        forward->data.size() != forward->output_dim) {
      throw ConfigError("EKSDF forward model: inconsistent output dimension");
    }
  }
}

std::string to_string(DynamicsKind kind) {
  switch (kind) {
  case DynamicsKind::PMala: return "pmala";
  case DynamicsKind::Aldi: return "aldi";
  case DynamicsKind::Eksdf: return "eksdf";
  case DynamicsKind::Cbs: return "cbs";
  case DynamicsKind::Svgd: return "svgd";
  }
  return "unknown";
}

DynamicsKind parse_dynamics_kind(const std::string &name) {
  for (auto k : {DynamicsKind::PMala, DynamicsKind::Aldi, DynamicsKind::Eksdf,
                 DynamicsKind::Cbs, DynamicsKind::Svgd}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown dynamics '" + name + "'");
}

std::string DynamicsSpec::label() const { return to_string(kind); }

Moments empirical_moments(const Ensemble &e, bool unbiased) {
  if (e.rows() < 1) throw DimensionMismatch("empirical_moments: empty ensemble");
  Moments out;
  out.mean = e.colwise().mean().transpose();
  const Matrix centered = e.rowwise() - out.mean.transpose();
  out.cov = normalizer(e.rows(), unbiased) * (centered.transpose() * centered);
  return out;
}

Moments weighted_moments(const Ensemble &e, std::span<const double> log_weights) {
  if (static_cast<Eigen::Index>(log_weights.size()) != e.rows()) {
    throw DimensionMismatch("weighted_moments: one weight per particle expected");
  }
  const std::vector<double> w = normalized_log_weights(log_weights);
  const Eigen::Map<const Vector> wv(w.data(), static_cast<Eigen::Index>(w.size()));
  Moments out;
  out.mean = e.transpose() * wv;
  const Matrix centered = e.rowwise() - out.mean.transpose();
  out.cov = centered.transpose() * wv.asDiagonal() * centered;
  return out;
}

double BlockProposal::joint_log_det() const {
  double total = 0.0;
  for (const auto &f : factors) total += f->log_det + f->dim() * std::log(scale);
  return total;
}

double FullCoupledProposal::joint_log_det() const {
  const double m = static_cast<double>(mean.rows());
  const double d = static_cast<double>(mean.cols());
  return d * (m * std::log(scale) + kernel_root.log_det());
}

KernelValue rbf_kernel(double s, const Vector &x, const Vector &y) {
  const Vector diff = x - y;
  KernelValue k;
  k.value = std::exp(-diff.squaredNorm() / (2.0 * s * s));
  k.gradient = (-k.value / (s * s)) * diff;
  return k;
}

BlockProposal block_proposal(const DynamicsSpec &spec, const Target &target,
                             const Ensemble &eval, const std::vector<int> &block) {
  check_block(eval, block);
  if (eval.cols() != target.dim()) {
    throw DimensionMismatch("block_proposal: ensemble dimension != target dimension");
  }
  const int d = static_cast<int>(eval.cols());
  const double h = spec.step;
  const double gamma = spec.gamma;
  const auto nb = static_cast<Eigen::Index>(block.size());

  BlockProposal p;
  p.block = block;
  p.means.resize(nb, d);
  std::shared_ptr<const SpdFactor> factor;

  switch (spec.kind) {
  case DynamicsKind::PMala: {
    factor = identity_factor(d);
    p.scale = 2.0 * h;
    for (Eigen::Index k = 0; k < nb; ++k) {
      const Vector z = eval.row(block[k]).transpose();
      p.means.row(k) = (z + h * target.gradient(z)).transpose();
    }
    break;
  }
  case DynamicsKind::Aldi: {
    const Moments mc = empirical_moments(eval, spec.unbiased_cov);
    const Matrix precond = inflate(mc.cov, gamma);
    factor = std::make_shared<SpdFactor>(spd_factor(precond));
    p.scale = 2.0 * h;
    const double corr = (1.0 - gamma) * (d + 1.0) / static_cast<double>(eval.rows());
    for (Eigen::Index k = 0; k < nb; ++k) {
      const Vector z = eval.row(block[k]).transpose();
      const Vector drift = precond * target.gradient(z) + corr * (z - mc.mean);
      p.means.row(k) = (z + h * drift).transpose();
    }
    break;
  }
  case DynamicsKind::Cbs: {
    std::vector<double> logw(static_cast<std::size_t>(eval.rows()));
    for (Eigen::Index i = 0; i < eval.rows(); ++i) {
      logw[i] = target.log_density(eval.row(i).transpose());
    }
    const Moments wm = weighted_moments(eval, logw);
    factor = std::make_shared<SpdFactor>(spd_factor(inflate(wm.cov, gamma)));
    p.scale = 4.0 * h;
    for (Eigen::Index k = 0; k < nb; ++k) {
      p.means.row(k) = (1.0 - h) * eval.row(block[k]) + h * wm.mean.transpose();
    }
    break;
  }
  case DynamicsKind::Eksdf: {
    const ForwardModel &fm = *spec.forward;
    if (fm.input_dim != d) throw DimensionMismatch("EKSDF: forward input dimension");
    const Eigen::Index m = eval.rows();
    Matrix g(m, fm.output_dim);
    for (Eigen::Index i = 0; i < m; ++i) {
      const Vector gi = fm.map(eval.row(i).transpose());
      if (gi.size() != fm.output_dim) {
        throw DimensionMismatch("EKSDF: forward map output dimension");
      }
      g.row(i) = gi.transpose();
    }
    const double norm = normalizer(m, spec.unbiased_cov);
    const Vector xm = eval.colwise().mean().transpose();
    const Vector gm = g.colwise().mean().transpose();
    const Matrix xc = eval.rowwise() - xm.transpose();
    const Matrix gc = g.rowwise() - gm.transpose();
    Matrix cxg = norm * (xc.transpose() * gc);  // d x d_z
    // Inflation of the drift matrix only makes sense when it is square.
    if (fm.output_dim == d) cxg = inflate(cxg, gamma);
    Eigen::LLT<Matrix> noise(fm.noise_cov);
    if (noise.info() != Eigen::Success) {
      throw NotPositiveDefinite("EKSDF: noise covariance not SPD");
    }
    factor = std::make_shared<SpdFactor>(spd_factor(inflate(norm * (xc.transpose() * xc), gamma)));
    p.scale = 2.0 * h;
    for (Eigen::Index k = 0; k < nb; ++k) {
      const Vector resid = g.row(block[k]).transpose() - fm.data;
      p.means.row(k) = eval.row(block[k]) - h * (cxg * noise.solve(resid)).transpose();
    }
    break;
  }
  case DynamicsKind::Svgd:
    throw UnsupportedMode("SVGD couples all particles; use svgd_proposal");
  }
  p.factors.assign(block.size(), factor);
  return p;
}

BlockProposal block_proposal(const DynamicsSpec &spec, const Target &target,
                             const Ensemble &working, const std::vector<int> &block,
                             const Matrix &block_values) {
  if (block_values.rows() != static_cast<Eigen::Index>(block.size()) ||
      block_values.cols() != working.cols()) {
    throw DimensionMismatch("block_proposal: block values have wrong shape");
  }
  check_block(working, block);
  Ensemble eval = working;
  for (std::size_t k = 0; k < block.size(); ++k) eval.row(block[k]) = block_values.row(k);
  return block_proposal(spec, target, eval, block);
}

FullCoupledProposal svgd_proposal(const DynamicsSpec &spec, const Target &target,
                                  const Ensemble &e) {
  if (spec.kind != DynamicsKind::Svgd) throw UnsupportedMode("svgd_proposal: not SVGD");
  const Eigen::Index m = e.rows();
  const Eigen::Index d = e.cols();
  if (m < 1 || d != target.dim()) throw DimensionMismatch("svgd_proposal: bad ensemble");
  const double h = spec.step;
  const double s = spec.bandwidth;

  Matrix grads(m, d);
  for (Eigen::Index i = 0; i < m; ++i) grads.row(i) = target.gradient(e.row(i).transpose()).transpose();

  Matrix kmat(m, m);
  Matrix drift = Matrix::Zero(m, d);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Vector xj = e.row(j).transpose();
    for (Eigen::Index i = 0; i < m; ++i) {
      const Vector xi = e.row(i).transpose();
      // Gradient in the second slot of k(x_j, x_i) is the first-slot gradient
      // of k(x_i, x_j).
      const KernelValue kv = rbf_kernel(s, xi, xj);
      kmat(j, i) = kv.value;
      drift.row(j) += kv.value * grads.row(i) + kv.gradient.transpose();
    }
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  FullCoupledProposal p;
  p.mean = e + (h * inv_m) * drift;
  p.kernel_root = sym_sqrt(kmat);
  // Nearly coincident particles make K numerically singular; shift it by
  // the smallest jitter level that restores a usable condition number.
  const double lead = p.kernel_root.eigenvalues.maxCoeff();
  if (!(p.kernel_root.eigenvalues.minCoeff() > kMinKernelEigen * lead)) {
    const double base = kmat.trace() / static_cast<double>(m);
    for (double level : kJitterSchedule) {
      if (level == 0.0) continue;
      if (p.kernel_root.eigenvalues.minCoeff() + level * base > kMinKernelEigen * lead) {
        kmat.diagonal().array() += level * base;
        p.kernel_root = sym_sqrt(kmat);
        p.jitter = level * base;
        break;
      }
    }
  }
  p.scale = 2.0 * h * inv_m;
  return p;
}

double proposal_logpdf(const BlockProposal &p, const Matrix &y) {
  if (y.rows() != p.means.rows() || y.cols() != p.means.cols()) {
    throw DimensionMismatch("proposal_logpdf: proposed block has wrong shape");
  }
  double total = 0.0;
  for (Eigen::Index k = 0; k < y.rows(); ++k) {
    total += gaussian_logpdf(y.row(k).transpose(), p.means.row(k).transpose(),
                             *p.factors[k], p.scale);
  }
  return total;
}

double proposal_logpdf(const FullCoupledProposal &p, const Matrix &y) {
  if (y.rows() != p.mean.rows() || y.cols() != p.mean.cols()) {
    throw DimensionMismatch("proposal_logpdf: proposed ensemble has wrong shape");
  }
  const Matrix diff = y - p.mean;
  const double quad = (diff.transpose() * p.kernel_root.solve(diff)).trace();
  const double n = static_cast<double>(diff.size());
  return -0.5 * n * kLogTwoPi - 0.5 * p.joint_log_det() - 0.5 * quad / p.scale;
}

Matrix sample_proposal(const BlockProposal &p, StreamKey key) {
  Matrix y(p.means.rows(), p.means.cols());
  for (Eigen::Index k = 0; k < y.rows(); ++k) {
    key.particle = static_cast<std::uint64_t>(p.block[k]);
    RngStream stream(key);
    y.row(k) = gaussian_sample(p.means.row(k).transpose(), *p.factors[k], p.scale, stream)
                   .transpose();
  }
  return y;
}

Matrix sample_proposal(const FullCoupledProposal &p, StreamKey key) {
  Matrix z(p.mean.rows(), p.mean.cols());
  for (Eigen::Index j = 0; j < z.rows(); ++j) {
    key.particle = static_cast<std::uint64_t>(j);
    RngStream stream(key);
    for (Eigen::Index a = 0; a < z.cols(); ++a) z(j, a) = stream.normal();
  }
  return p.mean + std::sqrt(p.scale) * (p.kernel_root.root * z);
}

Matrix dense_covariance(const FullCoupledProposal &p) {
  const Eigen::Index m = p.mean.rows();
  const Eigen::Index d = p.mean.cols();
  const Matrix k = p.kernel_root.root * p.kernel_root.root;
  Matrix cov = Matrix::Zero(m * d, m * d);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index a = 0; a < d; ++a) cov(i * d + a, j * d + a) = p.scale * k(i, j);
    }
  }
  return cov;
}

} // namespace maips
