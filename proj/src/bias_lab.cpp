#include "maips/bias_lab.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "maips/errors.hpp"

namespace maips {

namespace {

std::vector<std::vector<char>> reachability(const Matrix &p) {
  const Eigen::Index n = p.rows();
  std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
  for (Eigen::Index s = 0; s < n; ++s) {
    std::deque<Eigen::Index> queue{s};
    reach[s][s] = 1;
    while (!queue.empty()) {
      const Eigen::Index u = queue.front();
      queue.pop_front();
      for (Eigen::Index v = 0; v < n; ++v) {
        if (p(u, v) > 0.0 && !reach[s][v]) {
          reach[s][v] = 1;
          queue.push_back(v);
        }
      }
    }
  }
  return reach;
}

double log_normal(double y, double mean, double var) {
  const double r = y - mean;
  return -0.5 * (kLogTwoPi + std::log(var) + r * r / var);
}

} // namespace

int closed_class_count(const Matrix &p) {
  const auto reach = reachability(p);
  const Eigen::Index n = p.rows();
  std::vector<int> cls(n, -1);
  int count = 0;
  for (Eigen::Index s = 0; s < n; ++s) {
    bool closed = true;
    for (Eigen::Index v = 0; v < n && closed; ++v) {
      if (reach[s][v] && !reach[v][s]) closed = false;
    }
    if (!closed || cls[s] >= 0) continue;
    for (Eigen::Index v = 0; v < n; ++v) {
      if (reach[s][v]) cls[v] = count;
    }
    ++count;
  }
  return count;
}

double max_row_sum_error(const Matrix &p) {
  return (p.rowwise().sum().array() - 1.0).abs().maxCoeff();
}

Vector invariant_measure(const Matrix &p) {
  const Eigen::Index n = p.rows();
  if (n < 1 || p.cols() != n) throw DimensionMismatch("invariant_measure: square matrix expected");
  if ((p.array() < 0.0).any() || max_row_sum_error(p) > 1e-10) {
    throw ConfigError("invariant_measure: not a right-stochastic matrix");
  }
  if (closed_class_count(p) != 1) {
    throw Reducible("invariant_measure: more than one closed class");
  }
  Matrix a = p.transpose() - Matrix::Identity(n, n);
  a.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs(n - 1) = 1.0;
  const Eigen::FullPivLU<Matrix> lu(a);
  Vector nu = lu.solve(rhs);
  // One step of iterative refinement.
  nu += lu.solve(rhs - a * nu);
  return nu;
}

DiscreteMH discrete_mh(const std::vector<Matrix> &proposals, const Vector &pi) {
  const Eigen::Index s = pi.size();
  DiscreteMH out;
  for (const Matrix &q : proposals) {
    if (q.rows() != s || q.cols() != s) throw DimensionMismatch("discrete_mh: proposal shape");
    Matrix alpha = Matrix::Ones(s, s);
    Matrix kernel = Matrix::Zero(s, s);
    Vector rej = Vector::Zero(s);
    for (Eigen::Index x = 0; x < s; ++x) {
      for (Eigen::Index y = 0; y < s; ++y) {
        if (x == y || !(q(x, y) > 0.0) || !(pi(x) > 0.0)) continue;
        alpha(x, y) = std::min(1.0, pi(y) * q(y, x) / (pi(x) * q(x, y)));
        kernel(x, y) = q(x, y) * alpha(x, y);
        rej(x) += q(x, y) * (1.0 - alpha(x, y));
      }
      kernel(x, x) = q(x, x) + rej(x);
    }
    out.alpha.push_back(std::move(alpha));
    out.rejection.push_back(std::move(rej));
    out.kernels.push_back(std::move(kernel));
  }
  return out;
}

Matrix simultaneous_product(const std::vector<Matrix> &kernels) {
  const auto s = static_cast<Eigen::Index>(kernels.size());
  Matrix psim(s * s, s * s);
  for (Eigen::Index a = 0; a < s; ++a) {
    for (Eigen::Index b = 0; b < s; ++b) {
      for (Eigen::Index c = 0; c < s; ++c) {
        for (Eigen::Index d = 0; d < s; ++d) {
          psim(a * s + b, c * s + d) = kernels[b](a, c) * kernels[a](b, d);
        }
      }
    }
  }
  return psim;
}

DiscreteSim build_discrete_psim(const std::vector<Matrix> &proposals, const Vector &pi) {
  if (static_cast<Eigen::Index>(proposals.size()) != pi.size()) {
    throw DimensionMismatch("build_discrete_psim: one proposal per state expected");
  }
  DiscreteSim out;
  out.parts = discrete_mh(proposals, pi);
  out.psim = simultaneous_product(out.parts.kernels);
  return out;
}

std::vector<Matrix> two_state_proposals() {
  Matrix q1(2, 2), q2(2, 2);
  q1 << 2.0 / 3, 1.0 / 3, 2.0 / 3, 1.0 / 3;
  q2 << 0.5, 0.5, 0.5, 0.5;
  return {q1, q2};
}

Matrix printed_two_state_psim() {
  Matrix p(4, 4);
  p << 4.0 / 9, 2.0 / 9, 2.0 / 9, 1.0 / 9,
       1.0 / 6, 2.0 / 6, 1.0 / 6, 2.0 / 6,
       1.0 / 6, 2.0 / 6, 1.0 / 6, 2.0 / 6,
       0.25, 0.25, 0.25, 0.25;
  return p;
}

std::pair<Vector, Vector> pair_marginals(const Vector &nu, int s) {
  if (nu.size() != static_cast<Eigen::Index>(s) * s) {
    throw DimensionMismatch("pair_marginals: length must be s^2");
  }
  Vector m1 = Vector::Zero(s), m2 = Vector::Zero(s);
  for (int a = 0; a < s; ++a) {
    for (int b = 0; b < s; ++b) {
      m1(a) += nu(a * s + b);
      m2(b) += nu(a * s + b);
    }
  }
  return {m1, m2};
}

Vector one_step_from_product(const Matrix &p, const Vector &pi) {
  const Eigen::Index s = pi.size();
  if (p.rows() != s * s) throw DimensionMismatch("one_step_from_product: shape");
  Vector prod(s * s);
  for (Eigen::Index a = 0; a < s; ++a) {
    for (Eigen::Index b = 0; b < s; ++b) prod(a * s + b) = pi(a) * pi(b);
  }
  return (prod.transpose() * p).transpose();
}

std::string to_string(GridTarget t) {
  return t == GridTarget::Triangular ? "triangular" : "uniform";
}

std::string to_string(GridProposal p) {
  switch (p) {
  case GridProposal::MeanPair: return "mean-pair";
  case GridProposal::Spread: return "spread";
  case GridProposal::Independent: return "independent";
  case GridProposal::Cbs: return "cbs";
  }
  return "?";
}

GridModel::GridModel(const GridKernelSpec &spec) : spec_(spec), has_density_(true) {
  const int n = spec.nodes;
  if (n < 3 || n % 2 == 0) throw ConfigError("grid: node count must be odd and >= 3");
  if (!(spec.h > 0.0)) throw ConfigError("grid: h must be positive");
  if (!(spec.gamma >= 0.0 && spec.gamma <= 1.0)) throw ConfigError("grid: gamma in [0,1]");
  if (spec.proposal == GridProposal::Cbs && !(spec.gamma > 0.0)) {
    throw ConfigError("grid: the consensus proposal needs gamma > 0");
  }
  const double dx = 1.0 / (n - 1);
  nodes_.resize(n);
  weights_.resize(n);
  log_pi_.resize(n);
  for (int i = 0; i < n; ++i) {
    const double x = i * dx;
    nodes_(i) = x;
    weights_(i) = (i == 0 || i == n - 1) ? 0.5 * dx : dx;
    log_pi_(i) = spec.target == GridTarget::Triangular
                     ? std::log(0.5 + 2.0 * std::min(x, 1.0 - x))
                     : 0.0;
  }
  target_ = log_pi_.array().exp() * weights_.array();
  target_ /= target_.sum();

  lq_.resize(static_cast<std::size_t>(n) * n * n);
  for (int x = 0; x < n; ++x) {
    for (int z = 0; z < n; ++z) {
      for (int y = 0; y < n; ++y) {
        lq_[(static_cast<std::size_t>(x) * n + z) * n + y] = log_q(x, z, nodes_(y));
      }
    }
  }
  build_tables();
}

GridModel::GridModel(Vector nodes, Vector target, std::vector<Matrix> tables)
    : nodes_(std::move(nodes)), target_(std::move(target)), tables_(std::move(tables)) {
  const int n = size();
  if (target_.size() != n || static_cast<int>(tables_.size()) != n) {
    throw DimensionMismatch("grid: one table per node expected");
  }
  weights_ = Vector::Constant(n, 1.0 / n);
  log_pi_ = target_.array().log();
  by_origin_.assign(n, Matrix(n, n));
  for (int z = 0; z < n; ++z) {
    if (tables_[z].rows() != n || tables_[z].cols() != n) {
      throw DimensionMismatch("grid: table shape");
    }
    for (int i = 0; i < n; ++i) by_origin_[i].row(z) = tables_[z].row(i);
  }
}

double GridModel::log_q(int x, int z, double y) const {
  const double xv = nodes_(x), zv = nodes_(z);
  const double h = spec_.h, g = spec_.gamma;
  switch (spec_.proposal) {
  case GridProposal::MeanPair:
    return log_normal(y, 0.5 * (xv + zv), h);
  case GridProposal::Spread:
    return log_normal(y, xv, h * (g + (1.0 - g) * 0.5 * (zv - xv) * (zv - xv)));
  case GridProposal::Independent:
    return log_normal(y, xv, h);
  case GridProposal::Cbs: {
    const double top = std::max(log_pi_(x), log_pi_(z));
    const double wx = std::exp(log_pi_(x) - top), wz = std::exp(log_pi_(z) - top);
    const double m = (wx * xv + wz * zv) / (wx + wz);
    const double c = (wx * (xv - m) * (xv - m) + wz * (zv - m) * (zv - m)) / (wx + wz);
    return log_normal(y, (1.0 - h) * xv + h * m, 4.0 * h * (g + (1.0 - g) * c));
  }
  }
  return 0.0;
}

void GridModel::build_tables() {
  const int n = size();
  tables_.assign(n, Matrix::Zero(n, n));
  by_origin_.assign(n, Matrix::Zero(n, n));
  for (int z = 0; z < n; ++z) {
    Matrix &t = tables_[z];
    for (int i = 0; i < n; ++i) {
      double moved = 0.0;
      for (int k = 0; k < n; ++k) {
        if (k == i) continue;
        const double fwd = lq_[(static_cast<std::size_t>(i) * n + z) * n + k];
        const double rev = lq_[(static_cast<std::size_t>(k) * n + z) * n + i];
        // q(x,y) alpha(x,y) = min(q(x,y), pi(y) q(y,x) / pi(x))
        t(i, k) = weights_(k) * std::exp(std::min(fwd, log_pi_(k) + rev - log_pi_(i)));
        moved += t(i, k);
      }
      if (moved > 1.0 + 1e-12) {
        throw Error("grid: proposal mass on the grid exceeds one; refine the grid");
      }
      t(i, i) = 1.0 - moved;
    }
    for (int i = 0; i < n; ++i) by_origin_[i].row(z) = t.row(i);
  }
}

Matrix GridModel::product_target() const { return target_ * target_.transpose(); }

Matrix GridModel::apply_first(const Matrix &v) const {
  Matrix out(v.rows(), v.cols());
  for (int j = 0; j < size(); ++j) out.col(j) = tables_[j].transpose() * v.col(j);
  return out;
}

Matrix GridModel::apply_second(const Matrix &v) const {
  Matrix out(v.rows(), v.cols());
  for (int i = 0; i < size(); ++i) out.row(i) = v.row(i) * tables_[i];
  return out;
}

Matrix GridModel::apply_simultaneous(const Matrix &v) const {
  const int n = size();
  Matrix out = Matrix::Zero(n, n);
  Matrix a(n, n);
  for (int i = 0; i < n; ++i) {
    a.noalias() = v.row(i).transpose().asDiagonal() * by_origin_[i];
    out.noalias() += a.transpose() * tables_[i];
  }
  return out;
}

double GridModel::ensemble_entry(int i, int j, int k, int l) const {
  if (!has_density_) throw UnsupportedMode("grid: joint kernel needs a proposal density");
  const int n = size();
  auto off = [&](int kk, int ll) {
    const auto at = [n](int x, int z, int y) {
      return (static_cast<std::size_t>(x) * n + z) * n + y;
    };
    const double fwd = lq_[at(i, j, kk)] + lq_[at(j, i, ll)];
    const double rev = lq_[at(kk, ll, i)] + lq_[at(ll, kk, j)];
    const double dpi = log_pi_(kk) + log_pi_(ll) - log_pi_(i) - log_pi_(j);
    return weights_(kk) * weights_(ll) * std::exp(std::min(fwd, dpi + rev));
  };
  if (k != i || l != j) return off(k, l);
  double moved = 0.0;
  for (int kk = 0; kk < n; ++kk) {
    for (int ll = 0; ll < n; ++ll) {
      if (kk != i || ll != j) moved += off(kk, ll);
    }
  }
  return 1.0 - moved;
}

Matrix GridModel::apply_ensemble(const Matrix &v) const {
  if (!has_density_) throw UnsupportedMode("grid: joint kernel needs a proposal density");
  const int n = size();
  const auto nn = static_cast<std::size_t>(n);
  Matrix out = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double mass = v(i, j);
      if (mass == 0.0) continue;
      const double *fwd1 = &lq_[(i * nn + j) * nn];
      const double *fwd2 = &lq_[(j * nn + i) * nn];
      const double base = log_pi_(i) + log_pi_(j);
      double moved = 0.0;
      for (int k = 0; k < n; ++k) {
        const double pre = log_pi_(k) - base;
        for (int l = 0; l < n; ++l) {
          if (k == i && l == j) continue;
          const double fwd = fwd1[k] + fwd2[l];
          const double rev = lq_[(k * nn + l) * nn + i] + lq_[(l * nn + k) * nn + j];
          const double p = weights_(k) * weights_(l) *
                           std::exp(std::min(fwd, pre + log_pi_(l) + rev));
          out(k, l) += mass * p;
          moved += p;
        }
      }
      if (moved > 1.0 + 1e-12) {
        throw Error("grid: proposal mass on the grid exceeds one; refine the grid");
      }
      out(i, j) += mass * (1.0 - moved);
    }
  }
  return out;
}

Matrix GridModel::apply(const KernelMode &mode, const Matrix &v) const {
  auto scan = [&](bool first_then_second, ScanOrder order) -> Matrix {
    const Matrix a = first_then_second ? apply_second(apply_first(v)) : apply_first(apply_second(v));
    if (order == ScanOrder::Deterministic) return a;
    const Matrix b = first_then_second ? apply_first(apply_second(v)) : apply_second(apply_first(v));
    return 0.5 * (a + b);
  };
  switch (mode.kind) {
  case ModeKind::EnsembleWise:
    return apply_ensemble(v);
  case ModeKind::SequentialPW:
    return scan(true, mode.scan);
  case ModeKind::BlockWise:
    mode.partition.validate(2);
    if (mode.partition.blocks.size() == 1) return apply_ensemble(v);
    return scan(mode.partition.blocks[0][0] == 0, mode.scan);
  case ModeKind::SimultaneousPW:
    return apply_simultaneous(v);
  case ModeKind::Unadjusted:
    break;
  }
  throw UnsupportedMode("grid: unadjusted kernels have no accept step to discretize");
}

Matrix GridModel::dense(const KernelMode &mode) const {
  const int n = size();
  const int states = n * n;
  Matrix p(states, states);
  Matrix delta = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      delta(i, j) = 1.0;
      const Matrix row = apply(mode, delta);
      delta(i, j) = 0.0;
      for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) p(i * n + j, k * n + l) = row(k, l);
      }
    }
  }
  return p;
}

double invariance_residual(const GridModel &g, const KernelMode &mode, const Matrix &v) {
  return (g.apply(mode, v) - v).cwiseAbs().sum();
}

PowerResult grid_invariant_measure(const GridModel &g, const KernelMode &mode, double tol,
                                   int max_iter) {
  PowerResult res;
  res.nu = g.product_target();
  for (int it = 1; it <= max_iter; ++it) {
    Matrix next = g.apply(mode, res.nu);
    next /= next.sum();
    res.residual = (next - res.nu).cwiseAbs().sum();
    res.nu = std::move(next);
    res.iterations = it;
    if (res.residual < tol) return res;
  }
  throw Error("grid: power iteration did not reach the residual tolerance");
}

BiasSummary bias_summary(const Matrix &nu, const Vector &target) {
  const Matrix pi = target * target.transpose();
  BiasSummary s;
  s.max_rel_joint = ((nu - pi).array().abs() / pi.array()).maxCoeff();
  s.l1_joint = (nu - pi).cwiseAbs().sum();
  const Vector m1 = nu.rowwise().sum();
  const Vector m2 = nu.colwise().sum().transpose();
  const Vector r1 = (m1 - target).array().abs() / target.array();
  const Vector r2 = (m2 - target).array().abs() / target.array();
  s.max_rel_marginal = std::max(r1.maxCoeff(), r2.maxCoeff());
  s.mean_rel_marginal = 0.5 * (r1.mean() + r2.mean());
  return s;
}

} // namespace maips
