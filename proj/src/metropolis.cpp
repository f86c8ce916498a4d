#include "maips/metropolis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "maips/errors.hpp"

namespace maips {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double block_log_target(const Target &target, const Matrix &rows) {
  double total = 0.0;
  for (Eigen::Index k = 0; k < rows.rows(); ++k) {
    const double v = target.log_density(rows.row(k).transpose());
    if (std::isnan(v)) return kNegInf;
    total += v;
  }
  return total;
}

Matrix gather(const Ensemble &e, const std::vector<int> &block) {
  Matrix out(static_cast<Eigen::Index>(block.size()), e.cols());
  for (std::size_t k = 0; k < block.size(); ++k) out.row(k) = e.row(block[k]);
  return out;
}

void scatter(Ensemble &e, const std::vector<int> &block, const Matrix &rows) {
  for (std::size_t k = 0; k < block.size(); ++k) e.row(block[k]) = rows.row(k);
}

StreamKey key_for(const StepContext &ctx, std::uint64_t block, DrawPurpose purpose) {
  return {ctx.seed, ctx.replica, ctx.iteration, block, 0, purpose};
}

bool draw_accept(double log_alpha, const StepContext &ctx, std::uint64_t block) {
  if (log_alpha >= 0.0) return true;
  RngStream u(key_for(ctx, block, DrawPurpose::Accept));
  return std::log(u.uniform()) < log_alpha;
}

// MH update of the rows in `block` against `base`. Forward and reverse
// proposals share the complement taken from `base`. Returns the accept flag
// and writes the new block rows into `out`.
bool mh_block(const DynamicsSpec &spec, const Target &target, const Ensemble &base,
              const std::vector<int> &block, std::uint64_t block_id,
              const StepContext &ctx, Ensemble &out) {
  const Matrix z = gather(base, block);
  const BlockProposal fwd = block_proposal(spec, target, base, block);
  const Matrix y = sample_proposal(fwd, key_for(ctx, 0, DrawPurpose::Proposal));
  if (!y.allFinite()) return false;
  const double prop = block_log_target(target, y);
  double log_alpha = kNegInf;
  if (prop > kNegInf) {
    Ensemble moved = base;
    scatter(moved, block, y);
    const BlockProposal rev = block_proposal(spec, target, moved, block);
    log_alpha = log_accept(block_log_target(target, z), prop, proposal_logpdf(fwd, y),
                           proposal_logpdf(rev, z));
  }
  const bool ok = draw_accept(log_alpha, ctx, block_id);
  if (ok) scatter(out, block, y);
  return ok;
}

std::vector<std::size_t> scan_order(std::size_t n, ScanOrder scan, const StepContext &ctx) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (scan == ScanOrder::RandomPermutation && n > 1) {
    // Fisher-Yates on the raw stream; std::shuffle is not portable across
    // standard libraries.
    RngStream s(key_for(ctx, 0, DrawPurpose::ScanOrder));
    for (std::size_t i = n - 1; i > 0; --i) {
      std::swap(order[i], order[s() % (i + 1)]);
    }
  }
  return order;
}

} // namespace

BlockPartition BlockPartition::single(int m) {
  BlockPartition p;
  p.blocks.emplace_back(m);
  std::iota(p.blocks[0].begin(), p.blocks[0].end(), 0);
  return p;
}

BlockPartition BlockPartition::singletons(int m) {
  BlockPartition p;
  for (int i = 0; i < m; ++i) p.blocks.push_back({i});
  return p;
}

BlockPartition BlockPartition::uniform(int m, int b) {
  if (b < 1 || m < 1 || m % b != 0) {
    throw ConfigError("block size " + std::to_string(b) + " does not divide M = " +
                      std::to_string(m));
  }
  BlockPartition p;
  for (int start = 0; start < m; start += b) {
    std::vector<int> blk(b);
    std::iota(blk.begin(), blk.end(), start);
    p.blocks.push_back(std::move(blk));
  }
  return p;
}

void BlockPartition::validate(int m) const {
  std::vector<char> seen(static_cast<std::size_t>(m), 0);
  int count = 0;
  for (const auto &blk : blocks) {
    if (blk.empty()) throw ConfigError("partition has an empty block");
    for (int i : blk) {
      if (i < 0 || i >= m || seen[i]) throw ConfigError("partition is not a disjoint cover");
      seen[i] = 1;
      ++count;
    }
  }
  if (count != m) throw ConfigError("partition does not cover all particles");
}

int BlockPartition::uniform_size() const {
  if (blocks.empty()) return 0;
  const std::size_t b = blocks.front().size();
  for (const auto &blk : blocks) {
    if (blk.size() != b) return 0;
  }
  return static_cast<int>(b);
}

KernelMode KernelMode::ensemble_wise() { return {}; }

KernelMode KernelMode::sequential(ScanOrder scan) {
  KernelMode m;
  m.kind = ModeKind::SequentialPW;
  m.scan = scan;
  return m;
}

KernelMode KernelMode::block_wise(BlockPartition partition, ScanOrder scan) {
  KernelMode m;
  m.kind = ModeKind::BlockWise;
  m.scan = scan;
  m.partition = std::move(partition);
  return m;
}

KernelMode KernelMode::simultaneous() {
  KernelMode m;
  m.kind = ModeKind::SimultaneousPW;
  return m;
}

KernelMode KernelMode::unadjusted() {
  KernelMode m;
  m.kind = ModeKind::Unadjusted;
  return m;
}

BlockPartition KernelMode::effective_partition(int m) const {
  switch (kind) {
  case ModeKind::EnsembleWise:
  case ModeKind::Unadjusted:
    return BlockPartition::single(m);
  case ModeKind::SequentialPW:
  case ModeKind::SimultaneousPW:
    return BlockPartition::singletons(m);
  case ModeKind::BlockWise:
    partition.validate(m);
    return partition;
  }
  return BlockPartition::single(m);
}

std::string KernelMode::label() const {
  switch (kind) {
  case ModeKind::EnsembleWise: return "ew";
  case ModeKind::SequentialPW: return scan == ScanOrder::Deterministic ? "pw" : "pw-rs";
  case ModeKind::BlockWise: {
    std::string s = "bw" + std::to_string(partition.uniform_size());
    return scan == ScanOrder::Deterministic ? s : s + "-rs";
  }
  case ModeKind::SimultaneousPW: return "sim";
  case ModeKind::Unadjusted: return "ua";
  }
  return "?";
}

double log_accept(double curr_log_target, double prop_log_target, double log_q_fwd,
                  double log_q_rev) {
  if (curr_log_target == kNegInf) return 0.0;
  if (!(prop_log_target > kNegInf)) return kNegInf;
  const double r = prop_log_target + log_q_rev - curr_log_target - log_q_fwd;
  if (std::isnan(r)) return kNegInf;
  return std::min(0.0, r);
}

int StepResult::accepted_count() const {
  return static_cast<int>(std::count(accepted.begin(), accepted.end(), char{1}));
}

StepResult kernel_step(const KernelMode &mode, const DynamicsSpec &spec,
                       const Target &target, Ensemble &state, const StepContext &ctx) {
  const int m = static_cast<int>(state.rows());
  StepResult res;
  const bool svgd = spec.kind == DynamicsKind::Svgd;
  if (svgd && mode.kind != ModeKind::EnsembleWise && mode.kind != ModeKind::Unadjusted) {
    throw UnsupportedMode("SVGD supports only ensemble-wise and unadjusted updates");
  }

  if (mode.kind == ModeKind::Unadjusted) {
    const StreamKey key = key_for(ctx, 0, DrawPurpose::Proposal);
    if (svgd) {
      state = sample_proposal(svgd_proposal(spec, target, state), key);
    } else {
      const BlockProposal p = block_proposal(spec, target, state, BlockPartition::single(m).blocks[0]);
      state = sample_proposal(p, key);
    }
    res.accepted.assign(1, 1);
    return res;
  }

  if (svgd) {
    const FullCoupledProposal fwd = svgd_proposal(spec, target, state);
    const Matrix y = sample_proposal(fwd, key_for(ctx, 0, DrawPurpose::Proposal));
    double log_alpha = kNegInf;
    const double prop = y.allFinite() ? block_log_target(target, y) : kNegInf;
    if (prop > kNegInf) {
      const FullCoupledProposal rev = svgd_proposal(spec, target, y);
      log_alpha = log_accept(block_log_target(target, state), prop,
                             proposal_logpdf(fwd, y), proposal_logpdf(rev, state));
    }
    const bool ok = draw_accept(log_alpha, ctx, 0);
    if (ok) state = y;
    res.accepted.assign(1, ok ? 1 : 0);
    return res;
  }

  if (mode.kind == ModeKind::SimultaneousPW) {
    const Ensemble prev = state;
    res.accepted.assign(static_cast<std::size_t>(m), 0);
    for (int i = 0; i < m; ++i) {
      res.accepted[i] = mh_block(spec, target, prev, {i}, static_cast<std::uint64_t>(i),
                                 ctx, state) ? 1 : 0;
    }
    return res;
  }

  const BlockPartition part = mode.effective_partition(m);
  res.accepted.assign(part.blocks.size(), 0);
  for (std::size_t b : scan_order(part.blocks.size(), mode.scan, ctx)) {
    res.accepted[b] = mh_block(spec, target, state, part.blocks[b],
                               static_cast<std::uint64_t>(b), ctx, state) ? 1 : 0;
  }
  return res;
}

double ChainOutput::acceptance_rate() const {
  return decisions > 0 ? static_cast<double>(accepted) / static_cast<double>(decisions) : 0.0;
}

double ChainOutput::burn_in_rate() const {
  return burn_in_decisions > 0
             ? static_cast<double>(burn_in_accepted) / static_cast<double>(burn_in_decisions)
             : 0.0;
}

const std::vector<double> &ChainOutput::get(const std::string &name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return series[i];
  }
  throw ConfigError("no recorded series '" + name + "'");
}

ChainOutput run_chain(const KernelMode &mode, DynamicsSpec spec, const Target &target,
                      const Ensemble &init, const ChainConfig &config,
                      const std::vector<Recorder> &recorders) {
  if (config.iterations < 0 || config.burn_in < 0) {
    throw ConfigError("iteration counts must be non-negative");
  }
  spec.validate();
  if (init.cols() != target.dim() || init.rows() < 1) {
    throw DimensionMismatch("initial ensemble does not match the target dimension");
  }
  if (!init.allFinite()) throw ConfigError("initial ensemble has non-finite entries");

  ChainOutput out;
  out.seed = config.seed;
  out.replica = config.replica;
  for (const auto &r : recorders) {
    out.names.push_back(r.name);
    out.series.emplace_back();
    out.series.back().reserve(static_cast<std::size_t>(config.iterations));
  }
  Ensemble state = init;
  StepContext ctx{config.seed, config.replica, 0};

  int epoch = 0;
  long epoch_acc = 0, epoch_dec = 0;
  for (int it = 0; it < config.burn_in; ++it) {
    ctx.iteration = static_cast<std::uint64_t>(it);
    const StepResult r = kernel_step(mode, spec, target, state, ctx);
    const long acc = r.accepted_count();
    out.burn_in_accepted += acc;
    out.burn_in_decisions += static_cast<long>(r.accepted.size());
    if (config.tune) {
      const TuneOptions &t = *config.tune;
      epoch_acc += acc;
      epoch_dec += static_cast<long>(r.accepted.size());
      if ((it + 1) % t.epoch_length == 0) {
        ++epoch;
        const double rate = static_cast<double>(epoch_acc) / static_cast<double>(epoch_dec);
        out.tuner_trace.push_back({epoch, spec.step, rate});
        const double log_h = std::log(spec.step) +
                             t.c0 / std::sqrt(static_cast<double>(epoch)) * (rate - t.target_rate);
        spec.step = std::clamp(std::exp(log_h), t.h_min, t.h_max);
        epoch_acc = epoch_dec = 0;
      }
    }
  }
  out.step = spec.step;

  for (int it = 0; it < config.iterations; ++it) {
    ctx.iteration = static_cast<std::uint64_t>(config.burn_in + it);
    const StepResult r = kernel_step(mode, spec, target, state, ctx);
    if (out.block_accepts.empty()) {
      out.block_accepts.assign(r.accepted.size(), 0);
      out.decisions_per_iteration = static_cast<int>(r.accepted.size());
    }
    for (std::size_t b = 0; b < r.accepted.size(); ++b) out.block_accepts[b] += r.accepted[b];
    const int acc = r.accepted_count();
    out.accepted_per_iteration.push_back(acc);
    out.accepted += acc;
    out.decisions += static_cast<long>(r.accepted.size());
    for (std::size_t k = 0; k < recorders.size(); ++k) {
      out.series[k].push_back(recorders[k].fn(state));
    }
    if (config.snapshot_every > 0 && (it + 1) % config.snapshot_every == 0) {
      out.snapshots.push_back(state);
    }
  }
  out.final_state = std::move(state);
  return out;
}

TuneResult tune_step_size(const KernelMode &mode, const DynamicsSpec &spec,
                          const Target &target, const Ensemble &init,
                          const TuneOptions &options, int epochs, std::uint64_t seed,
                          std::uint64_t replica) {
  if (!(options.target_rate > 0.05 && options.target_rate < 0.95)) {
    throw ConfigError("tuning target rate must lie in (0.05, 0.95)");
  }
  if (epochs < 1 || options.epoch_length < 1) throw ConfigError("tuning needs >= 1 epoch");
  ChainConfig cfg;
  cfg.burn_in = epochs * options.epoch_length;
  cfg.seed = seed;
  cfg.replica = replica;
  cfg.tune = options;
  const ChainOutput out = run_chain(mode, spec, target, init, cfg);
  TuneResult res;
  res.step = out.step;
  res.trace = out.tuner_trace;
  res.saturated = out.step <= options.h_min || out.step >= options.h_max;
  res.state = out.final_state;
  return res;
}

} // namespace maips
