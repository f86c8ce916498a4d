#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "maips/dynamics.hpp"
#include "maips/targets.hpp"

namespace maips {

enum class ScanOrder { Deterministic, RandomPermutation };

// Disjoint cover of {0, ..., M-1}.
struct BlockPartition {
  std::vector<std::vector<int>> blocks;

  static BlockPartition single(int m);
  static BlockPartition singletons(int m);
  // Consecutive blocks of size b; b must divide m.
  static BlockPartition uniform(int m, int b);

  // Throws ConfigError unless the blocks are a disjoint, non-empty cover.
  void validate(int m) const;
  // Common block size, or 0 when sizes differ.
  int uniform_size() const;
};

enum class ModeKind { EnsembleWise, SequentialPW, BlockWise, SimultaneousPW, Unadjusted };

struct KernelMode {
  ModeKind kind = ModeKind::EnsembleWise;
  ScanOrder scan = ScanOrder::Deterministic;
  BlockPartition partition;  // BlockWise only

  static KernelMode ensemble_wise();
  static KernelMode sequential(ScanOrder scan = ScanOrder::Deterministic);
  static KernelMode block_wise(BlockPartition partition,
                               ScanOrder scan = ScanOrder::Deterministic);
  static KernelMode simultaneous();
  static KernelMode unadjusted();

  // Partition actually used for an ensemble of m particles.
  BlockPartition effective_partition(int m) const;
  std::string label() const;
};

/// log of the MH acceptance probability. A current state outside the support
/// is always left; a proposal outside the support (or NaN) is never taken.
double log_accept(double curr_log_target, double prop_log_target, double log_q_fwd,
                  double log_q_rev);

struct StepContext {
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  std::uint64_t iteration = 0;
};

struct StepResult {
  // One flag per accept/reject decision, indexed by block of the effective
  // partition (by particle for SimultaneousPW).
  std::vector<char> accepted;
  int accepted_count() const;
};

/// One transition of the chain; `state` is updated in place.
StepResult kernel_step(const KernelMode &mode, const DynamicsSpec &spec,
                       const Target &target, Ensemble &state, const StepContext &ctx);

struct TuneOptions {
  double target_rate = 0.5;
  int epoch_length = 100;  // iterations per adaptation
  double c0 = 1.0;
  double h_min = 1e-10;
  double h_max = 1e3;
};

struct TunerEpoch {
  int epoch = 0;
  double step = 0.0;  // h used during the epoch
  double rate = 0.0;  // acceptance rate observed in it
};

struct Recorder {
  std::string name;
  std::function<double(const Ensemble &)> fn;
};

struct ChainConfig {
  int iterations = 0;  // post burn-in
  int burn_in = 0;
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  std::optional<TuneOptions> tune;  // adapts h during burn-in only
  int snapshot_every = 0;           // 0 disables snapshots
};

struct ChainOutput {
  std::vector<std::string> names;
  std::vector<std::vector<double>> series;  // [recorder][iteration]
  std::vector<int> accepted_per_iteration;  // sampling phase
  std::vector<long> block_accepts;          // sampling phase, per decision slot
  int decisions_per_iteration = 0;
  long burn_in_accepted = 0;
  long burn_in_decisions = 0;
  long accepted = 0;
  long decisions = 0;
  std::vector<TunerEpoch> tuner_trace;
  double step = 0.0;  // h used for sampling
  Ensemble final_state;
  std::vector<Ensemble> snapshots;
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;

  double acceptance_rate() const;
  double burn_in_rate() const;
  const std::vector<double> &get(const std::string &name) const;
};

ChainOutput run_chain(const KernelMode &mode, DynamicsSpec spec, const Target &target,
                      const Ensemble &init, const ChainConfig &config,
                      const std::vector<Recorder> &recorders = {});

struct TuneResult {
  double step = 0.0;
  std::vector<TunerEpoch> trace;
  bool saturated = false;  // final h sits on a clamp bound
  Ensemble state;          // ensemble at the end of tuning
};

/// Stochastic approximation on ln h for `epochs` epochs starting from
/// spec.step.
TuneResult tune_step_size(const KernelMode &mode, const DynamicsSpec &spec,
                          const Target &target, const Ensemble &init,
                          const TuneOptions &options, int epochs, std::uint64_t seed,
                          std::uint64_t replica = 0);

} // namespace maips
