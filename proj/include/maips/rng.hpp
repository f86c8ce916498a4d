#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace maips {

// What a stream is used for. Part of the stream key, so two draws for
// different purposes never share random numbers.
enum class DrawPurpose : std::uint64_t {
  Proposal = 1,
  Accept = 2,
  ScanOrder = 3,
  Init = 4,
  Problem = 5,
  Test = 6,
};

// Identifies one independent random stream. Trajectories only depend on the
// keys, never on which worker performs a draw or in which order.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  std::uint64_t iteration = 0;
  std::uint64_t block = 0;
  std::uint64_t particle = 0;
  DrawPurpose purpose = DrawPurpose::Proposal;
};

// Counter-based generator: the key is hashed into a 64-bit state which is
// then advanced SplitMix64-style. Satisfies UniformRandomBitGenerator so the
// standard distributions can be used on top of it.
class RngStream {
public:
  using result_type = std::uint64_t;

  explicit RngStream(const StreamKey &key);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  double uniform();
  double normal();

private:
  std::uint64_t state_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

std::uint64_t mix64(std::uint64_t x);

} // namespace maips
