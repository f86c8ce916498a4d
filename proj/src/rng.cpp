#include "maips/rng.hpp"

namespace maips {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

RngStream::RngStream(const StreamKey &key) {
  std::uint64_t h = mix64(key.seed + kGolden);
  for (std::uint64_t field :
       {key.replica, key.iteration, key.block, key.particle,
        static_cast<std::uint64_t>(key.purpose)}) {
    h = mix64(h ^ mix64(field + kGolden));
  }
  state_ = h;
}

RngStream::result_type RngStream::operator()() {
  state_ += kGolden;
  return mix64(state_);
}

double RngStream::uniform() { return uniform_(*this); }

double RngStream::normal() { return normal_(*this); }

} // namespace maips
