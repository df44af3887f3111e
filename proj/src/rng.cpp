#include "asyncdsb/rng.hpp"

#include <cmath>
#include <numbers>

namespace asyncdsb {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

PhiloxKey key_from_seed(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

double open_unit(std::uint32_t hi, std::uint32_t lo) {
  // 52 bits plus a half step keeps both ends exactly representable and inside (0,1).
  const std::uint64_t bits =
      (static_cast<std::uint64_t>(hi) << 20) | (static_cast<std::uint64_t>(lo) >> 12);
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

double PhiloxNoise::normal(const NoiseKey& k) const {
  const auto r = philox4x32({k.step, k.row, k.col, k.channel}, key_);
  const double u1 = open_unit(r[0], r[1]);
  const double u2 = open_unit(r[2], r[3]);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint32_t CounterStream::next_u32() {
  if (used_ == 4) {
    block_ = philox4x32({static_cast<std::uint32_t>(counter_),
                         static_cast<std::uint32_t>(counter_ >> 32), stream_,
                         0x5eed5eedu},
                        key_);
    ++counter_;
    used_ = 0;
  }
  return block_[used_++];
}

double CounterStream::uniform() {
  const std::uint32_t hi = next_u32();
  const std::uint32_t lo = next_u32();
  const std::uint64_t bits =
      (static_cast<std::uint64_t>(hi) << 21) | (static_cast<std::uint64_t>(lo) >> 11);
  return static_cast<double>(bits) * 0x1.0p-53;
}

double CounterStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int CounterStream::uniform_int(int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  // Lemire's multiply-shift; bias is below 2^-32 for the small ranges used here.
  const std::uint64_t x = static_cast<std::uint64_t>(next_u32()) * span;
  return lo + static_cast<int>(x >> 32);
}

}  // namespace asyncdsb
