#pragma once

#include <array>
#include <cstdint>

namespace asyncdsb {

// Philox4x32-10 counter-based generator (Salmon et al., Random123).
// Stateless: output is a pure function of (counter, key).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key);

PhiloxKey key_from_seed(std::uint64_t seed);

// Uniform double in the open interval (0,1) from two 32-bit words.
double open_unit(std::uint32_t hi, std::uint32_t lo);

// Address of one Gaussian draw: reverse step (or draw index), pixel, channel.
struct NoiseKey {
  std::uint32_t step = 0;
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  std::uint32_t channel = 0;
};

class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  virtual double normal(const NoiseKey& key) const = 0;
};

// Standard normal via Box-Muller on one Philox block per key.
class PhiloxNoise final : public NoiseSource {
 public:
  explicit PhiloxNoise(std::uint64_t seed) : key_(key_from_seed(seed)) {}
  double normal(const NoiseKey& key) const override;

 private:
  PhiloxKey key_;
};

// Fixed z for every key; z = 0 turns samplers into their mean paths.
class ConstantNoise final : public NoiseSource {
 public:
  explicit ConstantNoise(double z = 0.0) : z_(z) {}
  double normal(const NoiseKey&) const override { return z_; }

 private:
  double z_;
};

// Sequential stream for procedural generation (masks, corpus images).
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint32_t stream)
      : key_(key_from_seed(seed)), stream_(stream) {}

  std::uint32_t next_u32();
  double uniform();                               // [0,1)
  double uniform(double lo, double hi);           // [lo,hi)
  int uniform_int(int lo, int hi);                // inclusive

 private:
  PhiloxKey key_;
  std::uint32_t stream_;
  std::uint64_t counter_ = 0;
  PhiloxCounter block_{};
  int used_ = 4;
};

}  // namespace asyncdsb
