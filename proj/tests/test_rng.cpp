#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <set>

#include "asyncdsb/rng.hpp"

using namespace asyncdsb;

TEST_CASE("philox matches the published known-answer vectors") {
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) ==
        PhiloxCounter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        PhiloxCounter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        PhiloxCounter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("open_unit stays strictly inside (0,1)") {
  CHECK(open_unit(0, 0) > 0.0);
  CHECK(open_unit(0xffffffff, 0xffffffff) < 1.0);
  CHECK(open_unit(0x80000000, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("philox noise is a pure function of seed and key") {
  const PhiloxNoise a(42);
  const PhiloxNoise b(42);
  const PhiloxNoise c(43);
  const NoiseKey k{7, 3, 5, 1};
  CHECK(a.normal(k) == b.normal(k));
  CHECK(a.normal(k) != c.normal(k));
  CHECK(a.normal(k) != a.normal({7, 3, 5, 2}));
  CHECK(a.normal(k) != a.normal({8, 3, 5, 1}));
}

TEST_CASE("philox noise has standard normal moments") {
  const PhiloxNoise noise(2024);
  const int n = 200000;
  double sum = 0.0;
  double sum2 = 0.0;
  double sum4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = noise.normal({static_cast<std::uint32_t>(i), 0, static_cast<std::uint32_t>(i % 97), 0});
    sum += z;
    sum2 += z * z;
    sum4 += z * z * z * z;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 / std::sqrt(n));
  CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(sum4 / n - 3.0) < 0.1);
}

TEST_CASE("constant noise returns its value for every key") {
  const ConstantNoise z(0.25);
  CHECK(z.normal({}) == 0.25);
  CHECK(z.normal({9, 9, 9, 9}) == 0.25);
}

TEST_CASE("counter stream draws are reproducible and in range") {
  CounterStream a(5, 1);
  CounterStream b(5, 1);
  CounterStream other(5, 2);
  bool differs = false;
  std::set<int> seen;
  for (int i = 0; i < 2000; ++i) {
    const double u = a.uniform();
    CHECK(u == b.uniform());
    differs = differs || u != other.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const int k = a.uniform_int(-2, 3);
    b.uniform_int(-2, 3);
    other.uniform_int(-2, 3);
    CHECK(k >= -2);
    CHECK(k <= 3);
    seen.insert(k);
    const double v = a.uniform(2.0, 4.0);
    b.uniform(2.0, 4.0);
    other.uniform(2.0, 4.0);
    CHECK(v >= 2.0);
    CHECK(v < 4.0);
  }
  CHECK(differs);
  CHECK(seen.size() == 6);
}
