#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace asyncdsb {

// H x W x C array of reals, row-major with channels innermost.
// Pixel values of images live in [0,1]; score tensors and sampler states
// are unbounded, so the range is checked on demand rather than enforced.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0);
  Tensor(std::size_t h, std::size_t w, std::size_t c, std::vector<double> data);

  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }
  std::size_t channels() const { return c_; }
  std::size_t pixels() const { return h_ * w_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(std::size_t i, std::size_t j, std::size_t ch) {
    return data_[(i * w_ + j) * c_ + ch];
  }
  double at(std::size_t i, std::size_t j, std::size_t ch) const {
    return data_[(i * w_ + j) * c_ + ch];
  }
  double& operator[](std::size_t idx) { return data_[idx]; }
  double operator[](std::size_t idx) const { return data_[idx]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool same_shape(const Tensor& other) const {
    return h_ == other.h_ && w_ == other.w_ && c_ == other.c_;
  }
  bool in_unit_range() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t h_ = 0;
  std::size_t w_ = 0;
  std::size_t c_ = 0;
  std::vector<double> data_;
};

using ImageTensor = Tensor;
using ScoreTensor = Tensor;

// Binary per-pixel mask, 1 = corrupted.
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t h, std::size_t w, bool fill = false);
  Mask(std::size_t h, std::size_t w, std::vector<std::uint8_t> bits);

  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }
  std::size_t pixels() const { return h_ * w_; }

  bool at(std::size_t i, std::size_t j) const { return bits_[i * w_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool v) { bits_[i * w_ + j] = v ? 1 : 0; }
  bool operator[](std::size_t p) const { return bits_[p] != 0; }

  std::size_t count() const;
  bool any() const { return count() > 0; }
  std::span<const std::uint8_t> bits() const { return bits_; }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::size_t h_ = 0;
  std::size_t w_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Single-channel H x W map. The tag keeps gradient maps and tau maps apart.
template <class Tag>
class Plane {
 public:
  Plane() = default;
  Plane(std::size_t h, std::size_t w, double fill = 0.0)
      : h_(h), w_(w), data_(h * w, fill) {}
  Plane(std::size_t h, std::size_t w, std::vector<double> data)
      : h_(h), w_(w), data_(std::move(data)) {}

  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }
  std::size_t pixels() const { return h_ * w_; }

  double& at(std::size_t i, std::size_t j) { return data_[i * w_ + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * w_ + j]; }
  double& operator[](std::size_t p) { return data_[p]; }
  double operator[](std::size_t p) const { return data_[p]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  std::size_t h_ = 0;
  std::size_t w_ = 0;
  std::vector<double> data_;
};

struct GradientTag {};
struct TauTag {};

// Non-negative gradient magnitudes.
using GradientMap = Plane<GradientTag>;
// Per-pixel apex times in [tau_min, tau_max].
using TauMap = Plane<TauTag>;

}  // namespace asyncdsb
