#include "asyncdsb/tensor.hpp"

#include <algorithm>

#include "asyncdsb/error.hpp"

namespace asyncdsb {

Tensor::Tensor(std::size_t h, std::size_t w, std::size_t c, double fill)
    : h_(h), w_(w), c_(c), data_(h * w * c, fill) {}

Tensor::Tensor(std::size_t h, std::size_t w, std::size_t c, std::vector<double> data)
    : h_(h), w_(w), c_(c), data_(std::move(data)) {
  if (data_.size() != h * w * c) {
    throw ValidationError("tensor data length does not match h*w*c");
  }
}

bool Tensor::in_unit_range() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return v >= 0.0 && v <= 1.0; });
}

Mask::Mask(std::size_t h, std::size_t w, bool fill) : h_(h), w_(w), bits_(h * w, fill ? 1 : 0) {}

Mask::Mask(std::size_t h, std::size_t w, std::vector<std::uint8_t> bits)
    : h_(h), w_(w), bits_(std::move(bits)) {
  if (bits_.size() != h * w) throw ValidationError("mask data length does not match h*w");
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

}  // namespace asyncdsb
