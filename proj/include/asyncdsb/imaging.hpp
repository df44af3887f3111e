#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "asyncdsb/tensor.hpp"

namespace asyncdsb {

// x_c = (1 - x_m) * x_g: corrupted pixels zeroed, visible ones untouched.
ImageTensor apply_mask(const ImageTensor& x_g, const Mask& x_m);

enum class MaskKind { center, half, wide, narrow };

MaskKind parse_mask_kind(std::string_view name);
std::string_view to_string(MaskKind kind);

// center: centred (h/2) x (w/2) block (25% of the area); half: left w/2 columns;
// wide: 4-8 brush strokes of radius 10-20 px; narrow: 8-16 strokes of radius 2-6 px.
// Pure function of its arguments. Requires h, w >= 16.
Mask make_mask(MaskKind kind, std::size_t h, std::size_t w, std::uint64_t seed);

double mask_ratio(const Mask& m);

// Thin strokes added one at a time until the ratio reaches the middle of
// `bucket` (see ratio_bucket). Strokes that overshoot the bucket are discarded.
Mask make_bucket_mask(int bucket, std::size_t h, std::size_t w, std::uint64_t seed);

// Mask-ratio buckets (0,10%], (10,20%], (20,30%], (30,40%] as 1..4; nullopt otherwise.
std::optional<int> ratio_bucket(double ratio);

struct BucketRecommendation {
  int bucket;
  double tau_min;
  double tau_max;
};
// Per-bucket (tau_min, tau_max) reported for Places2; larger holes favour later apexes.
inline constexpr BucketRecommendation kRatioBucketTaus[] = {
    {1, 0.001, 0.9}, {2, 0.2, 0.9}, {3, 0.4, 0.9}, {4, 0.7, 0.9}};

// Deterministic images: smooth linear/radial background with sharp-edged
// shapes on top, so both low- and high-frequency content is present.
ImageTensor synth_image(std::uint64_t seed, std::size_t index, std::size_t h, std::size_t w,
                        std::size_t channels = 3);
std::vector<ImageTensor> synth_corpus(std::uint64_t seed, std::size_t n, std::size_t h,
                                      std::size_t w, std::size_t channels = 3);

double mean_squared_error(const ImageTensor& a, const ImageTensor& b);

}  // namespace asyncdsb
