#pragma once

#include <filesystem>

#include "asyncdsb/bridge.hpp"
#include "asyncdsb/tensor.hpp"

namespace asyncdsb {

// PNG interchange. 8-bit gray/RGB images map linearly onto [0,1]; alpha is
// dropped and palettes expanded on load. 16-bit grayscale loads as c = 1.
ImageTensor load_png(const std::filesystem::path& path);
// 8-bit, values clamped to [0,1] and rounded to the nearest level.
void save_png(const ImageTensor& img, const std::filesystem::path& path);
// 16-bit grayscale, single-channel tensors only.
void save_png16(const ImageTensor& img, const std::filesystem::path& path);

// Masks are 8-bit grayscale with corrupted = 255, visible = 0.
Mask load_mask_png(const std::filesystem::path& path);
void save_mask_png(const Mask& m, const std::filesystem::path& path);

// Sidecar written next to a data file: `<path>.json`.
std::filesystem::path sidecar_path(const std::filesystem::path& path);

struct MapRange {
  double min = 0.0;
  double max = 0.0;
};

// 16-bit PNG scaled linearly from [min, max] of the map; the range goes to
// the JSON sidecar `{"min":..,"max":..,"h":..,"w":..}`.
template <class Tag>
MapRange save_map_png16(const Plane<Tag>& map, const std::filesystem::path& path);
template <class Tag>
Plane<Tag> load_map_png16(const std::filesystem::path& path);

// Little-endian float32 dump, sidecar `{"h","w","c","order":"row-major"}`.
void save_raw(const Tensor& t, const std::filesystem::path& path);
Tensor load_raw(const std::filesystem::path& path);
template <class Tag>
void save_raw(const Plane<Tag>& map, const std::filesystem::path& path);

// All recorded states back to back in the raw format; the sidecar also lists
// "count", "steps" (grid indices), "ts" and "T".
void save_trajectory_raw(const Trajectory& traj, const std::filesystem::path& path);
Trajectory load_trajectory_raw(const std::filesystem::path& path);

}  // namespace asyncdsb
