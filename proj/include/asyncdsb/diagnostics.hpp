#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "asyncdsb/bridge.hpp"
#include "asyncdsb/schedule.hpp"
#include "asyncdsb/tensor.hpp"

namespace asyncdsb {

// Sampled function of grid time, stored in reverse-time order (ts strictly
// decreasing).
struct Curve {
  std::vector<double> ts;
  std::vector<double> values;

  std::size_t size() const { return ts.size(); }
  void validate() const;
  // Linear interpolation; ts outside the support are clamped to its ends.
  double value_at(double t) const;
};

// Mean SSIM on luminance: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
// K2 = 0.03, dynamic range 1. Averaged over the valid window positions;
// inputs smaller than the window fall back to replicate padding.
double ssim(const ImageTensor& a, const ImageTensor& b);

// SSIM of each recorded state against x_g inside the bounding box of
// `region`, with pixels outside the region taken from x_g.
Curve restoration_curve(const Trajectory& traj, const ImageTensor& x_g, const Mask& region);

// Central differences against reverse-time progress s = 1 - t (one-sided at
// the ends), scaled to max |value| = 1. A flat curve gives all zeros.
Curve normalized_derivative(const Curve& curve);

struct BandMasks {
  Mask high;
  Mask mid;
  Mask low;
};

// Terciles of gradient magnitude over `region`, ties broken by (i, j).
BandMasks band_split(const GradientMap& g, const Mask& region);

// beta_t / (sigma_bar^2 + sigma^2) on the grid, rescaled to max 1.
Curve theoretical_curve(const NoiseSchedule& schedule);
// Per-pixel version averaged over `region` (whole image when null or empty).
Curve theoretical_curve(const PixelScheduleField& field, const Mask* region = nullptr);

struct MismatchReport {
  double peak_lag = 0.0;  // empirical peak time - theoretical peak time
  double l1_gap = 0.0;    // mean |empirical - theory| on the common grid
};

// Grid time of the first maximum, scanning from t = 1 downwards.
double peak_time(const Curve& curve);

// Theory is resampled onto the empirical times that fall inside its support.
MismatchReport mismatch_report(const Curve& theory, const Curve& empirical);

void export_csv(const Curve& curve, const std::filesystem::path& path);
Curve import_curve_csv(const std::filesystem::path& path);
void write_json(const MismatchReport& report, const std::filesystem::path& path);

}  // namespace asyncdsb
