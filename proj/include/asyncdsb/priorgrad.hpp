#pragma once

#include <vector>

#include "asyncdsb/tensor.hpp"

namespace asyncdsb {

enum class Completer { oracle, harmonic };

struct AsyncConfig {
  double tau_min = 0.2;
  double tau_max = 0.5;
  double gauss_sigma = 2.0;  // pixels
  Completer completer = Completer::harmonic;
  // Min/max taken over the corrupted region (default) or the whole image.
  bool normalize_over_region = true;

  void validate() const;
};

// Recommended (tau_min, tau_max) for regular (center/half) and irregular
// (wide/narrow) masks.
inline constexpr AsyncConfig kRegularMaskTaus{0.2, 0.5};
inline constexpr AsyncConfig kIrregularMaskTaus{0.001, 0.4};

// 0.299 R + 0.587 G + 0.114 B for RGB, the channel itself for grayscale.
std::vector<double> luminance(const ImageTensor& img);

// |(Gx, Gy)| of the 3x3 Sobel responses on luminance, replicate padding.
GradientMap sobel_magnitude(const ImageTensor& img);

// Normalized Gaussian of radius ceil(3 sigma), replicate padding, separable.
GradientMap gaussian_filter(const GradientMap& map, double sigma);
std::vector<double> gaussian_kernel(double sigma);

struct HarmonicOptions {
  double tolerance = 1e-6;
  std::size_t max_iterations = 10000;
};

// Solves the discrete Laplace equation on `region` (mask 1) with the values
// outside it as Dirichlet data. Image borders are treated as reflecting.
GradientMap harmonic_fill(const GradientMap& values, const Mask& region,
                          HarmonicOptions opts = {});
ImageTensor harmonic_fill(const ImageTensor& values, const Mask& region,
                          HarmonicOptions opts = {});

// Fills the corrupted part of x_cg. `ground_truth` is required by the oracle
// completer (ConfigError otherwise) and ignored by the harmonic one.
GradientMap complete_gradient(const ImageTensor& x_c, const Mask& x_m, const GradientMap& x_cg,
                              Completer completer,
                              const ImageTensor* ground_truth = nullptr);

// Min-max maps the smoothed gradient onto [tau_min, tau_max]. Statistics
// come from `region` when given and cfg.normalize_over_region is set;
// pixels outside that range are clamped. A flat map yields the midpoint.
TauMap tau_from_gradient(const GradientMap& g_hat, const AsyncConfig& cfg,
                         const Mask* region = nullptr);

}  // namespace asyncdsb
