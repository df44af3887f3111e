#include "asyncdsb/priorgrad.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "asyncdsb/error.hpp"

namespace asyncdsb {

void AsyncConfig::validate() const {
  if (!(tau_min >= 0.0 && tau_min <= 1.0) || !(tau_max >= 0.0 && tau_max <= 1.0)) {
    throw ValidationError("tau_min and tau_max must lie in [0,1]");
  }
  if (tau_min > tau_max) throw ValidationError("tau_min must not exceed tau_max");
  if (!(gauss_sigma > 0.0)) throw ValidationError("gauss_sigma must be positive");
}

std::vector<double> luminance(const ImageTensor& img) {
  std::vector<double> out(img.pixels());
  if (img.channels() == 1) {
    for (std::size_t p = 0; p < img.pixels(); ++p) out[p] = img[p];
  } else if (img.channels() == 3) {
    for (std::size_t p = 0; p < img.pixels(); ++p) {
      out[p] = 0.299 * img[3 * p] + 0.587 * img[3 * p + 1] + 0.114 * img[3 * p + 2];
    }
  } else {
    throw ValidationError("images must have 1 or 3 channels");
  }
  return out;
}

GradientMap sobel_magnitude(const ImageTensor& img) {
  const std::size_t h = img.height();
  const std::size_t w = img.width();
  if (h < 3 || w < 3) throw ValidationError("image smaller than the 3x3 Sobel kernel");
  const auto lum = luminance(img);
  const auto px = [&](std::ptrdiff_t i, std::ptrdiff_t j) {
    i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(h) - 1);
    j = std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(w) - 1);
    return lum[static_cast<std::size_t>(i) * w + static_cast<std::size_t>(j)];
  };
  GradientMap out(h, w);
  for (std::size_t ui = 0; ui < h; ++ui) {
    for (std::size_t uj = 0; uj < w; ++uj) {
      const auto i = static_cast<std::ptrdiff_t>(ui);
      const auto j = static_cast<std::ptrdiff_t>(uj);
      const double gx = (px(i - 1, j + 1) + 2.0 * px(i, j + 1) + px(i + 1, j + 1)) -
                        (px(i - 1, j - 1) + 2.0 * px(i, j - 1) + px(i + 1, j - 1));
      const double gy = (px(i + 1, j - 1) + 2.0 * px(i + 1, j) + px(i + 1, j + 1)) -
                        (px(i - 1, j - 1) + 2.0 * px(i - 1, j) + px(i - 1, j + 1));
      out.at(ui, uj) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw ValidationError("gaussian sigma must be positive");
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::ptrdiff_t x = -radius; x <= radius; ++x) {
    const double v = std::exp(-static_cast<double>(x * x) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(x + radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

GradientMap gaussian_filter(const GradientMap& map, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const auto radius = static_cast<std::ptrdiff_t>(k.size() / 2);
  const auto h = static_cast<std::ptrdiff_t>(map.height());
  const auto w = static_cast<std::ptrdiff_t>(map.width());
  GradientMap tmp(map.height(), map.width());
  GradientMap out(map.height(), map.width());
  for (std::ptrdiff_t i = 0; i < h; ++i) {
    for (std::ptrdiff_t j = 0; j < w; ++j) {
      double acc = 0.0;
      for (std::ptrdiff_t d = -radius; d <= radius; ++d) {
        const auto jj = std::clamp<std::ptrdiff_t>(j + d, 0, w - 1);
        acc += k[static_cast<std::size_t>(d + radius)] *
               map.at(static_cast<std::size_t>(i), static_cast<std::size_t>(jj));
      }
      tmp.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = acc;
    }
  }
  for (std::ptrdiff_t i = 0; i < h; ++i) {
    for (std::ptrdiff_t j = 0; j < w; ++j) {
      double acc = 0.0;
      for (std::ptrdiff_t d = -radius; d <= radius; ++d) {
        const auto ii = std::clamp<std::ptrdiff_t>(i + d, 0, h - 1);
        acc += k[static_cast<std::size_t>(d + radius)] *
               tmp.at(static_cast<std::size_t>(ii), static_cast<std::size_t>(j));
      }
      out.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = std::max(acc, 0.0);
    }
  }
  return out;
}

namespace {

// Red-black Gauss-Seidel on one H x W plane stored with stride `stride`.
void solve_laplace(std::span<double> u, std::size_t h, std::size_t w, std::size_t stride,
                   const Mask& region, const HarmonicOptions& opts) {
  const auto at = [&](std::size_t i, std::size_t j) -> double& { return u[(i * w + j) * stride]; };

  double boundary_sum = 0.0;
  std::size_t boundary_n = 0;
  for (std::size_t p = 0; p < h * w; ++p) {
    if (!region[p]) {
      boundary_sum += u[p * stride];
      ++boundary_n;
    }
  }
  if (boundary_n == 0) return;  // nothing to anchor the solution; leave as is
  const double init = boundary_sum / static_cast<double>(boundary_n);
  for (std::size_t p = 0; p < h * w; ++p) {
    if (region[p]) u[p * stride] = init;
  }

  for (std::size_t iter = 0; iter < opts.max_iterations; ++iter) {
    double change = 0.0;
    for (std::size_t color = 0; color < 2; ++color) {
      for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = (i + color) % 2; j < w; j += 2) {
          if (!region.at(i, j)) continue;
          double sum = 0.0;
          int n = 0;
          if (i > 0) { sum += at(i - 1, j); ++n; }
          if (i + 1 < h) { sum += at(i + 1, j); ++n; }
          if (j > 0) { sum += at(i, j - 1); ++n; }
          if (j + 1 < w) { sum += at(i, j + 1); ++n; }
          const double next = sum / n;
          change = std::max(change, std::abs(next - at(i, j)));
          at(i, j) = next;
        }
      }
    }
    if (change < opts.tolerance) break;
  }
}

void check_region(const Mask& region, std::size_t h, std::size_t w) {
  if (region.height() != h || region.width() != w) {
    throw ValidationError("region mask does not match the map");
  }
}

}  // namespace

GradientMap harmonic_fill(const GradientMap& values, const Mask& region, HarmonicOptions opts) {
  check_region(region, values.height(), values.width());
  GradientMap out = values;
  solve_laplace(out.values(), out.height(), out.width(), 1, region, opts);
  return out;
}

ImageTensor harmonic_fill(const ImageTensor& values, const Mask& region, HarmonicOptions opts) {
  check_region(region, values.height(), values.width());
  ImageTensor out = values;
  for (std::size_t ch = 0; ch < out.channels(); ++ch) {
    solve_laplace(out.values().subspan(ch), out.height(), out.width(), out.channels(), region,
                  opts);
  }
  return out;
}

GradientMap complete_gradient(const ImageTensor& x_c, const Mask& x_m, const GradientMap& x_cg,
                              Completer completer, const ImageTensor* ground_truth) {
  if (x_m.height() != x_c.height() || x_m.width() != x_c.width() ||
      x_cg.height() != x_c.height() || x_cg.width() != x_c.width()) {
    throw ValidationError("image, mask and gradient map must share H x W");
  }
  if (completer == Completer::oracle) {
    if (ground_truth == nullptr) {
      throw ConfigError("the oracle gradient completer requires the ground-truth image");
    }
    if (!ground_truth->same_shape(x_c)) throw ValidationError("ground truth shape mismatch");
    const auto truth = sobel_magnitude(*ground_truth);
    GradientMap out = x_cg;
    for (std::size_t p = 0; p < out.pixels(); ++p) {
      if (x_m[p]) out[p] = truth[p];
    }
    return out;
  }
  return harmonic_fill(x_cg, x_m);
}

TauMap tau_from_gradient(const GradientMap& g_hat, const AsyncConfig& cfg, const Mask* region) {
  cfg.validate();
  if (region && (region->height() != g_hat.height() || region->width() != g_hat.width())) {
    throw ValidationError("region mask does not match the gradient map");
  }
  const auto smooth = gaussian_filter(g_hat, cfg.gauss_sigma);
  const bool use_region = cfg.normalize_over_region && region != nullptr && region->any();

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < smooth.pixels(); ++p) {
    if (use_region && !(*region)[p]) continue;
    lo = std::min(lo, smooth[p]);
    hi = std::max(hi, smooth[p]);
  }

  TauMap tau(g_hat.height(), g_hat.width());
  if (!(hi > lo)) {
    const double mid = 0.5 * (cfg.tau_min + cfg.tau_max);
    for (auto& v : tau.values()) v = mid;
    return tau;
  }
  for (std::size_t p = 0; p < smooth.pixels(); ++p) {
    const double u = std::clamp((smooth[p] - lo) / (hi - lo), 0.0, 1.0);
    // std::lerp is exact at both endpoints and monotone in u.
    tau[p] = std::lerp(cfg.tau_min, cfg.tau_max, u);
  }
  return tau;
}

}  // namespace asyncdsb
