#include "asyncdsb/imaging.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "asyncdsb/error.hpp"
#include "asyncdsb/rng.hpp"

namespace asyncdsb {

ImageTensor apply_mask(const ImageTensor& x_g, const Mask& x_m) {
  if (x_m.height() != x_g.height() || x_m.width() != x_g.width()) {
    throw ValidationError("mask and image dimensions differ");
  }
  ImageTensor out = x_g;
  const std::size_t c = x_g.channels();
  for (std::size_t p = 0; p < x_g.pixels(); ++p) {
    if (!x_m[p]) continue;
    for (std::size_t ch = 0; ch < c; ++ch) out[p * c + ch] = 0.0;
  }
  return out;
}

MaskKind parse_mask_kind(std::string_view name) {
  if (name == "center") return MaskKind::center;
  if (name == "half") return MaskKind::half;
  if (name == "wide") return MaskKind::wide;
  if (name == "narrow") return MaskKind::narrow;
  throw ValidationError("unknown mask kind '" + std::string(name) + "'");
}

std::string_view to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::center: return "center";
    case MaskKind::half: return "half";
    case MaskKind::wide: return "wide";
    case MaskKind::narrow: return "narrow";
  }
  return "unknown";
}

namespace {

void stamp_disk(Mask& m, double ci, double cj, double r) {
  const auto h = static_cast<std::ptrdiff_t>(m.height());
  const auto w = static_cast<std::ptrdiff_t>(m.width());
  const auto i0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::floor(ci - r)));
  const auto i1 = std::min<std::ptrdiff_t>(h - 1, static_cast<std::ptrdiff_t>(std::ceil(ci + r)));
  const auto j0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::floor(cj - r)));
  const auto j1 = std::min<std::ptrdiff_t>(w - 1, static_cast<std::ptrdiff_t>(std::ceil(cj + r)));
  for (auto i = i0; i <= i1; ++i) {
    for (auto j = j0; j <= j1; ++j) {
      const double di = static_cast<double>(i) - ci;
      const double dj = static_cast<double>(j) - cj;
      if (di * di + dj * dj <= r * r) m.set(static_cast<std::size_t>(i), static_cast<std::size_t>(j), true);
    }
  }
}

// One random-walk brush stroke with a disk brush.
void draw_stroke(Mask& m, CounterStream& rng, int min_radius, int max_radius) {
  const double hd = static_cast<double>(m.height());
  const double wd = static_cast<double>(m.width());
  const double extent = std::min(hd, wd);
  const double r = rng.uniform_int(min_radius, max_radius);
  double ci = rng.uniform(0.0, hd);
  double cj = rng.uniform(0.0, wd);
  const int vertices = rng.uniform_int(2, 5);
  double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (int v = 0; v < vertices; ++v) {
    angle += rng.uniform(-0.6 * std::numbers::pi, 0.6 * std::numbers::pi);
    const double len = rng.uniform(0.1, 0.3) * extent;
    const double ni = std::clamp(ci + len * std::sin(angle), 0.0, hd - 1.0);
    const double nj = std::clamp(cj + len * std::cos(angle), 0.0, wd - 1.0);
    const int samples = std::max(1, static_cast<int>(std::ceil(len / std::max(1.0, 0.5 * r))));
    for (int q = 0; q <= samples; ++q) {
      const double f = static_cast<double>(q) / samples;
      stamp_disk(m, ci + f * (ni - ci), cj + f * (nj - cj), r);
    }
    ci = ni;
    cj = nj;
  }
}

Mask strokes(std::size_t h, std::size_t w, std::uint64_t seed, int min_strokes, int max_strokes,
             int min_radius, int max_radius, std::uint32_t stream) {
  Mask m(h, w);
  CounterStream rng(seed, stream);
  const int n = rng.uniform_int(min_strokes, max_strokes);
  for (int s = 0; s < n; ++s) draw_stroke(m, rng, min_radius, max_radius);
  return m;
}

}  // namespace

Mask make_mask(MaskKind kind, std::size_t h, std::size_t w, std::uint64_t seed) {
  if (h < 16 || w < 16) throw ValidationError("masks need h, w >= 16");
  switch (kind) {
    case MaskKind::center: {
      Mask m(h, w);
      const std::size_t mh = h / 2;
      const std::size_t mw = w / 2;
      const std::size_t i0 = (h - mh) / 2;
      const std::size_t j0 = (w - mw) / 2;
      for (std::size_t i = i0; i < i0 + mh; ++i) {
        for (std::size_t j = j0; j < j0 + mw; ++j) m.set(i, j, true);
      }
      return m;
    }
    case MaskKind::half: {
      Mask m(h, w);
      for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w / 2; ++j) m.set(i, j, true);
      }
      return m;
    }
    case MaskKind::wide:
      return strokes(h, w, seed, 4, 8, 10, 20, 0x77696465u);
    case MaskKind::narrow:
      return strokes(h, w, seed, 8, 16, 2, 6, 0x6e617272u);
  }
  throw ValidationError("unknown mask kind");
}

Mask make_bucket_mask(int bucket, std::size_t h, std::size_t w, std::uint64_t seed) {
  if (bucket < 1 || bucket > 4) throw ValidationError("ratio bucket must be 1..4");
  if (h < 16 || w < 16) throw ValidationError("masks need h, w >= 16");
  const double hi = 0.1 * bucket;
  const double target = hi - 0.05;
  const int max_radius = std::max(2, static_cast<int>(std::min(h, w) / 32));
  CounterStream rng(seed, 0x62756b74u + static_cast<std::uint32_t>(bucket));
  Mask m(h, w);
  for (int attempt = 0; attempt < 4096; ++attempt) {
    Mask next = m;
    draw_stroke(next, rng, 1, max_radius);
    const double r = mask_ratio(next);
    if (r > hi) continue;  // overshoot: discard the stroke
    m = std::move(next);
    if (r >= target) return m;
  }
  throw ValidationError("could not reach the requested mask ratio");
}

double mask_ratio(const Mask& m) {
  if (m.pixels() == 0) return 0.0;
  return static_cast<double>(m.count()) / static_cast<double>(m.pixels());
}

std::optional<int> ratio_bucket(double ratio) {
  if (!(ratio > 0.0) || ratio > 0.4) return std::nullopt;
  return std::clamp(static_cast<int>(std::ceil(ratio * 10.0 - 1e-12)), 1, 4);
}

namespace {

using Color = std::array<double, 3>;

Color random_color(CounterStream& rng) {
  return {rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)};
}

struct Shape {
  int kind;  // 0 disk, 1 rectangle, 2 triangle
  double ci, cj, a, b, rot;
  Color color;

  bool contains(double i, double j) const {
    const double di = i - ci;
    const double dj = j - cj;
    const double u = std::cos(rot) * dj + std::sin(rot) * di;
    const double v = -std::sin(rot) * dj + std::cos(rot) * di;
    switch (kind) {
      case 0: return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
      case 1: return std::abs(u) <= a && std::abs(v) <= b;
      default: {
        // Isosceles triangle pointing up in its local frame.
        if (v < -b || v > b) return false;
        const double half = a * (v + b) / (2.0 * b);
        return std::abs(u) <= half;
      }
    }
  }
};

}  // namespace

ImageTensor synth_image(std::uint64_t seed, std::size_t index, std::size_t h, std::size_t w,
                        std::size_t channels) {
  if (channels != 1 && channels != 3) throw ValidationError("channels must be 1 or 3");
  if (h < 3 || w < 3) throw ValidationError("corpus images need h, w >= 3");
  CounterStream rng(seed, static_cast<std::uint32_t>(index) ^ 0xC0470500u);
  const double hd = static_cast<double>(h);
  const double wd = static_cast<double>(w);

  // Low-frequency background: blend of a linear ramp and a radial falloff.
  const Color c0 = random_color(rng);
  const Color c1 = random_color(rng);
  const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double ri = rng.uniform(0.2, 0.8) * hd;
  const double rj = rng.uniform(0.2, 0.8) * wd;
  const double radial_weight = rng.uniform(0.2, 0.8);

  // High-frequency content: 2-4 shapes, the first always overlapping the centre.
  const int n_shapes = rng.uniform_int(2, 4);
  std::vector<Shape> shapes;
  const double extent = std::min(hd, wd);
  for (int s = 0; s < n_shapes; ++s) {
    Shape sh;
    sh.kind = rng.uniform_int(0, 2);
    if (s == 0) {
      sh.ci = rng.uniform(0.4, 0.6) * hd;
      sh.cj = rng.uniform(0.4, 0.6) * wd;
    } else {
      sh.ci = rng.uniform(0.1, 0.9) * hd;
      sh.cj = rng.uniform(0.1, 0.9) * wd;
    }
    sh.a = rng.uniform(0.08, 0.22) * extent;
    sh.b = rng.uniform(0.08, 0.22) * extent;
    sh.rot = rng.uniform(0.0, std::numbers::pi);
    sh.color = random_color(rng);
    shapes.push_back(sh);
  }

  ImageTensor img(h, w, channels);
  const double diag = std::hypot(hd, wd);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const double y = static_cast<double>(i) + 0.5;
      const double x = static_cast<double>(j) + 0.5;
      const double lin = 0.5 + ((x - 0.5 * wd) * std::cos(theta) + (y - 0.5 * hd) * std::sin(theta)) / diag;
      const double rad = std::min(1.0, std::hypot(y - ri, x - rj) / (0.75 * diag));
      const double mix = std::clamp((1.0 - radial_weight) * lin + radial_weight * rad, 0.0, 1.0);
      Color px;
      for (int ch = 0; ch < 3; ++ch) px[ch] = (1.0 - mix) * c0[ch] + mix * c1[ch];
      for (const auto& sh : shapes) {
        if (sh.contains(y, x)) px = sh.color;
      }
      if (channels == 3) {
        for (std::size_t ch = 0; ch < 3; ++ch) img.at(i, j, ch) = std::clamp(px[ch], 0.0, 1.0);
      } else {
        img.at(i, j, 0) = std::clamp(0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2], 0.0, 1.0);
      }
    }
  }
  return img;
}

std::vector<ImageTensor> synth_corpus(std::uint64_t seed, std::size_t n, std::size_t h,
                                      std::size_t w, std::size_t channels) {
  std::vector<ImageTensor> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(synth_image(seed, k, h, w, channels));
  return out;
}

double mean_squared_error(const ImageTensor& a, const ImageTensor& b) {
  if (!a.same_shape(b)) throw ValidationError("shape mismatch in MSE");
  if (a.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t e = 0; e < a.size(); ++e) {
    const double d = a[e] - b[e];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

}  // namespace asyncdsb
