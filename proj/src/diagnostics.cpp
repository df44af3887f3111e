#include "asyncdsb/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "asyncdsb/error.hpp"
#include "asyncdsb/priorgrad.hpp"
#include "text_util.hpp"

namespace asyncdsb {

void Curve::validate() const {
  if (ts.size() != values.size()) throw ValidationError("curve ts and values differ in length");
  for (std::size_t k = 1; k < ts.size(); ++k) {
    if (!(ts[k] < ts[k - 1])) throw ValidationError("curve times must be strictly decreasing");
  }
}

double Curve::value_at(double t) const {
  if (ts.empty()) throw ValidationError("empty curve");
  if (t >= ts.front()) return values.front();
  if (t <= ts.back()) return values.back();
  // ts descending: find first index with ts[k] <= t.
  const auto it = std::lower_bound(ts.begin(), ts.end(), t, std::greater<>());
  const auto k = static_cast<std::size_t>(it - ts.begin());
  if (ts[k] == t) return values[k];
  const double f = (ts[k - 1] - t) / (ts[k - 1] - ts[k]);
  return values[k - 1] + f * (values[k] - values[k - 1]);
}

namespace {

constexpr std::size_t kWindow = 11;
constexpr double kWindowSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::vector<double> ssim_window() {
  std::vector<double> k(kWindow);
  const auto r = static_cast<double>(kWindow / 2);
  double sum = 0.0;
  for (std::size_t x = 0; x < kWindow; ++x) {
    const double d = static_cast<double>(x) - r;
    k[x] = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
    sum += k[x];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable weighted mean over the window anchored at every output position.
// valid: output (h-10) x (w-10); otherwise same-size with replicate padding.
std::vector<double> window_mean(const std::vector<double>& src, std::size_t h, std::size_t w,
                                bool valid, std::size_t& oh, std::size_t& ow) {
  static const auto k = ssim_window();
  const auto H = static_cast<std::ptrdiff_t>(h);
  const auto W = static_cast<std::ptrdiff_t>(w);
  const auto R = static_cast<std::ptrdiff_t>(kWindow / 2);
  oh = valid ? h - kWindow + 1 : h;
  ow = valid ? w - kWindow + 1 : w;
  const auto off = valid ? R : 0;
  std::vector<double> tmp(h * ow);
  for (std::ptrdiff_t i = 0; i < H; ++i) {
    for (std::ptrdiff_t oj = 0; oj < static_cast<std::ptrdiff_t>(ow); ++oj) {
      double acc = 0.0;
      for (std::ptrdiff_t d = -R; d <= R; ++d) {
        const auto j = std::clamp<std::ptrdiff_t>(oj + off + d, 0, W - 1);
        acc += k[static_cast<std::size_t>(d + R)] * src[static_cast<std::size_t>(i * W + j)];
      }
      tmp[static_cast<std::size_t>(i) * ow + static_cast<std::size_t>(oj)] = acc;
    }
  }
  std::vector<double> out(oh * ow);
  for (std::ptrdiff_t oi = 0; oi < static_cast<std::ptrdiff_t>(oh); ++oi) {
    for (std::size_t oj = 0; oj < ow; ++oj) {
      double acc = 0.0;
      for (std::ptrdiff_t d = -R; d <= R; ++d) {
        const auto i = std::clamp<std::ptrdiff_t>(oi + off + d, 0, H - 1);
        acc += k[static_cast<std::size_t>(d + R)] * tmp[static_cast<std::size_t>(i) * ow + oj];
      }
      out[static_cast<std::size_t>(oi) * ow + oj] = acc;
    }
  }
  return out;
}

double ssim_luma(const std::vector<double>& a, const std::vector<double>& b, std::size_t h,
                 std::size_t w) {
  const bool valid = h >= kWindow && w >= kWindow;
  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t p = 0; p < a.size(); ++p) {
    aa[p] = a[p] * a[p];
    bb[p] = b[p] * b[p];
    ab[p] = a[p] * b[p];
  }
  std::size_t oh = 0, ow = 0;
  const auto mu_a = window_mean(a, h, w, valid, oh, ow);
  const auto mu_b = window_mean(b, h, w, valid, oh, ow);
  const auto e_aa = window_mean(aa, h, w, valid, oh, ow);
  const auto e_bb = window_mean(bb, h, w, valid, oh, ow);
  const auto e_ab = window_mean(ab, h, w, valid, oh, ow);
  double acc = 0.0;
  for (std::size_t q = 0; q < mu_a.size(); ++q) {
    const double ma = mu_a[q];
    const double mb = mu_b[q];
    const double va = e_aa[q] - ma * ma;
    const double vb = e_bb[q] - mb * mb;
    const double cov = e_ab[q] - ma * mb;
    acc += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
           ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
  }
  return acc / static_cast<double>(mu_a.size());
}

struct Box {
  std::size_t i0, i1, j0, j1;  // inclusive
  std::size_t h() const { return i1 - i0 + 1; }
  std::size_t w() const { return j1 - j0 + 1; }
};

Box bounding_box(const Mask& region) {
  Box b{region.height(), 0, region.width(), 0};
  bool any = false;
  for (std::size_t i = 0; i < region.height(); ++i) {
    for (std::size_t j = 0; j < region.width(); ++j) {
      if (!region.at(i, j)) continue;
      any = true;
      b.i0 = std::min(b.i0, i);
      b.i1 = std::max(b.i1, i);
      b.j0 = std::min(b.j0, j);
      b.j1 = std::max(b.j1, j);
    }
  }
  if (!any) throw ValidationError("region is empty");
  return b;
}

}  // namespace

double ssim(const ImageTensor& a, const ImageTensor& b) {
  if (!a.same_shape(b)) throw ValidationError("SSIM inputs differ in shape");
  if (a.empty()) throw ValidationError("SSIM of empty images");
  return ssim_luma(luminance(a), luminance(b), a.height(), a.width());
}

Curve restoration_curve(const Trajectory& traj, const ImageTensor& x_g, const Mask& region) {
  if (traj.entries.empty()) throw ValidationError("empty trajectory");
  if (region.height() != x_g.height() || region.width() != x_g.width()) {
    throw ValidationError("region does not match the reference image");
  }
  const Box box = bounding_box(region);
  const auto lum_g = luminance(x_g);
  const std::size_t W = x_g.width();
  std::vector<double> ref(box.h() * box.w());
  for (std::size_t i = 0; i < box.h(); ++i) {
    for (std::size_t j = 0; j < box.w(); ++j) ref[i * box.w() + j] = lum_g[(box.i0 + i) * W + box.j0 + j];
  }

  Curve out;
  std::vector<double> crop(ref.size());
  for (const auto& e : traj.entries) {
    if (!e.state.same_shape(x_g)) throw ValidationError("trajectory state shape mismatch");
    const auto lum = luminance(e.state);
    for (std::size_t i = 0; i < box.h(); ++i) {
      for (std::size_t j = 0; j < box.w(); ++j) {
        const std::size_t p = (box.i0 + i) * W + box.j0 + j;
        crop[i * box.w() + j] = region[p] ? lum[p] : lum_g[p];
      }
    }
    out.ts.push_back(e.t);
    out.values.push_back(ssim_luma(crop, ref, box.h(), box.w()));
  }
  return out;
}

Curve normalized_derivative(const Curve& curve) {
  curve.validate();
  const std::size_t n = curve.size();
  if (n < 3) throw ValidationError("derivative needs at least 3 points");
  Curve out{curve.ts, std::vector<double>(n)};
  const auto& t = curve.ts;
  const auto& v = curve.values;
  // ds = -dt, so differences over t[i-1] - t[i+1] > 0 measure reverse-time progress.
  out.values[0] = (v[1] - v[0]) / (t[0] - t[1]);
  for (std::size_t i = 1; i + 1 < n; ++i) out.values[i] = (v[i + 1] - v[i - 1]) / (t[i - 1] - t[i + 1]);
  out.values[n - 1] = (v[n - 1] - v[n - 2]) / (t[n - 2] - t[n - 1]);
  double peak = 0.0;
  for (double d : out.values) peak = std::max(peak, std::abs(d));
  if (peak == 0.0) return out;
  for (auto& d : out.values) d /= peak;
  return out;
}

BandMasks band_split(const GradientMap& g, const Mask& region) {
  if (region.height() != g.height() || region.width() != g.width()) {
    throw ValidationError("region does not match the gradient map");
  }
  std::vector<std::size_t> idx;
  for (std::size_t p = 0; p < region.pixels(); ++p) {
    if (region[p]) idx.push_back(p);
  }
  if (idx.size() < 3) throw ValidationError("band split needs at least 3 region pixels");
  // Ascending by magnitude, then by row-major position.
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return g[a] < g[b]; });
  const std::size_t n = idx.size();
  const std::size_t cut_low = n / 3;
  const std::size_t cut_mid = 2 * n / 3;
  BandMasks bands{Mask(g.height(), g.width()), Mask(g.height(), g.width()),
                  Mask(g.height(), g.width())};
  for (std::size_t r = 0; r < n; ++r) {
    Mask& target = r < cut_low ? bands.low : (r < cut_mid ? bands.mid : bands.high);
    target.set(idx[r] / g.width(), idx[r] % g.width(), true);
  }
  return bands;
}

namespace {

Curve normalized_max(Curve c) {
  double peak = 0.0;
  for (double v : c.values) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    for (auto& v : c.values) v /= peak;
  }
  return c;
}

}  // namespace

Curve theoretical_curve(const NoiseSchedule& schedule) {
  const std::size_t T = schedule.steps();
  Curve c;
  for (std::size_t k = T + 1; k-- > 0;) {
    const double t = static_cast<double>(k) / static_cast<double>(T);
    c.ts.push_back(t);
    c.values.push_back(schedule.beta_at(t) / schedule.total_mass());
  }
  return normalized_max(std::move(c));
}

Curve theoretical_curve(const PixelScheduleField& field, const Mask* region) {
  const bool use_region = region != nullptr && region->any();
  if (use_region && (region->height() != field.height() || region->width() != field.width())) {
    throw ValidationError("region does not match the schedule field");
  }
  std::map<double, std::size_t> counts;
  for (std::size_t p = 0; p < field.tau().pixels(); ++p) {
    if (!use_region || (*region)[p]) ++counts[field.tau()[p]];
  }
  const std::size_t T = field.steps();
  Curve c;
  c.values.assign(T + 1, 0.0);
  for (std::size_t k = T + 1; k-- > 0;) c.ts.push_back(static_cast<double>(k) / static_cast<double>(T));
  std::size_t total = 0;
  for (const auto& [tau, n] : counts) {
    const auto s = build_shifted(field.config(), tau);
    for (std::size_t q = 0; q < c.ts.size(); ++q) {
      c.values[q] += static_cast<double>(n) * s.beta_at(c.ts[q]) / s.total_mass();
    }
    total += n;
  }
  for (auto& v : c.values) v /= static_cast<double>(total);
  return normalized_max(std::move(c));
}

double peak_time(const Curve& curve) {
  if (curve.ts.empty()) throw ValidationError("empty curve");
  const auto it = std::max_element(curve.values.begin(), curve.values.end());
  return curve.ts[static_cast<std::size_t>(it - curve.values.begin())];
}

MismatchReport mismatch_report(const Curve& theory, const Curve& empirical) {
  theory.validate();
  empirical.validate();
  if (theory.ts.empty() || empirical.ts.empty()) throw ValidationError("empty curve");
  const double lo = theory.ts.back();
  const double hi = theory.ts.front();
  Curve emp;
  Curve th;
  for (std::size_t k = 0; k < empirical.size(); ++k) {
    const double t = empirical.ts[k];
    if (t < lo || t > hi) continue;
    emp.ts.push_back(t);
    emp.values.push_back(empirical.values[k]);
    th.ts.push_back(t);
    th.values.push_back(theory.value_at(t));
  }
  if (emp.ts.size() < 2) throw ValidationError("curves do not share a time support");
  MismatchReport r;
  r.peak_lag = peak_time(emp) - peak_time(th);
  double gap = 0.0;
  for (std::size_t k = 0; k < emp.size(); ++k) gap += std::abs(emp.values[k] - th.values[k]);
  r.l1_gap = gap / static_cast<double>(emp.size());
  return r;
}

void export_csv(const Curve& curve, const std::filesystem::path& path) {
  curve.validate();
  std::string out = "t,value\n";
  char line[80];
  for (std::size_t k = 0; k < curve.size(); ++k) {
    std::snprintf(line, sizeof line, "%.17g,%.17g\n", curve.ts[k], curve.values[k]);
    out += line;
  }
  detail::write_text(path, out);
}

Curve import_curve_csv(const std::filesystem::path& path) {
  std::istringstream in(detail::read_text(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,value", 0) != 0) {
    throw ValidationError("curve CSV must start with a `t,value` header");
  }
  Curve c;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ValidationError("malformed curve CSV row");
    c.ts.push_back(detail::parse_double(line.substr(0, comma), "t"));
    c.values.push_back(detail::parse_double(line.substr(comma + 1), "value"));
  }
  c.validate();
  return c;
}

void write_json(const MismatchReport& report, const std::filesystem::path& path) {
  const nlohmann::json j{{"peak_lag", report.peak_lag}, {"l1_gap", report.l1_gap}};
  detail::write_text(path, j.dump(2) + "\n");
}

}  // namespace asyncdsb
