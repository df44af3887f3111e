#include "asyncdsb/asyncdsb.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <mutex>
#include <new>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "asyncdsb/bridge.hpp"
#include "asyncdsb/diagnostics.hpp"
#include "asyncdsb/error.hpp"
#include "asyncdsb/imaging.hpp"
#include "asyncdsb/io.hpp"
#include "asyncdsb/plot.hpp"
#include "asyncdsb/priorgrad.hpp"
#include "asyncdsb/schedule.hpp"

namespace ad = asyncdsb;

struct adsb_image_t {
  ad::ImageTensor v;
};
struct adsb_mask_t {
  ad::Mask v;
};
struct adsb_map_t {
  ad::GradientMap v;
};
struct adsb_trajectory_t {
  ad::Trajectory v;
};
struct adsb_curve_t {
  ad::Curve v;
};

struct adsb_schedule_t {
  template <class S>
  explicit adsb_schedule_t(S s) : v(std::move(s)) {}

  std::variant<ad::NoiseSchedule, ad::PixelScheduleField> v;

  const ad::VarianceTable& table() const {
    std::call_once(once, [this] {
      vt = std::visit([](const auto& s) { return ad::VarianceTable::from(s); }, v);
    });
    return *vt;
  }

 private:
  mutable std::once_flag once;
  mutable std::optional<ad::VarianceTable> vt;
};

namespace {

thread_local std::string g_last_error;

adsb_status fail(adsb_status code, const char* what) {
  g_last_error = what;
  return code;
}

template <class F>
adsb_status guarded(F&& f) noexcept {
  try {
    f();
    return ADSB_OK;
  } catch (const ad::SingularityError& e) {
    return fail(ADSB_ERR_SINGULAR, e.what());
  } catch (const ad::ValidationError& e) {
    return fail(ADSB_ERR_VALIDATION, e.what());
  } catch (const ad::ConfigError& e) {
    return fail(ADSB_ERR_CONFIG, e.what());
  } catch (const ad::IoError& e) {
    return fail(ADSB_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(ADSB_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(ADSB_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(ADSB_ERR_INTERNAL, "unknown error");
  }
}

template <class T>
const T& need(const T* p, const char* name) {
  if (p == nullptr) throw ad::ValidationError(std::string(name) + " must not be null");
  return *p;
}

template <class T>
T& need_mut(T* p, const char* name) {
  if (p == nullptr) throw ad::ValidationError(std::string(name) + " must not be null");
  return *p;
}

template <class T>
T** need_out(T** p) {
  if (p == nullptr) throw ad::ValidationError("output pointer must not be null");
  *p = nullptr;
  return p;
}

std::filesystem::path need_path(const char* path) {
  if (path == nullptr || *path == '\0') throw ad::IoError("empty path");
  return path;
}

void check_len(std::size_t have, std::size_t want) {
  if (have < want) {
    throw ad::ValidationError("buffer holds " + std::to_string(have) + " values, need " +
                              std::to_string(want));
  }
}

ad::ScheduleConfig to_cpp(const adsb_schedule_config& c) {
  return {c.steps, c.total_mass, c.beta_min, c.base_apex};
}

adsb_schedule_config to_c(const ad::ScheduleConfig& c) {
  return {static_cast<uint32_t>(c.steps), c.total_mass, c.beta_min, c.base_apex};
}

ad::AsyncConfig to_cpp(const adsb_async_config& c) {
  ad::AsyncConfig out;
  out.tau_min = c.tau_min;
  out.tau_max = c.tau_max;
  out.gauss_sigma = c.gauss_sigma;
  out.normalize_over_region = c.normalize_over_region != 0;
  return out;
}

ad::TauMap to_tau(const ad::GradientMap& m) {
  return {m.height(), m.width(), std::vector<double>(m.values().begin(), m.values().end())};
}

ad::GradientMap from_tau(const ad::TauMap& m) {
  return {m.height(), m.width(), std::vector<double>(m.values().begin(), m.values().end())};
}

std::vector<std::pair<std::size_t, std::size_t>> pixel_list(const uint32_t* ij, std::size_t n) {
  if (n > 0 && ij == nullptr) throw ad::ValidationError("pixel list must not be null");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.emplace_back(ij[2 * k], ij[2 * k + 1]);
  return out;
}

const ad::NoiseSchedule& pixel_schedule(const adsb_schedule& s, uint32_t i, uint32_t j,
                                        std::optional<ad::NoiseSchedule>& storage) {
  if (const auto* g = std::get_if<ad::NoiseSchedule>(&s.v)) return *g;
  const auto& field = std::get<ad::PixelScheduleField>(s.v);
  if (i >= field.height() || j >= field.width()) {
    throw ad::ValidationError("pixel (" + std::to_string(i) + ", " + std::to_string(j) +
                              ") outside the schedule field");
  }
  storage = field.pixel(i, j);
  return *storage;
}

class CallbackModel final : public ad::ScoreModel {
 public:
  CallbackModel(adsb_score_fn fn, void* user) : fn_(fn), user_(user) {}

  ad::ScoreTensor evaluate(const ad::ImageTensor& x_t, std::size_t step,
                           const ad::VarianceTable& vt) const override {
    std::vector<double> sigma(x_t.pixels());
    for (std::size_t p = 0; p < sigma.size(); ++p) sigma[p] = std::sqrt(vt.sigma2(step, p));
    ad::ScoreTensor out(x_t.height(), x_t.width(), x_t.channels());
    const int rc = fn_(user_, x_t.values().data(), static_cast<uint32_t>(x_t.height()),
                       static_cast<uint32_t>(x_t.width()), static_cast<uint32_t>(x_t.channels()),
                       static_cast<uint32_t>(step), static_cast<uint32_t>(vt.steps()),
                       sigma.data(), out.values().data());
    if (rc != 0) {
      throw ad::Error("score callback failed at step " + std::to_string(step) + " (code " +
                      std::to_string(rc) + ")");
    }
    return out;
  }

 private:
  adsb_score_fn fn_;
  void* user_;
};

template <class Handle, class Value>
Handle* wrap(Value&& v) {
  return new Handle{std::forward<Value>(v)};
}

}  // namespace

extern "C" {

const char* adsb_version(void) { return "0.1.0"; }

const char* adsb_last_error(void) { return g_last_error.c_str(); }

/* ---- schedules ---- */

void adsb_schedule_config_default(adsb_schedule_config* out) {
  if (out != nullptr) *out = to_c(ad::ScheduleConfig{});
}

adsb_status adsb_schedule_config_load(const char* path, adsb_schedule_config* inout) {
  return guarded([&] {
    auto& cfg = need_mut(inout, "config");
    cfg = to_c(ad::load_schedule_config(need_path(path), to_cpp(cfg)));
  });
}

adsb_status adsb_schedule_config_validate(const adsb_schedule_config* cfg) {
  return guarded([&] { to_cpp(need(cfg, "config")).validate(); });
}

adsb_status adsb_schedule_symmetric(const adsb_schedule_config* cfg, adsb_schedule** out) {
  return guarded([&] {
    need_out(out);
    *out = new adsb_schedule{ad::build_symmetric(to_cpp(need(cfg, "config")))};
  });
}

adsb_status adsb_schedule_shifted(const adsb_schedule_config* cfg, double tau,
                                  adsb_schedule** out) {
  return guarded([&] {
    need_out(out);
    *out = new adsb_schedule{ad::build_shifted(to_cpp(need(cfg, "config")), tau)};
  });
}

adsb_status adsb_schedule_field(const adsb_schedule_config* cfg, const adsb_map* tau,
                                adsb_schedule** out) {
  return guarded([&] {
    need_out(out);
    *out = new adsb_schedule{
        ad::build_field(to_cpp(need(cfg, "config")), to_tau(need(tau, "tau map").v))};
  });
}

void adsb_schedule_free(adsb_schedule* s) { delete s; }

int adsb_schedule_is_field(const adsb_schedule* s) {
  return s != nullptr && std::holds_alternative<ad::PixelScheduleField>(s->v) ? 1 : 0;
}

uint32_t adsb_schedule_steps(const adsb_schedule* s) {
  if (s == nullptr) return 0;
  return static_cast<uint32_t>(
      std::visit([](const auto& v) { return v.steps(); }, s->v));
}

double adsb_schedule_total_mass(const adsb_schedule* s) {
  if (s == nullptr) return 0.0;
  if (const auto* g = std::get_if<ad::NoiseSchedule>(&s->v)) return g->total_mass();
  return std::get<ad::PixelScheduleField>(s->v).config().total_mass;
}

adsb_status adsb_schedule_betas(const adsb_schedule* s, uint32_t i, uint32_t j, double* out,
                                size_t len) {
  return guarded([&] {
    std::optional<ad::NoiseSchedule> storage;
    const auto& sched = pixel_schedule(need(s, "schedule"), i, j, storage);
    check_len(out == nullptr ? 0 : len, sched.steps());
    std::copy(sched.betas().begin(), sched.betas().end(), out);
  });
}

adsb_status adsb_schedule_variances(const adsb_schedule* s, uint32_t i, uint32_t j,
                                    double* sigma2, double* sigma2_bar, size_t len) {
  return guarded([&] {
    const auto& sched = need(s, "schedule");
    const auto& vt = sched.table();
    std::size_t pixel = 0;
    if (vt.per_pixel()) {
      if (i >= vt.height() || j >= vt.width()) {
        throw ad::ValidationError("pixel outside the schedule field");
      }
      pixel = static_cast<std::size_t>(i) * vt.width() + j;
    }
    const auto& col = vt.column(pixel);
    if (sigma2 != nullptr) {
      check_len(len, col.sigma2.size());
      std::copy(col.sigma2.begin(), col.sigma2.end(), sigma2);
    }
    if (sigma2_bar != nullptr) {
      check_len(len, col.sigma2_bar.size());
      std::copy(col.sigma2_bar.begin(), col.sigma2_bar.end(), sigma2_bar);
    }
  });
}

adsb_status adsb_schedule_export_csv(const adsb_schedule* s, const char* path) {
  return guarded([&] {
    const auto& sched = need(s, "schedule");
    if (const auto* g = std::get_if<ad::NoiseSchedule>(&sched.v)) {
      ad::export_csv(*g, need_path(path));
    } else {
      ad::export_csv(std::get<ad::PixelScheduleField>(sched.v).mean_schedule(), need_path(path));
    }
  });
}

adsb_status adsb_schedule_export_field_csv(const adsb_schedule* s, const uint32_t* ij,
                                           size_t n_pixels, const char* path) {
  return guarded([&] {
    const auto& sched = need(s, "schedule");
    const auto* field = std::get_if<ad::PixelScheduleField>(&sched.v);
    if (field == nullptr) throw ad::ValidationError("schedule is not a per-pixel field");
    const auto pixels = pixel_list(ij, n_pixels);
    ad::export_csv(*field, pixels, need_path(path));
  });
}

adsb_status adsb_schedule_plot_svg(const adsb_schedule* s, const uint32_t* ij, size_t n_pixels,
                                   const char* path) {
  static constexpr const char* kColors[] = {"#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                            "#8c564b", "#e377c2", "#17becf", "#7f7f7f"};
  return guarded([&] {
    const auto& sched = need(s, "schedule");
    auto series_of = [](const ad::NoiseSchedule& ns, std::string label, std::string color,
                        bool dashed) {
      ad::PlotSeries ps{std::move(label), {}, {}, std::move(color), dashed};
      for (std::size_t k = 0; k < ns.steps(); ++k) {
        ps.xs.push_back(ns.midpoint(k));
        ps.ys.push_back(ns.betas()[k]);
      }
      return ps;
    };
    std::vector<ad::PlotSeries> series;
    ad::PlotAxes axes{"noise schedule", "t", "beta", 0.0, 1.0, std::nullopt, std::nullopt};
    if (const auto* g = std::get_if<ad::NoiseSchedule>(&sched.v)) {
      series.push_back(series_of(*g, "beta", "#1f77b4", false));
    } else {
      const auto& field = std::get<ad::PixelScheduleField>(sched.v);
      series.push_back(series_of(field.mean_schedule(), "pixel mean", "#1f77b4", true));
      const auto pixels = pixel_list(ij, n_pixels);
      for (std::size_t k = 0; k < pixels.size(); ++k) {
        const auto [i, j] = pixels[k];
        if (i >= field.height() || j >= field.width()) {
          throw ad::ValidationError("pixel outside the schedule field");
        }
        char label[64];
        std::snprintf(label, sizeof label, "(%zu,%zu) tau=%.3f", i, j, field.tau().at(i, j));
        series.push_back(series_of(field.pixel(i, j), label,
                                   kColors[k % std::size(kColors)], false));
      }
    }
    ad::write_line_plot_svg(need_path(path), axes, series);
  });
}

/* ---- images and masks ---- */

adsb_status adsb_image_create(uint32_t h, uint32_t w, uint32_t c, const double* data,
                              adsb_image** out) {
  return guarded([&] {
    need_out(out);
    if (h == 0 || w == 0) throw ad::ValidationError("image dimensions must be positive");
    if (c != 1 && c != 3) throw ad::ValidationError("images must have 1 or 3 channels");
    ad::ImageTensor t(h, w, c);
    if (data != nullptr) std::copy(data, data + t.size(), t.values().begin());
    *out = wrap<adsb_image>(std::move(t));
  });
}

adsb_status adsb_image_load_png(const char* path, adsb_image** out) {
  return guarded([&] {
    need_out(out);
    *out = wrap<adsb_image>(ad::load_png(need_path(path)));
  });
}

adsb_status adsb_image_save_png(const adsb_image* img, const char* path) {
  return guarded([&] { ad::save_png(need(img, "image").v, need_path(path)); });
}

adsb_status adsb_image_save_raw(const adsb_image* img, const char* path) {
  return guarded([&] { ad::save_raw(need(img, "image").v, need_path(path)); });
}

adsb_status adsb_image_load_raw(const char* path, adsb_image** out) {
  return guarded([&] {
    need_out(out);
    *out = wrap<adsb_image>(ad::load_raw(need_path(path)));
  });
}

void adsb_image_dims(const adsb_image* img, uint32_t* h, uint32_t* w, uint32_t* c) {
  const bool ok = img != nullptr;
  if (h != nullptr) *h = ok ? static_cast<uint32_t>(img->v.height()) : 0;
  if (w != nullptr) *w = ok ? static_cast<uint32_t>(img->v.width()) : 0;
  if (c != nullptr) *c = ok ? static_cast<uint32_t>(img->v.channels()) : 0;
}

adsb_status adsb_image_copy_data(const adsb_image* img, double* out, size_t len) {
  return guarded([&] {
    const auto& t = need(img, "image").v;
    check_len(out == nullptr ? 0 : len, t.size());
    std::copy(t.values().begin(), t.values().end(), out);
  });
}

void adsb_image_free(adsb_image* img) { delete img; }

adsb_status adsb_image_mse(const adsb_image* a, const adsb_image* b, double* out) {
  return guarded([&] {
    const double v = ad::mean_squared_error(need(a, "image a").v, need(b, "image b").v);
    need_mut(out, "output") = v;
  });
}

adsb_status adsb_ssim(const adsb_image* a, const adsb_image* b, double* out) {
  return guarded([&] {
    const double v = ad::ssim(need(a, "image a").v, need(b, "image b").v);
    need_mut(out, "output") = v;
  });
}

adsb_status adsb_synth_image(uint64_t seed, uint32_t index, uint32_t h, uint32_t w,
                             uint32_t channels, adsb_image** out) {
  return guarded([&] {
    need_out(out);
    *out = wrap<adsb_image>(ad::synth_image(seed, index, h, w, channels));
  });
}

adsb_status adsb_mask_kind_parse(const char* name, adsb_mask_kind* out) {
  return guarded([&] {
    const auto kind = ad::parse_mask_kind(&need(name, "mask kind name"));
    need_mut(out, "output") = static_cast<adsb_mask_kind>(kind);
  });
}

adsb_status adsb_mask_make(adsb_mask_kind kind, uint32_t h, uint32_t w, uint64_t seed,
                           adsb_mask** out) {
  return guarded([&] {
    need_out(out);
    if (kind < ADSB_MASK_CENTER || kind > ADSB_MASK_NARROW) {
      throw ad::ValidationError("unknown mask kind");
    }
    *out = wrap<adsb_mask>(ad::make_mask(static_cast<ad::MaskKind>(kind), h, w, seed));
  });
}

adsb_status adsb_mask_make_bucket(int bucket, uint32_t h, uint32_t w, uint64_t seed,
                                  adsb_mask** out) {
  return guarded([&] {
    need_out(out);
    *out = wrap<adsb_mask>(ad::make_bucket_mask(bucket, h, w, seed));
  });
}

adsb_status adsb_mask_create(uint32_t h, uint32_t w, const uint8_t* bits, adsb_mask** out) {
  return guarded([&] {
    need_out(out);
    if (h == 0 || w == 0) throw ad::ValidationError("mask dimensions must be positive");
    ad::Mask m(h, w);
    if (bits != nullptr) {
      for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) m.set(i, j, bits[i * w + j] != 0);
      }
    }
    *out = wrap<adsb_mask>(std::move(m));
  });
}

adsb_status adsb_mask_load_png(const char* path, adsb_mask** out) {
  return guarded([&] {
    need_out(out);
    *out = wrap<adsb_mask>(ad::load_mask_png(need_path(path)));
  });
}

adsb_status adsb_mask_save_png(const adsb_mask* m, const char* path) {
  return guarded([&] { ad::save_mask_png(need(m, "mask").v, need_path(path)); });
}

void adsb_mask_dims(const adsb_mask* m, uint32_t* h, uint32_t* w) {
  if (h != nullptr) *h = m != nullptr ? static_cast<uint32_t>(m->v.height()) : 0;
  if (w != nullptr) *w = m != nullptr ? static_cast<uint32_t>(m->v.width()) : 0;
}

adsb_status adsb_mask_copy_bits(const adsb_mask* m, uint8_t* out, size_t len) {
  return guarded([&] {
    const auto bits = need(m, "mask").v.bits();
    check_len(out == nullptr ? 0 : len, bits.size());
    std::copy(bits.begin(), bits.end(), out);
  });
}

double adsb_mask_ratio(const adsb_mask* m) { return m != nullptr ? ad::mask_ratio(m->v) : 0.0; }

int adsb_mask_ratio_bucket(double ratio) { return ad::ratio_bucket(ratio).value_or(0); }

void adsb_mask_free(adsb_mask* m) { delete m; }

adsb_status adsb_apply_mask(const adsb_image* x_g, const adsb_mask* m, adsb_image** out) {
  return guarded([&] {
    need_out(out);
    *out = wrap<adsb_image>(ad::apply_mask(need(x_g, "image").v, need(m, "mask").v));
  });
}

/* ---- gradient prior ---- */

void adsb_async_config_default(adsb_async_config* out) {
  if (out == nullptr) return;
  const ad::AsyncConfig d;
  *out = {d.tau_min, d.tau_max, d.gauss_sigma, d.normalize_over_region ? 1 : 0};
}

adsb_status adsb_async_config_validate(const adsb_async_config* cfg) {
  return guarded([&] { to_cpp(need(cfg, "config")).validate(); });
}

adsb_status adsb_map_create(uint32_t h, uint32_t w, const double* values, adsb_map** out) {
  return guarded([&] {
    need_out(out);
    if (h == 0 || w == 0) throw ad::ValidationError("map dimensions must be positive");
    ad::GradientMap m(h, w);
    if (values != nullptr) std::copy(values, values + m.pixels(), m.values().begin());
    *out = wrap<adsb_map>(std::move(m));
  });
}

void adsb_map_dims(const adsb_map* m, uint32_t* h, uint32_t* w) {
  if (h != nullptr) *h = m != nullptr ? static_cast<uint32_t>(m->v.height()) : 0;
  if (w != nullptr) *w = m != nullptr ? static_cast<uint32_t>(m->v.width()) : 0;
}

adsb_status adsb_map_copy_values(const adsb_map* m, double* out, size_t len) {
  return guarded([&] {
    const auto vals = need(m, "map").v.values();
    check_len(out == nullptr ? 0 : len, vals.size());
    std::copy(vals.begin(), vals.end(), out);
  });
}

adsb_status adsb_map_save_png16(const adsb_map* m, const char* path) {
  return guarded([&] { ad::save_map_png16(need(m, "map").v, need_path(path)); });
}

adsb_status adsb_map_load_png16(const char* path, adsb_map** out) {
  return guarded([&] {
    need_out(out);
    *out = wrap<adsb_map>(ad::load_map_png16<ad::GradientTag>(need_path(path)));
  });
}

adsb_status adsb_map_save_raw(const adsb_map* m, const char* path) {
  return guarded([&] { ad::save_raw(need(m, "map").v, need_path(path)); });
}

adsb_status adsb_map_load_raw(const char* path, adsb_map** out) {
  return guarded([&] {
    need_out(out);
    const auto t = ad::load_raw(need_path(path));
    if (t.channels() != 1) throw ad::ValidationError("raw map must have one channel");
    *out = wrap<adsb_map>(ad::GradientMap(
        t.height(), t.width(), std::vector<double>(t.values().begin(), t.values().end())));
  });
}

void adsb_map_free(adsb_map* m) { delete m; }

adsb_status adsb_sobel_magnitude(const adsb_image* img, adsb_map** out) {
  return guarded([&] {
    need_out(out);
    *out = wrap<adsb_map>(ad::sobel_magnitude(need(img, "image").v));
  });
}

adsb_status adsb_gaussian_filter(const adsb_map* m, double sigma, adsb_map** out) {
  return guarded([&] {
    need_out(out);
    *out = wrap<adsb_map>(ad::gaussian_filter(need(m, "map").v, sigma));
  });
}

adsb_status adsb_complete_gradient(const adsb_image* x_c, const adsb_mask* x_m,
                                   const adsb_map* x_cg, adsb_completer completer,
                                   const adsb_image* ground_truth, adsb_map** out) {
  return guarded([&] {
    need_out(out);
    if (completer != ADSB_COMPLETER_ORACLE && completer != ADSB_COMPLETER_HARMONIC) {
      throw ad::ValidationError("unknown completer");
    }
    const auto kind =
        completer == ADSB_COMPLETER_ORACLE ? ad::Completer::oracle : ad::Completer::harmonic;
    *out = wrap<adsb_map>(ad::complete_gradient(need(x_c, "x_c").v, need(x_m, "mask").v,
                                                need(x_cg, "gradient").v, kind,
                                                ground_truth ? &ground_truth->v : nullptr));
  });
}

adsb_status adsb_tau_from_gradient(const adsb_map* g_hat, const adsb_async_config* cfg,
                                   const adsb_mask* region, adsb_map** out) {
  return guarded([&] {
    need_out(out);
    const auto tau = ad::tau_from_gradient(need(g_hat, "gradient").v, to_cpp(need(cfg, "config")),
                                           region ? &region->v : nullptr);
    *out = wrap<adsb_map>(from_tau(tau));
  });
}

/* ---- reverse sampling ---- */

void adsb_sampler_config_default(adsb_sampler_config* out) {
  if (out == nullptr) return;
  const ad::SamplerConfig d;
  *out = {static_cast<uint32_t>(d.steps), d.seed, d.clamp_visible ? 1 : 0,
          static_cast<uint32_t>(d.record_every)};
}

adsb_status adsb_run_reverse(const adsb_image* x1, const adsb_score_model* model,
                             const adsb_schedule* schedule, const adsb_sampler_config* cfg,
                             const adsb_mask* mask, const adsb_image* visible,
                             adsb_trajectory** out) {
  return guarded([&] {
    need_out(out);
    const auto& start = need(x1, "x1").v;
    const auto& m = need(model, "score model");
    const auto& c = need(cfg, "sampler config");
    const auto& sched = need(schedule, "schedule");

    ad::SamplerConfig sc;
    sc.steps = c.steps;
    sc.seed = c.seed;
    sc.clamp_visible = c.clamp_visible != 0;
    sc.record_every = c.record_every;

    std::optional<ad::AnalyticOracle> oracle;
    std::optional<ad::HarmonicPriorModel> harmonic;
    std::optional<CallbackModel> callback;
    const ad::ScoreModel* score = nullptr;
    switch (m.kind) {
      case ADSB_SCORE_ORACLE:
        if (m.x0 == nullptr) throw ad::ConfigError("the oracle score model requires x0");
        score = &oracle.emplace(m.x0->v);
        break;
      case ADSB_SCORE_HARMONIC:
        score = &harmonic.emplace(start, need(mask, "mask for the harmonic model").v);
        break;
      case ADSB_SCORE_CALLBACK:
        if (m.fn == nullptr) throw ad::ValidationError("score callback must not be null");
        score = &callback.emplace(m.fn, m.user);
        break;
      default:
        throw ad::ValidationError("unknown score model kind");
    }

    std::optional<ad::VisibleData> vis;
    if (mask != nullptr && visible != nullptr) vis.emplace(ad::VisibleData{mask->v, visible->v});
    if (sc.clamp_visible && !vis) {
      throw ad::ConfigError("clamp_visible requires both a mask and the visible image");
    }
    *out = wrap<adsb_trajectory>(
        ad::run_reverse(start, *score, sched.table(), sc, vis ? &*vis : nullptr));
  });
}

size_t adsb_trajectory_size(const adsb_trajectory* tr) {
  return tr != nullptr ? tr->v.entries.size() : 0;
}

uint32_t adsb_trajectory_steps(const adsb_trajectory* tr) {
  return tr != nullptr ? static_cast<uint32_t>(tr->v.steps) : 0;
}

adsb_status adsb_trajectory_entry(const adsb_trajectory* tr, size_t index, uint32_t* step,
                                  double* t, adsb_image** state) {
  return guarded([&] {
    const auto& entries = need(tr, "trajectory").v.entries;
    if (index >= entries.size()) throw ad::ValidationError("trajectory index out of range");
    const auto& e = entries[index];
    if (step != nullptr) *step = static_cast<uint32_t>(e.step);
    if (t != nullptr) *t = e.t;
    if (state != nullptr) *state = wrap<adsb_image>(e.state);
  });
}

adsb_status adsb_trajectory_export_csv(const adsb_trajectory* tr, const adsb_image* x_g,
                                       const adsb_mask* region, const char* path) {
  return guarded([&] {
    const auto& traj = need(tr, "trajectory").v;
    const auto file = need_path(path);
    std::optional<ad::Curve> region_ssim;
    if (x_g != nullptr && region != nullptr) {
      region_ssim = ad::restoration_curve(traj, x_g->v, region->v);
    }
    std::string text = "step,t,mse,ssim\n";
    char line[160];
    for (std::size_t k = 0; k < traj.entries.size(); ++k) {
      const auto& e = traj.entries[k];
      if (x_g == nullptr) {
        std::snprintf(line, sizeof line, "%zu,%.17g,,\n", e.step, e.t);
      } else {
        const double s = region_ssim ? region_ssim->values[k] : ad::ssim(e.state, x_g->v);
        std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g\n", e.step, e.t,
                      ad::mean_squared_error(e.state, x_g->v), s);
      }
      text += line;
    }
    std::FILE* f = std::fopen(file.c_str(), "wb");
    if (f == nullptr) throw ad::IoError("cannot open " + file.string() + " for writing");
    const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
    if (std::fclose(f) != 0 || !ok) throw ad::IoError("write failed: " + file.string());
  });
}

adsb_status adsb_trajectory_save_pngs(const adsb_trajectory* tr, const char* dir) {
  return guarded([&] {
    const auto& traj = need(tr, "trajectory").v;
    const auto base = need_path(dir);
    std::error_code ec;
    std::filesystem::create_directories(base, ec);
    if (ec) throw ad::IoError("cannot create " + base.string() + ": " + ec.message());
    char name[32];
    for (const auto& e : traj.entries) {
      std::snprintf(name, sizeof name, "state_t%04zu.png", e.step);
      ad::save_png(e.state, base / name);
    }
  });
}

adsb_status adsb_trajectory_save_raw(const adsb_trajectory* tr, const char* path) {
  return guarded([&] { ad::save_trajectory_raw(need(tr, "trajectory").v, need_path(path)); });
}

adsb_status adsb_trajectory_load_raw(const char* path, adsb_trajectory** out) {
  return guarded([&] {
    need_out(out);
    *out = wrap<adsb_trajectory>(ad::load_trajectory_raw(need_path(path)));
  });
}

void adsb_trajectory_free(adsb_trajectory* tr) { delete tr; }

/* ---- diagnostics ---- */

adsb_status adsb_curve_create(const double* ts, const double* values, size_t n,
                              adsb_curve** out) {
  return guarded([&] {
    need_out(out);
    if (n > 0 && (ts == nullptr || values == nullptr)) {
      throw ad::ValidationError("curve arrays must not be null");
    }
    ad::Curve c{std::vector<double>(ts, ts + n), std::vector<double>(values, values + n)};
    c.validate();
    *out = wrap<adsb_curve>(std::move(c));
  });
}

size_t adsb_curve_size(const adsb_curve* c) { return c != nullptr ? c->v.size() : 0; }

adsb_status adsb_curve_copy(const adsb_curve* c, double* ts, double* values, size_t n) {
  return guarded([&] {
    const auto& curve = need(c, "curve").v;
    if (ts != nullptr) {
      check_len(n, curve.size());
      std::copy(curve.ts.begin(), curve.ts.end(), ts);
    }
    if (values != nullptr) {
      check_len(n, curve.size());
      std::copy(curve.values.begin(), curve.values.end(), values);
    }
  });
}

adsb_status adsb_curve_peak_time(const adsb_curve* c, double* out) {
  return guarded([&] {
    const double v = ad::peak_time(need(c, "curve").v);
    need_mut(out, "output") = v;
  });
}

adsb_status adsb_curve_export_csv(const adsb_curve* c, const char* path) {
  return guarded([&] { ad::export_csv(need(c, "curve").v, need_path(path)); });
}

adsb_status adsb_curve_load_csv(const char* path, adsb_curve** out) {
  return guarded([&] {
    need_out(out);
    *out = wrap<adsb_curve>(ad::import_curve_csv(need_path(path)));
  });
}

void adsb_curve_free(adsb_curve* c) { delete c; }

adsb_status adsb_restoration_curve(const adsb_trajectory* tr, const adsb_image* x_g,
                                   const adsb_mask* region, adsb_curve** out) {
  return guarded([&] {
    need_out(out);
    *out = wrap<adsb_curve>(ad::restoration_curve(need(tr, "trajectory").v,
                                                  need(x_g, "x_g").v, need(region, "region").v));
  });
}

adsb_status adsb_normalized_derivative(const adsb_curve* c, adsb_curve** out) {
  return guarded([&] {
    need_out(out);
    *out = wrap<adsb_curve>(ad::normalized_derivative(need(c, "curve").v));
  });
}

adsb_status adsb_theoretical_curve(const adsb_schedule* s, const adsb_mask* region,
                                   adsb_curve** out) {
  return guarded([&] {
    need_out(out);
    const auto& sched = need(s, "schedule");
    if (const auto* g = std::get_if<ad::NoiseSchedule>(&sched.v)) {
      *out = wrap<adsb_curve>(ad::theoretical_curve(*g));
    } else {
      *out = wrap<adsb_curve>(ad::theoretical_curve(std::get<ad::PixelScheduleField>(sched.v),
                                                    region ? &region->v : nullptr));
    }
  });
}

adsb_status adsb_band_split(const adsb_map* g, const adsb_mask* region, adsb_mask** high,
                            adsb_mask** mid, adsb_mask** low) {
  return guarded([&] {
    need_out(high);
    need_out(mid);
    need_out(low);
    auto bands = ad::band_split(need(g, "gradient").v, need(region, "region").v);
    auto h = std::make_unique<adsb_mask>(adsb_mask{std::move(bands.high)});
    auto m = std::make_unique<adsb_mask>(adsb_mask{std::move(bands.mid)});
    auto l = std::make_unique<adsb_mask>(adsb_mask{std::move(bands.low)});
    *high = h.release();
    *mid = m.release();
    *low = l.release();
  });
}

adsb_status adsb_mismatch_report(const adsb_curve* theory, const adsb_curve* empirical,
                                 adsb_mismatch* out) {
  return guarded([&] {
    const auto r = ad::mismatch_report(need(theory, "theory").v, need(empirical, "empirical").v);
    need_mut(out, "output") = {r.peak_lag, r.l1_gap};
  });
}

adsb_status adsb_mismatch_write_json(const adsb_mismatch* m, const char* path) {
  return guarded([&] {
    const auto& r = need(m, "report");
    ad::write_json(ad::MismatchReport{r.peak_lag, r.l1_gap}, need_path(path));
  });
}

adsb_status adsb_plot_curves_svg(const char* path, const char* title, const char* y_label,
                                 const adsb_plot_series* series, size_t n) {
  return guarded([&] {
    if (n > 0 && series == nullptr) throw ad::ValidationError("series must not be null");
    std::vector<ad::PlotSeries> out;
    for (std::size_t k = 0; k < n; ++k) {
      const auto& c = need(series[k].curve, "series curve").v;
      out.push_back({series[k].label ? series[k].label : "", c.ts, c.values,
                     series[k].color ? series[k].color : "#1f77b4", series[k].dashed != 0});
    }
    ad::PlotAxes axes{title ? title : "", "t", y_label ? y_label : "", 1.0, 0.0, -1.0, 1.0};
    ad::write_line_plot_svg(need_path(path), axes, out);
  });
}

adsb_status adsb_plot_heatmap_svg(const char* path, const char* title,
                                  const char* const* row_labels, size_t rows,
                                  const char* const* col_labels, size_t cols,
                                  const double* values, const char* row_axis,
                                  const char* col_axis) {
  return guarded([&] {
    if (rows == 0 || cols == 0) throw ad::ValidationError("heatmap must be non-empty");
    need(row_labels, "row labels");
    need(col_labels, "column labels");
    need(values, "values");
    std::vector<std::string> rl(row_labels, row_labels + rows);
    std::vector<std::string> cl(col_labels, col_labels + cols);
    std::vector<std::vector<double>> grid(rows, std::vector<double>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) grid[r][c] = values[r * cols + c];
    }
    ad::write_heatmap_svg(need_path(path), title ? title : "", rl, cl, grid,
                          row_axis ? row_axis : "", col_axis ? col_axis : "");
  });
}

}  // extern "C"
