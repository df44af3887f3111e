#include <doctest.h>

#include <asyncdsb/asyncdsb.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "asyncdsb_test_capi";
  fs::create_directories(dir);
  return (dir / name).string();
}

adsb_schedule_config small_config(uint32_t steps) {
  adsb_schedule_config cfg;
  adsb_schedule_config_default(&cfg);
  cfg.steps = steps;
  return cfg;
}

// Callback that reproduces the exact oracle from x0 passed through `user`.
int oracle_callback(void* user, const double* x_t, uint32_t h, uint32_t w, uint32_t c, uint32_t,
                    uint32_t, const double* sigma, double* out) {
  const auto* x0 = static_cast<const std::vector<double>*>(user);
  for (std::size_t p = 0; p < std::size_t{h} * w; ++p) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t e = p * c + ch;
      out[e] = (x_t[e] - (*x0)[e]) / sigma[p];
    }
  }
  return 0;
}

int failing_callback(void*, const double*, uint32_t, uint32_t, uint32_t, uint32_t, uint32_t,
                     const double*, double*) {
  return 7;
}

std::vector<double> image_values(const adsb_image* img) {
  uint32_t h = 0, w = 0, c = 0;
  adsb_image_dims(img, &h, &w, &c);
  std::vector<double> v(std::size_t{h} * w * c);
  REQUIRE(adsb_image_copy_data(img, v.data(), v.size()) == ADSB_OK);
  return v;
}

}  // namespace

TEST_CASE("schedule handles expose betas and variances") {
  adsb_schedule_config cfg = small_config(4);
  cfg.beta_min = 0.0;
  adsb_schedule* s = nullptr;
  REQUIRE(adsb_schedule_symmetric(&cfg, &s) == ADSB_OK);
  CHECK(adsb_schedule_steps(s) == 4);
  CHECK(adsb_schedule_is_field(s) == 0);
  double betas[4];
  REQUIRE(adsb_schedule_betas(s, 0, 0, betas, 4) == ADSB_OK);
  CHECK(betas[0] == doctest::Approx(0.5));
  CHECK(betas[1] == doctest::Approx(1.5));
  double s2[5], sb2[5];
  REQUIRE(adsb_schedule_variances(s, 0, 0, s2, sb2, 5) == ADSB_OK);
  for (int k = 0; k < 5; ++k) CHECK(s2[k] + sb2[k] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(adsb_schedule_betas(s, 0, 0, betas, 3) == ADSB_ERR_VALIDATION);
  REQUIRE(adsb_schedule_export_csv(s, temp_path("s.csv").c_str()) == ADSB_OK);
  CHECK(adsb_schedule_export_csv(s, "") == ADSB_ERR_IO);
  adsb_schedule_free(s);
}

TEST_CASE("status codes follow the error families") {
  adsb_schedule_config cfg = small_config(10);
  adsb_schedule* s = nullptr;
  CHECK(adsb_schedule_shifted(&cfg, 1.5, &s) == ADSB_ERR_VALIDATION);
  CHECK(s == nullptr);
  CHECK(std::strlen(adsb_last_error()) > 0);
  cfg.steps = 1;
  CHECK(adsb_schedule_symmetric(&cfg, &s) == ADSB_ERR_CONFIG);
  CHECK(adsb_schedule_symmetric(nullptr, &s) == ADSB_ERR_VALIDATION);
  adsb_image* img = nullptr;
  CHECK(adsb_image_load_png(temp_path("missing.png").c_str(), &img) == ADSB_ERR_IO);

  adsb_async_config acfg;
  adsb_async_config_default(&acfg);
  acfg.tau_min = 0.6;
  acfg.tau_max = 0.4;
  CHECK(adsb_async_config_validate(&acfg) == ADSB_ERR_VALIDATION);

  adsb_image* x = nullptr;
  REQUIRE(adsb_synth_image(1, 0, 16, 16, 3, &x) == ADSB_OK);
  adsb_mask* m = nullptr;
  REQUIRE(adsb_mask_make(ADSB_MASK_CENTER, 16, 16, 0, &m) == ADSB_OK);
  adsb_map* g = nullptr;
  REQUIRE(adsb_sobel_magnitude(x, &g) == ADSB_OK);
  adsb_map* out = nullptr;
  CHECK(adsb_complete_gradient(x, m, g, ADSB_COMPLETER_ORACLE, nullptr, &out) == ADSB_ERR_CONFIG);
  CHECK(adsb_complete_gradient(x, m, g, ADSB_COMPLETER_ORACLE, x, &out) == ADSB_OK);
  adsb_map_free(out);

  cfg = small_config(10);
  REQUIRE(adsb_schedule_symmetric(&cfg, &s) == ADSB_OK);
  adsb_sampler_config scfg;
  adsb_sampler_config_default(&scfg);
  scfg.steps = 10;
  adsb_score_model model{ADSB_SCORE_ORACLE, nullptr, nullptr, nullptr};
  adsb_trajectory* tr = nullptr;
  CHECK(adsb_run_reverse(x, &model, s, &scfg, m, x, &tr) == ADSB_ERR_CONFIG);
  model.x0 = x;
  scfg.clamp_visible = 1;
  CHECK(adsb_run_reverse(x, &model, s, &scfg, nullptr, nullptr, &tr) == ADSB_ERR_CONFIG);
  adsb_schedule_free(s);
  adsb_map_free(g);
  adsb_mask_free(m);
  adsb_image_free(x);

  adsb_curve* c = nullptr;
  const double ts[] = {1.0, 0.5, 0.0};
  const double vs[] = {0.0, 1.0, 0.0};
  REQUIRE(adsb_curve_create(ts, vs, 3, &c) == ADSB_OK);
  adsb_curve* d = nullptr;
  REQUIRE(adsb_normalized_derivative(c, &d) == ADSB_OK);
  adsb_curve_free(d);
  const double bad_ts[] = {0.0, 0.5, 1.0};
  adsb_curve* bad = nullptr;
  CHECK(adsb_curve_create(bad_ts, vs, 3, &bad) == ADSB_ERR_VALIDATION);
  adsb_curve_free(c);
  adsb_version();
  adsb_image_free(nullptr);
  adsb_schedule_free(nullptr);
}

TEST_CASE("a failing score callback is an internal error") {
  adsb_image* x = nullptr;
  REQUIRE(adsb_synth_image(1, 0, 8, 8, 1, &x) == ADSB_OK);
  adsb_schedule_config cfg = small_config(10);
  adsb_schedule* s = nullptr;
  REQUIRE(adsb_schedule_symmetric(&cfg, &s) == ADSB_OK);
  adsb_sampler_config scfg;
  adsb_sampler_config_default(&scfg);
  scfg.steps = 10;
  scfg.clamp_visible = 0;
  adsb_score_model model{ADSB_SCORE_CALLBACK, nullptr, failing_callback, nullptr};
  adsb_trajectory* tr = nullptr;
  CHECK(adsb_run_reverse(x, &model, s, &scfg, nullptr, nullptr, &tr) == ADSB_ERR_INTERNAL);
  CHECK(std::string(adsb_last_error()).find("7") != std::string::npos);
  adsb_schedule_free(s);
  adsb_image_free(x);
}

TEST_CASE("a callback model equal to the oracle gives the oracle trajectory") {
  adsb_image* x0 = nullptr;
  REQUIRE(adsb_synth_image(3, 1, 24, 24, 3, &x0) == ADSB_OK);
  adsb_mask* m = nullptr;
  REQUIRE(adsb_mask_make(ADSB_MASK_CENTER, 24, 24, 0, &m) == ADSB_OK);
  adsb_image* x1 = nullptr;
  REQUIRE(adsb_apply_mask(x0, m, &x1) == ADSB_OK);

  // Asynchronous schedule from the oracle gradient.
  adsb_map* g = nullptr;
  REQUIRE(adsb_sobel_magnitude(x1, &g) == ADSB_OK);
  adsb_map* g_hat = nullptr;
  REQUIRE(adsb_complete_gradient(x1, m, g, ADSB_COMPLETER_ORACLE, x0, &g_hat) == ADSB_OK);
  adsb_async_config acfg;
  adsb_async_config_default(&acfg);
  adsb_map* tau = nullptr;
  REQUIRE(adsb_tau_from_gradient(g_hat, &acfg, m, &tau) == ADSB_OK);
  adsb_schedule_config cfg = small_config(100);
  adsb_schedule* field = nullptr;
  REQUIRE(adsb_schedule_field(&cfg, tau, &field) == ADSB_OK);
  CHECK(adsb_schedule_is_field(field) == 1);

  adsb_sampler_config scfg;
  adsb_sampler_config_default(&scfg);
  scfg.steps = 100;
  scfg.seed = 12;
  scfg.record_every = 10;

  const adsb_score_model oracle{ADSB_SCORE_ORACLE, x0, nullptr, nullptr};
  auto truth = image_values(x0);
  const adsb_score_model callback{ADSB_SCORE_CALLBACK, nullptr, oracle_callback, &truth};
  adsb_trajectory* a = nullptr;
  adsb_trajectory* b = nullptr;
  REQUIRE(adsb_run_reverse(x1, &oracle, field, &scfg, m, x1, &a) == ADSB_OK);
  REQUIRE(adsb_run_reverse(x1, &callback, field, &scfg, m, x1, &b) == ADSB_OK);
  REQUIRE(adsb_trajectory_size(a) == 11);
  REQUIRE(adsb_trajectory_size(b) == 11);
  for (size_t n = 0; n < 11; ++n) {
    uint32_t sa = 0, sb = 0;
    double ta = 0, tb = 0;
    adsb_image* ia = nullptr;
    adsb_image* ib = nullptr;
    REQUIRE(adsb_trajectory_entry(a, n, &sa, &ta, &ia) == ADSB_OK);
    REQUIRE(adsb_trajectory_entry(b, n, &sb, &tb, &ib) == ADSB_OK);
    CHECK(sa == sb);
    CHECK(ta == tb);
    const auto va = image_values(ia);
    const auto vb = image_values(ib);
    for (std::size_t e = 0; e < va.size(); ++e) CHECK(va[e] == doctest::Approx(vb[e]).epsilon(1e-12));
    adsb_image_free(ia);
    adsb_image_free(ib);
  }
  CHECK(adsb_trajectory_entry(a, 11, nullptr, nullptr, nullptr) == ADSB_ERR_VALIDATION);

  adsb_image* last = nullptr;
  REQUIRE(adsb_trajectory_entry(a, 10, nullptr, nullptr, &last) == ADSB_OK);
  double mse = 1.0;
  REQUIRE(adsb_image_mse(last, x0, &mse) == ADSB_OK);
  CHECK(mse < 1e-3);

  REQUIRE(adsb_trajectory_export_csv(a, x0, m, temp_path("traj.csv").c_str()) == ADSB_OK);
  REQUIRE(adsb_trajectory_save_raw(a, temp_path("traj.raw").c_str()) == ADSB_OK);
  adsb_trajectory* loaded = nullptr;
  REQUIRE(adsb_trajectory_load_raw(temp_path("traj.raw").c_str(), &loaded) == ADSB_OK);
  CHECK(adsb_trajectory_size(loaded) == 11);
  CHECK(adsb_trajectory_steps(loaded) == 100);

  adsb_curve* emp = nullptr;
  REQUIRE(adsb_restoration_curve(a, x0, m, &emp) == ADSB_OK);
  adsb_curve* d = nullptr;
  REQUIRE(adsb_normalized_derivative(emp, &d) == ADSB_OK);
  adsb_curve* theory = nullptr;
  REQUIRE(adsb_theoretical_curve(field, m, &theory) == ADSB_OK);
  adsb_mismatch mm{};
  REQUIRE(adsb_mismatch_report(theory, d, &mm) == ADSB_OK);
  CHECK(mm.l1_gap >= 0.0);
  CHECK(std::abs(mm.peak_lag) <= 1.0);
  REQUIRE(adsb_mismatch_write_json(&mm, temp_path("mm.json").c_str()) == ADSB_OK);
  const adsb_plot_series series[] = {{"theory", theory, "#000000", 1}, {"async", d, "#1f77b4", 0}};
  REQUIRE(adsb_plot_curves_svg(temp_path("overlay.svg").c_str(), "overlay", "speed", series, 2) == ADSB_OK);

  adsb_mask *hi = nullptr, *mid = nullptr, *lo = nullptr;
  REQUIRE(adsb_band_split(g_hat, m, &hi, &mid, &lo) == ADSB_OK);
  uint32_t mh = 0, mw = 0;
  adsb_mask_dims(hi, &mh, &mw);
  CHECK(mh == 24);
  CHECK(adsb_mask_ratio(hi) + adsb_mask_ratio(mid) + adsb_mask_ratio(lo) == doctest::Approx(adsb_mask_ratio(m)));

  for (auto* c : {emp, d, theory}) adsb_curve_free(c);
  for (auto* k : {hi, mid, lo, m}) adsb_mask_free(k);
  for (auto* t : {a, b, loaded}) adsb_trajectory_free(t);
  for (auto* mp : {g, g_hat, tau}) adsb_map_free(mp);
  for (auto* im : {x0, x1, last}) adsb_image_free(im);
  adsb_schedule_free(field);
}

TEST_CASE("images, masks and maps round-trip through files") {
  const double px[] = {0.0, 1.0, 0.2, 0.4, 0.6, 0.8};
  adsb_image* img = nullptr;
  REQUIRE(adsb_image_create(2, 3, 1, px, &img) == ADSB_OK);
  REQUIRE(adsb_image_save_raw(img, temp_path("img.raw").c_str()) == ADSB_OK);
  adsb_image* back = nullptr;
  REQUIRE(adsb_image_load_raw(temp_path("img.raw").c_str(), &back) == ADSB_OK);
  const auto v = image_values(back);
  for (int e = 0; e < 6; ++e) CHECK(v[static_cast<std::size_t>(e)] == doctest::Approx(px[e]).epsilon(1e-7));
  CHECK(adsb_image_create(2, 3, 2, px, &back) == ADSB_ERR_VALIDATION);

  const uint8_t bits[] = {1, 0, 0, 1, 1, 0};
  adsb_mask* m = nullptr;
  REQUIRE(adsb_mask_create(2, 3, bits, &m) == ADSB_OK);
  REQUIRE(adsb_mask_save_png(m, temp_path("m.png").c_str()) == ADSB_OK);
  adsb_mask* m2 = nullptr;
  REQUIRE(adsb_mask_load_png(temp_path("m.png").c_str(), &m2) == ADSB_OK);
  uint8_t out[6];
  REQUIRE(adsb_mask_copy_bits(m2, out, 6) == ADSB_OK);
  CHECK(std::memcmp(out, bits, 6) == 0);
  CHECK(adsb_mask_ratio_bucket(0.15) == 2);
  CHECK(adsb_mask_ratio_bucket(0.5) == 0);
  adsb_mask_kind kind;
  CHECK(adsb_mask_kind_parse("narrow", &kind) == ADSB_OK);
  CHECK(kind == ADSB_MASK_NARROW);
  CHECK(adsb_mask_kind_parse("blob", &kind) == ADSB_ERR_VALIDATION);

  adsb_map* map = nullptr;
  REQUIRE(adsb_map_create(2, 3, px, &map) == ADSB_OK);
  REQUIRE(adsb_map_save_png16(map, temp_path("map.png").c_str()) == ADSB_OK);
  adsb_map* map2 = nullptr;
  REQUIRE(adsb_map_load_png16(temp_path("map.png").c_str(), &map2) == ADSB_OK);
  double mv[6];
  REQUIRE(adsb_map_copy_values(map2, mv, 6) == ADSB_OK);
  for (int e = 0; e < 6; ++e) CHECK(std::abs(mv[e] - px[e]) <= 1.0 / 65535.0);

  adsb_image_free(img);
  adsb_image_free(back);
  adsb_mask_free(m);
  adsb_mask_free(m2);
  adsb_map_free(map);
  adsb_map_free(map2);
}
