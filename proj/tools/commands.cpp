#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <thread>

#include "handles.hpp"

namespace cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

[[noreturn]] void fail(adsb_status s, const std::string& msg) { throw Failure(s, msg); }

void ensure_dir(const Path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) fail(ADSB_ERR_IO, "cannot create " + p.string() + ": " + ec.message());
}

void write_text(const Path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
  f.close();
  if (!f) fail(ADSB_ERR_IO, "cannot write " + p.string());
}

std::string absolute_or_empty(const std::string& p) {
  return p.empty() ? p : fs::absolute(p).lexically_normal().string();
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::string num(double v) { return fmt("%.17g", v); }

// Output directory plus the files written into it, for the manifest.
class Run {
 public:
  explicit Run(Path dir) : dir_(std::move(dir)) { ensure_dir(dir_); }

  std::string file(const std::string& name) {
    const Path p = dir_ / name;
    ensure_dir(p.parent_path());
    outputs_.push_back(name);
    return p.string();
  }
  const Path& dir() const { return dir_; }

  void manifest(const std::string& command, const Common& c, const json& options) {
    std::vector<std::string> outs = outputs_;
    outs.push_back("manifest.json");
    std::sort(outs.begin(), outs.end());
    outs.erase(std::unique(outs.begin(), outs.end()), outs.end());
    const json m{{"tool", "asyncdsb"},  {"version", adsb_version()}, {"command", command},
                 {"seed", c.seed},      {"common", c},               {"options", options},
                 {"outputs", outs}};
    write_text(dir_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  Path dir_;
  std::vector<std::string> outputs_;
};

adsb_schedule_config schedule_config(const Common& c) {
  adsb_schedule_config cfg{c.steps, c.total_mass, c.beta_min, c.base_apex};
  check(adsb_schedule_config_validate(&cfg));
  return cfg;
}

adsb_async_config async_config(const AsyncArgs& a) {
  const adsb_async_config cfg{a.tau_min, a.tau_max, a.gauss_sigma, a.normalize_over_region ? 1 : 0};
  check(adsb_async_config_validate(&cfg));
  return cfg;
}

adsb_completer completer_of(const std::string& name) {
  if (name == "oracle") return ADSB_COMPLETER_ORACLE;
  if (name == "harmonic") return ADSB_COMPLETER_HARMONIC;
  fail(ADSB_ERR_VALIDATION, "unknown completer '" + name + "' (oracle|harmonic)");
}

void need_path(const std::string& value, const char* flag) {
  if (value.empty()) fail(ADSB_ERR_VALIDATION, std::string(flag) + " is required");
}

Image load_image(const std::string& path) { return make<Image>(adsb_image_load_png, path.c_str()); }

Mask load_mask(const std::string& path) { return make<Mask>(adsb_mask_load_png, path.c_str()); }

Map load_map(const std::string& path) {
  if (Path(path).extension() == ".raw") return make<Map>(adsb_map_load_raw, path.c_str());
  return make<Map>(adsb_map_load_png16, path.c_str());
}

std::vector<double> map_values(const adsb_map* m) {
  std::uint32_t h = 0;
  std::uint32_t w = 0;
  adsb_map_dims(m, &h, &w);
  std::vector<double> v(static_cast<std::size_t>(h) * w);
  check(adsb_map_copy_values(m, v.data(), v.size()));
  return v;
}

struct GradientStage {
  Map x_cg;
  Map completed;
  Map tau;
};

GradientStage gradient_stage(const adsb_image* x_c, const adsb_mask* m, const adsb_image* gt,
                             const AsyncArgs& a) {
  const auto cfg = async_config(a);
  GradientStage g;
  g.x_cg = make<Map>(adsb_sobel_magnitude, x_c);
  g.completed = make<Map>(adsb_complete_gradient, x_c, m, g.x_cg.get(), completer_of(a.completer), gt);
  g.tau = make<Map>(adsb_tau_from_gradient, g.completed.get(), &cfg, m);
  return g;
}

struct Sampled {
  Schedule schedule;
  Trajectory trajectory;
};

Sampled sample(const Common& c, const adsb_image* x_c, const adsb_mask* m, const adsb_image* gt,
               const adsb_map* tau, const std::string& score, bool clamp_visible,
               std::uint32_t record_every) {
  const auto cfg = schedule_config(c);
  Sampled out;
  out.schedule = tau != nullptr ? make<Schedule>(adsb_schedule_field, &cfg, tau)
                                : make<Schedule>(adsb_schedule_symmetric, &cfg);
  adsb_score_model model{};
  if (score == "oracle") {
    if (gt == nullptr) fail(ADSB_ERR_CONFIG, "the oracle score model needs --ground-truth");
    model.kind = ADSB_SCORE_ORACLE;
    model.x0 = gt;
  } else if (score == "harmonic") {
    model.kind = ADSB_SCORE_HARMONIC;
  } else {
    fail(ADSB_ERR_VALIDATION, "unknown score model '" + score + "' (oracle|harmonic)");
  }
  if (record_every == 0) fail(ADSB_ERR_VALIDATION, "--record-every must be positive");
  const adsb_sampler_config sc{c.steps, c.seed, clamp_visible ? 1 : 0, record_every};
  out.trajectory = make<Trajectory>(adsb_run_reverse, x_c, &model, out.schedule.get(), &sc, m, x_c);
  return out;
}

Image final_state(const adsb_trajectory* tr) {
  adsb_image* raw = nullptr;
  check(adsb_trajectory_entry(tr, adsb_trajectory_size(tr) - 1, nullptr, nullptr, &raw));
  return Image(raw);
}

// Curves and mismatch metrics of one trajectory against the base schedule theory.
struct Diagnosis {
  adsb_mismatch full{};
  double band_peak[3] = {0.0, 0.0, 0.0};  // high, mid, low
  Curve theory;
  Curve empirical;
  Curve bands[3];
};

constexpr const char* kBandNames[3] = {"high", "mid", "low"};

Diagnosis diagnose(const adsb_trajectory* tr, const adsb_image* gt, const adsb_mask* m,
                   const adsb_schedule* base) {
  Diagnosis d;
  d.theory = make<Curve>(adsb_theoretical_curve, base, nullptr);
  const auto ssim_curve = make<Curve>(adsb_restoration_curve, tr, gt, m);
  d.empirical = make<Curve>(adsb_normalized_derivative, ssim_curve.get());
  check(adsb_mismatch_report(d.theory.get(), d.empirical.get(), &d.full));

  const auto grad = make<Map>(adsb_sobel_magnitude, gt);
  adsb_mask* band[3] = {nullptr, nullptr, nullptr};
  check(adsb_band_split(grad.get(), m, &band[0], &band[1], &band[2]));
  const Mask owned[3] = {Mask(band[0]), Mask(band[1]), Mask(band[2])};
  for (int b = 0; b < 3; ++b) {
    const auto c = make<Curve>(adsb_restoration_curve, tr, gt, owned[b].get());
    d.bands[b] = make<Curve>(adsb_normalized_derivative, c.get());
    check(adsb_curve_peak_time(d.bands[b].get(), &d.band_peak[b]));
  }
  return d;
}

json mismatch_json(const adsb_mismatch& m) { return {{"peak_lag", m.peak_lag}, {"l1_gap", m.l1_gap}}; }

void write_diagnosis(Run& run, const std::string& prefix, const Diagnosis& d,
                     const adsb_schedule* field, const adsb_mask* m, const std::string& title) {
  check(adsb_curve_export_csv(d.theory.get(), run.file(prefix + "theory.csv").c_str()));
  check(adsb_curve_export_csv(d.empirical.get(), run.file(prefix + "empirical_full.csv").c_str()));
  for (int b = 0; b < 3; ++b) {
    const auto name = prefix + "empirical_" + kBandNames[b] + ".csv";
    check(adsb_curve_export_csv(d.bands[b].get(), run.file(name).c_str()));
  }
  check(adsb_mismatch_write_json(&d.full, run.file(prefix + "mismatch.json").c_str()));
  const json bands{{"high", d.band_peak[0]}, {"mid", d.band_peak[1]}, {"low", d.band_peak[2]}};
  write_text(run.file(prefix + "band_peaks.json"), json{{"peak_time", bands}}.dump(2) + "\n");

  std::vector<adsb_plot_series> series{
      {"theory", d.theory.get(), "#000000", 1},
      {"full region", d.empirical.get(), "#1f77b4", 0},
      {"high band", d.bands[0].get(), "#d62728", 0},
      {"mid band", d.bands[1].get(), "#2ca02c", 0},
      {"low band", d.bands[2].get(), "#ff7f0e", 0}};
  Curve field_theory;
  if (field != nullptr) {
    field_theory = make<Curve>(adsb_theoretical_curve, field, m);
    check(adsb_curve_export_csv(field_theory.get(), run.file(prefix + "theory_field.csv").c_str()));
    series.push_back({"per-pixel theory", field_theory.get(), "#9467bd", 1});
  }
  check(adsb_plot_curves_svg(run.file(prefix + "overlay.svg").c_str(), title.c_str(),
                             "normalized restoration speed", series.data(), series.size()));
}

}  // namespace

void cmd_schedule(const Common& c, ScheduleArgs a, const Path& out) {
  const auto cfg = schedule_config(c);
  if (a.has_tau && !(a.tau >= 0.0 && a.tau <= 1.0)) {
    fail(ADSB_ERR_VALIDATION, "--tau must lie in [0,1], got " + num(a.tau));
  }
  if (a.has_tau && !a.tau_map.empty()) fail(ADSB_ERR_VALIDATION, "--tau and --tau-map are exclusive");
  if (a.pixels.size() % 2 != 0) fail(ADSB_ERR_VALIDATION, "--pixel expects i,j pairs");
  a.tau_map = absolute_or_empty(a.tau_map);

  Schedule s;
  Map tau;
  if (!a.tau_map.empty()) {
    tau = load_map(a.tau_map);
    s = make<Schedule>(adsb_schedule_field, &cfg, tau.get());
  } else if (a.has_tau) {
    s = make<Schedule>(adsb_schedule_shifted, &cfg, a.tau);
  } else {
    s = make<Schedule>(adsb_schedule_symmetric, &cfg);
  }

  Run run(out);
  check(adsb_schedule_export_csv(s.get(), run.file("schedule.csv").c_str()));
  if (tau) {
    if (a.pixels.empty()) {
      // Earliest and latest apex plus the centre pixel.
      const auto v = map_values(tau.get());
      std::uint32_t h = 0;
      std::uint32_t w = 0;
      adsb_map_dims(tau.get(), &h, &w);
      const auto lo = static_cast<std::uint32_t>(std::min_element(v.begin(), v.end()) - v.begin());
      const auto hi = static_cast<std::uint32_t>(std::max_element(v.begin(), v.end()) - v.begin());
      a.pixels = {lo / w, lo % w, hi / w, hi % w, h / 2, w / 2};
    }
    check(adsb_schedule_export_field_csv(s.get(), a.pixels.data(), a.pixels.size() / 2,
                                         run.file("schedule_pixels.csv").c_str()));
  } else {
    const std::size_t n = c.steps + 1;
    std::vector<double> s2(n);
    std::vector<double> s2b(n);
    check(adsb_schedule_variances(s.get(), 0, 0, s2.data(), s2b.data(), n));
    std::string text = "t,sigma2,sigma2_bar\n";
    for (std::size_t k = 0; k < n; ++k) {
      text += num(static_cast<double>(k) / c.steps) + "," + num(s2[k]) + "," + num(s2b[k]) + "\n";
    }
    write_text(run.file("variance.csv"), text);
  }
  check(adsb_schedule_plot_svg(s.get(), a.pixels.data(), a.pixels.size() / 2,
                               run.file("schedule.svg").c_str()));
  run.manifest("schedule", c, a);
}

void cmd_mask(const Common& c, const MaskArgs& a, const Path& out) {
  Mask m;
  if (a.bucket != 0) {
    m = make<Mask>(adsb_mask_make_bucket, a.bucket, a.height, a.width, c.seed);
  } else {
    adsb_mask_kind kind{};
    check(adsb_mask_kind_parse(a.kind.c_str(), &kind));
    m = make<Mask>(adsb_mask_make, kind, a.height, a.width, c.seed);
  }
  Run run(out);
  check(adsb_mask_save_png(m.get(), run.file("mask.png").c_str()));
  const double ratio = adsb_mask_ratio(m.get());
  const json info{{"ratio", ratio}, {"bucket", adsb_mask_ratio_bucket(ratio)}};
  write_text(run.file("mask.json"), info.dump(2) + "\n");
  std::printf("mask ratio %.4f (bucket %d)\n", ratio, adsb_mask_ratio_bucket(ratio));
  run.manifest("mask", c, a);
}

void cmd_corpus(const Common& c, const CorpusArgs& a, const Path& out) {
  if (a.count == 0) fail(ADSB_ERR_VALIDATION, "--count must be positive");
  Run run(out);
  for (std::uint32_t k = 0; k < a.count; ++k) {
    const auto img = make<Image>(adsb_synth_image, c.seed, k, a.height, a.width, a.channels);
    char name[32];
    std::snprintf(name, sizeof name, "image_%03u.png", k);
    check(adsb_image_save_png(img.get(), run.file(name).c_str()));
  }
  run.manifest("corpus", c, a);
}

void cmd_taumap(const Common& c, TaumapArgs a, const Path& out) {
  need_path(a.image, "--image");
  need_path(a.mask, "--mask");
  a.image = absolute_or_empty(a.image);
  a.mask = absolute_or_empty(a.mask);
  a.ground_truth = absolute_or_empty(a.ground_truth);
  const auto img = load_image(a.image);
  const auto m = load_mask(a.mask);
  const Image gt = a.ground_truth.empty() ? nullptr : load_image(a.ground_truth);
  const auto x_c = make<Image>(adsb_apply_mask, img.get(), m.get());
  const auto g = gradient_stage(x_c.get(), m.get(), gt.get(), a.async);

  Run run(out);
  check(adsb_map_save_png16(g.x_cg.get(), run.file("gradient.png").c_str()));
  run.file("gradient.png.json");
  check(adsb_map_save_png16(g.completed.get(), run.file("gradient_completed.png").c_str()));
  run.file("gradient_completed.png.json");
  check(adsb_map_save_png16(g.tau.get(), run.file("tau.png").c_str()));
  run.file("tau.png.json");
  check(adsb_map_save_raw(g.tau.get(), run.file("tau.raw").c_str()));
  run.file("tau.raw.json");
  run.manifest("taumap", c, a);
}

void cmd_inpaint(const Common& c, InpaintArgs a, const Path& out) {
  need_path(a.image, "--image");
  need_path(a.mask, "--mask");
  a.image = absolute_or_empty(a.image);
  a.mask = absolute_or_empty(a.mask);
  a.ground_truth = absolute_or_empty(a.ground_truth);
  const auto img = load_image(a.image);
  const auto m = load_mask(a.mask);
  const Image gt = a.ground_truth.empty() ? nullptr : load_image(a.ground_truth);
  if (a.score == "oracle" && !gt) fail(ADSB_ERR_CONFIG, "the oracle score model needs --ground-truth");
  const auto x_c = make<Image>(adsb_apply_mask, img.get(), m.get());
  const auto g = gradient_stage(x_c.get(), m.get(), gt.get(), a.async);
  const auto s = sample(c, x_c.get(), m.get(), gt.get(), a.sync ? nullptr : g.tau.get(), a.score,
                        a.clamp_visible, a.record_every);
  const auto restored = final_state(s.trajectory.get());

  Run run(out);
  check(adsb_image_save_png(x_c.get(), run.file("corrupted.png").c_str()));
  check(adsb_mask_save_png(m.get(), run.file("mask.png").c_str()));
  check(adsb_image_save_png(restored.get(), run.file("restored.png").c_str()));
  check(adsb_map_save_png16(g.completed.get(), run.file("gradient.png").c_str()));
  run.file("gradient.png.json");
  check(adsb_map_save_png16(g.tau.get(), run.file("tau.png").c_str()));
  run.file("tau.png.json");
  check(adsb_map_save_raw(g.tau.get(), run.file("tau.raw").c_str()));
  run.file("tau.raw.json");
  check(adsb_trajectory_export_csv(s.trajectory.get(), gt.get(), gt ? m.get() : nullptr,
                                   run.file("trajectory.csv").c_str()));
  check(adsb_trajectory_save_raw(s.trajectory.get(), run.file("trajectory.raw").c_str()));
  run.file("trajectory.raw.json");
  if (a.save_states) {
    const auto dir = run.dir() / "states";
    check(adsb_trajectory_save_pngs(s.trajectory.get(), dir.c_str()));
    for (std::size_t k = 0; k < adsb_trajectory_size(s.trajectory.get()); ++k) {
      std::uint32_t step = 0;
      check(adsb_trajectory_entry(s.trajectory.get(), k, &step, nullptr, nullptr));
      char name[40];
      std::snprintf(name, sizeof name, "states/state_t%04u.png", step);
      run.file(name);
    }
  }
  if (gt) {
    double mse = 0.0;
    double ssim = 0.0;
    check(adsb_image_mse(restored.get(), gt.get(), &mse));
    check(adsb_ssim(restored.get(), gt.get(), &ssim));
    write_text(run.file("metrics.json"), json{{"mse", mse}, {"ssim", ssim}}.dump(2) + "\n");
  }
  run.manifest("inpaint", c, a);
}

void cmd_diagnose(const Common& c, DiagnoseArgs a, const Path& out) {
  a.run = absolute_or_empty(a.run);
  a.image = absolute_or_empty(a.image);
  a.mask = absolute_or_empty(a.mask);
  a.ground_truth = absolute_or_empty(a.ground_truth);

  if (!a.run.empty()) {
    const Path dir(a.run);
    const auto traj_path = dir / "trajectory.raw";
    if (!fs::exists(traj_path)) fail(ADSB_ERR_IO, "no trajectory in " + dir.string());
    json manifest;
    try {
      std::ifstream f(dir / "manifest.json");
      if (!f) fail(ADSB_ERR_IO, "no manifest.json in " + dir.string());
      manifest = json::parse(f);
    } catch (const json::exception& e) {
      fail(ADSB_ERR_VALIDATION, std::string("bad run manifest: ") + e.what());
    }
    if (manifest.value("command", "") != "inpaint") {
      fail(ADSB_ERR_VALIDATION, "diagnose --run expects an inpaint run directory");
    }
    const auto run_common = manifest.at("common").get<Common>();
    const auto run_args = manifest.at("options").get<InpaintArgs>();
    if (run_args.ground_truth.empty()) {
      fail(ADSB_ERR_CONFIG, "the run has no ground truth to measure restoration against");
    }
    const auto gt = load_image(run_args.ground_truth);
    const auto m = load_mask(run_args.mask);
    const auto traj = make<Trajectory>(adsb_trajectory_load_raw, traj_path.c_str());
    const auto cfg = schedule_config(run_common);
    const auto base = make<Schedule>(adsb_schedule_symmetric, &cfg);
    Schedule field;
    if (!run_args.sync) {
      const auto tau = load_map((dir / "tau.raw").string());
      field = make<Schedule>(adsb_schedule_field, &cfg, tau.get());
    }
    const auto d = diagnose(traj.get(), gt.get(), m.get(), base.get());
    Run run(out);
    write_diagnosis(run, "", d, field.get(), m.get(), run_args.sync ? "synchronous" : "asynchronous");
    run.manifest("diagnose", c, a);
    return;
  }

  need_path(a.mask, "--mask");
  need_path(a.ground_truth, "--ground-truth (or --run)");
  const auto gt = load_image(a.ground_truth);
  const auto m = load_mask(a.mask);
  const auto img = a.image.empty() ? load_image(a.ground_truth) : load_image(a.image);
  const auto x_c = make<Image>(adsb_apply_mask, img.get(), m.get());
  const auto g = gradient_stage(x_c.get(), m.get(), gt.get(), a.async);
  const auto sync = sample(c, x_c.get(), m.get(), gt.get(), nullptr, "oracle", true, a.record_every);
  const auto async =
      sample(c, x_c.get(), m.get(), gt.get(), g.tau.get(), "oracle", true, a.record_every);
  const auto cfg = schedule_config(c);
  const auto base = make<Schedule>(adsb_schedule_symmetric, &cfg);
  const auto ds = diagnose(sync.trajectory.get(), gt.get(), m.get(), base.get());
  const auto da = diagnose(async.trajectory.get(), gt.get(), m.get(), base.get());

  Run run(out);
  write_diagnosis(run, "sync/", ds, nullptr, m.get(), "synchronous schedule");
  write_diagnosis(run, "async/", da, async.schedule.get(), m.get(), "asynchronous schedule");
  auto entry = [](const Diagnosis& d) {
    return json{{"mismatch", mismatch_json(d.full)},
                {"band_peak_time",
                 {{"high", d.band_peak[0]}, {"mid", d.band_peak[1]}, {"low", d.band_peak[2]}}}};
  };
  write_text(run.file("summary.json"), json{{"sync", entry(ds)}, {"async", entry(da)}}.dump(2) + "\n");
  const adsb_plot_series series[] = {{"theory", ds.theory.get(), "#000000", 1},
                                     {"synchronous", ds.empirical.get(), "#1f77b4", 0},
                                     {"asynchronous", da.empirical.get(), "#d62728", 0}};
  check(adsb_plot_curves_svg(run.file("overlay.svg").c_str(), "restoration speed vs schedule",
                             "normalized restoration speed", series, std::size(series)));
  run.manifest("diagnose", c, a);
}

namespace {

struct CellMetrics {
  double mse = 0.0;
  double ssim = 0.0;
  double abs_peak_lag = 0.0;
  double l1_gap = 0.0;
};

struct TaskResult {
  CellMetrics metrics;
  Image final_state;
};

void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& body) {
  const unsigned workers = std::max(1u, std::min<unsigned>(
      jobs != 0 ? jobs : std::max(1u, std::thread::hardware_concurrency()),
      static_cast<unsigned>(n)));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < n; i = next++) body(i);
        } catch (...) {
          errors[w] = std::current_exception();
          next = n;
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string matrix_csv(const std::vector<double>& taus, const std::vector<std::optional<double>>& v) {
  std::string text = "tau_min/tau_max";
  for (double t : taus) text += "," + fmt("%.3f", t);
  text += "\n";
  for (std::size_t r = 0; r < taus.size(); ++r) {
    text += fmt("%.3f", taus[r]);
    for (std::size_t col = 0; col < taus.size(); ++col) {
      const auto& x = v[r * taus.size() + col];
      text += "," + (x ? num(*x) : std::string("invalid"));
    }
    text += "\n";
  }
  return text;
}

}  // namespace

void cmd_sweep(const Common& c, SweepArgs a, const Path& out) {
  if (a.count == 0) fail(ADSB_ERR_VALIDATION, "empty corpus: --count must be positive");
  if (a.taus.empty()) fail(ADSB_ERR_VALIDATION, "empty tau grid");
  for (double t : a.taus) {
    if (!(t >= 0.0 && t <= 1.0)) fail(ADSB_ERR_VALIDATION, "tau grid values must lie in [0,1]");
  }
  if (!a.buckets && a.mask_kinds.empty()) fail(ADSB_ERR_VALIDATION, "no mask kinds given");
  completer_of(a.completer);
  const auto cfg = schedule_config(c);
  const auto base = make<Schedule>(adsb_schedule_symmetric, &cfg);

  // Corpus and masks are read-only inputs shared by all tasks.
  std::vector<Image> corpus;
  for (std::uint32_t k = 0; k < a.count; ++k) {
    corpus.push_back(make<Image>(adsb_synth_image, c.seed, k, a.height, a.width, 3u));
  }
  struct MaskSet {
    std::string label;
    std::vector<Mask> per_image;
  };
  std::vector<MaskSet> groups;  // one result matrix per group
  if (a.buckets) {
    for (int b = 1; b <= 4; ++b) {
      MaskSet set{"bucket" + std::to_string(b), {}};
      for (std::uint32_t k = 0; k < a.count; ++k) {
        set.per_image.push_back(make<Mask>(adsb_mask_make_bucket, b, a.height, a.width, c.seed + k));
      }
      groups.push_back(std::move(set));
    }
  } else {
    MaskSet set{"all", {}};
    for (const auto& kind_name : a.mask_kinds) {
      adsb_mask_kind kind{};
      check(adsb_mask_kind_parse(kind_name.c_str(), &kind));
      for (std::uint32_t k = 0; k < a.count; ++k) {
        set.per_image.push_back(make<Mask>(adsb_mask_make, kind, a.height, a.width, c.seed + k));
      }
    }
    groups.push_back(std::move(set));
  }

  const std::size_t n = a.taus.size();
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t col = 0; col < n; ++col) {
      if (a.taus[r] <= a.taus[col]) cells.emplace_back(r, col);
    }
  }

  struct Task {
    std::size_t group;
    std::size_t cell;
    std::size_t sample;
  };
  std::vector<Task> tasks;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t k = 0; k < cells.size(); ++k) {
      for (std::size_t s = 0; s < groups[g].per_image.size(); ++s) tasks.push_back({g, k, s});
    }
  }
  std::vector<TaskResult> results(tasks.size());
  parallel_for(tasks.size(), a.jobs, [&](std::size_t t) {
    const auto& task = tasks[t];
    const auto [r, col] = cells[task.cell];
    const adsb_image* gt = corpus[task.sample % a.count].get();
    const adsb_mask* m = groups[task.group].per_image[task.sample].get();
    const AsyncArgs async{a.taus[r], a.taus[col], a.gauss_sigma, true, a.completer};
    const auto x_c = make<Image>(adsb_apply_mask, gt, m);
    const auto g = gradient_stage(x_c.get(), m, gt, async);
    Common run_common = c;
    run_common.seed = c.seed + task.sample;
    const auto s = sample(run_common, x_c.get(), m, gt, g.tau.get(), "oracle", true, a.record_every);
    auto& out_result = results[t];
    out_result.final_state = final_state(s.trajectory.get());
    check(adsb_image_mse(out_result.final_state.get(), gt, &out_result.metrics.mse));
    check(adsb_ssim(out_result.final_state.get(), gt, &out_result.metrics.ssim));
    const auto theory = make<Curve>(adsb_theoretical_curve, base.get(), nullptr);
    const auto ssim_curve = make<Curve>(adsb_restoration_curve, s.trajectory.get(), gt, m);
    const auto emp = make<Curve>(adsb_normalized_derivative, ssim_curve.get());
    adsb_mismatch mm{};
    check(adsb_mismatch_report(theory.get(), emp.get(), &mm));
    out_result.metrics.abs_peak_lag = std::abs(mm.peak_lag);
    out_result.metrics.l1_gap = mm.l1_gap;
  });

  Run run(out);
  std::vector<std::string> labels;
  for (double t : a.taus) labels.push_back(fmt("%.3f", t));
  std::vector<const char*> label_ptrs;
  for (const auto& l : labels) label_ptrs.push_back(l.c_str());

  std::string best_rows = "bucket,ratio_range,tau_min,tau_max,l1_gap,abs_peak_lag,mse,ssim\n";
  std::size_t t = 0;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& group = groups[gi];
    const std::string prefix = a.buckets ? group.label + "/" : "";
    std::vector<std::optional<CellMetrics>> grid(n * n);
    std::string long_csv = "tau_min,tau_max,valid,mse,ssim,abs_peak_lag,l1_gap\n";
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const auto [r, col] = cells[k];
      const std::string cell_dir =
          prefix + "cells/tmin_" + labels[r] + "_tmax_" + labels[col] + "/";
      CellMetrics mean;
      json per_sample = json::array();
      for (std::size_t s = 0; s < group.per_image.size(); ++s, ++t) {
        const auto& res = results[t];
        mean.mse += res.metrics.mse;
        mean.ssim += res.metrics.ssim;
        mean.abs_peak_lag += res.metrics.abs_peak_lag;
        mean.l1_gap += res.metrics.l1_gap;
        per_sample.push_back({{"mse", res.metrics.mse},
                              {"ssim", res.metrics.ssim},
                              {"abs_peak_lag", res.metrics.abs_peak_lag},
                              {"l1_gap", res.metrics.l1_gap}});
        char name[32];
        std::snprintf(name, sizeof name, "final_%03zu.raw", s);
        check(adsb_image_save_raw(res.final_state.get(), run.file(cell_dir + name).c_str()));
        run.file(cell_dir + name + ".json");
      }
      const double count = static_cast<double>(group.per_image.size());
      mean.mse /= count;
      mean.ssim /= count;
      mean.abs_peak_lag /= count;
      mean.l1_gap /= count;
      grid[r * n + col] = mean;
      const json cell{{"tau_min", a.taus[r]},       {"tau_max", a.taus[col]},
                      {"mse", mean.mse},            {"ssim", mean.ssim},
                      {"abs_peak_lag", mean.abs_peak_lag}, {"l1_gap", mean.l1_gap},
                      {"samples", per_sample}};
      write_text(run.file(cell_dir + "metrics.json"), cell.dump(2) + "\n");
    }
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t col = 0; col < n; ++col) {
        const auto& g = grid[r * n + col];
        long_csv += labels[r] + "," + labels[col] + ",";
        long_csv += g ? "1," + num(g->mse) + "," + num(g->ssim) + "," + num(g->abs_peak_lag) +
                            "," + num(g->l1_gap)
                      : std::string("0,,,,");
        long_csv += "\n";
      }
    }
    write_text(run.file(prefix + "sweep.csv"), long_csv);

    auto column = [&](double CellMetrics::*field) {
      std::vector<std::optional<double>> v(n * n);
      for (std::size_t q = 0; q < n * n; ++q) {
        if (grid[q]) v[q] = (*grid[q]).*field;
      }
      return v;
    };
    const std::pair<const char*, double CellMetrics::*> metrics[] = {
        {"mse", &CellMetrics::mse},
        {"ssim", &CellMetrics::ssim},
        {"abs_peak_lag", &CellMetrics::abs_peak_lag},
        {"l1_gap", &CellMetrics::l1_gap}};
    for (const auto& [name, field] : metrics) {
      write_text(run.file(prefix + "matrix_" + name + ".csv"), matrix_csv(a.taus, column(field)));
    }
    std::vector<double> heat(n * n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t q = 0; q < n * n; ++q) {
      if (grid[q]) heat[q] = grid[q]->l1_gap;
    }
    const std::string title = "mismatch l1 gap (" + group.label + ")";
    check(adsb_plot_heatmap_svg(run.file(prefix + "heatmap.svg").c_str(), title.c_str(),
                                label_ptrs.data(), n, label_ptrs.data(), n, heat.data(), "tau_min",
                                "tau_max"));

    if (a.buckets) {
      // Lowest mismatch wins; ties go to the first cell in row-major order.
      std::size_t best = cells.size();
      for (std::size_t k = 0; k < cells.size(); ++k) {
        const auto& g = *grid[cells[k].first * n + cells[k].second];
        if (best == cells.size() ||
            g.l1_gap < grid[cells[best].first * n + cells[best].second]->l1_gap) {
          best = k;
        }
      }
      const auto [r, col] = cells[best];
      const auto& g = *grid[r * n + col];
      best_rows += std::to_string(gi + 1) + "," + std::to_string(gi * 10) + "-" +
                   std::to_string(gi * 10 + 10) + "%," + labels[r] + "," + labels[col] + "," +
                   num(g.l1_gap) + "," + num(g.abs_peak_lag) + "," + num(g.mse) + "," +
                   num(g.ssim) + "\n";
    }
  }
  if (a.buckets) write_text(run.file("buckets.csv"), best_rows);
  run.manifest("sweep", c, a);
}

void cmd_replay(const Path& manifest_path, const Path& out) {
  json m;
  {
    std::ifstream f(manifest_path);
    if (!f) fail(ADSB_ERR_IO, "cannot read " + manifest_path.string());
    try {
      m = json::parse(f);
    } catch (const json::exception& e) {
      fail(ADSB_ERR_VALIDATION, std::string("bad manifest: ") + e.what());
    }
  }
  try {
    const auto command = m.at("command").get<std::string>();
    const auto c = m.at("common").get<Common>();
    const auto& o = m.at("options");
    if (command == "schedule") return cmd_schedule(c, o.get<ScheduleArgs>(), out);
    if (command == "mask") return cmd_mask(c, o.get<MaskArgs>(), out);
    if (command == "corpus") return cmd_corpus(c, o.get<CorpusArgs>(), out);
    if (command == "taumap") return cmd_taumap(c, o.get<TaumapArgs>(), out);
    if (command == "inpaint") return cmd_inpaint(c, o.get<InpaintArgs>(), out);
    if (command == "diagnose") return cmd_diagnose(c, o.get<DiagnoseArgs>(), out);
    if (command == "sweep") return cmd_sweep(c, o.get<SweepArgs>(), out);
    fail(ADSB_ERR_VALIDATION, "manifest names unknown command '" + command + "'");
  } catch (const json::exception& e) {
    fail(ADSB_ERR_VALIDATION, std::string("bad manifest: ") + e.what());
  }
}

}  // namespace cli
