// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion...]   (default: all; 7 and 8 share one corpus run)

#include <sys/wait.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "asyncdsb/bridge.hpp"
#include "asyncdsb/diagnostics.hpp"
#include "asyncdsb/imaging.hpp"
#include "asyncdsb/io.hpp"
#include "asyncdsb/priorgrad.hpp"
#include "asyncdsb/rng.hpp"
#include "asyncdsb/schedule.hpp"

using namespace asyncdsb;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Runs body(i) for i in [0, n) on all cores.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
  }
}

ScheduleConfig base_config(std::size_t steps = 1000) {
  ScheduleConfig c;
  c.steps = steps;
  c.total_mass = 1.0;
  c.beta_min = 1e-4;
  return c;
}

SamplerConfig sampler(std::size_t steps, std::uint64_t seed, std::size_t record_every) {
  SamplerConfig s;
  s.steps = steps;
  s.seed = seed;
  s.clamp_visible = true;
  s.record_every = record_every;
  return s;
}

// ---- 1: schedule conservation -------------------------------------------

Outcome schedule_conservation() {
  CounterStream rng(1, 0x61636331u);
  double worst_mass = 0.0;
  double worst_partition = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    ScheduleConfig c;
    c.steps = static_cast<std::size_t>(rng.uniform_int(2, 2000));
    c.total_mass = std::exp(rng.uniform(std::log(1e-3), std::log(1e3)));
    c.beta_min = c.total_mass * rng.uniform(0.0, 0.99);
    c.base_apex = rng.uniform(0.05, 0.95);
    const double tau = rng.uniform(0.0, 1.0);
    const auto s = build_shifted(c, tau);
    double mass = 0.0;
    for (double b : s.betas()) mass += b * s.dt();
    worst_mass = std::max(worst_mass, std::abs(mass - c.total_mass) / c.total_mass);
    const auto vt = VarianceTable::from(s);
    for (std::size_t k = 0; k <= c.steps; ++k) {
      const double sum = vt.sigma2(k) + vt.sigma2_bar(k);
      worst_partition = std::max(worst_partition, std::abs(sum - c.total_mass) / c.total_mass);
    }
  }
  return {worst_mass <= 1e-9 && worst_partition <= 1e-9,
          fmt("max rel mass error %.2e, max rel partition error %.2e (tol 1e-9)", worst_mass,
              worst_partition)};
}

// ---- 2: synchronous reduction -------------------------------------------

Outcome synchronous_reduction() {
  const std::size_t T = 1000;
  const double taus[10] = {0.5, 0.5, 0.2, 0.35, 0.65, 0.8, 0.9, 0.05, 0.001, 1.0};
  const auto mask = make_mask(MaskKind::center, 64, 64, 0);
  int identical = 0;
  for (int run = 0; run < 10; ++run) {
    const auto x0 = synth_image(2, static_cast<std::size_t>(run), 64, 64);
    const auto x1 = apply_mask(x0, mask);
    const VisibleData visible{mask, x1};
    const auto cfg = sampler(T, 100 + static_cast<std::uint64_t>(run), 1);
    const AnalyticOracle model(x0);
    const auto global = run_reverse(x1, model, build_shifted(base_config(T), taus[run]), cfg, &visible);
    const auto field =
        run_reverse(x1, model, build_field(base_config(T), TauMap(64, 64, taus[run])), cfg, &visible);
    bool same = global.entries.size() == field.entries.size();
    for (std::size_t n = 0; same && n < global.entries.size(); ++n) {
      same = global.entries[n].step == field.entries[n].step &&
             global.entries[n].state == field.entries[n].state;
    }
    identical += same ? 1 : 0;
  }
  return {identical == 10, fmt("%d/10 runs bit-identical over all %zu states", identical, T + 1)};
}

// ---- 3: posterior marginals ---------------------------------------------

Outcome posterior_marginals() {
  const std::size_t T = 1000;
  const int n = 100000;
  const auto vt = VarianceTable::from(build_symmetric(base_config(T)));
  const BridgeEndpoints ep{ImageTensor(1, 1, 1, 0.15), ImageTensor(1, 1, 1, 0.85)};
  bool ok = true;
  std::string detail;
  for (std::size_t step : {250u, 500u, 750u}) {
    const PhiloxNoise noise(3 + step);
    const auto post = posterior_params(ep, step, vt);
    const double mu = post.mean[0];
    const double var = post.var[0];
    double sum = 0.0;
    double sum2 = 0.0;
    for (int d = 0; d < n; ++d) {
      const double x = sample_xt(ep, step, vt, noise, static_cast<std::uint32_t>(d))[0];
      sum += x;
      sum2 += x * x;
    }
    const double mean = sum / n;
    const double s2 = (sum2 - n * mean * mean) / (n - 1);
    const double z_mean = std::abs(mean - mu) / std::sqrt(var / n);
    const double z_var = std::abs(s2 - var) / (var * std::sqrt(2.0 / (n - 1)));
    ok = ok && z_mean <= 3.0 && z_var <= 3.0;
    detail += fmt("t=%.2f: |dmean|=%.2f SE |dvar|=%.2f SE; ", static_cast<double>(step) / T, z_mean, z_var);
    if (step == 500) {
      const bool symmetric = vt.sigma2(step) == vt.sigma2_bar(step) &&
                             mu == 0.5 * (ep.x0[0] + ep.x1[0]);
      ok = ok && symmetric;
      detail += symmetric ? "midpoint exact; " : "midpoint NOT exact; ";
    }
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

// ---- 4: finite-difference check of the restoration speed -----------------

Outcome speed_finite_difference() {
  const std::size_t T = 1000;
  const double delta = 1e-4;
  const auto x0 = synth_image(4, 0, 16, 16);
  const auto mask = make_mask(MaskKind::center, 16, 16, 0);
  const auto x1 = apply_mask(x0, mask);
  const auto vt = VarianceTable::from(build_shifted(base_config(T), 0.3));
  double worst = 0.0;
  for (int q = 1; q <= 20; ++q) {
    const double t = static_cast<double>(q * 47) / static_cast<double>(T);  // interior grid times
    const auto up = posterior_mean_at({x0, x1}, t + delta, vt);
    const auto down = posterior_mean_at({x0, x1}, t - delta, vt);
    const auto speed = theoretical_speed({x0, x1}, t, vt, &mask);
    for (std::size_t e = 0; e < x0.size(); ++e) {
      const double fd = (up[e] - down[e]) / (2.0 * delta);
      if (speed[e] == 0.0) {
        worst = std::max(worst, std::abs(fd));  // visible or zero-valued pixels
        continue;
      }
      worst = std::max(worst, std::abs(fd - speed[e]) / std::abs(speed[e]));
    }
  }
  return {worst <= 1e-2, fmt("max relative error %.2e over 20 times (tol 1e-2)", worst)};
}

// ---- 5: oracle convergence ------------------------------------------------

Outcome oracle_convergence() {
  const std::size_t T = 1000;
  const auto vt = VarianceTable::from(build_symmetric(base_config(T)));
  const double bound = 5.0 * vt.sigma2(1);
  const auto mask = make_mask(MaskKind::center, 64, 64, 0);
  std::vector<double> mse(10);
  parallel_for(10, [&](std::size_t k) {
    const auto x0 = synth_image(5, k, 64, 64);
    const auto x1 = apply_mask(x0, mask);
    const VisibleData visible{mask, x1};
    const auto traj = run_reverse(x1, AnalyticOracle(x0), vt, sampler(T, k, T), &visible);
    mse[k] = mean_squared_error(traj.final_state(), x0);
  });
  const double worst = *std::max_element(mse.begin(), mse.end());
  return {worst <= bound, fmt("max final MSE %.3e vs bound 5*sigma2(1/T) = %.3e", worst, bound)};
}

// ---- 6: tau endpoints and degeneracy ------------------------------------

Outcome tau_map_properties() {
  bool ok = true;
  std::string detail;
  const auto mask = make_mask(MaskKind::center, 64, 64, 0);
  int endpoint_hits = 0;
  double worst_affine = 0.0;
  for (std::size_t k = 0; k < 5; ++k) {
    const auto x_g = synth_image(6, k, 64, 64);
    const auto x_c = apply_mask(x_g, mask);
    const auto g = complete_gradient(x_c, mask, sobel_magnitude(x_c), Completer::oracle, &x_g);
    AsyncConfig cfg;
    cfg.tau_min = 0.2;
    cfg.tau_max = 0.9;
    const auto tau = tau_from_gradient(g, cfg, &mask);
    const auto smooth = gaussian_filter(g, cfg.gauss_sigma);
    std::size_t arg_lo = 0, arg_hi = 0;
    for (std::size_t p = 0; p < smooth.pixels(); ++p) {
      if (!mask[p]) continue;
      if (!mask[arg_lo] || smooth[p] < smooth[arg_lo]) arg_lo = p;
      if (!mask[arg_hi] || smooth[p] > smooth[arg_hi]) arg_hi = p;
    }
    endpoint_hits += (tau[arg_hi] == cfg.tau_max && tau[arg_lo] == cfg.tau_min) ? 1 : 0;

    GradientMap scaled = g;
    for (auto& v : scaled.values()) v = 37.5 * v + 4.25;
    const auto tau2 = tau_from_gradient(scaled, cfg, &mask);
    for (std::size_t p = 0; p < tau.pixels(); ++p) worst_affine = std::max(worst_affine, std::abs(tau[p] - tau2[p]));
  }
  ok = endpoint_hits == 5 && worst_affine <= 1e-12;
  AsyncConfig cfg;
  cfg.tau_min = 0.001;
  cfg.tau_max = 0.4;
  bool midpoint = true;
  const auto flat = tau_from_gradient(GradientMap(32, 32, 1.7), cfg);
  for (double v : flat.values()) midpoint = midpoint && v == 0.2005;
  ok = ok && midpoint;
  detail = fmt("endpoints exact on %d/5 images, constant map -> midpoint %s, affine deviation %.1e (tol 1e-12)",
               endpoint_hits, midpoint ? "yes" : "no", worst_affine);
  return {ok, detail};
}

// ---- 7 and 8: mismatch alleviation and band ordering ---------------------

struct CorpusResult {
  MismatchReport sync;
  MismatchReport async;
  double band_peak[3];  // high, mid, low under the asynchronous schedule
};

CorpusResult run_corpus_image(std::size_t k) {
  const std::size_t T = 1000;
  const auto cfg = base_config(T);
  const auto x_g = synth_image(7, k, 64, 64);
  const auto mask = make_mask(MaskKind::center, 64, 64, 0);
  const auto x_c = apply_mask(x_g, mask);
  AsyncConfig acfg;
  acfg.tau_min = 0.2;
  acfg.tau_max = 0.9;
  const auto g_hat = complete_gradient(x_c, mask, sobel_magnitude(x_c), Completer::oracle, &x_g);
  const auto tau = tau_from_gradient(g_hat, acfg, &mask);
  const VisibleData visible{mask, x_c};
  const AnalyticOracle model(x_g);
  const auto sc = sampler(T, k, 10);
  const auto sync = run_reverse(x_c, model, build_symmetric(cfg), sc, &visible);
  const auto async = run_reverse(x_c, model, build_field(cfg, tau), sc, &visible);

  // Both runs are measured against the same synchronous reference curve.
  const auto theory = theoretical_curve(build_symmetric(cfg));
  CorpusResult r{};
  r.sync = mismatch_report(theory, normalized_derivative(restoration_curve(sync, x_g, mask)));
  r.async = mismatch_report(theory, normalized_derivative(restoration_curve(async, x_g, mask)));
  const auto bands = band_split(sobel_magnitude(x_g), mask);
  const Mask* band_masks[3] = {&bands.high, &bands.mid, &bands.low};
  for (int b = 0; b < 3; ++b) {
    r.band_peak[b] = peak_time(normalized_derivative(restoration_curve(async, x_g, *band_masks[b])));
  }
  return r;
}

std::vector<CorpusResult> corpus_results() {
  static std::vector<CorpusResult> results = [] {
    std::vector<CorpusResult> out(20);
    parallel_for(20, [&](std::size_t k) { out[k] = run_corpus_image(k); });
    return out;
  }();
  return results;
}

Outcome mismatch_alleviation() {
  const auto results = corpus_results();
  int wins = 0;
  double sync_lag = 0, async_lag = 0, sync_gap = 0, async_gap = 0;
  for (const auto& r : results) {
    const bool lag_ok = std::abs(r.async.peak_lag) <= std::abs(r.sync.peak_lag);
    const bool gap_ok = r.async.l1_gap <= r.sync.l1_gap;
    wins += (lag_ok && gap_ok) ? 1 : 0;
    sync_lag += std::abs(r.sync.peak_lag);
    async_lag += std::abs(r.async.peak_lag);
    sync_gap += r.sync.l1_gap;
    async_gap += r.async.l1_gap;
  }
  const double n = static_cast<double>(results.size());
  const bool ok = wins >= 16 && async_lag < sync_lag && async_gap < sync_gap;
  return {ok, fmt("async no worse on both metrics in %d/20 images (need 16); mean |peak_lag| "
                  "sync %.4f async %.4f; mean l1_gap sync %.4f async %.4f",
                  wins, sync_lag / n, async_lag / n, sync_gap / n, async_gap / n)};
}

Outcome band_ordering() {
  const auto results = corpus_results();
  double peak[3] = {0, 0, 0};
  for (const auto& r : results) {
    for (int b = 0; b < 3; ++b) peak[b] += r.band_peak[b] / static_cast<double>(results.size());
  }
  const bool ok = peak[0] >= peak[1] && peak[1] >= peak[2];
  return {ok, fmt("mean peak restoration time high %.4f, mid %.4f, low %.4f (need high >= mid >= low)",
                  peak[0], peak[1], peak[2])};
}

// ---- CLI helpers -----------------------------------------------------------

const fs::path kWork = fs::current_path() / "acceptance_out";

int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + ASYNCDSB_CLI + "\" " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

// ---- 9: sweep validity -----------------------------------------------------

Outcome sweep_validity() {
  const std::size_t T = 200;
  const std::uint64_t seed = 11;
  const std::size_t count = 2;
  const std::vector<double> taus{0.001, 0.2, 0.4, 0.7, 0.9};
  const auto dir = kWork / "sweep";
  fs::remove_all(dir);
  const int rc = cli(fmt("--seed %llu --steps %zu --out-dir ", static_cast<unsigned long long>(seed), T) +
                     q(dir) + fmt(" sweep --count %zu --height 32 --width 32 --record-every 10", count));
  if (rc != 0) return {false, fmt("sweep exited with %d", rc)};

  std::ifstream in(dir / "sweep.csv");
  std::string line;
  std::getline(in, line);
  int valid = 0, invalid = 0, misflagged = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string a, b, flag;
    std::getline(ss, a, ',');
    std::getline(ss, b, ',');
    std::getline(ss, flag, ',');
    const bool should = std::stod(a) <= std::stod(b);
    misflagged += ((flag == "1") != should) ? 1 : 0;
    (flag == "1" ? valid : invalid)++;
  }
  std::size_t cell_dirs = 0;
  for (const auto& e : fs::directory_iterator(dir / "cells")) cell_dirs += e.is_directory() ? 1 : 0;

  // Diagonal cells against global shifted-schedule runs built here.
  int diag_ok = 0;
  for (double tau : taus) {
    const auto label = fmt("%.3f", tau);
    const auto cell = dir / "cells" / ("tmin_" + label + "_tmax_" + label);
    const auto metrics = read_json(cell / "metrics.json");
    bool same = true;
    for (std::size_t k = 0; k < count; ++k) {
      const auto x_g = synth_image(seed, k, 32, 32);
      const auto mask = make_mask(MaskKind::center, 32, 32, seed + k);
      const auto x_c = apply_mask(x_g, mask);
      const VisibleData visible{mask, x_c};
      const auto traj = run_reverse(x_c, AnalyticOracle(x_g), build_shifted(base_config(T), tau),
                                    sampler(T, seed + k, 10), &visible);
      const auto stored = load_raw(cell / fmt("final_%03zu.raw", k));
      const auto& fin = traj.final_state();
      same = same && stored.same_shape(fin);
      for (std::size_t e = 0; same && e < fin.size(); ++e) {
        same = static_cast<float>(fin[e]) == static_cast<float>(stored[e]);
      }
      same = same && metrics.at("samples").at(k).at("mse").get<double>() == mean_squared_error(fin, x_g);
    }
    diag_ok += same ? 1 : 0;
  }
  const bool ok = valid == 15 && invalid == 10 && misflagged == 0 && cell_dirs == 15 && diag_ok == 5;
  return {ok, fmt("%d valid / %d invalid cells (need 15/10), %zu cell dirs, %d misflagged, "
                  "%d/5 diagonal cells match global runs",
                  valid, invalid, cell_dirs, misflagged, diag_ok)};
}

// ---- 10: determinism under replay ----------------------------------------

std::set<std::string> files_under(const fs::path& root) {
  std::set<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.insert(fs::relative(e.path(), root).generic_string());
  }
  return out;
}

Outcome replay_determinism() {
  const auto root = kWork / "replay";
  fs::remove_all(root);
  const auto inputs = root / "inputs";
  if (cli("--seed 4 --out-dir " + q(inputs / "corpus") + " corpus --count 2 --height 32 --width 32") != 0 ||
      cli("--out-dir " + q(inputs / "mask") + " mask --kind center --height 32 --width 32") != 0) {
    return {false, "could not prepare inputs"};
  }
  const auto img = inputs / "corpus" / "image_000.png";
  const auto msk = inputs / "mask" / "mask.png";
  const std::string in = " --image " + q(img) + " --mask " + q(msk) + " --ground-truth " + q(img);
  const std::vector<std::pair<std::string, std::string>> commands{
      {"schedule", "--steps 300 schedule --tau 0.3"},
      {"mask", "--seed 5 mask --kind narrow --height 48 --width 48"},
      {"bucket_mask", "--seed 5 mask --bucket 3 --height 64 --width 64"},
      {"corpus", "--seed 6 corpus --count 2 --height 24 --width 24"},
      {"taumap", "taumap" + in + " --completer oracle"},
      {"inpaint", "--steps 100 inpaint" + in + " --score oracle --save-states"},
      {"inpaint_harmonic", "--steps 100 inpaint --image " + q(img) + " --mask " + q(msk)},
      {"diagnose", "--steps 100 diagnose" + in},
      {"sweep", "--steps 60 sweep --taus 0.2,0.6 --count 1 --height 32 --width 32"},
  };
  int reproduced = 0;
  std::string failures;
  for (const auto& [name, args] : commands) {
    const auto a = root / name / "first";
    const auto b = root / name / "replayed";
    if (cli("--out-dir " + q(a) + " " + args) != 0 ||
        cli("--out-dir " + q(b) + " replay " + q(a / "manifest.json")) != 0) {
      failures += " " + name + "(exit)";
      continue;
    }
    const auto fa = files_under(a);
    bool same = fa == files_under(b);
    for (const auto& f : fa) {
      if (!same) break;
      if (f.ends_with(".png")) {
        same = load_png(a / f) == load_png(b / f);
      } else {
        same = slurp(a / f) == slurp(b / f);
      }
    }
    if (same) ++reproduced;
    else failures += " " + name;
  }
  const auto total = static_cast<int>(commands.size());
  return {reproduced == total,
          fmt("%d/%d commands reproduced byte-identically from their manifests", reproduced, total) +
              (failures.empty() ? "" : "; differing:" + failures)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "schedule conservation", 1.0, schedule_conservation},
    {2, "synchronous reduction", 30.0, synchronous_reduction},
    {3, "posterior marginals", 60.0, posterior_marginals},
    {4, "restoration speed finite differences", 1.0, speed_finite_difference},
    {5, "oracle convergence", 60.0, oracle_convergence},
    {6, "tau map endpoints and degeneracy", 0.0, tau_map_properties},
    {7, "mismatch alleviation", 300.0, mismatch_alleviation},
    {8, "band ordering", 300.0, band_ordering},
    {9, "sweep validity", 0.0, sweep_validity},
    {10, "replay determinism", 0.0, replay_determinism},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  fs::create_directories(kWork);
  int failed = 0;
  std::optional<std::chrono::steady_clock::time_point> corpus_start;
  for (const auto& c : kCriteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    if ((c.id == 7 || c.id == 8) && !corpus_start) corpus_start = start;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    // 7 and 8 share one corpus run; the budget covers both together.
    if (c.id == 7 || c.id == 8) {
      secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - *corpus_start).count();
    }
    const bool in_time = c.budget_s <= 0.0 || secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::printf("criterion %2d %-38s %s  %s; %.2fs%s\n", c.id, c.name, pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs,
                in_time ? "" : fmt(" exceeds the %.0fs budget", c.budget_s).c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
