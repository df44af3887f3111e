#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace cli {

// Settings shared by every command after defaults, --config and flags are merged.
struct Common {
  std::uint64_t seed = 0;
  std::uint32_t steps = 1000;
  double total_mass = 1.0;
  double beta_min = 1e-4;
  double base_apex = 0.5;
};

struct AsyncArgs {
  double tau_min = 0.2;
  double tau_max = 0.5;
  double gauss_sigma = 2.0;
  bool normalize_over_region = true;
  std::string completer = "harmonic";
};

struct ScheduleArgs {
  bool has_tau = false;
  double tau = 0.5;
  std::string tau_map;
  std::vector<std::uint32_t> pixels;  // interleaved (i, j)
};

struct MaskArgs {
  std::string kind = "center";
  std::uint32_t height = 64;
  std::uint32_t width = 64;
  int bucket = 0;  // 1..4 selects a ratio-bucket stroke mask instead of `kind`
};

struct CorpusArgs {
  std::uint32_t count = 4;
  std::uint32_t height = 64;
  std::uint32_t width = 64;
  std::uint32_t channels = 3;
};

struct TaumapArgs {
  std::string image;
  std::string mask;
  std::string ground_truth;
  AsyncArgs async;
};

struct InpaintArgs {
  std::string image;
  std::string mask;
  std::string ground_truth;
  AsyncArgs async;
  std::string score = "harmonic";
  bool sync = false;
  bool clamp_visible = true;
  std::uint32_t record_every = 10;
  bool save_states = false;
};

struct DiagnoseArgs {
  std::string run;  // inpaint run directory; empty = run sync and async from inputs
  std::string image;
  std::string mask;
  std::string ground_truth;
  AsyncArgs async{0.2, 0.9, 2.0, true, "oracle"};
  std::uint32_t record_every = 10;
};

struct SweepArgs {
  std::vector<double> taus{0.001, 0.2, 0.4, 0.7, 0.9};
  std::vector<std::string> mask_kinds{"center"};
  bool buckets = false;
  std::uint32_t count = 4;
  std::uint32_t height = 64;
  std::uint32_t width = 64;
  double gauss_sigma = 2.0;
  std::string completer = "oracle";
  std::uint32_t record_every = 10;
  unsigned jobs = 0;  // 0 = hardware concurrency; not part of the manifest
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Common, seed, steps, total_mass, beta_min,
                                                base_apex)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AsyncArgs, tau_min, tau_max, gauss_sigma,
                                                normalize_over_region, completer)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ScheduleArgs, has_tau, tau, tau_map, pixels)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(MaskArgs, kind, height, width, bucket)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CorpusArgs, count, height, width, channels)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TaumapArgs, image, mask, ground_truth, async)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(InpaintArgs, image, mask, ground_truth, async,
                                                score, sync, clamp_visible, record_every,
                                                save_states)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DiagnoseArgs, run, image, mask, ground_truth,
                                                async, record_every)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SweepArgs, taus, mask_kinds, buckets, count,
                                                height, width, gauss_sigma, completer,
                                                record_every)

using Path = std::filesystem::path;

void cmd_schedule(const Common& c, ScheduleArgs a, const Path& out);
void cmd_mask(const Common& c, const MaskArgs& a, const Path& out);
void cmd_corpus(const Common& c, const CorpusArgs& a, const Path& out);
void cmd_taumap(const Common& c, TaumapArgs a, const Path& out);
void cmd_inpaint(const Common& c, InpaintArgs a, const Path& out);
void cmd_diagnose(const Common& c, DiagnoseArgs a, const Path& out);
void cmd_sweep(const Common& c, SweepArgs a, const Path& out);

// Re-executes the command recorded in a manifest.json into `out`.
void cmd_replay(const Path& manifest, const Path& out);

}  // namespace cli
