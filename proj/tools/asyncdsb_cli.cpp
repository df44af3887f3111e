#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "handles.hpp"

namespace {

enum Exit : int { kOk = 0, kValidation = 2, kIo = 3, kInternal = 4 };

int exit_code(adsb_status s) {
  switch (s) {
    case ADSB_OK:
      return kOk;
    case ADSB_ERR_VALIDATION:
    case ADSB_ERR_CONFIG:
    case ADSB_ERR_SINGULAR:
      return kValidation;
    case ADSB_ERR_IO:
      return kIo;
    default:
      return kInternal;
  }
}

void add_async(CLI::App* app, cli::AsyncArgs& a) {
  app->add_option("--tau-min", a.tau_min, "earliest apex, for the flattest pixels");
  app->add_option("--tau-max", a.tau_max, "latest apex, for the strongest gradients");
  app->add_option("--gauss-sigma", a.gauss_sigma, "gradient smoothing width in pixels");
  app->add_option("--completer", a.completer, "gradient completer: oracle | harmonic");
  app->add_flag("!--global-norm", a.normalize_over_region,
                "normalize gradients over the whole image instead of the corrupted region");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Schedule-asynchronous diffusion bridge inpainting"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(adsb_version()));

  cli::Common common;
  std::string out_dir = "out";
  std::string config_file;
  std::optional<double> total_mass;
  std::optional<double> beta_min;
  std::optional<double> base_apex;
  std::optional<std::uint32_t> steps;
  app.add_option("--seed", common.seed, "seed for noise, masks and corpus");
  app.add_option("--steps", steps, "discretization steps T");
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--config", config_file, "key=value schedule file (steps, beta_min, total_mass, base_apex)");
  app.add_option("--total-mass", total_mass, "integral of beta over [0,1]");
  app.add_option("--beta-min", beta_min, "beta at t = 0 and t = 1 (default 1e-4 * total mass)");
  app.add_option("--base-apex", base_apex, "apex of the synchronous schedule");

  cli::ScheduleArgs sched;
  std::optional<double> tau;
  auto* schedule = app.add_subcommand("schedule", "write a schedule CSV and plot");
  schedule->add_option("--tau", tau, "apex of a shifted global schedule, in [0,1]");
  schedule->add_option("--tau-map", sched.tau_map, "tau map (16-bit PNG with sidecar, or .raw)");
  schedule->add_option("--pixel", sched.pixels, "i,j pixel slices of a tau-map field")->delimiter(',');

  cli::MaskArgs mask;
  auto* mask_cmd = app.add_subcommand("mask", "generate a mask PNG");
  mask_cmd->add_option("--kind", mask.kind, "center | half | wide | narrow");
  mask_cmd->add_option("--height", mask.height);
  mask_cmd->add_option("--width", mask.width);
  mask_cmd->add_option("--bucket", mask.bucket, "ratio bucket 1..4 (stroke mask of that ratio)")
      ->check(CLI::Range(1, 4));

  cli::CorpusArgs corpus;
  auto* corpus_cmd = app.add_subcommand("corpus", "write the synthetic image corpus");
  corpus_cmd->add_option("--count", corpus.count);
  corpus_cmd->add_option("--height", corpus.height);
  corpus_cmd->add_option("--width", corpus.width);
  corpus_cmd->add_option("--channels", corpus.channels)->check(CLI::IsMember({1, 3}));

  cli::TaumapArgs taumap;
  auto* taumap_cmd = app.add_subcommand("taumap", "gradient completion and per-pixel apex map");
  taumap_cmd->add_option("--image", taumap.image, "input image PNG")->required();
  taumap_cmd->add_option("--mask", taumap.mask, "mask PNG, 255 = corrupted")->required();
  taumap_cmd->add_option("--ground-truth", taumap.ground_truth, "clean image (oracle completer)");
  add_async(taumap_cmd, taumap.async);

  cli::InpaintArgs inpaint;
  auto* inpaint_cmd = app.add_subcommand("inpaint", "run the full inpainting pipeline");
  inpaint_cmd->add_option("--image", inpaint.image, "input image PNG")->required();
  inpaint_cmd->add_option("--mask", inpaint.mask, "mask PNG, 255 = corrupted")->required();
  inpaint_cmd->add_option("--ground-truth", inpaint.ground_truth, "clean image for oracles and metrics");
  inpaint_cmd->add_option("--score", inpaint.score, "score model: oracle | harmonic");
  inpaint_cmd->add_flag("--sync", inpaint.sync, "use the synchronous global schedule");
  inpaint_cmd->add_flag("!--no-clamp", inpaint.clamp_visible, "do not re-impose visible pixels");
  inpaint_cmd->add_option("--record-every", inpaint.record_every, "trajectory stride in steps");
  inpaint_cmd->add_flag("--save-states", inpaint.save_states, "write every recorded state as PNG");
  add_async(inpaint_cmd, inpaint.async);

  cli::DiagnoseArgs diagnose;
  auto* diagnose_cmd = app.add_subcommand("diagnose", "schedule-restoration mismatch analysis");
  diagnose_cmd->add_option("--run", diagnose.run, "completed inpaint run directory");
  diagnose_cmd->add_option("--image", diagnose.image, "input image (defaults to the ground truth)");
  diagnose_cmd->add_option("--mask", diagnose.mask);
  diagnose_cmd->add_option("--ground-truth", diagnose.ground_truth);
  diagnose_cmd->add_option("--record-every", diagnose.record_every);
  add_async(diagnose_cmd, diagnose.async);

  cli::SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "tau_min x tau_max grid over the synthetic corpus");
  sweep_cmd->add_option("--taus", sweep.taus, "grid values in [0,1]")->delimiter(',');
  sweep_cmd->add_option("--mask-kinds", sweep.mask_kinds)->delimiter(',');
  sweep_cmd->add_flag("--buckets", sweep.buckets, "one grid per mask-ratio bucket");
  sweep_cmd->add_option("--count", sweep.count, "corpus size");
  sweep_cmd->add_option("--height", sweep.height);
  sweep_cmd->add_option("--width", sweep.width);
  sweep_cmd->add_option("--gauss-sigma", sweep.gauss_sigma);
  sweep_cmd->add_option("--completer", sweep.completer);
  sweep_cmd->add_option("--record-every", sweep.record_every);
  sweep_cmd->add_option("--jobs", sweep.jobs, "worker threads (0 = all cores)");

  std::string manifest;
  auto* replay_cmd = app.add_subcommand("replay", "re-run a command from its manifest.json");
  replay_cmd->add_option("manifest", manifest, "manifest.json of an earlier run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    const std::filesystem::path out(out_dir);
    if (*replay_cmd) {
      cli::cmd_replay(manifest, out);
      return kOk;
    }

    adsb_schedule_config cfg{};
    adsb_schedule_config_default(&cfg);
    if (!config_file.empty()) cli::check(adsb_schedule_config_load(config_file.c_str(), &cfg));
    if (steps) cfg.steps = *steps;
    if (total_mass) {
      cfg.total_mass = *total_mass;
      if (!beta_min) cfg.beta_min = 1e-4 * *total_mass;
    }
    if (beta_min) cfg.beta_min = *beta_min;
    if (base_apex) cfg.base_apex = *base_apex;
    common.steps = cfg.steps;
    common.total_mass = cfg.total_mass;
    common.beta_min = cfg.beta_min;
    common.base_apex = cfg.base_apex;

    if (*schedule) {
      sched.has_tau = tau.has_value();
      sched.tau = tau.value_or(common.base_apex);
      cli::cmd_schedule(common, sched, out);
    } else if (*mask_cmd) {
      cli::cmd_mask(common, mask, out);
    } else if (*corpus_cmd) {
      cli::cmd_corpus(common, corpus, out);
    } else if (*taumap_cmd) {
      cli::cmd_taumap(common, taumap, out);
    } else if (*inpaint_cmd) {
      cli::cmd_inpaint(common, inpaint, out);
    } else if (*diagnose_cmd) {
      cli::cmd_diagnose(common, diagnose, out);
    } else if (*sweep_cmd) {
      cli::cmd_sweep(common, sweep, out);
    }
    return kOk;
  } catch (const cli::Failure& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.status());
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return kInternal;
  }
}
