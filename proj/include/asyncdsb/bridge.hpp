#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "asyncdsb/rng.hpp"
#include "asyncdsb/schedule.hpp"
#include "asyncdsb/tensor.hpp"

namespace asyncdsb {

// x0 is the clean target (t = 0), x1 the corrupted image (t = 1).
struct BridgeEndpoints {
  ImageTensor x0;
  ImageTensor x1;

  void validate() const;
};

// Gaussian bridge marginal q(x_t | x0, x1). `var` holds one variance per
// pixel (shared by its channels).
struct PosteriorParams {
  ImageTensor mean;
  std::vector<double> var;
};

// Grid times are step indices k in [0, T], t = k / T.
PosteriorParams posterior_params(const BridgeEndpoints& ep, std::size_t step,
                                 const VarianceTable& vt);

// mean + sqrt(var) * z, z drawn per (draw, pixel, channel).
ImageTensor sample_xt(const BridgeEndpoints& ep, std::size_t step, const VarianceTable& vt,
                      const NoiseSource& noise, std::uint32_t draw = 0);

// (x_t - x0) / sigma_t^2. Throws SingularityError at step 0.
ScoreTensor analytic_score(const ImageTensor& x_t, const ImageTensor& x0, std::size_t step,
                           const VarianceTable& vt);

// Normalized regression target (x_t - x0) / sigma_t.
ScoreTensor training_target(const ImageTensor& x_t, const ImageTensor& x0, std::size_t step,
                            const VarianceTable& vt);

// Mean over all elements of (pred - target)^2.
double score_matching_loss(const ScoreTensor& pred, const ImageTensor& x_t,
                           const ImageTensor& x0, std::size_t step, const VarianceTable& vt);

// Inverts the normalized target: x0_hat = x_t - sigma_t * score.
ImageTensor predict_x0(const ImageTensor& x_t, const ScoreTensor& score, std::size_t step,
                       const VarianceTable& vt);

// One draw from the bridge posterior between x0_hat (time 0) and x_t:
//   mean = ((s_t - s_p) x0_hat + s_p x_t) / s_t,  var = s_p (s_t - s_p) / s_t
// with s = sigma^2 per pixel. Noise is keyed by `step`.
ImageTensor reverse_step(const ImageTensor& x_t, const ImageTensor& x0_hat, std::size_t step,
                         std::size_t step_prev, const VarianceTable& vt,
                         const NoiseSource& noise);

// Emits the normalized score s_theta(x_t, t) for every element of x_t.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;
  virtual ScoreTensor evaluate(const ImageTensor& x_t, std::size_t step,
                               const VarianceTable& vt) const = 0;
};

// Exact score given the clean target. Test and demo use only.
class AnalyticOracle final : public ScoreModel {
 public:
  explicit AnalyticOracle(ImageTensor x0) : x0_(std::move(x0)) {}
  ScoreTensor evaluate(const ImageTensor& x_t, std::size_t step,
                       const VarianceTable& vt) const override;

 private:
  ImageTensor x0_;
};

// Non-learned stand-in that targets a harmonic (Laplace) fill of the visible
// pixels. Needs no ground truth.
class HarmonicPriorModel final : public ScoreModel {
 public:
  HarmonicPriorModel(const ImageTensor& x_c, const Mask& mask);
  ScoreTensor evaluate(const ImageTensor& x_t, std::size_t step,
                       const VarianceTable& vt) const override;
  const ImageTensor& estimate() const { return estimate_; }

 private:
  ImageTensor estimate_;
};

struct SamplerConfig {
  std::size_t steps = 1000;
  std::uint64_t seed = 0;
  bool clamp_visible = true;
  std::size_t record_every = 1;
};

struct TrajectoryEntry {
  std::size_t step;
  double t;
  ImageTensor state;
};

// Reverse-time states, t strictly decreasing from 1 to 0.
struct Trajectory {
  std::size_t steps = 0;
  std::vector<TrajectoryEntry> entries;

  const ImageTensor& final_state() const { return entries.back().state; }
};

// Known pixels re-imposed after every step when clamp_visible is set.
struct VisibleData {
  const Mask& mask;          // 1 = corrupted, so visible = mask 0
  const ImageTensor& values;
};

Trajectory run_reverse(const ImageTensor& x1, const ScoreModel& model, const VarianceTable& vt,
                       const SamplerConfig& cfg, const VisibleData* visible = nullptr);
Trajectory run_reverse(const ImageTensor& x1, const ScoreModel& model,
                       const NoiseSchedule& schedule, const SamplerConfig& cfg,
                       const VisibleData* visible = nullptr);
Trajectory run_reverse(const ImageTensor& x1, const ScoreModel& model,
                       const PixelScheduleField& field, const SamplerConfig& cfg,
                       const VisibleData* visible = nullptr);

// Noise-free restoration speed d mu_t / dt = beta_t (x1 - x0) / (sigma_bar^2 + sigma^2),
// evaluated at continuous t. With a mask the corruption model x1 = (1 - m) x0
// is substituted: -beta_t x0 m / (sigma_bar^2 + sigma^2).
ImageTensor theoretical_speed(const BridgeEndpoints& ep, double t, const VarianceTable& vt,
                              const Mask* mask = nullptr);

// Posterior mean at continuous t, from the exact accumulated mass.
ImageTensor posterior_mean_at(const BridgeEndpoints& ep, double t, const VarianceTable& vt);

}  // namespace asyncdsb
