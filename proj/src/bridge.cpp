#include "asyncdsb/bridge.hpp"

#include <cmath>
#include <string>

#include "asyncdsb/error.hpp"
#include "asyncdsb/priorgrad.hpp"

namespace asyncdsb {

namespace {

void check_step(std::size_t step, const VarianceTable& vt) {
  if (step > vt.steps()) throw ValidationError("grid step beyond T");
}

void check_pair(const ImageTensor& a, const ImageTensor& b, const VarianceTable& vt) {
  if (!a.same_shape(b)) throw ValidationError("tensor shape mismatch");
  vt.check_dims(a.height(), a.width());
}

double sigma2_checked(const VarianceTable& vt, std::size_t step, std::size_t pixel) {
  const double s2 = vt.sigma2(step, pixel);
  if (!(s2 > 0.0)) throw SingularityError("sigma_t vanishes at t = 0");
  return s2;
}

// Applies f(pixel, element index) over every element of a tensor shaped like `like`.
template <class F>
ImageTensor per_element(const ImageTensor& like, F&& f) {
  ImageTensor out(like.height(), like.width(), like.channels());
  const std::size_t c = like.channels();
  for (std::size_t p = 0; p < like.pixels(); ++p) {
    for (std::size_t ch = 0; ch < c; ++ch) out[p * c + ch] = f(p, p * c + ch);
  }
  return out;
}

}  // namespace

void BridgeEndpoints::validate() const {
  if (!x0.same_shape(x1)) throw ValidationError("bridge endpoints differ in shape");
  if (x0.empty()) throw ValidationError("bridge endpoints are empty");
}

PosteriorParams posterior_params(const BridgeEndpoints& ep, std::size_t step,
                                 const VarianceTable& vt) {
  ep.validate();
  check_step(step, vt);
  vt.check_dims(ep.x0.height(), ep.x0.width());
  PosteriorParams out{ImageTensor(ep.x0.height(), ep.x0.width(), ep.x0.channels()),
                      std::vector<double>(ep.x0.pixels())};
  const std::size_t c = ep.x0.channels();
  for (std::size_t p = 0; p < ep.x0.pixels(); ++p) {
    const double s2 = vt.sigma2(step, p);
    const double sb2 = vt.sigma2_bar(step, p);
    const double denom = s2 + sb2;
    // Weight form keeps both boundaries exact: w0 = 1, w1 = 0 at t = 0 and vice versa.
    const double w0 = sb2 / denom;
    const double w1 = s2 / denom;
    out.var[p] = s2 * sb2 / denom;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t e = p * c + ch;
      out.mean[e] = w0 * ep.x0[e] + w1 * ep.x1[e];
    }
  }
  return out;
}

ImageTensor sample_xt(const BridgeEndpoints& ep, std::size_t step, const VarianceTable& vt,
                      const NoiseSource& noise, std::uint32_t draw) {
  auto post = posterior_params(ep, step, vt);
  const std::size_t w = ep.x0.width();
  const std::size_t c = ep.x0.channels();
  for (std::size_t p = 0; p < ep.x0.pixels(); ++p) {
    const double sd = std::sqrt(post.var[p]);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const NoiseKey key{draw, static_cast<std::uint32_t>(p / w),
                         static_cast<std::uint32_t>(p % w), static_cast<std::uint32_t>(ch)};
      post.mean[p * c + ch] += sd * noise.normal(key);
    }
  }
  return std::move(post.mean);
}

ScoreTensor analytic_score(const ImageTensor& x_t, const ImageTensor& x0, std::size_t step,
                           const VarianceTable& vt) {
  check_pair(x_t, x0, vt);
  check_step(step, vt);
  return per_element(x_t, [&](std::size_t p, std::size_t e) {
    return (x_t[e] - x0[e]) / sigma2_checked(vt, step, p);
  });
}

ScoreTensor training_target(const ImageTensor& x_t, const ImageTensor& x0, std::size_t step,
                            const VarianceTable& vt) {
  check_pair(x_t, x0, vt);
  check_step(step, vt);
  return per_element(x_t, [&](std::size_t p, std::size_t e) {
    return (x_t[e] - x0[e]) / std::sqrt(sigma2_checked(vt, step, p));
  });
}

double score_matching_loss(const ScoreTensor& pred, const ImageTensor& x_t,
                           const ImageTensor& x0, std::size_t step, const VarianceTable& vt) {
  if (!pred.same_shape(x_t)) throw ValidationError("prediction shape mismatch");
  const auto target = training_target(x_t, x0, step, vt);
  double acc = 0.0;
  for (std::size_t e = 0; e < target.size(); ++e) {
    const double d = pred[e] - target[e];
    acc += d * d;
  }
  return acc / static_cast<double>(target.size());
}

ImageTensor predict_x0(const ImageTensor& x_t, const ScoreTensor& score, std::size_t step,
                       const VarianceTable& vt) {
  check_pair(x_t, score, vt);
  check_step(step, vt);
  return per_element(x_t, [&](std::size_t p, std::size_t e) {
    return x_t[e] - std::sqrt(sigma2_checked(vt, step, p)) * score[e];
  });
}

ImageTensor reverse_step(const ImageTensor& x_t, const ImageTensor& x0_hat, std::size_t step,
                         std::size_t step_prev, const VarianceTable& vt,
                         const NoiseSource& noise) {
  check_pair(x_t, x0_hat, vt);
  check_step(step, vt);
  if (step_prev >= step) throw ValidationError("reverse step needs t_prev < t");
  ImageTensor out(x_t.height(), x_t.width(), x_t.channels());
  const std::size_t w = x_t.width();
  const std::size_t c = x_t.channels();
  for (std::size_t p = 0; p < x_t.pixels(); ++p) {
    const double s_t = sigma2_checked(vt, step, p);
    const double s_p = vt.sigma2(step_prev, p);
    const double w_x0 = (s_t - s_p) / s_t;
    const double w_xt = s_p / s_t;
    const double sd = std::sqrt(s_p * (s_t - s_p) / s_t);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t e = p * c + ch;
      double v = w_x0 * x0_hat[e] + w_xt * x_t[e];
      if (sd > 0.0) {
        const NoiseKey key{static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(p / w),
                           static_cast<std::uint32_t>(p % w), static_cast<std::uint32_t>(ch)};
        v += sd * noise.normal(key);
      }
      out[e] = v;
    }
  }
  return out;
}

ScoreTensor AnalyticOracle::evaluate(const ImageTensor& x_t, std::size_t step,
                                     const VarianceTable& vt) const {
  return training_target(x_t, x0_, step, vt);
}

HarmonicPriorModel::HarmonicPriorModel(const ImageTensor& x_c, const Mask& mask)
    : estimate_(harmonic_fill(x_c, mask)) {}

ScoreTensor HarmonicPriorModel::evaluate(const ImageTensor& x_t, std::size_t step,
                                         const VarianceTable& vt) const {
  return training_target(x_t, estimate_, step, vt);
}

namespace {

void impose_visible(ImageTensor& x, const VisibleData& visible) {
  const std::size_t c = x.channels();
  for (std::size_t p = 0; p < x.pixels(); ++p) {
    if (visible.mask[p]) continue;
    for (std::size_t ch = 0; ch < c; ++ch) x[p * c + ch] = visible.values[p * c + ch];
  }
}

}  // namespace

Trajectory run_reverse(const ImageTensor& x1, const ScoreModel& model, const VarianceTable& vt,
                       const SamplerConfig& cfg, const VisibleData* visible) {
  if (cfg.steps != vt.steps()) throw ValidationError("sampler steps do not match the schedule");
  if (cfg.record_every == 0) throw ValidationError("record_every must be positive");
  if (x1.empty()) throw ValidationError("empty start image");
  vt.check_dims(x1.height(), x1.width());
  if (cfg.clamp_visible) {
    if (visible == nullptr) throw ConfigError("clamp_visible requires visible data");
    if (visible->mask.height() != x1.height() || visible->mask.width() != x1.width() ||
        !visible->values.same_shape(x1)) {
      throw ValidationError("visible data does not match the start image");
    }
  }

  const std::size_t T = cfg.steps;
  const PhiloxNoise noise(cfg.seed);
  Trajectory traj;
  traj.steps = T;

  ImageTensor x = x1;
  if (cfg.clamp_visible) impose_visible(x, *visible);
  traj.entries.push_back({T, 1.0, x});

  for (std::size_t k = T; k >= 1; --k) {
    const auto score = model.evaluate(x, k, vt);
    if (!score.same_shape(x)) {
      throw ValidationError("score model output shape mismatch at step " + std::to_string(k));
    }
    const auto x0_hat = predict_x0(x, score, k, vt);
    x = reverse_step(x, x0_hat, k, k - 1, vt, noise);
    if (cfg.clamp_visible) impose_visible(x, *visible);
    const std::size_t prev = k - 1;
    if ((T - prev) % cfg.record_every == 0 || prev == 0) {
      traj.entries.push_back({prev, static_cast<double>(prev) / static_cast<double>(T), x});
    }
  }
  return traj;
}

Trajectory run_reverse(const ImageTensor& x1, const ScoreModel& model,
                       const NoiseSchedule& schedule, const SamplerConfig& cfg,
                       const VisibleData* visible) {
  return run_reverse(x1, model, VarianceTable::from(schedule), cfg, visible);
}

Trajectory run_reverse(const ImageTensor& x1, const ScoreModel& model,
                       const PixelScheduleField& field, const SamplerConfig& cfg,
                       const VisibleData* visible) {
  return run_reverse(x1, model, VarianceTable::from(field), cfg, visible);
}

ImageTensor theoretical_speed(const BridgeEndpoints& ep, double t, const VarianceTable& vt,
                              const Mask* mask) {
  ep.validate();
  vt.check_dims(ep.x0.height(), ep.x0.width());
  if (mask && (mask->height() != ep.x0.height() || mask->width() != ep.x0.width())) {
    throw ValidationError("mask does not match the endpoints");
  }
  return per_element(ep.x0, [&](std::size_t p, std::size_t e) {
    const double beta = vt.beta_at(t, p);
    const auto& sched = *vt.column(p).schedule;
    const double s2 = sched.mass_until(t);
    const double denom = s2 + (sched.mass_until(1.0) - s2);
    if (mask) return (*mask)[p] ? -beta * ep.x0[e] / denom : 0.0;
    return beta * (ep.x1[e] - ep.x0[e]) / denom;
  });
}

ImageTensor posterior_mean_at(const BridgeEndpoints& ep, double t, const VarianceTable& vt) {
  ep.validate();
  vt.check_dims(ep.x0.height(), ep.x0.width());
  return per_element(ep.x0, [&](std::size_t p, std::size_t e) {
    const auto& sched = *vt.column(p).schedule;
    const double s2 = sched.mass_until(t);
    const double sb2 = sched.mass_until(1.0) - s2;
    const double denom = s2 + sb2;
    return (sb2 / denom) * ep.x0[e] + (s2 / denom) * ep.x1[e];
  });
}

}  // namespace asyncdsb
