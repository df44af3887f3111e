#include "asyncdsb/schedule.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "asyncdsb/error.hpp"
#include "text_util.hpp"

namespace asyncdsb {

void ScheduleConfig::validate() const {
  if (steps < 2) throw ConfigError("steps must be >= 2");
  if (!(total_mass > 0.0) || !std::isfinite(total_mass)) {
    throw ConfigError("total_mass must be a positive finite number");
  }
  if (!(beta_min >= 0.0)) throw ConfigError("beta_min must be >= 0");
  if (!(beta_min < total_mass)) {
    throw ConfigError("beta_min must be smaller than total_mass (no valid apex height)");
  }
  if (!(base_apex > 0.0 && base_apex < 1.0)) {
    throw ConfigError("base_apex must lie in (0,1)");
  }
}

ScheduleConfig parse_schedule_config(std::string_view text, ScheduleConfig defaults) {
  ScheduleConfig cfg = defaults;
  bool beta_min_given = false;
  bool mass_given = false;
  try {
    for (const auto& [key, value] : detail::parse_key_values(text)) {
      if (key == "steps") {
        cfg.steps = static_cast<std::size_t>(detail::parse_uint(value, key));
      } else if (key == "beta_min") {
        cfg.beta_min = detail::parse_double(value, key);
        beta_min_given = true;
      } else if (key == "total_mass") {
        cfg.total_mass = detail::parse_double(value, key);
        mass_given = true;
      } else if (key == "base_apex") {
        cfg.base_apex = detail::parse_double(value, key);
      }
    }
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());  // malformed file content is a configuration problem
  }
  if (mass_given && !beta_min_given) cfg.beta_min = 1e-4 * cfg.total_mass;
  cfg.validate();
  return cfg;
}

ScheduleConfig load_schedule_config(const std::filesystem::path& path, ScheduleConfig defaults) {
  return parse_schedule_config(detail::read_text(path), defaults);
}

double TriangleShape::beta(double t) const {
  double unit;
  if (t <= apex) {
    unit = t / apex;
  } else {
    unit = (1.0 - t) / (1.0 - apex);
  }
  return beta_min + (height - beta_min) * std::clamp(unit, 0.0, 1.0);
}

double TriangleShape::mass_until(double t) const {
  t = std::clamp(t, 0.0, 1.0);
  double area;
  if (t <= apex) {
    area = t * t / (2.0 * apex);
  } else {
    const double rest = 1.0 - apex;
    const double u = 1.0 - t;
    area = 0.5 * apex + (rest * rest - u * u) / (2.0 * rest);
  }
  return beta_min * t + (height - beta_min) * area;
}

NoiseSchedule::NoiseSchedule(std::vector<double> betas, double total_mass,
                             std::optional<TriangleShape> shape)
    : betas_(std::move(betas)), total_mass_(total_mass), shape_(shape) {
  if (betas_.size() < 2) throw ValidationError("a schedule needs at least 2 steps");
  for (double b : betas_) {
    if (!(b > 0.0) || !std::isfinite(b)) {
      throw ValidationError("schedule values must be positive and finite");
    }
  }
}

double NoiseSchedule::midpoint(std::size_t k) const {
  return (2.0 * static_cast<double>(k) + 1.0) / (2.0 * static_cast<double>(steps()));
}

double NoiseSchedule::beta_at(double t) const {
  if (shape_) return shape_->beta(t);
  const double pos = t * static_cast<double>(steps()) - 0.5;
  if (pos <= 0.0) return betas_.front();
  const auto last = static_cast<double>(steps() - 1);
  if (pos >= last) return betas_.back();
  const auto k = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(k);
  return betas_[k] + frac * (betas_[k + 1] - betas_[k]);
}

double NoiseSchedule::mass_until(double t) const {
  t = std::clamp(t, 0.0, 1.0);
  if (shape_) return shape_->mass_until(t);
  const double pos = t * static_cast<double>(steps());
  const auto full = std::min(static_cast<std::size_t>(pos), steps());
  double m = 0.0;
  for (std::size_t k = 0; k < full; ++k) m += betas_[k] * dt();
  if (full < steps()) m += betas_[full] * (pos - static_cast<double>(full)) * dt();
  return m;
}

namespace {

// Unit-height triangle with apex `tau`, averaged over cell k of T.
// Written in integer grid coordinates so that tau = 0.5 yields exactly
// mirrored values.
double cell_shape(std::size_t k, std::size_t steps, double tau) {
  const auto T = static_cast<double>(steps);
  const auto kd = static_cast<double>(k);
  const double a = kd / T;
  const double b = (kd + 1.0) / T;
  const double rest = 1.0 - tau;
  if (b <= tau) return (2.0 * kd + 1.0) / (2.0 * T) / tau;
  if (a >= tau) return (2.0 * (T - kd) - 1.0) / (2.0 * T) / rest;
  const double ub = (T - kd - 1.0) / T;
  const double rising = (tau * tau - a * a) / (2.0 * tau);
  const double falling = (rest * rest - ub * ub) / (2.0 * rest);
  return (rising + falling) * T;
}

double clamp_tau(double tau, std::size_t steps) {
  const double dt = 1.0 / static_cast<double>(steps);
  return std::clamp(tau, dt, 1.0 - dt);
}

}  // namespace

NoiseSchedule build_shifted(const ScheduleConfig& config, double tau) {
  config.validate();
  if (!(tau >= 0.0 && tau <= 1.0)) throw ValidationError("tau must lie in [0,1]");
  tau = clamp_tau(tau, config.steps);
  // Continuous area is beta_min + (h - beta_min) / 2 for any apex abscissa.
  const double height = 2.0 * config.total_mass - config.beta_min;
  std::vector<double> betas(config.steps);
  for (std::size_t k = 0; k < config.steps; ++k) {
    betas[k] = config.beta_min + (height - config.beta_min) * cell_shape(k, config.steps, tau);
  }
  return NoiseSchedule(std::move(betas), config.total_mass,
                       TriangleShape{tau, config.beta_min, height});
}

NoiseSchedule build_symmetric(const ScheduleConfig& config) {
  return build_shifted(config, config.base_apex);
}

PixelScheduleField::PixelScheduleField(ScheduleConfig config, TauMap tau)
    : config_(config), tau_(std::move(tau)) {
  config_.validate();
  for (double v : tau_.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("tau map values must lie in [0,1]");
  }
}

NoiseSchedule PixelScheduleField::pixel(std::size_t i, std::size_t j) const {
  return build_shifted(config_, tau_.at(i, j));
}

NoiseSchedule PixelScheduleField::mean_schedule(const Mask* region) const {
  const bool use_region = region != nullptr && region->any();
  if (use_region && (region->height() != height() || region->width() != width())) {
    throw ValidationError("region mask does not match the tau map");
  }
  std::map<double, std::size_t> counts;
  for (std::size_t p = 0; p < tau_.pixels(); ++p) {
    if (!use_region || (*region)[p]) ++counts[tau_[p]];
  }
  std::vector<double> betas(config_.steps, 0.0);
  std::size_t total = 0;
  for (const auto& [tau, n] : counts) {
    const auto s = build_shifted(config_, tau);
    for (std::size_t k = 0; k < betas.size(); ++k) {
      betas[k] += static_cast<double>(n) * s.betas()[k];
    }
    total += n;
  }
  for (auto& b : betas) b /= static_cast<double>(total);
  return NoiseSchedule(std::move(betas), config_.total_mass);
}

PixelScheduleField build_field(const ScheduleConfig& config, const TauMap& tau) {
  return PixelScheduleField(config, tau);
}

VarianceTable::Column VarianceTable::accumulate_column(
    std::shared_ptr<const NoiseSchedule> schedule) {
  const auto betas = schedule->betas();
  const std::size_t T = betas.size();
  const double dt = schedule->dt();
  Column col;
  col.sigma2.assign(T + 1, 0.0);
  col.sigma2_bar.assign(T + 1, 0.0);
  for (std::size_t k = 0; k < T; ++k) col.sigma2[k + 1] = col.sigma2[k] + betas[k] * dt;
  for (std::size_t k = T; k-- > 0;) col.sigma2_bar[k] = col.sigma2_bar[k + 1] + betas[k] * dt;
  col.schedule = std::move(schedule);
  return col;
}

VarianceTable VarianceTable::from(const NoiseSchedule& schedule) {
  VarianceTable vt;
  vt.steps_ = schedule.steps();
  vt.total_mass_ = schedule.total_mass();
  vt.columns_.push_back(accumulate_column(std::make_shared<const NoiseSchedule>(schedule)));
  return vt;
}

VarianceTable VarianceTable::from(const PixelScheduleField& field) {
  VarianceTable vt;
  vt.steps_ = field.steps();
  vt.total_mass_ = field.config().total_mass;
  vt.h_ = field.height();
  vt.w_ = field.width();
  vt.pixel_column_.resize(field.tau().pixels());
  std::map<std::uint64_t, std::uint32_t> index;
  for (std::size_t p = 0; p < field.tau().pixels(); ++p) {
    const double tau = clamp_tau(field.tau()[p], field.steps());
    const auto bits = std::bit_cast<std::uint64_t>(tau);
    auto it = index.find(bits);
    if (it == index.end()) {
      const auto id = static_cast<std::uint32_t>(vt.columns_.size());
      vt.columns_.push_back(accumulate_column(
          std::make_shared<const NoiseSchedule>(build_shifted(field.config(), tau))));
      it = index.emplace(bits, id).first;
    }
    vt.pixel_column_[p] = it->second;
  }
  return vt;
}

double VarianceTable::sigma2_at(double t, std::size_t pixel) const {
  return column(pixel).schedule->mass_until(t);
}

double VarianceTable::beta_at(double t, std::size_t pixel) const {
  return column(pixel).schedule->beta_at(t);
}

void VarianceTable::check_dims(std::size_t h, std::size_t w) const {
  if (per_pixel() && (h != h_ || w != w_)) {
    throw ValidationError("per-pixel variance table does not match the image size");
  }
}

VarianceTable accumulate(const NoiseSchedule& schedule) { return VarianceTable::from(schedule); }
VarianceTable accumulate(const PixelScheduleField& field) { return VarianceTable::from(field); }

void export_csv(const NoiseSchedule& schedule, const std::filesystem::path& path) {
  std::string out = "t,beta\n";
  char line[96];
  for (std::size_t k = 0; k < schedule.steps(); ++k) {
    std::snprintf(line, sizeof line, "%.17g,%.17g\n", schedule.midpoint(k), schedule.betas()[k]);
    out += line;
  }
  detail::write_text(path, out);
}

void export_csv(const PixelScheduleField& field,
                std::span<const std::pair<std::size_t, std::size_t>> pixels,
                const std::filesystem::path& path) {
  std::string out = "t,beta,i,j\n";
  char line[128];
  for (const auto& [i, j] : pixels) {
    if (i >= field.height() || j >= field.width()) {
      throw ValidationError("field slice pixel out of range");
    }
    const auto s = field.pixel(i, j);
    for (std::size_t k = 0; k < s.steps(); ++k) {
      std::snprintf(line, sizeof line, "%.17g,%.17g,%zu,%zu\n", s.midpoint(k), s.betas()[k], i, j);
      out += line;
    }
  }
  detail::write_text(path, out);
}

NoiseSchedule import_csv(const std::filesystem::path& path) {
  std::istringstream in(detail::read_text(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,beta", 0) != 0) {
    throw ValidationError("schedule CSV must start with a `t,beta` header");
  }
  std::vector<double> betas;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ValidationError("malformed schedule CSV row");
    const auto rest = line.substr(comma + 1);
    betas.push_back(detail::parse_double(rest.substr(0, rest.find(',')), "beta"));
  }
  const double dt = 1.0 / static_cast<double>(betas.size());
  double mass = 0.0;
  for (double b : betas) mass += b * dt;
  return NoiseSchedule(std::move(betas), mass);
}

}  // namespace asyncdsb
