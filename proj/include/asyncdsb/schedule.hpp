#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "asyncdsb/tensor.hpp"

namespace asyncdsb {

struct ScheduleConfig {
  std::size_t steps = 1000;
  double total_mass = 1.0;
  double beta_min = 1e-4;  // endpoint value of beta; default 1e-4 * total_mass
  double base_apex = 0.5;

  double dt() const { return 1.0 / static_cast<double>(steps); }

  // Throws ConfigError on a violated invariant.
  void validate() const;
};

// Reads `key=value` lines (steps, beta_min, total_mass, base_apex); '#' starts
// a comment. Keys not present keep the values of `defaults`. When total_mass
// is given without beta_min, beta_min follows it at 1e-4 * total_mass.
ScheduleConfig load_schedule_config(const std::filesystem::path& path,
                                    ScheduleConfig defaults = {});
ScheduleConfig parse_schedule_config(std::string_view text, ScheduleConfig defaults = {});

// Piecewise-linear beta: beta_min at t = 0 and t = 1, apex at t = apex.
struct TriangleShape {
  double apex = 0.5;
  double beta_min = 0.0;
  double height = 0.0;

  double beta(double t) const;
  // Closed-form integral of beta over [0, t].
  double mass_until(double t) const;
};

// Discretized beta on the T unit intervals. Cell k covers [k/T, (k+1)/T]
// and holds the cell average of the continuous profile, which coincides
// with the midpoint value except in the single cell that contains the apex.
class NoiseSchedule {
 public:
  NoiseSchedule(std::vector<double> betas, double total_mass,
                std::optional<TriangleShape> shape = std::nullopt);

  std::size_t steps() const { return betas_.size(); }
  double dt() const { return 1.0 / static_cast<double>(betas_.size()); }
  double total_mass() const { return total_mass_; }
  std::span<const double> betas() const { return betas_; }
  double midpoint(std::size_t k) const;
  const std::optional<TriangleShape>& shape() const { return shape_; }

  // Continuous beta(t): the exact profile when the generating shape is known,
  // otherwise linear interpolation between midpoint samples.
  double beta_at(double t) const;
  // Integral of beta over [0, t] for any real t in [0,1].
  double mass_until(double t) const;

  friend bool operator==(const NoiseSchedule& a, const NoiseSchedule& b) {
    return a.betas_ == b.betas_ && a.total_mass_ == b.total_mass_;
  }

 private:
  std::vector<double> betas_;
  double total_mass_;
  std::optional<TriangleShape> shape_;
};

NoiseSchedule build_symmetric(const ScheduleConfig& config);

// Apex moved to `tau` (clamped to [dt, 1 - dt]); total mass is preserved.
NoiseSchedule build_shifted(const ScheduleConfig& config, double tau);

// Per-pixel schedules, materialized lazily from (config, tau map).
class PixelScheduleField {
 public:
  PixelScheduleField(ScheduleConfig config, TauMap tau);

  const ScheduleConfig& config() const { return config_; }
  const TauMap& tau() const { return tau_; }
  std::size_t height() const { return tau_.height(); }
  std::size_t width() const { return tau_.width(); }
  std::size_t steps() const { return config_.steps; }

  NoiseSchedule pixel(std::size_t i, std::size_t j) const;

  // Region-average of the per-pixel betas (whole image when region is empty).
  // Still a valid schedule with the shared total mass.
  NoiseSchedule mean_schedule(const Mask* region = nullptr) const;

 private:
  ScheduleConfig config_;
  TauMap tau_;
};

PixelScheduleField build_field(const ScheduleConfig& config, const TauMap& tau);

// Accumulated variances on the closed grid {0, 1/T, ..., 1}:
//   sigma2[k] = sum_{j<k} beta_j dt,   sigma2_bar[k] = sum_{j>=k} beta_j dt.
// A field keeps one table per distinct tau plus a pixel -> table index.
class VarianceTable {
 public:
  struct Column {
    std::vector<double> sigma2;
    std::vector<double> sigma2_bar;
    std::shared_ptr<const NoiseSchedule> schedule;
  };

  static VarianceTable from(const NoiseSchedule& schedule);
  static VarianceTable from(const PixelScheduleField& field);

  std::size_t steps() const { return steps_; }
  double total_mass() const { return total_mass_; }
  bool per_pixel() const { return !pixel_column_.empty(); }
  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }
  std::size_t column_count() const { return columns_.size(); }

  // Pixel index p = i * W + j; ignored for a global table.
  const Column& column(std::size_t pixel = 0) const {
    return columns_[pixel_column_.empty() ? 0 : pixel_column_[pixel]];
  }
  double sigma2(std::size_t step, std::size_t pixel = 0) const {
    return column(pixel).sigma2[step];
  }
  double sigma2_bar(std::size_t step, std::size_t pixel = 0) const {
    return column(pixel).sigma2_bar[step];
  }
  // Continuous-time accumulation from the generating schedule.
  double sigma2_at(double t, std::size_t pixel = 0) const;
  double beta_at(double t, std::size_t pixel = 0) const;

  // Throws ValidationError unless the table is global or sized h x w.
  void check_dims(std::size_t h, std::size_t w) const;

 private:
  static Column accumulate_column(std::shared_ptr<const NoiseSchedule> schedule);

  std::size_t steps_ = 0;
  double total_mass_ = 0.0;
  std::size_t h_ = 0;
  std::size_t w_ = 0;
  std::vector<Column> columns_;
  std::vector<std::uint32_t> pixel_column_;
};

VarianceTable accumulate(const NoiseSchedule& schedule);
VarianceTable accumulate(const PixelScheduleField& field);

// CSV with header `t,beta`, one row per cell midpoint, 17 significant digits.
void export_csv(const NoiseSchedule& schedule, const std::filesystem::path& path);
// CSV with header `t,beta,i,j` for the listed pixels.
void export_csv(const PixelScheduleField& field,
                std::span<const std::pair<std::size_t, std::size_t>> pixels,
                const std::filesystem::path& path);
// Reads a `t,beta` CSV back; total mass is recomputed from the betas.
NoiseSchedule import_csv(const std::filesystem::path& path);

}  // namespace asyncdsb
