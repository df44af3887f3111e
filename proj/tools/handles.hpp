#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

#include "asyncdsb/asyncdsb.h"

namespace cli {

// Library failure carried up to main, where the status picks the exit code.
class Failure : public std::runtime_error {
 public:
  Failure(adsb_status status, const std::string& what)
      : std::runtime_error(what), status_(status) {}
  adsb_status status() const { return status_; }

 private:
  adsb_status status_;
};

inline void check(adsb_status s) {
  if (s != ADSB_OK) throw Failure(s, adsb_last_error());
}

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};

using Image = std::unique_ptr<adsb_image, Deleter<adsb_image, adsb_image_free>>;
using Mask = std::unique_ptr<adsb_mask, Deleter<adsb_mask, adsb_mask_free>>;
using Map = std::unique_ptr<adsb_map, Deleter<adsb_map, adsb_map_free>>;
using Schedule = std::unique_ptr<adsb_schedule, Deleter<adsb_schedule, adsb_schedule_free>>;
using Trajectory =
    std::unique_ptr<adsb_trajectory, Deleter<adsb_trajectory, adsb_trajectory_free>>;
using Curve = std::unique_ptr<adsb_curve, Deleter<adsb_curve, adsb_curve_free>>;

// Calls a C constructor whose last parameter is the output handle.
template <class H, class F, class... Args>
H make(F&& f, Args&&... args) {
  typename H::pointer raw = nullptr;
  check(std::forward<F>(f)(std::forward<Args>(args)..., &raw));
  return H(raw);
}

}  // namespace cli
