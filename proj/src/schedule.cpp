#include "stochdepth/schedule.hpp"

#include <algorithm>
#include <stdexcept>

namespace stochdepth {

namespace {

void check_block_index(int l, int L) {
  if (L < 1) throw std::invalid_argument("block count must be >= 1, got " + std::to_string(L));
  if (l < 1 || l > L) {
    throw std::invalid_argument("block index " + std::to_string(l) +
                                " outside 1.." + std::to_string(L));
  }
}

void check_rate(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw std::invalid_argument(std::string(name) + " must lie in [0, 1], got " +
                                std::to_string(value));
  }
}

void check_progress(double k) {
  if (!(k >= 0.0 && k <= 1.0)) {
    throw std::invalid_argument("normalized epoch must lie in [0, 1], got " +
                                std::to_string(k));
  }
}

void require(bool present, bool wanted, const char* field, const char* family) {
  if (wanted && !present) {
    throw std::invalid_argument(std::string(family) + " schedule requires field " + field);
  }
  if (!wanted && present) {
    throw std::invalid_argument(std::string(family) + " schedule must not set field " + field);
  }
}

}  // namespace

const char* family_name(Family family) {
  switch (family) {
    case Family::Normal: return "normal";
    case Family::Fixed: return "fixed";
    case Family::EndpointGrowth: return "endpoint";
    case Family::LinearGrowth: return "linear";
    case Family::AggressiveGrowth: return "aggressive";
  }
  return "?";
}

std::optional<Family> family_from_name(std::string_view name) {
  if (name == "normal") return Family::Normal;
  if (name == "fixed") return Family::Fixed;
  if (name == "endpoint") return Family::EndpointGrowth;
  if (name == "linear") return Family::LinearGrowth;
  if (name == "aggressive") return Family::AggressiveGrowth;
  return std::nullopt;
}

ScheduleSpec ScheduleSpec::normal() {
  ScheduleSpec spec;
  spec.family = Family::Normal;
  return spec;
}

ScheduleSpec ScheduleSpec::fixed(double d_last) {
  ScheduleSpec spec;
  spec.family = Family::Fixed;
  spec.d_last = d_last;
  spec.validate();
  return spec;
}

ScheduleSpec ScheduleSpec::endpoint_growth(double d_last_start, double d_last_end) {
  ScheduleSpec spec;
  spec.family = Family::EndpointGrowth;
  spec.d_last_start = d_last_start;
  spec.d_last_end = d_last_end;
  spec.validate();
  return spec;
}

ScheduleSpec ScheduleSpec::linear_growth(double slope) {
  ScheduleSpec spec;
  spec.family = Family::LinearGrowth;
  spec.slope = slope;
  spec.validate();
  return spec;
}

ScheduleSpec ScheduleSpec::aggressive_growth(double active_fraction) {
  ScheduleSpec spec;
  spec.family = Family::AggressiveGrowth;
  spec.active_fraction = active_fraction;
  spec.validate();
  return spec;
}

void ScheduleSpec::validate() const {
  const char* name = family_name(family);
  bool want_fixed = family == Family::Fixed;
  bool want_endpoint = family == Family::EndpointGrowth;
  bool want_linear = family == Family::LinearGrowth;
  bool want_aggressive = family == Family::AggressiveGrowth;
  require(d_last.has_value(), want_fixed, "d_last", name);
  require(d_last_start.has_value(), want_endpoint, "d_last_start", name);
  require(d_last_end.has_value(), want_endpoint, "d_last_end", name);
  require(slope.has_value(), want_linear, "slope", name);
  require(active_fraction.has_value(), want_aggressive, "active_fraction", name);
  if (want_fixed) check_rate(*d_last, "d_last");
  if (want_endpoint) {
    check_rate(*d_last_start, "d_last_start");
    check_rate(*d_last_end, "d_last_end");
  }
  if (want_linear && !(*slope > 0.0 && *slope <= 1.0)) {
    throw std::invalid_argument("slope must lie in (0, 1], got " + std::to_string(*slope));
  }
  if (want_aggressive && !(*active_fraction > 0.0 && *active_fraction <= 1.0)) {
    throw std::invalid_argument("active_fraction must lie in (0, 1], got " +
                                std::to_string(*active_fraction));
  }
}

double death_rate_fixed(int l, int L, double d_last) {
  check_block_index(l, L);
  check_rate(d_last, "d_last");
  return static_cast<double>(l) / L * d_last;
}

double endpoint_rate(double k, double d_last_start, double d_last_end) {
  check_progress(k);
  check_rate(d_last_start, "d_last_start");
  check_rate(d_last_end, "d_last_end");
  return (1.0 - k) * d_last_start + k * d_last_end;
}

double death_rate_endpoint_growth(int l, int L, double k, double d_last_start,
                                  double d_last_end) {
  check_block_index(l, L);
  return static_cast<double>(l) / L * endpoint_rate(k, d_last_start, d_last_end);
}

double death_rate_linear_growth(int l, int L, double k, double slope) {
  check_block_index(l, L);
  check_progress(k);
  if (!(slope > 0.0)) {
    throw std::invalid_argument("slope must be positive, got " + std::to_string(slope));
  }
  double position = static_cast<double>(l) / L;
  return std::clamp((position - k) / slope, 0.0, 1.0);
}

double death_rate_aggressive(int l, int L, double k, double active_fraction) {
  check_block_index(l, L);
  check_progress(k);
  if (!(active_fraction > 0.0 && active_fraction <= 1.0)) {
    throw std::invalid_argument("active_fraction must lie in (0, 1], got " +
                                std::to_string(active_fraction));
  }
  return std::min(1.0, (1.0 - k) * static_cast<double>(l) / (L * active_fraction));
}

double death_rate(const ScheduleSpec& spec, int l, int L, double k) {
  spec.validate();
  switch (spec.family) {
    case Family::Normal:
      check_block_index(l, L);
      check_progress(k);
      return 0.0;
    case Family::Fixed:
      check_progress(k);
      return death_rate_fixed(l, L, *spec.d_last);
    case Family::EndpointGrowth:
      return death_rate_endpoint_growth(l, L, k, *spec.d_last_start, *spec.d_last_end);
    case Family::LinearGrowth:
      return death_rate_linear_growth(l, L, k, *spec.slope);
    case Family::AggressiveGrowth:
      return death_rate_aggressive(l, L, k, *spec.active_fraction);
  }
  throw std::invalid_argument("unknown schedule family");
}

SurvivalProfile survival_profile(const ScheduleSpec& spec, double k, int L) {
  if (L < 1) throw std::invalid_argument("block count must be >= 1, got " + std::to_string(L));
  check_progress(k);
  SurvivalProfile profile;
  profile.k = k;
  profile.probs.resize(L);
  for (int l = 1; l <= L; ++l) {
    profile.probs[l - 1] = 1.0 - death_rate(spec, l, L, k);
  }
  return profile;
}

double expected_depth(const SurvivalProfile& profile) {
  double sum = 0.0;
  for (double p : profile.probs) sum += p;
  return sum;
}

double normalize_epoch(int epoch, int total_epochs) {
  if (total_epochs < 1) {
    throw std::invalid_argument("total epochs must be >= 1, got " +
                                std::to_string(total_epochs));
  }
  if (epoch < 0 || epoch >= total_epochs) {
    throw std::invalid_argument("epoch " + std::to_string(epoch) + " outside 0.." +
                                std::to_string(total_epochs - 1));
  }
  if (total_epochs == 1) return 0.0;
  return static_cast<double>(epoch) / (total_epochs - 1);
}

std::vector<DepthPoint> expected_depth_trace(const ScheduleSpec& spec, int L,
                                             int epochs) {
  std::vector<DepthPoint> trace;
  trace.reserve(epochs);
  for (int e = 0; e < epochs; ++e) {
    double k = normalize_epoch(e, epochs);
    trace.push_back({e, k, expected_depth(survival_profile(spec, k, L))});
  }
  return trace;
}

std::vector<std::vector<double>> schedule_surface(const ScheduleSpec& spec, int L,
                                                  int epochs) {
  std::vector<std::vector<double>> surface(epochs);
  for (int e = 0; e < epochs; ++e) {
    double k = normalize_epoch(e, epochs);
    surface[e].resize(L);
    for (int l = 1; l <= L; ++l) {
      surface[e][l - 1] = death_rate(spec, l, L, k);
    }
  }
  return surface;
}

}  // namespace stochdepth
