#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stochdepth {

// The epoch-dependent survival schedules for stochastic-depth residual
// networks. Blocks are indexed l = 1..L; block l survives a training pass
// with probability p_l = 1 - d_l, where the death rate d_l may depend on
// the normalized training progress k in [0, 1].
//
// Families:
//   Normal           — no gating, every block always alive.
//   Fixed            — d_l = (l/L) * d_last, constant over training.
//   EndpointGrowth   — last-block death rate interpolates linearly from
//                      d_last_start (k = 0) to d_last_end (k = 1), blocks
//                      scale linearly with depth as in Fixed.
//   LinearGrowth     — d_l^k = clamp((l/L - k) / slope, 0, 1); the death
//                      front sweeps from shallow to deep as k grows.
//   AggressiveGrowth — d_l^k = min(1, (1-k) * l / (L * active_fraction));
//                      at k = 0 only the first active_fraction of the
//                      network can be alive.
enum class Family {
  Normal,
  Fixed,
  EndpointGrowth,
  LinearGrowth,
  AggressiveGrowth,
};

const char* family_name(Family family);
std::optional<Family> family_from_name(std::string_view name);

// Which schedule family to run plus its hyperparameters. Exactly the
// fields used by `family` are set; the factories below enforce that and
// the admissible ranges.
struct ScheduleSpec {
  Family family = Family::Normal;
  std::optional<double> d_last;          // Fixed: death rate of block L, in [0, 1]
  std::optional<double> d_last_start;    // EndpointGrowth: last-block rate at k = 0
  std::optional<double> d_last_end;      // EndpointGrowth: last-block rate at k = 1
  std::optional<double> slope;           // LinearGrowth: growth slope, in (0, 1]
  std::optional<double> active_fraction; // AggressiveGrowth: initially active share, in (0, 1]

  static ScheduleSpec normal();
  static ScheduleSpec fixed(double d_last);
  static ScheduleSpec endpoint_growth(double d_last_start, double d_last_end);
  static ScheduleSpec linear_growth(double slope);
  static ScheduleSpec aggressive_growth(double active_fraction);

  // Throws std::invalid_argument if fields are missing, extraneous or out
  // of range for the family.
  void validate() const;
};

// Per-block survival probabilities at one normalized epoch.
struct SurvivalProfile {
  std::vector<double> probs;  // probs[l - 1] = survival probability of block l
  double k = 0.0;

  int depth() const { return static_cast<int>(probs.size()); }
};

// Closed-form death rates. All throw std::invalid_argument on
// out-of-range arguments and always return a value in [0, 1].
double death_rate_fixed(int l, int L, double d_last);
double endpoint_rate(double k, double d_last_start, double d_last_end);
double death_rate_endpoint_growth(int l, int L, double k, double d_last_start,
                                  double d_last_end);
double death_rate_linear_growth(int l, int L, double k, double slope);
double death_rate_aggressive(int l, int L, double k, double active_fraction);

// Dispatch on spec.family.
double death_rate(const ScheduleSpec& spec, int l, int L, double k);

// Survival probabilities 1 - d_l^k for all blocks.
SurvivalProfile survival_profile(const ScheduleSpec& spec, double k, int L);

// Sum of survival probabilities: the mean number of alive blocks per pass.
double expected_depth(const SurvivalProfile& profile);

// Training progress of epoch e out of E, in [0, 1]. The last epoch maps to
// exactly 1 so training ends at the schedule's end state; for E = 1, k = 0.
double normalize_epoch(int epoch, int total_epochs);

struct DepthPoint {
  int epoch = 0;
  double k = 0.0;
  double expected_depth = 0.0;
};

// Expected depth at every epoch of a run.
std::vector<DepthPoint> expected_depth_trace(const ScheduleSpec& spec, int L,
                                             int epochs);

// Death rates over the whole run: surface[e][l - 1] = d_l at epoch e.
std::vector<std::vector<double>> schedule_surface(const ScheduleSpec& spec,
                                                  int L, int epochs);

}  // namespace stochdepth
