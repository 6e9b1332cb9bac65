#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stochdepth/schedule.hpp"
#include "stochdepth/trainer.hpp"

namespace stochdepth {

// Configuration file or flag level problem; maps to its own exit code in
// the CLI.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One full experiment: dataset, net size, training protocol, output dir.
struct ExperimentConfig {
  // "spirals", "cifar10", or a path to a CSV file (header x0,...,label).
  std::string dataset = "spirals";
  std::string cifar_dir = "cifar-10-batches-bin";
  std::string test_csv;  // optional held-out test CSV for csv datasets
  int spiral_classes = 3;
  int spiral_n = 500;
  double spiral_noise = 0.1;
  int blocks = 16;
  int width = 32;
  TrainConfig train;
  std::string out_dir = "run";
};

// The named schedule configurations. Preset name -> hyperparameters:
//   normal          — no gating
//   fixed           — Fixed, d_last = 0.5
//   huang-to-full   — EndpointGrowth, 0.5 -> 0
//   half-to-huang   — EndpointGrowth, 1 -> 0.5
//   half-to-full    — EndpointGrowth, 1 -> 0
//   linear-w0.5     — LinearGrowth, slope 0.5
//   linear-w0.2     — LinearGrowth, slope 0.2
//   aggressive-s0.1 — AggressiveGrowth, active fraction 0.1
//   aggressive-s0.5 — AggressiveGrowth, active fraction 0.5
std::optional<ScheduleSpec> preset_schedule(const std::string& name);
std::vector<std::string> preset_names();

// Flat key=value file with [section] headers; sections experiment, net,
// schedule, train. Unknown keys, bad values and malformed lines raise
// ConfigError with file:line diagnostics.
ExperimentConfig load_config_file(const std::string& path);

// Writes surface.csv (epoch,k,l,l_over_L,death_rate) and depth_trace.csv
// (epoch,k,expected_depth,expected_fraction) under out_dir.
void cmd_schedule(const ScheduleSpec& spec, int blocks, int epochs,
                  const std::string& out_dir);

struct TrainOutcome {
  int best_epoch = 0;
  double val_error = 0.0;
  double test_error = 0.0;
};

// Runs one experiment end to end: provisions the dataset, trains, writes
// metrics.csv, best.ckpt and summary.txt under config.out_dir. The test
// error is evaluated with the survival profile of the selected epoch.
TrainOutcome cmd_train(const ExperimentConfig& config);

// Merges <dir>/metrics.csv of every run into one long-format CSV
// (run,epoch,metric,value) at out_path.
void cmd_compare(const std::vector<std::string>& run_dirs,
                 const std::string& out_path);

// Fixed output schemas, also used by the golden-header tests.
extern const char* const kSurfaceHeader;
extern const char* const kDepthTraceHeader;
extern const char* const kMetricsHeader;
extern const char* const kCompareHeader;

}  // namespace stochdepth
