#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "stochdepth/data.hpp"
#include "stochdepth/net.hpp"
#include "stochdepth/schedule.hpp"

namespace stochdepth {

enum class Precision { Float64, Float32 };

struct TrainConfig {
  int epochs = 500;
  int batch_size = 128;
  double base_lr = 0.1;
  // Fractions of total epochs at which the learning rate is multiplied by
  // lr_factor; the defaults keep the 250/375-of-500 geometry at any scale.
  std::pair<double, double> lr_milestones{0.5, 0.75};
  double lr_factor = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0;
  ScheduleSpec schedule = ScheduleSpec::normal();
  std::uint64_t seed = 0;
  double val_fraction = 0.1;
  Precision precision = Precision::Float64;
  bool augment = false;  // random flip + translate, image datasets only
  int augment_pad = 4;

  void validate() const;  // throws std::invalid_argument
};

// One row of the per-epoch metrics stream. wall_time is real elapsed
// seconds for the epoch and is the only field that varies across
// otherwise identical runs.
struct MetricsRecord {
  int epoch = 0;
  double k = 0.0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_error = 0.0;
  double val_error = 0.0;
  double expected_depth = 0.0;
  double mean_realized_depth = 0.0;
  double wall_time = 0.0;
};

// Piecewise-constant step schedule: base_lr, then base_lr * lr_factor from
// floor(milestone1 * epochs), then base_lr * lr_factor^2 from
// floor(milestone2 * epochs).
double lr_at(int epoch, const TrainConfig& config);

// v <- momentum * v - lr * g;  p <- p + momentum * v - lr * g.
// With momentum = 0 this is plain SGD. Shapes must match; in-place.
template <typename T>
void nesterov_step(NetParamsT<T>& params, NetParamsT<T>& velocity,
                   const GradientsT<T>& grads, double lr, double momentum);

struct EvalResult {
  double loss = 0.0;
  double error = 0.0;
};

// Deterministic batched forward_eval over the whole set; exact sums in
// double precision, so the aggregate is order-independent.
template <typename T>
EvalResult evaluate(const ResidualNetT<T>& net, const LabeledSet& data,
                    const SurvivalProfile& profile, int batch_size = 256);

template <typename T>
struct TrainResultT {
  std::vector<MetricsRecord> metrics;
  ResidualNetT<T> best_net;  // checkpoint with minimal val_error, earliest tie
  int best_epoch = 0;
  double best_val_error = 0.0;
  ResidualNetT<T> final_net;
  // Instrumentation: block transforms actually executed vs. the sum of
  // realized mask depths over all batches. Equal by construction; tests
  // assert it.
  std::uint64_t executed_block_passes = 0;
  std::uint64_t sum_realized_depth = 0;
};

// Epoch loop: per epoch compute k and the survival profile, shuffle the
// training set (seeded), draw one gate mask per batch, run
// forward_train/backward/nesterov_step, then evaluate val_error with
// forward_eval. Throws NumericError naming epoch and batch when the loss
// turns non-finite.
template <typename T>
TrainResultT<T> train(ResidualNetT<T> net, const DatasetSplit& data,
                      const TrainConfig& config);

using TrainResult = TrainResultT<double>;

// Precision-dispatching convenience used by the CLI: initializes the net
// from config (seed offset kInit), trains, and returns metrics plus the
// best checkpoint converted to double.
struct RunResult {
  std::vector<MetricsRecord> metrics;
  ResidualNet best_net;
  int best_epoch = 0;
  double best_val_error = 0.0;
};
RunResult train_run(const DatasetSplit& data, const TrainConfig& config, int blocks,
                    int width);

}  // namespace stochdepth
