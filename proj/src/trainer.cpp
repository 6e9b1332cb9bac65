#include "stochdepth/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "stochdepth/errors.hpp"
#include "stochdepth/gates.hpp"

namespace stochdepth {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(base_lr > 0.0)) throw std::invalid_argument("base_lr must be positive");
  if (!(lr_milestones.first > 0.0 && lr_milestones.first < lr_milestones.second &&
        lr_milestones.second < 1.0)) {
    throw std::invalid_argument("lr milestones must satisfy 0 < m1 < m2 < 1");
  }
  if (!(lr_factor > 0.0 && lr_factor < 1.0)) {
    throw std::invalid_argument("lr_factor must lie in (0, 1)");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("momentum must lie in [0, 1)");
  }
  if (weight_decay < 0.0) throw std::invalid_argument("weight_decay must be >= 0");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("val_fraction must lie in (0, 1)");
  }
  if (augment_pad < 0) throw std::invalid_argument("augment_pad must be >= 0");
  schedule.validate();
}

double lr_at(int epoch, const TrainConfig& config) {
  int first = static_cast<int>(std::floor(config.lr_milestones.first * config.epochs));
  int second = static_cast<int>(std::floor(config.lr_milestones.second * config.epochs));
  if (epoch < first) return config.base_lr;
  if (epoch < second) return config.base_lr * config.lr_factor;
  return config.base_lr * config.lr_factor * config.lr_factor;
}

namespace {

template <typename T>
void check_same_shape(const DenseT<T>& a, const DenseT<T>& b) {
  if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() ||
      a.bias.size() != b.bias.size()) {
    throw std::invalid_argument("parameter shapes do not match");
  }
}

template <typename T>
void step_dense(DenseT<T>& p, DenseT<T>& v, const DenseT<T>& g, T lr, T mu) {
  check_same_shape(p, v);
  check_same_shape(p, g);
  v.weight = mu * v.weight - lr * g.weight;
  v.bias = mu * v.bias - lr * g.bias;
  p.weight += mu * v.weight - lr * g.weight;
  p.bias += mu * v.bias - lr * g.bias;
}

template <typename T>
MatrixT<T> gather_batch(const LabeledSet& data, const std::vector<int>& indices,
                        int begin, int end) {
  MatrixT<T> batch(end - begin, data.dim());
  for (int i = begin; i < end; ++i) {
    batch.row(i - begin) = data.features.row(indices[i]).template cast<T>();
  }
  return batch;
}

std::vector<int> gather_labels(const LabeledSet& data, const std::vector<int>& indices,
                               int begin, int end) {
  std::vector<int> labels(end - begin);
  for (int i = begin; i < end; ++i) labels[i - begin] = data.labels[indices[i]];
  return labels;
}

template <typename T>
void decay_dense(DenseT<T>& g, const DenseT<T>& p, T wd) {
  g.weight += wd * p.weight;
  g.bias += wd * p.bias;
}

}  // namespace

template <typename T>
void nesterov_step(NetParamsT<T>& params, NetParamsT<T>& velocity,
                   const GradientsT<T>& grads, double lr, double momentum) {
  if (params.blocks.size() != velocity.blocks.size() ||
      params.blocks.size() != grads.blocks.size()) {
    throw std::invalid_argument("parameter shapes do not match");
  }
  const T lr_t = static_cast<T>(lr);
  const T mu = static_cast<T>(momentum);
  step_dense(params.input_proj, velocity.input_proj, grads.input_proj, lr_t, mu);
  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    step_dense(params.blocks[i].fc1, velocity.blocks[i].fc1, grads.blocks[i].fc1, lr_t, mu);
    step_dense(params.blocks[i].fc2, velocity.blocks[i].fc2, grads.blocks[i].fc2, lr_t, mu);
  }
  step_dense(params.head, velocity.head, grads.head, lr_t, mu);
}

template <typename T>
EvalResult evaluate(const ResidualNetT<T>& net, const LabeledSet& data,
                    const SurvivalProfile& profile, int batch_size) {
  if (data.size() == 0) throw std::invalid_argument("evaluate on empty set");
  std::vector<int> indices(data.size());
  for (int i = 0; i < data.size(); ++i) indices[i] = i;
  double loss_sum = 0.0;
  long long wrong = 0;
  for (int begin = 0; begin < data.size(); begin += batch_size) {
    int end = std::min(begin + batch_size, data.size());
    MatrixT<T> batch = gather_batch<T>(data, indices, begin, end);
    std::vector<int> labels = gather_labels(data, indices, begin, end);
    MatrixT<T> logits = forward_eval(net, batch, profile);
    loss_sum += loss(logits, labels) * (end - begin);
    wrong += static_cast<long long>(
        std::llround(error_rate(logits, labels) * (end - begin)));
  }
  return {loss_sum / data.size(), static_cast<double>(wrong) / data.size()};
}

template <typename T>
TrainResultT<T> train(ResidualNetT<T> net, const DatasetSplit& data,
                      const TrainConfig& config) {
  config.validate();
  if (data.train.size() == 0) throw std::invalid_argument("empty training set");
  if (data.val.size() == 0) throw std::invalid_argument("empty validation set");
  const int depth = net.depth();
  const int n = data.train.size();

  Rng shuffle_rng(derive_seed(config.seed, seed_offset::kShuffle));
  Rng mask_rng(derive_seed(config.seed, seed_offset::kMask));
  Rng augment_rng(derive_seed(config.seed, seed_offset::kAugment));
  const bool augment =
      config.augment && data.train.kind == FeatureKind::Image;

  NetParamsT<T> velocity = zeros_like(static_cast<const NetParamsT<T>&>(net));
  std::vector<int> indices(n);
  for (int i = 0; i < n; ++i) indices[i] = i;

  TrainResultT<T> result;
  result.metrics.reserve(config.epochs);
  result.best_val_error = std::numeric_limits<double>::infinity();
  std::int64_t batch_counter = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    auto epoch_start = std::chrono::steady_clock::now();
    const double k = normalize_epoch(epoch, config.epochs);
    const SurvivalProfile profile = survival_profile(config.schedule, k, depth);
    const double lr = lr_at(epoch, config);

    for (int i = n - 1; i > 0; --i) {
      auto j = static_cast<int>(shuffle_rng.below(static_cast<std::uint64_t>(i) + 1));
      std::swap(indices[i], indices[j]);
    }

    double loss_sum = 0.0;
    double error_sum = 0.0;
    long long depth_sum = 0;
    int batches = 0;
    for (int begin = 0; begin < n; begin += config.batch_size) {
      int end = std::min(begin + config.batch_size, n);
      GateMask mask = sample_mask(profile, mask_rng, epoch, batch_counter++);
      MatrixT<T> batch = gather_batch<T>(data.train, indices, begin, end);
      if (augment) {
        for (Eigen::Index row = 0; row < batch.rows(); ++row) {
          Eigen::VectorXf example =
              batch.row(row).template cast<float>().transpose();
          batch.row(row) = augment_image(example, data.train.image, augment_rng,
                                         config.augment_pad)
                               .template cast<T>()
                               .transpose();
        }
      }
      std::vector<int> labels = gather_labels(data.train, indices, begin, end);

      ForwardCacheT<T> cache = forward_train(net, batch, mask);
      double batch_loss = loss(cache.logits, labels);
      if (!std::isfinite(batch_loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batches));
      }
      GradientsT<T> grads = backward(net, cache, labels);
      if (config.weight_decay > 0.0) {
        const T wd = static_cast<T>(config.weight_decay);
        decay_dense(grads.input_proj, net.input_proj, wd);
        for (std::size_t b = 0; b < grads.blocks.size(); ++b) {
          decay_dense(grads.blocks[b].fc1, net.blocks[b].fc1, wd);
          decay_dense(grads.blocks[b].fc2, net.blocks[b].fc2, wd);
        }
        decay_dense(grads.head, net.head, wd);
      }
      nesterov_step(static_cast<NetParamsT<T>&>(net), velocity, grads, lr,
                    config.momentum);

      loss_sum += batch_loss * (end - begin);
      error_sum += error_rate(cache.logits, labels) * (end - begin);
      depth_sum += realized_depth(mask);
      result.executed_block_passes += static_cast<std::uint64_t>(cache.executed_blocks);
      result.sum_realized_depth += static_cast<std::uint64_t>(realized_depth(mask));
      ++batches;
    }

    EvalResult val = evaluate(net, data.val, profile);

    MetricsRecord record;
    record.epoch = epoch;
    record.k = k;
    record.lr = lr;
    record.train_loss = loss_sum / n;
    record.train_error = error_sum / n;
    record.val_error = val.error;
    record.expected_depth = expected_depth(profile);
    record.mean_realized_depth = static_cast<double>(depth_sum) / batches;
    record.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start)
            .count();
    result.metrics.push_back(record);

    if (val.error < result.best_val_error) {
      result.best_val_error = val.error;
      result.best_epoch = epoch;
      result.best_net = net;
    }
  }
  result.final_net = std::move(net);
  return result;
}

RunResult train_run(const DatasetSplit& data, const TrainConfig& config, int blocks,
                    int width) {
  config.validate();
  Rng init_rng(derive_seed(config.seed, seed_offset::kInit));
  RunResult out;
  if (config.precision == Precision::Float32) {
    auto net = init_net<float>(blocks, width, data.train.dim(),
                               data.train.class_count, init_rng);
    auto result = train(std::move(net), data, config);
    out.metrics = std::move(result.metrics);
    out.best_net = net_cast<double>(result.best_net);
    out.best_epoch = result.best_epoch;
    out.best_val_error = result.best_val_error;
  } else {
    auto net = init_net<double>(blocks, width, data.train.dim(),
                                data.train.class_count, init_rng);
    auto result = train(std::move(net), data, config);
    out.metrics = std::move(result.metrics);
    out.best_net = std::move(result.best_net);
    out.best_epoch = result.best_epoch;
    out.best_val_error = result.best_val_error;
  }
  return out;
}

template void nesterov_step<double>(NetParamsT<double>&, NetParamsT<double>&,
                                    const GradientsT<double>&, double, double);
template void nesterov_step<float>(NetParamsT<float>&, NetParamsT<float>&,
                                   const GradientsT<float>&, double, double);
template EvalResult evaluate<double>(const ResidualNetT<double>&, const LabeledSet&,
                                     const SurvivalProfile&, int);
template EvalResult evaluate<float>(const ResidualNetT<float>&, const LabeledSet&,
                                    const SurvivalProfile&, int);
template TrainResultT<double> train<double>(ResidualNetT<double>, const DatasetSplit&,
                                            const TrainConfig&);
template TrainResultT<float> train<float>(ResidualNetT<float>, const DatasetSplit&,
                                          const TrainConfig&);

}  // namespace stochdepth
