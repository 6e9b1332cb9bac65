#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "stochdepth/rng.hpp"

namespace stochdepth {

enum class FeatureKind { Vector, Image };

struct ImageShape {
  int height = 0;
  int width = 0;
  int channels = 0;

  int plane() const { return height * width; }
  int dim() const { return height * width * channels; }
};

// Immutable labeled dataset; rows are examples. Image features are stored
// channel-planar: channel 0 plane first, each plane row-major.
struct LabeledSet {
  Eigen::MatrixXf features;  // n x dim
  std::vector<int> labels;   // labels[i] in [0, class_count)
  int class_count = 0;
  FeatureKind kind = FeatureKind::Vector;
  ImageShape image;  // meaningful only when kind == Image

  int size() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
};

struct DatasetSplit {
  LabeledSet train;
  LabeledSet val;
  LabeledSet test;
};

// Interleaved 2-D spiral arms, one per class, with gaussian coordinate
// noise. Deterministic for a given rng state.
LabeledSet gen_spirals(int n_per_class, int classes, double noise, Rng& rng);

// One record of the CIFAR-10 binary batch format: a label byte followed by
// 3072 pixel bytes (1024 red, 1024 green, 1024 blue, each row-major).
struct CifarRecord {
  std::uint8_t label = 0;
  std::array<std::uint8_t, 3072> pixels{};
};

// Reads whole 3073-byte records until end of file. Throws IoError if the
// file is missing, CorruptDataError (with the byte offset) on a trailing
// partial record or a label byte > 9.
std::vector<CifarRecord> read_cifar_batch(const std::string& path);

// Loads the canonical binary archive (data_batch_1..5.bin + test_batch.bin)
// from `dir`. Pixels are scaled to [0, 1]; kind = Image{32, 32, 3}.
std::pair<LabeledSet, LabeledSet> load_cifar10(const std::string& dir);

// Seeded shuffle then split; the validation part gets floor(n * fraction)
// examples, the rest stays in train. Parts are disjoint by construction.
std::pair<LabeledSet, LabeledSet> split_validation(const LabeledSet& train,
                                                   double val_fraction, Rng& rng);

// Deterministic augmentation primitives on one channel-planar image vector.
Eigen::VectorXf flip_horizontal(const Eigen::VectorXf& example, ImageShape shape);
Eigen::VectorXf translate(const Eigen::VectorXf& example, ImageShape shape, int dx,
                          int dy);  // zero fill outside the frame

// Random flip with probability 1/2, then a uniform translation with both
// offsets in [-pad, pad] (zero-pad-and-crop). Consumes three rng draws.
// Throws std::invalid_argument when the set is not image-kind.
Eigen::VectorXf augment_image(const Eigen::VectorXf& example, ImageShape shape,
                              Rng& rng, int pad);

// Scales nothing but shifts: per-channel standardization with mean/stddev
// computed on the train part only, applied to all three parts.
void standardize_images(DatasetSplit& split);

// CSV with header x0,...,x{d-1},label; one row per example.
void save_csv(const LabeledSet& set, const std::string& path);
LabeledSet load_csv(const std::string& path);

}  // namespace stochdepth
