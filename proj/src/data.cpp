#include "stochdepth/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "stochdepth/errors.hpp"

namespace stochdepth {

namespace {

constexpr int kCifarRecordBytes = 3073;
constexpr int kCifarPixels = 3072;
constexpr int kCifarClasses = 10;

LabeledSet take_rows(const LabeledSet& set, const std::vector<int>& indices,
                     int begin, int end) {
  LabeledSet out;
  out.class_count = set.class_count;
  out.kind = set.kind;
  out.image = set.image;
  out.features.resize(end - begin, set.features.cols());
  out.labels.resize(end - begin);
  for (int i = begin; i < end; ++i) {
    out.features.row(i - begin) = set.features.row(indices[i]);
    out.labels[i - begin] = set.labels[indices[i]];
  }
  return out;
}

void check_image_shape(const Eigen::VectorXf& example, ImageShape shape) {
  if (shape.height < 1 || shape.width < 1 || shape.channels < 1) {
    throw std::invalid_argument("augmentation requires image-kind features");
  }
  if (example.size() != shape.dim()) {
    throw std::invalid_argument("example size does not match image shape");
  }
}

}  // namespace

LabeledSet gen_spirals(int n_per_class, int classes, double noise, Rng& rng) {
  if (n_per_class < 1 || classes < 1) {
    throw std::invalid_argument("spiral counts must be >= 1");
  }
  if (noise < 0.0) throw std::invalid_argument("noise must be >= 0");
  LabeledSet set;
  set.class_count = classes;
  set.kind = FeatureKind::Vector;
  set.features.resize(n_per_class * classes, 2);
  set.labels.resize(n_per_class * classes);
  constexpr double kTurns = 1.75;
  constexpr double kTwoPi = 6.283185307179586476925287;
  int row = 0;
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < n_per_class; ++i, ++row) {
      double t = n_per_class > 1 ? static_cast<double>(i) / (n_per_class - 1) : 0.0;
      // Radius strictly increasing in t keeps the zero-noise arms disjoint;
      // the scale keeps arm separation well above typical noise levels.
      double r = 0.5 + 2.5 * t;
      double angle = kTwoPi * (kTurns * t + static_cast<double>(c) / classes);
      double x = r * std::cos(angle);
      double y = r * std::sin(angle);
      if (noise > 0.0) {
        x += noise * rng.normal();
        y += noise * rng.normal();
      }
      set.features(row, 0) = static_cast<float>(x);
      set.features(row, 1) = static_cast<float>(y);
      set.labels[row] = c;
    }
  }
  return set;
}

std::vector<CifarRecord> read_cifar_batch(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open CIFAR batch: " + path);
  auto size = static_cast<long long>(in.tellg());
  in.seekg(0);
  long long records = size / kCifarRecordBytes;
  if (size % kCifarRecordBytes != 0) {
    throw CorruptDataError("truncated CIFAR record at byte offset " +
                           std::to_string(records * kCifarRecordBytes) + " in " + path);
  }
  std::vector<CifarRecord> out(records);
  for (long long i = 0; i < records; ++i) {
    unsigned char label = 0;
    in.read(reinterpret_cast<char*>(&label), 1);
    in.read(reinterpret_cast<char*>(out[i].pixels.data()), kCifarPixels);
    if (!in) throw IoError("read failed at record " + std::to_string(i) + " in " + path);
    if (label > 9) {
      throw CorruptDataError("label byte " + std::to_string(label) +
                             " at byte offset " + std::to_string(i * kCifarRecordBytes) +
                             " in " + path);
    }
    out[i].label = label;
  }
  return out;
}

namespace {

LabeledSet records_to_set(const std::vector<std::vector<CifarRecord>>& batches) {
  long long total = 0;
  for (const auto& batch : batches) total += static_cast<long long>(batch.size());
  LabeledSet set;
  set.class_count = kCifarClasses;
  set.kind = FeatureKind::Image;
  set.image = {32, 32, 3};
  set.features.resize(total, kCifarPixels);
  set.labels.resize(total);
  long long row = 0;
  for (const auto& batch : batches) {
    for (const auto& record : batch) {
      for (int j = 0; j < kCifarPixels; ++j) {
        set.features(row, j) = static_cast<float>(record.pixels[j]) / 255.0f;
      }
      set.labels[row] = record.label;
      ++row;
    }
  }
  return set;
}

}  // namespace

std::pair<LabeledSet, LabeledSet> load_cifar10(const std::string& dir) {
  std::vector<std::vector<CifarRecord>> train_batches;
  for (int i = 1; i <= 5; ++i) {
    train_batches.push_back(
        read_cifar_batch(dir + "/data_batch_" + std::to_string(i) + ".bin"));
  }
  std::vector<std::vector<CifarRecord>> test_batches;
  test_batches.push_back(read_cifar_batch(dir + "/test_batch.bin"));
  return {records_to_set(train_batches), records_to_set(test_batches)};
}

std::pair<LabeledSet, LabeledSet> split_validation(const LabeledSet& train,
                                                   double val_fraction, Rng& rng) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("val_fraction must lie in (0, 1), got " +
                                std::to_string(val_fraction));
  }
  const int n = train.size();
  std::vector<int> indices(n);
  for (int i = 0; i < n; ++i) indices[i] = i;
  for (int i = n - 1; i > 0; --i) {
    auto j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(indices[i], indices[j]);
  }
  int val_count = static_cast<int>(std::floor(n * val_fraction));
  LabeledSet val = take_rows(train, indices, 0, val_count);
  LabeledSet rest = take_rows(train, indices, val_count, n);
  return {rest, val};
}

Eigen::VectorXf flip_horizontal(const Eigen::VectorXf& example, ImageShape shape) {
  check_image_shape(example, shape);
  Eigen::VectorXf out(example.size());
  for (int ch = 0; ch < shape.channels; ++ch) {
    int base = ch * shape.plane();
    for (int y = 0; y < shape.height; ++y) {
      for (int x = 0; x < shape.width; ++x) {
        out[base + y * shape.width + x] =
            example[base + y * shape.width + (shape.width - 1 - x)];
      }
    }
  }
  return out;
}

Eigen::VectorXf translate(const Eigen::VectorXf& example, ImageShape shape, int dx,
                          int dy) {
  check_image_shape(example, shape);
  Eigen::VectorXf out = Eigen::VectorXf::Zero(example.size());
  for (int ch = 0; ch < shape.channels; ++ch) {
    int base = ch * shape.plane();
    for (int y = 0; y < shape.height; ++y) {
      int src_y = y - dy;
      if (src_y < 0 || src_y >= shape.height) continue;
      for (int x = 0; x < shape.width; ++x) {
        int src_x = x - dx;
        if (src_x < 0 || src_x >= shape.width) continue;
        out[base + y * shape.width + x] = example[base + src_y * shape.width + src_x];
      }
    }
  }
  return out;
}

Eigen::VectorXf augment_image(const Eigen::VectorXf& example, ImageShape shape,
                              Rng& rng, int pad) {
  check_image_shape(example, shape);
  if (pad < 0) throw std::invalid_argument("pad must be >= 0");
  // Exactly three draws: flip, dx, dy.
  bool flip = rng.bernoulli(0.5);
  int dx = static_cast<int>(rng.below(2 * pad + 1)) - pad;
  int dy = static_cast<int>(rng.below(2 * pad + 1)) - pad;
  Eigen::VectorXf out = flip ? flip_horizontal(example, shape) : example;
  if (dx != 0 || dy != 0) out = translate(out, shape, dx, dy);
  return out;
}

void standardize_images(DatasetSplit& split) {
  if (split.train.kind != FeatureKind::Image) {
    throw std::invalid_argument("standardize_images requires image-kind train data");
  }
  const ImageShape shape = split.train.image;
  const int plane = shape.plane();
  for (int ch = 0; ch < shape.channels; ++ch) {
    double sum = 0.0, sum_sq = 0.0;
    long long count = static_cast<long long>(split.train.size()) * plane;
    for (int i = 0; i < split.train.size(); ++i) {
      for (int j = 0; j < plane; ++j) {
        double v = split.train.features(i, ch * plane + j);
        sum += v;
        sum_sq += v * v;
      }
    }
    double mean = sum / count;
    double var = sum_sq / count - mean * mean;
    float stddev = static_cast<float>(std::sqrt(std::max(var, 1e-12)));
    float fmean = static_cast<float>(mean);
    for (LabeledSet* set : {&split.train, &split.val, &split.test}) {
      if (set->size() == 0) continue;
      set->features.middleCols(ch * plane, plane) =
          (set->features.middleCols(ch * plane, plane).array() - fmean) / stddev;
    }
  }
}

void save_csv(const LabeledSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (int j = 0; j < set.dim(); ++j) out << "x" << j << ",";
  out << "label\n";
  char buffer[32];
  for (int i = 0; i < set.size(); ++i) {
    for (int j = 0; j < set.dim(); ++j) {
      std::snprintf(buffer, sizeof(buffer), "%.9g", static_cast<double>(set.features(i, j)));
      out << buffer << ",";
    }
    out << set.labels[i] << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

LabeledSet load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw CorruptDataError("empty CSV: " + path);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string token;
    while (std::getline(ss, token, ',')) header.push_back(token);
  }
  if (header.empty() || header.back() != "label") {
    throw CorruptDataError(path + ":1: header must end with 'label'");
  }
  const int dim = static_cast<int>(header.size()) - 1;
  if (dim < 1) throw CorruptDataError(path + ":1: no feature columns");

  std::vector<std::vector<float>> rows;
  std::vector<int> labels;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string token;
    std::vector<float> row;
    while (std::getline(ss, token, ',')) {
      try {
        row.push_back(std::stof(token));
      } catch (const std::exception&) {
        throw CorruptDataError(path + ":" + std::to_string(line_no) +
                               ": bad value '" + token + "'");
      }
    }
    if (static_cast<int>(row.size()) != dim + 1) {
      throw CorruptDataError(path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(dim + 1) + " columns, got " +
                             std::to_string(row.size()));
    }
    auto label = static_cast<int>(row.back());
    if (label < 0 || static_cast<float>(label) != row.back()) {
      throw CorruptDataError(path + ":" + std::to_string(line_no) +
                             ": label must be a non-negative integer");
    }
    row.pop_back();
    rows.push_back(std::move(row));
    labels.push_back(label);
  }
  LabeledSet set;
  set.kind = FeatureKind::Vector;
  set.features.resize(static_cast<int>(rows.size()), dim);
  set.labels = std::move(labels);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < dim; ++j) set.features(static_cast<int>(i), j) = rows[i][j];
  }
  set.class_count = 0;
  for (int label : set.labels) set.class_count = std::max(set.class_count, label + 1);
  return set;
}

}  // namespace stochdepth
