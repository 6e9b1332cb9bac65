#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <vector>

#include "stochdepth/data.hpp"
#include "stochdepth/errors.hpp"

using namespace stochdepth;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("stochdepth_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_cifar_file(const fs::path& path, const std::vector<CifarRecord>& records,
                      int truncate_bytes = 0) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  std::vector<char> bytes;
  for (const auto& record : records) {
    bytes.push_back(static_cast<char>(record.label));
    bytes.insert(bytes.end(), record.pixels.begin(), record.pixels.end());
  }
  if (truncate_bytes > 0) bytes.resize(bytes.size() - truncate_bytes);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

CifarRecord patterned_record(std::uint8_t label, int salt) {
  CifarRecord record;
  record.label = label;
  for (int j = 0; j < 3072; ++j) {
    record.pixels[j] = static_cast<std::uint8_t>((j * 7 + salt) & 0xff);
  }
  return record;
}

}  // namespace

TEST_SUITE_BEGIN("data");

TEST_CASE("spirals: zero-noise arms are disjoint") {
  Rng rng(1);
  LabeledSet set = gen_spirals(200, 2, 0.0, rng);
  std::set<std::pair<float, float>> arm0;
  for (int i = 0; i < set.size(); ++i) {
    if (set.labels[i] == 0) arm0.insert({set.features(i, 0), set.features(i, 1)});
  }
  for (int i = 0; i < set.size(); ++i) {
    if (set.labels[i] == 1) {
      CHECK(arm0.count({set.features(i, 0), set.features(i, 1)}) == 0);
    }
  }
}

TEST_CASE("spirals: deterministic and balanced") {
  Rng a(99), b(99);
  LabeledSet sa = gen_spirals(500, 3, 0.1, a);
  LabeledSet sb = gen_spirals(500, 3, 0.1, b);
  REQUIRE(sa.size() == 1500);
  CHECK(sa.class_count == 3);
  CHECK((sa.features.array() == sb.features.array()).all());
  CHECK(sa.labels == sb.labels);

  int counts[3] = {0, 0, 0};
  for (int label : sa.labels) ++counts[label];
  CHECK(counts[0] == 500);
  CHECK(counts[1] == 500);
  CHECK(counts[2] == 500);
  CHECK(sa.features.array().isFinite().all());

  CHECK_THROWS_AS(gen_spirals(0, 3, 0.1, a), std::invalid_argument);
  CHECK_THROWS_AS(gen_spirals(10, 3, -0.1, a), std::invalid_argument);
}

TEST_CASE("cifar: two-record fixture round-trips bit-exactly") {
  fs::path dir = fresh_dir("cifar_fixture");
  std::vector<CifarRecord> written = {patterned_record(3, 0), patterned_record(9, 11)};
  write_cifar_file(dir / "batch.bin", written);

  auto records = read_cifar_batch((dir / "batch.bin").string());
  REQUIRE(records.size() == 2);
  for (int i = 0; i < 2; ++i) {
    CHECK(records[i].label == written[i].label);
    CHECK(records[i].pixels == written[i].pixels);
  }
}

TEST_CASE("cifar: truncated file reports the byte offset") {
  fs::path dir = fresh_dir("cifar_trunc");
  write_cifar_file(dir / "batch.bin", {patterned_record(1, 0), patterned_record(2, 5)},
                   100);
  try {
    read_cifar_batch((dir / "batch.bin").string());
    FAIL("expected CorruptDataError");
  } catch (const CorruptDataError& e) {
    CHECK(std::string(e.what()).find("3073") != std::string::npos);  // offset of record 1
  }
}

TEST_CASE("cifar: label byte above 9 is corrupt") {
  fs::path dir = fresh_dir("cifar_label");
  write_cifar_file(dir / "batch.bin", {patterned_record(10, 0)});
  CHECK_THROWS_AS(read_cifar_batch((dir / "batch.bin").string()), CorruptDataError);
}

TEST_CASE("cifar: missing file is an io error naming the file") {
  try {
    read_cifar_batch("/nonexistent/dir/data_batch_1.bin");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("data_batch_1.bin") != std::string::npos);
  }
}

TEST_CASE("cifar: directory loader concatenates batches and scales pixels") {
  fs::path dir = fresh_dir("cifar_dir");
  for (int i = 1; i <= 5; ++i) {
    write_cifar_file(dir / ("data_batch_" + std::to_string(i) + ".bin"),
                     {patterned_record(static_cast<std::uint8_t>(i % 10), i),
                      patterned_record(static_cast<std::uint8_t>((i + 1) % 10), i + 7)});
  }
  write_cifar_file(dir / "test_batch.bin", {patterned_record(0, 3)});

  auto [train, test] = load_cifar10(dir.string());
  CHECK(train.size() == 10);
  CHECK(test.size() == 1);
  CHECK(train.class_count == 10);
  CHECK(train.kind == FeatureKind::Image);
  CHECK(train.image.height == 32);
  CHECK(train.image.channels == 3);
  // first record of data_batch_1: pixel j = (j*7 + 1) & 0xff, scaled by 255
  for (int j = 0; j < 32; ++j) {
    CHECK(train.features(0, j) == static_cast<float>((j * 7 + 1) & 0xff) / 255.0f);
  }
  CHECK(train.labels[0] == 1);
}

TEST_CASE("validation split partitions the set") {
  LabeledSet pool;
  pool.class_count = 2;
  const int n = 50000;
  pool.features.resize(n, 1);
  pool.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    pool.features(i, 0) = static_cast<float>(i);
    pool.labels[i] = i % 2;
  }

  Rng rng(123);
  auto [train, val] = split_validation(pool, 0.1, rng);
  CHECK(train.size() == 45000);
  CHECK(val.size() == 5000);

  std::set<int> seen;
  for (int i = 0; i < train.size(); ++i) seen.insert(static_cast<int>(train.features(i, 0)));
  for (int i = 0; i < val.size(); ++i) {
    int id = static_cast<int>(val.features(i, 0));
    CHECK(seen.count(id) == 0);
    seen.insert(id);
  }
  CHECK(seen.size() == static_cast<std::size_t>(n));

  Rng rng2(123);
  auto [train2, val2] = split_validation(pool, 0.1, rng2);
  CHECK((train.features.array() == train2.features.array()).all());
  CHECK(val.labels == val2.labels);

  CHECK_THROWS_AS(split_validation(pool, 0.0, rng), std::invalid_argument);
  CHECK_THROWS_AS(split_validation(pool, 1.0, rng), std::invalid_argument);
}

TEST_CASE("augmentation primitives") {
  ImageShape shape{2, 2, 1};
  Eigen::VectorXf img(4);
  img << 1, 2, 3, 4;  // [[1 2] [3 4]]

  Eigen::VectorXf flipped = flip_horizontal(img, shape);
  CHECK(flipped(0) == 2);
  CHECK(flipped(1) == 1);
  CHECK(flipped(2) == 4);
  CHECK(flipped(3) == 3);

  // flipping twice is the identity
  CHECK((flip_horizontal(flipped, shape).array() == img.array()).all());

  // zero translation is the identity
  CHECK((translate(img, shape, 0, 0).array() == img.array()).all());

  // shift right by one: left column becomes zero fill
  Eigen::VectorXf shifted = translate(img, shape, 1, 0);
  CHECK(shifted(0) == 0);
  CHECK(shifted(1) == 1);
  CHECK(shifted(2) == 0);
  CHECK(shifted(3) == 3);

  ImageShape vector_kind{};  // what a vector LabeledSet carries
  Rng rng(4);
  CHECK_THROWS_AS(augment_image(img, vector_kind, rng, 4), std::invalid_argument);
}

TEST_CASE("random augmentation: pad 0 yields identity or pure flip") {
  ImageShape shape{2, 2, 1};
  Eigen::VectorXf img(4);
  img << 1, 2, 3, 4;
  Eigen::VectorXf flipped = flip_horizontal(img, shape);

  Rng rng(31415);
  int flips = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    auto before = rng.draws();
    Eigen::VectorXf out = augment_image(img, shape, rng, 0);
    CHECK(rng.draws() - before == 3);  // flip, dx, dy
    bool is_identity = (out.array() == img.array()).all();
    bool is_flip = (out.array() == flipped.array()).all();
    CHECK((is_identity || is_flip));
    flips += is_flip ? 1 : 0;
  }
  // 3-sigma binomial band around p = 1/2
  double freq = static_cast<double>(flips) / n;
  CHECK(freq > 0.485);
  CHECK(freq < 0.515);
}

TEST_CASE("per-channel standardization uses train statistics") {
  DatasetSplit split;
  split.train.kind = FeatureKind::Image;
  split.train.image = {2, 2, 2};
  split.train.class_count = 2;
  split.train.features.resize(50, 8);
  split.train.labels.assign(50, 0);
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    for (int j = 0; j < 4; ++j) split.train.features(i, j) = static_cast<float>(rng.uniform() * 2 + 1);
    for (int j = 4; j < 8; ++j) split.train.features(i, j) = static_cast<float>(rng.uniform() * 5 - 3);
  }
  split.val = split.train;
  split.test = split.train;

  standardize_images(split);
  for (int ch = 0; ch < 2; ++ch) {
    double mean = split.train.features.middleCols(ch * 4, 4).cast<double>().mean();
    double var = (split.train.features.middleCols(ch * 4, 4).cast<double>().array() - mean)
                     .square()
                     .mean();
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-5));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
  // identical val part got the same transform
  CHECK((split.val.features.array() == split.train.features.array()).all());

  DatasetSplit vect;
  vect.train.kind = FeatureKind::Vector;
  CHECK_THROWS_AS(standardize_images(vect), std::invalid_argument);
}

TEST_CASE("csv round trip") {
  fs::path dir = fresh_dir("csv");
  Rng rng(6);
  LabeledSet set = gen_spirals(40, 3, 0.05, rng);
  std::string path = (dir / "set.csv").string();
  save_csv(set, path);

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "x0,x1,label");

  LabeledSet loaded = load_csv(path);
  REQUIRE(loaded.size() == set.size());
  CHECK(loaded.class_count == 3);
  CHECK(loaded.labels == set.labels);
  CHECK((loaded.features.array() == set.features.array()).all());
}

TEST_CASE("csv loader diagnoses malformed input") {
  fs::path dir = fresh_dir("csv_bad");
  {
    std::ofstream out(dir / "nolabel.csv");
    out << "x0,x1\n1,2\n";
  }
  CHECK_THROWS_AS(load_csv((dir / "nolabel.csv").string()), CorruptDataError);
  {
    std::ofstream out(dir / "badvalue.csv");
    out << "x0,label\n1,0\nfoo,1\n";
  }
  try {
    load_csv((dir / "badvalue.csv").string());
    FAIL("expected CorruptDataError");
  } catch (const CorruptDataError& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);  // line number
  }
  CHECK_THROWS_AS(load_csv((dir / "missing.csv").string()), IoError);
}

TEST_SUITE_END();
