#include "stochdepth/experiment.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stochdepth/checkpoint.hpp"
#include "stochdepth/data.hpp"
#include "stochdepth/errors.hpp"

namespace stochdepth {

const char* const kSurfaceHeader = "epoch,k,l,l_over_L,death_rate";
const char* const kDepthTraceHeader = "epoch,k,expected_depth,expected_fraction";
const char* const kMetricsHeader =
    "epoch,k,lr,train_loss,train_error,val_error,expected_depth,"
    "mean_realized_depth,wall_time";
const char* const kCompareHeader = "run,epoch,metric,value";

namespace {

// Shortest representation that round-trips to the same double.
std::string fmt(double value) {
  char buffer[32];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

void make_dirs(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

std::optional<ScheduleSpec> preset_schedule(const std::string& name) {
  if (name == "normal") return ScheduleSpec::normal();
  if (name == "fixed") return ScheduleSpec::fixed(0.5);
  if (name == "huang-to-full") return ScheduleSpec::endpoint_growth(0.5, 0.0);
  if (name == "half-to-huang") return ScheduleSpec::endpoint_growth(1.0, 0.5);
  if (name == "half-to-full") return ScheduleSpec::endpoint_growth(1.0, 0.0);
  if (name == "linear-w0.5") return ScheduleSpec::linear_growth(0.5);
  if (name == "linear-w0.2") return ScheduleSpec::linear_growth(0.2);
  if (name == "aggressive-s0.1") return ScheduleSpec::aggressive_growth(0.1);
  if (name == "aggressive-s0.5") return ScheduleSpec::aggressive_growth(0.5);
  return std::nullopt;
}

std::vector<std::string> preset_names() {
  return {"normal",      "fixed",           "huang-to-full",
          "half-to-huang", "half-to-full",  "linear-w0.5",
          "linear-w0.2", "aggressive-s0.1", "aggressive-s0.5"};
}

namespace {

struct ConfigParser {
  std::string path;
  int line_no = 0;

  [[noreturn]] void fail(const std::string& message) const {
    throw ConfigError(path + ":" + std::to_string(line_no) + ": " + message);
  }

  int to_int(const std::string& value) const {
    try {
      std::size_t used = 0;
      int out = std::stoi(value, &used);
      if (used != value.size()) fail("bad integer '" + value + "'");
      return out;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      fail("bad integer '" + value + "'");
    }
  }

  double to_double(const std::string& value) const {
    try {
      std::size_t used = 0;
      double out = std::stod(value, &used);
      if (used != value.size()) fail("bad number '" + value + "'");
      return out;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      fail("bad number '" + value + "'");
    }
  }

  std::uint64_t to_u64(const std::string& value) const {
    try {
      std::size_t used = 0;
      unsigned long long out = std::stoull(value, &used);
      if (used != value.size()) fail("bad integer '" + value + "'");
      return out;
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      fail("bad integer '" + value + "'");
    }
  }

  bool to_bool(const std::string& value) const {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    fail("bad boolean '" + value + "' (use true/false)");
  }
};

}  // namespace

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);

  ExperimentConfig config;
  ConfigParser parser{path};
  std::string section;
  std::optional<std::string> preset, family;
  std::optional<double> d_last, d_last_start, d_last_end, slope, active_fraction;

  std::string raw;
  while (std::getline(in, raw)) {
    ++parser.line_no;
    auto hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') parser.fail("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "experiment" && section != "net" && section != "schedule" &&
          section != "train") {
        parser.fail("unknown section [" + section + "]");
      }
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) parser.fail("expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) parser.fail("empty key");
    if (section.empty()) parser.fail("key '" + key + "' outside any section");

    if (section == "experiment") {
      if (key == "dataset") config.dataset = value;
      else if (key == "cifar_dir") config.cifar_dir = value;
      else if (key == "test_csv") config.test_csv = value;
      else if (key == "out") config.out_dir = value;
      else if (key == "spiral_classes") config.spiral_classes = parser.to_int(value);
      else if (key == "spiral_n") config.spiral_n = parser.to_int(value);
      else if (key == "spiral_noise") config.spiral_noise = parser.to_double(value);
      else parser.fail("unknown key '" + key + "' in [experiment]");
    } else if (section == "net") {
      if (key == "blocks") config.blocks = parser.to_int(value);
      else if (key == "width") config.width = parser.to_int(value);
      else parser.fail("unknown key '" + key + "' in [net]");
    } else if (section == "schedule") {
      if (key == "preset") preset = value;
      else if (key == "family") family = value;
      else if (key == "d_last") d_last = parser.to_double(value);
      else if (key == "d_last_start") d_last_start = parser.to_double(value);
      else if (key == "d_last_end") d_last_end = parser.to_double(value);
      else if (key == "slope") slope = parser.to_double(value);
      else if (key == "active_fraction") active_fraction = parser.to_double(value);
      else parser.fail("unknown key '" + key + "' in [schedule]");
    } else {  // train
      if (key == "epochs") config.train.epochs = parser.to_int(value);
      else if (key == "batch_size") config.train.batch_size = parser.to_int(value);
      else if (key == "base_lr") config.train.base_lr = parser.to_double(value);
      else if (key == "lr_milestone1") config.train.lr_milestones.first = parser.to_double(value);
      else if (key == "lr_milestone2") config.train.lr_milestones.second = parser.to_double(value);
      else if (key == "lr_factor") config.train.lr_factor = parser.to_double(value);
      else if (key == "momentum") config.train.momentum = parser.to_double(value);
      else if (key == "weight_decay") config.train.weight_decay = parser.to_double(value);
      else if (key == "seed") config.train.seed = parser.to_u64(value);
      else if (key == "val_fraction") config.train.val_fraction = parser.to_double(value);
      else if (key == "augment") config.train.augment = parser.to_bool(value);
      else if (key == "augment_pad") config.train.augment_pad = parser.to_int(value);
      else if (key == "precision") {
        if (value == "float64") config.train.precision = Precision::Float64;
        else if (value == "float32") config.train.precision = Precision::Float32;
        else parser.fail("precision must be float64 or float32");
      } else parser.fail("unknown key '" + key + "' in [train]");
    }
  }

  parser.line_no = 0;
  if (preset && family) parser.fail("set either schedule preset or family, not both");
  if (preset) {
    auto spec = preset_schedule(*preset);
    if (!spec) parser.fail("unknown preset '" + *preset + "'");
    config.train.schedule = *spec;
  } else if (family) {
    auto fam = family_from_name(*family);
    if (!fam) parser.fail("unknown schedule family '" + *family + "'");
    ScheduleSpec spec;
    spec.family = *fam;
    spec.d_last = d_last;
    spec.d_last_start = d_last_start;
    spec.d_last_end = d_last_end;
    spec.slope = slope;
    spec.active_fraction = active_fraction;
    try {
      spec.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(path + ": " + e.what());
    }
    config.train.schedule = spec;
  }
  return config;
}

void cmd_schedule(const ScheduleSpec& spec, int blocks, int epochs,
                  const std::string& out_dir) {
  spec.validate();
  make_dirs(out_dir);
  auto surface = schedule_surface(spec, blocks, epochs);
  auto trace = expected_depth_trace(spec, blocks, epochs);

  auto surface_out = open_out(out_dir + "/surface.csv");
  surface_out << kSurfaceHeader << "\n";
  for (int e = 0; e < epochs; ++e) {
    double k = normalize_epoch(e, epochs);
    for (int l = 1; l <= blocks; ++l) {
      surface_out << e << "," << fmt(k) << "," << l << ","
                  << fmt(static_cast<double>(l) / blocks) << ","
                  << fmt(surface[e][l - 1]) << "\n";
    }
  }
  if (!surface_out) throw IoError("write failed: " + out_dir + "/surface.csv");

  auto trace_out = open_out(out_dir + "/depth_trace.csv");
  trace_out << kDepthTraceHeader << "\n";
  for (const auto& point : trace) {
    trace_out << point.epoch << "," << fmt(point.k) << "," << fmt(point.expected_depth)
              << "," << fmt(point.expected_depth / blocks) << "\n";
  }
  if (!trace_out) throw IoError("write failed: " + out_dir + "/depth_trace.csv");
}

namespace {

DatasetSplit provision_dataset(const ExperimentConfig& config) {
  DatasetSplit split;
  Rng split_rng(derive_seed(config.train.seed, seed_offset::kSplit));
  if (config.dataset == "spirals") {
    Rng data_rng(derive_seed(config.train.seed, seed_offset::kData));
    LabeledSet pool = gen_spirals(config.spiral_n, config.spiral_classes,
                                  config.spiral_noise, data_rng);
    split.test = gen_spirals(config.spiral_n, config.spiral_classes,
                             config.spiral_noise, data_rng);
    std::tie(split.train, split.val) =
        split_validation(pool, config.train.val_fraction, split_rng);
  } else if (config.dataset == "cifar10") {
    auto [pool, test] = load_cifar10(config.cifar_dir);
    split.test = std::move(test);
    std::tie(split.train, split.val) =
        split_validation(pool, config.train.val_fraction, split_rng);
    standardize_images(split);
  } else {
    LabeledSet pool = load_csv(config.dataset);
    std::tie(split.train, split.val) =
        split_validation(pool, config.train.val_fraction, split_rng);
    // Without a dedicated test file the hold-out doubles as the test set.
    split.test = config.test_csv.empty() ? split.val : load_csv(config.test_csv);
    int classes = std::max(split.train.class_count, split.test.class_count);
    split.train.class_count = split.val.class_count = split.test.class_count = classes;
  }
  return split;
}

}  // namespace

TrainOutcome cmd_train(const ExperimentConfig& config) {
  config.train.validate();
  if (config.blocks < 1 || config.width < 1) {
    throw ConfigError("net blocks and width must be >= 1");
  }
  make_dirs(config.out_dir);
  DatasetSplit data = provision_dataset(config);
  RunResult result = train_run(data, config.train, config.blocks, config.width);

  auto metrics_out = open_out(config.out_dir + "/metrics.csv");
  metrics_out << kMetricsHeader << "\n";
  for (const auto& m : result.metrics) {
    metrics_out << m.epoch << "," << fmt(m.k) << "," << fmt(m.lr) << ","
                << fmt(m.train_loss) << "," << fmt(m.train_error) << ","
                << fmt(m.val_error) << "," << fmt(m.expected_depth) << ","
                << fmt(m.mean_realized_depth) << "," << fmt(m.wall_time) << "\n";
  }
  if (!metrics_out) throw IoError("write failed: " + config.out_dir + "/metrics.csv");

  save_checkpoint(config.out_dir + "/best.ckpt", result.best_net);

  double k = normalize_epoch(result.best_epoch, config.train.epochs);
  SurvivalProfile profile = survival_profile(config.train.schedule, k, config.blocks);
  EvalResult test = evaluate(result.best_net, data.test, profile);

  auto summary_out = open_out(config.out_dir + "/summary.txt");
  summary_out << "selected_epoch=" << result.best_epoch << "\n"
              << "val_error=" << fmt(result.best_val_error) << "\n"
              << "test_error=" << fmt(test.error) << "\n";
  if (!summary_out) throw IoError("write failed: " + config.out_dir + "/summary.txt");

  return {result.best_epoch, result.best_val_error, test.error};
}

void cmd_compare(const std::vector<std::string>& run_dirs,
                 const std::string& out_path) {
  auto out = open_out(out_path);
  out << kCompareHeader << "\n";
  for (const auto& dir : run_dirs) {
    std::string metrics_path = dir + "/metrics.csv";
    std::ifstream in(metrics_path);
    if (!in) throw IoError("run " + dir + " has no metrics.csv");
    std::string header;
    if (!std::getline(in, header) || header != kMetricsHeader) {
      throw CorruptDataError("unexpected metrics header in " + metrics_path);
    }
    std::string run = std::filesystem::path(dir).filename().string();
    if (run.empty()) run = dir;
    std::vector<std::string> columns;
    {
      std::stringstream ss(header);
      std::string token;
      while (std::getline(ss, token, ',')) columns.push_back(token);
    }
    std::string line;
    int line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::vector<std::string> values;
      std::stringstream ss(line);
      std::string token;
      while (std::getline(ss, token, ',')) values.push_back(token);
      if (values.size() != columns.size()) {
        throw CorruptDataError(metrics_path + ":" + std::to_string(line_no) +
                               ": expected " + std::to_string(columns.size()) +
                               " columns");
      }
      // Column 0 is the epoch; every other column becomes one long row,
      // values passed through verbatim.
      for (std::size_t c = 1; c < columns.size(); ++c) {
        out << run << "," << values[0] << "," << columns[c] << "," << values[c] << "\n";
      }
    }
  }
  if (!out) throw IoError("write failed: " + out_path);
}

}  // namespace stochdepth
