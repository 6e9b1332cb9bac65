#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include "stochdepth/errors.hpp"
#include "stochdepth/experiment.hpp"
#include "stochdepth/schedule.hpp"

namespace {

// Exit codes: 0 success, 2 config/usage, 3 I/O or corrupt data, 4 numeric
// abort, 1 anything else.
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

struct ScheduleFlags {
  std::string preset;
  std::string family;
  std::optional<double> d_last, d_last_start, d_last_end, slope, active_fraction;

  void add_to(CLI::App& app) {
    app.add_option("--preset", preset, "named schedule configuration");
    app.add_option("--family", family,
                   "schedule family: normal|fixed|endpoint|linear|aggressive");
    app.add_option("--d-last", d_last, "last-block death rate (fixed)");
    app.add_option("--d-last-start", d_last_start, "last-block rate at k=0 (endpoint)");
    app.add_option("--d-last-end", d_last_end, "last-block rate at k=1 (endpoint)");
    app.add_option("--slope", slope, "growth slope (linear)");
    app.add_option("--active-fraction", active_fraction,
                   "initially active share (aggressive)");
  }

  // Empty when no schedule flag was given at all.
  std::optional<stochdepth::ScheduleSpec> resolve() const {
    using stochdepth::ConfigError;
    if (!preset.empty() && !family.empty()) {
      throw ConfigError("use either --preset or --family, not both");
    }
    if (!preset.empty()) {
      auto spec = stochdepth::preset_schedule(preset);
      if (!spec) throw ConfigError("unknown preset '" + preset + "'");
      return spec;
    }
    if (!family.empty()) {
      auto fam = stochdepth::family_from_name(family);
      if (!fam) throw ConfigError("unknown family '" + family + "'");
      stochdepth::ScheduleSpec spec;
      spec.family = *fam;
      spec.d_last = d_last;
      spec.d_last_start = d_last_start;
      spec.d_last_end = d_last_end;
      spec.slope = slope;
      spec.active_fraction = active_fraction;
      try {
        spec.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      return spec;
    }
    return std::nullopt;
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Epoch-dependent stochastic-depth schedules for residual networks"};
  app.require_subcommand(1);

  // schedule: export death-rate surface and expected-depth trace as CSV
  auto* schedule_cmd =
      app.add_subcommand("schedule", "export schedule surface and depth trace");
  ScheduleFlags schedule_flags;
  schedule_flags.add_to(*schedule_cmd);
  int sched_blocks = 54;
  int sched_epochs = 500;
  std::string sched_out = "schedule";
  schedule_cmd->add_option("--blocks", sched_blocks, "residual block count");
  schedule_cmd->add_option("--epochs", sched_epochs, "epoch count");
  schedule_cmd->add_option("--out", sched_out, "output directory");

  // train: run one experiment
  auto* train_cmd = app.add_subcommand("train", "train a gated residual network");
  ScheduleFlags train_sched_flags;
  train_sched_flags.add_to(*train_cmd);
  std::string config_path;
  stochdepth::ExperimentConfig config;
  std::optional<int> blocks, width, epochs, batch_size, augment_pad;
  std::optional<double> base_lr, momentum, lr_factor, weight_decay, val_fraction;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> dataset, cifar_dir, test_csv, out_dir, precision;
  std::optional<int> spiral_classes, spiral_n;
  std::optional<double> spiral_noise;
  bool augment = false;
  train_cmd->add_option("--config", config_path, "key=value config file");
  train_cmd->add_option("--dataset", dataset, "spirals | cifar10 | path to CSV");
  train_cmd->add_option("--cifar-dir", cifar_dir, "CIFAR-10 binary batch directory");
  train_cmd->add_option("--test-csv", test_csv, "held-out test CSV (csv datasets)");
  train_cmd->add_option("--blocks", blocks, "residual block count");
  train_cmd->add_option("--width", width, "hidden width");
  train_cmd->add_option("--epochs", epochs, "training epochs");
  train_cmd->add_option("--batch-size", batch_size, "mini-batch size");
  train_cmd->add_option("--seed", seed, "experiment seed");
  train_cmd->add_option("--out", out_dir, "output directory");
  train_cmd->add_option("--val-fraction", val_fraction, "validation hold-out fraction");
  train_cmd->add_option("--base-lr", base_lr, "initial learning rate");
  train_cmd->add_option("--momentum", momentum, "Nesterov momentum coefficient");
  train_cmd->add_option("--lr-factor", lr_factor, "learning rate decay factor");
  train_cmd->add_option("--weight-decay", weight_decay, "L2 coefficient");
  train_cmd->add_option("--precision", precision, "float64 | float32");
  train_cmd->add_flag("--augment", augment, "random flip+translate (image data)");
  train_cmd->add_option("--augment-pad", augment_pad, "translation range in pixels");
  train_cmd->add_option("--spiral-classes", spiral_classes, "spiral arm count");
  train_cmd->add_option("--spiral-n", spiral_n, "examples per spiral arm");
  train_cmd->add_option("--spiral-noise", spiral_noise, "spiral coordinate noise");

  // compare: merge run metrics into one long-format CSV
  auto* compare_cmd = app.add_subcommand("compare", "merge run metrics for plotting");
  std::vector<std::string> run_dirs;
  std::string compare_out = "compare.csv";
  compare_cmd->add_option("dirs", run_dirs, "run directories with metrics.csv")
      ->required();
  compare_cmd->add_option("--out", compare_out, "merged CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (schedule_cmd->parsed()) {
    auto spec = schedule_flags.resolve();
    if (!spec) throw stochdepth::ConfigError("schedule requires --preset or --family");
    stochdepth::cmd_schedule(*spec, sched_blocks, sched_epochs, sched_out);
    std::printf("wrote %s/surface.csv and %s/depth_trace.csv\n", sched_out.c_str(),
                sched_out.c_str());
    return 0;
  }

  if (train_cmd->parsed()) {
    if (!config_path.empty()) config = stochdepth::load_config_file(config_path);
    if (auto spec = train_sched_flags.resolve()) config.train.schedule = *spec;
    if (dataset) config.dataset = *dataset;
    if (cifar_dir) config.cifar_dir = *cifar_dir;
    if (test_csv) config.test_csv = *test_csv;
    if (blocks) config.blocks = *blocks;
    if (width) config.width = *width;
    if (epochs) config.train.epochs = *epochs;
    if (batch_size) config.train.batch_size = *batch_size;
    if (seed) config.train.seed = *seed;
    if (out_dir) config.out_dir = *out_dir;
    if (val_fraction) config.train.val_fraction = *val_fraction;
    if (base_lr) config.train.base_lr = *base_lr;
    if (momentum) config.train.momentum = *momentum;
    if (lr_factor) config.train.lr_factor = *lr_factor;
    if (weight_decay) config.train.weight_decay = *weight_decay;
    if (augment) config.train.augment = true;
    if (augment_pad) config.train.augment_pad = *augment_pad;
    if (spiral_classes) config.spiral_classes = *spiral_classes;
    if (spiral_n) config.spiral_n = *spiral_n;
    if (spiral_noise) config.spiral_noise = *spiral_noise;
    if (precision) {
      if (*precision == "float64") config.train.precision = stochdepth::Precision::Float64;
      else if (*precision == "float32") config.train.precision = stochdepth::Precision::Float32;
      else throw stochdepth::ConfigError("precision must be float64 or float32");
    }
    try {
      config.train.validate();
    } catch (const std::invalid_argument& e) {
      throw stochdepth::ConfigError(e.what());
    }
    auto outcome = stochdepth::cmd_train(config);
    std::printf("selected epoch %d  val_error %.4f  test_error %.4f  (outputs in %s)\n",
                outcome.best_epoch, outcome.val_error, outcome.test_error,
                config.out_dir.c_str());
    return 0;
  }

  stochdepth::cmd_compare(run_dirs, compare_out);
  std::printf("wrote %s\n", compare_out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const stochdepth::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const stochdepth::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kExitIo;
  } catch (const stochdepth::CorruptDataError& e) {
    std::fprintf(stderr, "corrupt data: %s\n", e.what());
    return kExitIo;
  } catch (const stochdepth::NumericError& e) {
    std::fprintf(stderr, "numeric abort: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
