#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "stochdepth/checkpoint.hpp"
#include "stochdepth/errors.hpp"

using namespace stochdepth;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("checkpoint");

TEST_CASE("checkpoint round trip is exact") {
  fs::path dir = fs::temp_directory_path() / "stochdepth_ckpt";
  fs::create_directories(dir);
  std::string path = (dir / "net.ckpt").string();

  Rng rng(2024);
  ResidualNet net = init_net<double>(5, 7, 3, 4, rng);
  net.head.weight.setRandom();
  net.blocks[2].fc1.bias.setRandom();
  save_checkpoint(path, net);

  ResidualNet loaded = load_checkpoint(path);
  CHECK(loaded.depth() == 5);
  CHECK(loaded.width() == 7);
  CHECK(loaded.input_dim() == 3);
  CHECK(loaded.classes() == 4);
  CHECK(loaded.activation == Activation::ReLU);
  CHECK((loaded.input_proj.weight.array() == net.input_proj.weight.array()).all());
  for (int i = 0; i < 5; ++i) {
    CHECK((loaded.blocks[i].fc1.weight.array() == net.blocks[i].fc1.weight.array()).all());
    CHECK((loaded.blocks[i].fc1.bias.array() == net.blocks[i].fc1.bias.array()).all());
    CHECK((loaded.blocks[i].fc2.weight.array() == net.blocks[i].fc2.weight.array()).all());
  }
  CHECK((loaded.head.weight.array() == net.head.weight.array()).all());
}

TEST_CASE("checkpoint error paths") {
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/net.ckpt"), IoError);

  fs::path dir = fs::temp_directory_path() / "stochdepth_ckpt_bad";
  fs::create_directories(dir);

  std::string bad_magic = (dir / "bad_magic.ckpt").string();
  {
    std::ofstream out(bad_magic, std::ios::binary);
    out << "NOTACKPTxxxxxxxxxxxxxxxxxxx";
  }
  CHECK_THROWS_AS(load_checkpoint(bad_magic), CorruptDataError);

  std::string truncated = (dir / "truncated.ckpt").string();
  {
    Rng rng(1);
    ResidualNet net = init_net<double>(2, 3, 2, 2, rng);
    save_checkpoint(truncated, net);
    auto size = fs::file_size(truncated);
    fs::resize_file(truncated, size / 2);
  }
  CHECK_THROWS_AS(load_checkpoint(truncated), IoError);
}

TEST_SUITE_END();
