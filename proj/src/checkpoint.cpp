#include "stochdepth/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "stochdepth/errors.hpp"

namespace stochdepth {

namespace {

constexpr char kMagic[8] = {'S', 'D', 'C', 'K', 'P', 'T', '0', '1'};

void put_u32(std::ostream& out, std::uint32_t value) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  out.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& path) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
    throw IoError("checkpoint truncated: " + path);
  }
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i) value |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return value;
}

void put_f64(std::ostream& out, double value) {
  auto bits = std::bit_cast<std::uint64_t>(value);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

double get_f64(std::istream& in, const std::string& path) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
    throw IoError("checkpoint truncated: " + path);
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

void put_dense(std::ostream& out, const DenseT<double>& layer) {
  for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
      put_f64(out, layer.weight(r, c));
    }
  }
  for (Eigen::Index i = 0; i < layer.bias.size(); ++i) put_f64(out, layer.bias(i));
}

DenseT<double> get_dense(std::istream& in, int out_dim, int in_dim,
                         const std::string& path) {
  DenseT<double> layer;
  layer.weight.resize(out_dim, in_dim);
  for (int r = 0; r < out_dim; ++r) {
    for (int c = 0; c < in_dim; ++c) layer.weight(r, c) = get_f64(in, path);
  }
  layer.bias.resize(out_dim);
  for (int i = 0; i < out_dim; ++i) layer.bias(i) = get_f64(in, path);
  return layer;
}

}  // namespace

void save_checkpoint(const std::string& path, const ResidualNet& net) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, sizeof(kMagic));
  char activation = net.activation == Activation::ReLU ? 0 : 1;
  out.write(&activation, 1);
  put_u32(out, static_cast<std::uint32_t>(net.input_dim()));
  put_u32(out, static_cast<std::uint32_t>(net.width()));
  put_u32(out, static_cast<std::uint32_t>(net.depth()));
  put_u32(out, static_cast<std::uint32_t>(net.classes()));
  put_dense(out, net.input_proj);
  for (const auto& block : net.blocks) {
    put_dense(out, block.fc1);
    put_dense(out, block.fc2);
  }
  put_dense(out, net.head);
  if (!out) throw IoError("write failed: " + path);
}

ResidualNet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  if (!in.read(magic, sizeof(magic))) throw IoError("checkpoint truncated: " + path);
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CorruptDataError("bad checkpoint magic in " + path);
  }
  char activation = 0;
  if (!in.read(&activation, 1)) throw IoError("checkpoint truncated: " + path);
  if (activation != 0 && activation != 1) {
    throw CorruptDataError("bad activation byte in " + path);
  }
  auto input_dim = static_cast<int>(get_u32(in, path));
  auto width = static_cast<int>(get_u32(in, path));
  auto depth = static_cast<int>(get_u32(in, path));
  auto classes = static_cast<int>(get_u32(in, path));
  if (input_dim < 1 || width < 1 || depth < 1 || classes < 1) {
    throw CorruptDataError("bad dimensions in " + path);
  }
  ResidualNet net;
  net.activation = activation == 0 ? Activation::ReLU : Activation::Identity;
  net.input_proj = get_dense(in, width, input_dim, path);
  net.blocks.resize(depth);
  for (auto& block : net.blocks) {
    block.fc1 = get_dense(in, width, width, path);
    block.fc2 = get_dense(in, width, width, path);
  }
  net.head = get_dense(in, classes, width, path);
  return net;
}

}  // namespace stochdepth
