#pragma once

#include <string>

#include "stochdepth/net.hpp"

namespace stochdepth {

// Flat binary checkpoint, always in double precision, little-endian:
//
//   bytes 0..7   magic "SDCKPT01"
//   byte  8      activation (0 = relu, 1 = identity)
//   u32 x 4      input_dim, width, depth, classes
//   f64 ...      tensors row-major in fixed order: input_proj.weight,
//                input_proj.bias, then per block fc1.weight, fc1.bias,
//                fc2.weight, fc2.bias, then head.weight, head.bias
//
// Throws IoError when the file cannot be opened or is short, and
// CorruptDataError on a bad magic, activation or dimension field.
void save_checkpoint(const std::string& path, const ResidualNet& net);
ResidualNet load_checkpoint(const std::string& path);

}  // namespace stochdepth
