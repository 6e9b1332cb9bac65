#pragma once

#include <cstdint>
#include <vector>

#include "stochdepth/rng.hpp"
#include "stochdepth/schedule.hpp"

namespace stochdepth {

// Realized alive/dead decisions for one training forward pass. One mask is
// drawn per mini-batch; every example in the batch runs the same network.
struct GateMask {
  std::vector<bool> alive;  // alive[l - 1] = block l participates
  int epoch = 0;
  std::int64_t sample_id = 0;

  int depth() const { return static_cast<int>(alive.size()); }
};

// Independent Bernoulli(p_l) draw per block; consumes exactly one rng draw
// per block. Entries with p_l = 0 are always false, with p_l = 1 always true.
GateMask sample_mask(const SurvivalProfile& profile, Rng& rng, int epoch = 0,
                     std::int64_t sample_id = 0);

// Number of alive blocks in the mask.
int realized_depth(const GateMask& mask);

}  // namespace stochdepth
