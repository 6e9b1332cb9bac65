#include "stochdepth/gates.hpp"

namespace stochdepth {

GateMask sample_mask(const SurvivalProfile& profile, Rng& rng, int epoch,
                     std::int64_t sample_id) {
  GateMask mask;
  mask.epoch = epoch;
  mask.sample_id = sample_id;
  mask.alive.resize(profile.probs.size());
  for (std::size_t i = 0; i < profile.probs.size(); ++i) {
    mask.alive[i] = rng.bernoulli(profile.probs[i]);
  }
  return mask;
}

int realized_depth(const GateMask& mask) {
  int count = 0;
  for (bool alive : mask.alive) count += alive ? 1 : 0;
  return count;
}

}  // namespace stochdepth
