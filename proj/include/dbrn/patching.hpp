#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dbrn/signal_io.hpp"

namespace dbrn {

// C x S x P voltage tensor plus a per-patch binary mask. One patch is one
// channel-second.
struct PatchGrid {
  std::size_t channels = 0;   // C
  std::size_t seconds = 0;    // S
  std::size_t patch_len = 0;  // P
  double rate_hz = 0.0;
  std::vector<double> data;         // [c][s][p], row-major
  std::vector<std::uint8_t> mask;   // [c][s], 1 = masked
  std::vector<std::size_t> channel_order;  // source-channel indices

  double& at(std::size_t c, std::size_t s, std::size_t p) {
    return data[(c * seconds + s) * patch_len + p];
  }
  double at(std::size_t c, std::size_t s, std::size_t p) const {
    return data[(c * seconds + s) * patch_len + p];
  }
  const double* patch(std::size_t c, std::size_t s) const {
    return data.data() + (c * seconds + s) * patch_len;
  }
  std::uint8_t masked(std::size_t c, std::size_t s) const {
    return mask[c * seconds + s];
  }
  std::size_t masked_count() const;
};

// Draws C uniformly from [c_min, C-tilde], permutes uniformly, keeps the first
// C channels. Returns the subset recording and the chosen source indices.
std::pair<Recording, std::vector<std::size_t>> channel_reorganization(
    const Recording& rec, std::uint64_t seed, std::size_t c_min);

// Divide by 100 so typical scalp amplitudes land in ~[-1, 1].
Recording normalize(const Recording& rec);

// Non-overlapping one-second patches; the T mod P remainder is dropped.
PatchGrid patchify(const Recording& rec);

// Zero out exactly floor(mu*C*S) patches chosen uniformly without replacement.
PatchGrid apply_mask(const PatchGrid& grid, double mu, std::uint64_t seed);

}  // namespace dbrn
