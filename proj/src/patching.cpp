#include "dbrn/patching.hpp"

#include <cmath>

#include "dbrn/errors.hpp"
#include "dbrn/rng.hpp"

namespace dbrn {

std::size_t PatchGrid::masked_count() const {
  std::size_t n = 0;
  for (auto m : mask) n += m;
  return n;
}

std::pair<Recording, std::vector<std::size_t>> channel_reorganization(
    const Recording& rec, std::uint64_t seed, std::size_t c_min) {
  rec.validate();
  const std::size_t c_all = rec.channels();
  if (c_min < 1 || c_min > c_all)
    throw param_error("channel_reorganization: c_min " + std::to_string(c_min) +
                      " outside [1, " + std::to_string(c_all) + "]");
  CounterRng rng(seed);
  const std::size_t c_sel =
      c_min + static_cast<std::size_t>(rng.next_below(c_all - c_min + 1));
  const std::vector<std::size_t> perm = rng.permutation(c_all);

  Recording out;
  out.rate_hz = rec.rate_hz;
  std::vector<std::size_t> picked(perm.begin(), perm.begin() + c_sel);
  out.channel_names.reserve(c_sel);
  out.data.reserve(c_sel);
  for (std::size_t idx : picked) {
    out.channel_names.push_back(rec.channel_names[idx]);
    out.data.push_back(rec.data[idx]);
  }
  return {std::move(out), std::move(picked)};
}

Recording normalize(const Recording& rec) {
  rec.validate();
  Recording out = rec;
  for (auto& ch : out.data)
    for (auto& v : ch) v /= 100.0;
  return out;
}

PatchGrid patchify(const Recording& rec) {
  rec.validate();
  const std::size_t p = static_cast<std::size_t>(std::llround(rec.rate_hz));
  if (p < 1) throw param_error("patchify: rate too low for one-second patches");
  const std::size_t t = rec.samples();
  if (t < p)
    throw param_error("patchify: " + std::to_string(t) + " samples < patch length " +
                      std::to_string(p));
  PatchGrid grid;
  grid.channels = rec.channels();
  grid.seconds = t / p;
  grid.patch_len = p;
  grid.rate_hz = rec.rate_hz;
  grid.data.resize(grid.channels * grid.seconds * p);
  grid.mask.assign(grid.channels * grid.seconds, 0);
  grid.channel_order.resize(grid.channels);
  for (std::size_t c = 0; c < grid.channels; ++c) {
    grid.channel_order[c] = c;
    for (std::size_t s = 0; s < grid.seconds; ++s)
      for (std::size_t i = 0; i < p; ++i) grid.at(c, s, i) = rec.data[c][s * p + i];
  }
  return grid;
}

PatchGrid apply_mask(const PatchGrid& grid, double mu, std::uint64_t seed) {
  if (!(mu >= 0.0 && mu <= 1.0))
    throw param_error("apply_mask: mu " + std::to_string(mu) + " outside [0, 1]");
  PatchGrid out = grid;
  const std::size_t cells = grid.channels * grid.seconds;
  const std::size_t k = static_cast<std::size_t>(
      std::floor(mu * static_cast<double>(cells)));
  CounterRng rng(seed);
  for (std::size_t cell : rng.sample_without_replacement(cells, k)) {
    out.mask[cell] = 1;
    double* p = out.data.data() + cell * grid.patch_len;
    for (std::size_t i = 0; i < grid.patch_len; ++i) p[i] = 0.0;
  }
  return out;
}

}  // namespace dbrn
