#pragma once

#include <array>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dbrn/patching.hpp"
#include "dbrn/spectral.hpp"

namespace dbrn {

// Low-band phase paired with high-band amplitude, as indices into a BandTable.
struct CfcPair {
  std::size_t low_band = 0;
  std::size_t high_band = 0;
};

// theta->gamma, alpha->gamma, delta->beta
std::array<CfcPair, 3> canonical_cfc_pairs();

// Per-patch order-parameter targets, 19 dims per (c, s):
//   0-4   relative band powers (delta..gamma)
//   5-14  PLV (mean, std) per band, interleaved
//   15-17 CFC for the three pairs
//   18    sample entropy
struct NspTargets {
  static constexpr std::size_t kDim = 19;
  std::size_t channels = 0;
  std::size_t seconds = 0;
  std::vector<double> values;  // [c][s][19]

  double& at(std::size_t c, std::size_t s, std::size_t k) {
    return values[(c * seconds + s) * kDim + k];
  }
  double at(std::size_t c, std::size_t s, std::size_t k) const {
    return values[(c * seconds + s) * kDim + k];
  }
  static const std::array<const char*, kDim>& column_names();
};

// Relative power integrated per band and normalized onto the 5-simplex.
// An all-zero patch maps to the uniform simplex.
std::array<double, 5> rel_band_power(std::span<const double> patch, double rate_hz,
                                     const BandTable& bands);

// Mean/std (population) of the upper-triangular pairwise phase-locking values
// in one band, over one second of all channels. C = 1 yields (1, 0).
std::pair<double, double> plv_summary(const std::vector<std::span<const double>>& chans,
                                      const Band& band, double rate_hz);

// Mean of cos(phase_low) * amplitude_high over the patch (both from the same
// patch via the analytic signal).
double cfc(std::span<const double> patch, const Band& low, const Band& high,
           double rate_hz);

// Chebyshev-distance template counting, self-matches excluded, r scaled to the
// population std. Returns log((P-m-1)*(P-m)) when no matches exist, 0 when the
// patch is constant.
double sample_entropy(std::span<const double> patch, std::size_t m = 2,
                      double r_factor = 0.2);

// Assemble the full C x S x 19 tensor from an unmasked grid. PLV summaries are
// computed once per second from all channels and broadcast down the channel axis.
NspTargets assemble_targets(const PatchGrid& clean_grid, const BandTable& bands,
                            const std::array<CfcPair, 3>& pairs);

}  // namespace dbrn
