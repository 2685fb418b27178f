#include "dbrn/neurodyn.hpp"

#include <cmath>
#include <complex>

#include "dbrn/errors.hpp"

namespace dbrn {

namespace {
constexpr double kDivEps = 1e-12;
}

std::array<CfcPair, 3> canonical_cfc_pairs() {
  return {CfcPair{BandTable::kTheta, BandTable::kGamma},
          CfcPair{BandTable::kAlpha, BandTable::kGamma},
          CfcPair{BandTable::kDelta, BandTable::kBeta}};
}

const std::array<const char*, NspTargets::kDim>& NspTargets::column_names() {
  static const std::array<const char*, kDim> names = {
      "bp_delta",        "bp_theta",        "bp_alpha",       "bp_beta",
      "bp_gamma",        "plv_delta_mean",  "plv_delta_std",  "plv_theta_mean",
      "plv_theta_std",   "plv_alpha_mean",  "plv_alpha_std",  "plv_beta_mean",
      "plv_beta_std",    "plv_gamma_mean",  "plv_gamma_std",  "cfc_theta_gamma",
      "cfc_alpha_gamma", "cfc_delta_beta",  "sampen"};
  return names;
}

std::array<double, 5> rel_band_power(std::span<const double> patch, double rate_hz,
                                     const BandTable& bands) {
  const Spectrum s = psd(patch, rate_hz);
  std::array<double, 5> powers{};
  double total = 0.0;
  for (std::size_t b = 0; b < 5; ++b) {
    double acc = 0.0;
    for (std::size_t k : band_bins(patch.size(), rate_hz, bands[b].lo_hz, bands[b].hi_hz))
      acc += s.psd[k];
    powers[b] = acc;
    total += acc;
  }
  if (total <= 0.0) return {0.2, 0.2, 0.2, 0.2, 0.2};
  for (auto& p : powers) p /= (total + kDivEps);
  return powers;
}

std::pair<double, double> plv_summary(const std::vector<std::span<const double>>& chans,
                                      const Band& band, double rate_hz) {
  const std::size_t c = chans.size();
  if (c <= 1) return {1.0, 0.0};
  const std::size_t p = chans[0].size();
  if (p < 4) throw param_error("plv_summary: patch too short");

  std::vector<std::vector<double>> phases(c);
  std::vector<double> amp;
  for (std::size_t i = 0; i < c; ++i)
    analytic_phase_amp(chans[i], band.lo_hz, band.hi_hz, rate_hz, phases[i], amp);

  std::vector<double> plvs;
  plvs.reserve(c * (c - 1) / 2);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = i + 1; j < c; ++j) {
      std::complex<double> resultant(0.0, 0.0);
      for (std::size_t t = 0; t < p; ++t) {
        const double d = phases[i][t] - phases[j][t];
        resultant += std::complex<double>(std::cos(d), std::sin(d));
      }
      plvs.push_back(std::abs(resultant) / static_cast<double>(p));
    }
  }
  double mean = 0.0;
  for (double v : plvs) mean += v;
  mean /= static_cast<double>(plvs.size());
  double var = 0.0;
  for (double v : plvs) var += (v - mean) * (v - mean);
  var /= static_cast<double>(plvs.size());
  return {mean, std::sqrt(var)};
}

double cfc(std::span<const double> patch, const Band& low, const Band& high,
           double rate_hz) {
  std::vector<double> phase_low, amp_low, phase_high, amp_high;
  analytic_phase_amp(patch, low.lo_hz, low.hi_hz, rate_hz, phase_low, amp_low);
  analytic_phase_amp(patch, high.lo_hz, high.hi_hz, rate_hz, phase_high, amp_high);
  double acc = 0.0;
  for (std::size_t t = 0; t < patch.size(); ++t)
    acc += std::cos(phase_low[t]) * amp_high[t];
  return acc / static_cast<double>(patch.size());
}

double sample_entropy(std::span<const double> patch, std::size_t m, double r_factor) {
  const std::size_t n = patch.size();
  if (n <= m + 1)
    throw param_error("sample_entropy: need more than m+1 samples");

  double mean = 0.0;
  for (double v : patch) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : patch) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double sd = std::sqrt(var);
  if (sd == 0.0) return 0.0;
  const double r = r_factor * sd;

  // templates start at 0..n-m-1 so both the m and m+1 windows exist
  const std::size_t nt = n - m;
  std::size_t match_m = 0, match_m1 = 0;
  for (std::size_t i = 0; i < nt; ++i) {
    for (std::size_t j = 0; j < nt; ++j) {
      if (j == i) continue;
      double dmax = 0.0;
      for (std::size_t k = 0; k < m; ++k)
        dmax = std::max(dmax, std::abs(patch[i + k] - patch[j + k]));
      if (dmax <= r) {
        ++match_m;
        if (std::max(dmax, std::abs(patch[i + m] - patch[j + m])) <= r) ++match_m1;
      }
    }
  }
  if (match_m == 0 || match_m1 == 0)
    return std::log(static_cast<double>((n - m - 1) * (n - m)));
  return -std::log(static_cast<double>(match_m1) / static_cast<double>(match_m));
}

NspTargets assemble_targets(const PatchGrid& grid, const BandTable& bands,
                            const std::array<CfcPair, 3>& pairs) {
  if (grid.masked_count() != 0)
    throw param_error("assemble_targets: grid must be unmasked");
  NspTargets t;
  t.channels = grid.channels;
  t.seconds = grid.seconds;
  t.values.assign(grid.channels * grid.seconds * NspTargets::kDim, 0.0);

  for (std::size_t c = 0; c < grid.channels; ++c) {
    for (std::size_t s = 0; s < grid.seconds; ++s) {
      const std::span<const double> patch(grid.patch(c, s), grid.patch_len);
      const auto bp = rel_band_power(patch, grid.rate_hz, bands);
      for (std::size_t k = 0; k < 5; ++k) t.at(c, s, k) = bp[k];
      for (std::size_t k = 0; k < 3; ++k)
        t.at(c, s, 15 + k) =
            cfc(patch, bands[pairs[k].low_band], bands[pairs[k].high_band],
                grid.rate_hz);
      t.at(c, s, 18) = sample_entropy(patch);
    }
  }

  for (std::size_t s = 0; s < grid.seconds; ++s) {
    std::vector<std::span<const double>> chans;
    chans.reserve(grid.channels);
    for (std::size_t c = 0; c < grid.channels; ++c)
      chans.emplace_back(grid.patch(c, s), grid.patch_len);
    for (std::size_t b = 0; b < 5; ++b) {
      const auto [mean, sd] = plv_summary(chans, bands[b], grid.rate_hz);
      for (std::size_t c = 0; c < grid.channels; ++c) {
        t.at(c, s, 5 + 2 * b) = mean;
        t.at(c, s, 6 + 2 * b) = sd;
      }
    }
  }
  return t;
}

}  // namespace dbrn
