#include "dbrn/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dbrn/errors.hpp"

namespace dbrn {

namespace {

using cd = std::complex<double>;

std::size_t smallest_prime_factor(std::size_t n) {
  for (std::size_t p = 2; p * p <= n; ++p)
    if (n % p == 0) return p;
  return n;
}

// Unnormalized transform with sign = -1 (forward) or +1 (inverse).
void dft_rec(const cd* in, cd* out, std::size_t n, std::size_t stride, double sign) {
  if (n == 1) {
    out[0] = in[0];
    return;
  }
  const std::size_t p = smallest_prime_factor(n);
  const double w0 = sign * 2.0 * std::numbers::pi / static_cast<double>(n);
  if (p == n) {
    // prime length: direct DFT
    for (std::size_t k = 0; k < n; ++k) {
      cd acc(0.0, 0.0);
      for (std::size_t t = 0; t < n; ++t)
        acc += in[t * stride] * std::polar(1.0, w0 * static_cast<double>(t * k % n));
      out[k] = acc;
    }
    return;
  }
  const std::size_t m = n / p;
  // p interleaved sub-transforms of length m
  std::vector<cd> sub(n);
  for (std::size_t j = 0; j < p; ++j)
    dft_rec(in + j * stride, sub.data() + j * m, m, stride * p, sign);
  // combine: X[k] = sum_j w_n^{j k} * Sub_j[k mod m]
  for (std::size_t k = 0; k < n; ++k) {
    cd acc(0.0, 0.0);
    const std::size_t km = k % m;
    for (std::size_t j = 0; j < p; ++j)
      acc += sub[j * m + km] * std::polar(1.0, w0 * static_cast<double>((j * k) % n));
    out[k] = acc;
  }
}

}  // namespace

std::vector<cd> fft(std::span<const cd> x, bool inverse) {
  const std::size_t n = x.size();
  if (n == 0) throw param_error("fft: zero-length input");
  std::vector<cd> out(n);
  dft_rec(x.data(), out.data(), n, 1, inverse ? 1.0 : -1.0);
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& v : out) v *= scale;
  }
  return out;
}

BandTable BandTable::canonical(double rate_hz) {
  const double nyq = rate_hz / 2.0;
  BandTable t{{Band{"delta", 0.5, 4.0}, Band{"theta", 4.0, 8.0},
               Band{"alpha", 8.0, 13.0}, Band{"beta", 13.0, 30.0},
               Band{"gamma", 30.0, std::min(75.0, nyq)}}};
  t.validate(rate_hz);
  return t;
}

void BandTable::validate(double rate_hz) const {
  double prev_hi = 0.0;
  for (const auto& b : bands) {
    if (!(b.lo_hz > 0.0) || !(b.lo_hz < b.hi_hz))
      throw param_error("band table: band '" + b.name + "' has invalid edges");
    if (b.lo_hz < prev_hi)
      throw param_error("band table: band '" + b.name + "' overlaps its predecessor");
    prev_hi = b.hi_hz;
  }
  if (bands.back().hi_hz > rate_hz / 2.0 + 1e-12)
    throw param_error("band table: gamma exceeds the Nyquist frequency");
}

Spectrum psd(std::span<const double> x, double rate_hz) {
  const std::size_t n = x.size();
  if (n < 2) throw param_error("psd: need at least 2 samples");
  std::vector<cd> cx(n);
  for (std::size_t i = 0; i < n; ++i) cx[i] = cd(x[i], 0.0);
  const std::vector<cd> sx = fft(cx, false);
  Spectrum s;
  const std::size_t half = n / 2;
  s.psd.resize(half + 1);
  s.freqs_hz.resize(half + 1);
  for (std::size_t k = 0; k <= half; ++k) {
    s.psd[k] = std::norm(sx[k]);
    s.freqs_hz[k] = static_cast<double>(k) * rate_hz / static_cast<double>(n);
  }
  return s;
}

std::vector<std::size_t> band_bins(std::size_t n, double rate_hz, double lo_hz,
                                   double hi_hz) {
  std::vector<std::size_t> bins;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    const double f = static_cast<double>(k) * rate_hz / static_cast<double>(n);
    if (f >= lo_hz && f < hi_hz) bins.push_back(k);
  }
  return bins;
}

std::vector<cd> band_analytic(std::span<const double> x, double lo_hz,
                              double hi_hz, double rate_hz) {
  const std::size_t n = x.size();
  if (n < 4) throw param_error("band_analytic: need at least 4 samples");
  if (!(lo_hz < hi_hz) || hi_hz > rate_hz / 2.0 + 1e-12)
    throw param_error("band_analytic: invalid band [" + std::to_string(lo_hz) +
                      ", " + std::to_string(hi_hz) + ")");
  const std::vector<std::size_t> keep = band_bins(n, rate_hz, lo_hz, hi_hz);
  if (keep.empty())
    throw param_error("band_analytic: band [" + std::to_string(lo_hz) + ", " +
                      std::to_string(hi_hz) + ") Hz contains no DFT bins at n=" +
                      std::to_string(n));

  std::vector<cd> cx(n);
  for (std::size_t i = 0; i < n; ++i) cx[i] = cd(x[i], 0.0);
  std::vector<cd> sx = fft(cx, false);

  std::vector<cd> analytic(n, cd(0.0, 0.0));
  const bool even = (n % 2 == 0);
  const std::size_t nyquist = n / 2;
  for (std::size_t k : keep) {
    if (even && k == nyquist)
      analytic[k] = sx[k];  // Nyquist kept undoubled
    else
      analytic[k] = 2.0 * sx[k];
  }
  return fft(analytic, true);
}

void analytic_phase_amp(std::span<const double> x, double lo_hz, double hi_hz,
                        double rate_hz, std::vector<double>& phase,
                        std::vector<double>& amplitude) {
  const std::vector<cd> z = band_analytic(x, lo_hz, hi_hz, rate_hz);
  phase.resize(z.size());
  amplitude.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    phase[i] = std::atan2(z[i].imag(), z[i].real());
    amplitude[i] = std::abs(z[i]);
  }
}

}  // namespace dbrn
