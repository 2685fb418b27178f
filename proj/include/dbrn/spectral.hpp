#pragma once

#include <array>
#include <complex>
#include <span>
#include <string>
#include <vector>

namespace dbrn {

struct Band {
  std::string name;
  double lo_hz = 0.0;
  double hi_hz = 0.0;
};

// The five canonical bands, gamma clipped to the Nyquist frequency.
struct BandTable {
  std::array<Band, 5> bands;

  static BandTable canonical(double rate_hz);
  void validate(double rate_hz) const;
  const Band& operator[](std::size_t i) const { return bands[i]; }
  static constexpr std::size_t kDelta = 0, kTheta = 1, kAlpha = 2, kBeta = 3,
                               kGamma = 4;
};

struct Spectrum {
  std::vector<double> psd;       // |X[k]|^2 for k = 0..floor(n/2)
  std::vector<double> freqs_hz;  // k * rate / n
};

// Exact-DFT semantics for any length (mixed-radix Cooley-Tukey, direct DFT on
// prime factors). inverse applies the 1/N scale.
std::vector<std::complex<double>> fft(std::span<const std::complex<double>> x,
                                      bool inverse);

Spectrum psd(std::span<const double> x, double rate_hz);

// Bin k (1..floor(n/2)) belongs to [lo, hi) by its center frequency k*rate/n.
// DC is never banded.
std::vector<std::size_t> band_bins(std::size_t n, double rate_hz, double lo_hz,
                                   double hi_hz);

// Brick-wall band isolation followed by the frequency-domain analytic-signal
// construction (double positive bins, zero negatives, keep DC/Nyquist).
std::vector<std::complex<double>> band_analytic(std::span<const double> x,
                                                double lo_hz, double hi_hz,
                                                double rate_hz);

// phase = angle, amplitude = modulus of the band-limited analytic signal.
void analytic_phase_amp(std::span<const double> x, double lo_hz, double hi_hz,
                        double rate_hz, std::vector<double>& phase,
                        std::vector<double>& amplitude);

}  // namespace dbrn
