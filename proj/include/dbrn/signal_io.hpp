#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace dbrn {

// Multichannel time series in microvolts.
struct Recording {
  std::vector<std::string> channel_names;
  double rate_hz = 0.0;
  std::vector<std::vector<double>> data;  // [channel][sample]

  std::size_t channels() const { return data.size(); }
  std::size_t samples() const { return data.empty() ? 0 : data[0].size(); }

  // Throws on violated invariants (shape, finiteness, rate).
  void validate() const;

  bool operator==(const Recording&) const = default;
};

// Named 3-D electrode coordinates in meters.
struct Montage {
  std::map<std::string, std::array<double, 3>> entries;

  void validate() const;
  const std::array<double, 3>& position(const std::string& label) const;
};

struct SinusoidComponent {
  double freq_hz = 0.0;
  double amplitude_uv = 0.0;
  double phase_rad = 0.0;
  double phase_lag_rad = 0.0;  // added per channel index
};

struct NoiseComponent {
  double std_uv = 0.0;
};

struct PacComponent {
  double carrier_hz = 0.0;
  double modulator_hz = 0.0;
  double depth = 0.0;  // in [0, 1]
  double amplitude_uv = 0.0;
};

using SyntheticComponent =
    std::variant<SinusoidComponent, NoiseComponent, PacComponent>;

struct SyntheticSpec {
  std::uint64_t seed = 0;
  std::size_t channels = 1;
  double duration_s = 1.0;
  double rate_hz = 200.0;
  std::vector<SyntheticComponent> components;

  void validate() const;
};

// DBRN binary (sniffed by magic) or CSV with a leading "t" column.
// Channel names for the binary format live in an optional "<path>.names"
// sidecar, one label per line.
Recording read_recording(const std::string& path);
void write_recording(const Recording& rec, const std::string& path);

Recording read_recording_csv(const std::string& path);
void write_recording_csv(const Recording& rec, const std::string& path);

// Deterministic synthetic EEG. Sinusoids: A*sin(2*pi*f*t + phase + lag*c).
// PAC: A*(1 - depth + depth*(1+cos(2*pi*f_mod*t))/2)*cos(2*pi*f_car*t).
// Noise: i.i.d. Gaussian via Box-Muller over CounterRng(derive(seed, comp_index)),
// channels outer loop, samples inner.
Recording generate_synthetic(const SyntheticSpec& spec);

// Montage file: JSON object mapping label -> [x, y, z] in meters.
Montage read_montage(const std::string& path);
void write_montage(const Montage& montage, const std::string& path);

}  // namespace dbrn
