#include "dbrn/signal_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "dbrn/errors.hpp"
#include "dbrn/rng.hpp"

#include <json.hpp>

namespace dbrn {

namespace {

constexpr char kMagic[4] = {'D', 'B', 'R', 'N'};
constexpr std::size_t kHeaderSize = 24;

void put_u32_le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

std::uint32_t get_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f32_le(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32_le(out, bits);
}

float get_f32_le(const unsigned char* p) {
  const std::uint32_t bits = get_u32_le(p);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

std::string names_sidecar_path(const std::string& path) { return path + ".names"; }

}  // namespace

void Recording::validate() const {
  if (data.empty()) throw data_error("recording: no channels");
  if (channel_names.size() != data.size())
    throw data_error("recording: channel_names length " +
                     std::to_string(channel_names.size()) + " != channel count " +
                     std::to_string(data.size()));
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz))
    throw data_error("recording: rate_hz must be positive");
  const std::size_t t = data[0].size();
  if (t == 0) throw data_error("recording: no samples");
  for (std::size_t c = 0; c < data.size(); ++c) {
    if (data[c].size() != t)
      throw data_error("recording: ragged channel " + std::to_string(c));
    for (std::size_t i = 0; i < t; ++i)
      if (!std::isfinite(data[c][i]))
        throw data_error("recording: non-finite value at channel " +
                         std::to_string(c) + " sample " + std::to_string(i));
  }
}

void Montage::validate() const {
  for (const auto& [label, p] : entries) {
    for (double v : p)
      if (!std::isfinite(v))
        throw data_error("montage: non-finite coordinate for '" + label + "'");
  }
  for (auto a = entries.begin(); a != entries.end(); ++a) {
    auto b = a;
    for (++b; b != entries.end(); ++b) {
      if (a->second == b->second)
        throw data_error("montage: '" + a->first + "' and '" + b->first +
                         "' share a position");
    }
  }
}

const std::array<double, 3>& Montage::position(const std::string& label) const {
  auto it = entries.find(label);
  if (it == entries.end())
    throw data_error("montage: missing channel '" + label + "'");
  return it->second;
}

void SyntheticSpec::validate() const {
  if (channels == 0) throw param_error("synthetic: channels must be >= 1");
  if (!(duration_s > 0.0) || !(rate_hz > 0.0))
    throw param_error("synthetic: duration and rate must be positive");
  const double t_real = duration_s * rate_hz;
  const double t_round = std::round(t_real);
  if (t_round < 1.0 || std::abs(t_real - t_round) > 1e-9 * std::max(1.0, t_real))
    throw param_error("synthetic: duration_s * rate_hz must be a positive integer");
  const double nyquist = rate_hz / 2.0;
  for (const auto& comp : components) {
    if (const auto* s = std::get_if<SinusoidComponent>(&comp)) {
      if (!(s->freq_hz < nyquist))
        throw param_error("synthetic: sinusoid frequency " +
                          std::to_string(s->freq_hz) + " Hz violates Nyquist");
    } else if (const auto* p = std::get_if<PacComponent>(&comp)) {
      if (!(p->carrier_hz < nyquist) || !(p->modulator_hz < nyquist))
        throw param_error("synthetic: pac frequencies violate Nyquist");
      if (p->depth < 0.0 || p->depth > 1.0)
        throw param_error("synthetic: pac depth must lie in [0, 1]");
    }
  }
}

Recording generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t t_len =
      static_cast<std::size_t>(std::llround(spec.duration_s * spec.rate_hz));
  Recording rec;
  rec.rate_hz = spec.rate_hz;
  rec.channel_names.resize(spec.channels);
  for (std::size_t c = 0; c < spec.channels; ++c)
    rec.channel_names[c] = "ch" + std::to_string(c);
  rec.data.assign(spec.channels, std::vector<double>(t_len, 0.0));

  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t k = 0; k < spec.components.size(); ++k) {
    const auto& comp = spec.components[k];
    if (const auto* s = std::get_if<SinusoidComponent>(&comp)) {
      for (std::size_t c = 0; c < spec.channels; ++c) {
        const double phase = s->phase_rad + s->phase_lag_rad * static_cast<double>(c);
        for (std::size_t i = 0; i < t_len; ++i) {
          const double t = static_cast<double>(i) / spec.rate_hz;
          rec.data[c][i] += s->amplitude_uv * std::sin(two_pi * s->freq_hz * t + phase);
        }
      }
    } else if (const auto* p = std::get_if<PacComponent>(&comp)) {
      for (std::size_t c = 0; c < spec.channels; ++c) {
        for (std::size_t i = 0; i < t_len; ++i) {
          const double t = static_cast<double>(i) / spec.rate_hz;
          const double env =
              1.0 - p->depth +
              p->depth * (1.0 + std::cos(two_pi * p->modulator_hz * t)) / 2.0;
          rec.data[c][i] += p->amplitude_uv * env * std::cos(two_pi * p->carrier_hz * t);
        }
      }
    } else if (const auto* n = std::get_if<NoiseComponent>(&comp)) {
      CounterRng rng(CounterRng::derive(spec.seed, k));
      for (std::size_t c = 0; c < spec.channels; ++c)
        for (std::size_t i = 0; i < t_len; ++i)
          rec.data[c][i] += n->std_uv * rng.next_gaussian();
    }
  }
  return rec;
}

void write_recording(const Recording& rec, const std::string& path) {
  rec.validate();
  std::string buf;
  buf.reserve(kHeaderSize + rec.channels() * rec.samples() * 4);
  buf.append(kMagic, 4);
  buf.push_back(1);  // version
  buf.append(3, '\0');
  put_u32_le(buf, static_cast<std::uint32_t>(rec.channels()));
  put_u32_le(buf, static_cast<std::uint32_t>(rec.samples()));
  put_f32_le(buf, static_cast<float>(rec.rate_hz));
  buf.append(4, '\0');
  for (const auto& ch : rec.data)
    for (double v : ch) put_f32_le(buf, static_cast<float>(v));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot open '" + path + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw data_error("write failed for '" + path + "'");

  std::ofstream names(names_sidecar_path(path), std::ios::trunc);
  if (!names) throw data_error("cannot open '" + names_sidecar_path(path) + "'");
  for (const auto& n : rec.channel_names) names << n << '\n';
}

namespace {

Recording read_recording_binary(const std::string& path, const std::string& bytes) {
  if (bytes.size() < kHeaderSize) throw format_error("header truncated");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (std::memcmp(p, kMagic, 4) != 0) throw format_error("bad magic");
  if (p[4] != 1) throw format_error("unsupported version " + std::to_string(p[4]));
  const std::uint32_t c = get_u32_le(p + 8);
  const std::uint32_t t = get_u32_le(p + 12);
  const float rate = get_f32_le(p + 16);
  if (c == 0) throw format_error("channel count is zero");
  if (t == 0) throw format_error("sample count is zero");
  if (!(rate > 0.0f) || !std::isfinite(rate)) throw format_error("bad rate_hz");
  const std::size_t need =
      kHeaderSize + static_cast<std::size_t>(c) * static_cast<std::size_t>(t) * 4;
  if (bytes.size() < need) throw format_error("payload short");

  Recording rec;
  rec.rate_hz = static_cast<double>(rate);
  rec.data.assign(c, std::vector<double>(t));
  const unsigned char* q = p + kHeaderSize;
  for (std::uint32_t ci = 0; ci < c; ++ci)
    for (std::uint32_t ti = 0; ti < t; ++ti, q += 4) {
      const float v = get_f32_le(q);
      if (!std::isfinite(v))
        throw data_error("non-finite value at channel " + std::to_string(ci) +
                         " sample " + std::to_string(ti));
      rec.data[ci][ti] = static_cast<double>(v);
    }

  rec.channel_names.resize(c);
  std::ifstream names(names_sidecar_path(path));
  if (names) {
    std::string line;
    std::vector<std::string> got;
    while (std::getline(names, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      got.push_back(line);
    }
    if (got.size() != c)
      throw format_error("sidecar lists " + std::to_string(got.size()) +
                         " names for " + std::to_string(c) + " channels");
    rec.channel_names = std::move(got);
  } else {
    for (std::uint32_t ci = 0; ci < c; ++ci)
      rec.channel_names[ci] = "ch" + std::to_string(ci);
  }
  return rec;
}

}  // namespace

Recording read_recording(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0)
    return read_recording_binary(path, bytes);
  // fall through to CSV
  return read_recording_csv(path);
}

Recording read_recording_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw format_error("empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  if (header.empty() || header[0] != "t")
    throw format_error("CSV header must start with column 't'");
  if (header.size() < 2) throw format_error("CSV has no channel columns");

  const std::size_t c = header.size() - 1;
  std::vector<double> times;
  std::vector<std::vector<double>> cols(c);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ls, cell, ',')) {
      double v;
      try {
        v = std::stod(cell);
      } catch (const std::exception&) {
        throw format_error("CSV row " + std::to_string(row + 1) +
                           ": cannot parse '" + cell + "'");
      }
      if (col == 0)
        times.push_back(v);
      else if (col <= c)
        cols[col - 1].push_back(v);
      ++col;
    }
    if (col != c + 1)
      throw format_error("CSV row " + std::to_string(row + 1) + " has " +
                         std::to_string(col) + " cells, expected " +
                         std::to_string(c + 1));
    ++row;
  }
  if (times.size() < 2)
    throw format_error("CSV needs at least 2 rows to infer the sampling rate");
  const double dt = times[1] - times[0];
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw format_error("CSV time column is not increasing");

  Recording rec;
  rec.rate_hz = 1.0 / dt;
  rec.channel_names.assign(header.begin() + 1, header.end());
  rec.data = std::move(cols);
  for (std::size_t ci = 0; ci < rec.data.size(); ++ci)
    for (std::size_t ti = 0; ti < rec.data[ci].size(); ++ti)
      if (!std::isfinite(rec.data[ci][ti]))
        throw data_error("non-finite value at channel " + std::to_string(ci) +
                         " sample " + std::to_string(ti));
  return rec;
}

void write_recording_csv(const Recording& rec, const std::string& path) {
  rec.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("cannot open '" + path + "' for writing");
  out << "t";
  for (const auto& n : rec.channel_names) out << ',' << n;
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < rec.samples(); ++i) {
    out << (static_cast<double>(i) / rec.rate_hz);
    for (std::size_t ci = 0; ci < rec.channels(); ++ci) out << ',' << rec.data[ci][i];
    out << '\n';
  }
  if (!out) throw data_error("write failed for '" + path + "'");
}

Montage read_montage(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw format_error("montage '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw format_error("montage must be a JSON object");
  Montage m;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_array() || it.value().size() != 3)
      throw format_error("montage entry '" + it.key() + "' must be [x, y, z]");
    std::array<double, 3> p;
    for (int i = 0; i < 3; ++i) p[i] = it.value()[i].get<double>();
    m.entries[it.key()] = p;
  }
  m.validate();
  return m;
}

void write_montage(const Montage& montage, const std::string& path) {
  montage.validate();
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [label, p] : montage.entries) j[label] = {p[0], p[1], p[2]};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
}

}  // namespace dbrn
