#include "dbrn/corpus.hpp"

#include <cmath>
#include <numbers>

#include "dbrn/errors.hpp"
#include "dbrn/rng.hpp"

namespace dbrn {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

struct Jitter {
  CounterRng rng;
  explicit Jitter(std::uint64_t seed) : rng(seed) {}
  double amp() { return 0.8 + 0.4 * rng.next_double(); }
  double phase() { return 2.0 * std::numbers::pi * rng.next_double(); }
};

// class component sets; amplitudes in microvolts before the /100 normalization
void add_class_components(SyntheticSpec& spec, std::size_t label, Jitter& jit) {
  switch (label) {
    case 0:  // alpha-dominant, phase-locked across channels
      spec.components.push_back(
          SinusoidComponent{10.0, 30.0 * jit.amp(), jit.phase(), 0.35});
      spec.components.push_back(
          SinusoidComponent{22.0, 4.0 * jit.amp(), jit.phase(), 0.5});
      spec.components.push_back(NoiseComponent{5.0});
      break;
    case 1:  // beta-dominant
      spec.components.push_back(
          SinusoidComponent{22.0, 30.0 * jit.amp(), jit.phase(), 0.35});
      spec.components.push_back(
          SinusoidComponent{10.0, 4.0 * jit.amp(), jit.phase(), 0.5});
      spec.components.push_back(NoiseComponent{5.0});
      break;
    case 2:  // theta carrier with theta->gamma coupling
      spec.components.push_back(
          SinusoidComponent{6.0, 25.0 * jit.amp(), kHalfPi, 0.0});
      spec.components.push_back(PacComponent{40.0, 6.0, 1.0, 18.0 * jit.amp()});
      spec.components.push_back(
          SinusoidComponent{10.0, 5.0 * jit.amp(), jit.phase(), 0.3});
      spec.components.push_back(NoiseComponent{5.0});
      break;
    default:  // broadband mix
      spec.components.push_back(
          SinusoidComponent{10.0, 14.0 * jit.amp(), jit.phase(), 0.3});
      spec.components.push_back(
          SinusoidComponent{22.0, 14.0 * jit.amp(), jit.phase(), 0.4});
      spec.components.push_back(
          SinusoidComponent{2.5, 10.0 * jit.amp(), jit.phase(), 0.2});
      spec.components.push_back(NoiseComponent{8.0});
      break;
  }
}

std::vector<LabeledRecording> build_corpus(const DeskCorpusSpec& spec,
                                           std::size_t num_classes) {
  if (spec.count == 0) throw param_error("corpus: count must be positive");
  const Montage montage = corpus_montage(spec);
  std::vector<std::string> names;
  for (const auto& [label, pos] : montage.entries) names.push_back(label);

  std::vector<LabeledRecording> out;
  out.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    SyntheticSpec gen;
    gen.seed = CounterRng::derive(spec.seed, i);
    gen.channels = spec.channels;
    gen.duration_s = spec.duration_s;
    gen.rate_hz = spec.rate_hz;
    Jitter jit(CounterRng::derive(spec.seed, 0x3A77, i));
    const std::size_t label = i % num_classes;
    add_class_components(gen, label, jit);
    Recording rec = generate_synthetic(gen);
    rec.channel_names = names;  // align with the montage
    out.push_back({std::move(rec), label});
  }
  return out;
}

}  // namespace

Montage desk_montage() {
  Montage m;
  m.entries["Fz"] = {0.0, 0.0771, 0.0556};
  m.entries["Cz"] = {0.0, 0.0, 0.0950};
  m.entries["Pz"] = {0.0, -0.0771, 0.0556};
  m.entries["Oz"] = {0.0, -0.0950, 0.0};
  return m;
}

Montage sphere_montage(std::size_t n) {
  if (n == 0) throw param_error("montage: need at least one electrode");
  Montage m;
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = (n == 1) ? 1.0
                              : 1.0 - 2.0 * (static_cast<double>(i) + 0.5) /
                                          static_cast<double>(n);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double theta = golden * static_cast<double>(i);
    m.entries["ch" + std::to_string(i)] = {0.095 * r * std::cos(theta),
                                           0.095 * r * std::sin(theta),
                                           0.095 * z};
  }
  return m;
}

Montage corpus_montage(const DeskCorpusSpec& spec) {
  return spec.channels == 4 ? desk_montage() : sphere_montage(spec.channels);
}

std::vector<LabeledRecording> build_desk_corpus(const DeskCorpusSpec& spec) {
  return build_corpus(spec, 4);
}

std::vector<LabeledRecording> build_two_class_corpus(const DeskCorpusSpec& spec) {
  return build_corpus(spec, 2);
}

}  // namespace dbrn
