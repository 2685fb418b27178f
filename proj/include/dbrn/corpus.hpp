#pragma once

#include <cstdint>
#include <vector>

#include "dbrn/signal_io.hpp"

namespace dbrn {

// Synthetic stand-in for a pretraining corpus: mixed band-power classes with
// phase-locked and phase-amplitude-coupled components over a small montage.
struct DeskCorpusSpec {
  std::uint64_t seed = 1;
  std::size_t count = 256;
  std::size_t channels = 4;
  double duration_s = 4.0;
  double rate_hz = 200.0;
};

struct LabeledRecording {
  Recording rec;
  std::size_t label = 0;
};

// Fz / Cz / Pz / Oz on a 9.5 cm head sphere.
Montage desk_montage();

// ch0..chN-1 spread over the sphere (Fibonacci lattice), for arbitrary C.
Montage sphere_montage(std::size_t n);

// montage sized to the requested channel count
Montage corpus_montage(const DeskCorpusSpec& spec);

// Four classes, cycled by index: alpha-dominant, beta-dominant, theta+PAC,
// broadband mixed. Amplitudes and phases jitter per recording; everything is
// deterministic in spec.seed.
std::vector<LabeledRecording> build_desk_corpus(const DeskCorpusSpec& spec);

// Two linearly separable classes (alpha- vs beta-dominant) for probing tasks.
std::vector<LabeledRecording> build_two_class_corpus(const DeskCorpusSpec& spec);

}  // namespace dbrn
