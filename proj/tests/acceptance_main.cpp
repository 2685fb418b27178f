// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. A5 produces the checkpoint consumed by A6 and A7, so criteria run
// in order.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "dbrn/corpus.hpp"
#include "dbrn/errors.hpp"
#include "dbrn/model.hpp"
#include "dbrn/neurodyn.hpp"
#include "dbrn/rng.hpp"
#include "dbrn/signal_io.hpp"
#include "dbrn/spectral.hpp"
#include "dbrn/trainer.hpp"
#include "fd_check.hpp"

using namespace dbrn;
namespace ag = dbrn::ag;
using cd = std::complex<double>;

namespace {

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

// results shared across criteria
struct Shared {
  Checkpoint desk_checkpoint;
  bool have_checkpoint = false;
} shared;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// ---------------------------------------------------------------- A1
std::vector<cd> direct_dft(const std::vector<cd>& x) {
  const std::size_t n = x.size();
  std::vector<cd> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cd acc(0.0, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = -kTwoPi * double(k) * double(t) / double(n);
      acc += x[t] * cd(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

void a1_spectral(Check& c) {
  CounterRng rng(0xA1);
  for (int iter = 0; iter < 100; ++iter) {
    const std::size_t n = 2 + rng.next_below(63);  // lengths 2..64
    std::vector<cd> x(n);
    for (auto& v : x) v = cd(rng.next_gaussian(), rng.next_gaussian());
    const auto fast = fft(x, false);
    const auto slow = direct_dft(x);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      num += std::norm(fast[k] - slow[k]);
      den += std::norm(slow[k]);
    }
    c.require(std::sqrt(num / std::max(den, 1e-300)) < 1e-9,
              "fft deviates from the direct DFT at n=" + std::to_string(n));
  }
  // Parseval on even lengths
  for (std::size_t n : {16, 100, 200}) {
    std::vector<double> x(n);
    for (auto& v : x) v = rng.next_gaussian();
    const Spectrum s = psd(x, double(n));
    double te = 0.0;
    for (double v : x) te += v * v;
    double se = s.psd[0] + s.psd[n / 2];
    for (std::size_t k = 1; k < n / 2; ++k) se += 2.0 * s.psd[k];
    se /= double(n);
    c.require(std::abs(se - te) <= 1e-6 * std::max(1.0, std::abs(te)),
              "Parseval identity fails at n=" + std::to_string(n));
  }
}

// ---------------------------------------------------------------- A2
double sampen_oracle(const std::vector<double>& x, std::size_t m, double rf) {
  const std::size_t n = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= double(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / double(n));
  if (sd == 0.0) return 0.0;
  const double r = rf * sd;
  auto count = [&](std::size_t len) {
    std::size_t cnt = 0;
    const std::size_t nt = n - m;
    for (std::size_t i = 0; i < nt; ++i)
      for (std::size_t j = 0; j < nt; ++j) {
        if (i == j) continue;
        bool match = true;
        for (std::size_t k = 0; k < len; ++k)
          if (std::abs(x[i + k] - x[j + k]) > r) {
            match = false;
            break;
          }
        if (match) ++cnt;
      }
    return cnt;
  };
  const std::size_t a = count(m), b = count(m + 1);
  if (a == 0 || b == 0) return std::log(double((n - m - 1) * (n - m)));
  return -std::log(double(b) / double(a));
}

void a2_nsp_oracles(Check& c) {
  const BandTable bands = BandTable::canonical(200.0);
  CounterRng rng(0xA2);

  // (a) simplex on random patches; alpha concentration for 10 Hz tones
  for (int iter = 0; iter < 1000; ++iter) {
    std::vector<double> x(200);
    for (auto& v : x) v = rng.next_gaussian();
    const auto p = rel_band_power(x, 200.0, bands);
    double sum = 0.0;
    for (double v : p) sum += v;
    c.require(std::abs(sum - 1.0) <= 1e-6, "band-power simplex broken");
  }
  for (int iter = 0; iter < 20; ++iter) {
    const double phase = kTwoPi * rng.next_double();
    std::vector<double> x(200);
    for (std::size_t i = 0; i < 200; ++i)
      x[i] = std::sin(kTwoPi * 10.0 * double(i) / 200.0 + phase);
    c.require(rel_band_power(x, 200.0, bands)[BandTable::kAlpha] >= 0.99,
              "alpha tone not concentrated in the alpha band");
  }

  // (b) PLV: constant-lag pairs lock at 1; bounded and symmetric in general
  for (int iter = 0; iter < 20; ++iter) {
    const double lag = kTwoPi * rng.next_double();
    std::vector<double> a(200), b(200);
    for (std::size_t i = 0; i < 200; ++i) {
      const double t = double(i) / 200.0;
      a[i] = std::sin(kTwoPi * 10.0 * t);
      b[i] = std::sin(kTwoPi * 10.0 * t + lag);
    }
    const std::vector<std::span<const double>> chans = {a, b};
    const auto [mean, sd] = plv_summary(chans, bands[BandTable::kAlpha], 200.0);
    c.require(std::abs(mean - 1.0) <= 0.02, "constant-lag PLV misses 1");
  }
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<double> a(200), b(200);
    for (std::size_t i = 0; i < 200; ++i) {
      a[i] = rng.next_gaussian();
      b[i] = rng.next_gaussian();
    }
    const std::vector<std::span<const double>> ab = {a, b};
    const std::vector<std::span<const double>> ba = {b, a};
    const auto [mab, sab] = plv_summary(ab, bands[BandTable::kAlpha], 200.0);
    const auto [mba, sba] = plv_summary(ba, bands[BandTable::kAlpha], 200.0);
    c.require(mab >= 0.0 && mab <= 1.0 && sab >= 0.0 && sab <= 0.5,
              "PLV summary out of bounds");
    c.require(std::abs(mab - mba) <= 1e-12, "PLV not symmetric");
  }

  // (c) sample entropy equals the brute-force counter
  for (int iter = 0; iter < 50; ++iter) {
    const std::size_t n = 30 + rng.next_below(171);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.next_gaussian();
    c.require(sample_entropy(x) == sampen_oracle(x, 2, 0.2),
              "sample entropy deviates from the brute-force oracle");
  }

  // (d) CFC for the constructed PAC oracle and unmodulated carriers
  for (int iter = 0; iter < 10; ++iter) {
    SyntheticSpec spec;
    spec.channels = 1;
    spec.duration_s = 1.0;
    spec.rate_hz = 200.0;
    spec.components.push_back(
        SinusoidComponent{6.0, 1.0, std::numbers::pi / 2.0, 0.0});
    spec.components.push_back(PacComponent{40.0, 6.0, 1.0, 2.0});
    const Recording rec = generate_synthetic(spec);
    const double v = cfc(rec.data[0], bands[BandTable::kTheta],
                         bands[BandTable::kGamma], 200.0);
    c.require(std::abs(v - 0.5) <= 0.1, "PAC oracle CFC misses 0.5");
  }
  for (double amp : {0.5, 1.0, 3.0}) {
    std::vector<double> x(200);
    for (std::size_t i = 0; i < 200; ++i) {
      const double t = double(i) / 200.0;
      x[i] = std::sin(kTwoPi * 6.0 * t) + amp * std::cos(kTwoPi * 40.0 * t);
    }
    const double v =
        cfc(x, bands[BandTable::kTheta], bands[BandTable::kGamma], 200.0);
    c.require(std::abs(v) <= 0.05 * amp, "unmodulated carrier CFC too large");
  }
}

// ---------------------------------------------------------------- A3
void a3_conduction_kernel(Check& c) {
  CounterRng rng(0xA3);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 3 + rng.next_below(6);
    Montage m;
    for (std::size_t i = 0; i < n; ++i)
      m.entries["e" + std::to_string(i)] = {0.1 * rng.next_gaussian(),
                                            0.1 * rng.next_gaussian(),
                                            0.1 * rng.next_gaussian()};
    std::vector<std::string> order;
    for (const auto& [label, pos] : m.entries) order.push_back(label);
    const auto dist = pairwise_distances(m, order);
    for (double tau : {1e-9, 1e-4, 0.08, 3.0, 1e6}) {
      ChannelPeParams pe;
      pe.eps = std::min(1e-6, tau * 1e-3);
      pe.alpha = ag::param({1}, {ChannelPeParams::alpha_for_scale(tau, pe.eps)});
      const ag::Tensor k = conduction_kernel(dist, n, pe);
      for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) sum += k->value[i * n + j];
        c.require(sum >= 1.0 - 1e-6 && sum <= 1.0 + 1e-12,
                  "kernel row sum outside [1-1e-6, 1]");
      }
      if (tau == 1e6)
        for (double v : k->value)
          c.require(std::abs(v - 1.0 / double(n)) <= 1e-6,
                    "wide-kernel limit not uniform");
      if (tau == 1e-9)
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j)
            c.require(std::abs(k->value[i * n + j] - (i == j ? 1.0 : 0.0)) <= 1e-6,
                      "narrow-kernel limit not identity");
    }
  }
  // two-electrode hand value at tau = distance
  Montage m;
  m.entries["A"] = {0.0, 0.0, 0.0};
  m.entries["B"] = {0.08, 0.0, 0.0};
  ChannelPeParams pe;
  pe.alpha = ag::param({1}, {ChannelPeParams::alpha_for_scale(0.08)});
  const ag::Tensor k =
      conduction_kernel(pairwise_distances(m, {"A", "B"}), 2, pe);
  c.require(std::abs(k->value[0] - 0.7311) <= 1e-4,
            "two-electrode hand value misses 0.7311");
}

// ---------------------------------------------------------------- A4
void a4_gradients(Check& c) {
  dbrn_test::FdFailure failure;
  for (const auto& cs : dbrn_test::autodiff_fd_cases())
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
      if (!dbrn_test::fd_check_case(cs, seed, 1e-5, 1e-4, 1e-6, failure)) {
        c.require(false, "op gradient check failed: " + failure.where);
        return;
      }

  // end-to-end combined loss, including the conduction scale alpha
  ModelConfig cfg;
  cfg.patch_samples = 64;
  cfg.layers = 1;
  cfg.heads = 5;
  cfg.d_ff = 32;
  cfg.osc_count = 4;
  cfg.decay_count = 4;
  cfg.seed = 0xA4;
  Model model(cfg);
  SyntheticSpec gen;
  gen.seed = 2;
  gen.channels = 2;
  gen.duration_s = 2.0;
  gen.rate_hz = 64.0;
  gen.components.push_back(SinusoidComponent{10.0, 30.0, 0.1, 0.4});
  gen.components.push_back(NoiseComponent{5.0});
  Recording rec = generate_synthetic(gen);
  const Montage montage = sphere_montage(2);
  rec.channel_names.clear();
  for (const auto& [label, pos] : montage.entries)
    rec.channel_names.push_back(label);
  const PatchGrid clean = patchify(normalize(rec));
  const NspTargets targets = assemble_targets(
      clean, BandTable::canonical(rec.rate_hz), canonical_cfc_pairs());
  const PatchGrid masked = apply_mask(clean, 0.5, 3);

  auto loss_value = [&]() {
    const ag::Tensor h = model.encode(masked, montage, rec.channel_names);
    return ag::add(
        mer_loss(model.mer_head(h, 2, 2), clean, masked.mask),
        nsp_loss(model.nsp_head(h, 2, 2), targets));
  };
  const ag::Tensor loss = loss_value();
  ag::backward(loss);

  CounterRng pick(0xA4F);
  std::vector<std::pair<std::string, std::size_t>> probes = {{"chpe.alpha", 0}};
  std::vector<std::string> names;
  for (const auto& [name, t] : model.params()) names.push_back(name);
  while (probes.size() < 6) {
    const std::string& name = names[pick.next_below(names.size())];
    const auto& t = model.params().at(name);
    probes.emplace_back(name, pick.next_below(t->size()));
  }
  // step ladder: masked-zero patches put group norm at a high-curvature point,
  // so stiff directions need a smaller h before truncation error drops away
  for (const auto& [name, idx] : probes) {
    const ag::Tensor p = model.params().at(name);
    p->ensure_grad();
    const double analytic = p->grad[idx];
    const double saved = p->value[idx];
    bool matched = false;
    for (double h : {1e-5, 1e-6, 1e-7, 1e-8}) {
      p->value[idx] = saved + h;
      const double up = loss_value()->value[0];
      p->value[idx] = saved - h;
      const double down = loss_value()->value[0];
      p->value[idx] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double tol =
          std::max(1e-6, 1e-4 * std::max(std::abs(analytic), std::abs(numeric)));
      if (std::abs(analytic - numeric) <= tol) {
        matched = true;
        break;
      }
    }
    c.require(matched, "end-to-end gradient mismatch at " + name);
  }
}

// ---------------------------------------------------------------- A5
void a5_desk_pretraining(Check& c) {
  DeskCorpusSpec corpus_spec;
  corpus_spec.seed = 1;
  corpus_spec.count = 256;
  corpus_spec.channels = 4;
  corpus_spec.duration_s = 4.0;
  corpus_spec.rate_hz = 200.0;
  const auto labeled = build_desk_corpus(corpus_spec);
  std::vector<Recording> corpus;
  corpus.reserve(labeled.size());
  for (const auto& lr : labeled) corpus.push_back(lr.rec);
  const Montage montage = corpus_montage(corpus_spec);

  ModelConfig model_cfg;  // desk defaults: 2 layers, D = 200, mu = 0.5
  model_cfg.seed = 7;
  TrainConfig train_cfg;  // lr 5e-4, wd 5e-2, clip 1.0, lambdas 1.0
  train_cfg.steps = 200;
  train_cfg.batch_size = 16;
  train_cfg.seed = 7;

  const PretrainResult run1 = pretrain(corpus, montage, model_cfg, train_cfg);
  c.require(run1.trace.size() == 200, "trace incomplete");
  const double first = run1.trace.front().total;
  const double last = run1.trace.back().total;
  c.require(last <= 0.7 * first,
            "loss decreased only to " + std::to_string(last / first) +
                " of its step-1 value");

  const PretrainResult run2 = pretrain(corpus, montage, model_cfg, train_cfg);
  for (std::size_t i = 0; i < run1.trace.size(); ++i) {
    c.require(run1.trace[i].mer == run2.trace[i].mer &&
                  run1.trace[i].nsp == run2.trace[i].nsp &&
                  run1.trace[i].total == run2.trace[i].total,
              "same-seed traces diverge at step " + std::to_string(i + 1));
  }
  c.require(param_table_hash(run1.checkpoint.params) ==
                param_table_hash(run2.checkpoint.params),
            "same-seed checkpoints differ");

  shared.desk_checkpoint = run1.checkpoint;
  shared.have_checkpoint = true;
}

// ---------------------------------------------------------------- A6
void a6_zero_shot_nsp(Check& c) {
  if (!shared.have_checkpoint) {
    c.require(false, "A5 checkpoint unavailable");
    return;
  }
  Model model(shared.desk_checkpoint);
  DeskCorpusSpec held;
  held.seed = 777;
  held.count = 64;
  held.channels = 4;
  held.duration_s = 4.0;
  held.rate_hz = 200.0;
  const auto corpus = build_desk_corpus(held);
  const Montage montage = corpus_montage(held);
  const BandTable bands = BandTable::canonical(held.rate_hz);

  std::vector<double> predicted, truth;
  std::size_t index = 0;
  for (const auto& lr : corpus) {
    const Recording scaled = normalize(lr.rec);
    const PatchGrid clean = patchify(scaled);
    const NspTargets targets =
        assemble_targets(clean, bands, canonical_cfc_pairs());
    const PatchGrid masked =
        apply_mask(clean, model.config().mask_ratio,
                   CounterRng::derive(held.seed, 0xFEED, index++));
    const ag::Tensor h = model.encode(masked, montage, scaled.channel_names);
    const ag::Tensor y = model.nsp_head(h, clean.channels, clean.seconds);
    for (std::size_t ch = 0; ch < clean.channels; ++ch)
      for (std::size_t s = 0; s < clean.seconds; ++s) {
        predicted.push_back(
            y->value[(ch * clean.seconds + s) * NspTargets::kDim + 2]);
        truth.push_back(targets.at(ch, s, 2));
      }
  }
  const double r = pearson_correlation(predicted, truth);
  c.detail = "r = " + std::to_string(r);
  c.require(r >= 0.5, "alpha-power consistency r = " + std::to_string(r) +
                          " below 0.5");
}

// ---------------------------------------------------------------- A7
void a7_frozen_probe(Check& c) {
  if (!shared.have_checkpoint) {
    c.require(false, "A5 checkpoint unavailable");
    return;
  }
  DeskCorpusSpec task;
  task.seed = 888;
  task.count = 192;
  task.channels = 4;
  task.duration_s = 4.0;
  task.rate_hz = 200.0;
  const auto labeled = build_two_class_corpus(task);
  TaskDataset ds;
  ds.montage = corpus_montage(task);
  ds.num_classes = 2;
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    TaskSample s{labeled[i].rec, double(labeled[i].label)};
    if (i < 128)
      ds.train.push_back(std::move(s));
    else
      ds.eval.push_back(std::move(s));
  }

  TrainConfig cfg;
  cfg.mode = TrainConfig::Mode::kFrozenProbe;
  cfg.schedule = TrainConfig::Schedule::kCosine;
  cfg.steps = 200;
  cfg.batch_size = 32;
  cfg.lr = 3e-4;
  cfg.seed = 11;
  const AdaptResult res = adapt(shared.desk_checkpoint, ds, HeadMode::kPool, cfg);
  c.require(res.backbone_hash_before == res.backbone_hash_after,
            "frozen probing modified the backbone");
  const double acc = res.metrics.at("balanced_accuracy");
  c.detail = "balanced accuracy = " + std::to_string(acc);
  c.require(acc >= 0.90, "balanced accuracy " + std::to_string(acc) +
                             " below 0.90");
}

// ---------------------------------------------------------------- A8
void a8_masking_contract(Check& c) {
  CounterRng rng(0xA8);
  for (int iter = 0; iter < 10000; ++iter) {
    const std::size_t channels = 1 + rng.next_below(6);
    const std::size_t seconds = 1 + rng.next_below(6);
    const double mu = rng.next_double();
    const std::size_t p = 4;
    PatchGrid grid;
    grid.channels = channels;
    grid.seconds = seconds;
    grid.patch_len = p;
    grid.rate_hz = double(p);
    grid.data.resize(channels * seconds * p);
    grid.mask.assign(channels * seconds, 0);
    for (auto& v : grid.data) v = rng.next_gaussian();

    const PatchGrid masked = apply_mask(grid, mu, rng.next_u64());
    const std::size_t expect =
        std::size_t(std::floor(mu * double(channels * seconds)));
    if (masked.masked_count() != expect) {
      c.require(false, "masked count != floor(mu*C*S)");
      return;
    }
    for (std::size_t cell = 0; cell < channels * seconds; ++cell) {
      if (masked.mask[cell]) continue;
      for (std::size_t i = 0; i < p; ++i)
        if (masked.data[cell * p + i] != grid.data[cell * p + i]) {
          c.require(false, "unmasked patch modified");
          return;
        }
    }
  }
}

// ---------------------------------------------------------------- A9
void a9_round_trips(Check& c) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "dbrn_acceptance";
  fs::create_directories(dir);
  CounterRng rng(0xA9);

  for (int iter = 0; iter < 50; ++iter) {
    Recording rec;
    rec.rate_hz = double(1 + rng.next_below(500));
    const std::size_t channels = 1 + rng.next_below(8);
    const std::size_t samples = 1 + rng.next_below(400);
    for (std::size_t i = 0; i < channels; ++i)
      rec.channel_names.push_back("ch" + std::to_string(i));
    rec.data.assign(channels, std::vector<double>(samples));
    for (auto& ch : rec.data)
      for (auto& v : ch)
        v = double(float(100.0 * rng.next_gaussian()));  // f32-representable
    const std::string path = (dir / "rt.dbrn").string();
    write_recording(rec, path);
    if (!(read_recording(path) == rec)) {
      c.require(false, "DBRN round-trip mismatch at iteration " +
                           std::to_string(iter));
      return;
    }
  }

  for (int iter = 0; iter < 50; ++iter) {
    ModelConfig cfg;
    cfg.patch_samples = 50 + 25 * rng.next_below(3);  // 50 / 75 / 100
    cfg.layers = 1;
    const std::size_t d = cfg.embed_dim();
    cfg.heads = (d % 8 == 0) ? 8 : 5;
    cfg.d_ff = 16;
    cfg.osc_count = 2;
    cfg.decay_count = 2;
    cfg.seed = rng.next_u64();
    Model model(cfg);
    Checkpoint ckpt = model.to_checkpoint();
    ckpt.step = rng.next_u64();
    if (iter % 2 == 0) {
      ckpt.has_moments = true;
      for (const auto& p : ckpt.params) {
        std::vector<double> m1(p.values.size()), m2(p.values.size());
        for (auto& v : m1) v = rng.next_gaussian();
        for (auto& v : m2) v = std::abs(rng.next_gaussian());
        ckpt.moment1.push_back(std::move(m1));
        ckpt.moment2.push_back(std::move(m2));
      }
    }
    const std::string path = (dir / "rt.dbck").string();
    write_checkpoint(ckpt, path);
    const Checkpoint back = read_checkpoint(path);
    const bool same = back.config == ckpt.config && back.step == ckpt.step &&
                      back.has_moments == ckpt.has_moments &&
                      back.params == ckpt.params &&
                      back.moment1 == ckpt.moment1 &&
                      back.moment2 == ckpt.moment2;
    if (!same) {
      c.require(false, "DBCK round-trip mismatch at iteration " +
                           std::to_string(iter));
      return;
    }
  }
}

struct Criterion {
  const char* name;
  const char* description;
  std::function<void(Check&)> run;
  double budget_s;  // 0 = no stated budget
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"A1", "spectral oracle (fft vs direct DFT, Parseval)", a1_spectral, 5.0},
      {"A2", "NSP statistic oracles (band power, PLV, SampEn, CFC)",
       a2_nsp_oracles, 60.0},
      {"A3", "conduction kernel limits and hand value", a3_conduction_kernel, 0.0},
      {"A4", "gradient suite (per-op and end-to-end finite differences)",
       a4_gradients, 120.0},
      {"A5", "desk pretraining: >=30% loss decrease, deterministic trace",
       a5_desk_pretraining, 600.0},
      {"A6", "zero-shot alpha-power consistency on held-out recordings",
       a6_zero_shot_nsp, 0.0},
      {"A7", "frozen-probing protocol and two-class separability",
       a7_frozen_probe, 0.0},
      {"A8", "masking contract over 10^4 random draws", a8_masking_contract, 10.0},
      {"A9", "DBRN/DBCK format round-trips", a9_round_trips, 0.0},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    try {
      criterion.run(check);
    } catch (const std::exception& e) {
      check.ok = false;
      check.detail = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    if (criterion.budget_s > 0.0 && elapsed > criterion.budget_s) {
      check.ok = false;
      check.detail = "runtime " + std::to_string(elapsed) + "s exceeds budget";
    }
    std::ostringstream line;
    line << (check.ok ? "[PASS] " : "[FAIL] ") << criterion.name << " "
         << criterion.description << " (" << std::fixed << elapsed << "s)";
    if (!check.detail.empty()) line << " -- " << check.detail;
    std::printf("%s\n", line.str().c_str());
    std::fflush(stdout);
    if (!check.ok) ++failures;
  }
  if (failures) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}
