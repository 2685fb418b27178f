#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dbrn/autodiff.hpp"
#include "dbrn/encoding.hpp"
#include "dbrn/patching.hpp"
#include "dbrn/signal_io.hpp"

namespace dbrn {

struct ConvSpec {
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t pad = 0;
  bool operator==(const ConvSpec&) const = default;
};

// Desk defaults: 2 encoder layers at D = 200. The full-scale stack is the
// same config with layers = 12.
struct ModelConfig {
  std::size_t patch_samples = 200;  // P
  std::size_t conv_channels = 25;   // F
  std::array<ConvSpec, 3> conv{{{49, 25, 12}, {3, 1, 1}, {3, 1, 1}}};
  std::size_t gn_groups = 5;
  std::size_t layers = 2;
  std::size_t heads = 8;
  std::size_t d_ff = 800;
  double mask_ratio = 0.5;
  std::size_t osc_count = 8;    // K oscillatory frequencies
  std::size_t decay_count = 8;  // M decay rates
  std::size_t nsp_dim = 19;
  std::string channel_pe_mode = "conduction";  // conduction | linear
  std::string temporal_pe_mode = "grounded";   // grounded | sinusoidal
  std::uint64_t seed = 0;

  std::size_t conv_out_len() const;                 // L
  std::size_t embed_dim() const;                    // D = F * L
  void validate() const;
  std::string to_json() const;                      // canonical (sorted keys)
  static ModelConfig from_json(const std::string& text);
  bool operator==(const ModelConfig&) const = default;
};

struct ParamEntry {
  std::string name;
  ag::Shape shape;
  std::vector<double> values;
  bool operator==(const ParamEntry&) const = default;
};

struct Checkpoint {
  std::uint32_t version = 1;
  ModelConfig config;
  std::vector<ParamEntry> params;  // sorted by name
  bool has_moments = false;
  std::vector<std::vector<double>> moment1, moment2;  // aligned with params
  std::uint64_t step = 0;
};

void write_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);

// FNV-1a over names, shapes and raw value bytes; the frozen-probe tests use it
// to prove the backbone untouched.
std::uint64_t param_table_hash(const std::vector<ParamEntry>& params);

class Model {
 public:
  explicit Model(const ModelConfig& cfg);
  explicit Model(const Checkpoint& ckpt);

  const ModelConfig& config() const { return cfg_; }
  std::map<std::string, ag::Tensor>& params() { return params_; }
  const std::map<std::string, ag::Tensor>& params() const { return params_; }

  Checkpoint to_checkpoint() const;  // parameters only; trainer attaches moments

  // Three conv blocks per patch, flattened to D: returns [C*S, D].
  ag::Tensor conv_embed(const PatchGrid& grid) const;

  // conv_embed + positional encodings + pre-norm transformer: [N, D], N = C*S.
  ag::Tensor encode(const PatchGrid& grid, const Montage& montage,
                    const std::vector<std::string>& order) const;

  ag::Tensor mer_head(const ag::Tensor& h, std::size_t channels,
                      std::size_t seconds) const;  // [C, S, P]
  ag::Tensor nsp_head(const ag::Tensor& h, std::size_t channels,
                      std::size_t seconds) const;  // [C, S, 19]

 private:
  ag::Tensor p(const std::string& name) const;
  ag::Tensor positional_sum(const ag::Tensor& embed, const PatchGrid& grid,
                            const Montage& montage,
                            const std::vector<std::string>& order) const;

  ModelConfig cfg_;
  std::map<std::string, ag::Tensor> params_;
};

}  // namespace dbrn
