#include "dbrn/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dbrn/errors.hpp"
#include "dbrn/rng.hpp"

#include <json.hpp>

namespace dbrn {

std::size_t ModelConfig::conv_out_len() const {
  std::size_t len = patch_samples;
  for (const auto& c : conv) {
    if (c.stride == 0 || len + 2 * c.pad < c.kernel)
      throw param_error("model config: conv table incompatible with P=" +
                        std::to_string(patch_samples));
    len = (len + 2 * c.pad - c.kernel) / c.stride + 1;
  }
  return len;
}

std::size_t ModelConfig::embed_dim() const { return conv_channels * conv_out_len(); }

void ModelConfig::validate() const {
  const std::size_t l = conv_out_len();
  if (l < 1) throw param_error("model config: conv output length < 1");
  const std::size_t d = embed_dim();
  if (heads == 0 || d % heads != 0)
    throw param_error("model config: heads " + std::to_string(heads) +
                      " do not divide D=" + std::to_string(d));
  if (gn_groups == 0 || conv_channels % gn_groups != 0)
    throw param_error("model config: gn_groups do not divide conv channels");
  if (layers == 0) throw param_error("model config: need at least one layer");
  if (!(mask_ratio >= 0.0 && mask_ratio <= 1.0))
    throw param_error("model config: mask_ratio outside [0, 1]");
  if (channel_pe_mode != "conduction" && channel_pe_mode != "linear")
    throw param_error("model config: unknown channel_pe_mode '" + channel_pe_mode +
                      "'");
  if (temporal_pe_mode != "grounded" && temporal_pe_mode != "sinusoidal")
    throw param_error("model config: unknown temporal_pe_mode '" +
                      temporal_pe_mode + "'");
  if (temporal_pe_mode == "grounded" && osc_count + decay_count == 0)
    throw param_error("model config: empty temporal basis");
  if (nsp_dim == 0) throw param_error("model config: nsp_dim must be positive");
}

std::string ModelConfig::to_json() const {
  nlohmann::json j;
  j["patch_samples"] = patch_samples;
  j["conv_channels"] = conv_channels;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& c : conv) table.push_back({c.kernel, c.stride, c.pad});
  j["conv"] = table;
  j["gn_groups"] = gn_groups;
  j["layers"] = layers;
  j["heads"] = heads;
  j["d_ff"] = d_ff;
  j["mask_ratio"] = mask_ratio;
  j["osc_count"] = osc_count;
  j["decay_count"] = decay_count;
  j["nsp_dim"] = nsp_dim;
  j["channel_pe_mode"] = channel_pe_mode;
  j["temporal_pe_mode"] = temporal_pe_mode;
  j["seed"] = seed;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw format_error(std::string("model config: ") + e.what());
  }
  ModelConfig cfg;
  auto get = [&](const char* key, auto& out) {
    if (j.contains(key)) out = j.at(key).get<std::decay_t<decltype(out)>>();
  };
  get("patch_samples", cfg.patch_samples);
  get("conv_channels", cfg.conv_channels);
  if (j.contains("conv")) {
    const auto& table = j.at("conv");
    if (!table.is_array() || table.size() != 3)
      throw format_error("model config: conv must list three [kernel,stride,pad]");
    for (std::size_t i = 0; i < 3; ++i) {
      cfg.conv[i].kernel = table[i].at(0).get<std::size_t>();
      cfg.conv[i].stride = table[i].at(1).get<std::size_t>();
      cfg.conv[i].pad = table[i].at(2).get<std::size_t>();
    }
  }
  get("gn_groups", cfg.gn_groups);
  get("layers", cfg.layers);
  get("heads", cfg.heads);
  get("d_ff", cfg.d_ff);
  get("mask_ratio", cfg.mask_ratio);
  get("osc_count", cfg.osc_count);
  get("decay_count", cfg.decay_count);
  get("nsp_dim", cfg.nsp_dim);
  get("channel_pe_mode", cfg.channel_pe_mode);
  get("temporal_pe_mode", cfg.temporal_pe_mode);
  get("seed", cfg.seed);
  cfg.validate();
  return cfg;
}

namespace {

constexpr char kCkptMagic[4] = {'D', 'B', 'C', 'K'};

std::vector<double> uniform_init(CounterRng& rng, std::size_t n, std::size_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(n);
  for (auto& x : v) x = bound * (2.0 * rng.next_double() - 1.0);
  return v;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

struct ByteReader {
  const unsigned char* p;
  std::size_t left;
  void need(std::size_t n) const {
    if (left < n) throw format_error("checkpoint: payload short");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    p += 4;
    left -= 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    p += 8;
    left -= 8;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n;
    left -= n;
    return s;
  }
};

}  // namespace

void write_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string buf;
  buf.append(kCkptMagic, 4);
  buf.push_back(static_cast<char>(ckpt.version));
  buf.append(3, '\0');
  const std::string cfg = ckpt.config.to_json();
  put_u32(buf, static_cast<std::uint32_t>(cfg.size()));
  buf.append(cfg);
  put_u64(buf, ckpt.step);
  buf.push_back(ckpt.has_moments ? 1 : 0);
  put_u32(buf, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& p : ckpt.params) {
    put_u32(buf, static_cast<std::uint32_t>(p.name.size()));
    buf.append(p.name);
    put_u32(buf, static_cast<std::uint32_t>(p.shape.size()));
    for (std::size_t d : p.shape) put_u32(buf, static_cast<std::uint32_t>(d));
    for (double v : p.values) put_f64(buf, v);
  }
  if (ckpt.has_moments) {
    if (ckpt.moment1.size() != ckpt.params.size() ||
        ckpt.moment2.size() != ckpt.params.size())
      throw param_error("checkpoint: moments misaligned with parameters");
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
      for (double v : ckpt.moment1[i]) put_f64(buf, v);
      for (double v : ckpt.moment2[i]) put_f64(buf, v);
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot open '" + path + "' for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw data_error("write failed for '" + path + "'");
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kCkptMagic, 4) != 0)
    throw format_error("checkpoint: bad magic");
  Checkpoint ckpt;
  ckpt.version = static_cast<std::uint8_t>(bytes[4]);
  if (ckpt.version != 1)
    throw format_error("checkpoint: unsupported version " +
                       std::to_string(ckpt.version));
  ByteReader r{reinterpret_cast<const unsigned char*>(bytes.data()) + 8,
               bytes.size() - 8};
  const std::uint32_t cfg_len = r.u32();
  ckpt.config = ModelConfig::from_json(r.bytes(cfg_len));
  ckpt.step = r.u64();
  r.need(1);
  ckpt.has_moments = (*r.p != 0);
  ++r.p;
  --r.left;
  const std::uint32_t count = r.u32();
  ckpt.params.resize(count);
  for (auto& p : ckpt.params) {
    p.name = r.bytes(r.u32());
    const std::uint32_t nd = r.u32();
    p.shape.resize(nd);
    for (auto& d : p.shape) d = r.u32();
    p.values.resize(ag::numel(p.shape));
    for (auto& v : p.values) v = r.f64();
  }
  if (ckpt.has_moments) {
    ckpt.moment1.resize(count);
    ckpt.moment2.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      ckpt.moment1[i].resize(ckpt.params[i].values.size());
      for (auto& v : ckpt.moment1[i]) v = r.f64();
      ckpt.moment2[i].resize(ckpt.params[i].values.size());
      for (auto& v : ckpt.moment2[i]) v = r.f64();
    }
  }
  return ckpt;
}

std::uint64_t param_table_hash(const std::vector<ParamEntry>& params) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  auto mix_bytes = [&h](const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x00000100000001B3ull;
    }
  };
  for (const auto& p : params) {
    mix_bytes(p.name.data(), p.name.size());
    for (std::size_t d : p.shape) mix_bytes(&d, sizeof(d));
    mix_bytes(p.values.data(), p.values.size() * sizeof(double));
  }
  return h;
}

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  CounterRng rng(cfg_.seed);
  const std::size_t f = cfg_.conv_channels;
  const std::size_t d = cfg_.embed_dim();
  const std::size_t p = cfg_.patch_samples;

  auto weight = [&](const std::string& name, ag::Shape shape, std::size_t fan_in) {
    params_[name] = ag::param(shape, uniform_init(rng, ag::numel(shape), fan_in));
  };
  auto zeros = [&](const std::string& name, ag::Shape shape) {
    params_[name] = ag::param(shape, std::vector<double>(ag::numel(shape), 0.0));
  };
  auto ones = [&](const std::string& name, ag::Shape shape) {
    params_[name] = ag::param(shape, std::vector<double>(ag::numel(shape), 1.0));
  };

  for (std::size_t b = 0; b < 3; ++b) {
    const std::string tag = "conv" + std::to_string(b + 1);
    const std::size_t cin = (b == 0) ? 1 : f;
    weight(tag + ".w", {f, cin, cfg_.conv[b].kernel}, cin * cfg_.conv[b].kernel);
    zeros(tag + ".b", {f});
    ones("gn" + std::to_string(b + 1) + ".gain", {f});
    zeros("gn" + std::to_string(b + 1) + ".bias", {f});
  }

  if (cfg_.channel_pe_mode == "conduction")
    params_["chpe.alpha"] =
        ag::param({1}, {ChannelPeParams::alpha_for_scale(0.08)});
  weight("chpe.proj_w", {3, d}, 3);
  zeros("chpe.proj_b", {d});

  if (cfg_.temporal_pe_mode == "grounded") {
    const std::size_t basis_dim = 2 * cfg_.osc_count + cfg_.decay_count;
    weight("tpe.proj_w", {basis_dim, d}, basis_dim);
    zeros("tpe.proj_b", {d});
  }

  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    char tag[16];
    std::snprintf(tag, sizeof(tag), "layer%02zu.", l);
    const std::string base(tag);
    ones(base + "ln1.gain", {d});
    zeros(base + "ln1.bias", {d});
    weight(base + "attn.wq", {d, d}, d);
    zeros(base + "attn.bq", {d});
    weight(base + "attn.wk", {d, d}, d);
    zeros(base + "attn.bk", {d});
    weight(base + "attn.wv", {d, d}, d);
    zeros(base + "attn.bv", {d});
    weight(base + "attn.wo", {d, d}, d);
    zeros(base + "attn.bo", {d});
    ones(base + "ln2.gain", {d});
    zeros(base + "ln2.bias", {d});
    weight(base + "ffn.w1", {d, cfg_.d_ff}, d);
    zeros(base + "ffn.b1", {cfg_.d_ff});
    weight(base + "ffn.w2", {cfg_.d_ff, d}, cfg_.d_ff);
    zeros(base + "ffn.b2", {d});
  }

  weight("recon.w", {p, d}, d);
  zeros("recon.b", {p});
  weight("nsp.w", {cfg_.nsp_dim, d}, d);
  zeros("nsp.b", {cfg_.nsp_dim});
}

Model::Model(const Checkpoint& ckpt) : Model(ckpt.config) {
  std::map<std::string, const ParamEntry*> entries;
  for (const auto& e : ckpt.params) {
    if (!entries.emplace(e.name, &e).second)
      throw format_error("checkpoint: duplicate parameter '" + e.name + "'");
  }
  if (entries.size() != params_.size())
    throw format_error("checkpoint: expected " + std::to_string(params_.size()) +
                       " parameters, found " + std::to_string(entries.size()));
  for (auto& [name, tensor] : params_) {
    auto it = entries.find(name);
    if (it == entries.end())
      throw format_error("checkpoint: missing parameter '" + name + "'");
    if (it->second->shape != tensor->shape)
      throw format_error("checkpoint: shape mismatch for '" + name + "'");
    tensor->value = it->second->values;
  }
}

Checkpoint Model::to_checkpoint() const {
  Checkpoint ckpt;
  ckpt.config = cfg_;
  for (const auto& [name, tensor] : params_)
    ckpt.params.push_back({name, tensor->shape, tensor->value});
  return ckpt;
}

ag::Tensor Model::p(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end())
    throw param_error("model: unknown parameter '" + name + "'");
  return it->second;
}

ag::Tensor Model::conv_embed(const PatchGrid& grid) const {
  if (grid.patch_len != cfg_.patch_samples)
    throw param_error("conv_embed: patch length " + std::to_string(grid.patch_len) +
                      " != configured P=" + std::to_string(cfg_.patch_samples));
  const std::size_t n = grid.channels * grid.seconds;
  ag::Tensor x = ag::constant({n, 1, grid.patch_len}, grid.data);
  for (std::size_t b = 0; b < 3; ++b) {
    const std::string conv_tag = "conv" + std::to_string(b + 1);
    const std::string gn_tag = "gn" + std::to_string(b + 1);
    x = ag::conv1d(x, p(conv_tag + ".w"), p(conv_tag + ".b"), cfg_.conv[b].stride,
                   cfg_.conv[b].pad);
    x = ag::group_norm(x, cfg_.gn_groups, p(gn_tag + ".gain"), p(gn_tag + ".bias"));
    x = ag::gelu(x);
  }
  return ag::reshape(x, {n, cfg_.embed_dim()});
}

ag::Tensor Model::positional_sum(const ag::Tensor& embed, const PatchGrid& grid,
                                 const Montage& montage,
                                 const std::vector<std::string>& order) const {
  const std::size_t c = grid.channels, s = grid.seconds, d = cfg_.embed_dim();
  ag::Tensor tokens = ag::reshape(embed, {c, s, d});

  ag::Tensor ch_pe;
  if (cfg_.channel_pe_mode == "conduction") {
    ChannelPeParams pe;
    pe.alpha = p("chpe.alpha");
    pe.proj_w = p("chpe.proj_w");
    pe.proj_b = p("chpe.proj_b");
    ch_pe = channel_pe(montage, order, pe);
  } else {
    ch_pe = ablation_channel_pe(montage, order, p("chpe.proj_w"), p("chpe.proj_b"));
  }
  tokens = ag::add(tokens, ag::reshape(ch_pe, {c, 1, d}));

  ag::Tensor t_pe;
  if (cfg_.temporal_pe_mode == "grounded") {
    TemporalBasis basis;
    basis.freqs_hz = TemporalBasis::log_spaced_freqs(cfg_.osc_count);
    basis.decay_rates = TemporalBasis::log_spaced_decays(cfg_.decay_count);
    basis.proj_w = p("tpe.proj_w");
    basis.proj_b = p("tpe.proj_b");
    t_pe = temporal_pe(s, basis);
  } else {
    t_pe = ablation_temporal_pe(s, d);
  }
  tokens = ag::add(tokens, ag::reshape(t_pe, {1, s, d}));
  return ag::reshape(tokens, {c * s, d});
}

ag::Tensor Model::encode(const PatchGrid& grid, const Montage& montage,
                         const std::vector<std::string>& order) const {
  if (order.size() != grid.channels)
    throw param_error("encode: channel order length mismatch");
  const std::size_t d = cfg_.embed_dim();
  const std::size_t dh = d / cfg_.heads;
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(dh));

  ag::Tensor x = positional_sum(conv_embed(grid), grid, montage, order);

  for (std::size_t l = 0; l < cfg_.layers; ++l) {
    char tag[16];
    std::snprintf(tag, sizeof(tag), "layer%02zu.", l);
    const std::string base(tag);

    // pre-norm multi-head attention
    const ag::Tensor h = ag::layer_norm(x, p(base + "ln1.gain"), p(base + "ln1.bias"));
    const ag::Tensor q = ag::add(ag::matmul(h, p(base + "attn.wq")), p(base + "attn.bq"));
    const ag::Tensor k = ag::add(ag::matmul(h, p(base + "attn.wk")), p(base + "attn.bk"));
    const ag::Tensor v = ag::add(ag::matmul(h, p(base + "attn.wv")), p(base + "attn.bv"));
    std::vector<ag::Tensor> heads;
    heads.reserve(cfg_.heads);
    for (std::size_t hh = 0; hh < cfg_.heads; ++hh) {
      const ag::Tensor qh = ag::slice(q, 1, hh * dh, dh);
      const ag::Tensor kh = ag::slice(k, 1, hh * dh, dh);
      const ag::Tensor vh = ag::slice(v, 1, hh * dh, dh);
      const ag::Tensor scores =
          ag::scale(ag::matmul(qh, ag::transpose(kh)), attn_scale);
      heads.push_back(ag::matmul(ag::softmax(scores, 1), vh));
    }
    const ag::Tensor ctx = ag::concat(heads, 1);
    x = ag::add(x, ag::add(ag::matmul(ctx, p(base + "attn.wo")), p(base + "attn.bo")));

    // pre-norm feed-forward
    const ag::Tensor h2 =
        ag::layer_norm(x, p(base + "ln2.gain"), p(base + "ln2.bias"));
    const ag::Tensor mid =
        ag::gelu(ag::add(ag::matmul(h2, p(base + "ffn.w1")), p(base + "ffn.b1")));
    x = ag::add(x, ag::add(ag::matmul(mid, p(base + "ffn.w2")), p(base + "ffn.b2")));
  }
  return x;
}

ag::Tensor Model::mer_head(const ag::Tensor& h, std::size_t channels,
                           std::size_t seconds) const {
  const ag::Tensor flat =
      ag::add(ag::matmul(h, ag::transpose(p("recon.w"))), p("recon.b"));
  return ag::reshape(flat, {channels, seconds, cfg_.patch_samples});
}

ag::Tensor Model::nsp_head(const ag::Tensor& h, std::size_t channels,
                           std::size_t seconds) const {
  const ag::Tensor flat =
      ag::add(ag::matmul(h, ag::transpose(p("nsp.w"))), p("nsp.b"));
  return ag::reshape(flat, {channels, seconds, cfg_.nsp_dim});
}

}  // namespace dbrn
