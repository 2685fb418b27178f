#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dbrn/corpus.hpp"
#include "dbrn/errors.hpp"
#include "dbrn/model.hpp"
#include "dbrn/neurodyn.hpp"
#include "dbrn/trainer.hpp"

namespace dbrn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t fnv1a64_bytes(const std::string& bytes) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x00000100000001B3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream ss;
  ss << "fnv1a64:" << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw format_error("'" + path + "': " + e.what());
  }
  return j;
}

// One manifest per run, written next to the primary output.
struct Manifest {
  std::string subcommand;
  std::uint64_t seed = 0;
  json config = json::object();
  std::map<std::string, std::string> inputs, outputs;

  void write(const std::string& primary_output) const {
    json j;
    j["subcommand"] = subcommand;
    j["seed"] = seed;
    j["config"] = config;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    json hashes = json::object();
    for (const auto& [role, path] : outputs)
      if (fs::exists(path) && fs::is_regular_file(path))
        hashes[path] = hex64(fnv1a64_file(path));
    j["hashes"] = hashes;
    const std::string path = primary_output + ".manifest.json";
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw data_error("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
  }
};

SyntheticSpec spec_from_json(const json& j) {
  SyntheticSpec spec;
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("channels")) spec.channels = j.at("channels").get<std::size_t>();
  if (j.contains("duration_s")) spec.duration_s = j.at("duration_s").get<double>();
  if (j.contains("rate_hz")) spec.rate_hz = j.at("rate_hz").get<double>();
  for (const auto& c : j.value("components", json::array())) {
    const std::string type = c.at("type").get<std::string>();
    if (type == "sinusoid") {
      spec.components.push_back(SinusoidComponent{
          c.at("freq_hz").get<double>(), c.at("amplitude_uv").get<double>(),
          c.value("phase_rad", 0.0), c.value("phase_lag_rad", 0.0)});
    } else if (type == "noise") {
      spec.components.push_back(NoiseComponent{c.at("std_uv").get<double>()});
    } else if (type == "pac") {
      spec.components.push_back(PacComponent{
          c.at("carrier_hz").get<double>(), c.at("modulator_hz").get<double>(),
          c.value("depth", 1.0), c.at("amplitude_uv").get<double>()});
    } else {
      throw param_error("gen: unknown component type '" + type + "'");
    }
  }
  return spec;
}

DeskCorpusSpec corpus_spec_from_json(const json& j) {
  DeskCorpusSpec spec;
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("count")) spec.count = j.at("count").get<std::size_t>();
  if (j.contains("channels")) spec.channels = j.at("channels").get<std::size_t>();
  if (j.contains("duration_s")) spec.duration_s = j.at("duration_s").get<double>();
  if (j.contains("rate_hz")) spec.rate_hz = j.at("rate_hz").get<double>();
  return spec;
}

ModelConfig model_config_from_json(const json& j) {
  return ModelConfig::from_json(j.dump());
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  auto get = [&](const char* key, auto& out) {
    if (j.contains(key)) out = j.at(key).get<std::decay_t<decltype(out)>>();
  };
  get("lr", cfg.lr);
  get("weight_decay", cfg.weight_decay);
  get("beta1", cfg.beta1);
  get("beta2", cfg.beta2);
  get("adam_eps", cfg.adam_eps);
  get("clip_norm", cfg.clip_norm);
  get("lambda_mer", cfg.lambda_mer);
  get("lambda_nsp", cfg.lambda_nsp);
  get("batch_size", cfg.batch_size);
  get("steps", cfg.steps);
  get("c_min", cfg.c_min);
  get("seed", cfg.seed);
  if (j.contains("schedule")) {
    const std::string s = j.at("schedule").get<std::string>();
    if (s == "constant")
      cfg.schedule = TrainConfig::Schedule::kConstant;
    else if (s == "cosine")
      cfg.schedule = TrainConfig::Schedule::kCosine;
    else
      throw param_error("train config: unknown schedule '" + s + "'");
  }
  return cfg;
}

json train_config_to_json(const TrainConfig& cfg) {
  json j;
  j["lr"] = cfg.lr;
  j["weight_decay"] = cfg.weight_decay;
  j["beta1"] = cfg.beta1;
  j["beta2"] = cfg.beta2;
  j["adam_eps"] = cfg.adam_eps;
  j["clip_norm"] = cfg.clip_norm;
  j["lambda_mer"] = cfg.lambda_mer;
  j["lambda_nsp"] = cfg.lambda_nsp;
  j["batch_size"] = cfg.batch_size;
  j["steps"] = cfg.steps;
  j["c_min"] = cfg.c_min;
  j["seed"] = cfg.seed;
  j["schedule"] =
      cfg.schedule == TrainConfig::Schedule::kConstant ? "constant" : "cosine";
  return j;
}

void write_stats_csv(const NspTargets& targets, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("cannot open '" + path + "' for writing");
  out << "channel,second";
  for (const char* name : NspTargets::column_names()) out << ',' << name;
  out << '\n';
  out.precision(17);
  for (std::size_t c = 0; c < targets.channels; ++c)
    for (std::size_t s = 0; s < targets.seconds; ++s) {
      out << c << ',' << s;
      for (std::size_t k = 0; k < NspTargets::kDim; ++k)
        out << ',' << targets.at(c, s, k);
      out << '\n';
    }
  if (!out) throw data_error("write failed for '" + path + "'");
}

void write_matrix_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows,
                      const std::vector<std::string>& row_labels = {}) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("cannot open '" + path + "' for writing");
  out.precision(17);
  for (std::size_t i = 0; i < header.size(); ++i)
    out << (i ? "," : "") << header[i];
  out << '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (!row_labels.empty()) out << row_labels[r] << ',';
    for (std::size_t i = 0; i < rows[r].size(); ++i)
      out << (i ? "," : "") << rows[r][i];
    out << '\n';
  }
}

// -------- subcommand payloads --------

struct GenArgs {
  std::string spec_path, out_path;
};

int run_gen(const GenArgs& args) {
  const json spec_json = load_json_file(args.spec_path);
  Manifest manifest;
  manifest.subcommand = "gen";
  manifest.config = spec_json;
  manifest.inputs["spec"] = args.spec_path;

  if (spec_json.contains("preset")) {
    const std::string preset = spec_json.at("preset").get<std::string>();
    const DeskCorpusSpec spec = corpus_spec_from_json(spec_json);
    manifest.seed = spec.seed;
    std::vector<LabeledRecording> corpus;
    if (preset == "desk")
      corpus = build_desk_corpus(spec);
    else if (preset == "two_class")
      corpus = build_two_class_corpus(spec);
    else
      throw param_error("gen: unknown preset '" + preset + "'");

    const double eval_fraction = spec_json.value("eval_fraction", 0.0);
    if (eval_fraction < 0.0 || eval_fraction >= 1.0)
      throw param_error("gen: eval_fraction outside [0, 1)");
    const std::size_t train_count = static_cast<std::size_t>(
        std::ceil((1.0 - eval_fraction) * static_cast<double>(corpus.size())));

    fs::create_directories(args.out_path);
    const fs::path dir(args.out_path);
    write_montage(corpus_montage(spec), (dir / "montage.json").string());
    std::ofstream labels(dir / "labels.csv", std::ios::trunc);
    labels << "file,label,split\n";
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "rec_%04zu.dbrn", i);
      write_recording(corpus[i].rec, (dir / name).string());
      labels << name << ',' << corpus[i].label << ','
             << (i < train_count ? "train" : "eval") << '\n';
    }
    labels.close();
    manifest.outputs["dir"] = args.out_path;
    manifest.outputs["labels"] = (dir / "labels.csv").string();
    manifest.outputs["montage"] = (dir / "montage.json").string();
    manifest.write((dir / "corpus").string());
    std::cout << "wrote " << corpus.size() << " recordings to " << args.out_path
              << "\n";
    return 0;
  }

  const SyntheticSpec spec = spec_from_json(spec_json);
  manifest.seed = spec.seed;
  const Recording rec = generate_synthetic(spec);
  write_recording(rec, args.out_path);
  manifest.outputs["recording"] = args.out_path;
  manifest.write(args.out_path);
  std::cout << "wrote " << rec.channels() << "x" << rec.samples()
            << " recording to " << args.out_path << "\n";
  return 0;
}

struct StatsArgs {
  std::string recording, montage, out_path;
};

int run_stats(const StatsArgs& args) {
  const Recording rec = read_recording(args.recording);
  if (!args.montage.empty()) {
    const Montage montage = read_montage(args.montage);
    for (const auto& name : rec.channel_names) montage.position(name);
  }
  const PatchGrid grid = patchify(normalize(rec));
  const NspTargets targets = assemble_targets(
      grid, BandTable::canonical(rec.rate_hz), canonical_cfc_pairs());
  write_stats_csv(targets, args.out_path);

  Manifest manifest;
  manifest.subcommand = "stats";
  manifest.inputs["recording"] = args.recording;
  if (!args.montage.empty()) manifest.inputs["montage"] = args.montage;
  manifest.outputs["stats"] = args.out_path;
  manifest.write(args.out_path);
  return 0;
}

struct PretrainArgs {
  std::string config_path;
  // flag overrides; negative/empty means "not set"
  double lr = -1.0;
  std::int64_t seed = -1;
  std::int64_t steps = -1;
  std::int64_t batch = -1;
  std::string out_checkpoint, out_trace;
};

int run_pretrain(const PretrainArgs& args) {
  const json file = load_json_file(args.config_path);
  ModelConfig model_cfg = model_config_from_json(file.value("model", json::object()));
  TrainConfig train_cfg = train_config_from_json(file.value("train", json::object()));
  if (file.contains("seed")) {
    model_cfg.seed = file.at("seed").get<std::uint64_t>();
    train_cfg.seed = model_cfg.seed;
  }
  // precedence: flags > file > defaults
  if (args.seed >= 0) {
    model_cfg.seed = static_cast<std::uint64_t>(args.seed);
    train_cfg.seed = model_cfg.seed;
  }
  if (args.lr > 0.0) train_cfg.lr = args.lr;
  if (args.steps > 0) train_cfg.steps = static_cast<std::size_t>(args.steps);
  if (args.batch > 0) train_cfg.batch_size = static_cast<std::size_t>(args.batch);

  std::string out_checkpoint = args.out_checkpoint;
  std::string out_trace = args.out_trace;
  if (const auto out = file.value("out", json::object()); true) {
    if (out_checkpoint.empty()) out_checkpoint = out.value("checkpoint", "model.dbck");
    if (out_trace.empty()) out_trace = out.value("trace", "trace.csv");
  }

  // corpus: a directory of recordings or a synthetic preset
  std::vector<Recording> corpus;
  Montage montage;
  const json corpus_cfg = file.value("corpus", json::object());
  Manifest manifest;
  if (corpus_cfg.contains("dir")) {
    const fs::path dir(corpus_cfg.at("dir").get<std::string>());
    montage = read_montage((dir / "montage.json").string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.path().extension() == ".dbrn") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) corpus.push_back(read_recording(f.string()));
    if (corpus.empty())
      throw data_error("pretrain: no .dbrn recordings in '" + dir.string() + "'");
    manifest.inputs["corpus"] = dir.string();
  } else if (corpus_cfg.contains("synthetic")) {
    const json& syn = corpus_cfg.at("synthetic");
    const DeskCorpusSpec spec = corpus_spec_from_json(syn);
    const std::string preset = syn.value("preset", "desk");
    montage = corpus_montage(spec);
    auto labeled = preset == "two_class" ? build_two_class_corpus(spec)
                   : preset == "desk"
                       ? build_desk_corpus(spec)
                       : throw param_error("pretrain: unknown preset '" + preset +
                                           "'");
    for (auto& lr : labeled) corpus.push_back(std::move(lr.rec));
  } else {
    throw param_error("pretrain: corpus must name a 'dir' or a 'synthetic' preset");
  }

  const PretrainResult result = pretrain(corpus, montage, model_cfg, train_cfg);
  write_checkpoint(result.checkpoint, out_checkpoint);
  write_trace_csv(result.trace, out_trace);

  manifest.subcommand = "pretrain";
  manifest.seed = train_cfg.seed;
  manifest.config["model"] = json::parse(model_cfg.to_json());
  manifest.config["train"] = train_config_to_json(train_cfg);
  manifest.config["corpus"] = corpus_cfg;
  manifest.inputs["config"] = args.config_path;
  manifest.outputs["checkpoint"] = out_checkpoint;
  manifest.outputs["trace"] = out_trace;
  manifest.write(out_checkpoint);
  std::cout << "pretrained " << train_cfg.steps << " steps; final loss "
            << result.trace.back().total << "\n";
  return 0;
}

struct ProbeArgs {
  std::string checkpoint, dataset_dir, out_path;
  std::string mode = "frozen";
  std::string head = "pool";
  std::string task;  // classify | regress | "" (infer)
  double lr = -1.0;
  std::int64_t steps = -1;
  std::int64_t batch = -1;
  std::int64_t seed = -1;
};

TaskDataset load_dataset(const std::string& dir_path, const std::string& task) {
  const fs::path dir(dir_path);
  TaskDataset ds;
  ds.montage = read_montage((dir / "montage.json").string());
  std::ifstream labels(dir / "labels.csv");
  if (!labels) throw data_error("cannot open '" + (dir / "labels.csv").string() + "'");
  std::string line;
  if (!std::getline(labels, line) || line.rfind("file,label", 0) != 0)
    throw format_error("labels.csv must start with 'file,label[,split]'");
  bool all_integral = true;
  double max_label = 0.0;
  std::vector<std::tuple<std::string, double, std::string>> rows;
  while (std::getline(labels, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string file, label_str, split = "train";
    std::getline(ls, file, ',');
    std::getline(ls, label_str, ',');
    std::getline(ls, split, ',');
    if (split.empty()) split = "train";
    double label = 0.0;
    try {
      label = std::stod(label_str);
    } catch (const std::exception&) {
      throw format_error("labels.csv: bad label '" + label_str + "'");
    }
    if (label != std::floor(label) || label < 0.0) all_integral = false;
    max_label = std::max(max_label, label);
    rows.emplace_back(file, label, split);
  }
  if (rows.empty()) throw data_error("labels.csv lists no samples");

  if (task == "regress")
    ds.regression = true;
  else if (task == "classify")
    ds.regression = false;
  else
    ds.regression = !all_integral;
  if (!ds.regression)
    ds.num_classes = static_cast<std::size_t>(max_label) + 1;

  for (const auto& [file, label, split] : rows) {
    TaskSample sample{read_recording((dir / file).string()), label};
    if (split == "eval")
      ds.eval.push_back(std::move(sample));
    else
      ds.train.push_back(std::move(sample));
  }
  return ds;
}

int run_probe(const ProbeArgs& args) {
  const Checkpoint ckpt = read_checkpoint(args.checkpoint);
  const TaskDataset ds = load_dataset(args.dataset_dir, args.task);

  TrainConfig cfg;
  cfg.schedule = TrainConfig::Schedule::kCosine;
  cfg.batch_size = 32;
  cfg.steps = 200;
  cfg.lr = 3e-4;
  if (args.mode == "frozen")
    cfg.mode = TrainConfig::Mode::kFrozenProbe;
  else if (args.mode == "finetune")
    cfg.mode = TrainConfig::Mode::kFinetune;
  else
    throw param_error("probe: mode must be 'frozen' or 'finetune'");
  if (args.lr > 0.0) cfg.lr = args.lr;
  if (args.steps > 0) cfg.steps = static_cast<std::size_t>(args.steps);
  if (args.batch > 0) cfg.batch_size = static_cast<std::size_t>(args.batch);
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);

  const HeadMode head = args.head == "flatten" ? HeadMode::kFlatten : HeadMode::kPool;
  const AdaptResult result = adapt(ckpt, ds, head, cfg);

  json out;
  for (const auto& [name, value] : result.metrics) out[name] = value;
  out["mode"] = args.mode;
  out["backbone_hash_before"] = hex64(result.backbone_hash_before);
  out["backbone_hash_after"] = hex64(result.backbone_hash_after);
  std::ofstream of(args.out_path, std::ios::trunc);
  if (!of) throw data_error("cannot open '" + args.out_path + "' for writing");
  of << out.dump(2) << '\n';
  of.close();

  Manifest manifest;
  manifest.subcommand = "probe";
  manifest.seed = cfg.seed;
  manifest.config = train_config_to_json(cfg);
  manifest.config["head"] = args.head;
  manifest.config["mode"] = args.mode;
  manifest.inputs["checkpoint"] = args.checkpoint;
  manifest.inputs["dataset"] = args.dataset_dir;
  manifest.outputs["metrics"] = args.out_path;
  manifest.write(args.out_path);
  std::cout << out.dump(2) << "\n";
  return 0;
}

struct EncodeArgs {
  std::string checkpoint, recording, montage, out_path;
};

int run_encode(const EncodeArgs& args) {
  const Checkpoint ckpt = read_checkpoint(args.checkpoint);
  Model model(ckpt);
  const Recording rec = read_recording(args.recording);
  const Montage montage = read_montage(args.montage);
  const PatchGrid grid = patchify(normalize(rec));
  const ag::Tensor h = model.encode(grid, montage, rec.channel_names);

  const std::size_t d = model.config().embed_dim();
  std::ofstream out(args.out_path, std::ios::trunc);
  if (!out) throw data_error("cannot open '" + args.out_path + "' for writing");
  out << "channel,second";
  for (std::size_t k = 0; k < d; ++k) out << ",h" << k;
  out << '\n';
  out.precision(17);
  for (std::size_t c = 0; c < grid.channels; ++c)
    for (std::size_t s = 0; s < grid.seconds; ++s) {
      out << c << ',' << s;
      const double* row = h->value.data() + (c * grid.seconds + s) * d;
      for (std::size_t k = 0; k < d; ++k) out << ',' << row[k];
      out << '\n';
    }
  out.close();

  Manifest manifest;
  manifest.subcommand = "encode";
  manifest.seed = model.config().seed;
  manifest.inputs["checkpoint"] = args.checkpoint;
  manifest.inputs["recording"] = args.recording;
  manifest.inputs["montage"] = args.montage;
  manifest.outputs["tokens"] = args.out_path;
  manifest.write(args.out_path);
  return 0;
}

struct DumpPeArgs {
  std::string checkpoint, config_path, montage, out_dir;
  std::int64_t seconds = 100;
};

int run_dump_pe(const DumpPeArgs& args) {
  if (args.checkpoint.empty() == args.config_path.empty())
    throw param_error("dump-pe: pass exactly one of --checkpoint / --config");
  Model model = args.checkpoint.empty()
                    ? Model(model_config_from_json(
                          load_json_file(args.config_path).value("model",
                                                                 json::object())))
                    : Model(read_checkpoint(args.checkpoint));
  const Montage montage = read_montage(args.montage);
  std::vector<std::string> order;
  for (const auto& [label, pos] : montage.entries) order.push_back(label);
  const std::size_t c = order.size();

  fs::create_directories(args.out_dir);
  const fs::path dir(args.out_dir);
  Manifest manifest;
  manifest.subcommand = "dump-pe";
  manifest.seed = model.config().seed;
  if (!args.checkpoint.empty()) manifest.inputs["checkpoint"] = args.checkpoint;
  if (!args.config_path.empty()) manifest.inputs["config"] = args.config_path;
  manifest.inputs["montage"] = args.montage;

  if (model.config().channel_pe_mode == "conduction") {
    ChannelPeParams pe;
    pe.alpha = model.params().at("chpe.alpha");
    pe.proj_w = model.params().at("chpe.proj_w");
    pe.proj_b = model.params().at("chpe.proj_b");
    const auto dist = pairwise_distances(montage, order);
    const ag::Tensor kernel = conduction_kernel(dist, c, pe);
    std::vector<std::vector<double>> krows(c);
    for (std::size_t i = 0; i < c; ++i)
      krows[i].assign(kernel->value.begin() + static_cast<std::ptrdiff_t>(i * c),
                      kernel->value.begin() + static_cast<std::ptrdiff_t>((i + 1) * c));
    std::vector<std::string> header = {"channel"};
    header.insert(header.end(), order.begin(), order.end());
    write_matrix_csv((dir / "kernel.csv").string(), header, krows, order);

    const ag::Tensor smoothed = ag::matmul(
        kernel, [&] {
          std::vector<double> coords(c * 3);
          for (std::size_t i = 0; i < c; ++i) {
            const auto& p = montage.position(order[i]);
            for (int k = 0; k < 3; ++k) coords[i * 3 + k] = p[k];
          }
          return ag::constant({c, 3}, std::move(coords));
        }());
    std::vector<std::vector<double>> srows(c);
    for (std::size_t i = 0; i < c; ++i)
      srows[i] = {smoothed->value[i * 3], smoothed->value[i * 3 + 1],
                  smoothed->value[i * 3 + 2]};
    write_matrix_csv((dir / "smoothed_coords.csv").string(),
                     {"channel", "x", "y", "z"}, srows, order);
    manifest.outputs["kernel"] = (dir / "kernel.csv").string();
    manifest.outputs["smoothed_coords"] = (dir / "smoothed_coords.csv").string();
  }

  const std::size_t seconds = static_cast<std::size_t>(std::max<std::int64_t>(1, args.seconds));
  if (model.config().temporal_pe_mode == "grounded") {
    const auto freqs = TemporalBasis::log_spaced_freqs(model.config().osc_count);
    const auto decays = TemporalBasis::log_spaced_decays(model.config().decay_count);
    const auto basis = temporal_basis_matrix(seconds, freqs, decays);
    const std::size_t dim = 2 * freqs.size() + decays.size();
    std::vector<std::string> header = {"t"};
    for (double f : freqs) {
      header.push_back("sin_" + std::to_string(f));
      header.push_back("cos_" + std::to_string(f));
    }
    for (double dr : decays) header.push_back("decay_" + std::to_string(1.0 / dr));
    std::vector<std::vector<double>> rows(seconds);
    std::vector<std::string> row_labels(seconds);
    for (std::size_t t = 0; t < seconds; ++t) {
      row_labels[t] = std::to_string(t + 1);
      rows[t].assign(basis.begin() + static_cast<std::ptrdiff_t>(t * dim),
                     basis.begin() + static_cast<std::ptrdiff_t>((t + 1) * dim));
    }
    write_matrix_csv((dir / "temporal_basis.csv").string(), header, rows, row_labels);
  } else {
    const ag::Tensor pe = ablation_temporal_pe(seconds, model.config().embed_dim());
    std::vector<std::string> header = {"t"};
    for (std::size_t k = 0; k < model.config().embed_dim(); ++k)
      header.push_back("pe" + std::to_string(k));
    std::vector<std::vector<double>> rows(seconds);
    std::vector<std::string> row_labels(seconds);
    const std::size_t d = model.config().embed_dim();
    for (std::size_t t = 0; t < seconds; ++t) {
      row_labels[t] = std::to_string(t);
      rows[t].assign(pe->value.begin() + static_cast<std::ptrdiff_t>(t * d),
                     pe->value.begin() + static_cast<std::ptrdiff_t>((t + 1) * d));
    }
    write_matrix_csv((dir / "temporal_basis.csv").string(), header, rows, row_labels);
  }
  manifest.outputs["temporal_basis"] = (dir / "temporal_basis.csv").string();
  manifest.write((dir / "dump_pe").string());
  return 0;
}

}  // namespace

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return fnv1a64_bytes(ss.str());
}

int run(int argc, const char* const* argv) {
  CLI::App app{"neuro-grounded EEG pretraining toolkit"};
  app.require_subcommand(1);
  bool serial = true;
  app.add_flag("--serial", serial,
               "force normative serial execution (always on; reserved)");

  GenArgs gen_args;
  auto* gen = app.add_subcommand("gen", "generate synthetic recordings");
  gen->add_option("--spec", gen_args.spec_path, "generator spec JSON")->required();
  gen->add_option("--out", gen_args.out_path, "output file or directory")->required();

  StatsArgs stats_args;
  auto* stats = app.add_subcommand("stats", "emit per-patch neurodynamics targets");
  stats->add_option("--recording", stats_args.recording)->required();
  stats->add_option("--montage", stats_args.montage);
  stats->add_option("--out", stats_args.out_path)->required();

  PretrainArgs pre_args;
  auto* pre = app.add_subcommand("pretrain", "dual-objective pretraining");
  pre->add_option("--config", pre_args.config_path)->required();
  pre->add_option("--seed", pre_args.seed);
  pre->add_option("--steps", pre_args.steps);
  pre->add_option("--batch", pre_args.batch);
  pre->add_option("--lr", pre_args.lr);
  pre->add_option("--out-checkpoint", pre_args.out_checkpoint);
  pre->add_option("--out-trace", pre_args.out_trace);

  ProbeArgs probe_args;
  auto* probe = app.add_subcommand("probe", "adapt a task head on a dataset");
  probe->add_option("--checkpoint", probe_args.checkpoint)->required();
  probe->add_option("--dataset", probe_args.dataset_dir)->required();
  probe->add_option("--out", probe_args.out_path)->required();
  probe->add_option("--mode", probe_args.mode)->check(CLI::IsMember({"frozen", "finetune"}));
  probe->add_option("--head", probe_args.head)->check(CLI::IsMember({"pool", "flatten"}));
  probe->add_option("--task", probe_args.task)->check(CLI::IsMember({"classify", "regress"}));
  probe->add_option("--lr", probe_args.lr);
  probe->add_option("--steps", probe_args.steps);
  probe->add_option("--batch", probe_args.batch);
  probe->add_option("--seed", probe_args.seed);

  EncodeArgs enc_args;
  auto* enc = app.add_subcommand("encode", "dump the token matrix for a recording");
  enc->add_option("--checkpoint", enc_args.checkpoint)->required();
  enc->add_option("--recording", enc_args.recording)->required();
  enc->add_option("--montage", enc_args.montage)->required();
  enc->add_option("--out", enc_args.out_path)->required();

  DumpPeArgs pe_args;
  auto* dump = app.add_subcommand("dump-pe", "dump positional-encoding structure");
  dump->add_option("--checkpoint", pe_args.checkpoint);
  dump->add_option("--config", pe_args.config_path);
  dump->add_option("--montage", pe_args.montage)->required();
  dump->add_option("--out", pe_args.out_dir)->required();
  dump->add_option("--seconds", pe_args.seconds);

  auto fail = [](const char* kind, const std::string& message, int code) {
    json err;
    err["error"] = {{"kind", kind}, {"message", message}};
    std::cerr << err.dump() << "\n";
    return code;
  };

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return run_gen(gen_args);
    if (stats->parsed()) return run_stats(stats_args);
    if (pre->parsed()) return run_pretrain(pre_args);
    if (probe->parsed()) return run_probe(probe_args);
    if (enc->parsed()) return run_encode(enc_args);
    if (dump->parsed()) return run_dump_pe(pe_args);
    return fail("usage", "no subcommand", 2);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help();
      return 0;
    }
    return fail("usage", e.what(), 2);
  } catch (const param_error& e) {
    return fail("usage", e.what(), 2);
  } catch (const format_error& e) {
    return fail("data", e.what(), 3);
  } catch (const data_error& e) {
    return fail("data", e.what(), 3);
  } catch (const numeric_error& e) {
    return fail("numeric", e.what(), 4);
  } catch (const fs::filesystem_error& e) {
    return fail("data", e.what(), 3);
  } catch (const std::exception& e) {
    return fail("data", e.what(), 3);
  }
}

}  // namespace dbrn::cli
