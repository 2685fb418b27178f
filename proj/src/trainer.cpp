#include "dbrn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "dbrn/errors.hpp"
#include "dbrn/rng.hpp"

namespace dbrn {

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) ||
      !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0))
    throw param_error("train config: invalid optimizer constants");
  if (weight_decay < 0.0 || clip_norm <= 0.0)
    throw param_error("train config: invalid decay/clip");
  if (lambda_mer < 0.0 || lambda_nsp < 0.0)
    throw param_error("train config: loss weights must be non-negative");
  if (batch_size == 0 || steps == 0)
    throw param_error("train config: batch_size and steps must be positive");
  if (c_min == 0) throw param_error("train config: c_min must be >= 1");
}

double TrainConfig::lr_at(std::size_t step) const {
  if (schedule == Schedule::kConstant) return lr;
  const double progress =
      static_cast<double>(step - 1) / static_cast<double>(steps);
  return lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

ag::Tensor mer_loss(const ag::Tensor& pred, const PatchGrid& clean,
                    const std::vector<std::uint8_t>& mask, double beta) {
  const std::size_t c = clean.channels, s = clean.seconds, p = clean.patch_len;
  if (pred->shape != ag::Shape{c, s, p})
    throw param_error("mer_loss: prediction shape " + ag::shape_str(pred->shape) +
                      " does not match the grid");
  if (mask.size() != c * s) throw param_error("mer_loss: mask size mismatch");
  std::size_t popcount = 0;
  std::vector<double> mvals(c * s);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mvals[i] = mask[i] ? 1.0 : 0.0;
    popcount += mask[i];
  }
  if (popcount == 0)
    throw param_error("mer_loss: empty mask (pretraining requires mu > 0)");
  const ag::Tensor target = ag::constant({c, s, p}, clean.data);
  const ag::Tensor mask_t = ag::constant({c, s, 1}, std::move(mvals));
  return ag::smooth_l1(pred, target, beta, mask_t);
}

ag::Tensor nsp_loss(const ag::Tensor& pred, const NspTargets& targets, double beta) {
  const ag::Shape want{targets.channels, targets.seconds, NspTargets::kDim};
  if (pred->shape != want)
    throw param_error("nsp_loss: prediction shape " + ag::shape_str(pred->shape) +
                      " does not match targets " + ag::shape_str(want));
  return ag::smooth_l1(pred, ag::constant(want, targets.values), beta);
}

ParamList sorted_params(const std::map<std::string, ag::Tensor>& params) {
  ParamList out;
  out.reserve(params.size());
  for (const auto& [name, tensor] : params) out.emplace_back(name, tensor);
  return out;
}

double global_grad_norm(const ParamList& params) {
  double acc = 0.0;
  for (const auto& [name, tensor] : params) {
    tensor->ensure_grad();
    for (double g : tensor->grad) acc += g * g;
  }
  return std::sqrt(acc);
}

void clip_gradients(const ParamList& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm <= max_norm) return;
  const double factor = max_norm / norm;
  for (const auto& [name, tensor] : params)
    for (double& g : tensor->grad) g *= factor;
}

void adamw_step(const ParamList& params, AdamWState& state,
                const TrainConfig& cfg, double lr_now) {
  if (state.moment1.size() != params.size()) {
    state.moment1.assign(params.size(), {});
    state.moment2.assign(params.size(), {});
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.moment1[i].assign(params[i].second->size(), 0.0);
      state.moment2[i].assign(params[i].second->size(), 0.0);
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [name, tensor] = params[i];
    tensor->ensure_grad();
    auto& m1 = state.moment1[i];
    auto& m2 = state.moment2[i];
    for (std::size_t j = 0; j < tensor->size(); ++j) {
      const double g = tensor->grad[j];
      if (!std::isfinite(g))
        throw numeric_error("adamw: non-finite gradient in '" + name + "'");
      m1[j] = cfg.beta1 * m1[j] + (1.0 - cfg.beta1) * g;
      m2[j] = cfg.beta2 * m2[j] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m1[j] / bc1;
      const double vhat = m2[j] / bc2;
      tensor->value[j] *= 1.0 - lr_now * cfg.weight_decay;
      tensor->value[j] -= lr_now * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("cannot open '" + path + "' for writing");
  out << "step,mer,nsp,total\n";
  out.precision(17);
  for (const auto& row : trace)
    out << row.step << ',' << row.mer << ',' << row.nsp << ',' << row.total << '\n';
  if (!out) throw data_error("write failed for '" + path + "'");
}

PretrainResult pretrain(const std::vector<Recording>& corpus,
                        const Montage& montage, const ModelConfig& model_cfg,
                        const TrainConfig& train_cfg) {
  if (corpus.empty()) throw param_error("pretrain: empty corpus");
  train_cfg.validate();
  Model model(model_cfg);
  const ParamList plist = sorted_params(model.params());
  AdamWState state;
  const std::array<CfcPair, 3> pairs = canonical_cfc_pairs();

  PretrainResult result;
  result.trace.reserve(train_cfg.steps);
  const double inv_batch = 1.0 / static_cast<double>(train_cfg.batch_size);

  for (std::size_t step = 1; step <= train_cfg.steps; ++step) {
    const std::uint64_t step_seed = CounterRng::derive(train_cfg.seed, step);
    double mer_sum = 0.0, nsp_sum = 0.0;
    for (std::size_t b = 0; b < train_cfg.batch_size; ++b) {
      const std::uint64_t pick = CounterRng::derive(step_seed, 3 * b);
      const std::uint64_t reorg_seed = CounterRng::derive(step_seed, 3 * b + 1);
      const std::uint64_t mask_seed = CounterRng::derive(step_seed, 3 * b + 2);
      const Recording& rec = corpus[pick % corpus.size()];

      auto [subset, indices] =
          channel_reorganization(rec, reorg_seed, std::min(train_cfg.c_min, rec.channels()));
      const Recording scaled = normalize(subset);
      const PatchGrid clean = patchify(scaled);
      const BandTable bands = BandTable::canonical(scaled.rate_hz);
      const NspTargets targets = assemble_targets(clean, bands, pairs);
      const PatchGrid masked = apply_mask(clean, model_cfg.mask_ratio, mask_seed);

      const ag::Tensor h = model.encode(masked, montage, subset.channel_names);
      const ag::Tensor pred_x = model.mer_head(h, clean.channels, clean.seconds);
      const ag::Tensor pred_y = model.nsp_head(h, clean.channels, clean.seconds);
      const ag::Tensor lm = mer_loss(pred_x, clean, masked.mask);
      const ag::Tensor ln = nsp_loss(pred_y, targets);
      const ag::Tensor total = ag::add(ag::scale(lm, train_cfg.lambda_mer),
                                       ag::scale(ln, train_cfg.lambda_nsp));
      if (!std::isfinite(total->value[0]))
        throw numeric_error("pretrain: non-finite loss at step " +
                            std::to_string(step));
      mer_sum += lm->value[0];
      nsp_sum += ln->value[0];
      ag::backward(ag::scale(total, inv_batch));
    }
    clip_gradients(plist, train_cfg.clip_norm);
    adamw_step(plist, state, train_cfg, train_cfg.lr_at(step));
    for (const auto& [name, tensor] : plist) ag::zero_grad(tensor);

    const double mer_mean = mer_sum * inv_batch;
    const double nsp_mean = nsp_sum * inv_batch;
    result.trace.push_back({step, mer_mean, nsp_mean,
                            train_cfg.lambda_mer * mer_mean +
                                train_cfg.lambda_nsp * nsp_mean});
  }

  result.checkpoint = model.to_checkpoint();
  result.checkpoint.step = state.step;
  result.checkpoint.has_moments = true;
  result.checkpoint.moment1 = state.moment1;
  result.checkpoint.moment2 = state.moment2;
  return result;
}

namespace {

struct HeadParams {
  ag::Tensor w;  // [in, out]
  ag::Tensor b;  // [out]
};

HeadParams make_head(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed) {
  CounterRng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
  std::vector<double> w(in_dim * out_dim);
  for (auto& v : w) v = bound * (2.0 * rng.next_double() - 1.0);
  return {ag::param({in_dim, out_dim}, std::move(w)),
          ag::param({out_dim}, std::vector<double>(out_dim, 0.0))};
}

std::vector<double> collect_labels(const std::vector<TaskSample>& samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

}  // namespace

ag::Tensor task_head_forward(const ag::Tensor& features, HeadMode mode,
                             const ag::Tensor& w, const ag::Tensor& b) {
  if (features->shape.size() != 2)
    throw param_error("task head: expected [N, D] features, got " +
                      ag::shape_str(features->shape));
  ag::Tensor pooled;
  if (mode == HeadMode::kPool) {
    const double inv_n = 1.0 / static_cast<double>(features->shape[0]);
    pooled = ag::scale(ag::sum_axis(features, 0), inv_n);  // [1, D]
  } else {
    pooled = ag::reshape(features, {1, features->size()});  // [1, N*D]
  }
  return ag::add(ag::matmul(pooled, w), b);  // [1, out]
}

double pearson_correlation(const std::vector<double>& a,
                           const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty())
    throw param_error("pearson: length mismatch");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  if (va <= 0.0 || vb <= 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

double r2_score(const std::vector<double>& pred, const std::vector<double>& target) {
  if (pred.size() != target.size() || pred.empty())
    throw param_error("r2: length mismatch");
  double mean = 0.0;
  for (double t : target) mean += t;
  mean /= static_cast<double>(target.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ss_res += (target[i] - pred[i]) * (target[i] - pred[i]);
    ss_tot += (target[i] - mean) * (target[i] - mean);
  }
  if (ss_tot <= 0.0) return 0.0;  // zero-variance targets
  return 1.0 - ss_res / ss_tot;
}

double root_mean_squared_error(const std::vector<double>& pred,
                               const std::vector<double>& target) {
  if (pred.size() != target.size() || pred.empty())
    throw param_error("rmse: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    acc += (pred[i] - target[i]) * (pred[i] - target[i]);
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

double balanced_accuracy(const std::vector<std::size_t>& pred,
                         const std::vector<std::size_t>& truth,
                         std::size_t num_classes) {
  if (pred.size() != truth.size() || pred.empty())
    throw param_error("balanced_accuracy: length mismatch");
  std::vector<std::size_t> support(num_classes, 0), hits(num_classes, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] >= num_classes)
      throw param_error("balanced_accuracy: label out of range");
    ++support[truth[i]];
    if (pred[i] == truth[i]) ++hits[truth[i]];
  }
  double acc = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (support[c] == 0) continue;
    ++present;
    acc += static_cast<double>(hits[c]) / static_cast<double>(support[c]);
  }
  if (present == 0) throw param_error("balanced_accuracy: no labels");
  return acc / static_cast<double>(present);
}

AdaptResult adapt(const Checkpoint& ckpt, const TaskDataset& dataset,
                  HeadMode head_mode, const TrainConfig& train_cfg) {
  train_cfg.validate();
  if (dataset.train.empty()) throw param_error("adapt: empty training split");
  if (!dataset.regression) {
    for (const auto& s : dataset.train)
      if (s.label < 0.0 || s.label != std::floor(s.label) ||
          static_cast<std::size_t>(s.label) >= dataset.num_classes)
        throw param_error("adapt: classification label " + std::to_string(s.label) +
                          " outside 0.." + std::to_string(dataset.num_classes - 1));
  }
  const bool frozen = train_cfg.mode == TrainConfig::Mode::kFrozenProbe;

  Model model(ckpt);
  AdaptResult result;
  result.backbone_hash_before = param_table_hash(ckpt.params);

  // token grids are fixed downstream: all channels, no permutation, no masking
  auto features_of = [&](const TaskSample& sample) {
    const Recording scaled = normalize(sample.rec);
    const PatchGrid grid = patchify(scaled);
    return model.encode(grid, dataset.montage, scaled.channel_names);
  };

  // frozen probing trains against cached features; the backbone never enters
  // the graph
  std::vector<ag::Tensor> cached_train, cached_eval;
  if (frozen) {
    for (const auto& s : dataset.train) {
      const ag::Tensor h = features_of(s);
      cached_train.push_back(ag::constant(h->shape, h->value));
    }
    for (const auto& s : dataset.eval) {
      const ag::Tensor h = features_of(s);
      cached_eval.push_back(ag::constant(h->shape, h->value));
    }
  }

  const std::size_t d = model.config().embed_dim();
  std::size_t tokens = 0;
  {
    const Recording scaled = normalize(dataset.train[0].rec);
    const PatchGrid grid = patchify(scaled);
    tokens = grid.channels * grid.seconds;
  }
  const std::size_t in_dim = head_mode == HeadMode::kPool ? d : tokens * d;
  const std::size_t out_dim = dataset.regression ? 1 : dataset.num_classes;
  HeadParams head = make_head(in_dim, out_dim, CounterRng::derive(train_cfg.seed, 0xADA));

  ParamList trainable;
  trainable.emplace_back("head.w", head.w);
  trainable.emplace_back("head.b", head.b);
  if (!frozen)
    for (const auto& [name, tensor] : sorted_params(model.params()))
      trainable.emplace_back(name, tensor);
  AdamWState state;

  const double inv_batch = 1.0 / static_cast<double>(train_cfg.batch_size);
  for (std::size_t step = 1; step <= train_cfg.steps; ++step) {
    const std::uint64_t step_seed = CounterRng::derive(train_cfg.seed, step);
    for (std::size_t b = 0; b < train_cfg.batch_size; ++b) {
      const std::size_t idx =
          CounterRng::derive(step_seed, b) % dataset.train.size();
      const ag::Tensor features =
          frozen ? cached_train[idx] : features_of(dataset.train[idx]);
      const ag::Tensor out = task_head_forward(features, head_mode, head.w, head.b);
      ag::Tensor loss;
      if (dataset.regression) {
        const ag::Tensor target =
            ag::constant({1, 1}, {dataset.train[idx].label});
        const ag::Tensor diff = ag::sub(out, target);
        loss = ag::mean_all(ag::mul(diff, diff));
      } else {
        loss = ag::cross_entropy(
            out, {static_cast<std::size_t>(dataset.train[idx].label)});
      }
      if (!std::isfinite(loss->value[0]))
        throw numeric_error("adapt: non-finite loss at step " + std::to_string(step));
      ag::backward(ag::scale(loss, inv_batch));
    }
    clip_gradients(trainable, train_cfg.clip_norm);
    adamw_step(trainable, state, train_cfg, train_cfg.lr_at(step));
    for (const auto& [name, tensor] : trainable) ag::zero_grad(tensor);
  }

  // eval-split metrics
  const std::vector<TaskSample>& eval_set =
      dataset.eval.empty() ? dataset.train : dataset.eval;
  std::vector<double> pred_values;
  std::vector<std::size_t> pred_classes, true_classes;
  for (std::size_t i = 0; i < eval_set.size(); ++i) {
    const ag::Tensor features = frozen && !dataset.eval.empty()
                                    ? cached_eval[i]
                                    : (frozen ? cached_train[i]
                                              : features_of(eval_set[i]));
    const ag::Tensor out = task_head_forward(features, head_mode, head.w, head.b);
    if (dataset.regression) {
      pred_values.push_back(out->value[0]);
    } else {
      std::size_t best = 0;
      for (std::size_t k = 1; k < out->size(); ++k)
        if (out->value[k] > out->value[best]) best = k;
      pred_classes.push_back(best);
      true_classes.push_back(static_cast<std::size_t>(eval_set[i].label));
    }
  }
  if (dataset.regression) {
    const std::vector<double> truths = collect_labels(eval_set);
    result.metrics["rmse"] = root_mean_squared_error(pred_values, truths);
    result.metrics["r2"] = r2_score(pred_values, truths);
    result.metrics["pearson"] = pearson_correlation(pred_values, truths);
  } else {
    result.metrics["balanced_accuracy"] =
        balanced_accuracy(pred_classes, true_classes, dataset.num_classes);
  }

  result.checkpoint = model.to_checkpoint();
  result.checkpoint.step = state.step;
  result.backbone_hash_after = param_table_hash(result.checkpoint.params);
  result.head_params.push_back({"head.w", head.w->shape, head.w->value});
  result.head_params.push_back({"head.b", head.b->shape, head.b->value});
  return result;
}

}  // namespace dbrn
