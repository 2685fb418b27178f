#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dbrn/autodiff.hpp"
#include "dbrn/model.hpp"
#include "dbrn/neurodyn.hpp"
#include "dbrn/patching.hpp"
#include "dbrn/signal_io.hpp"

namespace dbrn {

struct TrainConfig {
  double lr = 5e-4;
  double weight_decay = 5e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;
  double lambda_mer = 1.0;
  double lambda_nsp = 1.0;
  std::size_t batch_size = 16;
  std::size_t steps = 200;
  enum class Schedule { kConstant, kCosine };
  Schedule schedule = Schedule::kConstant;
  enum class Mode { kPretrain, kFinetune, kFrozenProbe };
  Mode mode = Mode::kPretrain;
  std::uint64_t seed = 0;
  std::size_t c_min = 1;  // channel-subset lower bound during pretraining

  void validate() const;
  double lr_at(std::size_t step) const;  // 1-based
};

// Masked-patch Huber reconstruction loss, normalized by |M| * P.
ag::Tensor mer_loss(const ag::Tensor& pred, const PatchGrid& clean,
                    const std::vector<std::uint8_t>& mask, double beta = 1.0);

// Huber loss over every (c, s, k) cell, masked and unmasked alike.
ag::Tensor nsp_loss(const ag::Tensor& pred, const NspTargets& targets,
                    double beta = 1.0);

using ParamList = std::vector<std::pair<std::string, ag::Tensor>>;

ParamList sorted_params(const std::map<std::string, ag::Tensor>& params);

double global_grad_norm(const ParamList& params);
void clip_gradients(const ParamList& params, double max_norm);

struct AdamWState {
  std::vector<std::vector<double>> moment1, moment2;  // aligned with the list
  std::uint64_t step = 0;
};

// Decoupled weight decay applied before the adaptive update. Non-finite
// gradients abort with the parameter name.
void adamw_step(const ParamList& params, AdamWState& state,
                const TrainConfig& cfg, double lr_now);

struct TraceRow {
  std::size_t step = 0;
  double mer = 0.0;
  double nsp = 0.0;
  double total = 0.0;
};

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);

struct PretrainResult {
  Checkpoint checkpoint;
  std::vector<TraceRow> trace;
};

// Dual-objective pretraining over a synthetic corpus: per step, draw a batch
// with replacement, channel-reorganize, normalize, patchify, assemble clean
// targets, mask, forward, combined loss, backward, clip, step. Deterministic
// given the seeds.
PretrainResult pretrain(const std::vector<Recording>& corpus,
                        const Montage& montage, const ModelConfig& model_cfg,
                        const TrainConfig& train_cfg);

enum class HeadMode { kPool, kFlatten };

// pool: token mean then affine; flatten: concatenated tokens then affine.
// features is one sample's [N, D] token matrix; returns [1, out_dim].
ag::Tensor task_head_forward(const ag::Tensor& features, HeadMode mode,
                             const ag::Tensor& w, const ag::Tensor& b);

struct TaskSample {
  Recording rec;
  double label = 0.0;  // class index for classification
};

struct TaskDataset {
  std::vector<TaskSample> train, eval;
  Montage montage;
  bool regression = false;
  std::size_t num_classes = 2;
};

struct AdaptResult {
  Checkpoint checkpoint;                  // backbone after adaptation
  std::vector<ParamEntry> head_params;    // task head, kept separate
  std::map<std::string, double> metrics;  // computed on the eval split
  std::uint64_t backbone_hash_before = 0;
  std::uint64_t backbone_hash_after = 0;
};

// Frozen probing trains only the head on cached backbone features; fine-tuning
// updates everything. Classification uses cross entropy and reports balanced
// accuracy; regression uses MSE and reports rmse / r2 / pearson.
AdaptResult adapt(const Checkpoint& ckpt, const TaskDataset& dataset,
                  HeadMode head_mode, const TrainConfig& train_cfg);

// population-statistics metrics
double pearson_correlation(const std::vector<double>& a, const std::vector<double>& b);
double r2_score(const std::vector<double>& pred, const std::vector<double>& target);
double root_mean_squared_error(const std::vector<double>& pred,
                               const std::vector<double>& target);
double balanced_accuracy(const std::vector<std::size_t>& pred,
                         const std::vector<std::size_t>& truth,
                         std::size_t num_classes);

}  // namespace dbrn
