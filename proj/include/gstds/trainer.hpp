#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gstds/data_model.hpp"
#include "gstds/matrix.hpp"
#include "gstds/schedule.hpp"
#include "gstds/selection.hpp"

namespace gstds {

enum class Method { standard, gstds, random_filter };

Method parse_method(std::string_view name);
std::string to_string(Method method);

// Feature-space classifier: softmax output, ReLU hidden layers.
struct LearnerModel {
  std::vector<size_t> layer_dims;   // (d, C) or (d, h, C)
  std::vector<Matrix> weights;      // weights[l] is in x out
  std::vector<std::vector<double>> biases;

  static LearnerModel zeros(std::vector<size_t> dims);
  static LearnerModel he_init(std::vector<size_t> dims, uint64_t seed);

  size_t input_dim() const { return layer_dims.front(); }
  size_t output_dim() const { return layer_dims.back(); }
};

// Softmax class probabilities for one sample.
std::vector<double> forward_probs(const LearnerModel& model,
                                  std::span<const float> x);

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  double mean_loss = 0.0;
};

// Mean cross-entropy gradient over the listed samples.
Gradients batch_gradients(const LearnerModel& model, const FeatureSet& fs,
                          std::span<const size_t> indices);

void sgd_step(LearnerModel& model, const Gradients& grads, double lr);

// Frozen linear probe: zero-initialized softmax classifier fit by full-batch
// gradient descent. Supplies point-wise reference losses.
LearnerModel train_reference_probe(const FeatureSet& train, uint64_t seed,
                                   int iterations = 200, double step = 0.1);

// Per-sample cross-entropy -ln p(label), probabilities floored at 1e-12.
std::vector<float> pointwise_loss(const LearnerModel& model,
                                  const FeatureSet& fs);

struct EvalResult {
  double accuracy = 0.0;  // percent
  double mean_loss = 0.0;
};

// Argmax ties break to the lowest class index.
EvalResult evaluate(const LearnerModel& model, const FeatureSet& fs);

enum class Pass { forward, train };

// forward = sum over layers of 2 * in * out per sample; train = 3x forward
// (backward counted as twice the forward). Spectral scoring and the frozen
// reference model are excluded from all totals.
uint64_t flops_for(std::span<const size_t> layer_dims, uint64_t n_samples,
                   Pass pass);

inline constexpr const char* kFlopsConvention =
    "forward=2*in*out per layer per sample; train=3x forward "
    "(backward=2x forward); reference-model scoring and eigensolves excluded";

struct TrainConfig {
  double learning_rate = 0.001;
  size_t batch_size = 64;
  size_t n_epochs = 25;
  uint64_t seed = 0;
  Policy policy = Policy::sigmoid;
  ScheduleParams sched_params;
  double mean_target = 0.3;
  double max_target = 0.88;
  double min_target = 0.18;
  double steepness_scale = 30.0;
  WeightsMode weights_mode = WeightsMode::inverse_ref_loss;
  double epsilon = 1e-8;
  bool clamp_negative_similarity = false;
  Method method = Method::gstds;
  std::optional<uint64_t> flops_budget;
  std::vector<size_t> hidden_dims;  // empty: linear learner
};

struct EpochMetrics {
  size_t epoch = 0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  uint64_t samples_processed = 0;
  uint64_t flops_this_epoch = 0;
  double mean_ratio_this_epoch = 0.0;
};

struct SelectionLogEntry {
  size_t epoch = 0;
  size_t batch = 0;
  double ratio = 1.0;
  size_t n = 0;
  std::vector<uint64_t> exploit_ids;
  std::vector<uint64_t> explore_ids;
  std::string weights_mode;
  double lambda2 = 0.0;
};

// Sequential state for reactive (AIMD) schedules: feedback is the learner's
// loss on a fixed validation batch, "degraded" = strictly increased.
struct ReactiveContext {
  AimdState state;
  double prev_loss = -1.0;
  bool has_prev = false;
  std::vector<size_t> val_batch;
};

struct EpochOutcome {
  EpochMetrics metrics;
  std::vector<SelectionLogEntry> log;
  bool halted = false;  // FLOPs budget exhausted mid-epoch
};

EpochOutcome train_epoch(LearnerModel& model, const BatchPlan& plan,
                         const FeatureSet& train, const Schedule& schedule,
                         const TrainConfig& config,
                         std::span<const float> ref_losses,
                         const FeatureSet& val, size_t epoch_index,
                         ReactiveContext* reactive,
                         uint64_t flops_so_far);

}  // namespace gstds
