#include "gstds/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gstds/errors.hpp"
#include "gstds/rng.hpp"

namespace gstds {

Method parse_method(std::string_view name) {
  if (name == "standard") return Method::standard;
  if (name == "gstds") return Method::gstds;
  if (name == "random_filter") return Method::random_filter;
  throw Error(ErrorCode::invalid_argument,
              "unknown method '" + std::string(name) + "'");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::standard: return "standard";
    case Method::gstds: return "gstds";
    case Method::random_filter: return "random_filter";
  }
  return "?";
}

namespace {

void check_dims(const std::vector<size_t>& dims) {
  if (dims.size() < 2)
    throw Error(ErrorCode::invalid_argument,
                "layer_dims needs at least input and output");
  for (size_t d : dims)
    if (d == 0)
      throw Error(ErrorCode::invalid_argument, "zero layer dimension");
}

}  // namespace

LearnerModel LearnerModel::zeros(std::vector<size_t> dims) {
  check_dims(dims);
  LearnerModel m;
  m.layer_dims = std::move(dims);
  for (size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
    m.weights.emplace_back(m.layer_dims[l], m.layer_dims[l + 1]);
    m.biases.emplace_back(m.layer_dims[l + 1], 0.0);
  }
  return m;
}

LearnerModel LearnerModel::he_init(std::vector<size_t> dims, uint64_t seed) {
  LearnerModel m = zeros(std::move(dims));
  RngStream rng = RngStream::derive(seed, 0x1217, 0);
  for (size_t l = 0; l < m.weights.size(); ++l) {
    double scale = std::sqrt(2.0 / static_cast<double>(m.layer_dims[l]));
    for (auto& w : m.weights[l].data) w = scale * rng.normal();
  }
  return m;
}

namespace {

struct ForwardState {
  // activations[0] is the input; activations[l+1] the output of layer l
  // (post-ReLU for hidden layers, softmax for the last).
  std::vector<std::vector<double>> activations;
  std::vector<std::vector<double>> preact;  // pre-activation per layer
};

ForwardState forward_pass(const LearnerModel& model, std::span<const float> x) {
  if (x.size() != model.input_dim())
    throw Error(ErrorCode::dimension_mismatch,
                "input dim " + std::to_string(x.size()) + " != model dim " +
                    std::to_string(model.input_dim()));
  ForwardState st;
  st.activations.emplace_back(x.begin(), x.end());
  size_t n_layers = model.weights.size();
  for (size_t l = 0; l < n_layers; ++l) {
    const Matrix& w = model.weights[l];
    const auto& in = st.activations.back();
    std::vector<double> z(w.cols);
    for (size_t j = 0; j < w.cols; ++j) z[j] = model.biases[l][j];
    for (size_t i = 0; i < w.rows; ++i) {
      double xi = in[i];
      if (xi == 0.0) continue;
      for (size_t j = 0; j < w.cols; ++j) z[j] += xi * w(i, j);
    }
    st.preact.push_back(z);
    std::vector<double> a(w.cols);
    if (l + 1 < n_layers) {
      for (size_t j = 0; j < w.cols; ++j) a[j] = std::max(z[j], 0.0);
    } else {
      double zmax = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (size_t j = 0; j < w.cols; ++j) {
        a[j] = std::exp(z[j] - zmax);
        sum += a[j];
      }
      for (auto& v : a) v /= sum;
    }
    st.activations.push_back(std::move(a));
  }
  return st;
}

}  // namespace

std::vector<double> forward_probs(const LearnerModel& model,
                                  std::span<const float> x) {
  return forward_pass(model, x).activations.back();
}

Gradients batch_gradients(const LearnerModel& model, const FeatureSet& fs,
                          std::span<const size_t> indices) {
  if (indices.empty())
    throw Error(ErrorCode::invalid_argument, "empty gradient batch");
  size_t n_layers = model.weights.size();
  Gradients g;
  for (size_t l = 0; l < n_layers; ++l) {
    g.weights.emplace_back(model.weights[l].rows, model.weights[l].cols);
    g.biases.emplace_back(model.biases[l].size(), 0.0);
  }
  double inv_n = 1.0 / static_cast<double>(indices.size());
  double loss_sum = 0.0;

  for (size_t idx : indices) {
    uint32_t label = fs.labels[idx];
    if (label >= model.output_dim())
      throw Error(ErrorCode::label_out_of_range,
                  "label " + std::to_string(label) + " exceeds model outputs");
    ForwardState st = forward_pass(model, fs.row(idx));
    const auto& probs = st.activations.back();
    loss_sum += -std::log(std::max(probs[label], 1e-12));

    // delta at the softmax layer
    std::vector<double> delta(probs);
    delta[label] -= 1.0;

    for (size_t l = n_layers; l-- > 0;) {
      const auto& in = st.activations[l];
      Matrix& gw = g.weights[l];
      for (size_t i = 0; i < gw.rows; ++i) {
        double xi = in[i];
        if (xi == 0.0) continue;
        for (size_t j = 0; j < gw.cols; ++j) gw(i, j) += inv_n * xi * delta[j];
      }
      for (size_t j = 0; j < gw.cols; ++j) g.biases[l][j] += inv_n * delta[j];
      if (l > 0) {
        const Matrix& w = model.weights[l];
        std::vector<double> prev(w.rows, 0.0);
        for (size_t i = 0; i < w.rows; ++i) {
          if (st.preact[l - 1][i] <= 0.0) continue;  // ReLU gate
          double acc = 0.0;
          for (size_t j = 0; j < w.cols; ++j) acc += w(i, j) * delta[j];
          prev[i] = acc;
        }
        delta = std::move(prev);
      }
    }
  }
  g.mean_loss = loss_sum * inv_n;
  return g;
}

void sgd_step(LearnerModel& model, const Gradients& grads, double lr) {
  for (size_t l = 0; l < model.weights.size(); ++l) {
    for (size_t k = 0; k < model.weights[l].data.size(); ++k)
      model.weights[l].data[k] -= lr * grads.weights[l].data[k];
    for (size_t j = 0; j < model.biases[l].size(); ++j)
      model.biases[l][j] -= lr * grads.biases[l][j];
  }
}

LearnerModel train_reference_probe(const FeatureSet& train, uint64_t seed,
                                   int iterations, double step) {
  (void)seed;  // zero init and full-batch descent leave nothing random
  if (train.size() == 0)
    throw Error(ErrorCode::invalid_argument, "empty training split");
  if (train.class_count < 2)
    throw Error(ErrorCode::invalid_argument,
                "reference probe needs at least 2 classes");
  bool multi_class = false;
  for (size_t i = 1; i < train.size(); ++i)
    if (train.labels[i] != train.labels[0]) {
      multi_class = true;
      break;
    }
  if (!multi_class)
    throw Error(ErrorCode::invalid_argument,
                "training split contains a single class");

  LearnerModel probe = LearnerModel::zeros(
      {train.dim, static_cast<size_t>(train.class_count)});
  std::vector<size_t> all(train.size());
  std::iota(all.begin(), all.end(), 0);
  for (int it = 0; it < iterations; ++it) {
    Gradients g = batch_gradients(probe, train, all);
    sgd_step(probe, g, step);
  }
  return probe;
}

std::vector<float> pointwise_loss(const LearnerModel& model,
                                  const FeatureSet& fs) {
  std::vector<float> out(fs.size());
  for (size_t i = 0; i < fs.size(); ++i) {
    uint32_t label = fs.labels[i];
    if (label >= model.output_dim())
      throw Error(ErrorCode::label_out_of_range,
                  "label " + std::to_string(label) + " at row " +
                      std::to_string(i) + " exceeds model outputs");
    auto probs = forward_probs(model, fs.row(i));
    out[i] = static_cast<float>(-std::log(std::max(probs[label], 1e-12)));
  }
  return out;
}

EvalResult evaluate(const LearnerModel& model, const FeatureSet& fs) {
  if (fs.size() == 0)
    throw Error(ErrorCode::invalid_argument, "cannot evaluate on empty set");
  size_t correct = 0;
  double loss_sum = 0.0;
  for (size_t i = 0; i < fs.size(); ++i) {
    auto probs = forward_probs(model, fs.row(i));
    size_t arg = 0;
    for (size_t c = 1; c < probs.size(); ++c)
      if (probs[c] > probs[arg]) arg = c;  // ties keep the lowest index
    if (arg == fs.labels[i]) ++correct;
    loss_sum += -std::log(std::max(probs[fs.labels[i]], 1e-12));
  }
  EvalResult r;
  r.accuracy = 100.0 * static_cast<double>(correct) /
               static_cast<double>(fs.size());
  r.mean_loss = loss_sum / static_cast<double>(fs.size());
  return r;
}

uint64_t flops_for(std::span<const size_t> layer_dims, uint64_t n_samples,
                   Pass pass) {
  if (layer_dims.size() < 2)
    throw Error(ErrorCode::invalid_argument, "layer_dims needs >= 2 entries");
  uint64_t forward = 0;
  for (size_t l = 0; l + 1 < layer_dims.size(); ++l)
    forward += 2ull * layer_dims[l] * layer_dims[l + 1];
  uint64_t per_sample = pass == Pass::forward ? forward : 3ull * forward;
  return per_sample * n_samples;
}

namespace {

double val_batch_loss(const LearnerModel& model, const FeatureSet& val,
                      std::span<const size_t> idx) {
  double sum = 0.0;
  for (size_t i : idx) {
    auto probs = forward_probs(model, val.row(i));
    sum += -std::log(std::max(probs[val.labels[i]], 1e-12));
  }
  return sum / static_cast<double>(idx.size());
}

}  // namespace

EpochOutcome train_epoch(LearnerModel& model, const BatchPlan& plan,
                         const FeatureSet& train, const Schedule& schedule,
                         const TrainConfig& config,
                         std::span<const float> ref_losses,
                         const FeatureSet& val, size_t epoch_index,
                         ReactiveContext* reactive,
                         uint64_t flops_so_far) {
  size_t m = plan.batches.size();
  if (!schedule.reactive && schedule.values.size() < (epoch_index + 1) * m)
    throw Error(ErrorCode::invalid_argument,
                "schedule exhausted at epoch " + std::to_string(epoch_index));
  if (schedule.reactive && reactive == nullptr)
    throw Error(ErrorCode::configuration,
                "reactive schedule needs a ReactiveContext");

  EpochOutcome out;
  out.metrics.epoch = epoch_index;
  double ratio_sum = 0.0;
  size_t batches_done = 0;

  for (size_t b = 0; b < m; ++b) {
    size_t g = epoch_index * m + b;
    const auto& batch = plan.batches[b];

    double ratio;
    if (config.method == Method::standard) {
      ratio = 1.0;
    } else if (schedule.reactive) {
      AimdFeedback fb = AimdFeedback::improved;
      if (reactive->has_prev) {
        double cur = val_batch_loss(model, val, reactive->val_batch);
        fb = cur > reactive->prev_loss ? AimdFeedback::degraded
                                       : AimdFeedback::improved;
        reactive->prev_loss = cur;
      } else {
        reactive->prev_loss = val_batch_loss(model, val, reactive->val_batch);
        reactive->has_prev = true;
      }
      ratio = aimd_step(reactive->state, fb);
    } else {
      ratio = schedule.values[g];
    }

    SelectionLogEntry entry;
    entry.epoch = epoch_index;
    entry.batch = b;
    entry.ratio = ratio;

    std::vector<size_t> selected;
    if (config.method == Method::standard) {
      selected.assign(batch.begin(), batch.end());
      entry.n = selected.size();
      entry.weights_mode = "none";
      entry.lambda2 = 0.0;
      for (size_t idx : selected) entry.exploit_ids.push_back(train.ids[idx]);
    } else if (config.method == Method::random_filter) {
      auto counts = selection_count(ratio, batch.size());
      RngStream rng = RngStream::derive(config.seed, epoch_index, b);
      std::vector<size_t> pool(batch.begin(), batch.end());
      rng.shuffle(pool);
      entry.n = counts.n;
      entry.weights_mode = "uniform";
      entry.lambda2 = 0.0;
      for (size_t j = 0; j < counts.n_exploit; ++j) {
        selected.push_back(pool[j]);
        entry.exploit_ids.push_back(train.ids[pool[j]]);
      }
      for (size_t j = counts.n_exploit; j < counts.n; ++j) {
        selected.push_back(pool[j]);
        entry.explore_ids.push_back(train.ids[pool[j]]);
      }
    } else {
      auto sim = cosine_similarity(train, batch,
                                   config.clamp_negative_similarity);
      auto lap = laplacian(sim);
      auto scores = fiedler_vector(lap);
      auto ranking = rank_descending(scores);

      SelectionWeights weights;
      if (config.weights_mode == WeightsMode::inverse_ref_loss) {
        if (ref_losses.empty())
          throw Error(ErrorCode::configuration,
                      "inverse_ref_loss weighting requires reference losses");
        std::vector<float> batch_losses(batch.size());
        for (size_t j = 0; j < batch.size(); ++j)
          batch_losses[j] = ref_losses[batch[j]];
        weights = compute_weights_inverse_loss(batch_losses, config.epsilon);
      } else {
        weights = compute_weights_abs_fiedler(scores, config.epsilon);
      }

      RngStream rng = RngStream::derive(config.seed, epoch_index, b);
      auto result =
          select_batch(batch, scores, ranking, weights, ratio, rng, b);
      entry.n = result.n_selected;
      entry.weights_mode = to_string(config.weights_mode);
      entry.lambda2 = scores.lambda2;
      for (size_t idx : result.exploit) {
        selected.push_back(idx);
        entry.exploit_ids.push_back(train.ids[idx]);
      }
      for (size_t idx : result.explore) {
        selected.push_back(idx);
        entry.explore_ids.push_back(train.ids[idx]);
      }
    }

    uint64_t batch_flops =
        flops_for(model.layer_dims, selected.size(), Pass::train);
    if (config.flops_budget &&
        flops_so_far + out.metrics.flops_this_epoch + batch_flops >
            *config.flops_budget) {
      out.halted = true;
      break;
    }

    Gradients grads = batch_gradients(model, train, selected);
    if (!std::isfinite(grads.mean_loss))
      throw Error(ErrorCode::divergence,
                  "non-finite training loss at epoch " +
                      std::to_string(epoch_index) + " batch " +
                      std::to_string(b));
    sgd_step(model, grads, config.learning_rate);

    out.metrics.samples_processed += selected.size();
    out.metrics.flops_this_epoch += batch_flops;
    ratio_sum += ratio;
    ++batches_done;
    out.log.push_back(std::move(entry));
  }

  if (batches_done > 0)
    out.metrics.mean_ratio_this_epoch =
        ratio_sum / static_cast<double>(batches_done);

  EvalResult tr = evaluate(model, train);
  EvalResult va = evaluate(model, val);
  out.metrics.train_acc = tr.accuracy;
  out.metrics.train_loss = tr.mean_loss;
  out.metrics.val_acc = va.accuracy;
  out.metrics.val_loss = va.mean_loss;
  return out;
}

}  // namespace gstds
