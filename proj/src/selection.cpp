#include "gstds/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gstds/errors.hpp"

namespace gstds {

WeightsMode parse_weights_mode(std::string_view name) {
  if (name == "inverse_ref_loss") return WeightsMode::inverse_ref_loss;
  if (name == "abs_fiedler") return WeightsMode::abs_fiedler;
  throw Error(ErrorCode::invalid_argument,
              "unknown weights mode '" + std::string(name) + "'");
}

std::string to_string(WeightsMode mode) {
  return mode == WeightsMode::inverse_ref_loss ? "inverse_ref_loss"
                                               : "abs_fiedler";
}

SelectionCounts selection_count(double ratio, size_t batch_size) {
  if (!(ratio > 0.0 && ratio <= 1.0))
    throw Error(ErrorCode::invalid_argument, "ratio must lie in (0, 1]");
  if (batch_size == 0)
    throw Error(ErrorCode::invalid_argument, "batch_size must be >= 1");
  SelectionCounts c;
  c.n = static_cast<size_t>(
      std::floor(ratio * static_cast<double>(batch_size)));
  if (c.n == 0) c.n = 1;  // every batch contributes at least one sample
  c.n_exploit = (c.n + 1) / 2;
  c.n_explore = c.n - c.n_exploit;
  return c;
}

SelectionWeights compute_weights_inverse_loss(std::span<const float> ref_losses,
                                              double epsilon) {
  if (ref_losses.empty())
    throw Error(ErrorCode::configuration,
                "inverse_ref_loss weighting requires reference losses");
  SelectionWeights w;
  w.mode = WeightsMode::inverse_ref_loss;
  w.epsilon = epsilon;
  w.raw.reserve(ref_losses.size());
  for (float l : ref_losses) {
    if (!(l >= 0.0f))
      throw Error(ErrorCode::invalid_argument,
                  "reference losses must be nonnegative");
    w.raw.push_back(1.0 / (static_cast<double>(l) + epsilon));
  }
  return w;
}

SelectionWeights compute_weights_abs_fiedler(const FiedlerScores& scores,
                                             double epsilon) {
  SelectionWeights w;
  w.mode = WeightsMode::abs_fiedler;
  w.epsilon = epsilon;
  w.raw.reserve(scores.phi.size());
  // epsilon keeps zero entries sampleable
  for (double p : scores.phi) w.raw.push_back(std::abs(p) + epsilon);
  return w;
}

std::vector<size_t> explore_select(std::span<const size_t> remainder,
                                   std::span<const double> weights, size_t k,
                                   RngStream& rng) {
  if (weights.size() != remainder.size())
    throw Error(ErrorCode::invalid_argument,
                "weights must cover exactly the remainder");
  if (k > remainder.size())
    throw Error(ErrorCode::invalid_argument,
                "cannot draw " + std::to_string(k) + " from " +
                    std::to_string(remainder.size()));
  if (k == 0) return {};

  std::vector<std::pair<double, size_t>> keyed(remainder.size());
  for (size_t j = 0; j < remainder.size(); ++j) {
    double u = rng.uniform();
    keyed[j] = {std::pow(u, 1.0 / weights[j]), j};
  }
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) {
                     if (a.first != b.first) return a.first > b.first;
                     return a.second < b.second;
                   });
  std::vector<size_t> out(k);
  for (size_t j = 0; j < k; ++j) out[j] = remainder[keyed[j].second];
  return out;
}

SelectionResult select_batch(std::span<const size_t> batch,
                             const FiedlerScores& scores,
                             const Ranking& ranking,
                             const SelectionWeights& weights, double ratio,
                             RngStream& rng, size_t batch_index) {
  size_t n = batch.size();
  if (scores.phi.size() != n || ranking.order.size() != n ||
      weights.raw.size() != n)
    throw Error(ErrorCode::dimension_mismatch,
                "phi, ranking and weights must all match the batch size");

  auto counts = selection_count(ratio, n);

  SelectionResult result;
  result.batch_index = batch_index;
  result.ratio_applied = ratio;
  result.n_selected = counts.n;
  result.weights_mode = weights.mode;
  result.lambda2_multiplicity_flag = scores.lambda2_multiple;
  result.rng_stream_id = rng.stream_id();

  std::vector<bool> taken(n, false);
  result.exploit.reserve(counts.n_exploit);
  for (size_t j = 0; j < counts.n_exploit; ++j) {
    size_t pos = ranking.order[j];
    taken[pos] = true;
    result.exploit.push_back(batch[pos]);
  }

  if (counts.n_explore > 0) {
    std::vector<size_t> remainder_pos;
    std::vector<double> remainder_w;
    remainder_pos.reserve(n - counts.n_exploit);
    for (size_t pos = 0; pos < n; ++pos) {
      if (!taken[pos]) {
        remainder_pos.push_back(pos);
        remainder_w.push_back(weights.raw[pos]);
      }
    }
    auto picked = explore_select(remainder_pos, remainder_w, counts.n_explore,
                                 rng);
    result.explore.reserve(picked.size());
    for (size_t pos : picked) result.explore.push_back(batch[pos]);
  }
  return result;
}

}  // namespace gstds
