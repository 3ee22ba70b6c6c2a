#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gstds/rng.hpp"
#include "gstds/spectral.hpp"

namespace gstds {

enum class WeightsMode { inverse_ref_loss, abs_fiedler };

WeightsMode parse_weights_mode(std::string_view name);
std::string to_string(WeightsMode mode);

struct SelectionWeights {
  WeightsMode mode = WeightsMode::inverse_ref_loss;
  std::vector<double> raw;  // finite and > 0
  double epsilon = 1e-8;
};

struct SelectionCounts {
  size_t n = 0;          // max(1, floor(ratio * batch_size))
  size_t n_exploit = 0;  // ceil(n / 2)
  size_t n_explore = 0;  // n - n_exploit
};

SelectionCounts selection_count(double ratio, size_t batch_size);

SelectionWeights compute_weights_inverse_loss(std::span<const float> ref_losses,
                                              double epsilon = 1e-8);
SelectionWeights compute_weights_abs_fiedler(const FiedlerScores& scores,
                                             double epsilon = 1e-8);

// k distinct positions into `remainder`, drawn without replacement with
// probability proportional to weight. Keyed sampling: key_j = u_j^(1/w_j),
// take the top-k keys; matches sequential draw-and-renormalize inclusion
// order and is deterministic given the stream.
std::vector<size_t> explore_select(std::span<const size_t> remainder,
                                   std::span<const double> weights, size_t k,
                                   RngStream& rng);

struct SelectionResult {
  size_t batch_index = 0;
  double ratio_applied = 1.0;
  size_t n_selected = 0;
  std::vector<size_t> exploit;  // dataset indices, top-ranked by phi
  std::vector<size_t> explore;  // dataset indices, weighted random
  WeightsMode weights_mode = WeightsMode::inverse_ref_loss;
  bool lambda2_multiplicity_flag = false;
  uint64_t rng_stream_id = 0;
};

// Algorithm: exploit = top ceil(n/2) of the ranking, explore = weighted
// sample of floor(n/2) from the rest with weights renormalized there.
SelectionResult select_batch(std::span<const size_t> batch,
                             const FiedlerScores& scores,
                             const Ranking& ranking,
                             const SelectionWeights& weights, double ratio,
                             RngStream& rng, size_t batch_index = 0);

}  // namespace gstds
