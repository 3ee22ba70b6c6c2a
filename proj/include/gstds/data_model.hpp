#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace gstds {

/// Indexed corpus of feature vectors, labels and optional per-point
/// reference losses. Immutable after load; safe to share across threads.
struct FeatureSet {
  std::vector<uint64_t> ids;
  std::vector<float> features;  // row-major size() x dim
  std::vector<uint32_t> labels;
  std::vector<float> ref_losses;  // empty when absent
  size_t dim = 0;
  uint32_t class_count = 0;

  size_t size() const { return ids.size(); }
  bool has_ref_losses() const { return !ref_losses.empty(); }

  std::span<const float> row(size_t i) const {
    return {features.data() + i * dim, dim};
  }

  // Enforces: equal lengths, finite features, no zero rows, unique ids,
  // labels < class_count. Throws Error naming the offending row.
  void validate() const;
};

enum class FileFormat { binary, csv };

FeatureSet load_featureset(const std::filesystem::path& path, FileFormat format);
void save_featureset(const FeatureSet& fs, const std::filesystem::path& path,
                     FileFormat format);

struct SplitSpec {
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  uint64_t seed = 0;
};

struct Splits {
  FeatureSet train;
  FeatureSet val;
  FeatureSet test;
};

// Stratified split: per-class counts preserved within one sample,
// deterministic given the seed.
Splits split(const FeatureSet& fs, const SplitSpec& spec);

struct BatchPlan {
  std::vector<std::vector<size_t>> batches;
  size_t batch_size = 0;
  uint64_t seed = 0;

  size_t total_indices() const {
    size_t t = 0;
    for (const auto& b : batches) t += b.size();
    return t;
  }
};

BatchPlan partition_batches(size_t n, size_t batch_size, uint64_t seed);
BatchPlan partition_batches(const FeatureSet& fs, size_t batch_size,
                            uint64_t seed);

}  // namespace gstds
