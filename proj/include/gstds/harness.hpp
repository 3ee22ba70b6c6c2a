#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gstds/config.hpp"
#include "gstds/data_model.hpp"
#include "gstds/trainer.hpp"

namespace gstds {

inline constexpr const char* kToolVersion = "1.0.0";

// Desk-scale many-class benchmark: Gaussian clusters with unit variance,
// class means on disjoint coordinate pairs so clusters stay separable.
struct SynthParams {
  uint32_t classes = 20;
  size_t per_class = 300;
  size_t dim = 64;
  double separation = 3.0;
  uint64_t seed = 0;
};

FeatureSet generate_synthetic(const SynthParams& params);

enum class Regime { fixed_epochs, fixed_flops };

Regime parse_regime(std::string_view name);
std::string to_string(Regime regime);

struct ExperimentConfig {
  std::string data_path;
  FileFormat data_format = FileFormat::binary;
  bool use_synth = true;
  SynthParams synth;
  double train_fraction = 2.0 / 3.0;
  double val_fraction = 1.0 / 6.0;
  double test_fraction = 1.0 / 6.0;
  TrainConfig train;
  std::vector<Method> methods = {Method::standard, Method::gstds,
                                 Method::random_filter};
  Regime regime = Regime::fixed_epochs;
  std::vector<uint64_t> seeds = {0};
  std::optional<uint64_t> flops_budget;
  std::string out_dir = ".";
  bool with_projection = false;
  ConfigMap raw;  // config echo for provenance
};

ExperimentConfig experiment_config_from(const ConfigMap& cfg);

struct RunInputs {
  Splits splits;
  BatchPlan plan;
  std::vector<float> ref_losses;
  uint64_t eval_set_hash = 0;
};

// Loads (or synthesizes) data, splits, batches, and fits the reference
// probe once; every method for this seed shares the result.
RunInputs prepare_inputs(const ExperimentConfig& cfg, uint64_t seed);

struct RunReport {
  Method method = Method::standard;
  uint64_t seed = 0;
  std::vector<EpochMetrics> epochs;
  double final_train_acc = 0, final_val_acc = 0, final_test_acc = 0;
  double final_train_loss = 0, final_val_loss = 0, final_test_loss = 0;
  uint64_t total_flops = 0;
  double data_usage = 0;  // mean realized ratio over the run
  std::vector<SelectionLogEntry> selection_log;
  uint64_t eval_set_hash = 0;
  std::string flops_convention = kFlopsConvention;
  std::string selection_log_path;
};

RunReport run_experiment(const ExperimentConfig& cfg, Method method,
                         uint64_t seed, const RunInputs& inputs,
                         std::optional<uint64_t> flops_budget);
RunReport run_experiment(const ExperimentConfig& cfg, Method method,
                         uint64_t seed);

struct Aggregate {
  double mean = 0;
  double stddev = 0;
};

struct MethodSummary {
  std::vector<RunReport> runs;  // one per seed
  Aggregate test_acc, val_acc, train_acc, test_loss;
  Aggregate total_flops, data_usage;
};

struct ComparisonReport {
  std::vector<std::pair<Method, MethodSummary>> methods;
  Regime regime = Regime::fixed_epochs;
  uint64_t budget = 0;  // epochs or FLOPs, depending on regime
  std::vector<uint64_t> seeds;
};

ComparisonReport run_comparison(const ExperimentConfig& cfg);

struct ClassFrequency {
  struct Entry {
    uint64_t selection_count = 0;
    uint64_t exposure_count = 0;
    double frequency = 0;
    // Mean ratio of batches in which the label was selected; per-label
    // reading of the per-batch schedule.
    double mean_selected_ratio = 0;
  };
  std::map<uint32_t, Entry> by_label;
};

ClassFrequency selection_frequency_by_class(
    const std::vector<SelectionLogEntry>& log, const BatchPlan& plan,
    const FeatureSet& train);

uint64_t hash_featureset(const FeatureSet& fs);

enum class ReportFormat { json, csv };

void export_report(const ComparisonReport& report,
                   const ExperimentConfig& cfg,
                   const std::filesystem::path& path, ReportFormat format);
void write_metrics_csv(const ComparisonReport& report,
                       const std::filesystem::path& path);
void write_selections_jsonl(const ComparisonReport& report,
                            const std::filesystem::path& path);

// Top-2 principal components (power iteration, tol 1e-9) of the features of
// samples selected at least once; rows: id,label,selection_count,pc1,pc2.
void write_projections_csv(const ComparisonReport& report,
                           const FeatureSet& full,
                           const std::filesystem::path& path);

struct Pca2 {
  std::vector<double> pc1;  // unit vectors, length d
  std::vector<double> pc2;
  std::vector<double> center;
};

Pca2 top2_principal_components(const Matrix& rows, double tol = 1e-9);

}  // namespace gstds
