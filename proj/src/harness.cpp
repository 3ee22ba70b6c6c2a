#include "gstds/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <thread>

#include <json.hpp>

#include "gstds/errors.hpp"
#include "gstds/rng.hpp"
#include "gstds/spectral.hpp"

namespace gstds {

using ordered_json = nlohmann::ordered_json;

FeatureSet generate_synthetic(const SynthParams& params) {
  if (params.classes < 2)
    throw Error(ErrorCode::invalid_argument, "need at least 2 classes");
  if (params.per_class < 1)
    throw Error(ErrorCode::invalid_argument, "need at least 1 sample/class");
  if (params.dim < 1)
    throw Error(ErrorCode::invalid_argument, "need dim >= 1");

  FeatureSet fs;
  fs.dim = params.dim;
  fs.class_count = params.classes;
  size_t n = static_cast<size_t>(params.classes) * params.per_class;
  fs.ids.reserve(n);
  fs.labels.reserve(n);
  fs.features.reserve(n * params.dim);

  RngStream rng = RngStream::derive(params.seed, 0x5717, 0);
  uint64_t next_id = 0;
  for (uint32_t c = 0; c < params.classes; ++c) {
    // class mean occupies a dedicated coordinate pair (wrapping when
    // 2*classes exceeds dim), value = separation in each
    size_t c0 = (2 * static_cast<size_t>(c)) % params.dim;
    size_t c1 = (2 * static_cast<size_t>(c) + 1) % params.dim;
    for (size_t s = 0; s < params.per_class; ++s) {
      fs.ids.push_back(next_id++);
      fs.labels.push_back(c);
      for (size_t j = 0; j < params.dim; ++j) {
        double mean = (j == c0 || j == c1) ? params.separation : 0.0;
        fs.features.push_back(static_cast<float>(mean + rng.normal()));
      }
    }
  }
  fs.validate();
  return fs;
}

Regime parse_regime(std::string_view name) {
  if (name == "fixed_epochs") return Regime::fixed_epochs;
  if (name == "fixed_flops") return Regime::fixed_flops;
  throw Error(ErrorCode::invalid_argument,
              "unknown regime '" + std::string(name) + "'");
}

std::string to_string(Regime regime) {
  return regime == Regime::fixed_epochs ? "fixed_epochs" : "fixed_flops";
}

ExperimentConfig experiment_config_from(const ConfigMap& cfg) {
  ExperimentConfig out;
  out.raw = cfg;

  out.data_path = cfg.get("data.path", "");
  std::string fmt = cfg.get("data.format", "binary");
  if (fmt == "binary")
    out.data_format = FileFormat::binary;
  else if (fmt == "csv")
    out.data_format = FileFormat::csv;
  else
    throw Error(ErrorCode::configuration, "data.format must be binary|csv");
  out.use_synth = cfg.get_bool("data.synthetic", out.data_path.empty());
  out.synth.classes =
      static_cast<uint32_t>(cfg.get_u64("data.classes", out.synth.classes));
  out.synth.per_class = cfg.get_u64("data.per_class", out.synth.per_class);
  out.synth.dim = cfg.get_u64("data.dim", out.synth.dim);
  out.synth.separation =
      cfg.get_double("data.separation", out.synth.separation);
  out.train_fraction = cfg.get_double("data.train_fraction", out.train_fraction);
  out.val_fraction = cfg.get_double("data.val_fraction", out.val_fraction);
  out.test_fraction = cfg.get_double("data.test_fraction", out.test_fraction);

  TrainConfig& t = out.train;
  t.learning_rate = cfg.get_double("train.lr", t.learning_rate);
  t.batch_size = cfg.get_u64("train.batch_size", t.batch_size);
  t.n_epochs = cfg.get_u64("train.epochs", t.n_epochs);
  t.seed = cfg.get_u64("train.seed", t.seed);
  for (const auto& h : cfg.get_list("train.hidden"))
    t.hidden_dims.push_back(std::stoull(h));

  t.policy = parse_policy(cfg.get("schedule.policy", to_string(t.policy)));
  t.mean_target = cfg.get_double("schedule.mean_target", t.mean_target);
  t.max_target = cfg.get_double("schedule.max_target", t.max_target);
  t.min_target = cfg.get_double("schedule.min_target", t.min_target);
  t.steepness_scale =
      cfg.get_double("schedule.steepness_scale", t.steepness_scale);
  ScheduleParams& sp = t.sched_params;
  sp.constant_value = cfg.get_double("schedule.constant", sp.constant_value);
  sp.r_min = cfg.get_double("schedule.r_min", t.min_target);
  sp.r_max = cfg.get_double("schedule.r_max", t.max_target);
  sp.sinusoid_cycles = cfg.get_double("schedule.cycles", sp.sinusoid_cycles);
  sp.sinc_width = cfg.get_double("schedule.sinc_width", sp.sinc_width);
  sp.gamma_shape = cfg.get_double("schedule.gamma_shape", sp.gamma_shape);
  sp.aimd.delta_add = cfg.get_double("schedule.aimd.delta_add",
                                     sp.aimd.delta_add);
  sp.aimd.beta_mult = cfg.get_double("schedule.aimd.beta_mult",
                                     sp.aimd.beta_mult);
  sp.aimd.streak_limit = static_cast<int>(
      cfg.get_u64("schedule.aimd.streak_limit", sp.aimd.streak_limit));
  sp.aimd.r_min = sp.r_min;
  sp.aimd.r_max = sp.r_max;

  t.weights_mode = parse_weights_mode(
      cfg.get("selection.weights_mode", to_string(t.weights_mode)));
  t.epsilon = cfg.get_double("selection.epsilon", t.epsilon);
  t.clamp_negative_similarity = cfg.get_bool(
      "selection.clamp_negative_similarity", t.clamp_negative_similarity);

  out.methods.clear();
  auto methods = cfg.get_list("harness.methods");
  if (methods.empty())
    out.methods = {Method::standard, Method::gstds, Method::random_filter};
  else
    for (const auto& m : methods) out.methods.push_back(parse_method(m));
  out.regime = parse_regime(cfg.get("harness.regime", to_string(out.regime)));
  auto seeds = cfg.get_list("harness.seeds");
  if (!seeds.empty()) {
    out.seeds.clear();
    for (const auto& s : seeds) out.seeds.push_back(std::stoull(s));
  }
  if (cfg.has("harness.flops_budget"))
    out.flops_budget = cfg.get_u64("harness.flops_budget", 0);
  out.out_dir = cfg.get("harness.out_dir", out.out_dir);
  return out;
}

uint64_t hash_featureset(const FeatureSet& fs) {
  uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&](const void* p, size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ull;
    }
  };
  feed(fs.features.data(), fs.features.size() * sizeof(float));
  feed(fs.labels.data(), fs.labels.size() * sizeof(uint32_t));
  feed(fs.ids.data(), fs.ids.size() * sizeof(uint64_t));
  return h;
}

RunInputs prepare_inputs(const ExperimentConfig& cfg, uint64_t seed) {
  FeatureSet full;
  if (cfg.use_synth) {
    SynthParams sp = cfg.synth;
    sp.seed = seed;
    full = generate_synthetic(sp);
  } else {
    full = load_featureset(cfg.data_path, cfg.data_format);
  }

  SplitSpec spec{cfg.train_fraction, cfg.val_fraction, cfg.test_fraction,
                 seed};
  RunInputs inputs;
  inputs.splits = split(full, spec);
  inputs.plan =
      partition_batches(inputs.splits.train, cfg.train.batch_size, seed);
  inputs.eval_set_hash = hash_featureset(inputs.splits.test);

  if (inputs.splits.train.has_ref_losses()) {
    inputs.ref_losses = inputs.splits.train.ref_losses;
  } else {
    LearnerModel probe = train_reference_probe(inputs.splits.train, seed);
    inputs.ref_losses = pointwise_loss(probe, inputs.splits.train);
  }
  return inputs;
}

namespace {

Schedule schedule_for(const ExperimentConfig& cfg, Method method,
                      size_t m_batches) {
  const TrainConfig& t = cfg.train;
  size_t total = t.n_epochs * m_batches;
  ScheduleParams params = t.sched_params;
  if (method == Method::standard) {
    params.constant_value = 1.0;
    return build_schedule(Policy::constant, params, t.n_epochs, m_batches);
  }
  if (t.policy == Policy::sigmoid && params.sigmoid.k == 0.0) {
    params.sigmoid = calibrate_sigmoid(t.mean_target, t.max_target,
                                       t.min_target, total,
                                       t.steepness_scale);
  }
  return build_schedule(t.policy, params, t.n_epochs, m_batches);
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& cfg, Method method,
                         uint64_t seed, const RunInputs& inputs,
                         std::optional<uint64_t> flops_budget) {
  TrainConfig tconf = cfg.train;
  tconf.method = method;
  tconf.seed = seed;
  tconf.flops_budget = flops_budget;
  if (flops_budget && *flops_budget == 0)
    throw Error(ErrorCode::invalid_argument, "FLOPs budget must be positive");

  const FeatureSet& train = inputs.splits.train;
  size_t m = inputs.plan.batches.size();
  Schedule schedule = schedule_for(cfg, method, m);

  std::vector<size_t> dims;
  dims.push_back(train.dim);
  for (size_t h : tconf.hidden_dims) dims.push_back(h);
  dims.push_back(train.class_count);
  LearnerModel model = tconf.hidden_dims.empty()
                           ? LearnerModel::zeros(dims)
                           : LearnerModel::he_init(dims, seed);

  ReactiveContext reactive;
  ReactiveContext* reactive_ptr = nullptr;
  if (schedule.reactive && method != Method::standard) {
    reactive.state.params = schedule.params.aimd;
    reactive.state.ratio = schedule.params.aimd.r_min;
    size_t nval = std::min(tconf.batch_size, inputs.splits.val.size());
    for (size_t i = 0; i < nval; ++i) reactive.val_batch.push_back(i);
    reactive_ptr = &reactive;
  }

  RunReport report;
  report.method = method;
  report.seed = seed;
  report.eval_set_hash = inputs.eval_set_hash;

  uint64_t exposures = 0;
  uint64_t selected_total = 0;
  for (size_t epoch = 0; epoch < tconf.n_epochs; ++epoch) {
    EpochOutcome out = train_epoch(model, inputs.plan, train, schedule, tconf,
                                   inputs.ref_losses, inputs.splits.val,
                                   epoch, reactive_ptr, report.total_flops);
    report.total_flops += out.metrics.flops_this_epoch;
    for (const auto& entry : out.log) {
      exposures += inputs.plan.batches[entry.batch].size();
      selected_total += entry.n;
    }
    report.epochs.push_back(out.metrics);
    report.selection_log.insert(report.selection_log.end(),
                                std::make_move_iterator(out.log.begin()),
                                std::make_move_iterator(out.log.end()));
    if (out.halted) break;
  }

  report.data_usage = exposures == 0
                          ? 0.0
                          : static_cast<double>(selected_total) /
                                static_cast<double>(exposures);

  EvalResult tr = evaluate(model, inputs.splits.train);
  EvalResult va = evaluate(model, inputs.splits.val);
  EvalResult te = evaluate(model, inputs.splits.test);
  report.final_train_acc = tr.accuracy;
  report.final_train_loss = tr.mean_loss;
  report.final_val_acc = va.accuracy;
  report.final_val_loss = va.mean_loss;
  report.final_test_acc = te.accuracy;
  report.final_test_loss = te.mean_loss;
  return report;
}

RunReport run_experiment(const ExperimentConfig& cfg, Method method,
                         uint64_t seed) {
  RunInputs inputs = prepare_inputs(cfg, seed);
  return run_experiment(cfg, method, seed, inputs, cfg.flops_budget);
}

namespace {

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  if (values.empty()) return a;
  double n = static_cast<double>(values.size());
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - a.mean) * (v - a.mean);
  a.stddev = values.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  return a;
}

MethodSummary summarize(std::vector<RunReport> runs) {
  MethodSummary s;
  std::vector<double> test_acc, val_acc, train_acc, test_loss, flops, usage;
  for (const auto& r : runs) {
    test_acc.push_back(r.final_test_acc);
    val_acc.push_back(r.final_val_acc);
    train_acc.push_back(r.final_train_acc);
    test_loss.push_back(r.final_test_loss);
    flops.push_back(static_cast<double>(r.total_flops));
    usage.push_back(r.data_usage);
  }
  s.test_acc = aggregate(test_acc);
  s.val_acc = aggregate(val_acc);
  s.train_acc = aggregate(train_acc);
  s.test_loss = aggregate(test_loss);
  s.total_flops = aggregate(flops);
  s.data_usage = aggregate(usage);
  s.runs = std::move(runs);
  return s;
}

size_t worker_count() {
  const char* env = std::getenv("GSTDS_THREADS");
  size_t n = 0;
  if (env != nullptr) {
    try {
      n = std::stoull(env);
    } catch (const std::exception&) {
      n = 0;
    }
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

template <class Fn>
void parallel_for(size_t count, Fn&& fn) {
  size_t workers = std::min(worker_count(), count);
  if (workers <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (size_t i = w; i < count; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

ComparisonReport run_comparison(const ExperimentConfig& cfg) {
  if (cfg.methods.size() < 2)
    throw Error(ErrorCode::invalid_argument,
                "comparison needs at least 2 methods");
  if (cfg.seeds.empty())
    throw Error(ErrorCode::invalid_argument, "comparison needs >= 1 seed");

  size_t n_seeds = cfg.seeds.size();
  size_t n_methods = cfg.methods.size();

  std::vector<RunInputs> inputs(n_seeds);
  parallel_for(n_seeds,
               [&](size_t s) { inputs[s] = prepare_inputs(cfg, cfg.seeds[s]); });

  for (size_t s = 1; s < n_seeds; ++s)
    if (inputs[s].splits.train.dim != inputs[0].splits.train.dim ||
        inputs[s].splits.train.class_count !=
            inputs[0].splits.train.class_count)
      throw Error(ErrorCode::invalid_argument,
                  "inconsistent data across seeds");

  // runs[m][s]
  std::vector<std::vector<RunReport>> runs(n_methods,
                                           std::vector<RunReport>(n_seeds));
  auto run_all = [&](std::optional<uint64_t> budget) {
    parallel_for(n_methods * n_seeds, [&](size_t i) {
      size_t m = i / n_seeds;
      size_t s = i % n_seeds;
      runs[m][s] = run_experiment(cfg, cfg.methods[m], cfg.seeds[s],
                                  inputs[s], budget);
    });
  };

  ComparisonReport report;
  report.regime = cfg.regime;
  report.seeds = cfg.seeds;

  if (cfg.regime == Regime::fixed_epochs) {
    run_all(cfg.flops_budget);
    report.budget = cfg.train.n_epochs;
  } else {
    uint64_t budget;
    if (cfg.flops_budget) {
      budget = *cfg.flops_budget;
    } else {
      run_all(std::nullopt);  // reference runs at fixed epochs
      budget = UINT64_MAX;
      for (const auto& per_method : runs)
        for (const auto& r : per_method)
          budget = std::min(budget, r.total_flops);
    }
    if (budget == 0)
      throw Error(ErrorCode::invalid_argument, "zero FLOPs budget");
    run_all(budget);
    report.budget = budget;
  }

  for (size_t m = 0; m < n_methods; ++m)
    report.methods.emplace_back(cfg.methods[m],
                                summarize(std::move(runs[m])));
  return report;
}

ClassFrequency selection_frequency_by_class(
    const std::vector<SelectionLogEntry>& log, const BatchPlan& plan,
    const FeatureSet& train) {
  if (log.empty())
    throw Error(ErrorCode::invalid_argument, "empty selection log");
  std::map<uint64_t, uint32_t> label_of;
  for (size_t i = 0; i < train.size(); ++i)
    label_of[train.ids[i]] = train.labels[i];

  ClassFrequency freq;
  std::map<uint32_t, double> ratio_sum;
  std::map<uint32_t, uint64_t> ratio_batches;
  for (const auto& entry : log) {
    if (entry.batch >= plan.batches.size())
      throw Error(ErrorCode::invalid_argument,
                  "log references unknown batch " +
                      std::to_string(entry.batch));
    for (size_t idx : plan.batches[entry.batch])
      freq.by_label[train.labels[idx]].exposure_count += 1;
    std::set<uint32_t> labels_selected;
    for (const auto* ids : {&entry.exploit_ids, &entry.explore_ids}) {
      for (uint64_t id : *ids) {
        auto it = label_of.find(id);
        if (it == label_of.end())
          throw Error(ErrorCode::invalid_argument,
                      "selected id " + std::to_string(id) + " has no label");
        freq.by_label[it->second].selection_count += 1;
        labels_selected.insert(it->second);
      }
    }
    for (uint32_t label : labels_selected) {
      ratio_sum[label] += entry.ratio;
      ratio_batches[label] += 1;
    }
  }
  for (auto& [label, entry] : freq.by_label) {
    entry.frequency = entry.exposure_count == 0
                          ? 0.0
                          : static_cast<double>(entry.selection_count) /
                                static_cast<double>(entry.exposure_count);
    if (ratio_batches[label] > 0)
      entry.mean_selected_ratio =
          ratio_sum[label] / static_cast<double>(ratio_batches[label]);
  }
  return freq;
}

namespace {

ordered_json json_of(const RunReport& r) {
  ordered_json j;
  j["method"] = to_string(r.method);
  j["seed"] = r.seed;
  j["final"] = {{"train_acc", r.final_train_acc},
                {"val_acc", r.final_val_acc},
                {"test_acc", r.final_test_acc},
                {"train_loss", r.final_train_loss},
                {"val_loss", r.final_val_loss},
                {"test_loss", r.final_test_loss}};
  j["total_flops"] = r.total_flops;
  j["data_usage"] = r.data_usage;
  j["eval_set_hash"] = r.eval_set_hash;
  j["flops_convention"] = r.flops_convention;
  j["selection_log_path"] = r.selection_log_path;
  ordered_json epochs = ordered_json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_acc", e.train_acc},
                      {"val_acc", e.val_acc},
                      {"train_loss", e.train_loss},
                      {"val_loss", e.val_loss},
                      {"samples", e.samples_processed},
                      {"flops", e.flops_this_epoch},
                      {"mean_ratio", e.mean_ratio_this_epoch}});
  }
  j["epochs"] = std::move(epochs);
  return j;
}

ordered_json json_of(const Aggregate& a) {
  return {{"mean", a.mean}, {"std", a.stddev}};
}

}  // namespace

void export_report(const ComparisonReport& report,
                   const ExperimentConfig& cfg,
                   const std::filesystem::path& path, ReportFormat format) {
  if (format == ReportFormat::csv) {
    // long format: one row per (method, epoch, metric), seed-averaged
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
    out << "method,epoch,metric,value\n";
    const char* metric_names[] = {"train_acc", "val_acc",   "train_loss",
                                  "val_loss",  "samples",   "flops",
                                  "mean_ratio"};
    char buf[64];
    for (const auto& [method, summary] : report.methods) {
      size_t n_epochs = 0;
      for (const auto& r : summary.runs)
        n_epochs = std::max(n_epochs, r.epochs.size());
      for (size_t e = 0; e < n_epochs; ++e) {
        for (const char* metric : metric_names) {
          double sum = 0.0;
          size_t count = 0;
          for (const auto& r : summary.runs) {
            if (e >= r.epochs.size()) continue;
            const auto& em = r.epochs[e];
            double v = 0.0;
            std::string name = metric;
            if (name == "train_acc") v = em.train_acc;
            else if (name == "val_acc") v = em.val_acc;
            else if (name == "train_loss") v = em.train_loss;
            else if (name == "val_loss") v = em.val_loss;
            else if (name == "samples") v = static_cast<double>(em.samples_processed);
            else if (name == "flops") v = static_cast<double>(em.flops_this_epoch);
            else v = em.mean_ratio_this_epoch;
            sum += v;
            ++count;
          }
          std::snprintf(buf, sizeof(buf), "%.17g",
                        count == 0 ? 0.0 : sum / static_cast<double>(count));
          out << to_string(method) << "," << e << "," << metric << "," << buf
              << "\n";
        }
      }
    }
    return;
  }

  ordered_json j;
  j["tool_version"] = kToolVersion;
  ordered_json cfg_echo = ordered_json::object();
  for (const auto& [k, v] : cfg.raw.entries()) cfg_echo[k] = v;
  j["config"] = std::move(cfg_echo);
  j["regime"] = to_string(report.regime);
  j["budget"] = report.budget;
  j["seeds"] = report.seeds;
  ordered_json methods = ordered_json::object();
  for (const auto& [method, summary] : report.methods) {
    ordered_json m;
    m["test_acc"] = json_of(summary.test_acc);
    m["val_acc"] = json_of(summary.val_acc);
    m["train_acc"] = json_of(summary.train_acc);
    m["test_loss"] = json_of(summary.test_loss);
    m["total_flops"] = json_of(summary.total_flops);
    m["data_usage"] = json_of(summary.data_usage);
    ordered_json runs = ordered_json::array();
    for (const auto& r : summary.runs) runs.push_back(json_of(r));
    m["runs"] = std::move(runs);
    methods[to_string(method)] = std::move(m);
  }
  j["methods"] = std::move(methods);

  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void write_metrics_csv(const ComparisonReport& report,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << "# gstds " << kToolVersion << "\n";
  out << "method,seed,epoch,train_acc,val_acc,train_loss,val_loss,"
         "samples,flops,mean_ratio\n";
  char buf[512];
  for (const auto& [method, summary] : report.methods) {
    for (const auto& r : summary.runs) {
      for (const auto& e : r.epochs) {
        std::snprintf(buf, sizeof(buf),
                      "%s,%llu,%zu,%.17g,%.17g,%.17g,%.17g,%llu,%llu,%.17g\n",
                      to_string(method).c_str(),
                      static_cast<unsigned long long>(r.seed), e.epoch,
                      e.train_acc, e.val_acc, e.train_loss, e.val_loss,
                      static_cast<unsigned long long>(e.samples_processed),
                      static_cast<unsigned long long>(e.flops_this_epoch),
                      e.mean_ratio_this_epoch);
        out << buf;
      }
    }
  }
}

void write_selections_jsonl(const ComparisonReport& report,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  for (const auto& [method, summary] : report.methods) {
    for (const auto& r : summary.runs) {
      for (const auto& e : r.selection_log) {
        ordered_json j;
        j["method"] = to_string(method);
        j["seed"] = r.seed;
        j["epoch"] = e.epoch;
        j["batch"] = e.batch;
        j["ratio"] = e.ratio;
        j["n"] = e.n;
        j["exploit_ids"] = e.exploit_ids;
        j["explore_ids"] = e.explore_ids;
        j["weights_mode"] = e.weights_mode;
        j["lambda2"] = e.lambda2;
        out << j.dump() << "\n";
      }
    }
  }
}

Pca2 top2_principal_components(const Matrix& rows, double tol) {
  size_t n = rows.rows;
  size_t d = rows.cols;
  if (n < 2 || d < 2)
    throw Error(ErrorCode::invalid_argument,
                "projection needs >= 2 rows and >= 2 dims");
  Pca2 out;
  out.center.assign(d, 0.0);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < d; ++j) out.center[j] += rows(i, j);
  for (auto& c : out.center) c /= static_cast<double>(n);

  Matrix centered(n, d);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < d; ++j)
      centered(i, j) = rows(i, j) - out.center[j];

  auto cov_times = [&](const std::vector<double>& v,
                       const std::vector<double>* deflate) {
    std::vector<double> w = v;
    if (deflate != nullptr) {
      double proj = std::inner_product(w.begin(), w.end(), deflate->begin(),
                                       0.0);
      for (size_t j = 0; j < d; ++j) w[j] -= proj * (*deflate)[j];
    }
    std::vector<double> xv(n, 0.0);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < d; ++j) xv[i] += centered(i, j) * w[j];
    std::vector<double> result(d, 0.0);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < d; ++j) result[j] += centered(i, j) * xv[i];
    for (auto& r : result) r /= static_cast<double>(n);
    if (deflate != nullptr) {
      double proj = std::inner_product(result.begin(), result.end(),
                                       deflate->begin(), 0.0);
      for (size_t j = 0; j < d; ++j) result[j] -= proj * (*deflate)[j];
    }
    return result;
  };

  auto power_iterate = [&](const std::vector<double>* deflate) {
    RngStream rng(0x9ca2u);
    std::vector<double> v(d);
    for (auto& x : v) x = rng.normal();
    double norm = std::sqrt(
        std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (auto& x : v) x /= norm;
    for (int iter = 0; iter < 10000; ++iter) {
      auto w = cov_times(v, deflate);
      double wn = std::sqrt(
          std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
      if (wn == 0.0) break;
      for (auto& x : w) x /= wn;
      double diff = 0.0;
      for (size_t j = 0; j < d; ++j)
        diff = std::max(diff, std::abs(std::abs(w[j]) - std::abs(v[j])));
      v = std::move(w);
      if (diff < tol) break;
    }
    return v;
  };

  out.pc1 = power_iterate(nullptr);
  out.pc2 = power_iterate(&out.pc1);
  return out;
}

void write_projections_csv(const ComparisonReport& report,
                           const FeatureSet& full,
                           const std::filesystem::path& path) {
  std::map<uint64_t, size_t> row_of;
  for (size_t i = 0; i < full.size(); ++i) row_of[full.ids[i]] = i;

  std::map<uint64_t, uint64_t> selected_count;
  for (const auto& [method, summary] : report.methods)
    for (const auto& r : summary.runs)
      for (const auto& e : r.selection_log)
        for (const auto* ids : {&e.exploit_ids, &e.explore_ids})
          for (uint64_t id : *ids) selected_count[id] += 1;
  if (selected_count.empty())
    throw Error(ErrorCode::invalid_argument, "no selections to project");

  Matrix rows(selected_count.size(), full.dim);
  std::vector<uint64_t> ids;
  size_t i = 0;
  for (const auto& [id, count] : selected_count) {
    auto it = row_of.find(id);
    if (it == row_of.end())
      throw Error(ErrorCode::invalid_argument,
                  "selected id " + std::to_string(id) + " not in dataset");
    auto r = full.row(it->second);
    for (size_t j = 0; j < full.dim; ++j) rows(i, j) = r[j];
    ids.push_back(id);
    ++i;
  }

  Pca2 pca = top2_principal_components(rows);
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << "# gstds " << kToolVersion << "\n";
  out << "id,label,selection_count,pc1,pc2\n";
  char buf[128];
  for (size_t k = 0; k < ids.size(); ++k) {
    double p1 = 0.0, p2 = 0.0;
    for (size_t j = 0; j < full.dim; ++j) {
      double c = rows(k, j) - pca.center[j];
      p1 += c * pca.pc1[j];
      p2 += c * pca.pc2[j];
    }
    std::snprintf(buf, sizeof(buf), "%llu,%u,%llu,%.17g,%.17g\n",
                  static_cast<unsigned long long>(ids[k]),
                  full.labels[row_of[ids[k]]],
                  static_cast<unsigned long long>(selected_count[ids[k]]), p1,
                  p2);
    out << buf;
  }
}

}  // namespace gstds
