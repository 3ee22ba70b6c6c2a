#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gstds/config.hpp"
#include "gstds/errors.hpp"
#include "gstds/harness.hpp"
#include "gstds/schedule.hpp"
#include "gstds/selection.hpp"
#include "gstds/spectral.hpp"

namespace fs = std::filesystem;
using namespace gstds;
using ordered_json = nlohmann::ordered_json;

namespace {

void write_schedule_csv(const Schedule& sched, const fs::path& path,
                        const std::string& echo) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << "# gstds " << kToolVersion << " " << echo << "\n";
  out << "step,ratio\n";
  char buf[64];
  for (size_t i = 0; i < sched.values.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, sched.values[i]);
    out << buf;
  }
}

void dump_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
  out << "[" << name << " " << m.rows << "x" << m.cols << "]\n";
  char buf[64];
  for (size_t i = 0; i < m.rows; ++i) {
    for (size_t j = 0; j < m.cols; ++j) {
      std::snprintf(buf, sizeof(buf), "%.12g", m(i, j));
      out << (j ? "," : "") << buf;
    }
    out << "\n";
  }
}

ExperimentConfig load_experiment_config(const std::string& config_path,
                                        const ConfigMap& overrides) {
  ConfigMap cfg;
  if (!config_path.empty()) cfg = parse_config_file(config_path);
  for (const auto& [k, v] : overrides.entries()) cfg.set(k, v);
  return experiment_config_from(cfg);
}

void write_comparison_outputs(const ComparisonReport& report,
                              const ExperimentConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  fs::path dir(cfg.out_dir);
  export_report(report, cfg, dir / "report.json", ReportFormat::json);
  write_metrics_csv(report, dir / "metrics.csv");
  write_selections_jsonl(report, dir / "selections.jsonl");
  if (cfg.with_projection) {
    FeatureSet full;
    if (cfg.use_synth) {
      SynthParams sp = cfg.synth;
      sp.seed = cfg.seeds.front();
      full = generate_synthetic(sp);
    } else {
      full = load_featureset(cfg.data_path, cfg.data_format);
    }
    write_projections_csv(report, full, dir / "projections.csv");
  }
  std::cout << "wrote " << (dir / "report.json").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GSTDS: spectrally tuned batch-level data selection"};
  app.require_subcommand(1);

  // schedule / calibrate
  auto* sched_cmd = app.add_subcommand(
      "schedule", "Preview a filter-ratio schedule as step,ratio CSV");
  auto* calib_cmd = app.add_subcommand(
      "calibrate", "Calibrate the constrained sigmoid and print its params");
  std::string policy_name = "sigmoid";
  double mean_t = 0.3, max_t = 0.88, min_t = 0.18, steepness = 30.0;
  size_t steps = 1000;
  std::string sched_out = "schedule.csv";
  double constant_value = 1.0, cycles = 3.0, sinc_width = 6.0,
         gamma_shape = 6.0;
  sched_cmd->add_option("--policy", policy_name,
                        "constant|sigmoid|sinc|sinusoid|gamma|aimd_mellow|"
                        "aimd_aggressive");
  sched_cmd->add_option("--mean", mean_t, "sigmoid mean target");
  sched_cmd->add_option("--max", max_t, "upper ratio bound");
  sched_cmd->add_option("--min", min_t, "lower ratio bound");
  sched_cmd->add_option("--steepness", steepness, "sigmoid steepness scale");
  sched_cmd->add_option("--steps", steps, "total schedule length");
  sched_cmd->add_option("--constant", constant_value, "constant policy value");
  sched_cmd->add_option("--cycles", cycles, "sinusoid cycles");
  sched_cmd->add_option("--sinc-width", sinc_width, "sinc envelope width");
  sched_cmd->add_option("--gamma-shape", gamma_shape, "gamma shape (>1)");
  sched_cmd->add_option("--out", sched_out, "output CSV path");
  for (auto* cmd : {calib_cmd}) {
    cmd->add_option("--mean", mean_t, "mean target");
    cmd->add_option("--max", max_t, "max target");
    cmd->add_option("--min", min_t, "min target");
    cmd->add_option("--steps", steps, "total steps");
    cmd->add_option("--steepness", steepness, "steepness scale");
  }

  // select
  auto* select_cmd = app.add_subcommand(
      "select", "One-shot spectral selection over a feature file");
  std::string sel_features, sel_format = "binary", sel_weights =
      "inverse_ref_loss";
  std::string dump_spectral;
  size_t sel_batch_size = 64;
  double sel_ratio = 0.3, sel_epsilon = 1e-8;
  uint64_t sel_seed = 0;
  bool sel_clamp = false;
  select_cmd->add_option("--features", sel_features, "feature container path")
      ->required();
  select_cmd->add_option("--format", sel_format, "binary|csv");
  select_cmd->add_option("--batch-size", sel_batch_size, "batch size");
  select_cmd->add_option("--ratio", sel_ratio, "filter ratio in (0,1]");
  select_cmd->add_option("--seed", sel_seed, "rng seed");
  select_cmd->add_option("--weights-mode", sel_weights,
                         "inverse_ref_loss|abs_fiedler");
  select_cmd->add_option("--epsilon", sel_epsilon, "stability constant");
  select_cmd->add_flag("--clamp-negative-similarity", sel_clamp,
                       "zero out negative cosine entries");
  select_cmd->add_option("--dump-spectral", dump_spectral,
                         "write per-batch S, L, lambda2, phi to this CSV");

  // synth
  auto* synth_cmd =
      app.add_subcommand("synth", "Generate a synthetic feature container");
  SynthParams synth_params;
  std::string synth_out = "synthetic.gstd";
  synth_cmd->add_option("--classes", synth_params.classes, "class count");
  synth_cmd->add_option("--per-class", synth_params.per_class,
                        "samples per class");
  synth_cmd->add_option("--dim", synth_params.dim, "feature dimension");
  synth_cmd->add_option("--separation", synth_params.separation,
                        "cluster mean separation");
  synth_cmd->add_option("--seed", synth_params.seed, "rng seed");
  synth_cmd->add_option("--out", synth_out, "output path");

  // train / compare / report
  auto* train_cmd =
      app.add_subcommand("train", "Run one training experiment");
  auto* compare_cmd = app.add_subcommand(
      "compare", "Run a multi-method, multi-seed comparison");
  std::string config_path;
  std::vector<std::string> set_overrides;
  bool with_projection = false;
  std::string train_method = "gstds";
  for (auto* cmd : {train_cmd, compare_cmd}) {
    cmd->add_option("--config", config_path, "experiment config file");
    cmd->add_option("--set", set_overrides,
                    "override config entries as section.key=value");
    cmd->add_flag("--with-projection", with_projection,
                  "emit 2-D PCA projection coordinates");
  }
  train_cmd->add_option("--method", train_method,
                        "standard|gstds|random_filter");
  uint64_t cli_seed = 0;
  bool cli_seed_set = false;
  train_cmd->add_option("--seed", cli_seed, "run seed")
      ->each([&](const std::string&) { cli_seed_set = true; });

  auto* report_cmd = app.add_subcommand(
      "report", "Re-export a report.json as long-format CSV");
  std::string report_in = "report.json", report_out = "report.csv";
  report_cmd->add_option("--in", report_in, "report.json path");
  report_cmd->add_option("--out", report_out, "output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);  // usage errors exit 1, --help exits 0
  }

  try {
    if (*calib_cmd) {
      SigmoidParams p =
          calibrate_sigmoid(mean_t, max_t, min_t, steps, steepness);
      double mean = 0.0;
      for (size_t i = 0; i < steps; ++i)
        mean += sigmoid_value(p, static_cast<double>(i));
      mean /= static_cast<double>(steps);
      std::printf("a=%.17g\nb=%.17g\nk=%.17g\nx0=%.17g\nachieved_mean=%.6f\n",
                  p.a, p.b, p.k, p.x0, mean);
      return 0;
    }

    if (*sched_cmd) {
      Policy policy = parse_policy(policy_name);
      ScheduleParams params;
      params.constant_value = constant_value;
      params.r_min = min_t;
      params.r_max = max_t;
      params.sinusoid_cycles = cycles;
      params.sinc_width = sinc_width;
      params.gamma_shape = gamma_shape;
      params.aimd.r_min = min_t;
      params.aimd.r_max = max_t;
      if (policy == Policy::sigmoid)
        params.sigmoid =
            calibrate_sigmoid(mean_t, max_t, min_t, steps, steepness);
      Schedule sched = build_schedule(policy, params, 1, steps);
      write_schedule_csv(sched, sched_out, "schedule --policy " + policy_name);
      std::cout << "wrote " << sched_out << " (" << sched.values.size()
                << " steps)\n";
      return 0;
    }

    if (*synth_cmd) {
      if (synth_params.separation == 0.0)
        std::cerr << "warning: separation 0 produces overlapping classes\n";
      FeatureSet fs = generate_synthetic(synth_params);
      save_featureset(fs, synth_out, FileFormat::binary);
      std::cout << "wrote " << synth_out << " (N=" << fs.size()
                << ", d=" << fs.dim << ", C=" << fs.class_count << ")\n";
      return 0;
    }

    if (*select_cmd) {
      FileFormat fmt =
          sel_format == "csv" ? FileFormat::csv : FileFormat::binary;
      FeatureSet data = load_featureset(sel_features, fmt);
      WeightsMode mode = parse_weights_mode(sel_weights);
      std::vector<float> losses = data.ref_losses;
      if (mode == WeightsMode::inverse_ref_loss && losses.empty()) {
        LearnerModel probe = train_reference_probe(data, sel_seed);
        losses = pointwise_loss(probe, data);
      }
      BatchPlan plan = partition_batches(data, sel_batch_size, sel_seed);
      std::ofstream spectral_out;
      if (!dump_spectral.empty()) {
        spectral_out.open(dump_spectral);
        if (!spectral_out)
          throw Error(ErrorCode::io, "cannot write " + dump_spectral);
        spectral_out << "# gstds " << kToolVersion << " select\n";
      }
      for (size_t b = 0; b < plan.batches.size(); ++b) {
        const auto& batch = plan.batches[b];
        auto sim = cosine_similarity(data, batch, sel_clamp);
        auto lap = laplacian(sim);
        auto scores = fiedler_vector(lap);
        auto ranking = rank_descending(scores);
        SelectionWeights weights;
        if (mode == WeightsMode::inverse_ref_loss) {
          std::vector<float> batch_losses(batch.size());
          for (size_t j = 0; j < batch.size(); ++j)
            batch_losses[j] = losses[batch[j]];
          weights = compute_weights_inverse_loss(batch_losses, sel_epsilon);
        } else {
          weights = compute_weights_abs_fiedler(scores, sel_epsilon);
        }
        RngStream rng = RngStream::derive(sel_seed, 0, b);
        auto result =
            select_batch(batch, scores, ranking, weights, sel_ratio, rng, b);
        ordered_json j;
        j["epoch"] = 0;
        j["batch"] = b;
        j["ratio"] = sel_ratio;
        j["n"] = result.n_selected;
        ordered_json exploit = ordered_json::array();
        for (size_t idx : result.exploit) exploit.push_back(data.ids[idx]);
        ordered_json explore = ordered_json::array();
        for (size_t idx : result.explore) explore.push_back(data.ids[idx]);
        j["exploit_ids"] = std::move(exploit);
        j["explore_ids"] = std::move(explore);
        j["weights_mode"] = to_string(mode);
        j["lambda2"] = scores.lambda2;
        std::cout << j.dump() << "\n";
        if (spectral_out.is_open()) {
          dump_matrix(spectral_out, "S batch=" + std::to_string(b),
                      sim.entries);
          dump_matrix(spectral_out, "L batch=" + std::to_string(b),
                      lap.entries);
          spectral_out << "[lambda2 batch=" << b << "]\n"
                       << scores.lambda2 << "\n[phi batch=" << b << "]\n";
          char buf[64];
          for (size_t i = 0; i < scores.phi.size(); ++i) {
            std::snprintf(buf, sizeof(buf), "%.12g", scores.phi[i]);
            spectral_out << (i ? "," : "") << buf;
          }
          spectral_out << "\n";
        }
      }
      return 0;
    }

    if (*train_cmd || *compare_cmd) {
      ConfigMap overrides;
      for (const auto& kv : set_overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
          throw Error(ErrorCode::configuration,
                      "--set expects section.key=value, got '" + kv + "'");
        overrides.set(kv.substr(0, eq), kv.substr(eq + 1));
      }
      ExperimentConfig cfg = load_experiment_config(config_path, overrides);
      cfg.with_projection = with_projection;

      if (*train_cmd) {
        cfg.methods = {parse_method(train_method), Method::standard};
        if (cli_seed_set) cfg.seeds = {cli_seed};
        cfg.seeds.resize(1);
        // single-run mode: reuse the comparison writer with one method
        cfg.methods.resize(1);
        RunReport report =
            run_experiment(cfg, cfg.methods[0], cfg.seeds[0]);
        ComparisonReport wrapper;
        wrapper.regime = Regime::fixed_epochs;
        wrapper.budget = cfg.train.n_epochs;
        wrapper.seeds = cfg.seeds;
        MethodSummary summary;
        summary.runs.push_back(std::move(report));
        wrapper.methods.emplace_back(cfg.methods[0], std::move(summary));
        write_comparison_outputs(wrapper, cfg);
      } else {
        ComparisonReport report = run_comparison(cfg);
        write_comparison_outputs(report, cfg);
      }
      return 0;
    }

    if (*report_cmd) {
      std::ifstream in(report_in);
      if (!in) throw Error(ErrorCode::io, "cannot open " + report_in);
      ordered_json j = ordered_json::parse(in);
      std::ofstream out(report_out);
      if (!out) throw Error(ErrorCode::io, "cannot write " + report_out);
      out << "method,epoch,metric,value\n";
      char buf[64];
      for (const auto& [method, m] : j.at("methods").items()) {
        // seed-averaged per-epoch metrics
        std::map<size_t, std::map<std::string, std::pair<double, size_t>>>
            acc;
        for (const auto& run : m.at("runs")) {
          for (const auto& e : run.at("epochs")) {
            size_t epoch = e.at("epoch").get<size_t>();
            for (const char* metric :
                 {"train_acc", "val_acc", "train_loss", "val_loss", "samples",
                  "flops", "mean_ratio"}) {
              auto& slot = acc[epoch][metric];
              slot.first += e.at(metric).get<double>();
              slot.second += 1;
            }
          }
        }
        for (const auto& [epoch, metrics] : acc) {
          for (const char* metric :
               {"train_acc", "val_acc", "train_loss", "val_loss", "samples",
                "flops", "mean_ratio"}) {
            const auto& slot = metrics.at(metric);
            std::snprintf(buf, sizeof(buf), "%.17g",
                          slot.first / static_cast<double>(slot.second));
            out << method << "," << epoch << "," << metric << "," << buf
                << "\n";
          }
        }
      }
      std::cout << "wrote " << report_out << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
