#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "relamix/baselines.hpp"
#include "relamix/data_model.hpp"
#include "relamix/trainer.hpp"

namespace relamix {

/// Library version recorded in run manifests.
std::string artifact_version();

/// Canonical JSON text of a config (sorted keys, fixed formatting).
std::string config_to_text(const ExperimentConfig& config);
/// Parses JSON text; keys absent from the text keep the values of `base`.
/// Unknown keys throw.
ExperimentConfig config_from_text(const std::string& text, const ExperimentConfig& base = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// 16 hex digits identifying a config; equal configs give equal hashes.
std::string config_hash(const ExperimentConfig& config);

/// Digest over a dataset directory's manifest and payload bytes.
std::string dataset_digest(const std::filesystem::path& dir);

/// Default output root: $RELAMIX_OUT_ROOT, else "./relamix-runs".
std::filesystem::path default_output_root();

struct RunInputs {
  std::filesystem::path source;
  std::filesystem::path target_pool;
  std::filesystem::path target_test;
};

struct RunSummary {
  std::filesystem::path run_dir;
  std::string config_hash;
  int shot_count = 0;
  std::uint64_t seed = 0;
  std::string variant;  ///< "full" or the '+'-joined ablation names
  double accuracy = 0.0;
};

/// Samples the few-shot split, trains, evaluates and writes
///   <out_root>/run-<config hash>/{config.json, split.json, metrics.csv,
///   losses.csv, eval.json, logits.csv, checkpoint/, run_manifest.json}.
RunSummary run_experiment(const ExperimentConfig& config, const RunInputs& inputs,
                          const std::filesystem::path& out_root);

/// Same as run_experiment() on datasets already in memory.
RunSummary run_experiment(const ExperimentConfig& config, const FeatureDataset& source,
                          const FeatureDataset& target_pool, const FeatureDataset& target_test,
                          const std::filesystem::path& out_root,
                          const std::vector<std::string>& input_digests = {});

struct SweepRequest {
  ExperimentConfig base;
  std::vector<int> shots = {1, 5, 10, 20};
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  int jobs = 1;  ///< concurrent (shot, seed) cells
};

struct ShotRow {
  int shot_count = 0;
  std::string variant;
  std::vector<double> accuracies;
  double mean = 0.0;
  double stddev = 0.0;  ///< sample standard deviation; 0 for a single run
};

struct SweepResult {
  std::vector<RunSummary> runs;
  std::vector<ShotRow> table;
};

SweepResult run_sweep(const SweepRequest& request, const RunInputs& inputs,
                      const std::filesystem::path& out_root);

/// Aggregates every run-* directory under `root` into mean +- std per
/// (variant, shot). Throws "no runs found" when there is nothing to report.
std::vector<ShotRow> collect_report(const std::filesystem::path& root);

/// Writes report.csv, report.json and report.svg (accuracy vs shot count).
void write_report(const std::vector<ShotRow>& rows, const std::filesystem::path& dir,
                  const std::string& stem = "report");

/// SVG line plot of mean accuracy against shot count, one line per variant.
std::string render_shot_plot(const std::vector<ShotRow>& rows);

/// Baseline reports as JSON text and as CSV text.
std::string baselines_to_json(const std::vector<BaselineReport>& reports);
std::string baselines_to_csv(const std::vector<BaselineReport>& reports);

/// Per-step loss log: step,L_CDIA,L_CES,L_CET,L_CEA,L_aux,total
std::string losses_to_csv(const std::vector<StepLog>& steps);
std::string epochs_to_csv(const std::vector<EpochMetrics>& epochs);
std::string logits_to_csv(const EvalReport& report);
/// Parses logits_to_csv() output back into (logits, labels).
EvalReport report_from_logits_csv(const std::string& csv, int class_count);

}  // namespace relamix
