// relamix: command-line driver for dataset generation, baselines, training,
// evaluation, shot sweeps and reports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "relamix/baselines.hpp"
#include "relamix/checkpoint.hpp"
#include "relamix/data_model.hpp"
#include "relamix/errors.hpp"
#include "relamix/experiment.hpp"
#include "relamix/relation_sets.hpp"
#include "relamix/sdfm.hpp"
#include "relamix/synthetic_domains.hpp"
#include "relamix/tensor_file.hpp"
#include "relamix/trainer.hpp"

namespace fs = std::filesystem;
using namespace relamix;

namespace {

// Dataset locations; --data DIR implies DIR/{source,target_pool,target_test}.
struct DataArgs {
  std::string data, source, pool, test;

  void add(CLI::App* cmd, bool need_pool = true) {
    cmd->add_option("--data", data, "Directory holding source/, target_pool/, target_test/");
    cmd->add_option("--source", source, "Source dataset directory");
    if (need_pool) cmd->add_option("--target-pool", pool, "Target training pool directory");
    cmd->add_option("--target-test", test, "Target test dataset directory");
  }

  RunInputs resolve() const {
    RunInputs in;
    auto pick = [&](const std::string& explicit_dir, const char* sub) -> fs::path {
      if (!explicit_dir.empty()) return explicit_dir;
      if (data.empty()) throw InvalidArgument(std::string("missing --data or --") + sub);
      return fs::path(data) / sub;
    };
    in.source = pick(source, "source");
    in.target_pool = pool.empty() && data.empty() ? fs::path() : pick(pool, "target_pool");
    in.target_test = pick(test, "target_test");
    return in;
  }
};

// Flags shared by train and sweep.
struct RunArgs {
  std::string config, out, negatives;
  std::vector<std::string> ablate;
  std::uint64_t seed = 0;
  int epochs = 0;
  double lr = 0.0;
  bool seed_set = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config, "JSON experiment config");
    cmd->add_option("--out", out, "Output root (default: $RELAMIX_OUT_ROOT or ./relamix-runs)");
    cmd->add_option("--ablate", ablate, "Ablations: sdfm,cdia,tran_rd,rd_mhsa,scale_mhsa,rd,source_only")
        ->delimiter(',');
    cmd->add_option("--negatives", negatives, "Negative pool")
        ->check(CLI::IsMember({"mixed", "source_only"}));
    cmd->add_option("--epochs", epochs, "Override the epoch count");
    cmd->add_option("--lr", lr, "Override the initial learning rate");
  }

  ExperimentConfig build() const {
    ExperimentConfig c = config.empty() ? ExperimentConfig{} : load_config(config);
    for (const auto& a : ablate) c.ablation.apply(a);
    if (negatives == "source_only") c.negatives = NegativePool::kSourceOnly;
    if (negatives == "mixed") c.negatives = NegativePool::kMixed;
    if (epochs > 0) {
      // Keep the decay milestones at the same fraction of the schedule.
      for (auto& e : c.lr_decay_epochs) e = e * epochs / c.epochs;
      c.epochs = epochs;
    }
    if (lr > 0.0) c.initial_lr = lr;
    return c;
  }

  fs::path out_root() const { return out.empty() ? default_output_root() : fs::path(out); }
};

void print_baselines(const std::vector<BaselineReport>& reports) {
  for (const auto& r : reports) {
    std::printf("%-17s %6.2f%%", std::string(to_string(r.method)).c_str(), r.accuracy);
    for (const auto& [k, acc] : r.per_k_accuracy) std::printf("  k=%d:%.2f%%", k, acc);
    std::printf("\n");
  }
}

void print_rows(const std::vector<ShotRow>& rows) {
  std::printf("%-28s %5s %5s %8s %8s\n", "variant", "shot", "runs", "mean", "std");
  for (const auto& r : rows)
    std::printf("%-28s %5d %5zu %8.2f %8.2f\n", r.variant.c_str(), r.shot_count,
                r.accuracies.size(), r.mean, r.stddev);
}

// --- import ---------------------------------------------------------------

struct ImportArgs {
  std::string list, out;
  int classes = 0, window = 16, stride = 8, pad = 8;
};

void cmd_import(const ImportArgs& a) {
  std::ifstream in(a.list);
  if (!in) throw Error("cannot open " + a.list);
  const fs::path base = fs::path(a.list).parent_path();
  std::vector<SnippetSequence> seqs;
  int max_label = -1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line_no == 1 && line.starts_with("sample_id")) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (cells.size() != 4)
      throw FormatError(a.list + ":" + std::to_string(line_no) +
                        ": expected sample_id,label,domain,path");
    SnippetSequence s;
    s.sample_id = cells[0];
    s.label = std::stoi(cells[1]);
    s.domain = parse_domain(cells[2]);
    fs::path frames = cells[3];
    if (frames.is_relative()) frames = base / frames;
    s.features = window_snippets(read_tensor_file(frames), a.window, a.stride, a.pad);
    max_label = std::max(max_label, s.label);
    seqs.push_back(std::move(s));
  }
  if (seqs.empty()) throw Error(a.list + ": no samples");
  const int classes = a.classes > 0 ? a.classes : max_label + 1;
  const auto ds = FeatureDataset::make(std::move(seqs), classes);
  write_dataset(ds, a.out);
  std::printf("imported %zu samples (%d snippets x %d dims) into %s\n", ds.size(),
              ds.snippet_count(), ds.dim(), a.out.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relamix: few-shot domain adaptation experiments on snippet features"};
  app.set_version_flag("--version", artifact_version());
  app.require_subcommand(1);

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic source/target pair");
  std::string gen_out;
  std::uint64_t gen_seed = 0;
  SyntheticLayout layout;
  DomainShiftSpec shift = default_shift(0);
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--classes", layout.class_count);
  gen->add_option("--per-class-source", layout.per_class_source);
  gen->add_option("--per-class-target", layout.per_class_target);
  gen->add_option("--snippets", layout.snippet_count);
  gen->add_option("--dim", layout.dim);
  gen->add_option("--rotation", shift.rotation_strength, "Rotation angle (radians)");
  gen->add_option("--bias", shift.bias_strength, "Per-class translation length");
  gen->add_option("--noise", shift.noise_std, "Snippet noise std");

  // import
  auto* imp = app.add_subcommand("import", "Window per-frame RMFX features into a dataset");
  ImportArgs import_args;
  imp->add_option("--list", import_args.list, "CSV: sample_id,label,domain,frames.rmfx")->required();
  imp->add_option("--out", import_args.out, "Dataset directory")->required();
  imp->add_option("--classes", import_args.classes, "Class count (default: max label + 1)");
  imp->add_option("--window", import_args.window);
  imp->add_option("--stride", import_args.stride);
  imp->add_option("--pad", import_args.pad);

  // baseline
  auto* base = app.add_subcommand("baseline", "Source-only Random / kNN / NC / NN baselines");
  DataArgs base_data;
  base_data.add(base, false);
  std::string base_out;
  std::uint64_t base_seed = 0;
  std::string metric = "euclidean";
  base->add_option("--out", base_out, "Write baselines.json and baselines.csv here");
  base->add_option("--seed", base_seed, "Seed of the Random baseline");
  base->add_option("--metric", metric)->check(CLI::IsMember({"euclidean", "cosine"}));

  // train
  auto* tr = app.add_subcommand("train", "Train and evaluate one run");
  DataArgs train_data;
  train_data.add(tr);
  RunArgs train_args;
  train_args.add(tr);
  int train_shots = -1;
  tr->add_option("--seed", train_args.seed, "Run seed")
      ->each([&](const std::string&) { train_args.seed_set = true; });
  tr->add_option("--shots", train_shots, "Labelled target samples per class");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a run's checkpoint on a test set");
  std::string eval_run, eval_test, eval_out;
  ev->add_option("--run", eval_run, "Run directory")->required();
  ev->add_option("--target-test", eval_test, "Test dataset directory")->required();
  ev->add_option("--out", eval_out, "Write eval.json and logits.csv here");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Shot x seed grid");
  DataArgs sweep_data;
  sweep_data.add(sw);
  RunArgs sweep_args;
  sweep_args.add(sw);
  std::vector<int> sweep_shots = {1, 5, 10, 20};
  std::vector<std::uint64_t> sweep_seeds = {0, 1, 2};
  int jobs = 1;
  bool parallel = false;
  sw->add_option("--shots", sweep_shots, "Shot counts")->delimiter(',');
  sw->add_option("--seeds", sweep_seeds, "Seeds")->delimiter(',');
  sw->add_option("--seed", sweep_seeds, "Alias of --seeds")->delimiter(',');
  sw->add_option("--jobs", jobs, "Concurrent cells");
  sw->add_flag("--parallel", parallel, "Run cells concurrently (one per hardware thread)");

  // report
  auto* rep = app.add_subcommand("report", "Aggregate run directories into mean +- std");
  std::string rep_runs, rep_out;
  rep->add_option("--runs", rep_runs, "Directory of run-* folders (default: output root)");
  rep->add_option("--out", rep_out, "Report directory (default: the runs directory)");

  // relation-sets
  auto* rs = app.add_subcommand("relation-sets", "Print sampled relation tuples");
  int rs_length = 5, rs_scale = 0, rs_count = kDefaultTuplesPerScale;
  std::uint64_t rs_seed = 0;
  rs->add_option("--length", rs_length, "Snippets per sequence");
  rs->add_option("--scale", rs_scale, "Tuple length (default: every scale)");
  rs->add_option("--count", rs_count, "Tuples per scale");
  rs->add_option("--seed", rs_seed);

  // stats
  auto* st = app.add_subcommand("stats", "Per-class snippet statistics of a source dataset");
  std::string st_source, st_out;
  st->add_option("--source", st_source, "Source dataset directory")->required();
  st->add_option("--out", st_out, "Write the statistics as a dataset directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      shift.seed = gen_seed;
      const auto pair = generate_pair(layout, shift);
      const fs::path out = gen_out;
      write_dataset(pair.source, out / "source");
      write_dataset(pair.target_train_pool, out / "target_pool");
      write_dataset(pair.target_test, out / "target_test");
      std::printf("wrote %zu source, %zu target pool and %zu target test samples to %s\n",
                  pair.source.size(), pair.target_train_pool.size(), pair.target_test.size(),
                  gen_out.c_str());
    } else if (*imp) {
      cmd_import(import_args);
    } else if (*base) {
      const auto in = base_data.resolve();
      const auto reports =
          run_baselines(read_dataset(in.source), read_dataset(in.target_test), base_seed,
                        metric == "cosine" ? DistanceMetric::kCosine : DistanceMetric::kEuclidean);
      print_baselines(reports);
      if (!base_out.empty()) {
        fs::create_directories(base_out);
        write_file_atomic(fs::path(base_out) / "baselines.json", baselines_to_json(reports));
        write_file_atomic(fs::path(base_out) / "baselines.csv", baselines_to_csv(reports));
      }
    } else if (*tr) {
      auto config = train_args.build();
      if (train_args.seed_set) config.seed = train_args.seed;
      if (train_shots >= 0) config.shot_count = train_shots;
      config.validate();
      const auto summary = run_experiment(config, train_data.resolve(), train_args.out_root());
      std::printf("%s  variant=%s shots=%d seed=%llu accuracy=%.2f%%\n",
                  summary.run_dir.string().c_str(), summary.variant.c_str(), summary.shot_count,
                  static_cast<unsigned long long>(summary.seed), summary.accuracy);
    } else if (*ev) {
      const fs::path run = eval_run;
      const auto config = load_config(run / "config.json");
      const auto params = load_checkpoint(run / "checkpoint");
      const auto test = read_dataset(eval_test);
      const auto report = evaluate(params, test, config.plan_seed, config.tuples_per_scale);
      std::printf("accuracy %.2f%% on %zu samples\n", report.accuracy, test.size());
      if (!eval_out.empty()) {
        fs::create_directories(eval_out);
        nlohmann::json j = {{"accuracy", report.accuracy},
                            {"test_size", test.size()},
                            {"labels", report.labels},
                            {"predictions", report.predictions}};
        write_file_atomic(fs::path(eval_out) / "eval.json", j.dump(2) + "\n");
        write_file_atomic(fs::path(eval_out) / "logits.csv", logits_to_csv(report));
      }
    } else if (*sw) {
      SweepRequest req;
      req.base = sweep_args.build();
      req.shots = sweep_shots;
      req.seeds = sweep_seeds;
      req.jobs = parallel ? static_cast<int>(std::max(1u, std::thread::hardware_concurrency())) : jobs;
      req.base.validate();
      const auto result = run_sweep(req, sweep_data.resolve(), sweep_args.out_root());
      print_rows(result.table);
      std::printf("report: %s\n", (sweep_args.out_root() / "sweep.csv").string().c_str());
    } else if (*rep) {
      const fs::path runs = rep_runs.empty() ? default_output_root() : fs::path(rep_runs);
      const auto rows = collect_report(runs);
      write_report(rows, rep_out.empty() ? runs : fs::path(rep_out));
      print_rows(rows);
    } else if (*rs) {
      const auto scales = rs_scale > 0 ? std::vector<int>{rs_scale} : enumerate_scales(rs_length);
      for (int r : scales) {
        const int count = static_cast<int>(std::min<std::uint64_t>(
            static_cast<std::uint64_t>(rs_count), binomial(rs_length, r)));
        const auto tuples =
            sample_relation_tuples(rs_length, r, count, rs_seed);
        std::printf("r=%d:", r);
        for (const auto& t : tuples) {
          std::printf(" (");
          for (std::size_t i = 0; i < t.size(); ++i) std::printf(i ? ",%d" : "%d", t[i]);
          std::printf(")");
        }
        std::printf("\n");
      }
    } else if (*st) {
      const auto stats = compute_source_statistics(read_dataset(st_source));
      for (int c = 0; c < stats.class_count(); ++c)
        std::printf("class %d: n=%d mean|.|=%.4f mean std=%.4f\n", c,
                    stats.counts[static_cast<std::size_t>(c)],
                    stats.mean[static_cast<std::size_t>(c)].norm(),
                    stats.std[static_cast<std::size_t>(c)].mean());
      if (!st_out.empty()) write_dataset(statistics_as_dataset(stats), st_out);
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    for (auto& ch : msg)
      if (ch == '\n') ch = ' ';
    std::fprintf(stderr, "relamix: error: %s\n", msg.c_str());
    return 1;
  }
  return 0;
}
