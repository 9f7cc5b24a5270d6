#include "relamix/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "relamix/checkpoint.hpp"
#include "relamix/errors.hpp"
#include "relamix/tensor_file.hpp"

#ifndef RELAMIX_VERSION
#define RELAMIX_VERSION "0.0.0"
#endif

namespace relamix {

namespace fs = std::filesystem;
using nlohmann::json;

std::string artifact_version() { return RELAMIX_VERSION; }

// ---------------------------------------------------------------------------
// Config text

namespace {

const char* to_text(NegativePool p) { return p == NegativePool::kMixed ? "mixed" : "source_only"; }
const char* to_text(CdiaPositive p) { return p == CdiaPositive::kPrototype ? "prototype" : "permuted"; }
const char* to_text(HeadMode m) { return m == HeadMode::kSum ? "sum" : "concat"; }

json to_json(const ExperimentConfig& c) {
  const auto& w = c.weights;
  const auto& a = c.ablation;
  return {
      {"shot_count", c.shot_count},
      {"seed", c.seed},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"initial_lr", c.initial_lr},
      {"lr_decay_epochs", c.lr_decay_epochs},
      {"lr_decay_factor", c.lr_decay_factor},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"adam_epsilon", c.adam_epsilon},
      {"loss_weights",
       {{"cdia", w.cdia}, {"ce_source", w.ce_source}, {"ce_target", w.ce_target},
        {"ce_synth", w.ce_synth}, {"aux", w.aux}}},
      {"top_k", c.top_k},
      {"alpha", c.alpha},
      {"beta", c.beta},
      {"heads", c.heads},
      {"ffn_width", c.ffn_width},
      {"head_mode", to_text(c.head_mode)},
      {"tuples_per_scale", c.tuples_per_scale},
      {"per_class_synth", c.per_class_synth},
      {"negatives_per_anchor", c.negatives_per_anchor},
      {"negatives", to_text(c.negatives)},
      {"cdia_positive", to_text(c.cdia_positive)},
      {"refresh_synthesized", c.refresh_synthesized},
      {"plan_seed", c.plan_seed},
      {"eval_every", c.eval_every},
      {"ablation",
       {{"disable_rd_mhsa", a.disable_rd_mhsa}, {"disable_scale_mhsa", a.disable_scale_mhsa},
        {"disable_rd", a.disable_rd}, {"disable_tran_rd", a.disable_tran_rd},
        {"disable_sdfm", a.disable_sdfm}, {"disable_cdia", a.disable_cdia},
        {"source_only", a.source_only}}},
  };
}

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> known, const char* where) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw InvalidArgument(std::string("config: unknown key '") + item.key() + "' in " + where);
  }
}

}  // namespace

std::string config_to_text(const ExperimentConfig& config) { return to_json(config).dump(2) + "\n"; }

ExperimentConfig config_from_text(const std::string& text, const ExperimentConfig& base) {
  ExperimentConfig c = base;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw InvalidArgument("config: top level must be an object");
    check_keys(j,
               {"shot_count", "seed", "epochs", "batch_size", "initial_lr", "lr_decay_epochs",
                "lr_decay_factor", "adam_beta1", "adam_beta2", "adam_epsilon", "loss_weights",
                "top_k", "alpha", "beta", "heads", "ffn_width", "head_mode", "tuples_per_scale",
                "per_class_synth", "negatives_per_anchor", "negatives", "cdia_positive",
                "refresh_synthesized", "plan_seed", "eval_every", "ablation"},
               "top level");
    take(j, "shot_count", c.shot_count);
    take(j, "seed", c.seed);
    take(j, "epochs", c.epochs);
    take(j, "batch_size", c.batch_size);
    take(j, "initial_lr", c.initial_lr);
    take(j, "lr_decay_epochs", c.lr_decay_epochs);
    take(j, "lr_decay_factor", c.lr_decay_factor);
    take(j, "adam_beta1", c.adam_beta1);
    take(j, "adam_beta2", c.adam_beta2);
    take(j, "adam_epsilon", c.adam_epsilon);
    if (j.contains("loss_weights")) {
      const auto& w = j.at("loss_weights");
      check_keys(w, {"cdia", "ce_source", "ce_target", "ce_synth", "aux"}, "loss_weights");
      take(w, "cdia", c.weights.cdia);
      take(w, "ce_source", c.weights.ce_source);
      take(w, "ce_target", c.weights.ce_target);
      take(w, "ce_synth", c.weights.ce_synth);
      take(w, "aux", c.weights.aux);
    }
    take(j, "top_k", c.top_k);
    take(j, "alpha", c.alpha);
    take(j, "beta", c.beta);
    take(j, "heads", c.heads);
    take(j, "ffn_width", c.ffn_width);
    if (j.contains("head_mode")) {
      const auto m = j.at("head_mode").get<std::string>();
      if (m != "sum" && m != "concat") throw InvalidArgument("config: head_mode must be sum|concat");
      c.head_mode = m == "sum" ? HeadMode::kSum : HeadMode::kConcat;
    }
    take(j, "tuples_per_scale", c.tuples_per_scale);
    take(j, "per_class_synth", c.per_class_synth);
    take(j, "negatives_per_anchor", c.negatives_per_anchor);
    if (j.contains("negatives")) {
      const auto m = j.at("negatives").get<std::string>();
      if (m != "mixed" && m != "source_only")
        throw InvalidArgument("config: negatives must be mixed|source_only");
      c.negatives = m == "mixed" ? NegativePool::kMixed : NegativePool::kSourceOnly;
    }
    if (j.contains("cdia_positive")) {
      const auto m = j.at("cdia_positive").get<std::string>();
      if (m != "prototype" && m != "permuted")
        throw InvalidArgument("config: cdia_positive must be prototype|permuted");
      c.cdia_positive = m == "prototype" ? CdiaPositive::kPrototype : CdiaPositive::kPermuted;
    }
    take(j, "refresh_synthesized", c.refresh_synthesized);
    take(j, "plan_seed", c.plan_seed);
    take(j, "eval_every", c.eval_every);
    if (j.contains("ablation")) {
      const auto& a = j.at("ablation");
      check_keys(a, {"disable_rd_mhsa", "disable_scale_mhsa", "disable_rd", "disable_tran_rd",
                     "disable_sdfm", "disable_cdia", "source_only"}, "ablation");
      take(a, "disable_rd_mhsa", c.ablation.disable_rd_mhsa);
      take(a, "disable_scale_mhsa", c.ablation.disable_scale_mhsa);
      take(a, "disable_rd", c.ablation.disable_rd);
      take(a, "disable_tran_rd", c.ablation.disable_tran_rd);
      take(a, "disable_sdfm", c.ablation.disable_sdfm);
      take(a, "disable_cdia", c.ablation.disable_cdia);
      take(a, "source_only", c.ablation.source_only);
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return config_from_text(std::string(bytes.begin(), bytes.end()));
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

std::string config_hash(const ExperimentConfig& config) {
  const auto text = to_json(config).dump();
  return hex64(fnv1a64(text.data(), text.size()));
}

std::string dataset_digest(const fs::path& dir) {
  const auto manifest_bytes = read_file_bytes(dir / "manifest.json");
  std::uint64_t h = fnv1a64(manifest_bytes.data(), manifest_bytes.size());
  const json manifest = json::parse(manifest_bytes.begin(), manifest_bytes.end());
  for (const auto& s : manifest.at("samples")) {
    const auto bytes = read_file_bytes(dir / s.at("file").get<std::string>());
    h = fnv1a64(bytes.data(), bytes.size(), h);
  }
  return hex64(h);
}

fs::path default_output_root() {
  if (const char* env = std::getenv("RELAMIX_OUT_ROOT"); env && *env) return env;
  return "relamix-runs";
}

// ---------------------------------------------------------------------------
// CSV helpers

namespace {

std::string num(double v, int digits = 10) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string variant_name(const ExperimentConfig& c) {
  auto names = c.ablation.names();
  if (c.negatives == NegativePool::kSourceOnly) names.emplace_back("source_negatives");
  if (c.cdia_positive == CdiaPositive::kPermuted) names.emplace_back("permuted_positives");
  if (names.empty()) return "full";
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : "+") + n;
  return out;
}

}  // namespace

std::string losses_to_csv(const std::vector<StepLog>& steps) {
  std::string out = "step,L_CDIA,L_CES,L_CET,L_CEA,L_aux,total\n";
  for (const auto& s : steps) {
    const auto& c = s.components;
    out += std::to_string(s.step) + "," + num(c.cdia) + "," + num(c.ce_source) + "," +
           num(c.ce_target) + "," + num(c.ce_synth) + "," + num(c.aux) + "," + num(s.total) + "\n";
  }
  return out;
}

std::string epochs_to_csv(const std::vector<EpochMetrics>& epochs) {
  std::string out = "epoch,lr,L_CDIA,L_CES,L_CET,L_CEA,L_aux,total,test_accuracy\n";
  for (const auto& e : epochs) {
    const auto& c = e.mean_components;
    out += std::to_string(e.epoch) + "," + num(e.learning_rate) + "," + num(c.cdia) + "," +
           num(c.ce_source) + "," + num(c.ce_target) + "," + num(c.ce_synth) + "," + num(c.aux) +
           "," + num(e.mean_total) + "," + num(e.test_accuracy) + "\n";
  }
  return out;
}

std::string logits_to_csv(const EvalReport& report) {
  std::string out = "label";
  for (Eigen::Index c = 0; c < report.logits.cols(); ++c) out += ",logit" + std::to_string(c);
  out += "\n";
  for (Eigen::Index i = 0; i < report.logits.rows(); ++i) {
    out += std::to_string(report.labels[static_cast<std::size_t>(i)]);
    for (Eigen::Index c = 0; c < report.logits.cols(); ++c) out += "," + num(report.logits(i, c), 17);
    out += "\n";
  }
  return out;
}

EvalReport report_from_logits_csv(const std::string& csv, int class_count) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  std::vector<int> labels;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    labels.push_back(std::stoi(cell));
    std::vector<double> r;
    while (std::getline(ls, cell, ',')) r.push_back(std::stod(cell));
    if (static_cast<int>(r.size()) != class_count)
      throw FormatError("logits csv: row has " + std::to_string(r.size()) + " logits");
    rows.push_back(std::move(r));
  }
  Eigen::MatrixXd logits(static_cast<Eigen::Index>(rows.size()), class_count);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int c = 0; c < class_count; ++c)
      logits(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
  return report_from_logits(logits, labels, class_count);
}

std::string baselines_to_json(const std::vector<BaselineReport>& reports) {
  json arr = json::array();
  for (const auto& r : reports) {
    json item = {{"method", std::string(to_string(r.method))},
                 {"accuracy", r.accuracy},
                 {"seed", r.seed}};
    if (!r.per_k_accuracy.empty()) {
      json per_k = json::object();
      for (const auto& [k, acc] : r.per_k_accuracy) per_k[std::to_string(k)] = acc;
      item["per_k_accuracy"] = per_k;
    }
    arr.push_back(item);
  }
  return arr.dump(2) + "\n";
}

std::string baselines_to_csv(const std::vector<BaselineReport>& reports) {
  std::string out = "method,k,accuracy\n";
  for (const auto& r : reports) {
    for (const auto& [k, acc] : r.per_k_accuracy)
      out += std::string(to_string(r.method)) + "," + std::to_string(k) + "," + num(acc) + "\n";
    out += std::string(to_string(r.method)) + ",," + num(r.accuracy) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Runs

RunSummary run_experiment(const ExperimentConfig& config, const FeatureDataset& source,
                          const FeatureDataset& target_pool, const FeatureDataset& target_test,
                          const fs::path& out_root, const std::vector<std::string>& input_digests) {
  const auto started = std::chrono::steady_clock::now();
  config.validate();
  RunSummary summary;
  summary.config_hash = config_hash(config);
  summary.shot_count = config.shot_count;
  summary.seed = config.seed;
  summary.variant = variant_name(config);
  summary.run_dir = out_root / ("run-" + summary.config_hash);
  fs::create_directories(summary.run_dir);

  const auto split = sample_few_shot_split(target_pool, config.shot_count, config.seed);
  const auto fewshot = target_pool.select(split.all_ids());
  auto result = train(source, fewshot, config, &target_test);

  const auto& dir = summary.run_dir;
  write_file_atomic(dir / "config.json", config_to_text(config));
  json split_json = {{"shot_count", split.shot_count},
                     {"seed", split.seed},
                     {"selected_ids", split.selected_ids},
                     {"warnings", split.warnings}};
  write_file_atomic(dir / "split.json", split_json.dump(2) + "\n");
  write_file_atomic(dir / "metrics.csv", epochs_to_csv(result.epochs));
  write_file_atomic(dir / "losses.csv", losses_to_csv(result.steps));
  write_file_atomic(dir / "logits.csv", logits_to_csv(result.final_eval));
  save_checkpoint(result.params, dir / "checkpoint");

  summary.accuracy = result.final_eval.accuracy;
  json per_class = json::array();
  for (double v : result.final_eval.per_class_accuracy)
    per_class.push_back(std::isnan(v) ? json(nullptr) : json(v));
  json eval = {{"config_hash", summary.config_hash},
               {"shot_count", summary.shot_count},
               {"seed", summary.seed},
               {"variant", summary.variant},
               {"accuracy", summary.accuracy},
               {"per_class_accuracy", per_class},
               {"test_size", target_test.size()}};
  write_file_atomic(dir / "eval.json", eval.dump(2) + "\n");

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  json manifest = {{"config_hash", summary.config_hash},
                   {"artifact_version", artifact_version()},
                   {"input_digests", input_digests},
                   {"outputs", {"config.json", "split.json", "metrics.csv", "losses.csv",
                                "logits.csv", "eval.json", "checkpoint/checkpoint.json"}},
                   {"wall_clock_seconds", seconds},
                   {"finished_at", static_cast<std::int64_t>(std::time(nullptr))}};
  write_file_atomic(dir / "run_manifest.json", manifest.dump(2) + "\n");
  return summary;
}

RunSummary run_experiment(const ExperimentConfig& config, const RunInputs& inputs,
                          const fs::path& out_root) {
  const auto source = read_dataset(inputs.source);
  const auto pool = read_dataset(inputs.target_pool);
  const auto test = read_dataset(inputs.target_test);
  return run_experiment(config, source, pool, test, out_root,
                        {dataset_digest(inputs.source), dataset_digest(inputs.target_pool),
                         dataset_digest(inputs.target_test)});
}

namespace {

std::vector<ShotRow> tabulate(const std::vector<RunSummary>& runs) {
  std::map<std::pair<std::string, int>, std::vector<std::pair<std::uint64_t, double>>> groups;
  for (const auto& r : runs) groups[{r.variant, r.shot_count}].push_back({r.seed, r.accuracy});
  std::vector<ShotRow> rows;
  for (auto& [key, vals] : groups) {
    std::sort(vals.begin(), vals.end());
    ShotRow row;
    row.variant = key.first;
    row.shot_count = key.second;
    for (const auto& v : vals) row.accuracies.push_back(v.second);
    double sum = 0.0;
    for (double a : row.accuracies) sum += a;
    row.mean = sum / static_cast<double>(row.accuracies.size());
    if (row.accuracies.size() > 1) {
      double ss = 0.0;
      for (double a : row.accuracies) ss += (a - row.mean) * (a - row.mean);
      row.stddev = std::sqrt(ss / static_cast<double>(row.accuracies.size() - 1));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

SweepResult run_sweep(const SweepRequest& request, const RunInputs& inputs,
                      const fs::path& out_root) {
  if (request.shots.empty() || request.seeds.empty())
    throw InvalidArgument("sweep: need at least one shot count and one seed");
  const auto source = read_dataset(inputs.source);
  const auto pool = read_dataset(inputs.target_pool);
  const auto test = read_dataset(inputs.target_test);
  const std::vector<std::string> digests = {dataset_digest(inputs.source),
                                            dataset_digest(inputs.target_pool),
                                            dataset_digest(inputs.target_test)};
  std::vector<ExperimentConfig> cells;
  for (int shot : request.shots)
    for (auto seed : request.seeds) {
      auto c = request.base;
      c.shot_count = shot;
      c.seed = seed;
      cells.push_back(c);
    }

  SweepResult result;
  result.runs.resize(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::string first_error;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        result.runs[i] = run_experiment(cells[i], source, pool, test, out_root, digests);
      } catch (const std::exception& e) {
        std::lock_guard lock(error_mutex);
        if (first_error.empty()) first_error = e.what();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(request.jobs, static_cast<int>(cells.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (!first_error.empty()) throw Error("sweep: " + first_error);
  result.table = tabulate(result.runs);
  write_report(result.table, out_root, "sweep");
  return result;
}

std::vector<ShotRow> collect_report(const fs::path& root) {
  std::vector<RunSummary> runs;
  if (fs::is_directory(root)) {
    for (const auto& entry : fs::directory_iterator(root)) {
      if (!entry.is_directory() || !entry.path().filename().string().starts_with("run-")) continue;
      const auto eval_path = entry.path() / "eval.json";
      if (!fs::exists(eval_path)) continue;
      const auto bytes = read_file_bytes(eval_path);
      try {
        const json j = json::parse(bytes.begin(), bytes.end());
        RunSummary r;
        r.run_dir = entry.path();
        r.config_hash = j.at("config_hash").get<std::string>();
        r.shot_count = j.at("shot_count").get<int>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.variant = j.at("variant").get<std::string>();
        r.accuracy = j.at("accuracy").get<double>();
        runs.push_back(std::move(r));
      } catch (const json::exception& e) {
        throw FormatError(eval_path.string() + ": " + e.what());
      }
    }
  }
  if (runs.empty()) throw Error("no runs found under " + root.string());
  return tabulate(runs);
}

std::string render_shot_plot(const std::vector<ShotRow>& rows) {
  std::vector<int> shots;
  std::map<std::string, std::vector<const ShotRow*>> lines;
  for (const auto& r : rows) {
    if (std::find(shots.begin(), shots.end(), r.shot_count) == shots.end())
      shots.push_back(r.shot_count);
    lines[r.variant].push_back(&r);
  }
  std::sort(shots.begin(), shots.end());
  const double w = 640, h = 400, left = 60, right = 170, top = 30, bottom = 50;
  const double pw = w - left - right, ph = h - top - bottom;
  auto x_of = [&](int shot) {
    const auto idx = std::find(shots.begin(), shots.end(), shot) - shots.begin();
    return shots.size() == 1 ? left + pw / 2
                             : left + pw * static_cast<double>(idx) / static_cast<double>(shots.size() - 1);
  };
  auto y_of = [&](double acc) { return top + ph * (1.0 - std::clamp(acc, 0.0, 100.0) / 100.0); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\""
     << top + ph << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
     << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 100; tick += 20)
    os << "<text x=\"" << left - 8 << "\" y=\"" << y_of(tick) + 4 << "\" text-anchor=\"end\">"
       << tick << "</text>\n";
  for (int s : shots)
    os << "<text x=\"" << x_of(s) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << s
       << "</text>\n";
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 10
     << "\" text-anchor=\"middle\">shots per class</text>\n";
  os << "<text x=\"15\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 15 " << top + ph / 2
     << ")\" text-anchor=\"middle\">target accuracy (%)</text>\n";
  std::size_t li = 0;
  for (const auto& [variant, pts] : lines) {
    const char* color = colors[li % std::size(colors)];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto* p : pts) os << num(x_of(p->shot_count), 6) << "," << num(y_of(p->mean), 6) << " ";
    os << "\"/>\n";
    for (const auto* p : pts)
      os << "<circle cx=\"" << num(x_of(p->shot_count), 6) << "\" cy=\"" << num(y_of(p->mean), 6)
         << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = top + 16.0 * static_cast<double>(li);
    os << "<rect x=\"" << left + pw + 15 << "\" y=\"" << ly << "\" width=\"10\" height=\"10\" fill=\""
       << color << "\"/>\n";
    os << "<text x=\"" << left + pw + 30 << "\" y=\"" << ly + 9 << "\">" << variant << "</text>\n";
    ++li;
  }
  os << "</svg>\n";
  return os.str();
}

void write_report(const std::vector<ShotRow>& rows, const fs::path& dir, const std::string& stem) {
  fs::create_directories(dir);
  std::string csv = "variant,shot_count,runs,mean_accuracy,std_accuracy\n";
  json arr = json::array();
  for (const auto& r : rows) {
    csv += r.variant + "," + std::to_string(r.shot_count) + "," +
           std::to_string(r.accuracies.size()) + "," + num(r.mean) + "," + num(r.stddev) + "\n";
    arr.push_back({{"variant", r.variant},
                   {"shot_count", r.shot_count},
                   {"accuracies", r.accuracies},
                   {"mean", r.mean},
                   {"std", r.stddev}});
  }
  write_file_atomic(dir / (stem + ".csv"), csv);
  write_file_atomic(dir / (stem + ".json"), arr.dump(2) + "\n");
  write_file_atomic(dir / (stem + ".svg"), render_shot_plot(rows));
}

}  // namespace relamix
