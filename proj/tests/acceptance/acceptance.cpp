// Acceptance suite: one PASS/FAIL line per criterion.
//
//   relamix_acceptance [--only 1,2,...] [--epochs N] [--work DIR]
//
// Exit status is non-zero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "oracles.hpp"
#include "relamix/baselines.hpp"
#include "relamix/errors.hpp"
#include "relamix/experiment.hpp"
#include "relamix/losses.hpp"
#include "relamix/relation_sets.hpp"
#include "relamix/sdfm.hpp"
#include "relamix/synthetic_domains.hpp"
#include "relamix/tensor_file.hpp"
#include "relamix/trainer.hpp"
#include "relamix/tran_rd.hpp"

using namespace relamix;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

MatrixXd gaussian(std::mt19937_64& rng, int r, int c, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

FeatureDataset random_source(std::mt19937_64& rng, const std::vector<int>& counts, int T, int d) {
  std::vector<SnippetSequence> seqs;
  for (std::size_t c = 0; c < counts.size(); ++c)
    for (int i = 0; i < counts[c]; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "c%zu_%03d", c, i);
      seqs.push_back({id, static_cast<int>(c), Domain::kSource,
                      (gaussian(rng, T, d, 3.0).array() + static_cast<double>(c)).matrix().cast<float>()});
    }
  return FeatureDataset::make(std::move(seqs), static_cast<int>(counts.size()));
}

// ---------------------------------------------------------------------------

Outcome statistics_oracle() {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> classes(1, 4), snippets(1, 4), dims(1, 8), members(2, 9);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> counts(static_cast<std::size_t>(classes(rng)));
    for (auto& n : counts) n = members(rng);
    const auto ds = random_source(rng, counts, snippets(rng), dims(rng));
    const auto got = compute_source_statistics(ds);
    const auto want = oracle::snippet_statistics(ds);
    for (std::size_t c = 0; c < counts.size(); ++c) {
      const MatrixXd m = oracle::from_mat(want.mean[c]), s = oracle::from_mat(want.std[c]);
      worst = std::max(worst, ((got.mean[c] - m).array().abs() / m.array().abs().max(1e-12)).maxCoeff());
      worst = std::max(worst, ((got.std[c] - s).array().abs() / s.array().abs().max(1e-12)).maxCoeff());
    }
  }
  return {worst < 1e-6, "max relative error " + fmt("%.2e", worst)};
}

Outcome topk_equivalence() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> classes(2, 8), dims(1, 6);
  int mismatches = 0, ties = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int C = classes(rng), d = dims(rng);
    ClassSnippetStatistics stats;
    for (int c = 0; c < C; ++c) {
      MatrixXd mean = gaussian(rng, 1, d);
      // Every third trial duplicates centers to force distance ties.
      if (trial % 3 == 0 && c > 0 && c % 2 == 0) mean = stats.mean[static_cast<std::size_t>(c - 1)];
      stats.mean.push_back(mean);
      stats.std.push_back(MatrixXd::Ones(1, d));
      stats.counts.push_back(2);
    }
    const VectorXd anchor = gaussian(rng, d, 1);
    std::vector<std::vector<double>> centers;
    for (const auto& m : stats.mean) centers.push_back({m.data(), m.data() + d});
    std::set<std::vector<double>> distinct(centers.begin(), centers.end());
    ties += distinct.size() < centers.size();
    for (int k = 1; k <= C; ++k) {
      auto got = select_topk_centers(anchor, stats, 0, k);
      std::sort(got.begin(), got.end());
      mismatches += got != oracle::k_nearest(centers, {anchor.data(), anchor.data() + d}, k);
    }
  }
  return {mismatches == 0 && ties > 0,
          std::to_string(mismatches) + " mismatches, " + std::to_string(ties) + " trials with ties"};
}

Outcome sdfm_worked_example() {
  ClassSnippetStatistics s;
  s.mean = {(MatrixXd(1, 2) << 2, 4).finished(), (MatrixXd(1, 2) << 4, 2).finished()};
  s.std = {(MatrixXd(1, 2) << 1, 1).finished(), (MatrixXd(1, 2) << 3, 3).finished()};
  s.counts = {2, 2};
  const SnippetSequence anchor{"t", 0, Domain::kTarget, Eigen::MatrixXf::Zero(1, 2)};
  const auto dist = synthesize_distribution(anchor, s, 2, 0.21);
  const bool ok = dist.mean(0, 0) == 2.0 && dist.mean(0, 1) == 2.0 && dist.std(0, 0) == 2.21 &&
                  dist.std(0, 1) == 2.21;
  std::ostringstream os;
  os.precision(17);
  os << "mean [" << dist.mean(0, 0) << ", " << dist.mean(0, 1) << "] std [" << dist.std(0, 0)
     << ", " << dist.std(0, 1) << "]";
  return {ok, os.str()};
}

Outcome sampling_convergence() {
  SynthesizedDistribution dist;
  dist.anchor_id = "a";
  dist.mean = (MatrixXd(2, 3) << 2, -1, 0.5, 0, 3, -2).finished();
  dist.std = (MatrixXd(2, 3) << 2.21, 0.5, 1.0, 0.21, 3.0, 1.5).finished();
  const int n = 50000;
  const auto xs = sample_features(dist, n, 4);
  double worst_mean = 0, worst_std = 0;
  for (Eigen::Index t = 0; t < 2; ++t)
    for (Eigen::Index j = 0; j < 3; ++j) {
      double sum = 0, sq = 0;
      for (const auto& x : xs) sum += x.features(t, j);
      const double m = sum / n;
      for (const auto& x : xs) sq += (x.features(t, j) - m) * (x.features(t, j) - m);
      const double sd = std::sqrt(sq / (n - 1));
      worst_mean = std::max(worst_mean, std::abs(m - dist.mean(t, j)) / dist.std(t, j));
      worst_std = std::max(worst_std, std::abs(sd / dist.std(t, j) - 1.0));
    }
  return {worst_mean < 0.05 && worst_std < 0.02,
          "mean off by " + fmt("%.4f", worst_mean) + " sigma, std off by " + fmt("%.4f", worst_std * 100) + "%"};
}

Outcome relation_combinatorics() {
  int bad = 0;
  for (int n = 2; n <= 8; ++n) {
    bad += enumerate_scales(n).size() != static_cast<std::size_t>(n - 1);
    for (int r = 2; r <= n; ++r) {
      std::vector<RelationTuple> brute;
      for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (__builtin_popcount(mask) != r) continue;
        RelationTuple t;
        for (int i = 0; i < n; ++i)
          if (mask & (1u << i)) t.push_back(i);
        brute.push_back(t);
      }
      std::sort(brute.begin(), brute.end());
      std::uint64_t choose = 1;
      for (int i = 1; i <= r; ++i) choose = choose * static_cast<std::uint64_t>(n - r + i) / static_cast<std::uint64_t>(i);
      const auto got = enumerate_tuples(n, r);
      bad += got != brute || got.size() != choose;
    }
  }
  return {bad == 0, std::to_string(bad) + " mismatching (N_T, r) cases"};
}

TranRdParameters perturbed(const TranRdConfig& cfg, std::uint64_t seed) {
  TranRdParameters p(cfg);
  p.initialize(seed);
  std::mt19937_64 rng(seed ^ 0x5eed);
  std::normal_distribution<double> n(0.0, 0.3);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.values()[i] += n(rng);
  return p;
}

Outcome attention_invariants() {
  std::mt19937_64 rng(6);
  TranRdConfig cfg;
  cfg.dim = 8;
  cfg.heads = 2;
  const auto p = perturbed(cfg, 6);
  double softmax_err = 0, mean_err = 0, var_err = 0, perm_err = 0;
  auto check_norm = [&](const LayerNormTrace& t) {
    for (Eigen::Index i = 0; i < t.normalized.rows(); ++i) {
      mean_err = std::max(mean_err, std::abs(t.normalized.row(i).mean()));
      // The epsilon under the root shrinks the variance by var / (var + eps).
      var_err = std::max(var_err, std::abs(t.normalized.row(i).squaredNorm() / cfg.dim - 1.0));
    }
  };
  for (int trial = 0; trial < 100; ++trial) {
    const MatrixXd x = gaussian(rng, 1 + trial % 5, cfg.dim, 2.0);
    for (const auto* block : {&p.relation_block(), &p.scale_block()}) {
      BlockTrace tr;
      attention_block(p, *block, x, &tr);
      for (const auto& h : tr.heads) {
        softmax_err = std::max(softmax_err, (h.weights.rowwise().sum().array() - 1.0).abs().maxCoeff());
        check_norm(h.norm);
      }
      check_norm(tr.out_norm);
    }
    const MatrixXd x3 = gaussian(rng, 3, cfg.dim, 2.0);
    for (const auto* block : {&p.relation_block(), &p.scale_block()}) {
      const MatrixXd y = attention_block(p, *block, x3);
      std::vector<int> perm = {0, 1, 2};
      do {
        MatrixXd xp(3, cfg.dim), yp(3, cfg.dim);
        for (int i = 0; i < 3; ++i) {
          xp.row(i) = x3.row(perm[static_cast<std::size_t>(i)]);
          yp.row(i) = y.row(perm[static_cast<std::size_t>(i)]);
        }
        perm_err = std::max(perm_err, (attention_block(p, *block, xp) - yp).cwiseAbs().maxCoeff());
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
  }
  const bool ok = softmax_err < 1e-6 && mean_err < 1e-6 && var_err < 1e-4 && perm_err < 1e-9;
  return {ok, "softmax " + fmt("%.1e", softmax_err) + ", LN mean " + fmt("%.1e", mean_err) +
                  ", LN var " + fmt("%.1e", var_err) + ", permutation " + fmt("%.1e", perm_err)};
}

Outcome gradient_check() {
  TranRdConfig cfg;
  cfg.dim = 4;
  cfg.class_count = 2;
  cfg.heads = 2;
  cfg.dropout = 0.0;
  auto p = perturbed(cfg, 7);
  std::mt19937_64 rng(7);
  auto make = [&](const std::vector<int>& counts, Domain domain, const char* prefix) {
    std::vector<SnippetSequence> seqs;
    for (std::size_t c = 0; c < counts.size(); ++c)
      for (int i = 0; i < counts[c]; ++i)
        seqs.push_back({prefix + std::to_string(c) + std::to_string(i), static_cast<int>(c), domain,
                        gaussian(rng, 3, 4).cast<float>()});
    return FeatureDataset::make(std::move(seqs), 2);
  };
  const auto source = make({2, 2}, Domain::kSource, "s");
  const auto target = make({1, 1}, Domain::kTarget, "t");
  const auto synth = make({2, 1}, Domain::kSynthesized, "a");
  StepBatch batch;
  for (const auto& s : source.sequences()) batch.source.push_back({&s, {}, 0});
  for (const auto& s : target.sequences()) batch.target.push_back({&s, {}, 0});
  for (const auto& s : synth.sequences()) {
    batch.synth.push_back({&s, {}, 0});
    batch.synth_permuted.push_back({&s, {1, 2, 0}, 0});
  }
  batch.cdia = {{0, {2, 3, 6}}, {1, {2, 6}}, {2, {0, 1, 4}}, {3, {5}}};
  batch.aux = {{0, {2, 4}}, {1, {2}}, {2, {0, 1, 3}}};
  PrototypeBank bank{gaussian(rng, 2, 4), 0};
  const auto plan = make_relation_plan(3, 3, 0);
  const LossWeights w;  // default weights
  VectorXd grad = VectorXd::Zero(p.size());
  const auto base = evaluate_step(p, batch, plan, &bank, w, Mode::kTrain, &grad);
  const auto& c = base.components;
  const bool all_active = c.cdia != 0 && c.ce_source != 0 && c.ce_target != 0 && c.ce_synth != 0 && c.aux != 0;

  const double h = 1e-5;
  double worst = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double keep = p.values()[i];
    p.values()[i] = keep + h;
    const double up = evaluate_step(p, batch, plan, &bank, w, Mode::kTrain, nullptr).total;
    p.values()[i] = keep - h;
    const double down = evaluate_step(p, batch, plan, &bank, w, Mode::kTrain, nullptr).total;
    p.values()[i] = keep;
    const double fd = (up - down) / (2 * h);
    // Floor keeps round-off on vanishing gradients from reading as relative error.
    worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-7}));
  }
  return {all_active && worst < 1e-3, std::to_string(p.size()) + " parameters, max relative error " +
                                          fmt("%.2e", worst) + (all_active ? "" : ", a loss term is inactive")};
}

Outcome analytic_losses() {
  const MatrixXd protos = MatrixXd::Identity(2, 2);
  const double cdia = cdia_loss((MatrixXd(1, 2) << 3, 0).finished(), {0}, {protos, 0},
                                {(MatrixXd(1, 2) << 0, 1).finished()}, {{1}});
  const double ce = cross_entropy(MatrixXd::Zero(1, 4), {1});
  const bool ok = std::abs(cdia + 1.0) < 1e-6 && std::abs(ce - std::log(4.0)) < 1e-6;
  return {ok, "cdia " + fmt("%.9f", cdia) + ", ce " + fmt("%.9f", ce)};
}

Outcome baseline_exactness() {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> sizes(5, 40), dims(1, 8), classes(2, 6);
  int disagreements = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = sizes(rng), d = dims(rng), C = classes(rng);
    const MatrixXd src = gaussian(rng, n, d), tst = gaussian(rng, sizes(rng), d);
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) labels.push_back(static_cast<int>(rng() % static_cast<unsigned>(C)));
    disagreements += predict_knn(src, labels, tst, 1) != predict_nearest_neighbor(src, labels, tst);
  }
  std::vector<int> truth(10000);
  for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = static_cast<int>(rng() % 8);
  const double acc = accuracy_percent(predict_random(truth.size(), 8, 9), truth);
  return {disagreements == 0 && std::abs(acc - 12.5) <= 2.0,
          std::to_string(disagreements) + " kNN(1)/NN disagreements, random " + fmt("%.2f", acc) + "%"};
}

// ---------------------------------------------------------------------------
// Training criteria share one data pair and memoize runs by config hash.

class Runner {
 public:
  Runner(fs::path work, int epochs) : work_(std::move(work)), epochs_(epochs) {
    pair_ = generate_pair({}, default_shift(0));
  }

  ExperimentConfig config(int shot, std::uint64_t seed, std::vector<std::string> ablations = {}) const {
    ExperimentConfig c;
    c.shot_count = shot;
    c.seed = seed;
    c.epochs = epochs_;
    c.initial_lr = 1e-3;
    c.lr_decay_epochs = {epochs_ * 6 / 10, epochs_ * 8 / 10};
    for (const auto& a : ablations) c.ablation.apply(a);
    return c;
  }

  double accuracy(const ExperimentConfig& c) {
    const auto key = config_hash(c);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run_experiment(c, pair_.source, pair_.target_train_pool, pair_.target_test, work_);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("    run %-22s shot %2d seed %llu: %6.2f%%  (%.0f s)\n", r.variant.c_str(), c.shot_count,
                static_cast<unsigned long long>(c.seed), r.accuracy, secs);
    std::fflush(stdout);
    return cache_[key] = r.accuracy;
  }

  double mean(int shot, const std::vector<std::uint64_t>& seeds, const std::vector<std::string>& ablations = {}) {
    double sum = 0;
    for (auto s : seeds) sum += accuracy(config(shot, s, ablations));
    return sum / static_cast<double>(seeds.size());
  }

  const SyntheticPair& pair() const { return pair_; }

 private:
  fs::path work_;
  int epochs_;
  SyntheticPair pair_;
  std::map<std::string, double> cache_;
};

Outcome adaptation_gain(Runner& run) {
  const auto t0 = std::chrono::steady_clock::now();
  const double full = run.mean(5, {0, 1, 2});
  const double source_only = run.mean(5, {0, 1, 2}, {"source_only"});
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {full - source_only >= 5.0 && secs < 600.0,
          "full " + fmt("%.2f", full) + " vs source-only " + fmt("%.2f", source_only) + " (gain " +
              fmt("%.2f", full - source_only) + "), " + fmt("%.0f", secs) + " s"};
}

Outcome shot_trend(Runner& run) {
  std::vector<double> means;
  std::string detail;
  for (int shot : {1, 5, 10, 20}) {
    means.push_back(run.mean(shot, {0, 1, 2}));
    detail += (detail.empty() ? "" : ", ") + std::string("shot ") + std::to_string(shot) + " " +
              fmt("%.2f", means.back());
  }
  bool ok = true;
  for (std::size_t i = 1; i < means.size(); ++i) ok = ok && means[i] >= means[i - 1] - 1.0;
  return {ok, detail};
}

Outcome ablation_direction(Runner& run) {
  const std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  const double full = run.mean(1, seeds);
  bool ok = true;
  std::string detail = "full " + fmt("%.2f", full);
  for (const char* a : {"sdfm", "cdia", "tran_rd"}) {
    const double m = run.mean(1, seeds, {a});
    ok = ok && m < full;
    detail += std::string(", -") + a + " " + fmt("%.2f", m);
  }
  return {ok, detail};
}

Outcome determinism(const fs::path& work) {
  SyntheticLayout layout;
  layout.class_count = 3;
  layout.per_class_source = 8;
  layout.per_class_target = 6;
  layout.snippet_count = 3;
  layout.dim = 4;
  const auto pair = generate_pair(layout, default_shift(0));
  ExperimentConfig c;
  c.shot_count = 2;
  c.epochs = 2;
  c.heads = 2;
  c.per_class_synth = 4;
  const auto a = run_experiment(c, pair.source, pair.target_train_pool, pair.target_test, work / "det-a");
  const auto b = run_experiment(c, pair.source, pair.target_train_pool, pair.target_test, work / "det-b");
  int differing = 0;
  for (const char* f : {"config.json", "split.json", "metrics.csv", "losses.csv", "eval.json", "logits.csv"})
    differing += read_file_bytes(a.run_dir / f) != read_file_bytes(b.run_dir / f);

  write_dataset(pair.source, work / "ds-a");
  write_dataset(read_dataset(work / "ds-a"), work / "ds-b");
  int dataset_diffs = 0, files = 0;
  for (const auto& e : fs::directory_iterator(work / "ds-a")) {
    ++files;
    const auto other = work / "ds-b" / e.path().filename();
    dataset_diffs += !fs::exists(other) || read_file_bytes(e.path()) != read_file_bytes(other);
  }
  return {differing == 0 && dataset_diffs == 0 && files > 1,
          std::to_string(differing) + " differing metric files, " + std::to_string(dataset_diffs) + "/" +
              std::to_string(files) + " differing dataset files"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relamix acceptance suite"};
  std::vector<int> only;
  int epochs = 15;
  std::string work;
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  app.add_option("--epochs", epochs, "training epochs for criteria 10-12")->check(CLI::PositiveNumber);
  app.add_option("--work", work, "scratch directory for run artifacts");
  CLI11_PARSE(app, argc, argv);

  if (work.empty()) {
    const char* tmp = std::getenv("RELAMIX_TEST_TMP");
    work = (fs::path(tmp ? tmp : fs::temp_directory_path().string()) / "relamix-acceptance").string();
  }
  fs::remove_all(work);
  fs::create_directories(work);

  Runner runner(work, epochs);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"statistics oracle", statistics_oracle},
      {"top-K equivalence", topk_equivalence},
      {"SDFM worked example", sdfm_worked_example},
      {"sampling convergence", sampling_convergence},
      {"relation-set combinatorics", relation_combinatorics},
      {"attention invariants", attention_invariants},
      {"gradient correctness", gradient_check},
      {"analytic loss values", analytic_losses},
      {"baseline exactness", baseline_exactness},
      {"adaptation gain (shot 5)", [&] { return adaptation_gain(runner); }},
      {"shot trend", [&] { return shot_trend(runner); }},
      {"ablation direction (shot 1)", [&] { return ablation_direction(runner); }},
      {"determinism and serialization", [&] { return determinism(work); }},
  };
  const double limits[] = {10, 5, 0, 0, 0, 0, 60, 0, 0, 0, 0, 0, 0};

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limits[i] > 0 && secs >= limits[i]) {
      out.pass = false;
      out.detail += " [over the " + fmt("%.0f", limits[i]) + " s budget]";
    }
    failed += !out.pass;
    std::printf("%s %2d %s: %s (%.2f s)\n", out.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
