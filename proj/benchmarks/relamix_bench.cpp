#include <random>

#include <benchmark/benchmark.h>

#include "relamix/baselines.hpp"
#include "relamix/sdfm.hpp"
#include "relamix/synthetic_domains.hpp"
#include "relamix/tran_rd.hpp"

using namespace relamix;

namespace {

Eigen::MatrixXd random_sequence(int T, int d) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  Eigen::MatrixXd x(T, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
  return x;
}

TranRdParameters model(int d) {
  TranRdConfig cfg;
  cfg.dim = d;
  TranRdParameters p(cfg);
  p.initialize(0);
  return p;
}

// Default synthetic shape: T_snip = 5, d = 16, eight heads.
void BM_AggregateForward(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const auto p = model(d);
  const auto x = random_sequence(5, d);
  const auto plan = make_relation_plan(5, kDefaultTuplesPerScale, 0);
  for (auto _ : state) benchmark::DoNotOptimize(aggregate(p, x, plan, Mode::kTrain, 1).vector);
}
BENCHMARK(BM_AggregateForward)->Arg(16)->Arg(64);

void BM_AggregateForwardBackward(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const auto p = model(d);
  const auto x = random_sequence(5, d);
  const auto plan = make_relation_plan(5, kDefaultTuplesPerScale, 0);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(p.size());
  const Eigen::VectorXd upstream = Eigen::VectorXd::Ones(d);
  for (auto _ : state) {
    AggregateTrace trace;
    aggregate(p, x, plan, Mode::kTrain, 1, &trace);
    aggregate_backward(p, trace, upstream, grad);
  }
  benchmark::DoNotOptimize(grad);
}
BENCHMARK(BM_AggregateForwardBackward)->Arg(16)->Arg(64);

void BM_SourceStatistics(benchmark::State& state) {
  SyntheticLayout layout;
  layout.per_class_source = static_cast<int>(state.range(0));
  const auto pair = generate_pair(layout, default_shift(0));
  for (auto _ : state) benchmark::DoNotOptimize(compute_source_statistics(pair.source));
}
BENCHMARK(BM_SourceStatistics)->Arg(100)->Arg(1000);

void BM_KnnBaseline(benchmark::State& state) {
  SyntheticLayout layout;
  layout.per_class_source = static_cast<int>(state.range(0));
  const auto pair = generate_pair(layout, default_shift(0));
  const auto src = pool_dataset(pair.source), tst = pool_dataset(pair.target_test);
  const auto labels = labels_of(pair.source);
  for (auto _ : state) benchmark::DoNotOptimize(predict_knn(src, labels, tst, 5));
}
BENCHMARK(BM_KnnBaseline)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
