// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "mmfuse/dataset.hpp"
#include "mmfuse/evaluate.hpp"
#include "mmfuse/features.hpp"
#include "mmfuse/forest.hpp"
#include "mmfuse/parallel.hpp"

using namespace mmfuse;

namespace {

std::vector<GrayImage> noise_patches(int count, int side) {
  std::mt19937 rng(1);
  std::vector<GrayImage> out;
  for (int k = 0; k < count; ++k) {
    std::vector<GrayImage::Pixel> px(static_cast<std::size_t>(side) * side);
    for (auto& p : px) {
      p = static_cast<GrayImage::Pixel>(rng() % 256);
    }
    out.emplace_back(side, side, 8, std::move(px));
  }
  return out;
}

std::vector<LabeledSample> blobs(int n, int dims) {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> nd;
  std::vector<LabeledSample> out;
  for (int i = 0; i < n; ++i) {
    std::vector<double> x(dims);
    for (auto& v : x) {
      v = nd(gen) + 0.8 * (i % 2);
    }
    out.push_back({make_unnamed(std::move(x)), i % 2});
  }
  return out;
}

const std::vector<GrayImage>& patches() {
  static const auto p = noise_patches(64, 100);
  return p;
}

const std::vector<LabeledSample>& training() {
  static const auto t = blobs(400, 24);
  return t;
}

ForestParams forest_params() {
  ForestParams f;
  f.n_trees = 64;
  f.seed = 3;
  return f;
}

void BM_ExtractSerial(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_batch_serial(patches(), FeatureKind::Pathomics, {}));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(patches().size()));
}

void BM_ExtractParallel(benchmark::State& state) {
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_batch(patches(), FeatureKind::Pathomics, {}, workers));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(patches().size()));
}

void BM_ForestSerial(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_forest_serial(training(), forest_params()));
  }
}

void BM_ForestParallel(benchmark::State& state) {
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_forest(training(), forest_params(), 0, workers));
  }
}

void BM_LopoScores(benchmark::State& state) {
  SyntheticSpec spec;
  spec.patients = 40;
  const auto data = materialize(make_synthetic_manifest(spec), {}, {});
  const auto folds = lopo_folds(data);
  ForestParams f;
  f.n_trees = 32;
  const int workers = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(score_modality(data, folds, 0, Aggregation::ScoreMean, f, 7, workers));
  }
}

void worker_counts(benchmark::internal::Benchmark* b) {
  for (int w = 1; w <= std::max(1, available_workers()); w *= 2) {
    b->Arg(w);
  }
  if (available_workers() < 2) {
    b->Arg(2);
  }
}

}  // namespace

BENCHMARK(BM_ExtractSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExtractParallel)->Apply(worker_counts)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForestSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForestParallel)->Apply(worker_counts)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LopoScores)->Apply(worker_counts)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
