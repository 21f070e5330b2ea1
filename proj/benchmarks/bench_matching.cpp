#include <benchmark/benchmark.h>

#include "csproxy/classifier.hpp"
#include "csproxy/codebook.hpp"
#include "csproxy/rng.hpp"

using namespace csproxy;

namespace {

BitMatrix random_bits(std::size_t rows, std::size_t bits, std::uint64_t seed) {
  rng::Generator gen(seed);
  BitMatrix m(rows, bits);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t b = 0; b < bits; ++b) m.set(r, b, gen.next_unit() < 0.5);
  return m;
}

std::vector<FeatureVector> random_histograms(std::size_t n, int dim,
                                             std::uint64_t seed) {
  rng::Generator gen(seed);
  std::vector<FeatureVector> out(n);
  for (auto& f : out) {
    f.values = Eigen::VectorXd(dim);
    for (int i = 0; i < dim; ++i) f.values[i] = gen.next_unit();
    f.values /= f.values.sum();
    f.label = static_cast<int>(gen.next_below(10));
  }
  return out;
}

}  // namespace

static void BM_Hamming1036(benchmark::State& state) {
  const BitMatrix pair = random_bits(2, 1036, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(hamming(pair.row(0), pair.row(1)));
  }
}
BENCHMARK(BM_Hamming1036);

static void BM_EncodeBow(benchmark::State& state) {
  const BitMatrix descriptors = random_bits(196, 1036, 2);
  Codebook book;
  book.centroids = random_bits(512, 1036, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(encode_bow(descriptors, book));
  }
}
BENCHMARK(BM_EncodeBow);

static void BM_KMeansIteration(benchmark::State& state) {
  const BitMatrix pool = random_bits(4900, 1036, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kmeans_hamming(pool, 128, 1, 2));
  }
}
BENCHMARK(BM_KMeansIteration)->Unit(benchmark::kMillisecond);

static void BM_ChiSquare512(benchmark::State& state) {
  const auto fs = random_histograms(2, 512, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(chi_square(fs[0].values, fs[1].values));
  }
}
BENCHMARK(BM_ChiSquare512);

static void BM_KnnPredict(benchmark::State& state) {
  const auto train = random_histograms(5000, 512, 6);
  const auto query = random_histograms(1, 512, 7);
  const KnnModel model(train, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(knn_predict(model, query[0].values));
  }
}
BENCHMARK(BM_KnnPredict)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
