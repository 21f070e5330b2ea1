#include <benchmark/benchmark.h>

#include "csproxy/descriptor.hpp"
#include "csproxy/rng.hpp"
#include "csproxy/sensing.hpp"

using namespace csproxy;

namespace {

Eigen::MatrixXd random_image(int side, std::uint64_t seed) {
  rng::Generator gen(seed);
  Eigen::MatrixXd img(side, side);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) img(r, c) = gen.next_unit();
  return img;
}

}  // namespace

static void BM_Dct2(benchmark::State& state) {
  const int b = static_cast<int>(state.range(0));
  const Eigen::MatrixXd block = random_image(b, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dct2(block));
  }
}
BENCHMARK(BM_Dct2)->Arg(8)->Arg(12)->Arg(16)->Arg(24);

static void BM_DescribePoint(benchmark::State& state) {
  const Eigen::MatrixXd img = random_image(28, 2);
  const auto cfg = ScaleConfig::preset(
      state.range(0) ? EnergyLevel::E100 : EnergyLevel::E90);
  for (auto _ : state) {
    benchmark::DoNotOptimize(describe_point(img, 13, 13, cfg));
  }
}
BENCHMARK(BM_DescribePoint)->Arg(0)->Arg(1);

static void BM_DescribeDense28(benchmark::State& state) {
  const Eigen::MatrixXd img = random_image(28, 3);
  const auto cfg = ScaleConfig::preset(EnergyLevel::E100);
  const KeypointGrid grid = KeypointGrid::regular(28, 28, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(describe_dense(img, grid, cfg));
  }
}
BENCHMARK(BM_DescribeDense28);

static void BM_SenseBackProject(benchmark::State& state) {
  const auto psi = MeasurementMatrix::generate(196, 784, 1);
  const Eigen::MatrixXd img = random_image(28, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(back_project(sense(img, psi), psi, 28, 28));
  }
}
BENCHMARK(BM_SenseBackProject);

BENCHMARK_MAIN();
