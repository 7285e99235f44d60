#include <benchmark/benchmark.h>

#include <filesystem>

#include "midsg/fid.hpp"
#include "midsg/ops.hpp"
#include "midsg/trainer.hpp"

using namespace midsg;
namespace fs = std::filesystem;

namespace {

ag::Tensor random_tensor(ag::Shape shape, std::uint64_t seed, bool param = false) {
  Rng rng(seed);
  std::vector<double> v(ag::numel(shape));
  fill_normal(rng, v, 0.5);
  return param ? ag::Tensor::parameter(std::move(shape), std::move(v)) : ag::Tensor::from(std::move(shape), std::move(v));
}

void BM_Conv2dForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  ag::Tensor x = random_tensor({16, c, 32, 32}, 1), w = random_tensor({c, c, 3, 3}, 2), b = random_tensor({c}, 3);
  ag::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(ag::conv2d(x, w, b, 1, 1));
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_Conv2dForward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  ag::Tensor x = random_tensor({16, c, 32, 32}, 1, true), w = random_tensor({c, c, 3, 3}, 2, true);
  for (auto _ : state) {
    ag::Tensor loss = ag::mean(ag::conv2d(x, w, ag::Tensor(), 1, 1));
    ag::backward(loss);
  }
}
BENCHMARK(BM_Conv2dBackward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Fid(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0)), n = 4 * d;
  ag::Tensor a = random_tensor({n, d}, 4), b = random_tensor({n, d}, 5);
  GaussianStats r = gaussian_stats(a.values(), n, d), s = gaussian_stats(b.values(), n, d);
  for (auto _ : state) benchmark::DoNotOptimize(fid(r, s));
}
BENCHMARK(BM_Fid)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_TrainStep(benchmark::State& state) {
  const fs::path data = fs::temp_directory_path() / "midsg_bench_data";
  if (!fs::exists(data / "manifest.json")) generate_toy_dataset(ToyDomainSpec{}, 16, default_toy_domains(), data);
  TrainConfig config;
  config.data_dir = data.string();
  config.total_steps = 1;
  config.batch_size = static_cast<int>(state.range(0));
  DatasetSplit split = split_dataset(data, config.split_fraction, config.split_seed);
  TrainState train(config);
  BatchIterator batches(split.train, 0);
  for (auto _ : state) train_step(train, batches.next(config.batch_size));
  state.SetItemsProcessed(state.iterations() * config.batch_size);
}
BENCHMARK(BM_TrainStep)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
