#include <benchmark/benchmark.h>

#include <random>

#include "sst/autodiff/ops.hpp"
#include "sst/model/blocks.hpp"
#include "sst/model/reversible_net.hpp"
#include "sst/optics/cassi.hpp"
#include "sst/train/adam.hpp"
#include "sst/train/loss.hpp"
#include "sst/verify/gradcheck.hpp"

namespace {

using sst::ad::Tensor;
using sst::verify::random_tensor;

void forward_project(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(0);
  auto cube = random_tensor<float>({28, n, n}, rng, 0, 1);
  auto mask = random_tensor<float>({n, n}, rng, 0, 1);
  for (auto _ : state) benchmark::DoNotOptimize(sst::optics::forward_project(cube, mask, {2, 0}));
}
BENCHMARK(forward_project)->Arg(64)->Arg(256);

void conv2d_3x3(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  auto x = random_tensor<float>({c, 32, 32}, rng);
  auto k = random_tensor<float>({c, c, 3, 3}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(sst::ad::conv2d(x, k));
}
BENCHMARK(conv2d_3x3)->Arg(16)->Arg(32);

void spectral_block(benchmark::State& state) {
  sst::model::ParameterSet<float> ps(2);
  auto p = sst::model::make_spectral_block(ps, "b", 16, 1, 2);
  std::mt19937_64 rng(2);
  auto x = random_tensor<float>({16, 32, 32}, rng);
  sst::ad::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(sst::model::spectral_attention_block(x, p));
}
BENCHMARK(spectral_block);

void spatial_block(benchmark::State& state) {
  sst::model::ParameterSet<float> ps(3);
  auto p = sst::model::make_spatial_block(ps, "b", 16, 1, 8, 2);
  std::mt19937_64 rng(3);
  auto x = random_tensor<float>({16, 32, 32}, rng);
  sst::ad::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(sst::model::spatial_attention_block(x, p));
}
BENCHMARK(spatial_block);

// One forward, backward and Adam update of the toy model.
void train_step(benchmark::State& state) {
  auto cfg = sst::model::toy_config();
  cfg.stages = static_cast<std::size_t>(state.range(0));
  sst::model::ReversibleNet<float> net(cfg, 4);
  std::mt19937_64 rng(4);
  auto truth = random_tensor<float>({cfg.channels, cfg.height, cfg.width}, rng, 0, 1);
  auto mask = random_tensor<float>({cfg.height, cfg.width}, rng, 0, 1);
  auto y = sst::optics::forward_project(truth, mask, cfg.dispersion).detach();
  sst::train::OptimizerState<float> opt;
  for (auto _ : state) {
    net.parameters().zero_grad();
    auto terms = sst::train::reconstruction_loss(net.reconstruct(y, mask), truth, y, mask, cfg.dispersion);
    sst::ad::backward(terms.total);
    sst::train::adam_step(net.parameters(), opt, 1e-4);
  }
}
BENCHMARK(train_step)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
