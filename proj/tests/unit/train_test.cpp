#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "sst/autodiff/ops.hpp"
#include "sst/io/synthetic.hpp"
#include "sst/optics/cassi.hpp"
#include "sst/train/adam.hpp"
#include "sst/train/loss.hpp"
#include "sst/train/metrics.hpp"
#include "sst/train/schedule.hpp"
#include "sst/train/trainer.hpp"
#include "sst/verify/gradcheck.hpp"
#include "sst/verify/oracles.hpp"

using namespace sst::train;
using sst::ad::Shape;
using sst::ad::Tensor;
using sst::verify::random_tensor;
namespace ref = sst::verify::ref;

namespace {

using Td = Tensor<double>;

std::vector<double> buf(const Td& t) { return {t.values().begin(), t.values().end()}; }

sst::model::SstConfig tiny_config() {
  sst::model::SstConfig cfg;
  cfg.height = cfg.width = 16;
  cfg.channels = 4;
  cfg.window = 4;
  cfg.base_channels = 4;
  cfg.levels = 1;
  return cfg;
}

Dataset<float> tiny_data(std::size_t scenes) {
  Dataset<float> data;
  for (std::size_t i = 0; i < scenes; ++i) {
    sst::io::SceneSpec spec;
    spec.height = spec.width = 16;
    spec.channels = 4;
    spec.seed = i + 1;
    (i + 1 < scenes ? data.train : data.validation).push_back(sst::io::generate_scene(spec));
  }
  data.mask = sst::io::generate_mask(16, 16, 0.5, 99);
  return data;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST(Loss, PerfectReconstructionIsZero) {
  std::mt19937_64 rng(0);
  auto truth = random_tensor<double>({3, 5, 5}, rng, 0, 1);
  auto mask = random_tensor<double>({5, 5}, rng, 0, 1);
  sst::optics::DispersionConfig d{1, 0};
  auto y = sst::optics::forward_project(truth, mask, d);
  for (double xi : {0.0, 0.2, 5.0}) {
    LossConfig lc;
    lc.xi = xi;
    EXPECT_EQ(reconstruction_loss(truth, truth, y, mask, d, lc).total.item(), 0.0);
  }
}

TEST(Loss, ZeroWeightIsPlainL2) {
  std::mt19937_64 rng(1);
  auto x = random_tensor<double>({3, 4, 4}, rng), t = random_tensor<double>({3, 4, 4}, rng);
  auto mask = random_tensor<double>({4, 4}, rng, 0, 1);
  auto y = random_tensor<double>({4, 6}, rng);
  LossConfig lc;
  lc.xi = 0;
  lc.normalize = false;
  double l2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) l2 += std::pow(x.values()[i] - t.values()[i], 2);
  EXPECT_NEAR(reconstruction_loss(x, t, y, mask, {1, 0}, lc).total.item(), l2, 1e-12);
}

TEST(Loss, MatchesLoopOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    for (bool normalize : {true, false}) {
      std::mt19937_64 rng(seed);
      auto x = random_tensor<double>({4, 6, 5}, rng), t = random_tensor<double>({4, 6, 5}, rng);
      auto mask = random_tensor<double>({6, 5}, rng, 0, 1);
      auto y = random_tensor<double>({6, 11}, rng);
      LossConfig lc;
      lc.normalize = normalize;
      const double got = reconstruction_loss(x, t, y, mask, {2, 0}, lc).total.item();
      const double want = ref::reconstruction_loss(buf(x), buf(t), buf(y), buf(mask), 4, 6, 5, 2, 0.2, normalize);
      EXPECT_LE(std::abs(got - want) / std::abs(want), 1e-6);
    }
}

TEST(Loss, GradientMatchesDifferences) {
  std::mt19937_64 rng(2);
  auto x = random_tensor<double>({3, 4, 4}, rng).set_requires_grad();
  auto t = random_tensor<double>({3, 4, 4}, rng);
  auto mask = random_tensor<double>({4, 4}, rng, 0, 1);
  auto y = random_tensor<double>({4, 6}, rng);
  auto f = [&] { return reconstruction_loss(x, t, y, mask, {1, 0}).total; };
  EXPECT_LE(sst::verify::gradcheck<double>(f, {x}, rng), 1e-4);
}

TEST(Loss, ShapeMismatchAndNegativeWeightRejected) {
  Td x({3, 4, 4}), t({3, 4, 5}), mask({4, 4}), y({4, 6});
  EXPECT_THROW(reconstruction_loss(x, t, y, mask, {1, 0}), sst::ad::ShapeError);
  LossConfig lc;
  lc.xi = -0.1;
  EXPECT_THROW(lc.validate(), std::invalid_argument);
}

// ---------------------------------------------------------------------------

TEST(Adam, ZeroGradientLeavesParameterUnchanged) {
  std::vector<double> p = {1.5, -2.0}, g = {0, 0}, m = {0, 0}, v = {0, 0};
  for (std::size_t t = 1; t <= 5; ++t) adam_update<double>(p, g, m, v, t, 1e-2, 0.9, 0.999, 1e-8);
  EXPECT_EQ(p, (std::vector<double>{1.5, -2.0}));
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
  std::vector<double> p = {0}, g = {0.37}, m = {0}, v = {0};
  const double lr = 1e-3;
  double before = 0;
  for (std::size_t t = 1; t <= 10000; ++t) {
    before = p[0];
    adam_update<double>(p, g, m, v, t, lr, 0.9, 0.999, 1e-8);
  }
  EXPECT_NEAR(std::abs(p[0] - before), lr, 0.01 * lr);
}

TEST(Adam, ThreeHandSimulatedSteps) {
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double grads[3] = {0.5, -1.0, 2.0};
  double x = 1.0, m = 0, v = 0;
  std::vector<double> p = {1.0}, fm = {0}, sv = {0};
  for (int t = 1; t <= 3; ++t) {
    m = b1 * m + (1 - b1) * grads[t - 1];
    v = b2 * v + (1 - b2) * grads[t - 1] * grads[t - 1];
    const double mhat = m / (1 - std::pow(b1, t)), vhat = v / (1 - std::pow(b2, t));
    x = x - lr * mhat / (std::sqrt(vhat) + eps);
    std::vector<double> g = {grads[t - 1]};
    adam_update<double>(p, g, fm, sv, t, lr, b1, b2, eps);
    EXPECT_EQ(p[0], x) << "step " << t;
  }
}

TEST(Adam, NonFiniteGradientRejectedBeforeAnyUpdate) {
  sst::model::ParameterSet<double> ps(0);
  auto a = ps.create("a", {2}, sst::model::Init::ones);
  auto b = ps.create("b", {2}, sst::model::Init::ones);
  auto ga = a.node()->grad_buffer();
  ga[0] = 1.0;
  auto gb = b.node()->grad_buffer();
  gb[1] = std::numeric_limits<double>::quiet_NaN();
  OptimizerState<double> st;
  try {
    adam_step(ps, st, 0.1);
    FAIL() << "expected NonFiniteGradient";
  } catch (const NonFiniteGradient& e) {
    EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos) << e.what();
  }
  EXPECT_EQ(a.values(), (std::vector<double>{1, 1}));
  EXPECT_EQ(st.step, 0u);
}

// ---------------------------------------------------------------------------

TEST(Schedule, HalvesExactlyEveryPeriod) {
  Schedule s;
  for (std::size_t e = 0; e < 300; ++e) EXPECT_EQ(s.lr(e), 4e-4 * std::pow(0.5, static_cast<double>(e / 50)));
  EXPECT_EQ(s.lr(49), 4e-4);
  EXPECT_EQ(s.lr(50), 2e-4);
  EXPECT_EQ(s.lr(100), 1e-4);
  s.period = 0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.period = 1;
  s.initial_lr = -1;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

// ---------------------------------------------------------------------------

TEST(Psnr, ClosedForms) {
  std::vector<double> a(64, 0.3), b(64, 0.3);
  EXPECT_EQ(psnr(a, b, 1.0), std::numeric_limits<double>::infinity());
  std::vector<double> c(64, 1.3);
  EXPECT_NEAR(psnr(a, c, 1.0), 0.0, 1e-9);
  std::vector<double> d(64, 0.4);
  EXPECT_NEAR(psnr(a, d, 1.0), 20.0, 1e-9);
}

TEST(Psnr, SymmetricAndRejectsShapeMismatch) {
  std::mt19937_64 rng(3);
  auto a = random_tensor<double>({2, 6, 6}, rng, 0, 1), b = random_tensor<double>({2, 6, 6}, rng, 0, 1);
  EXPECT_EQ(psnr(a, b, 1.0), psnr(b, a, 1.0));
  EXPECT_THROW(psnr(a, Td({2, 6, 5}), 1.0), std::invalid_argument);
}

TEST(Ssim, IdenticalIsExactlyOne) {
  std::mt19937_64 rng(4);
  auto a = random_tensor<double>({3, 16, 16}, rng, 0, 1);
  EXPECT_EQ(ssim(a, a), 1.0);
}

TEST(Ssim, AntiCorrelatedIsNegative) {
  // Checkerboard plus small noise keeps every window's mean near zero.
  std::mt19937_64 rng(5);
  auto a = random_tensor<double>({16, 16}, rng, -0.01, 0.01);
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 16; ++j) a.data()[i * 16 + j] += (i + j) % 2 ? -0.5 : 0.5;
  EXPECT_LT(ssim(a, sst::ad::scale(a, -1.0)), 0.0);
}

TEST(Ssim, MatchesPerWindowOracleAndIsSymmetric) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    auto a = random_tensor<double>({16, 16}, rng, 0, 1), b = random_tensor<double>({16, 16}, rng, 0, 1);
    const double got = ssim(a, b), want = ref::ssim(buf(a), buf(b), 16, 16);
    EXPECT_LE(std::abs(got - want) / std::abs(want), 1e-6);
    EXPECT_EQ(ssim(a, b), ssim(b, a));
  }
}

TEST(Ssim, ImageSmallerThanWindowRejected) {
  EXPECT_THROW(ssim(Td({10, 16}), Td({10, 16})), std::invalid_argument);
}

// ---------------------------------------------------------------------------

TEST(Trainer, ZeroLearningRateFreezesWeights) {
  sst::model::ReversibleNet<float> net(tiny_config(), 1);
  const auto before = net.parameters().snapshot();
  TrainConfig cfg;
  cfg.schedule = {0.0, 50, 1};
  cfg.iterations_per_epoch = 3;
  auto result = train(net, tiny_data(3), cfg);
  EXPECT_EQ(result.status, TrainStatus::completed);
  EXPECT_EQ(net.parameters().snapshot(), before);
}

TEST(Trainer, SameSeedGivesBitIdenticalLogsAndWeights) {
  auto run = [] {
    sst::model::ReversibleNet<float> net(tiny_config(), 2);
    TrainConfig cfg;
    cfg.schedule = {1e-3, 2, 3};
    cfg.iterations_per_epoch = 3;
    cfg.batch_size = 2;
    cfg.seed = 5;
    cfg.record_wall_time = false;
    auto result = train(net, tiny_data(4), cfg);
    std::ostringstream log;
    write_metrics_header(log);
    for (const auto& r : result.epochs) write_metrics_row(log, r);
    return std::make_pair(log.str(), net.parameters().snapshot());
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  EXPECT_EQ(std::count(a.first.begin(), a.first.end(), '\n'), 4);
}

TEST(Trainer, NonFiniteDataDivergesAndRestoresWeights) {
  sst::model::ReversibleNet<float> net(tiny_config(), 3);
  const auto before = net.parameters().snapshot();
  auto data = tiny_data(3);
  data.train[0].data()[5] = std::numeric_limits<float>::quiet_NaN();
  data.train.resize(1);
  TrainConfig cfg;
  cfg.schedule = {1e-3, 50, 2};
  auto result = train(net, data, cfg);
  EXPECT_EQ(result.status, TrainStatus::diverged);
  EXPECT_FALSE(result.message.empty());
  EXPECT_EQ(net.parameters().snapshot(), before);
}

TEST(Trainer, EvaluationIndependentOfThreadCount) {
  sst::model::ReversibleNet<float> net(tiny_config(), 4);
  auto data = tiny_data(5);
  auto one = evaluate(net, data.train, data.mask, 1), many = evaluate(net, data.train, data.mask, 3);
  EXPECT_EQ(one.psnr, many.psnr);
  EXPECT_EQ(one.ssim, many.ssim);
  EXPECT_EQ(one.mean_psnr, many.mean_psnr);
}

TEST(Trainer, ToyPresetLossDecreases) {
  sst::model::ReversibleNet<float> net(sst::model::toy_config(), 0);
  Dataset<float> data;
  for (std::size_t i = 0; i < 4; ++i) {
    sst::io::SceneSpec spec;
    spec.kind = static_cast<sst::io::SceneKind>(i % 3);
    spec.seed = i + 1;
    (i < 3 ? data.train : data.validation).push_back(sst::io::generate_scene(spec));
  }
  data.mask = sst::io::generate_mask(32, 32, 0.5, 7);
  TrainConfig cfg;
  cfg.schedule = {1e-3, 50, 20};
  cfg.iterations_per_epoch = 4;
  auto result = train(net, data, cfg);
  ASSERT_EQ(result.epochs.size(), 20u);
  double early = 0, late = 0;
  for (std::size_t e = 0; e < 10; ++e) early += result.epochs[e].loss;
  for (std::size_t e = 10; e < 20; ++e) late += result.epochs[e].loss;
  EXPECT_LT(late, early);
}
