#include <gtest/gtest.h>

#include <random>

#include "sst/autodiff/ops.hpp"
#include "sst/optics/cassi.hpp"
#include "sst/verify/gradcheck.hpp"
#include "sst/verify/oracles.hpp"

using namespace sst::optics;
using sst::ad::Shape;
using sst::verify::random_tensor;
namespace ref = sst::verify::ref;

namespace {

using Td = Tensor<double>;

std::vector<double> values(const Td& t) { return {t.values().begin(), t.values().end()}; }

struct Instance {
  std::size_t c, h, w, d;
  Td cube, mask;
};

// Random dims up to 8x8x4 with a binary mask.
Instance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dim(1, 8), chans(1, 4), step(0, 2);
  Instance in{chans(rng), dim(rng), dim(rng), step(rng), {}, {}};
  in.cube = random_tensor<double>({in.c, in.h, in.w}, rng, 0, 1);
  in.mask = random_tensor<double>({in.h, in.w}, rng, 0, 1);
  for (auto& v : in.mask.data()) v = v < 0.5 ? 0.0 : 1.0;
  return in;
}

}  // namespace

TEST(Modulate, OnesMaskIsIdentityZeroMaskAnnihilates) {
  std::mt19937_64 rng(0);
  auto x = random_tensor<double>({3, 4, 4}, rng);
  EXPECT_EQ(modulate(x, Td({4, 4}, 1.0)).values(), x.values());
  for (double v : modulate(x, Td({4, 4}, 0.0)).values()) EXPECT_EQ(v, 0.0);
}

TEST(Modulate, DimensionMismatchRejected) {
  EXPECT_THROW(modulate(Td({3, 4, 4}), Td({4, 5})), sst::ad::ShapeError);
}

TEST(Disperse, ZeroStepAndSingleChannelAreIdentity) {
  std::mt19937_64 rng(1);
  auto x = random_tensor<double>({3, 4, 5}, rng);
  EXPECT_EQ(disperse(x, {0, 0}).values(), x.values());
  auto one = random_tensor<double>({1, 4, 5}, rng);
  EXPECT_EQ(disperse(one, {3, 0}).values(), one.values());
}

TEST(Disperse, SecondChannelShiftsOneColumnRight) {
  // 2 channels, 2 rows, 3 columns; d = 1 widens to 4 columns.
  Td x({2, 2, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  auto out = disperse(x, {1, 0});
  ASSERT_EQ(out.shape(), (Shape{2, 2, 4}));
  EXPECT_EQ(out.values(), (std::vector<double>{1, 2, 3, 0, 4, 5, 6, 0, 0, 7, 8, 9, 0, 10, 11, 12}));
  EXPECT_EQ(values(out), ref::disperse(values(x), 2, 2, 3, 1));
}

TEST(Integrate, HandCases) {
  std::mt19937_64 rng(2);
  auto single = random_tensor<double>({1, 3, 3}, rng);
  EXPECT_EQ(integrate(single).values(), single.values());
  for (double v : integrate(Td({3, 2, 2}, 1.0)).values()) EXPECT_EQ(v, 3.0);
}

TEST(Integrate, SeededNoiseIsReproducible) {
  std::mt19937_64 rng(3);
  auto x = random_tensor<double>({3, 4, 6}, rng);
  auto noise = NoiseModel::gaussian(0.1, 77);
  auto a = integrate(x, noise), b = integrate(x, noise);
  EXPECT_EQ(a.values(), b.values());
  auto clean = integrate(x);
  double diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += std::abs(a.values()[i] - clean.values()[i]);
  EXPECT_GT(diff, 0.0);
}

TEST(ForwardProject, Linearity) {
  std::mt19937_64 rng(4);
  auto mask = random_tensor<double>({6, 6}, rng, 0, 1);
  DispersionConfig cfg{2, 0};
  for (double v : forward_project(Td({4, 6, 6}, 0.0), mask, cfg).values()) EXPECT_EQ(v, 0.0);

  auto x = random_tensor<double>({4, 6, 6}, rng);
  auto lhs = forward_project(sst::ad::scale(x, 2.5), mask, cfg);
  auto rhs = sst::ad::scale(forward_project(x, mask, cfg), 2.5);
  for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs.values()[i], rhs.values()[i], 1e-12);
}

TEST(ForwardProject, FloatLinearityWithinTolerance) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto mask = random_tensor<float>({8, 8}, rng, 0, 1);
    auto x = random_tensor<float>({4, 8, 8}, rng), z = random_tensor<float>({4, 8, 8}, rng);
    const float alpha = 0.7f, beta = -1.3f;
    DispersionConfig cfg{1, 0};
    auto lhs = forward_project(sst::ad::add(sst::ad::scale(x, alpha), sst::ad::scale(z, beta)), mask, cfg);
    auto rhs = sst::ad::add(sst::ad::scale(forward_project(x, mask, cfg), alpha),
                            sst::ad::scale(forward_project(z, mask, cfg), beta));
    double num = 0, den = 0;
    for (std::size_t i = 0; i < lhs.size(); ++i) {
      num += std::pow(lhs.values()[i] - rhs.values()[i], 2);
      den += std::pow(rhs.values()[i], 2);
    }
    EXPECT_LE(std::sqrt(num / den), 1e-5);
  }
}

TEST(Oracles, StagesMatchLoopsExactlyOnTwentyInstances) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    auto in = random_instance(rng);
    DispersionConfig cfg{in.d, 0};
    const auto cube = values(in.cube), mask = values(in.mask);
    const std::size_t wd = cfg.measurement_width(in.w, in.c);
    EXPECT_EQ(values(modulate(in.cube, in.mask)), ref::modulate(cube, mask, in.c, in.h, in.w));
    auto dispersed = disperse(in.cube, cfg);
    EXPECT_EQ(values(dispersed), ref::disperse(cube, in.c, in.h, in.w, in.d));
    EXPECT_EQ(values(integrate(dispersed)), ref::integrate(values(dispersed), in.c, in.h, wd));
    auto y = forward_project(in.cube, in.mask, cfg);
    EXPECT_EQ(values(y), ref::forward_project(cube, mask, in.c, in.h, in.w, in.d));
    EXPECT_EQ(values(shift_back(y, cfg, in.c)), ref::shift_back(values(y), in.c, in.h, in.w, in.d));
  }
}

TEST(ResidualInput, Cases) {
  std::mt19937_64 rng(6);
  auto y = random_tensor<double>({3, 7}, rng), z = random_tensor<double>({3, 7}, rng);
  EXPECT_EQ(residual_input(y, std::optional<Td>()).values(), y.values());
  for (double v : residual_input(y, std::optional<Td>(y)).values()) EXPECT_EQ(v, 0.0);
  auto r = residual_input(y, std::optional<Td>(z));
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_EQ(r.values()[i], y.values()[i] - z.values()[i]);
  EXPECT_THROW(residual_input(y, std::optional<Td>(Td({3, 6}))), sst::ad::ShapeError);
}

TEST(ClosedLoop, ResidualOfTruthIsExactlyZero) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto in = random_instance(rng);
    DispersionConfig cfg{in.d, 0};
    auto y = forward_project(in.cube, in.mask, cfg);
    auto r = residual_input(y, std::optional<Td>(forward_project(in.cube, in.mask, cfg)));
    for (double v : r.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(ShiftBack, ZeroStepCopiesMeasurement) {
  std::mt19937_64 rng(7);
  auto y = random_tensor<double>({3, 5}, rng);
  auto x = shift_back(y, {0, 0}, 4);
  for (std::size_t m = 0; m < 4; ++m)
    for (std::size_t i = 0; i < 15; ++i) EXPECT_EQ(x.values()[m * 15 + i], y.values()[i]);
}

TEST(ShiftBack, RecoversOneHotChannel) {
  std::mt19937_64 rng(8);
  DispersionConfig cfg{2, 0};
  for (std::size_t hot = 0; hot < 4; ++hot) {
    Td cube({4, 3, 5}, 0.0);
    auto ch = random_tensor<double>({3, 5}, rng);
    std::copy(ch.values().begin(), ch.values().end(), cube.data().begin() + hot * 15);
    auto back = shift_back(integrate(disperse(cube, cfg)), cfg, 4);
    for (std::size_t i = 0; i < 15; ++i) EXPECT_EQ(back.values()[hot * 15 + i], ch.values()[i]);
  }
}

TEST(ShiftBack, WidthMismatchRejected) {
  EXPECT_THROW(shift_back(Td({3, 2}), {1, 0}, 4), sst::ad::ShapeError);
}

TEST(Differentiability, MeasurementResidualGradient) {
  std::mt19937_64 rng(9);
  auto x = random_tensor<double>({3, 5, 5}, rng).set_requires_grad();
  auto mask = random_tensor<double>({5, 5}, rng, 0, 1);
  DispersionConfig cfg{1, 0};
  auto y = random_tensor<double>({5, 7}, rng);
  auto f = [&] { return sst::ad::sum_squares(sst::ad::sub(forward_project(x, mask, cfg), y)); };
  EXPECT_LE(sst::verify::gradcheck<double>(f, {x}, rng), 1e-6);
}
