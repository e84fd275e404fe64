#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sst/autodiff/ops.hpp"
#include "sst/verify/gradcheck.hpp"
#include "sst/verify/oracles.hpp"
#include "sst/verify/suites.hpp"

using namespace sst::ad;
using sst::verify::gradcheck;
using sst::verify::random_tensor;

namespace {

using Td = Tensor<double>;

Td leaf(Shape s, std::vector<double> v) { return Td(std::move(s), std::move(v)).set_requires_grad(); }

std::vector<double> as_double(const Td& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST(Elementwise, HandArithmetic) {
  Td a({2}, {1, 2}), b({2}, {3, 4});
  EXPECT_EQ(mul(a, b).values(), (std::vector<double>{3, 8}));
  EXPECT_EQ(add(a, b).values(), (std::vector<double>{4, 6}));
  EXPECT_EQ(sub(a, b).values(), (std::vector<double>{-2, -2}));
  EXPECT_EQ(div(b, a).values(), (std::vector<double>{3, 2}));
  EXPECT_EQ(scale(a, 2.0).values(), (std::vector<double>{2, 4}));
}

TEST(Elementwise, AddZeroIsBitwiseIdentity) {
  std::mt19937_64 rng(1);
  auto x = random_tensor<float>({5, 7}, rng);
  EXPECT_EQ(add(x, 0.0f).values(), x.values());
}

TEST(Elementwise, ShapeMismatchNamesBothShapes) {
  Td a({2, 3}), b({3, 2});
  try {
    add(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3,2]"), std::string::npos) << msg;
  }
}

TEST(Elementwise, MulGradientMatchesDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto a = random_tensor<double>({3, 3}, rng).set_requires_grad();
    auto b = random_tensor<double>({3, 3}, rng).set_requires_grad();
    EXPECT_LE(gradcheck<double>([&] { return mul(a, b); }, {a, b}, rng), 1e-6) << "seed " << seed;
  }
}

TEST(Matmul, IdentityAndHandArithmetic) {
  Td eye({2, 2}, {1, 0, 0, 1}), a({2, 2}, {1, 2, 3, 4}), ones({2, 1}, {1, 1});
  EXPECT_EQ(matmul(eye, a).values(), a.values());
  EXPECT_EQ(matmul(a, ones).values(), (std::vector<double>{3, 7}));
  EXPECT_EQ(matmul(a, ones).shape(), (Shape{2, 1}));
}

TEST(Matmul, InnerMismatchRejected) { EXPECT_THROW(matmul(Td({2, 3}), Td({2, 3})), ShapeError); }

TEST(Matmul, MatchesLoopOracleAndDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto a = random_tensor<double>({4, 5}, rng).set_requires_grad();
    auto b = random_tensor<double>({5, 3}, rng).set_requires_grad();
    auto ref = sst::verify::ref::matmul(as_double(a), as_double(b), 4, 5, 3);
    auto got = matmul(a, b);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(got.values()[i], ref[i], 1e-12);
    EXPECT_LE(gradcheck<double>([&] { return matmul(a, b); }, {a, b}, rng), 1e-6) << "seed " << seed;
  }
}

TEST(Softmax, ConstantRowIsUniform) {
  auto s = softmax(Td({1, 4}, 3.0), 1);
  for (double v : s.values()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Softmax, TwoEntryHandCase) {
  auto s = softmax(Td({2}, {0.0, std::log(2.0)}), 0);
  EXPECT_NEAR(s.values()[0], 1.0 / 3, 1e-15);
  EXPECT_NEAR(s.values()[1], 2.0 / 3, 1e-15);
}

TEST(Softmax, RowsSumToOneAndStayInUnitInterval) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    // Large logits exercise the max subtraction.
    auto x = random_tensor<float>({6, 9}, rng, -80, 80);
    for (std::size_t axis : {0u, 1u}) {
      auto s = softmax(x, axis);
      const std::size_t rows = axis == 1 ? 6 : 9, n = axis == 1 ? 9 : 6;
      for (std::size_t r = 0; r < rows; ++r) {
        double total = 0;
        for (std::size_t j = 0; j < n; ++j) {
          const float v = axis == 1 ? s.values()[r * 9 + j] : s.values()[j * 9 + r];
          EXPECT_GE(v, 0.0f);
          EXPECT_LE(v, 1.0f);
          total += v;
        }
        EXPECT_NEAR(total, 1.0, 1e-6);
      }
    }
  }
}

TEST(Softmax, GradientMatchesDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto x = random_tensor<double>({2, 4}, rng).set_requires_grad();
    EXPECT_LE(gradcheck<double>([&] { return softmax(x, 1); }, {x}, rng), 1e-6) << "seed " << seed;
  }
}

TEST(Conv2d, UnitKernelIsIdentity) {
  std::mt19937_64 rng(4);
  auto x = random_tensor<double>({1, 5, 6}, rng);
  EXPECT_EQ(conv2d(x, Td({1, 1, 1, 1}, 1.0)).values(), x.values());
}

TEST(Conv2d, AveragingKernelOnConstantImage) {
  auto y = conv2d(Td({1, 4, 4}, 2.0), Td({1, 1, 3, 3}, 1.0 / 9));
  auto at = [&](std::size_t r, std::size_t c) { return y.values()[r * 4 + c]; };
  EXPECT_NEAR(at(1, 1), 2.0, 1e-15);
  EXPECT_NEAR(at(2, 2), 2.0, 1e-15);
  EXPECT_NEAR(at(0, 1), 2.0 * 6 / 9, 1e-15);  // edge: 6 taps inside
  EXPECT_NEAR(at(0, 0), 2.0 * 4 / 9, 1e-15);  // corner: 4 taps inside
}

TEST(Conv2d, EvenKernelRejected) { EXPECT_THROW(conv2d(Td({1, 4, 4}), Td({1, 1, 2, 2})), ShapeError); }

TEST(Conv2d, MatchesLoopOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto x = random_tensor<double>({2, 5, 5}, rng);
    auto k = random_tensor<double>({3, 2, 3, 3}, rng);
    auto ref = sst::verify::ref::conv2d(as_double(x), as_double(k), {}, 2, 5, 5, 3, 3, 1);
    auto got = conv2d(x, k);
    ASSERT_EQ(got.shape(), (Shape{3, 5, 5}));
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(got.values()[i], ref[i], 1e-6);
  }
}

TEST(Layernorm, StandardizedSliceIsFixedPoint) {
  // Mean 0, population variance 1.
  Td x({4}, {-1, 1, -1, 1});
  auto y = layernorm(x, 0, Td({4}, 1.0), Td({4}, 0.0));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y.values()[i], x.values()[i], 1e-5);
}

TEST(Layernorm, ConstantSliceNormalizesToZero) {
  auto y = layernorm(Td({3, 5}, 7.0), 1, Td({5}, 1.0), Td({5}, 0.0));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(Layernorm, GradientMatchesDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto x = random_tensor<double>({3, 6}, rng).set_requires_grad();
    auto g = random_tensor<double>({6}, rng).set_requires_grad();
    auto b = random_tensor<double>({6}, rng).set_requires_grad();
    EXPECT_LE(gradcheck<double>([&] { return layernorm(x, 1, g, b); }, {x, g, b}, rng), 1e-5) << "seed " << seed;
  }
}

TEST(Movement, RoundTripsAreBitwise) {
  std::mt19937_64 rng(9);
  auto x = random_tensor<float>({3, 4, 5}, rng);
  EXPECT_EQ(permute(permute(x, {2, 0, 1}), {1, 2, 0}).values(), x.values());
  EXPECT_EQ(slice(pad(x, 1, 2, 3), 1, 2, 6).values(), x.values());
  EXPECT_EQ(reshape(reshape(x, {12, 5}), {3, 4, 5}).values(), x.values());
  EXPECT_EQ(roll(roll(x, 2, 3), 2, -3).values(), x.values());
  auto parts = concat<float>({slice(x, 0, 0, 1), slice(x, 0, 1, 3)}, 0);
  EXPECT_EQ(parts.values(), x.values());
}

TEST(Movement, OutOfRangeSliceRejected) {
  Td x({3, 4});
  EXPECT_THROW(slice(x, 1, 2, 5), ShapeError);
  EXPECT_THROW(slice(x, 2, 0, 1), ShapeError);
}

TEST(Movement, ConcatGradientSplits) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto a = random_tensor<double>({2, 3}, rng).set_requires_grad();
    auto b = random_tensor<double>({4, 3}, rng).set_requires_grad();
    EXPECT_LE(gradcheck<double>([&] { return concat<double>({a, b}, 0); }, {a, b}, rng), 1e-6);
  }
}

TEST(Backward, SumGivesOnes) {
  auto x = leaf({2, 3}, {1, 2, 3, 4, 5, 6});
  backward(sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, HalfSumOfSquaresGivesInput) {
  auto x = leaf({4}, {0.5, -1.5, 2, 3});
  backward(scale(sum(mul(x, x)), 0.5));
  EXPECT_EQ(x.grad(), x.values());
}

TEST(Backward, NonScalarLossRejected) {
  auto x = leaf({2}, {1, 2});
  EXPECT_THROW(backward(mul(x, x)), GraphError);
}

TEST(Backward, SecondCallRejected) {
  auto x = leaf({2}, {1, 2});
  auto loss = sum(mul(x, x));
  backward(loss);
  EXPECT_THROW(backward(loss), GraphError);
}

TEST(Backward, TensorUsedTwiceAccumulatesBothPaths) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    auto x = random_tensor<double>({3, 3}, rng).set_requires_grad();
    auto w = random_tensor<double>({3, 3}, rng);
    // x feeds a product with itself and a separate branch through matmul.
    auto f = [&] { return add(mul(x, x), matmul(x, w)); };
    EXPECT_LE(gradcheck<double>(f, {x}, rng), 1e-6);

    x.zero_grad();
    backward(sum(add(x, x)));
    for (double g : x.grad()) EXPECT_EQ(g, 2.0);
    x.zero_grad();
  }
}

TEST(Backward, NoGradGuardRecordsNothing) {
  auto x = leaf({2}, {1, 2});
  NoGradGuard guard;
  auto y = mul(x, x);
  EXPECT_FALSE(y.requires_grad());
}

TEST(GradSuite, EveryPrimitivePassesOverTwentySeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    sst::verify::GradSuiteOptions opt;
    opt.seed = seed;
    opt.blocks = false;
    for (const auto& r : sst::verify::gradcheck_suite(opt))
      EXPECT_TRUE(r.passed) << r.name << " seed " << seed << " err " << r.error << " tol " << r.tolerance;
  }
}

TEST(GradSuite, SignFlipIsCaughtOnExactlyThatPrimitive) {
  sst::verify::GradSuiteOptions opt;
  opt.blocks = false;
  for (const char* op : {"matmul", "softmax", "conv2d", "disperse", "gelu"}) {
    sst::ad::testing::ScopedVjpSignFlip flip(op);
    for (const auto& r : sst::verify::gradcheck_suite(opt)) {
      if (r.op == op)
        EXPECT_FALSE(r.passed) << r.name << " should fail with " << op << " flipped";
      else
        EXPECT_TRUE(r.passed) << r.name << " failed with only " << op << " flipped";
    }
  }
}
