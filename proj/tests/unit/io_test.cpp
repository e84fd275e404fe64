#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include <unistd.h>

#include "sst/io/checkpoint.hpp"
#include "sst/io/formats.hpp"
#include "sst/io/raster.hpp"
#include "sst/io/synthetic.hpp"
#include "sst/model/reversible_net.hpp"
#include "sst/verify/gradcheck.hpp"

using namespace sst::io;
using sst::ad::Shape;
using sst::ad::Tensor;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("sst_io_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

FormatError::Kind decode_error(const std::vector<unsigned char>& bytes) {
  try {
    decode_hsc(bytes);
  } catch (const FormatError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "decode succeeded";
  return FormatError::Kind::io;
}

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST(Hsc, ByteLayoutOfSmallCube) {
  Tensor<float> cube({1, 2, 2}, {1, 2, 3, 4});
  const auto bytes = encode_hsc(cube);
  ASSERT_EQ(bytes.size(), kHscHeaderBytes + 16);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "HSC1");
  std::uint32_t dims[4];
  std::memcpy(dims, bytes.data() + 4, sizeof dims);
  EXPECT_EQ(dims[0], 2u);  // H
  EXPECT_EQ(dims[1], 2u);  // W
  EXPECT_EQ(dims[2], 1u);  // C
  EXPECT_EQ(dims[3], 0u);  // float32
  float payload[4];
  std::memcpy(payload, bytes.data() + kHscHeaderBytes, sizeof payload);
  EXPECT_EQ(payload[3], 4.0f);
}

TEST(Hsc, FileRoundTripIsBitwise) {
  const auto dir = scratch("hsc");
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    std::uniform_int_distribution<std::size_t> dim(1, 9);
    auto cube = sst::verify::random_tensor<float>({dim(rng), dim(rng), dim(rng)}, rng, -1e3, 1e3);
    write_hsc(cube, dir / "c.hsc");
    auto back = read_hsc(dir / "c.hsc");
    EXPECT_EQ(back.shape(), cube.shape());
    EXPECT_TRUE(same_bits(back.values(), cube.values()));
  }
}

TEST(Hsc, ImageIsStoredAsSingleChannel) {
  Tensor<float> img({3, 2}, {1, 2, 3, 4, 5, 6});
  auto back = decode_hsc(encode_hsc(img));
  EXPECT_EQ(back.shape(), (Shape{1, 3, 2}));
  EXPECT_EQ(back.values(), img.values());
}

TEST(Hsc, DistinctDiagnostics) {
  auto bytes = encode_hsc(Tensor<float>({2, 2, 2}, 1.0f));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(decode_error(bad), FormatError::Kind::bad_magic);
  auto cut = bytes;
  cut.resize(cut.size() - 3);
  EXPECT_EQ(decode_error(cut), FormatError::Kind::truncated);
  auto dtype = bytes;
  dtype[16] = 7;
  EXPECT_EQ(decode_error(dtype), FormatError::Kind::unknown_dtype);
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_EQ(decode_error(extra), FormatError::Kind::trailing_data);
  EXPECT_EQ(decode_error({'H', 'S'}), FormatError::Kind::truncated);

  try {
    decode_hsc(bad);
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("bad magic"), std::string::npos) << e.what();
  }
}

TEST(Hsc, MissingFileIsIoError) {
  try {
    read_hsc("/nonexistent/dir/x.hsc");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.kind(), FormatError::Kind::io);
  }
}

TEST(Hscw, RoundTripKeepsNamesOrderAndBits) {
  const auto dir = scratch("hscw");
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    std::vector<NamedTensor> ts;
    const int count = std::uniform_int_distribution<int>(1, 5)(rng);
    for (int k = 0; k < count; ++k) {
      Shape shape;
      const std::size_t rank = std::uniform_int_distribution<std::size_t>(0, 4)(rng);
      for (std::size_t r = 0; r < rank; ++r) shape.push_back(std::uniform_int_distribution<std::size_t>(1, 4)(rng));
      auto t = sst::verify::random_tensor<float>(shape, rng);
      ts.push_back({"t" + std::to_string(count - k) + ".w", shape, t.values()});
    }
    write_hscw(ts, dir / "w.hscw");
    auto back = read_hscw(dir / "w.hscw");
    ASSERT_EQ(back.size(), ts.size());
    for (std::size_t k = 0; k < ts.size(); ++k) {
      EXPECT_EQ(back[k].name, ts[k].name);
      EXPECT_EQ(back[k].shape, ts[k].shape);
      EXPECT_TRUE(same_bits(back[k].values, ts[k].values));
    }
  }
}

TEST(Hscw, RejectsDuplicatesAndCorruption) {
  std::vector<NamedTensor> dup = {{"a", {1}, {1}}, {"a", {1}, {2}}};
  EXPECT_THROW(encode_hscw(dup), FormatError);
  std::vector<NamedTensor> ok = {{"a", {2}, {1, 2}}};
  auto bytes = encode_hscw(ok);
  auto bad = bytes;
  bad[3] = '?';
  EXPECT_THROW(decode_hscw(bad), FormatError);
  bytes.pop_back();
  try {
    decode_hscw(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.kind(), FormatError::Kind::truncated);
  }
}

TEST(Meta, RoundTripSorted) {
  const auto dir = scratch("meta");
  write_meta(dir / "a.meta", {{"z", "1"}, {"b", "two words"}});
  auto m = read_meta(dir / "a.meta");
  EXPECT_EQ(m.at("z"), "1");
  EXPECT_EQ(m.at("b"), "two words");
  EXPECT_EQ(meta_path("x/y.hsc"), fs::path("x/y.meta"));
}

TEST(Checkpoint, SaveLoadRestoresModel) {
  const auto dir = scratch("ckpt");
  auto cfg = sst::model::toy_config();
  cfg.stages = 2;
  cfg.base_channels = 8;
  sst::model::ReversibleNet<float> a(cfg, 3);
  save_checkpoint(dir / "w.hscw", cfg, a.parameters());
  auto cfg2 = read_checkpoint_config(dir / "w.hscw");
  EXPECT_EQ(config_to_meta(cfg2), config_to_meta(cfg));
  sst::model::ReversibleNet<float> b(cfg2, 99);
  assign_named(b.parameters(), read_hscw(dir / "w.hscw"));
  EXPECT_EQ(b.parameters().snapshot(), a.parameters().snapshot());
}

TEST(Checkpoint, MismatchedArchitectureRejected) {
  auto cfg = sst::model::toy_config();
  sst::model::ReversibleNet<float> a(cfg, 0);
  cfg.base_channels = 8;
  sst::model::ReversibleNet<float> b(cfg, 0);
  EXPECT_THROW(assign_named(b.parameters(), to_named(a.parameters())), FormatError);
  EXPECT_THROW(config_from_meta({{"colour", "blue"}}), FormatError);
}

TEST(Synthetic, DeterministicAndInRange) {
  for (auto kind : {SceneKind::gaussian_blobs, SceneKind::gradient_ramps, SceneKind::checker_spectra}) {
    SceneSpec spec;
    spec.kind = kind;
    spec.seed = 11;
    auto a = generate_scene(spec), b = generate_scene(spec);
    EXPECT_EQ(a.values(), b.values()) << to_string(kind);
    EXPECT_EQ(a.shape(), (Shape{8, 32, 32}));
    for (float v : a.values()) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
    EXPECT_EQ(parse_scene_kind(to_string(kind)), kind);
  }
  EXPECT_THROW(parse_scene_kind("stripes"), std::invalid_argument);
}

TEST(Synthetic, BlobSpectraAreCorrelatedAcrossChannels) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SceneSpec spec;
    spec.seed = seed;
    auto cube = generate_scene(spec);
    const std::size_t c = 8, n = 32 * 32;
    // Pearson correlation between adjacent channel pairs, pooled.
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0, count = 0;
    for (std::size_t m = 0; m + 1 < c; ++m)
      for (std::size_t i = 0; i < n; ++i) {
        const double a = cube.values()[m * n + i], b = cube.values()[(m + 1) * n + i];
        sa += a, sb += b, saa += a * a, sbb += b * b, sab += a * b, ++count;
      }
    const double cov = sab / count - sa / count * sb / count;
    const double va = saa / count - sa * sa / (count * count), vb = sbb / count - sb * sb / (count * count);
    EXPECT_GT(cov / std::sqrt(va * vb), 0.5) << "seed " << seed;
  }
}

TEST(Synthetic, MaskDensityAndBinary) {
  auto m = generate_mask(256, 256, 0.5, 42);
  double total = 0;
  for (float v : m.values()) {
    EXPECT_TRUE(v == 0.0f || v == 1.0f);
    total += v;
  }
  EXPECT_NEAR(total / m.size(), 0.5, 0.01);
  EXPECT_EQ(generate_mask(8, 8, 0.5, 42).values(), generate_mask(8, 8, 0.5, 42).values());
  for (float v : generate_mask(8, 8, 0.0, 1).values()) EXPECT_EQ(v, 0.0f);
  for (float v : generate_mask(8, 8, 1.0, 1).values()) EXPECT_EQ(v, 1.0f);
  EXPECT_THROW(generate_mask(8, 8, 1.5, 1), std::invalid_argument);
}

TEST(Raster, ImportOrdersByFilenameAndNormalizes) {
  const auto dir = scratch("raster");
  // Channels written out of order; values 0..200 so the global max is 200.
  for (int ch : {2, 0, 1}) {
    std::vector<std::uint8_t> px(12);
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>(ch * 80 + i);
    if (ch == 2) px[11] = 200;
    write_png_gray8(dir / ("band_" + std::to_string(ch) + ".png"), 3, 4, px);
  }
  auto imported = import_raster_cube(dir);
  ASSERT_EQ(imported.cube.shape(), (Shape{3, 3, 4}));
  EXPECT_EQ(imported.sources.front().filename(), "band_0.png");
  EXPECT_FLOAT_EQ(imported.cube.values()[0], 0.0f);
  EXPECT_FLOAT_EQ(imported.cube.values()[12], 80.0f / 200.0f);
  EXPECT_FLOAT_EQ(imported.cube.values()[35], 1.0f);
}

TEST(Raster, PreviewsAndCurveAreWritten) {
  const auto dir = scratch("previews");
  std::mt19937_64 rng(5);
  auto cube = sst::verify::random_tensor<float>({2, 6, 7}, rng, 0, 1);
  auto ranges = write_channel_previews(cube, dir, "x");
  ASSERT_EQ(ranges.size(), 2u);
  EXPECT_LE(ranges[0].first, ranges[0].second);
  auto img = read_png_gray(dir / "x_ch0.png");
  EXPECT_EQ(img.height, 6u);
  EXPECT_EQ(img.width, 7u);
  write_curve_png(dir / "curve.png", {3, 2, 1.5, 1});
  EXPECT_TRUE(fs::exists(dir / "curve.png"));
}
