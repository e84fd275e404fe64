#include "sst/io/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <unistd.h>

namespace sst::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(const fs::path& path, const std::string& what) {
  throw FormatError(FormatError::Kind::io, path.string() + ": " + what);
}

}  // namespace

GrayImage read_png_gray(const fs::path& path) {
  File f(std::fopen(path.c_str(), "rb"));
  if (!f) png_fail(path, "cannot open");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw FormatError(FormatError::Kind::bad_magic, path.string() + ": not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) png_fail(path, "libpng initialisation failed");
  GrayImage img;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(FormatError::Kind::truncated, path.string() + ": corrupt or truncated PNG");
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);
  img.height = png_get_image_height(png, info);
  img.width = png_get_image_width(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  img.max_code = out_depth == 16 ? 65535 : 255;
  const std::size_t stride = png_get_rowbytes(png, info);
  if (png_get_channels(png, info) != 1) {
    png_destroy_read_struct(&png, &info, nullptr);
    png_fail(path, "could not reduce image to one channel");
  }
  buffer.resize(stride * img.height);
  for (std::size_t r = 0; r < img.height; ++r) rows.push_back(buffer.data() + r * stride);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  img.pixels.resize(img.height * img.width);
  for (std::size_t r = 0; r < img.height; ++r)
    for (std::size_t c = 0; c < img.width; ++c) {
      const unsigned char* p = rows[r];
      img.pixels[r * img.width + c] =
          out_depth == 16 ? static_cast<double>((p[2 * c] << 8) | p[2 * c + 1]) : static_cast<double>(p[c]);
    }
  return img;
}

void write_png_gray8(const fs::path& path, std::size_t height, std::size_t width,
                     const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != height * width) throw std::invalid_argument("png: pixel count does not match size");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_GRAY;
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  if (!png_image_write_to_file(&image, tmp.c_str(), 0, pixels.data(), 0, nullptr))
    png_fail(path, std::string("write failed: ") + image.message);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) png_fail(path, "rename failed: " + ec.message());
}

ImportedCube import_raster_cube(const fs::path& directory) {
  ImportedCube out;
  for (const auto& e : fs::directory_iterator(directory)) {
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (e.is_regular_file() && ext == ".png") out.sources.push_back(e.path());
  }
  if (out.sources.empty()) throw FormatError(FormatError::Kind::io, directory.string() + ": no PNG channel images");
  std::sort(out.sources.begin(), out.sources.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  std::vector<GrayImage> channels;
  for (const auto& p : out.sources) {
    channels.push_back(read_png_gray(p));
    if (channels.back().height != channels.front().height || channels.back().width != channels.front().width)
      throw ad::ShapeError(p.string() + " is " + std::to_string(channels.back().height) + "x" +
                           std::to_string(channels.back().width) + ", expected " +
                           std::to_string(channels.front().height) + "x" + std::to_string(channels.front().width));
  }
  const std::size_t c = channels.size(), h = channels[0].height, w = channels[0].width;
  double peak = 0;
  for (const auto& im : channels)
    for (double v : im.pixels) peak = std::max(peak, v / im.max_code);
  std::vector<float> data(c * h * w, 0.0f);
  for (std::size_t m = 0; m < c; ++m)
    for (std::size_t i = 0; i < h * w; ++i)
      data[m * h * w + i] = peak > 0 ? static_cast<float>(channels[m].pixels[i] / channels[m].max_code / peak) : 0.0f;
  out.cube = ad::Tensor<float>(ad::Shape{c, h, w}, std::move(data));
  out.peak = peak;
  return out;
}

std::vector<std::pair<double, double>> write_channel_previews(const ad::Tensor<float>& cube, const fs::path& directory,
                                                              const std::string& stem) {
  if (cube.rank() != 3) throw ad::ShapeError("previews expect [C,H,W], got " + ad::to_string(cube.shape()));
  const std::size_t c = cube.extent(0), h = cube.extent(1), w = cube.extent(2);
  std::vector<std::pair<double, double>> ranges;
  for (std::size_t m = 0; m < c; ++m) {
    const auto ch = cube.data().subspan(m * h * w, h * w);
    const auto [lo, hi] = std::minmax_element(ch.begin(), ch.end());
    const double a = *lo, range = static_cast<double>(*hi) - a;
    std::vector<std::uint8_t> px(h * w);
    for (std::size_t i = 0; i < h * w; ++i)
      px[i] = range > 0 ? static_cast<std::uint8_t>(std::lround(255.0 * (ch[i] - a) / range)) : 0;
    write_png_gray8(directory / (stem + "_ch" + std::to_string(m) + ".png"), h, w, px);
    ranges.emplace_back(a, static_cast<double>(*hi));
  }
  return ranges;
}

void write_curve_png(const fs::path& path, const std::vector<double>& values, std::size_t width, std::size_t height) {
  std::vector<std::uint8_t> px(width * height, 255);
  const std::size_t margin = 20;
  auto plot = [&](long x, long y, std::uint8_t v) {
    if (x >= 0 && y >= 0 && x < static_cast<long>(width) && y < static_cast<long>(height))
      px[static_cast<std::size_t>(y) * width + static_cast<std::size_t>(x)] = v;
  };
  for (std::size_t x = margin; x < width - margin; ++x) plot(x, height - margin, 0);
  for (std::size_t y = margin; y <= height - margin; ++y) plot(margin, y, 0);

  std::vector<double> v;
  for (double x : values)
    if (std::isfinite(x)) v.push_back(x);
  if (!v.empty()) {
    const bool log_scale = *std::min_element(v.begin(), v.end()) > 0;
    std::vector<double> ys;
    for (double x : values) ys.push_back(log_scale ? std::log10(x) : x);
    double lo = 1e300, hi = -1e300;
    for (double y : ys)
      if (std::isfinite(y)) lo = std::min(lo, y), hi = std::max(hi, y);
    if (hi - lo < 1e-12) hi = lo + 1;
    const double plot_w = static_cast<double>(width - 2 * margin), plot_h = static_cast<double>(height - 2 * margin);
    auto to_px = [&](std::size_t i, double y) {
      const double fx = ys.size() > 1 ? static_cast<double>(i) / (ys.size() - 1) : 0.5;
      return std::pair<double, double>{margin + fx * plot_w, margin + (1 - (y - lo) / (hi - lo)) * plot_h};
    };
    for (std::size_t i = 0; i < ys.size(); ++i) {
      if (!std::isfinite(ys[i])) continue;
      auto [x0, y0] = to_px(i, ys[i]);
      auto [x1, y1] = i + 1 < ys.size() && std::isfinite(ys[i + 1]) ? to_px(i + 1, ys[i + 1]) : std::pair{x0, y0};
      const int steps = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
      for (int s = 0; s <= steps; ++s) {
        const double t = static_cast<double>(s) / steps;
        const long x = std::lround(x0 + t * (x1 - x0)), y = std::lround(y0 + t * (y1 - y0));
        plot(x, y, 40);
        plot(x, y + 1, 40);
      }
    }
  }
  write_png_gray8(path, height, width, px);
}

}  // namespace sst::io
