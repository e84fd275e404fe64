#include "sst/train/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace sst::train {

namespace {

void require_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw ad::ShapeError(std::string(what) + ": inputs differ in size (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
}

template <class T>
std::vector<double> as_double(std::span<const T> x, std::size_t begin, std::size_t count) {
  return std::vector<double>(x.begin() + begin, x.begin() + begin + count);
}

std::vector<double> gaussian_taps(std::size_t n, double sigma) {
  std::vector<double> w(n);
  const double c = (static_cast<double>(n) - 1) / 2;
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(i) - c;
    w[i] = std::exp(-d * d / (2 * sigma * sigma));
    total += w[i];
  }
  for (auto& v : w) v /= total;
  return w;
}

// Valid-mode separable filter: rows first, then columns.
std::vector<double> filter_valid(const std::vector<double>& img, std::size_t h, std::size_t w,
                                 const std::vector<double>& taps) {
  const std::size_t n = taps.size(), ow = w - n + 1, oh = h - n + 1;
  std::vector<double> rows(h * ow, 0.0), out(oh * ow, 0.0);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < n; ++k) s += taps[k] * img[i * w + j + k];
      rows[i * ow + j] = s;
    }
  for (std::size_t i = 0; i < oh; ++i)
    for (std::size_t j = 0; j < ow; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < n; ++k) s += taps[k] * rows[(i + k) * ow + j];
      out[i * ow + j] = s;
    }
  return out;
}

}  // namespace

double psnr(std::span<const double> a, std::span<const double> b, double peak) {
  require_same(a.size(), b.size(), "psnr");
  if (a.empty()) throw std::invalid_argument("psnr: empty input");
  double se = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

template <class T>
double psnr(const ad::Tensor<T>& a, const ad::Tensor<T>& b, double peak) {
  if (a.shape() != b.shape())
    throw ad::ShapeError("psnr: " + ad::to_string(a.shape()) + " vs " + ad::to_string(b.shape()));
  auto da = as_double<T>(a.data(), 0, a.size());
  auto db = as_double<T>(b.data(), 0, b.size());
  return psnr(da, db, peak);
}

double ssim(std::span<const double> a, std::span<const double> b, std::size_t height, std::size_t width,
            const SsimOptions& opt) {
  require_same(a.size(), b.size(), "ssim");
  require_same(a.size(), height * width, "ssim");
  if (height < opt.window || width < opt.window)
    throw std::invalid_argument("ssim: image " + std::to_string(height) + "x" + std::to_string(width) +
                                " is smaller than the " + std::to_string(opt.window) + "x" +
                                std::to_string(opt.window) + " window");
  const auto taps = gaussian_taps(opt.window, opt.sigma);
  const std::size_t n = a.size();
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end()), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x, height, width, taps), my = filter_valid(y, height, width, taps);
  const auto sxx = filter_valid(xx, height, width, taps), syy = filter_valid(yy, height, width, taps),
             sxy = filter_valid(xy, height, width, taps);
  const double c1 = (opt.k1 * opt.data_range) * (opt.k1 * opt.data_range);
  const double c2 = (opt.k2 * opt.data_range) * (opt.k2 * opt.data_range);
  double total = 0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cov = sxy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

template <class T>
double ssim(const ad::Tensor<T>& a, const ad::Tensor<T>& b, const SsimOptions& opt) {
  if (a.shape() != b.shape())
    throw ad::ShapeError("ssim: " + ad::to_string(a.shape()) + " vs " + ad::to_string(b.shape()));
  if (a.rank() == 2) {
    auto da = as_double<T>(a.data(), 0, a.size()), db = as_double<T>(b.data(), 0, b.size());
    return ssim(da, db, a.extent(0), a.extent(1), opt);
  }
  if (a.rank() != 3) throw ad::ShapeError("ssim expects [H,W] or [C,H,W], got " + ad::to_string(a.shape()));
  const std::size_t c = a.extent(0), h = a.extent(1), w = a.extent(2);
  double total = 0;
  for (std::size_t m = 0; m < c; ++m) {
    auto da = as_double<T>(a.data(), m * h * w, h * w), db = as_double<T>(b.data(), m * h * w, h * w);
    total += ssim(da, db, h, w, opt);
  }
  return total / static_cast<double>(c);
}

template <class T>
double peak_value(const ad::Tensor<T>& x) {
  if (x.size() == 0) throw std::invalid_argument("peak of an empty tensor");
  return static_cast<double>(*std::max_element(x.data().begin(), x.data().end()));
}

template double psnr(const ad::Tensor<float>&, const ad::Tensor<float>&, double);
template double psnr(const ad::Tensor<double>&, const ad::Tensor<double>&, double);
template double ssim(const ad::Tensor<float>&, const ad::Tensor<float>&, const SsimOptions&);
template double ssim(const ad::Tensor<double>&, const ad::Tensor<double>&, const SsimOptions&);
template double peak_value(const ad::Tensor<float>&);
template double peak_value(const ad::Tensor<double>&);

}  // namespace sst::train
