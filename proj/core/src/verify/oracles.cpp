#include "sst/verify/oracles.hpp"

#include <cmath>
#include <limits>

namespace sst::verify::ref {

Buffer modulate(const Buffer& cube, const Buffer& mask, std::size_t c, std::size_t h, std::size_t w) {
  Buffer out(c * h * w);
  for (std::size_t m = 0; m < c; ++m)
    for (std::size_t x = 0; x < h; ++x)
      for (std::size_t y = 0; y < w; ++y) out[(m * h + x) * w + y] = cube[(m * h + x) * w + y] * mask[x * w + y];
  return out;
}

Buffer disperse(const Buffer& cube, std::size_t c, std::size_t h, std::size_t w, std::size_t step) {
  const std::size_t wd = w + step * (c - 1);
  Buffer out(c * h * wd, 0.0);
  for (std::size_t m = 0; m < c; ++m)
    for (std::size_t x = 0; x < h; ++x)
      for (std::size_t y = 0; y < w; ++y) out[(m * h + x) * wd + y + step * m] = cube[(m * h + x) * w + y];
  return out;
}

Buffer integrate(const Buffer& dispersed, std::size_t c, std::size_t h, std::size_t wd) {
  Buffer out(h * wd, 0.0);
  for (std::size_t x = 0; x < h; ++x)
    for (std::size_t y = 0; y < wd; ++y)
      for (std::size_t m = 0; m < c; ++m) out[x * wd + y] += dispersed[(m * h + x) * wd + y];
  return out;
}

Buffer shift_back(const Buffer& meas, std::size_t c, std::size_t h, std::size_t w, std::size_t step) {
  const std::size_t wd = w + step * (c - 1);
  Buffer out(c * h * w);
  for (std::size_t m = 0; m < c; ++m)
    for (std::size_t x = 0; x < h; ++x)
      for (std::size_t y = 0; y < w; ++y) out[(m * h + x) * w + y] = meas[x * wd + y + step * m];
  return out;
}

Buffer forward_project(const Buffer& cube, const Buffer& mask, std::size_t c, std::size_t h, std::size_t w,
                       std::size_t step) {
  return integrate(disperse(modulate(cube, mask, c, h, w), c, h, w, step), c, h, w + step * (c - 1));
}

Buffer matmul(const Buffer& a, const Buffer& b, std::size_t n, std::size_t k, std::size_t m) {
  Buffer out(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t p = 0; p < k; ++p) out[i * m + j] += a[i * k + p] * b[p * m + j];
  return out;
}

Buffer conv2d(const Buffer& x, const Buffer& kernel, const Buffer& bias, std::size_t cin, std::size_t h,
              std::size_t w, std::size_t cout, std::size_t ks, std::size_t groups) {
  const std::size_t gin = cin / groups, gout = cout / groups;
  const long r = static_cast<long>(ks / 2);
  Buffer out(cout * h * w, 0.0);
  for (std::size_t o = 0; o < cout; ++o) {
    const std::size_t g = o / gout;
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        double s = bias.empty() ? 0.0 : bias[o];
        for (std::size_t ci = 0; ci < gin; ++ci)
          for (std::size_t u = 0; u < ks; ++u)
            for (std::size_t v = 0; v < ks; ++v) {
              const long ii = static_cast<long>(i) + static_cast<long>(u) - r;
              const long jj = static_cast<long>(j) + static_cast<long>(v) - r;
              if (ii < 0 || jj < 0 || ii >= static_cast<long>(h) || jj >= static_cast<long>(w)) continue;
              s += kernel[((o * gin + ci) * ks + u) * ks + v] * x[((g * gin + ci) * h + ii) * w + jj];
            }
        out[(o * h + i) * w + j] = s;
      }
  }
  return out;
}

Buffer softmax_rows(const Buffer& x, std::size_t rows, std::size_t n) {
  Buffer out(rows * n);
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, x[r * n + i]);
    double z = 0;
    for (std::size_t i = 0; i < n; ++i) z += std::exp(x[r * n + i] - mx);
    for (std::size_t i = 0; i < n; ++i) out[r * n + i] = std::exp(x[r * n + i] - mx) / z;
  }
  return out;
}

double psnr(const Buffer& a, const Buffer& b, double peak) {
  double se = 0;
  for (std::size_t i = 0; i < a.size(); ++i) se += (a[i] - b[i]) * (a[i] - b[i]);
  const double mse = se / static_cast<double>(a.size());
  return mse == 0 ? std::numeric_limits<double>::infinity() : 10 * std::log10(peak * peak / mse);
}

double ssim(const Buffer& a, const Buffer& b, std::size_t h, std::size_t w) {
  const std::size_t n = 11;
  const double sigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double g[11][11], gsum = 0;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v) {
      const double du = static_cast<double>(u) - 5, dv = static_cast<double>(v) - 5;
      g[u][v] = std::exp(-(du * du + dv * dv) / (2 * sigma * sigma));
      gsum += g[u][v];
    }
  double total = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i + n <= h; ++i)
    for (std::size_t j = 0; j + n <= w; ++j) {
      double ma = 0, mb = 0;
      for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = 0; v < n; ++v) {
          const double wt = g[u][v] / gsum;
          ma += wt * a[(i + u) * w + j + v];
          mb += wt * b[(i + u) * w + j + v];
        }
      double va = 0, vb = 0, cov = 0;
      for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = 0; v < n; ++v) {
          const double wt = g[u][v] / gsum;
          const double da = a[(i + u) * w + j + v] - ma, db = b[(i + u) * w + j + v] - mb;
          va += wt * da * da;
          vb += wt * db * db;
          cov += wt * da * db;
        }
      total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return total / static_cast<double>(count);
}

double reconstruction_loss(const Buffer& x_out, const Buffer& truth, const Buffer& y, const Buffer& mask,
                           std::size_t c, std::size_t h, std::size_t w, std::size_t step, double xi, bool normalize) {
  double cube = 0;
  for (std::size_t i = 0; i < x_out.size(); ++i) cube += (x_out[i] - truth[i]) * (x_out[i] - truth[i]);
  const Buffer z = forward_project(x_out, mask, c, h, w, step);
  double meas = 0;
  for (std::size_t i = 0; i < z.size(); ++i) meas += (z[i] - y[i]) * (z[i] - y[i]);
  if (normalize) {
    cube /= static_cast<double>(x_out.size());
    meas /= static_cast<double>(z.size());
  }
  return cube + xi * meas;
}

}  // namespace sst::verify::ref
