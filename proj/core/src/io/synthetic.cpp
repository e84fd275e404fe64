#include "sst/io/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace sst::io {

SceneKind parse_scene_kind(const std::string& name) {
  if (name == "gaussian-blobs") return SceneKind::gaussian_blobs;
  if (name == "gradient-ramps") return SceneKind::gradient_ramps;
  if (name == "checker-spectra") return SceneKind::checker_spectra;
  throw std::invalid_argument("unknown scene kind '" + name +
                              "' (expected gaussian-blobs, gradient-ramps or checker-spectra)");
}

std::string to_string(SceneKind kind) {
  switch (kind) {
    case SceneKind::gaussian_blobs: return "gaussian-blobs";
    case SceneKind::gradient_ramps: return "gradient-ramps";
    case SceneKind::checker_spectra: return "checker-spectra";
  }
  return "?";
}

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Smooth bump spectrum over channel index.
std::vector<double> bump_spectrum(Rng& rng, std::size_t c, double smoothness) {
  const double center = uniform(rng, 0.0, static_cast<double>(c - 1));
  const double width = std::max(0.5, smoothness * static_cast<double>(c) * uniform(rng, 0.3, 0.7));
  const double floor = uniform(rng, 0.0, 0.3);
  std::vector<double> s(c);
  for (std::size_t m = 0; m < c; ++m) {
    const double d = (static_cast<double>(m) - center) / width;
    s[m] = floor + (1.0 - floor) * std::exp(-0.5 * d * d);
  }
  return s;
}

void normalize_unit(std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double a = *lo, range = *hi - *lo;
  for (auto& x : v) x = range > 0 ? (x - a) / range : 0.0;
}

}  // namespace

ad::Tensor<float> generate_scene(const SceneSpec& spec) {
  const std::size_t c = spec.channels, h = spec.height, w = spec.width;
  if (c == 0 || h == 0 || w == 0) throw std::invalid_argument("scene dimensions must be positive");
  if (!(spec.smoothness > 0)) throw std::invalid_argument("scene smoothness must be > 0");
  Rng rng(spec.seed);
  std::vector<double> cube(c * h * w, 0.0);
  auto at = [&](std::size_t m, std::size_t x, std::size_t y) -> double& { return cube[(m * h + x) * w + y]; };

  switch (spec.kind) {
    case SceneKind::gaussian_blobs: {
      const int blobs = std::uniform_int_distribution<int>(3, 6)(rng);
      const double extent = static_cast<double>(std::min(h, w));
      for (int b = 0; b < blobs; ++b) {
        const double cx = uniform(rng, 0, static_cast<double>(h)), cy = uniform(rng, 0, static_cast<double>(w));
        const double r = extent * uniform(rng, 0.1, 0.3), amp = uniform(rng, 0.4, 1.0);
        const auto spectrum = bump_spectrum(rng, c, spec.smoothness);
        for (std::size_t x = 0; x < h; ++x)
          for (std::size_t y = 0; y < w; ++y) {
            const double dx = (static_cast<double>(x) - cx) / r, dy = (static_cast<double>(y) - cy) / r;
            const double g = amp * std::exp(-0.5 * (dx * dx + dy * dy));
            for (std::size_t m = 0; m < c; ++m) at(m, x, y) += g * spectrum[m];
          }
      }
      normalize_unit(cube);
      break;
    }
    case SceneKind::gradient_ramps: {
      // Per-channel planar ramps whose direction and offset drift slowly
      // across the spectrum.
      const double angle0 = uniform(rng, 0, 2 * M_PI), drift = uniform(rng, -0.5, 0.5) / spec.smoothness;
      const double phase0 = uniform(rng, 0, 1), phase_drift = uniform(rng, -0.2, 0.2) / spec.smoothness;
      for (std::size_t m = 0; m < c; ++m) {
        const double t = static_cast<double>(m) / std::max<std::size_t>(1, c - 1);
        const double angle = angle0 + drift * t * M_PI, phase = phase0 + phase_drift * t;
        const double ux = std::cos(angle), uy = std::sin(angle);
        for (std::size_t x = 0; x < h; ++x)
          for (std::size_t y = 0; y < w; ++y) {
            const double u = (ux * static_cast<double>(x) / h + uy * static_cast<double>(y) / w + phase);
            at(m, x, y) = 0.5 + 0.5 * std::sin(M_PI * u);
          }
      }
      normalize_unit(cube);
      break;
    }
    case SceneKind::checker_spectra: {
      const std::size_t tile = std::uniform_int_distribution<std::size_t>(4, 8)(rng);
      const std::size_t tx = (h + tile - 1) / tile, ty = (w + tile - 1) / tile;
      std::vector<std::vector<double>> spectra;
      for (std::size_t i = 0; i < tx * ty; ++i) spectra.push_back(bump_spectrum(rng, c, spec.smoothness));
      for (std::size_t m = 0; m < c; ++m)
        for (std::size_t x = 0; x < h; ++x)
          for (std::size_t y = 0; y < w; ++y) at(m, x, y) = spectra[(x / tile) * ty + y / tile][m];
      break;
    }
  }
  std::vector<float> out(cube.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(std::clamp(cube[i], 0.0, 1.0));
  return ad::Tensor<float>(ad::Shape{c, h, w}, std::move(out));
}

ad::Tensor<float> generate_mask(std::size_t height, std::size_t width, double density, std::uint64_t seed) {
  if (!(density >= 0.0 && density <= 1.0)) throw std::invalid_argument("mask density must lie in [0, 1]");
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<float> m(height * width);
  for (auto& v : m) v = u(rng) < density ? 1.0f : 0.0f;
  return ad::Tensor<float>(ad::Shape{height, width}, std::move(m));
}

}  // namespace sst::io
