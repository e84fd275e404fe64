#include "sst/optics/cassi.hpp"

#include <random>

#include "../autodiff/op_support.hpp"
#include "sst/autodiff/ops.hpp"

namespace sst::optics {

using ad::Node;
using ad::Shape;
using ad::ShapeError;

NoiseModel NoiseModel::gaussian(double sigma, std::uint64_t seed) {
  if (sigma < 0) throw std::invalid_argument("noise sigma must be non-negative");
  return NoiseModel{Kind::gaussian, sigma, seed};
}

template <class T>
void validate_mask(const Tensor<T>& mask) {
  for (T v : mask.data())
    if (!(v >= T(0) && v <= T(1))) throw std::invalid_argument("mask values must lie in [0, 1]");
}

template <class T>
Tensor<T> modulate(const Tensor<T>& cube, const Tensor<T>& mask) {
  if (cube.rank() != 3 || mask.rank() != 2 || cube.extent(1) != mask.extent(0) || cube.extent(2) != mask.extent(1))
    throw ShapeError("modulate: cube " + ad::to_string(cube.shape()) + " does not match mask " +
                     ad::to_string(mask.shape()));
  const std::size_t c = cube.extent(0), plane = mask.size();
  std::vector<T> out(cube.size());
  auto xv = cube.data();
  auto mv = mask.data();
  for (std::size_t m = 0; m < c; ++m)
    for (std::size_t p = 0; p < plane; ++p) out[m * plane + p] = xv[m * plane + p] * mv[p];
  Node<T>* nx = cube.node().get();
  Node<T>* nm = mask.node().get();
  return ad::detail::make_result<T>("modulate", cube.shape(), std::move(out), {&cube, &mask},
                                    [nx, nm, c, plane](std::span<const T> g) {
                                      if (auto gx = ad::detail::sink(nx); !gx.empty())
                                        for (std::size_t m = 0; m < c; ++m)
                                          for (std::size_t p = 0; p < plane; ++p)
                                            gx[m * plane + p] += g[m * plane + p] * nm->data[p];
                                      if (auto gm = ad::detail::sink(nm); !gm.empty())
                                        for (std::size_t m = 0; m < c; ++m)
                                          for (std::size_t p = 0; p < plane; ++p)
                                            gm[p] += g[m * plane + p] * nx->data[m * plane + p];
                                    });
}

template <class T>
Tensor<T> disperse(const Tensor<T>& cube, const DispersionConfig& cfg) {
  if (cube.rank() != 3) throw ShapeError("disperse: expected [C,H,W] cube, got " + ad::to_string(cube.shape()));
  const std::size_t c = cube.extent(0), h = cube.extent(1), w = cube.extent(2);
  if (c > 0 && cfg.reference_channel >= c) throw std::invalid_argument("disperse: reference channel out of range");
  const std::size_t wd = cfg.measurement_width(w, c);
  std::vector<T> out(c * h * wd, T(0));
  auto xv = cube.data();
  for (std::size_t m = 0; m < c; ++m)
    for (std::size_t x = 0; x < h; ++x)
      std::copy_n(xv.data() + (m * h + x) * w, w, out.data() + (m * h + x) * wd + cfg.offset(m));
  Node<T>* nx = cube.node().get();
  return ad::detail::make_result<T>("disperse", Shape{c, h, wd}, std::move(out), {&cube},
                                    [nx, c, h, w, wd, cfg](std::span<const T> g) {
                                      auto gx = ad::detail::sink(nx);
                                      for (std::size_t m = 0; m < c; ++m)
                                        for (std::size_t x = 0; x < h; ++x) {
                                          const T* src = g.data() + (m * h + x) * wd + cfg.offset(m);
                                          T* dst = gx.data() + (m * h + x) * w;
                                          for (std::size_t y = 0; y < w; ++y) dst[y] += src[y];
                                        }
                                    });
}

template <class T>
Tensor<T> integrate(const Tensor<T>& dispersed, const NoiseModel& noise) {
  if (dispersed.rank() != 3)
    throw ShapeError("integrate: expected [C,H,W'] cube, got " + ad::to_string(dispersed.shape()));
  const std::size_t c = dispersed.extent(0), h = dispersed.extent(1), wd = dispersed.extent(2);
  const std::size_t plane = h * wd;
  std::vector<T> out(plane, T(0));
  auto xv = dispersed.data();
  for (std::size_t m = 0; m < c; ++m)
    for (std::size_t p = 0; p < plane; ++p) out[p] += xv[m * plane + p];
  if (noise.kind == NoiseModel::Kind::gaussian) {
    if (noise.sigma < 0) throw std::invalid_argument("integrate: negative noise sigma");
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> normal(0.0, noise.sigma);
    for (auto& v : out) v += static_cast<T>(normal(rng));
  }
  Node<T>* nx = dispersed.node().get();
  return ad::detail::make_result<T>("integrate", Shape{h, wd}, std::move(out), {&dispersed},
                                    [nx, c, plane](std::span<const T> g) {
                                      auto gx = ad::detail::sink(nx);
                                      for (std::size_t m = 0; m < c; ++m)
                                        for (std::size_t p = 0; p < plane; ++p) gx[m * plane + p] += g[p];
                                    });
}

template <class T>
Tensor<T> forward_project(const Tensor<T>& cube, const Tensor<T>& mask, const DispersionConfig& cfg,
                          const NoiseModel& noise) {
  return integrate(disperse(modulate(cube, mask), cfg), noise);
}

template <class T>
Tensor<T> residual_input(const Tensor<T>& y, const std::optional<Tensor<T>>& reprojection) {
  if (!reprojection) return y;
  if (reprojection->shape() != y.shape())
    throw ShapeError("residual_input: measurement " + ad::to_string(y.shape()) + " vs re-projection " +
                     ad::to_string(reprojection->shape()));
  return ad::sub(y, *reprojection);
}

template <class T>
Tensor<T> shift_back(const Tensor<T>& measurement, const DispersionConfig& cfg, std::size_t channels) {
  if (measurement.rank() != 2 || channels == 0)
    throw ShapeError("shift_back: expected [H,W'] measurement, got " + ad::to_string(measurement.shape()));
  const std::size_t h = measurement.extent(0), wd = measurement.extent(1);
  const std::size_t spread = cfg.step * (channels - 1);
  if (wd <= spread)
    throw ShapeError("shift_back: measurement width " + std::to_string(wd) + " too small for " +
                     std::to_string(channels) + " channels at step " + std::to_string(cfg.step));
  const std::size_t w = wd - spread;
  std::vector<T> out(channels * h * w);
  auto yv = measurement.data();
  for (std::size_t m = 0; m < channels; ++m)
    for (std::size_t x = 0; x < h; ++x)
      std::copy_n(yv.data() + x * wd + cfg.offset(m), w, out.data() + (m * h + x) * w);
  Node<T>* ny = measurement.node().get();
  return ad::detail::make_result<T>("shift_back", Shape{channels, h, w}, std::move(out), {&measurement},
                                    [ny, channels, h, w, wd, cfg](std::span<const T> g) {
                                      auto gy = ad::detail::sink(ny);
                                      for (std::size_t m = 0; m < channels; ++m)
                                        for (std::size_t x = 0; x < h; ++x) {
                                          const T* src = g.data() + (m * h + x) * w;
                                          T* dst = gy.data() + x * wd + cfg.offset(m);
                                          for (std::size_t y = 0; y < w; ++y) dst[y] += src[y];
                                        }
                                    });
}

#define SST_INSTANTIATE(T)                                                                                   \
  template void validate_mask(const Tensor<T>&);                                                             \
  template Tensor<T> modulate(const Tensor<T>&, const Tensor<T>&);                                           \
  template Tensor<T> disperse(const Tensor<T>&, const DispersionConfig&);                                    \
  template Tensor<T> integrate(const Tensor<T>&, const NoiseModel&);                                         \
  template Tensor<T> forward_project(const Tensor<T>&, const Tensor<T>&, const DispersionConfig&,            \
                                     const NoiseModel&);                                                     \
  template Tensor<T> residual_input(const Tensor<T>&, const std::optional<Tensor<T>>&);                      \
  template Tensor<T> shift_back(const Tensor<T>&, const DispersionConfig&, std::size_t);

SST_INSTANTIATE(float)
SST_INSTANTIATE(double)

}  // namespace sst::optics
