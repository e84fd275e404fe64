#include <algorithm>
#include <cmath>
#include <memory>

#include "op_support.hpp"
#include "sst/autodiff/ops.hpp"

namespace sst::ad {

template <class T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  const auto v = detail::axis_view(x.shape(), axis);
  std::vector<T> out(x.size());
  auto xv = x.data();
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.extent * v.inner + i;
      T peak = xv[base];
      for (std::size_t e = 1; e < v.extent; ++e) peak = std::max(peak, xv[base + e * v.inner]);
      T total = 0;
      for (std::size_t e = 0; e < v.extent; ++e) {
        T w = std::exp(xv[base + e * v.inner] - peak);
        out[base + e * v.inner] = w;
        total += w;
      }
      const T inv = T(1) / total;
      for (std::size_t e = 0; e < v.extent; ++e) out[base + e * v.inner] *= inv;
    }

  auto result = detail::make_result<T>("softmax", x.shape(), std::move(out), {&x}, {});
  if (result.requires_grad()) {
    Node<T>* nx = x.node().get();
    Node<T>* ny = result.node().get();
    // The output is read back at backward time; capturing the raw node is
    // safe because the tape only calls this while the node is alive.
    ny->backward = [nx, ny, v](std::span<const T> g) {
      auto gx = detail::sink(nx);
      const auto& y = ny->data;
      for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t i = 0; i < v.inner; ++i) {
          const std::size_t base = o * v.extent * v.inner + i;
          T dot = 0;
          for (std::size_t e = 0; e < v.extent; ++e) dot += g[base + e * v.inner] * y[base + e * v.inner];
          for (std::size_t e = 0; e < v.extent; ++e) {
            const std::size_t idx = base + e * v.inner;
            gx[idx] += y[idx] * (g[idx] - dot);
          }
        }
    };
  }
  return result;
}

template <class T>
Tensor<T> layernorm(const Tensor<T>& x, std::size_t axis, const Tensor<T>& gain,
                    const Tensor<T>& bias, T eps) {
  const auto v = detail::axis_view(x.shape(), axis);
  if (v.extent < 1) throw ShapeError("layernorm: empty normalized axis");
  if (gain.shape() != Shape{v.extent} || bias.shape() != Shape{v.extent})
    throw ShapeError("layernorm: gain/bias must have shape [" + std::to_string(v.extent) + "], got " +
                     to_string(gain.shape()) + " and " + to_string(bias.shape()));

  auto normalized = std::make_shared<std::vector<T>>(x.size());
  auto inv_std = std::make_shared<std::vector<T>>(v.outer * v.inner);
  std::vector<T> out(x.size());
  auto xv = x.data();
  auto gv = gain.data();
  auto bv = bias.data();
  const T inv_n = T(1) / static_cast<T>(v.extent);
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.extent * v.inner + i;
      T mu = 0;
      for (std::size_t e = 0; e < v.extent; ++e) mu += xv[base + e * v.inner];
      mu *= inv_n;
      T var = 0;
      for (std::size_t e = 0; e < v.extent; ++e) {
        T d = xv[base + e * v.inner] - mu;
        var += d * d;
      }
      var *= inv_n;
      const T inv = T(1) / std::sqrt(var + eps);
      (*inv_std)[o * v.inner + i] = inv;
      for (std::size_t e = 0; e < v.extent; ++e) {
        const std::size_t idx = base + e * v.inner;
        T xh = (xv[idx] - mu) * inv;
        (*normalized)[idx] = xh;
        out[idx] = xh * gv[e] + bv[e];
      }
    }

  Node<T>* nx = x.node().get();
  Node<T>* ng = gain.node().get();
  Node<T>* nb = bias.node().get();
  return detail::make_result<T>(
      "layernorm", x.shape(), std::move(out), {&x, &gain, &bias},
      [nx, ng, nb, v, normalized, inv_std, inv_n](std::span<const T> g) {
        auto gx = detail::sink(nx);
        auto gg = detail::sink(ng);
        auto gb = detail::sink(nb);
        const auto& xh = *normalized;
        const auto& gain_v = ng->data;
        for (std::size_t o = 0; o < v.outer; ++o)
          for (std::size_t i = 0; i < v.inner; ++i) {
            const std::size_t base = o * v.extent * v.inner + i;
            T mean_d = 0, mean_dx = 0;
            for (std::size_t e = 0; e < v.extent; ++e) {
              const std::size_t idx = base + e * v.inner;
              if (!gg.empty()) gg[e] += g[idx] * xh[idx];
              if (!gb.empty()) gb[e] += g[idx];
              T d = g[idx] * gain_v[e];
              mean_d += d;
              mean_dx += d * xh[idx];
            }
            if (gx.empty()) continue;
            mean_d *= inv_n;
            mean_dx *= inv_n;
            const T inv = (*inv_std)[o * v.inner + i];
            for (std::size_t e = 0; e < v.extent; ++e) {
              const std::size_t idx = base + e * v.inner;
              gx[idx] += inv * (g[idx] * gain_v[e] - mean_d - xh[idx] * mean_dx);
            }
          }
      });
}

template <class T>
Tensor<T> l2_normalize(const Tensor<T>& x, std::size_t axis, T eps) {
  const auto v = detail::axis_view(x.shape(), axis);
  auto norms = std::make_shared<std::vector<T>>(v.outer * v.inner);
  std::vector<T> out(x.size());
  auto xv = x.data();
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.extent * v.inner + i;
      T ss = 0;
      for (std::size_t e = 0; e < v.extent; ++e) ss += xv[base + e * v.inner] * xv[base + e * v.inner];
      const T nrm = std::sqrt(ss);
      (*norms)[o * v.inner + i] = nrm;
      const T inv = T(1) / std::max(nrm, eps);
      for (std::size_t e = 0; e < v.extent; ++e) out[base + e * v.inner] = xv[base + e * v.inner] * inv;
    }

  Node<T>* nx = x.node().get();
  return detail::make_result<T>(
      "l2_normalize", x.shape(), std::move(out), {&x}, [nx, v, norms, eps](std::span<const T> g) {
        auto gx = detail::sink(nx);
        const auto& xv = nx->data;
        for (std::size_t o = 0; o < v.outer; ++o)
          for (std::size_t i = 0; i < v.inner; ++i) {
            const std::size_t base = o * v.extent * v.inner + i;
            const T nrm = (*norms)[o * v.inner + i];
            if (nrm <= eps) {
              for (std::size_t e = 0; e < v.extent; ++e) gx[base + e * v.inner] += g[base + e * v.inner] / eps;
              continue;
            }
            const T inv = T(1) / nrm;
            T dot = 0;
            for (std::size_t e = 0; e < v.extent; ++e) dot += g[base + e * v.inner] * xv[base + e * v.inner];
            const T coeff = dot * inv * inv * inv;
            for (std::size_t e = 0; e < v.extent; ++e) {
              const std::size_t idx = base + e * v.inner;
              gx[idx] += g[idx] * inv - xv[idx] * coeff;
            }
          }
      });
}

#define SST_INSTANTIATE(T)                                                                       \
  template Tensor<T> softmax(const Tensor<T>&, std::size_t);                                     \
  template Tensor<T> layernorm(const Tensor<T>&, std::size_t, const Tensor<T>&, const Tensor<T>&, \
                               T);                                                               \
  template Tensor<T> l2_normalize(const Tensor<T>&, std::size_t, T);

SST_INSTANTIATE(float)
SST_INSTANTIATE(double)

}  // namespace sst::ad
