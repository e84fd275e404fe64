#include <cmath>
#include <numbers>

#include "op_support.hpp"
#include "sst/autodiff/ops.hpp"

namespace sst::ad {

namespace {

template <class T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
}

}  // namespace

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  std::vector<T> out(a.size());
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  Node<T>* na = a.node().get();
  Node<T>* nb = b.node().get();
  return detail::make_result<T>("add", a.shape(), std::move(out), {&a, &b},
                                [na, nb](std::span<const T> g) {
                                  if (auto ga = detail::sink(na); !ga.empty())
                                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                                  if (auto gb = detail::sink(nb); !gb.empty())
                                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                                });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a, b);
  std::vector<T> out(a.size());
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  Node<T>* na = a.node().get();
  Node<T>* nb = b.node().get();
  return detail::make_result<T>("sub", a.shape(), std::move(out), {&a, &b},
                                [na, nb](std::span<const T> g) {
                                  if (auto ga = detail::sink(na); !ga.empty())
                                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                                  if (auto gb = detail::sink(nb); !gb.empty())
                                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                                });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  std::vector<T> out(a.size());
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  Node<T>* na = a.node().get();
  Node<T>* nb = b.node().get();
  return detail::make_result<T>("mul", a.shape(), std::move(out), {&a, &b},
                                [na, nb](std::span<const T> g) {
                                  if (auto ga = detail::sink(na); !ga.empty())
                                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * nb->data[i];
                                  if (auto gb = detail::sink(nb); !gb.empty())
                                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * na->data[i];
                                });
}

template <class T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("div", a, b);
  std::vector<T> out(a.size());
  auto av = a.data(), bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] / bv[i];
  Node<T>* na = a.node().get();
  Node<T>* nb = b.node().get();
  return detail::make_result<T>("div", a.shape(), std::move(out), {&a, &b},
                                [na, nb](std::span<const T> g) {
                                  if (auto ga = detail::sink(na); !ga.empty())
                                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / nb->data[i];
                                  if (auto gb = detail::sink(nb); !gb.empty())
                                    for (std::size_t i = 0; i < g.size(); ++i) {
                                      T q = nb->data[i];
                                      gb[i] -= g[i] * na->data[i] / (q * q);
                                    }
                                });
}

template <class T>
Tensor<T> add(const Tensor<T>& a, T b) {
  std::vector<T> out(a.size());
  auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + b;
  Node<T>* na = a.node().get();
  return detail::make_result<T>("add_scalar", a.shape(), std::move(out), {&a},
                                [na](std::span<const T> g) {
                                  auto ga = detail::sink(na);
                                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
                                });
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.size());
  auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  Node<T>* na = a.node().get();
  return detail::make_result<T>("scale", a.shape(), std::move(out), {&a},
                                [na, factor](std::span<const T> g) {
                                  auto ga = detail::sink(na);
                                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * factor;
                                });
}

template <class T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  std::vector<T> out(x.size());
  auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = T(0.5) * xv[i] * (T(1) + std::erf(xv[i] * inv_sqrt2));
  Node<T>* nx = x.node().get();
  return detail::make_result<T>("gelu", x.shape(), std::move(out), {&x},
                                [nx](std::span<const T> g) {
                                  constexpr T inv_sqrt2pi = std::numbers::inv_sqrtpi_v<T> * inv_sqrt2;
                                  auto gx = detail::sink(nx);
                                  for (std::size_t i = 0; i < gx.size(); ++i) {
                                    T v = nx->data[i];
                                    T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
                                    T pdf = inv_sqrt2pi * std::exp(T(-0.5) * v * v);
                                    gx[i] += g[i] * (cdf + v * pdf);
                                  }
                                });
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  Node<T>* nx = x.node().get();
  return detail::make_result<T>("sum", Shape{}, {acc}, {&x}, [nx](std::span<const T> g) {
    auto gx = detail::sink(nx);
    for (auto& v : gx) v += g[0];
  });
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  const T inv = T(1) / static_cast<T>(x.size());
  Node<T>* nx = x.node().get();
  return detail::make_result<T>("mean", Shape{}, {acc * inv}, {&x}, [nx, inv](std::span<const T> g) {
    auto gx = detail::sink(nx);
    for (auto& v : gx) v += g[0] * inv;
  });
}

template <class T>
Tensor<T> sum_squares(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v * v;
  Node<T>* nx = x.node().get();
  return detail::make_result<T>("sum_squares", Shape{}, {acc}, {&x}, [nx](std::span<const T> g) {
    auto gx = detail::sink(nx);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += T(2) * g[0] * nx->data[i];
  });
}

#define SST_INSTANTIATE(T)                                           \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> add(const Tensor<T>&, T);                       \
  template Tensor<T> scale(const Tensor<T>&, T);                     \
  template Tensor<T> gelu(const Tensor<T>&);                         \
  template Tensor<T> sum(const Tensor<T>&);                          \
  template Tensor<T> mean(const Tensor<T>&);                         \
  template Tensor<T> sum_squares(const Tensor<T>&);

SST_INSTANTIATE(float)
SST_INSTANTIATE(double)

}  // namespace sst::ad
