#include <algorithm>

#include "op_support.hpp"
#include "sst/autodiff/ops.hpp"

namespace sst::ad {

namespace {

struct ConvGeometry {
  std::size_t cin, h, w, cout, kh, kw, stride, pad, groups, ho, wo;
};

// Output columns ox in [lo, hi) whose input column ox*stride + k - pad lies
// inside [0, n).
inline void valid_range(std::size_t n, std::size_t out_n, std::size_t k, std::size_t stride,
                        std::size_t pad, std::size_t& lo, std::size_t& hi) {
  lo = 0;
  if (k < pad) lo = (pad - k + stride - 1) / stride;
  // ox*stride + k - pad <= n - 1
  if (n + pad < k + 1) {
    hi = 0;
  } else {
    hi = std::min(out_n, (n + pad - k - 1) / stride + 1);
  }
  if (hi < lo) hi = lo;
}

template <class T>
ConvGeometry check_conv(const char* op, const Tensor<T>& x, const Tensor<T>& kernel,
                        const Tensor<T>& bias, std::size_t stride, std::size_t pad,
                        std::size_t groups) {
  if (x.rank() != 3) throw ShapeError(std::string(op) + ": input must be [C,H,W], got " + to_string(x.shape()));
  if (kernel.rank() != 4)
    throw ShapeError(std::string(op) + ": kernel must be [Cout,Cin/groups,k,k], got " + to_string(kernel.shape()));
  ConvGeometry g{};
  g.cin = x.extent(0);
  g.h = x.extent(1);
  g.w = x.extent(2);
  g.cout = kernel.extent(0);
  g.kh = kernel.extent(2);
  g.kw = kernel.extent(3);
  g.stride = stride;
  g.pad = pad;
  g.groups = groups;
  if (groups == 0 || g.cin % groups || g.cout % groups || kernel.extent(1) * groups != g.cin)
    throw ShapeError(std::string(op) + ": kernel " + to_string(kernel.shape()) + " incompatible with input " +
                     to_string(x.shape()) + " and groups=" + std::to_string(groups));
  if (stride == 0) throw ShapeError(std::string(op) + ": stride must be positive");
  if (g.h + 2 * pad < g.kh || g.w + 2 * pad < g.kw)
    throw ShapeError(std::string(op) + ": kernel larger than padded input");
  if (bias.defined() && bias.shape() != Shape{g.cout})
    throw ShapeError(std::string(op) + ": bias must be [" + std::to_string(g.cout) + "], got " +
                     to_string(bias.shape()));
  g.ho = (g.h + 2 * pad - g.kh) / stride + 1;
  g.wo = (g.w + 2 * pad - g.kw) / stride + 1;
  return g;
}

template <class T>
void conv_forward(const ConvGeometry& g, const T* x, const T* k, const T* bias, T* out) {
  const std::size_t cin_g = g.cin / g.groups, cout_g = g.cout / g.groups;
  const std::size_t plane = g.ho * g.wo;
  for (std::size_t co = 0; co < g.cout; ++co) {
    T* o = out + co * plane;
    if (bias) std::fill(o, o + plane, bias[co]);
    const std::size_t grp = co / cout_g;
    for (std::size_t cl = 0; cl < cin_g; ++cl) {
      const std::size_t ci = grp * cin_g + cl;
      const T* xi = x + ci * g.h * g.w;
      for (std::size_t ki = 0; ki < g.kh; ++ki) {
        std::size_t oy0, oy1;
        valid_range(g.h, g.ho, ki, g.stride, g.pad, oy0, oy1);
        for (std::size_t kj = 0; kj < g.kw; ++kj) {
          const T wv = k[((co * cin_g + cl) * g.kh + ki) * g.kw + kj];
          std::size_t ox0, ox1;
          valid_range(g.w, g.wo, kj, g.stride, g.pad, ox0, ox1);
          for (std::size_t oy = oy0; oy < oy1; ++oy) {
            const T* xrow = xi + (oy * g.stride + ki - g.pad) * g.w;
            T* orow = o + oy * g.wo;
            if (g.stride == 1) {
              const T* src = xrow + (ox0 + kj - g.pad);
              for (std::size_t ox = ox0; ox < ox1; ++ox) orow[ox] += wv * src[ox - ox0];
            } else {
              for (std::size_t ox = ox0; ox < ox1; ++ox) orow[ox] += wv * xrow[ox * g.stride + kj - g.pad];
            }
          }
        }
      }
    }
  }
}

template <class T>
void conv_backward(const ConvGeometry& g, const T* x, const T* k, const T* gout, T* gx, T* gk, T* gb) {
  const std::size_t cin_g = g.cin / g.groups, cout_g = g.cout / g.groups;
  const std::size_t plane = g.ho * g.wo;
  for (std::size_t co = 0; co < g.cout; ++co) {
    const T* go = gout + co * plane;
    if (gb) {
      T acc = 0;
      for (std::size_t i = 0; i < plane; ++i) acc += go[i];
      gb[co] += acc;
    }
    const std::size_t grp = co / cout_g;
    for (std::size_t cl = 0; cl < cin_g; ++cl) {
      const std::size_t ci = grp * cin_g + cl;
      const T* xi = x + ci * g.h * g.w;
      T* gxi = gx ? gx + ci * g.h * g.w : nullptr;
      for (std::size_t ki = 0; ki < g.kh; ++ki) {
        std::size_t oy0, oy1;
        valid_range(g.h, g.ho, ki, g.stride, g.pad, oy0, oy1);
        for (std::size_t kj = 0; kj < g.kw; ++kj) {
          const std::size_t kidx = ((co * cin_g + cl) * g.kh + ki) * g.kw + kj;
          const T wv = k[kidx];
          std::size_t ox0, ox1;
          valid_range(g.w, g.wo, kj, g.stride, g.pad, ox0, ox1);
          T kacc = 0;
          for (std::size_t oy = oy0; oy < oy1; ++oy) {
            const std::size_t row_off = (oy * g.stride + ki - g.pad) * g.w;
            const T* xrow = xi + row_off;
            const T* grow = go + oy * g.wo;
            if (gk)
              for (std::size_t ox = ox0; ox < ox1; ++ox) kacc += grow[ox] * xrow[ox * g.stride + kj - g.pad];
            if (gxi) {
              T* gxrow = gxi + row_off;
              for (std::size_t ox = ox0; ox < ox1; ++ox) gxrow[ox * g.stride + kj - g.pad] += wv * grow[ox];
            }
          }
          if (gk) gk[kidx] += kacc;
        }
      }
    }
  }
}

template <class T>
Tensor<T> conv_impl(const char* op, const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                    std::size_t stride, std::size_t pad, std::size_t groups) {
  const ConvGeometry g = check_conv(op, x, kernel, bias, stride, pad, groups);
  std::vector<T> out(g.cout * g.ho * g.wo, T(0));
  conv_forward<T>(g, x.data().data(), kernel.data().data(), bias.defined() ? bias.data().data() : nullptr,
                  out.data());
  Node<T>* nx = x.node().get();
  Node<T>* nk = kernel.node().get();
  Node<T>* nb = bias.defined() ? bias.node().get() : nullptr;
  auto backward = [nx, nk, nb, g](std::span<const T> gout) {
    auto gx = detail::sink(nx);
    auto gk = detail::sink(nk);
    std::span<T> gb = nb ? detail::sink(nb) : std::span<T>{};
    conv_backward<T>(g, nx->data.data(), nk->data.data(), gout.data(), gx.empty() ? nullptr : gx.data(),
                     gk.empty() ? nullptr : gk.data(), gb.empty() ? nullptr : gb.data());
  };
  if (bias.defined())
    return detail::make_result<T>(op, Shape{g.cout, g.ho, g.wo}, std::move(out), {&x, &kernel, &bias},
                                  std::move(backward));
  return detail::make_result<T>(op, Shape{g.cout, g.ho, g.wo}, std::move(out), {&x, &kernel},
                                std::move(backward));
}

}  // namespace

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias, std::size_t groups) {
  if (kernel.rank() != 4 || kernel.extent(2) != kernel.extent(3))
    throw ShapeError("conv2d: kernel must be square [Cout,Cin/groups,k,k], got " + to_string(kernel.shape()));
  const std::size_t k = kernel.extent(2);
  if (k % 2 == 0) throw ShapeError("conv2d: same padding needs an odd kernel, got k=" + std::to_string(k));
  return conv_impl("conv2d", x, kernel, bias, 1, k / 2, groups);
}

template <class T>
Tensor<T> conv2d_strided(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias, std::size_t stride,
                         std::size_t padding) {
  return conv_impl("conv2d_strided", x, kernel, bias, stride, padding, 1);
}

template <class T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                           std::size_t stride) {
  if (x.rank() != 3 || kernel.rank() != 4 || kernel.extent(0) != x.extent(0) ||
      kernel.extent(2) != kernel.extent(3) || stride == 0)
    throw ShapeError("conv_transpose2d: input " + to_string(x.shape()) + " incompatible with kernel " +
                     to_string(kernel.shape()));
  const std::size_t cin = x.extent(0), h = x.extent(1), w = x.extent(2);
  const std::size_t cout = kernel.extent(1), k = kernel.extent(2);
  if (bias.defined() && bias.shape() != Shape{cout})
    throw ShapeError("conv_transpose2d: bias must be [" + std::to_string(cout) + "]");
  const std::size_t ho = (h - 1) * stride + k, wo = (w - 1) * stride + k;

  std::vector<T> out(cout * ho * wo, T(0));
  auto xv = x.data();
  auto kv = kernel.data();
  if (bias.defined())
    for (std::size_t co = 0; co < cout; ++co)
      std::fill(out.begin() + co * ho * wo, out.begin() + (co + 1) * ho * wo, bias.data()[co]);
  for (std::size_t ci = 0; ci < cin; ++ci)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b) {
          const T wv = kv[((ci * cout + co) * k + a) * k + b];
          for (std::size_t iy = 0; iy < h; ++iy) {
            const T* xrow = xv.data() + (ci * h + iy) * w;
            T* orow = out.data() + (co * ho + iy * stride + a) * wo + b;
            for (std::size_t ix = 0; ix < w; ++ix) orow[ix * stride] += wv * xrow[ix];
          }
        }

  Node<T>* nx = x.node().get();
  Node<T>* nk = kernel.node().get();
  Node<T>* nb = bias.defined() ? bias.node().get() : nullptr;
  auto backward = [nx, nk, nb, cin, h, w, cout, k, stride, ho, wo](std::span<const T> g) {
    auto gx = detail::sink(nx);
    auto gk = detail::sink(nk);
    if (nb) {
      if (auto gb = detail::sink(nb); !gb.empty())
        for (std::size_t co = 0; co < cout; ++co) {
          T acc = 0;
          for (std::size_t i = 0; i < ho * wo; ++i) acc += g[co * ho * wo + i];
          gb[co] += acc;
        }
    }
    for (std::size_t ci = 0; ci < cin; ++ci)
      for (std::size_t co = 0; co < cout; ++co)
        for (std::size_t a = 0; a < k; ++a)
          for (std::size_t b = 0; b < k; ++b) {
            const std::size_t kidx = ((ci * cout + co) * k + a) * k + b;
            const T wv = nk->data[kidx];
            T kacc = 0;
            for (std::size_t iy = 0; iy < h; ++iy) {
              const std::size_t xoff = (ci * h + iy) * w;
              const T* grow = g.data() + (co * ho + iy * stride + a) * wo + b;
              for (std::size_t ix = 0; ix < w; ++ix) {
                if (!gx.empty()) gx[xoff + ix] += wv * grow[ix * stride];
                kacc += grow[ix * stride] * nx->data[xoff + ix];
              }
            }
            if (!gk.empty()) gk[kidx] += kacc;
          }
  };
  if (bias.defined())
    return detail::make_result<T>("conv_transpose2d", Shape{cout, ho, wo}, std::move(out), {&x, &kernel, &bias},
                                  std::move(backward));
  return detail::make_result<T>("conv_transpose2d", Shape{cout, ho, wo}, std::move(out), {&x, &kernel},
                                std::move(backward));
}

#define SST_INSTANTIATE(T)                                                                                 \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t);            \
  template Tensor<T> conv2d_strided(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t,     \
                                    std::size_t);                                                          \
  template Tensor<T> conv_transpose2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t);

SST_INSTANTIATE(float)
SST_INSTANTIATE(double)

}  // namespace sst::ad
