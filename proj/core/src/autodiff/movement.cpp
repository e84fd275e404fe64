#include <memory>
#include <numeric>

#include "op_support.hpp"
#include "sst/autodiff/ops.hpp"

namespace sst::ad {

namespace {

using IndexMap = std::shared_ptr<const std::vector<std::size_t>>;

// For every flat output position, the flat input position it reads, given
// per-output-axis input strides (0 for broadcast axes).
IndexMap strided_map(const Shape& out_shape, const std::vector<std::size_t>& in_strides) {
  auto map = std::make_shared<std::vector<std::size_t>>(numel(out_shape));
  const std::size_t rank = out_shape.size();
  std::vector<std::size_t> counter(rank, 0);
  std::size_t src = 0;
  for (std::size_t flat = 0; flat < map->size(); ++flat) {
    (*map)[flat] = src;
    for (std::size_t ax = rank; ax-- > 0;) {
      if (++counter[ax] < out_shape[ax]) {
        src += in_strides[ax];
        break;
      }
      src -= in_strides[ax] * (out_shape[ax] - 1);
      counter[ax] = 0;
    }
  }
  return map;
}

std::vector<std::size_t> row_major_strides(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

template <class T>
Tensor<T> apply_map(const char* op, const Tensor<T>& x, Shape out_shape, IndexMap map) {
  std::vector<T> out(map->size());
  auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[(*map)[i]];
  Node<T>* nx = x.node().get();
  return detail::make_result<T>(op, std::move(out_shape), std::move(out), {&x}, [nx, map](std::span<const T> g) {
    auto gx = detail::sink(nx);
    for (std::size_t i = 0; i < g.size(); ++i) gx[(*map)[i]] += g[i];
  });
}

}  // namespace

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.size())
    throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  std::vector<T> out(x.data().begin(), x.data().end());
  Node<T>* nx = x.node().get();
  return detail::make_result<T>("reshape", std::move(shape), std::move(out), {&x}, [nx](std::span<const T> g) {
    auto gx = detail::sink(nx);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

template <class T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& axes) {
  const std::size_t rank = x.rank();
  std::vector<bool> seen(rank, false);
  bool ok = axes.size() == rank;
  for (std::size_t a : axes) {
    if (!ok || a >= rank || seen[a]) {
      ok = false;
      break;
    }
    seen[a] = true;
  }
  if (!ok) throw ShapeError("permute: axes are not a permutation of rank " + std::to_string(rank));
  const auto in_strides = row_major_strides(x.shape());
  Shape out_shape(rank);
  std::vector<std::size_t> strides(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    out_shape[i] = x.extent(axes[i]);
    strides[i] = in_strides[axes[i]];
  }
  auto map = strided_map(out_shape, strides);
  return apply_map<T>("permute", x, std::move(out_shape), std::move(map));
}

template <class T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto v = detail::axis_view(x.shape(), axis);
  if (begin > end || end > v.extent)
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) + ") outside axis " +
                     std::to_string(axis) + " of " + to_string(x.shape()));
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const std::size_t len = end - begin;
  std::vector<T> out(v.outer * len * v.inner);
  auto xv = x.data();
  for (std::size_t o = 0; o < v.outer; ++o)
    std::copy_n(xv.data() + (o * v.extent + begin) * v.inner, len * v.inner, out.data() + o * len * v.inner);
  Node<T>* nx = x.node().get();
  return detail::make_result<T>("slice", std::move(out_shape), std::move(out), {&x},
                                [nx, v, begin, len](std::span<const T> g) {
                                  auto gx = detail::sink(nx);
                                  for (std::size_t o = 0; o < v.outer; ++o) {
                                    T* dst = gx.data() + (o * v.extent + begin) * v.inner;
                                    const T* src = g.data() + o * len * v.inner;
                                    for (std::size_t i = 0; i < len * v.inner; ++i) dst[i] += src[i];
                                  }
                                });
}

template <class T>
Tensor<T> pad(const Tensor<T>& x, std::size_t axis, std::size_t before, std::size_t after) {
  const auto v = detail::axis_view(x.shape(), axis);
  Shape out_shape = x.shape();
  const std::size_t n = v.extent + before + after;
  out_shape[axis] = n;
  std::vector<T> out(v.outer * n * v.inner, T(0));
  auto xv = x.data();
  for (std::size_t o = 0; o < v.outer; ++o)
    std::copy_n(xv.data() + o * v.extent * v.inner, v.extent * v.inner, out.data() + (o * n + before) * v.inner);
  Node<T>* nx = x.node().get();
  return detail::make_result<T>("pad", std::move(out_shape), std::move(out), {&x},
                                [nx, v, before, n](std::span<const T> g) {
                                  auto gx = detail::sink(nx);
                                  for (std::size_t o = 0; o < v.outer; ++o) {
                                    const T* src = g.data() + (o * n + before) * v.inner;
                                    T* dst = gx.data() + o * v.extent * v.inner;
                                    for (std::size_t i = 0; i < v.extent * v.inner; ++i) dst[i] += src[i];
                                  }
                                });
}

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + to_string(first));
  std::size_t total = 0;
  for (const auto& p : parts) {
    Shape a = p.shape(), b = first;
    if (a.size() != b.size()) throw ShapeError("concat: rank mismatch " + to_string(a) + " vs " + to_string(b));
    a[axis] = b[axis] = 0;
    if (a != b) throw ShapeError("concat: incompatible " + to_string(p.shape()) + " vs " + to_string(first));
    total += p.extent(axis);
  }
  const auto v = detail::axis_view(first, axis);
  Shape out_shape = first;
  out_shape[axis] = total;
  std::vector<T> out(v.outer * total * v.inner);
  std::vector<std::size_t> offsets, lens;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t len = p.extent(axis);
    for (std::size_t o = 0; o < v.outer; ++o)
      std::copy_n(p.data().data() + o * len * v.inner, len * v.inner,
                  out.data() + (o * total + offset) * v.inner);
    offsets.push_back(offset);
    lens.push_back(len);
    offset += len;
  }
  std::vector<Node<T>*> nodes;
  for (const auto& p : parts) nodes.push_back(p.node().get());
  return detail::make_result<T>("concat", std::move(out_shape), std::move(out), parts,
                                [nodes, offsets, lens, v, total](std::span<const T> g) {
                                  for (std::size_t k = 0; k < nodes.size(); ++k) {
                                    auto gp = detail::sink(nodes[k]);
                                    if (gp.empty()) continue;
                                    const std::size_t len = lens[k];
                                    for (std::size_t o = 0; o < v.outer; ++o) {
                                      const T* src = g.data() + (o * total + offsets[k]) * v.inner;
                                      T* dst = gp.data() + o * len * v.inner;
                                      for (std::size_t i = 0; i < len * v.inner; ++i) dst[i] += src[i];
                                    }
                                  }
                                });
}

template <class T>
Tensor<T> roll(const Tensor<T>& x, std::size_t axis, std::int64_t shift) {
  const auto v = detail::axis_view(x.shape(), axis);
  const auto n = static_cast<std::int64_t>(v.extent);
  const std::size_t s = n == 0 ? 0 : static_cast<std::size_t>(((shift % n) + n) % n);
  std::vector<T> out(x.size());
  auto xv = x.data();
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t e = 0; e < v.extent; ++e)
      std::copy_n(xv.data() + (o * v.extent + e) * v.inner, v.inner,
                  out.data() + (o * v.extent + (e + s) % v.extent) * v.inner);
  Node<T>* nx = x.node().get();
  return detail::make_result<T>("roll", x.shape(), std::move(out), {&x}, [nx, v, s](std::span<const T> g) {
    auto gx = detail::sink(nx);
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t e = 0; e < v.extent; ++e) {
        const T* src = g.data() + (o * v.extent + (e + s) % v.extent) * v.inner;
        T* dst = gx.data() + (o * v.extent + e) * v.inner;
        for (std::size_t i = 0; i < v.inner; ++i) dst[i] += src[i];
      }
  });
}

template <class T>
Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape) {
  const Shape& in = x.shape();
  if (in.size() > shape.size())
    throw ShapeError("broadcast_to: cannot broadcast " + to_string(in) + " to " + to_string(shape));
  const std::size_t lead = shape.size() - in.size();
  const auto in_strides = row_major_strides(in);
  std::vector<std::size_t> strides(shape.size(), 0);
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] == shape[lead + i]) {
      strides[lead + i] = in_strides[i];
    } else if (in[i] != 1) {
      throw ShapeError("broadcast_to: cannot broadcast " + to_string(in) + " to " + to_string(shape));
    }
  }
  return apply_map<T>("broadcast_to", x, shape, strided_map(shape, strides));
}

template <class T>
Tensor<T> gather(const Tensor<T>& x, const std::vector<std::size_t>& index, Shape out_shape) {
  if (numel(out_shape) != index.size())
    throw ShapeError("gather: " + std::to_string(index.size()) + " indices for shape " + to_string(out_shape));
  for (std::size_t i : index)
    if (i >= x.size()) throw ShapeError("gather: index " + std::to_string(i) + " out of range");
  auto map = std::make_shared<const std::vector<std::size_t>>(index);
  return apply_map<T>("gather", x, std::move(out_shape), std::move(map));
}

#define SST_INSTANTIATE(T)                                                                         \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                             \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<std::size_t>&);                   \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);              \
  template Tensor<T> pad(const Tensor<T>&, std::size_t, std::size_t, std::size_t);                \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                           \
  template Tensor<T> roll(const Tensor<T>&, std::size_t, std::int64_t);                            \
  template Tensor<T> broadcast_to(const Tensor<T>&, const Shape&);                                 \
  template Tensor<T> gather(const Tensor<T>&, const std::vector<std::size_t>&, Shape);

SST_INSTANTIATE(float)
SST_INSTANTIATE(double)

}  // namespace sst::ad
