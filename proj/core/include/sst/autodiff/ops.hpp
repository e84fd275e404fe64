#pragma once

// Differentiable primitives. Every function here records a VJP on the tape
// and is covered by the finite-difference suite in verify/.

#include <cstdint>
#include <vector>

#include "sst/autodiff/tensor.hpp"

namespace sst::ad {

// ---------------------------------------------------------------------------
// Elementwise. Tensor operands must have identical shapes.

template <class T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> add(const Tensor<T>& a, T b);
template <class T> Tensor<T> scale(const Tensor<T>& a, T factor);

/// Gaussian error linear unit, exact erf form.
template <class T> Tensor<T> gelu(const Tensor<T>& x);

template <class T> Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <class T> Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <class T> Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <class T> Tensor<T> operator/(const Tensor<T>& a, const Tensor<T>& b) { return div(a, b); }

// ---------------------------------------------------------------------------
// Reductions (result is a rank-0 tensor).

template <class T> Tensor<T> sum(const Tensor<T>& x);
template <class T> Tensor<T> mean(const Tensor<T>& x);
/// Sum of squares, i.e. the squared L2 norm.
template <class T> Tensor<T> sum_squares(const Tensor<T>& x);

// ---------------------------------------------------------------------------
// Linear algebra.

/// [n,k]x[k,m] -> [n,m], or batched [b,n,k]x[b,k,m] -> [b,n,m].
template <class T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// ---------------------------------------------------------------------------
// Normalization and attention helpers. `axis` indexes the reduced dimension.

template <class T> Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

/// Standardize along `axis` then apply per-position gain and bias, each of
/// shape [extent(axis)].
template <class T>
Tensor<T> layernorm(const Tensor<T>& x, std::size_t axis, const Tensor<T>& gain,
                    const Tensor<T>& bias, T eps = T(1e-5));

/// x / max(||x||_2, eps) along `axis`.
template <class T> Tensor<T> l2_normalize(const Tensor<T>& x, std::size_t axis, T eps = T(1e-12));

// ---------------------------------------------------------------------------
// Convolutions over [C,H,W] feature maps. An undefined bias means none.

/// Same-size convolution: odd square kernel [Cout, Cin/groups, k, k],
/// stride 1, zero padding k/2.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias = {},
                 std::size_t groups = 1);

/// General strided convolution with symmetric zero padding.
template <class T>
Tensor<T> conv2d_strided(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                         std::size_t stride, std::size_t padding);

/// Transposed convolution, kernel [Cin, Cout, k, k], no padding:
/// output extent (n-1)*stride + k.
template <class T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                           std::size_t stride);

// ---------------------------------------------------------------------------
// Data movement. Each VJP is the inverse movement.

template <class T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <class T> Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& axes);
/// Half-open range [begin, end) along `axis`.
template <class T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end);
/// Zero padding of `before`/`after` entries along `axis`.
template <class T>
Tensor<T> pad(const Tensor<T>& x, std::size_t axis, std::size_t before, std::size_t after);
template <class T> Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
/// Cyclic shift: out[(i + shift) mod n] = x[i] along `axis`.
template <class T> Tensor<T> roll(const Tensor<T>& x, std::size_t axis, std::int64_t shift);
/// Right-aligned broadcasting of size-1 (or missing leading) extents.
template <class T> Tensor<T> broadcast_to(const Tensor<T>& x, const Shape& shape);
/// out.flat[i] = x.flat[index[i]]; gradients scatter-add back.
template <class T>
Tensor<T> gather(const Tensor<T>& x, const std::vector<std::size_t>& index, Shape out_shape);

}  // namespace sst::ad
