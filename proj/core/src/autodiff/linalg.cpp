#include "op_support.hpp"
#include "sst/autodiff/ops.hpp"

namespace sst::ad {

namespace {

// C[n,m] += op(A) * op(B) with row-major storage. The i-k-j order keeps the
// inner loop contiguous for the common untransposed case; the reduction
// order is fixed so results are reproducible.
template <class T>
void gemm_acc(bool trans_a, bool trans_b, std::size_t n, std::size_t k, std::size_t m,
              const T* a, const T* b, T* c) {
  if (!trans_a && !trans_b) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const T av = a[i * k + p];
        const T* brow = b + p * m;
        T* crow = c + i * m;
        for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
      }
  } else if (trans_a && !trans_b) {
    // A stored [k,n].
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t i = 0; i < n; ++i) {
        const T av = a[p * n + i];
        const T* brow = b + p * m;
        T* crow = c + i * m;
        for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
      }
  } else if (!trans_a && trans_b) {
    // B stored [m,k].
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        const T* arow = a + i * k;
        const T* brow = b + j * k;
        T acc = 0;
        for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
        c[i * m + j] += acc;
      }
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        T acc = 0;
        for (std::size_t p = 0; p < k; ++p) acc += a[p * n + i] * b[j * k + p];
        c[i * m + j] += acc;
      }
  }
}

}  // namespace

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const bool batched = a.rank() == 3;
  if (!((a.rank() == 2 && b.rank() == 2) || (a.rank() == 3 && b.rank() == 3)))
    throw ShapeError("matmul: expected two rank-2 or two rank-3 operands, got " +
                     to_string(a.shape()) + " and " + to_string(b.shape()));
  const std::size_t batch = batched ? a.extent(0) : 1;
  const std::size_t off = batched ? 1 : 0;
  const std::size_t n = a.extent(off), k = a.extent(off + 1);
  const std::size_t k2 = b.extent(off), m = b.extent(off + 1);
  if (k != k2 || (batched && b.extent(0) != batch))
    throw ShapeError("matmul: inner extents differ, " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));

  std::vector<T> out(batch * n * m, T(0));
  for (std::size_t s = 0; s < batch; ++s)
    gemm_acc<T>(false, false, n, k, m, a.data().data() + s * n * k, b.data().data() + s * k * m,
                out.data() + s * n * m);

  Shape shape = batched ? Shape{batch, n, m} : Shape{n, m};
  Node<T>* na = a.node().get();
  Node<T>* nb = b.node().get();
  return detail::make_result<T>(
      "matmul", std::move(shape), std::move(out), {&a, &b},
      [na, nb, batch, n, k, m](std::span<const T> g) {
        auto ga = detail::sink(na);
        auto gb = detail::sink(nb);
        for (std::size_t s = 0; s < batch; ++s) {
          const T* gs = g.data() + s * n * m;
          // dA = dC * B^T, dB = A^T * dC
          if (!ga.empty())
            gemm_acc<T>(false, true, n, m, k, gs, nb->data.data() + s * k * m, ga.data() + s * n * k);
          if (!gb.empty())
            gemm_acc<T>(true, false, k, n, m, na->data.data() + s * n * k, gs, gb.data() + s * k * m);
        }
      });
}

template Tensor<float> matmul(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> matmul(const Tensor<double>&, const Tensor<double>&);

}  // namespace sst::ad
