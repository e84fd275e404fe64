#pragma once

// Dense row-major tensors with a reverse-mode differentiation tape.
//
// A Tensor is a cheap, shared handle onto a graph Node. Operations in
// ops.hpp allocate a fresh Node whose inputs are the operand Nodes; calling
// backward() on a scalar result walks that DAG once in reverse topological
// order and accumulates gradients into every leaf that requires them.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sst::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Raised for any operand shape that violates an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when the tape is misused (non-scalar loss, double backward, ...).
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

template <class T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until something is accumulated
  bool requires_grad = false;
  bool released = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Receives dLoss/dOutput and accumulates into the inputs' grad buffers.
  std::function<void(std::span<const T>)> backward;

  bool is_leaf() const { return inputs.empty() && !released; }

  /// Gradient buffer, zero-allocated on first use.
  std::span<T> grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), T(0)); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), T(1)); }
  static Tensor scalar(T value) { return Tensor(Shape{}, value); }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t extent(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->data.size(); }

  std::span<T> data() { return node_->data; }
  std::span<const T> data() const { return node_->data; }
  const std::vector<T>& values() const& { return node_->data; }
  // Copy for temporaries so range-for over f(x).values() stays valid.
  std::vector<T> values() && { return node_->data; }
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  Tensor& set_requires_grad(bool flag = true);
  bool has_grad() const { return !node_->grad.empty(); }
  /// Accumulated gradient; all zeros if backward never reached this tensor.
  std::vector<T> grad() const;
  void zero_grad() { node_->grad.clear(); }

  /// New leaf holding a copy of the values, disconnected from any graph.
  Tensor detach() const;
  const char* op_name() const { return node_->op; }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Operations executed while a guard is alive record no tape.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Interior nodes reachable from `root`, inputs before consumers.
template <class T>
std::vector<Node<T>*> topological_order(const Tensor<T>& root);

/// Reverse-mode sweep from a scalar loss. The traversed graph is released
/// afterwards, so a second call on the same loss throws GraphError; leaves
/// keep accumulating across separate graphs until zero_grad().
template <class T>
void backward(const Tensor<T>& loss);

/// Vector-Jacobian product: the same sweep seeded with `cotangent`, which
/// must have one entry per element of `root`.
template <class T>
void backward(const Tensor<T>& root, std::span<const T> cotangent);

/// Value-only conversion between precisions (result is a fresh leaf).
template <class To, class From>
Tensor<To> convert(const Tensor<From>& x) {
  std::vector<To> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<To>(x.data()[i]);
  return Tensor<To>(x.shape(), std::move(out));
}

namespace testing {

/// Negates the incoming gradient of every node whose op name matches `op`
/// while active. Used to prove the gradient checker catches broken VJPs.
class ScopedVjpSignFlip {
 public:
  explicit ScopedVjpSignFlip(std::string op);
  ~ScopedVjpSignFlip();
  ScopedVjpSignFlip(const ScopedVjpSignFlip&) = delete;
  ScopedVjpSignFlip& operator=(const ScopedVjpSignFlip&) = delete;
};

const std::string* active_sign_flip();

}  // namespace testing

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace sst::ad
