#include "sst/autodiff/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

namespace sst::ad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

thread_local bool g_grad_enabled = true;

std::atomic<bool> g_flip_active{false};
std::string g_flip_op;

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <class T>
Tensor<T>::Tensor(Shape shape, T fill) : node_(std::make_shared<Node<T>>()) {
  node_->data.assign(numel(shape), fill);
  node_->shape = std::move(shape);
}

template <class T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : node_(std::make_shared<Node<T>>()) {
  if (numel(shape) != values.size())
    throw ShapeError("shape " + to_string(shape) + " holds " + std::to_string(numel(shape)) +
                     " values, got " + std::to_string(values.size()));
  node_->shape = std::move(shape);
  node_->data = std::move(values);
}

template <class T>
T Tensor<T>::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return node_->data[0];
}

template <class T>
Tensor<T>& Tensor<T>::set_requires_grad(bool flag) {
  if (!node_->inputs.empty())
    throw GraphError("requires_grad can only be toggled on leaf tensors");
  node_->requires_grad = flag;
  return *this;
}

template <class T>
std::vector<T> Tensor<T>::grad() const {
  if (node_->grad.empty()) return std::vector<T>(node_->data.size(), T(0));
  return node_->grad;
}

template <class T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor<T>(node_->shape, node_->data);
}

template <class T>
std::vector<Node<T>*> topological_order(const Tensor<T>& root) {
  std::vector<Node<T>*> order;
  if (!root.defined() || !root.requires_grad()) return order;
  std::unordered_set<Node<T>*> visited;
  // Iterative post-order DFS; recursion depth would track model depth.
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<T>* child = node->inputs[next++].get();
      if (child->requires_grad && !child->inputs.empty() && visited.insert(child).second)
        stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

template <class T>
void backward(const Tensor<T>& loss) {
  if (loss.defined() && loss.size() != 1)
    throw GraphError("backward needs a scalar loss, got shape " + to_string(loss.shape()));
  const T one(1);
  backward(loss, std::span<const T>(&one, 1));
}

template <class T>
void backward(const Tensor<T>& root_tensor, std::span<const T> cotangent) {
  if (!root_tensor.defined()) throw GraphError("backward on an undefined tensor");
  if (root_tensor.node()->released)
    throw GraphError("backward already ran on this graph; rebuild it before calling again");
  if (cotangent.size() != root_tensor.size())
    throw GraphError("cotangent has " + std::to_string(cotangent.size()) + " entries for shape " +
                     to_string(root_tensor.shape()));
  if (!root_tensor.requires_grad()) throw GraphError("result does not depend on any tensor requiring grad");

  Node<T>* root = root_tensor.node().get();
  auto seed = root->grad_buffer();
  if (root->inputs.empty()) {
    // The root is itself a leaf.
    for (std::size_t i = 0; i < seed.size(); ++i) seed[i] += cotangent[i];
    return;
  }
  auto order = topological_order(root_tensor);
  std::copy(cotangent.begin(), cotangent.end(), seed.begin());

  const std::string* flip = testing::active_sign_flip();
  std::vector<T> flipped;
  // Released inputs are parked here so nodes later in the order stay alive.
  std::vector<std::shared_ptr<Node<T>>> keep;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (!node->grad.empty() && node->backward) {
      if (flip && *flip == node->op) {
        flipped.resize(node->grad.size());
        for (std::size_t i = 0; i < flipped.size(); ++i) flipped[i] = -node->grad[i];
        node->backward(flipped);
      } else {
        node->backward(node->grad);
      }
    }
    node->backward = nullptr;
    for (auto& in : node->inputs) keep.push_back(std::move(in));
    node->inputs.clear();
    node->grad.clear();
    node->grad.shrink_to_fit();
    node->released = true;
  }
}

namespace testing {

ScopedVjpSignFlip::ScopedVjpSignFlip(std::string op) {
  g_flip_op = std::move(op);
  g_flip_active = true;
}

ScopedVjpSignFlip::~ScopedVjpSignFlip() {
  g_flip_active = false;
  g_flip_op.clear();
}

const std::string* active_sign_flip() { return g_flip_active ? &g_flip_op : nullptr; }

}  // namespace testing

template class Tensor<float>;
template class Tensor<double>;
template std::vector<Node<float>*> topological_order(const Tensor<float>&);
template std::vector<Node<double>*> topological_order(const Tensor<double>&);
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);
template void backward(const Tensor<float>&, std::span<const float>);
template void backward(const Tensor<double>&, std::span<const double>);

}  // namespace sst::ad
