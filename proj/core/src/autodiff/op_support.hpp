#pragma once

// Private helpers shared by the primitive implementations.

#include <cassert>
#include <cmath>
#include <initializer_list>
#include <span>

#include "sst/autodiff/tensor.hpp"

namespace sst::ad::detail {

template <class T>
bool all_finite(std::span<const T> v) {
  for (T x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

/// Wraps a freshly computed buffer as a graph node. The backward closure is
/// only retained when grad mode is on and some input requires a gradient.
template <class T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                      std::initializer_list<const Tensor<T>*> inputs,
                      std::function<void(std::span<const T>)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  assert(numel(node->shape) == node->data.size());
#ifndef NDEBUG
  bool inputs_finite = true;
  for (const Tensor<T>* in : inputs) inputs_finite = inputs_finite && all_finite<T>(in->data());
  assert(!inputs_finite || all_finite<T>(node->data));
#endif
  bool needs = false;
  if (grad_enabled())
    for (const Tensor<T>* in : inputs) needs = needs || in->requires_grad();
  if (needs) {
    node->requires_grad = true;
    for (const Tensor<T>* in : inputs) node->inputs.push_back(in->node());
    node->backward = std::move(backward);
  }
  return Tensor<T>(std::move(node));
}

template <class T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> data,
                      const std::vector<Tensor<T>>& inputs,
                      std::function<void(std::span<const T>)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->op = op;
  bool needs = false;
  if (grad_enabled())
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (needs) {
    node->requires_grad = true;
    for (const auto& in : inputs) node->inputs.push_back(in.node());
    node->backward = std::move(backward);
  }
  return Tensor<T>(std::move(node));
}

/// Gradient destination for an input, or an empty span when the input does
/// not take part in differentiation.
template <class T>
std::span<T> sink(Node<T>* n) {
  if (!n->requires_grad) return {};
  return n->grad_buffer();
}

/// Splits `shape` around `axis` into (outer, extent, inner) strides.
struct AxisView {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

inline AxisView axis_view(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size())
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + to_string(shape));
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= shape[i];
  v.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

}  // namespace sst::ad::detail
