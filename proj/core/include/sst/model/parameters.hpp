#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sst/autodiff/tensor.hpp"

namespace sst::model {

using ad::Shape;
using ad::Tensor;

enum class Init { zeros, ones, fan_in_uniform };

/// Ordered, uniquely named learnable tensors. Layers keep handles to the
/// same nodes, so updating values here updates the model.
template <class T>
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
  };

  explicit ParameterSet(std::uint64_t seed = 0) : rng_(seed) {}

  /// Creates and registers a leaf. Fan-in uniform draws U(-b, b) with
  /// b = 1/sqrt(fan_in), fan_in = product of all extents after the first.
  Tensor<T> create(const std::string& name, Shape shape, Init init);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  /// Total number of scalar parameters.
  std::size_t count() const;
  const Tensor<T>& at(const std::string& name) const;

  void zero_grad();
  /// Deep copy of all values, in order.
  std::vector<std::vector<T>> snapshot() const;
  void restore(const std::vector<std::vector<T>>& values);

 private:
  std::vector<Entry> entries_;
  std::mt19937_64 rng_;
};

template <class T>
struct ConvParams {
  Tensor<T> kernel;
  Tensor<T> bias;  // may be undefined
};

template <class T>
struct NormParams {
  Tensor<T> gain;
  Tensor<T> bias;
};

/// Square conv kernel [out, in/groups, k, k] with optional bias.
template <class T>
ConvParams<T> make_conv(ParameterSet<T>& ps, const std::string& name, std::size_t in, std::size_t out,
                        std::size_t k, bool bias = true, std::size_t groups = 1, Init init = Init::fan_in_uniform);

template <class T>
NormParams<T> make_norm(ParameterSet<T>& ps, const std::string& name, std::size_t channels);

extern template class ParameterSet<float>;
extern template class ParameterSet<double>;

}  // namespace sst::model
