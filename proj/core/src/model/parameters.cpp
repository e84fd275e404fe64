#include "sst/model/parameters.hpp"

#include <cmath>
#include <stdexcept>

namespace sst::model {

template <class T>
Tensor<T> ParameterSet<T>::create(const std::string& name, Shape shape, Init init) {
  for (const auto& e : entries_)
    if (e.name == name) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  Tensor<T> t(shape, T(0));
  switch (init) {
    case Init::zeros:
      break;
    case Init::ones:
      for (auto& v : t.data()) v = T(1);
      break;
    case Init::fan_in_uniform: {
      std::size_t fan_in = 1;
      for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : t.data()) v = static_cast<T>(dist(rng_));
      break;
    }
  }
  t.set_requires_grad(true);
  entries_.push_back({name, t});
  return t;
}

template <class T>
std::size_t ParameterSet<T>::count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

template <class T>
const Tensor<T>& ParameterSet<T>::at(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.value;
  throw std::out_of_range("no parameter named '" + name + "'");
}

template <class T>
void ParameterSet<T>::zero_grad() {
  for (auto& e : entries_) e.value.zero_grad();
}

template <class T>
std::vector<std::vector<T>> ParameterSet<T>::snapshot() const {
  std::vector<std::vector<T>> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.value.values());
  return out;
}

template <class T>
void ParameterSet<T>::restore(const std::vector<std::vector<T>>& values) {
  if (values.size() != entries_.size()) throw std::invalid_argument("restore: parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto dst = entries_[i].value.data();
    if (values[i].size() != dst.size())
      throw std::invalid_argument("restore: size mismatch for '" + entries_[i].name + "'");
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

template <class T>
ConvParams<T> make_conv(ParameterSet<T>& ps, const std::string& name, std::size_t in, std::size_t out,
                        std::size_t k, bool bias, std::size_t groups, Init init) {
  ConvParams<T> p;
  p.kernel = ps.create(name + ".weight", Shape{out, in / groups, k, k}, init);
  if (bias) p.bias = ps.create(name + ".bias", Shape{out}, Init::zeros);
  return p;
}

template <class T>
NormParams<T> make_norm(ParameterSet<T>& ps, const std::string& name, std::size_t channels) {
  return {ps.create(name + ".gain", Shape{channels}, Init::ones), ps.create(name + ".bias", Shape{channels}, Init::zeros)};
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template ConvParams<float> make_conv(ParameterSet<float>&, const std::string&, std::size_t, std::size_t, std::size_t,
                                     bool, std::size_t, Init);
template ConvParams<double> make_conv(ParameterSet<double>&, const std::string&, std::size_t, std::size_t,
                                      std::size_t, bool, std::size_t, Init);
template NormParams<float> make_norm(ParameterSet<float>&, const std::string&, std::size_t);
template NormParams<double> make_norm(ParameterSet<double>&, const std::string&, std::size_t);

}  // namespace sst::model
