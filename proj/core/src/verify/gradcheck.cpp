#include "sst/verify/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace sst::verify {

template <class T>
ad::Tensor<T> random_tensor(ad::Shape shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<T> v(ad::numel(shape));
  for (auto& x : v) x = static_cast<T>(u(rng));
  return ad::Tensor<T>(std::move(shape), std::move(v));
}

template <class T, class Ref>
double gradcheck_mirrored(const std::function<ad::Tensor<T>()>& f, const std::vector<ad::Tensor<T>>& leaves,
                          const std::function<ad::Tensor<Ref>()>& mirror,
                          const std::vector<ad::Tensor<Ref>>& mirror_leaves, std::mt19937_64& rng,
                          std::size_t max_coords) {
  if (leaves.size() != mirror_leaves.size()) throw std::invalid_argument("gradcheck: mirror leaf count differs");
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    auto leaf = leaves[k];
    if (leaf.shape() != mirror_leaves[k].shape()) throw std::invalid_argument("gradcheck: mirror shape differs");
    leaf.set_requires_grad(true);
    leaf.zero_grad();
  }
  auto out = f();
  std::vector<T> cotangent(out.size());
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& c : cotangent) c = static_cast<T>(u(rng));
  ad::backward<T>(out, cotangent);

  auto contract = [&] {
    ad::NoGradGuard guard;
    const auto y = mirror();
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
      s += static_cast<double>(y.data()[i]) * static_cast<double>(cotangent[i]);
    return s;
  };

  const double step = std::cbrt(static_cast<double>(std::numeric_limits<Ref>::epsilon()));
  double diff2 = 0, ad2 = 0, fd2 = 0;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    auto leaf = leaves[k];
    auto target = mirror_leaves[k];
    const auto analytic = leaf.grad();
    std::vector<std::size_t> coords(leaf.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (max_coords && coords.size() > max_coords) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords);
    }
    auto data = target.data();
    for (std::size_t i : coords) {
      const Ref orig = data[i];
      const double h = step * std::max(1.0, std::abs(static_cast<double>(orig)));
      const Ref plus = static_cast<Ref>(static_cast<double>(orig) + h);
      const Ref minus = static_cast<Ref>(static_cast<double>(orig) - h);
      data[i] = plus;
      const double fp = contract();
      data[i] = minus;
      const double fm = contract();
      data[i] = orig;
      const double fd = (fp - fm) / (static_cast<double>(plus) - static_cast<double>(minus));
      const double a = static_cast<double>(analytic[i]);
      diff2 += (a - fd) * (a - fd);
      ad2 += a * a;
      fd2 += fd * fd;
    }
    leaf.zero_grad();
  }
  const double scale = std::sqrt(std::max(ad2, fd2));
  if (scale == 0.0) return 0.0;
  return std::sqrt(diff2) / scale;
}

template <class T>
double gradcheck(const std::function<ad::Tensor<T>()>& f, const std::vector<ad::Tensor<T>>& leaves,
                 std::mt19937_64& rng, std::size_t max_coords) {
  return gradcheck_mirrored<T, T>(f, leaves, f, leaves, rng, max_coords);
}

template ad::Tensor<float> random_tensor(ad::Shape, std::mt19937_64&, double, double);
template ad::Tensor<double> random_tensor(ad::Shape, std::mt19937_64&, double, double);
template double gradcheck(const std::function<ad::Tensor<float>()>&, const std::vector<ad::Tensor<float>>&,
                          std::mt19937_64&, std::size_t);
template double gradcheck(const std::function<ad::Tensor<double>()>&, const std::vector<ad::Tensor<double>>&,
                          std::mt19937_64&, std::size_t);
template double gradcheck_mirrored(const std::function<ad::Tensor<float>()>&, const std::vector<ad::Tensor<float>>&,
                                   const std::function<ad::Tensor<double>()>&,
                                   const std::vector<ad::Tensor<double>>&, std::mt19937_64&, std::size_t);

}  // namespace sst::verify
