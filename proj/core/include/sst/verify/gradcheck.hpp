#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "sst/autodiff/tensor.hpp"

namespace sst::verify {

/// Central-difference check of the reverse-mode gradient of f with respect
/// to `leaves`. f is contracted with a random cotangent so every output
/// element contributes. Each coordinate uses h = cbrt(eps) * max(1, |x|).
/// Returns |g_ad - g_fd| / max(|g_ad|, |g_fd|) over the sampled coordinates.
/// `max_coords` caps how many coordinates are sampled per leaf (0 = all).
template <class T>
double gradcheck(const std::function<ad::Tensor<T>()>& f, const std::vector<ad::Tensor<T>>& leaves,
                 std::mt19937_64& rng, std::size_t max_coords = 0);

/// Same check with the finite differences taken on a higher-precision
/// mirror of f. `mirror_leaves[i]` must hold exactly the values of
/// `leaves[i]`; the step follows the mirror's precision. Used where float32
/// rounding noise in the differences would swamp deep compositions.
template <class T, class Ref>
double gradcheck_mirrored(const std::function<ad::Tensor<T>()>& f, const std::vector<ad::Tensor<T>>& leaves,
                          const std::function<ad::Tensor<Ref>()>& mirror,
                          const std::vector<ad::Tensor<Ref>>& mirror_leaves, std::mt19937_64& rng,
                          std::size_t max_coords = 0);

/// Fresh leaf of the given shape with entries drawn from U(lo, hi).
template <class T>
ad::Tensor<T> random_tensor(ad::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0);

}  // namespace sst::verify
