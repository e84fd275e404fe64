#pragma once

#include <span>

#include "sst/autodiff/tensor.hpp"

namespace sst::train {

/// 10 log10(peak^2 / MSE). Returns +infinity when the inputs are equal.
double psnr(std::span<const double> a, std::span<const double> b, double peak);

template <class T>
double psnr(const ad::Tensor<T>& a, const ad::Tensor<T>& b, double peak);

struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 1.0;
};

/// Mean SSIM over every fully contained Gaussian window of two
/// single-channel height x width images (row-major).
double ssim(std::span<const double> a, std::span<const double> b, std::size_t height, std::size_t width,
            const SsimOptions& opt = {});

/// Channel-mean SSIM of two [C,H,W] cubes, or plain SSIM of [H,W] images.
template <class T>
double ssim(const ad::Tensor<T>& a, const ad::Tensor<T>& b, const SsimOptions& opt = {});

/// Largest value of a tensor, the PSNR peak convention for a scene.
template <class T>
double peak_value(const ad::Tensor<T>& x);

}  // namespace sst::train
