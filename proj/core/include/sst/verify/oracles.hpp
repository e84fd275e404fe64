#pragma once

// Straight-loop reference implementations in double precision. They index
// raw buffers directly and share no code with the tensor library.

#include <cstddef>
#include <vector>

namespace sst::verify::ref {

using Buffer = std::vector<double>;

// cube [c][h][w], mask [h][w]
Buffer modulate(const Buffer& cube, const Buffer& mask, std::size_t c, std::size_t h, std::size_t w);
// -> [c][h][w + step*(c-1)]
Buffer disperse(const Buffer& cube, std::size_t c, std::size_t h, std::size_t w, std::size_t step);
// [c][h][wd] -> [h][wd]
Buffer integrate(const Buffer& dispersed, std::size_t c, std::size_t h, std::size_t wd);
// [h][w + step*(c-1)] -> [c][h][w]
Buffer shift_back(const Buffer& y, std::size_t c, std::size_t h, std::size_t w, std::size_t step);
Buffer forward_project(const Buffer& cube, const Buffer& mask, std::size_t c, std::size_t h, std::size_t w,
                       std::size_t step);

// [n][k] x [k][m]
Buffer matmul(const Buffer& a, const Buffer& b, std::size_t n, std::size_t k, std::size_t m);
// Same-size zero-padded convolution, kernel [cout][cin/groups][ks][ks].
Buffer conv2d(const Buffer& x, const Buffer& kernel, const Buffer& bias, std::size_t cin, std::size_t h,
              std::size_t w, std::size_t cout, std::size_t ks, std::size_t groups);
// Softmax over the last axis of [rows][n].
Buffer softmax_rows(const Buffer& x, std::size_t rows, std::size_t n);

double psnr(const Buffer& a, const Buffer& b, double peak);
// Windowed SSIM evaluated window by window: 11x11 Gaussian, sigma 1.5,
// K1 = 0.01, K2 = 0.03, dynamic range 1.
double ssim(const Buffer& a, const Buffer& b, std::size_t h, std::size_t w);

// Cube term plus xi times the measurement term, both as means (or sums).
double reconstruction_loss(const Buffer& x_out, const Buffer& truth, const Buffer& y, const Buffer& mask,
                           std::size_t c, std::size_t h, std::size_t w, std::size_t step, double xi, bool normalize);

}  // namespace sst::verify::ref
