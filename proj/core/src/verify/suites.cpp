#include "sst/verify/suites.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "sst/autodiff/ops.hpp"
#include "sst/model/blocks.hpp"
#include "sst/model/reversible_net.hpp"
#include "sst/optics/cassi.hpp"
#include "sst/train/loss.hpp"
#include "sst/train/metrics.hpp"
#include "sst/verify/gradcheck.hpp"
#include "sst/verify/oracles.hpp"

namespace sst::verify {

namespace {

using ad::Shape;
using ad::Tensor;
using Rng = std::mt19937_64;

template <class T>
const char* suffix() {
  return std::is_same_v<T, float> ? "[f32]" : "";
}

// Nudges every parameter so zero-initialised layers still pass gradient.
template <class T>
void jitter(model::ParameterSet<T>& ps, Rng& rng, double amount = 0.2) {
  std::uniform_real_distribution<double> u(-amount, amount);
  for (const auto& e : ps.entries()) {
    auto v = e.value;
    for (auto& x : v.data()) x = static_cast<T>(static_cast<double>(x) + u(rng));
  }
}

template <class T>
std::vector<Tensor<T>> with_params(std::vector<Tensor<T>> leaves, const model::ParameterSet<T>& ps) {
  for (const auto& e : ps.entries()) leaves.push_back(e.value);
  return leaves;
}

template <class T>
void primitive_checks(std::vector<CheckResult>& out, Rng& rng, double tol) {
  auto check = [&](const std::string& name, const std::string& op, const std::vector<Tensor<T>>& leaves,
                   const std::function<Tensor<T>()>& f) {
    const double err = gradcheck<T>(f, leaves, rng);
    out.push_back({name + suffix<T>(), op, err, tol, err <= tol});
  };
  auto rnd = [&](Shape s, double lo = -1, double hi = 1) { return random_tensor<T>(std::move(s), rng, lo, hi); };

  {
    auto a = rnd({3, 3}), b = rnd({3, 3});
    check("add", "add", {a, b}, [=] { return ad::add(a, b); });
    check("sub", "sub", {a, b}, [=] { return ad::sub(a, b); });
    check("mul", "mul", {a, b}, [=] { return ad::mul(a, b); });
  }
  {
    auto a = rnd({3, 3}), b = rnd({3, 3}, 0.5, 1.5);
    check("div", "div", {a, b}, [=] { return ad::div(a, b); });
  }
  {
    auto a = rnd({2, 5});
    check("add_scalar", "add_scalar", {a}, [=] { return ad::add(a, T(0.7)); });
    check("scale", "scale", {a}, [=] { return ad::scale(a, T(-1.3)); });
    check("gelu", "gelu", {a}, [=] { return ad::gelu(a); });
    check("sum", "sum", {a}, [=] { return ad::sum(a); });
    check("mean", "mean", {a}, [=] { return ad::mean(a); });
    check("sum_squares", "sum_squares", {a}, [=] { return ad::sum_squares(a); });
  }
  {
    auto a = rnd({4, 5}), b = rnd({5, 3});
    check("matmul", "matmul", {a, b}, [=] { return ad::matmul(a, b); });
    auto p = rnd({2, 3, 4}), q = rnd({2, 4, 3});
    check("matmul/batched", "matmul", {p, q}, [=] { return ad::matmul(p, q); });
  }
  {
    auto x = rnd({3, 5}, -2, 2);
    check("softmax", "softmax", {x}, [=] { return ad::softmax(x, 1); });
    check("softmax/axis0", "softmax", {x}, [=] { return ad::softmax(x, 0); });
    auto g = rnd({8}, 0.5, 1.5), b = rnd({8});
    auto y = rnd({8, 3});
    check("layernorm", "layernorm", {y, g, b}, [=] { return ad::layernorm(y, 0, g, b); });
    check("l2_normalize", "l2_normalize", {y}, [=] { return ad::l2_normalize(y, 1); });
  }
  {
    auto x = rnd({2, 5, 6}), k = rnd({3, 2, 3, 3}), b = rnd({3});
    check("conv2d", "conv2d", {x, k, b}, [=] { return ad::conv2d(x, k, b); });
    auto xd = rnd({4, 5, 5}), kd = rnd({4, 1, 3, 3});
    check("conv2d/depthwise", "conv2d", {xd, kd}, [=] { return ad::conv2d(xd, kd, Tensor<T>{}, 4); });
    auto k4 = rnd({3, 2, 4, 4}), b4 = rnd({3});
    auto xs = rnd({2, 8, 8});
    check("conv2d_strided", "conv2d_strided", {xs, k4, b4}, [=] { return ad::conv2d_strided(xs, k4, b4, 2, 1); });
    auto xt = rnd({3, 3, 4}), kt = rnd({3, 2, 2, 2}), bt = rnd({2});
    check("conv_transpose2d", "conv_transpose2d", {xt, kt, bt}, [=] { return ad::conv_transpose2d(xt, kt, bt, 2); });
  }
  {
    auto x = rnd({2, 3, 4});
    check("reshape", "reshape", {x}, [=] { return ad::reshape(x, {6, 4}); });
    check("permute", "permute", {x}, [=] { return ad::permute(x, {2, 0, 1}); });
    check("slice", "slice", {x}, [=] { return ad::slice(x, 2, 1, 3); });
    check("pad", "pad", {x}, [=] { return ad::pad(x, 1, 1, 2); });
    auto y = rnd({2, 1, 4});
    check("concat", "concat", {x, y}, [=] { return ad::concat<T>({x, y}, 1); });
    check("roll", "roll", {x}, [=] { return ad::roll(x, 2, -3); });
    auto z = rnd({3, 1});
    check("broadcast_to", "broadcast_to", {z}, [=] { return ad::broadcast_to(z, Shape{2, 3, 4}); });
    check("gather", "gather", {x}, [=] { return ad::gather(x, {0, 5, 5, 23, 7}, Shape{5}); });
  }
  {
    optics::DispersionConfig d{2, 0};
    auto cube = rnd({3, 4, 5}), mask = rnd({4, 5}, 0, 1);
    check("modulate", "modulate", {cube, mask}, [=] { return optics::modulate(cube, mask); });
    check("disperse", "disperse", {cube}, [=] { return optics::disperse(cube, d); });
    auto dispersed = rnd({3, 4, 9});
    check("integrate", "integrate", {dispersed}, [=] { return optics::integrate(dispersed); });
    auto y = rnd({4, 9});
    check("shift_back", "shift_back", {y}, [=] { return optics::shift_back(y, d, 3); });
  }
}

template <class T>
void block_checks(std::vector<CheckResult>& out, Rng& rng, double tol) {
  // Cap sampled coordinates per tensor so the whole suite stays quick.
  const std::size_t cap = 24;
  auto record = [&](const std::string& name, double err) { out.push_back({name + suffix<T>(), "", err, tol, err <= tol}); };
  {
    model::ParameterSet<T> ps(rng());
    auto p = model::make_ffn(ps, "ffn", 4, 2);
    jitter(ps, rng);
    auto x = random_tensor<T>({4, 5, 5}, rng);
    record("block/ffn", gradcheck<T>([&] { return model::feed_forward(x, p); }, with_params<T>({x}, ps), rng, cap));
  }
  {
    model::ParameterSet<T> ps(rng());
    auto p = model::make_spectral_block(ps, "spectral", 4, 2, 2);
    jitter(ps, rng);
    auto x = random_tensor<T>({4, 4, 4}, rng);
    record("block/spectral_attention",
           gradcheck<T>([&] { return model::spectral_attention_block(x, p); }, with_params<T>({x}, ps), rng, cap));
  }
  {
    model::ParameterSet<T> ps(rng());
    auto p = model::make_spatial_block(ps, "spatial", 4, 2, 4, 2);
    jitter(ps, rng);
    auto x = random_tensor<T>({4, 8, 8}, rng);
    record("block/spatial_attention",
           gradcheck<T>([&] { return model::spatial_attention_block(x, p); }, with_params<T>({x}, ps), rng, cap));
  }
  {
    model::ParameterSet<T> ps(rng());
    auto p = model::make_unmix(ps, "unmix", 4);
    jitter(ps, rng);
    auto x = random_tensor<T>({4, 8, 8}, rng);
    auto mask = random_tensor<T>({8, 8}, rng, 0, 1);
    record("block/unmix",
           gradcheck<T>([&] { return model::spectral_unmix(x, mask, p); }, with_params<T>({x}, ps), rng, cap));
  }
  {
    // Full loss through two reversible stages. Float32 gradients are
    // compared against differences of a float64 twin holding identical
    // values; float32 differences through this depth are mostly rounding.
    auto cfg = model::toy_config();
    cfg.height = cfg.width = 8;
    cfg.channels = 4;
    cfg.window = 4;
    cfg.base_channels = 4;
    cfg.stages = 2;
    const std::uint64_t init = rng();
    model::ReversibleNet<T> net(cfg, init);
    model::ReversibleNet<double> twin(cfg, init);
    jitter(twin.parameters(), rng);
    const auto& pe = net.parameters().entries();
    const auto& te = twin.parameters().entries();
    for (std::size_t k = 0; k < pe.size(); ++k) {
      auto dst = pe[k].value;
      auto src = te[k].value;
      for (std::size_t i = 0; i < dst.size(); ++i) {
        dst.data()[i] = static_cast<T>(src.data()[i]);
        src.data()[i] = static_cast<double>(dst.data()[i]);
      }
    }
    auto truth = random_tensor<T>({4, 8, 8}, rng, 0, 1);
    Tensor<T> mask(Shape{8, 8}, T(0));
    for (auto& v : mask.data()) v = static_cast<T>(std::bernoulli_distribution(0.5)(rng));
    auto y = optics::forward_project(truth, mask, cfg.dispersion).detach();
    auto truth64 = ad::convert<double>(truth), mask64 = ad::convert<double>(mask), y64 = ad::convert<double>(y);

    // y plus a random subset of parameter tensors.
    std::vector<std::size_t> picks(pe.size());
    std::iota(picks.begin(), picks.end(), std::size_t{0});
    std::shuffle(picks.begin(), picks.end(), rng);
    picks.resize(std::min<std::size_t>(picks.size(), 24));
    std::vector<Tensor<T>> leaves{y};
    std::vector<Tensor<double>> twin_leaves{y64};
    for (auto k : picks) {
      leaves.push_back(pe[k].value);
      twin_leaves.push_back(te[k].value);
    }
    std::function<Tensor<T>()> f = [&] {
      return train::reconstruction_loss(net.reconstruct(y, mask), truth, y, mask, cfg.dispersion).total;
    };
    std::function<Tensor<double>()> g = [&] {
      return train::reconstruction_loss(twin.reconstruct(y64, mask64), truth64, y64, mask64, cfg.dispersion).total;
    };
    record("model/loss_2_stages", gradcheck_mirrored<T, double>(f, leaves, g, twin_leaves, rng, 4));
  }
}

std::vector<double> to_vec(const Tensor<double>& t) { return t.values(); }

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

std::vector<CheckResult> gradcheck_suite(const GradSuiteOptions& opt) {
  std::vector<CheckResult> out;
  Rng rng(opt.seed);
  primitive_checks<double>(out, rng, opt.tol_double);
  if (opt.float32) primitive_checks<float>(out, rng, opt.tol_float);
  if (opt.blocks) {
    block_checks<double>(out, rng, opt.tol_double);
    if (opt.float32) block_checks<float>(out, rng, opt.tol_float);
  }
  return out;
}

std::vector<CheckResult> oracle_suite(const OracleSuiteOptions& opt) {
  Rng rng(opt.seed);
  const double s = opt.tolerance_scale;
  struct Acc {
    std::string name;
    double tol;
    double worst = 0;
  };
  std::vector<Acc> acc = {{"modulate", 1e-12 * s},       {"disperse", 1e-12 * s},     {"integrate", 1e-12 * s},
                          {"shift_back", 1e-12 * s},     {"forward_project", 1e-12 * s}, {"closed_loop", 0.0},
                          {"matmul", 1e-12 * s},         {"conv2d", 1e-12 * s},       {"softmax", 1e-12 * s},
                          {"loss", 1e-6 * s},            {"ssim", 1e-6 * s}};
  auto bump = [&](std::size_t i, double e) { acc[i].worst = std::max(acc[i].worst, e); };
  std::uniform_int_distribution<std::size_t> dim(1, 8), chan(1, 4), step(1, 2);
  auto rnd = [&](Shape sh, double lo = 0, double hi = 1) { return random_tensor<double>(std::move(sh), rng, lo, hi); };

  for (std::size_t n = 0; n < opt.instances; ++n) {
    ad::NoGradGuard guard;
    const std::size_t c = chan(rng), h = dim(rng), w = dim(rng), d = step(rng);
    optics::DispersionConfig dc{d, 0};
    auto cube = rnd({c, h, w});
    auto mask = rnd({h, w});
    for (auto& v : mask.data()) v = v < 0.5 ? 0.0 : v;
    const std::size_t wd = w + d * (c - 1);
    auto meas = rnd({h, wd});
    auto dispersed = rnd({c, h, wd});
    bump(0, max_abs_diff(to_vec(optics::modulate(cube, mask)), ref::modulate(to_vec(cube), to_vec(mask), c, h, w)));
    bump(1, max_abs_diff(to_vec(optics::disperse(cube, dc)), ref::disperse(to_vec(cube), c, h, w, d)));
    bump(2, max_abs_diff(to_vec(optics::integrate(dispersed)), ref::integrate(to_vec(dispersed), c, h, wd)));
    bump(3, max_abs_diff(to_vec(optics::shift_back(meas, dc, c)), ref::shift_back(to_vec(meas), c, h, w, d)));
    auto y = optics::forward_project(cube, mask, dc);
    bump(4, max_abs_diff(to_vec(y), ref::forward_project(to_vec(cube), to_vec(mask), c, h, w, d)));
    // Noiseless re-projection of the truth leaves exactly nothing behind.
    auto residual = optics::residual_input(y, std::optional<Tensor<double>>(optics::forward_project(cube, mask, dc)));
    double r = 0;
    for (double v : residual.data()) r = std::max(r, std::abs(v));
    bump(5, r);

    const std::size_t k = dim(rng), m = dim(rng);
    auto a = rnd({h, k}, -1, 1), b = rnd({k, m}, -1, 1);
    bump(6, max_abs_diff(to_vec(ad::matmul(a, b)), ref::matmul(to_vec(a), to_vec(b), h, k, m)));

    const std::size_t ks = 2 * step(rng) + 1, cout = chan(rng);
    auto kernel = rnd({cout, c, ks, ks}, -1, 1), bias = rnd({cout}, -1, 1);
    bump(7, max_abs_diff(to_vec(ad::conv2d(cube, kernel, bias)),
                         ref::conv2d(to_vec(cube), to_vec(kernel), to_vec(bias), c, h, w, cout, ks, 1)));

    auto logits = rnd({h, w}, -5, 5);
    bump(8, max_abs_diff(to_vec(ad::softmax(logits, 1)), ref::softmax_rows(to_vec(logits), h, w)));

    auto x_out = rnd({c, h, w});
    const double xi = n % 3 == 0 ? 0.0 : 0.2;
    const bool normalize = n % 2 == 0;
    const double got = train::reconstruction_loss(x_out, cube, y, mask, dc, {xi, normalize}).total.item();
    const double want = ref::reconstruction_loss(to_vec(x_out), to_vec(cube), to_vec(y), to_vec(mask), c, h, w, d,
                                                 xi, normalize);
    bump(9, std::abs(got - want) / std::max(std::abs(want), 1e-300));

    const std::size_t sh = 11 + dim(rng), sw = 11 + dim(rng);
    auto ia = rnd({sh, sw}), ib = rnd({sh, sw});
    const double sg = train::ssim(ia, ib), sr = ref::ssim(to_vec(ia), to_vec(ib), sh, sw);
    bump(10, std::abs(sg - sr) / std::max(std::abs(sr), 1e-12));
  }

  std::vector<CheckResult> out;
  for (const auto& a : acc) out.push_back({a.name, "", a.worst, a.tol, a.worst <= a.tol});

  // Closed forms.
  auto closed = [&](const std::string& name, double got, double want, double tol) {
    const double e = std::isinf(want) ? (got == want ? 0.0 : std::numeric_limits<double>::infinity())
                                      : std::abs(got - want);
    out.push_back({name, "", e, tol, e <= tol});
  };
  {
    std::vector<double> zeros(64, 0.0), ones(64, 1.0), tenth(64, 0.1);
    closed("psnr/identical", train::psnr(ones, ones, 1.0), std::numeric_limits<double>::infinity(), 0);
    closed("psnr/0dB", train::psnr(zeros, ones, 1.0), 0.0, 1e-9 * s);
    closed("psnr/20dB", train::psnr(zeros, tenth, 1.0), 20.0, 1e-9 * s);
    auto img = rnd({16, 16});
    closed("ssim/identical", train::ssim(img, img), 1.0, 0.0);
  }
  return out;
}

bool report(std::ostream& os, const std::vector<CheckResult>& results) {
  bool ok = true;
  for (const auto& r : results) {
    char line[160];
    std::snprintf(line, sizeof line, "%-4s %-28s worst_rel_err=%.3e tol=%.1e", r.passed ? "ok" : "FAIL",
                  r.name.c_str(), r.error, r.tolerance);
    os << line << '\n';
    ok = ok && r.passed;
  }
  return ok;
}

}  // namespace sst::verify
