#include "sst/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

#include "sst/autodiff/ops.hpp"
#include "sst/train/adam.hpp"
#include "sst/train/metrics.hpp"

namespace sst::train {

void TrainConfig::validate() const {
  schedule.validate();
  loss.validate();
  if (iterations_per_epoch < 1) throw std::invalid_argument("iterations_per_epoch must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
}

namespace {

template <class T>
Tensor<T> crop(const Tensor<T>& cube, std::size_t top, std::size_t left, std::size_t h, std::size_t w) {
  if (cube.extent(1) == h && cube.extent(2) == w) return cube;
  return ad::slice(ad::slice(cube, 1, top, top + h), 2, left, left + w).detach();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

template <class T>
Evaluation evaluate(const model::ReversibleNet<T>& net, const std::vector<Tensor<T>>& scenes, const Tensor<T>& mask,
                    std::size_t threads) {
  Evaluation ev;
  ev.psnr.assign(scenes.size(), 0.0);
  ev.ssim.assign(scenes.size(), 0.0);
  const auto& cfg = net.config();
  auto score = [&](std::size_t i) {
    ad::NoGradGuard guard;
    auto y = optics::forward_project(scenes[i], mask, cfg.dispersion);
    auto x = net.reconstruct(y, mask);
    ev.psnr[i] = psnr(x, scenes[i], peak_value(scenes[i]));
    ev.ssim[i] = ssim(x, scenes[i]);
  };
  threads = std::max<std::size_t>(1, std::min(threads, scenes.size()));
  if (threads == 1) {
    for (std::size_t i = 0; i < scenes.size(); ++i) score(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < scenes.size(); i += threads) score(i);
      });
    for (auto& th : pool) th.join();
  }
  // Summation in scene order keeps the means independent of the thread count.
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    ev.mean_psnr += ev.psnr[i];
    ev.mean_ssim += ev.ssim[i];
  }
  if (!scenes.empty()) {
    ev.mean_psnr /= static_cast<double>(scenes.size());
    ev.mean_ssim /= static_cast<double>(scenes.size());
  }
  return ev;
}

template <class T>
TrainResult<T> train(model::ReversibleNet<T>& net, const Dataset<T>& data, const TrainConfig& cfg,
                     const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (data.train.empty()) throw std::invalid_argument("training set is empty");
  const auto& mc = net.config();
  for (const auto& s : data.train)
    if (s.rank() != 3 || s.extent(0) != mc.channels || s.extent(1) < mc.height || s.extent(2) < mc.width)
      throw ad::ShapeError("training scene " + ad::to_string(s.shape()) + " cannot be cropped to [" +
                           std::to_string(mc.channels) + "," + std::to_string(mc.height) + "," +
                           std::to_string(mc.width) + "]");
  const auto& validation = data.validation.empty() ? data.train : data.validation;

  auto& params = net.parameters();
  TrainResult<T> result;
  result.best_weights = params.snapshot();
  auto last_good = result.best_weights;
  OptimizerState<T> opt;
  std::mt19937_64 rng(cfg.seed);
  optics::NoiseModel noise = cfg.noise;

  for (std::size_t epoch = 0; epoch < cfg.schedule.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = cfg.schedule.lr(epoch);
    double epoch_loss = 0;
    bool diverged = false;
    for (std::size_t it = 0; it < cfg.iterations_per_epoch && !diverged; ++it) {
      params.zero_grad();
      IterationRecord rec;
      for (std::size_t b = 0; b < cfg.batch_size; ++b) {
        const auto& scene = data.train[std::uniform_int_distribution<std::size_t>(0, data.train.size() - 1)(rng)];
        const std::size_t top =
            std::uniform_int_distribution<std::size_t>(0, scene.extent(1) - mc.height)(rng);
        const std::size_t left = std::uniform_int_distribution<std::size_t>(0, scene.extent(2) - mc.width)(rng);
        auto truth = crop(scene, top, left, mc.height, mc.width);
        Tensor<T> y;
        {
          ad::NoGradGuard guard;
          if (noise.kind != optics::NoiseModel::Kind::none) noise.seed = rng();
          y = optics::forward_project(truth, data.mask, mc.dispersion, noise);
        }
        auto x = net.reconstruct(y, data.mask);
        auto terms = reconstruction_loss(x, truth, y, data.mask, mc.dispersion, cfg.loss);
        const T inv = T(1) / static_cast<T>(cfg.batch_size);
        rec.total += static_cast<double>(terms.total.item()) / cfg.batch_size;
        rec.fidelity += static_cast<double>(terms.fidelity.item()) / cfg.batch_size;
        rec.reversible += static_cast<double>(terms.reversible.item()) / cfg.batch_size;
        ad::backward(cfg.batch_size == 1 ? terms.total : ad::scale(terms.total, inv));
      }
      if (!std::isfinite(rec.total)) {
        diverged = true;
        result.message = "non-finite loss at epoch " + std::to_string(epoch) + ", iteration " + std::to_string(it);
        break;
      }
      try {
        adam_step(params, opt, lr);
      } catch (const NonFiniteGradient& e) {
        diverged = true;
        result.message = e.what();
        break;
      }
      result.iterations.push_back(rec);
      epoch_loss += rec.total;
    }
    if (diverged) {
      params.restore(last_good);
      params.zero_grad();
      result.status = TrainStatus::diverged;
      return result;
    }
    auto ev = evaluate(net, validation, data.mask);
    EpochRecord r;
    r.epoch = epoch;
    r.loss = epoch_loss / static_cast<double>(cfg.iterations_per_epoch);
    r.psnr = ev.mean_psnr;
    r.ssim = ev.mean_ssim;
    r.lr = lr;
    if (cfg.record_wall_time)
      r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    last_good = params.snapshot();
    if (r.psnr > result.best_psnr) {
      result.best_psnr = r.psnr;
      result.best_epoch = epoch;
      result.best_weights = last_good;
    }
    result.epochs.push_back(r);
    if (on_epoch) on_epoch(r);
  }
  params.zero_grad();
  return result;
}

void write_metrics_header(std::ostream& os) { os << "epoch,loss,psnr,ssim,lr,wall_ms\n"; }

void write_metrics_row(std::ostream& os, const EpochRecord& r) {
  os << r.epoch << ',' << fmt(r.loss) << ',' << fmt(r.psnr) << ',' << fmt(r.ssim) << ',' << fmt(r.lr) << ','
     << fmt(r.wall_ms) << '\n';
}

template Evaluation evaluate(const model::ReversibleNet<float>&, const std::vector<Tensor<float>>&,
                             const Tensor<float>&, std::size_t);
template Evaluation evaluate(const model::ReversibleNet<double>&, const std::vector<Tensor<double>>&,
                             const Tensor<double>&, std::size_t);
template TrainResult<float> train(model::ReversibleNet<float>&, const Dataset<float>&, const TrainConfig&,
                                  const std::function<void(const EpochRecord&)>&);
template TrainResult<double> train(model::ReversibleNet<double>&, const Dataset<double>&, const TrainConfig&,
                                   const std::function<void(const EpochRecord&)>&);

}  // namespace sst::train
