#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "sst/autodiff/ops.hpp"
#include "sst/io/checkpoint.hpp"
#include "sst/io/formats.hpp"
#include "sst/io/raster.hpp"
#include "sst/io/synthetic.hpp"
#include "sst/model/reversible_net.hpp"
#include "sst/optics/cassi.hpp"
#include "sst/train/metrics.hpp"
#include "sst/train/trainer.hpp"
#include "sst/verify/suites.hpp"

namespace sst::cli {

using ad::Tensor;

namespace {

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string fixed(double v, int digits) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

Tensor<float> as_mask(const Tensor<float>& t) {
  if (t.rank() == 3 && t.extent(0) == 1) return ad::reshape(t, {t.extent(1), t.extent(2)}).detach();
  if (t.rank() == 2) return t;
  throw ad::ShapeError("mask must be a single-channel image, got " + ad::to_string(t.shape()));
}

void ensure_dir(const fs::path& dir) {
  if (dir.empty()) throw UsageError("an output directory is required");
  fs::create_directories(dir);
}

std::uint64_t scene_seed(std::uint64_t seed, std::size_t i) { return seed * 7919u + i + 1; }

io::SceneKind cycle_kind(std::size_t i) {
  static const io::SceneKind kinds[] = {io::SceneKind::gaussian_blobs, io::SceneKind::gradient_ramps,
                                        io::SceneKind::checker_spectra};
  return kinds[i % 3];
}

model::ReversibleNet<float> load_model(const std::string& weights) {
  if (weights.empty()) throw UsageError("--weights is required");
  const auto cfg = io::read_checkpoint_config(weights);
  model::ReversibleNet<float> net(cfg, 0);
  io::assign_named(net.parameters(), io::read_hscw(weights));
  return net;
}

Reconstructor from_net(const model::ReversibleNet<float>& net) {
  return [&net](const Tensor<float>& y, const Tensor<float>& mask) {
    ad::NoGradGuard guard;
    return net.reconstruct(y, mask);
  };
}

}  // namespace

std::size_t default_threads() {
  if (const char* env = std::getenv("SST_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end && *end == '\0' && v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<std::pair<std::string, std::string>> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t n = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
  };
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(path.string() + ":" + std::to_string(n) + ": expected key=value, got '" + line + "'");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

// ---------------------------------------------------------------------------

SimulateResult simulate(const SimulateOptions& opt, std::ostream& log) {
  if (opt.scene.empty() && opt.synthetic.empty()) throw UsageError("simulate needs --scene or --synthetic");
  if (!opt.scene.empty() && !opt.synthetic.empty()) throw UsageError("--scene and --synthetic are exclusive");
  ensure_dir(opt.out);
  const fs::path out(opt.out);

  Tensor<float> scene;
  if (!opt.scene.empty()) {
    scene = io::read_hsc(opt.scene);
  } else {
    io::SceneSpec spec;
    spec.kind = io::parse_scene_kind(opt.synthetic);
    spec.height = opt.height;
    spec.width = opt.width;
    spec.channels = opt.channels;
    spec.smoothness = opt.smoothness;
    spec.seed = opt.seed;
    scene = io::generate_scene(spec);
  }
  const std::size_t c = scene.extent(0), h = scene.extent(1), w = scene.extent(2);
  Tensor<float> mask = opt.mask.empty() ? io::generate_mask(h, w, opt.mask_density, opt.seed) : as_mask(io::read_hsc(opt.mask));
  if (mask.shape() != ad::Shape{h, w})
    throw ad::ShapeError("mask " + ad::to_string(mask.shape()) + " does not match scene " + ad::to_string(scene.shape()));
  optics::validate_mask(mask);

  optics::DispersionConfig disp{opt.d, 0};
  optics::NoiseModel noise;
  if (opt.noise_sigma > 0) noise = optics::NoiseModel::gaussian(opt.noise_sigma, opt.seed);
  Tensor<float> y;
  {
    ad::NoGradGuard guard;
    y = optics::forward_project(scene, mask, disp, noise);
  }

  SimulateResult r{out / "measurement.hsc", out / "mask.hsc", out / "scene.hsc", h, y.extent(1)};
  io::write_hsc(scene, r.scene);
  io::write_hsc(mask, r.mask);
  io::write_hsc(y, r.measurement);
  io::write_meta(io::meta_path(r.scene), {{"peak", num(train::peak_value(scene))}, {"seed", std::to_string(opt.seed)}});
  io::write_meta(io::meta_path(r.measurement), {{"channels", std::to_string(c)},
                                                {"d", std::to_string(opt.d)},
                                                {"noise_sigma", num(opt.noise_sigma)},
                                                {"seed", std::to_string(opt.seed)},
                                                {"height", std::to_string(h)},
                                                {"width", std::to_string(w)},
                                                {"peak", num(train::peak_value(scene))}});
  log << "measurement " << h << "x" << y.extent(1) << " (scene " << c << "x" << h << "x" << w << ", d=" << opt.d
      << ")\n";
  return r;
}

// ---------------------------------------------------------------------------

model::SstConfig train_model_config(const TrainOptions& opt) {
  model::SstConfig cfg = model::toy_config();
  if (opt.preset == "custom") {
    cfg.height = opt.height;
    cfg.width = opt.width;
    cfg.channels = opt.channels;
    cfg.base_channels = opt.base_channels;
    cfg.window = opt.window;
    cfg.heads = opt.heads;
    cfg.levels = opt.levels;
  } else if (opt.preset != "toy") {
    throw UsageError("unknown preset '" + opt.preset + "' (expected toy or custom)");
  }
  cfg.stages = opt.stages;
  cfg.inner_reversible = opt.inner_reversible;
  cfg.use_backbone = !opt.unmix_only;
  cfg.validate();
  return cfg;
}

TrainOutcome train(const TrainOptions& opt, std::ostream& log) {
  const auto cfg = train_model_config(opt);
  ensure_dir(opt.out_dir);
  const fs::path out(opt.out_dir);

  train::Dataset<float> data;
  data.mask = io::generate_mask(cfg.height, cfg.width, opt.mask_density, opt.seed + 0x5eed);
  if (!opt.data_dir.empty()) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(opt.data_dir))
      if (e.path().extension() == ".hsc") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.size() < 2) throw UsageError("--data-dir needs at least two .hsc cubes (train + held out)");
    const std::size_t held = std::min(opt.val_scenes, files.size() - 1);
    for (std::size_t i = 0; i < files.size(); ++i) {
      auto cube = io::read_hsc(files[i]);
      if (i + held >= files.size())
        data.validation.push_back(ad::slice(ad::slice(cube, 1, 0, cfg.height), 2, 0, cfg.width).detach());
      else
        data.train.push_back(cube);
    }
  } else {
    for (std::size_t i = 0; i < opt.scenes + opt.val_scenes; ++i) {
      io::SceneSpec spec{cycle_kind(i), cfg.height, cfg.width, cfg.channels, 1.0, scene_seed(opt.seed, i)};
      (i < opt.scenes ? data.train : data.validation).push_back(io::generate_scene(spec));
    }
  }

  train::TrainConfig tc;
  tc.schedule = {opt.lr, opt.period, opt.epochs};
  tc.iterations_per_epoch = opt.iterations;
  tc.batch_size = opt.batch;
  tc.loss.xi = opt.xi;
  tc.seed = opt.seed + 1;
  tc.record_wall_time = opt.wall_time;

  model::ReversibleNet<float> net(cfg, opt.seed);
  if (!opt.quiet)
    log << "model: " << net.parameters().count() << " parameters, " << cfg.stages << " stage(s), "
        << cfg.height << "x" << cfg.width << "x" << cfg.channels << "\n";

  TrainOutcome outcome;
  outcome.metrics = out / "metrics.csv";
  outcome.weights = out / "weights.hscw";
  std::ofstream csv(outcome.metrics, std::ios::trunc);
  if (!csv) throw io::FormatError(io::FormatError::Kind::io, "cannot write " + outcome.metrics.string());
  train::write_metrics_header(csv);
  std::vector<double> losses;
  auto result = train::train<float>(net, data, tc, [&](const train::EpochRecord& r) {
    train::write_metrics_row(csv, r);
    csv.flush();
    losses.push_back(r.loss);
    if (!opt.quiet)
      log << "epoch " << r.epoch << " loss " << fixed(r.loss, 6) << " psnr " << fixed(r.psnr, 2) << " ssim "
          << fixed(r.ssim, 4) << " lr " << r.lr << "\n";
  });
  csv.close();

  io::write_hsc(data.mask, out / "mask.hsc");
  io::save_checkpoint(outcome.weights, cfg, net.parameters(), &result.best_weights);
  io::save_checkpoint(out / "last.hscw", cfg, net.parameters());
  io::write_curve_png(out / "loss_curve.png", losses);

  outcome.epochs_logged = result.epochs.size();
  outcome.iterations = std::move(result.iterations);
  outcome.best_psnr = result.best_psnr;
  outcome.diverged = result.status == train::TrainStatus::diverged;
  outcome.message = result.message;
  if (outcome.diverged)
    log << "training diverged: " << result.message << "\nweights restored to the last good epoch\n";
  else if (!opt.quiet)
    log << "best validation PSNR " << fixed(result.best_psnr, 2) << " dB at epoch " << result.best_epoch << "\n";
  return outcome;
}

// ---------------------------------------------------------------------------

std::optional<Scores> reconstruct_to_file(const Reconstructor& rec, const Tensor<float>& y, const Tensor<float>& mask,
                                          const std::optional<Tensor<float>>& truth, const fs::path& out,
                                          bool previews) {
  auto x = rec(y, mask);
  io::write_hsc(x, out);
  if (previews) {
    const auto dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
    const auto ranges = io::write_channel_previews(x, dir, out.stem().string());
    std::map<std::string, std::string> meta;
    for (std::size_t m = 0; m < ranges.size(); ++m) {
      meta["ch" + std::to_string(m) + "_min"] = num(ranges[m].first);
      meta["ch" + std::to_string(m) + "_max"] = num(ranges[m].second);
    }
    meta["png_scaling"] = "per-channel min-max";
    io::write_meta(io::meta_path(out), meta);
  }
  if (!truth) return std::nullopt;
  if (truth->shape() != x.shape())
    throw ad::ShapeError("truth " + ad::to_string(truth->shape()) + " vs reconstruction " + ad::to_string(x.shape()));
  return Scores{train::psnr(x, *truth, train::peak_value(*truth)), train::ssim(x, *truth)};
}

int reconstruct(const ReconstructOptions& opt, std::ostream& log) {
  if (opt.measurement.empty() || opt.mask.empty() || opt.out.empty())
    throw UsageError("reconstruct needs --weights, --measurement, --mask and --out");
  auto net = load_model(opt.weights);
  const auto& cfg = net.config();
  auto y = io::read_hsc(opt.measurement);
  if (y.extent(0) != 1) throw ad::ShapeError("measurement must be single channel, got " + ad::to_string(y.shape()));
  y = ad::reshape(y, {y.extent(1), y.extent(2)}).detach();
  auto mask = as_mask(io::read_hsc(opt.mask));
  std::optional<Tensor<float>> truth;
  if (!opt.truth.empty()) truth = io::read_hsc(opt.truth);

  auto scores = reconstruct_to_file(from_net(net), y, mask, truth, opt.out, opt.previews);
  log << "wrote " << opt.out << " [" << cfg.channels << "," << cfg.height << "," << cfg.width << "]\n";
  if (scores) log << "PSNR " << fixed(scores->psnr, 2) << " dB  SSIM " << fixed(scores->ssim, 4) << "\n";

  if (!opt.trace.empty()) {
    model::StageTrace<float> trace;
    {
      ad::NoGradGuard guard;
      net.reconstruct(y, mask, &trace);
    }
    std::ostringstream csv;
    csv << "stage,residual_energy\n";
    for (std::size_t n = 0; n < trace.residual_energy.size(); ++n)
      csv << n + 1 << ',' << num(trace.residual_energy[n]) << '\n';
    io::write_file_atomic(opt.trace, csv.str());
  }
  return ExitCode::ok;
}

int eval(const EvalOptions& opt, std::ostream& log) {
  if (opt.truth.empty()) throw UsageError("eval needs at least one --truth scene");
  if (!opt.measurement.empty() && opt.measurement.size() != opt.truth.size())
    throw UsageError("--measurement count must match --truth count");
  if (opt.mask.empty()) throw UsageError("--mask is required");
  auto net = load_model(opt.weights);
  const auto& cfg = net.config();
  auto mask = as_mask(io::read_hsc(opt.mask));

  std::vector<Tensor<float>> truths;
  for (const auto& t : opt.truth) truths.push_back(io::read_hsc(t));
  std::vector<double> psnr(truths.size()), ssim(truths.size());
  std::vector<std::string> errors(truths.size());
  auto score = [&](std::size_t i) {
    try {
      ad::NoGradGuard guard;
      Tensor<float> y;
      if (opt.measurement.empty()) {
        y = optics::forward_project(truths[i], mask, cfg.dispersion);
      } else {
        auto m = io::read_hsc(opt.measurement[i]);
        y = ad::reshape(m, {m.extent(1), m.extent(2)}).detach();
      }
      auto x = net.reconstruct(y, mask);
      psnr[i] = train::psnr(x, truths[i], train::peak_value(truths[i]));
      ssim[i] = train::ssim(x, truths[i]);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(opt.threads, truths.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < truths.size(); i += threads) score(i);
    });
  for (auto& th : pool) th.join();
  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty()) throw std::runtime_error(opt.truth[i] + ": " + errors[i]);

  log << std::left << std::setw(24) << "scene" << std::right << std::setw(10) << "PSNR" << std::setw(10) << "SSIM"
      << "\n";
  double mp = 0, ms = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    log << std::left << std::setw(24) << fs::path(opt.truth[i]).stem().string() << std::right << std::setw(10)
        << fixed(psnr[i], 2) << std::setw(10) << fixed(ssim[i], 4) << "\n";
    mp += psnr[i];
    ms += ssim[i];
  }
  mp /= static_cast<double>(truths.size());
  ms /= static_cast<double>(truths.size());
  log << std::left << std::setw(24) << "mean" << std::right << std::setw(10) << fixed(mp, 2) << std::setw(10)
      << fixed(ms, 4) << "\n";
  return ExitCode::ok;
}

// ---------------------------------------------------------------------------

int gradcheck(const GradcheckOptions& opt, std::ostream& log) {
  verify::GradSuiteOptions so;
  so.seed = opt.seed;
  so.tol_double = opt.tol;
  so.tol_float = opt.tol_f32;
  so.float32 = opt.float32;
  so.blocks = opt.blocks;
  std::vector<verify::CheckResult> results;
  if (!opt.inject_fault.empty()) {
    ad::testing::ScopedVjpSignFlip flip(opt.inject_fault);
    log << "fault injected: negated VJP of '" << opt.inject_fault << "'\n";
    results = verify::gradcheck_suite(so);
  } else {
    results = verify::gradcheck_suite(so);
  }
  const bool passed = verify::report(log, results);
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  log << (passed ? "gradcheck passed" : "gradcheck FAILED") << " (" << results.size() - failed << "/"
      << results.size() << ")\n";
  std::vector<std::string> ops;
  for (const auto& r : results)
    if (!r.passed && !r.op.empty() && std::find(ops.begin(), ops.end(), r.op) == ops.end()) ops.push_back(r.op);
  for (const auto& r : results)
    if (!r.passed) log << "failing: " << r.name << "\n";
  if (!ops.empty()) {
    log << "failing primitive ops:";
    for (const auto& op : ops) log << ' ' << op;
    log << "\n";
  }
  return passed ? ExitCode::ok : ExitCode::verification_failed;
}

int oracle_check(const OracleCheckOptions& opt, std::ostream& log) {
  auto results = verify::oracle_suite({opt.seed, opt.instances, opt.tol});
  const bool passed = verify::report(log, results);
  log << (passed ? "oracle-check passed" : "oracle-check FAILED") << "\n";
  for (const auto& r : results)
    if (!r.passed) log << "failing: " << r.name << "\n";
  return passed ? ExitCode::ok : ExitCode::verification_failed;
}

}  // namespace sst::cli
