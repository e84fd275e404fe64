#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <sstream>

#include "commands.hpp"
#include "sst/io/formats.hpp"

namespace {

using namespace sst::cli;

// Registers options and remembers how to print each resolved value, so
// every run can echo a complete key=value config.
class Options {
 public:
  explicit Options(CLI::App* app) : app_(app) {}

  template <class V>
  CLI::Option* add(const std::string& key, V& value, const std::string& help) {
    echo_.emplace_back(key, [&value] {
      std::ostringstream os;
      os << value;
      return os.str();
    });
    return app_->add_option("--" + key, value, help);
  }
  CLI::Option* flag(const std::string& key, bool& value, const std::string& help) {
    echo_.emplace_back(key, [&value] { return std::string(value ? "true" : "false"); });
    return app_->add_option("--" + key, value, help)->expected(0, 1)->default_str("true");
  }
  template <class V>
  CLI::Option* list(const std::string& key, std::vector<V>& value, const std::string& help) {
    echo_.emplace_back(key, [&value] {
      std::ostringstream os;
      for (std::size_t i = 0; i < value.size(); ++i) os << (i ? "," : "") << value[i];
      return os.str();
    });
    return app_->add_option("--" + key, value, help)->delimiter(',');
  }

  void echo(std::ostream& os) const {
    os << "# resolved config: " << app_->get_name() << "\n";
    for (const auto& [k, f] : echo_) os << k << "=" << f() << "\n";
  }
  CLI::App* app() const { return app_; }

 private:
  CLI::App* app_;
  std::vector<std::pair<std::string, std::function<std::string()>>> echo_;
};

// Config-file entries become leading arguments so explicit flags, parsed
// later, take precedence.
std::vector<std::string> expand_config(const std::vector<std::string>& args, CLI::App& root) {
  std::vector<std::string> out;
  std::string config;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (config.empty()) return rest;
  if (rest.empty()) throw UsageError("--config needs a subcommand");
  CLI::App* sub = nullptr;
  for (auto* s : root.get_subcommands({}))
    if (s->get_name() == rest.front()) sub = s;
  if (!sub) throw UsageError("unknown subcommand '" + rest.front() + "'");
  out.push_back(rest.front());
  for (const auto& [key, value] : read_config_file(config)) {
    if (key == "config" || !sub->get_option_no_throw("--" + key))
      throw UsageError(config + ": unknown key '" + key + "' for " + sub->get_name());
    out.push_back("--" + key + "=" + value);
  }
  out.insert(out.end(), rest.begin() + 1, rest.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Snapshot spectral imaging lab: simulate, train, reconstruct, evaluate, verify"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.add_option("--config", "flat key=value file; explicit flags override it");
  std::size_t threads = default_threads();
  app.add_option("--threads", threads, "worker threads (fallback: SST_THREADS, then all cores)");

  SimulateOptions sim;
  Options so(app.add_subcommand("simulate", "scene -> coded, dispersed sensor measurement"));
  so.add("scene", sim.scene, "input cube (.hsc)");
  so.add("synthetic", sim.synthetic, "generate a scene instead: gaussian-blobs | gradient-ramps | checker-spectra");
  so.add("height", sim.height, "synthetic scene height");
  so.add("width", sim.width, "synthetic scene width");
  so.add("channels", sim.channels, "synthetic scene channels");
  so.add("smoothness", sim.smoothness, "synthetic spectral smoothness");
  so.add("mask", sim.mask, "coded mask (.hsc); generated when absent");
  so.add("mask-density", sim.mask_density, "open fraction of a generated mask");
  so.add("d", sim.d, "dispersion step in columns per channel");
  so.add("noise-sigma", sim.noise_sigma, "Gaussian sensor noise");
  so.add("seed", sim.seed, "seed for scene, mask and noise");
  so.add("out", sim.out, "output directory");

  TrainOptions tr;
  Options to(app.add_subcommand("train", "train a reconstruction network"));
  to.add("preset", tr.preset, "toy | custom")->check(CLI::IsMember({"toy", "custom"}));
  to.add("stages", tr.stages, "reversible stages");
  to.add("epochs", tr.epochs, "epochs");
  to.add("iterations", tr.iterations, "iterations per epoch");
  to.add("batch", tr.batch, "scenes per iteration");
  to.add("period", tr.period, "epochs between learning-rate halvings");
  to.add("lr", tr.lr, "initial learning rate");
  to.add("xi", tr.xi, "weight of the measurement-space loss term");
  to.add("seed", tr.seed, "seed for data, initialization and sampling");
  to.add("out-dir", tr.out_dir, "output directory");
  to.add("height", tr.height, "custom: height");
  to.add("width", tr.width, "custom: width");
  to.add("channels", tr.channels, "custom: spectral channels");
  to.add("base-channels", tr.base_channels, "custom: feature width");
  to.add("window", tr.window, "custom: attention window");
  to.add("heads", tr.heads, "custom: heads at full resolution");
  to.add("levels", tr.levels, "custom: U-net levels");
  to.flag("inner-reversible", tr.inner_reversible, "single stage: re-project between the two U-nets");
  to.flag("unmix-only", tr.unmix_only, "drop the transformer backbone (baseline)");
  to.add("data-dir", tr.data_dir, "directory of .hsc training cubes (last ones held out)");
  to.add("scenes", tr.scenes, "synthetic training scenes");
  to.add("val-scenes", tr.val_scenes, "held-out scenes");
  to.add("mask-density", tr.mask_density, "open fraction of the training mask");
  to.flag("wall-time", tr.wall_time, "record wall_ms in metrics.csv");

  ReconstructOptions rc;
  Options ro(app.add_subcommand("reconstruct", "measurement -> spectral cube"));
  ro.add("weights", rc.weights, "checkpoint (.hscw with .meta)");
  ro.add("measurement", rc.measurement, "measurement (.hsc)");
  ro.add("mask", rc.mask, "coded mask (.hsc)");
  ro.add("truth", rc.truth, "ground truth for scoring (.hsc)");
  ro.add("out", rc.out, "output cube (.hsc); channel PNGs go alongside");
  ro.add("trace", rc.trace, "write per-stage residual energy CSV");
  ro.flag("previews", rc.previews, "write per-channel PNG previews");

  EvalOptions ev;
  Options eo(app.add_subcommand("eval", "score a checkpoint on scenes"));
  eo.add("weights", ev.weights, "checkpoint (.hscw with .meta)");
  eo.add("mask", ev.mask, "coded mask (.hsc)");
  eo.list("truth", ev.truth, "ground-truth scenes (.hsc), comma separated or repeated");
  eo.list("measurement", ev.measurement, "matching measurements; simulated when absent");
  eo.app()->get_option("--truth")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  eo.app()->get_option("--measurement")->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);

  GradcheckOptions gc;
  Options go(app.add_subcommand("gradcheck", "finite-difference check of every VJP"));
  go.add("seed", gc.seed, "seed for inputs and sampling");
  go.add("tol", gc.tol, "float64 relative tolerance");
  go.add("tol-f32", gc.tol_f32, "float32 relative tolerance");
  go.flag("float32", gc.float32, "also check float32");
  go.flag("blocks", gc.blocks, "include model blocks and the full loss");
  go.add("inject-fault", gc.inject_fault, "negate the VJP of this op (harness self-test)");

  OracleCheckOptions oc;
  Options oo(app.add_subcommand("oracle-check", "compare kernels against scalar loop references"));
  oo.add("seed", oc.seed, "seed for random instances");
  oo.add("tol", oc.tol, "multiplier on the documented tolerances");
  oo.add("instances", oc.instances, "random instances per check");

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    args = expand_config(args, app);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : ExitCode::usage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ExitCode::usage;
  }
  ev.threads = threads;

  try {
    auto* sub = app.get_subcommands().front();
    for (const Options* o : {&so, &to, &ro, &eo, &go, &oo})
      if (o->app() == sub) o->echo(std::cout);
    std::cout << "threads=" << threads << "\n";
    const std::string name = sub->get_name();
    if (name == "simulate") {
      simulate(sim, std::cout);
      return ExitCode::ok;
    }
    if (name == "train") {
      auto r = train(tr, std::cout);
      return r.diverged ? ExitCode::diverged : ExitCode::ok;
    }
    if (name == "reconstruct") return reconstruct(rc, std::cout);
    if (name == "eval") return eval(ev, std::cout);
    if (name == "gradcheck") return gradcheck(gc, std::cout);
    if (name == "oracle-check") return oracle_check(oc, std::cout);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ExitCode::usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ExitCode::failure;
  }
  return ExitCode::failure;
}
