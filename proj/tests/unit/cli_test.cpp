#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "commands.hpp"
#include "sst/autodiff/ops.hpp"
#include "sst/io/checkpoint.hpp"
#include "sst/io/formats.hpp"
#include "sst/model/reversible_net.hpp"
#include "sst/optics/cassi.hpp"

using namespace sst::cli;
using sst::ad::Tensor;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("sst_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::size_t count_lines(const fs::path& p) {
  const auto s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

Tensor<float> measurement_image(const fs::path& p) {
  auto m = sst::io::read_hsc(p);
  return sst::ad::reshape(m, {m.extent(1), m.extent(2)}).detach();
}

// Tiny custom model so training-based tests stay fast.
TrainOptions tiny_train(const fs::path& dir) {
  TrainOptions t;
  t.preset = "custom";
  t.height = t.width = 16;
  t.channels = 4;
  t.base_channels = 4;
  t.window = 4;
  t.levels = 1;
  t.scenes = 2;
  t.val_scenes = 1;
  t.iterations = 2;
  t.epochs = 2;
  t.wall_time = false;
  t.quiet = true;
  t.out_dir = dir.string();
  return t;
}

struct Run {
  int code;
  std::string output;
};

Run run_tool(const std::string& args) {
  const std::string cmd = std::string(SST_TOOL_PATH) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  std::string out;
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe)) out += buf;
  const int status = ::pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

}  // namespace

TEST(Simulate, WidthFormulaAndDeterminism) {
  const auto a = scratch("sim_a"), b = scratch("sim_b");
  SimulateOptions opt;
  opt.synthetic = "gaussian-blobs";
  opt.seed = 4;
  std::ostringstream log;
  opt.out = a.string();
  auto r = simulate(opt, log);
  EXPECT_EQ(r.height, 32u);
  EXPECT_EQ(r.measurement_width, 39u);
  EXPECT_NE(log.str().find("32x39"), std::string::npos) << log.str();
  opt.out = b.string();
  simulate(opt, log);
  for (const char* f : {"measurement.hsc", "mask.hsc", "scene.hsc", "measurement.meta"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Simulate, MatchesLibraryForwardProjectBitwise) {
  const auto dir = scratch("sim_lib");
  SimulateOptions opt;
  opt.synthetic = "checker-spectra";
  opt.d = 2;
  opt.out = dir.string();
  std::ostringstream log;
  auto r = simulate(opt, log);
  auto scene = sst::io::read_hsc(r.scene);
  auto mask = sst::io::read_hsc(r.mask);
  mask = sst::ad::reshape(mask, {mask.extent(1), mask.extent(2)}).detach();
  auto y = sst::optics::forward_project(scene, mask, {2, 0});
  EXPECT_EQ(measurement_image(r.measurement).values(), y.values());
}

TEST(Simulate, MissingSceneIsUsageError) {
  SimulateOptions opt;
  opt.out = scratch("sim_bad").string();
  std::ostringstream log;
  EXPECT_THROW(simulate(opt, log), UsageError);
}

TEST(Train, ZeroEpochsCheckpointEqualsInitialization) {
  const auto dir = scratch("train0");
  auto opt = tiny_train(dir);
  opt.epochs = 0;
  std::ostringstream log;
  auto outcome = train(opt, log);
  EXPECT_EQ(outcome.epochs_logged, 0u);
  EXPECT_EQ(count_lines(outcome.metrics), 1u);
  const auto cfg = train_model_config(opt);
  sst::model::ReversibleNet<float> init(cfg, opt.seed);
  const auto saved = sst::io::read_hscw(outcome.weights);
  const auto expected = sst::io::to_named(init.parameters());
  ASSERT_EQ(saved.size(), expected.size());
  for (std::size_t i = 0; i < saved.size(); ++i) EXPECT_EQ(saved[i].values, expected[i].values) << saved[i].name;
}

TEST(Train, CsvRowsEqualEpochsAndRunsAreReproducible) {
  const auto a = scratch("train_a"), b = scratch("train_b");
  auto opt = tiny_train(a);
  opt.epochs = 3;
  std::ostringstream log;
  auto outcome = train(opt, log);
  EXPECT_EQ(count_lines(outcome.metrics), 4u);
  EXPECT_TRUE(fs::exists(a / "loss_curve.png"));
  EXPECT_TRUE(fs::exists(a / "last.hscw"));
  opt.out_dir = b.string();
  train(opt, log);
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
  EXPECT_EQ(slurp(a / "weights.hscw"), slurp(b / "weights.hscw"));
}

TEST(Train, UnknownPresetIsUsageError) {
  TrainOptions opt;
  opt.preset = "huge";
  EXPECT_THROW(train_model_config(opt), UsageError);
}

TEST(Reconstruct, PerfectOracleGivesInfinitePsnr) {
  const auto dir = scratch("oracle");
  SimulateOptions sim;
  sim.synthetic = "gradient-ramps";
  sim.out = dir.string();
  std::ostringstream log;
  auto r = simulate(sim, log);
  auto truth = sst::io::read_hsc(r.scene);
  Reconstructor oracle = [&](const Tensor<float>&, const Tensor<float>&) { return truth; };
  auto scores = reconstruct_to_file(oracle, measurement_image(r.measurement), Tensor<float>({32, 32}, 1.0f), truth,
                                    dir / "out.hsc");
  ASSERT_TRUE(scores.has_value());
  EXPECT_EQ(scores->psnr, std::numeric_limits<double>::infinity());
  EXPECT_EQ(scores->ssim, 1.0);
  EXPECT_TRUE(fs::exists(dir / "out_ch0.png"));
  const auto meta = sst::io::read_meta(dir / "out.meta");
  EXPECT_EQ(meta.count("ch7_max"), 1u);
}

TEST(Reconstruct, TraceHasOneRowPerStage) {
  const auto dir = scratch("trace");
  auto opt = tiny_train(dir / "model");
  opt.stages = 3;
  opt.epochs = 1;
  std::ostringstream log;
  auto outcome = train(opt, log);

  SimulateOptions sim;
  sim.synthetic = "gaussian-blobs";
  sim.height = sim.width = 16;
  sim.channels = 4;
  sim.out = (dir / "sim").string();
  auto r = simulate(sim, log);

  ReconstructOptions rec;
  rec.weights = outcome.weights.string();
  rec.measurement = r.measurement.string();
  rec.mask = r.mask.string();
  rec.truth = r.scene.string();
  rec.out = (dir / "x.hsc").string();
  rec.trace = (dir / "trace.csv").string();
  EXPECT_EQ(reconstruct(rec, log), ExitCode::ok);
  EXPECT_EQ(count_lines(dir / "trace.csv"), 4u);
  EXPECT_EQ(sst::io::read_hsc(dir / "x.hsc").shape(), (sst::ad::Shape{4, 16, 16}));
  EXPECT_NE(log.str().find("PSNR"), std::string::npos);
}

TEST(Eval, MeanIsArithmeticMeanOfScenes) {
  const auto dir = scratch("eval");
  auto opt = tiny_train(dir / "model");
  opt.epochs = 1;
  std::ostringstream log;
  auto outcome = train(opt, log);
  EvalOptions ev;
  ev.weights = outcome.weights.string();
  ev.mask = (dir / "model" / "mask.hsc").string();
  for (int i = 0; i < 3; ++i) {
    SimulateOptions sim;
    sim.synthetic = "gaussian-blobs";
    sim.height = sim.width = 16;
    sim.channels = 4;
    sim.seed = i;
    sim.out = (dir / ("s" + std::to_string(i))).string();
    auto r = simulate(sim, log);
    const auto named = dir / ("scene" + std::to_string(i) + ".hsc");
    fs::copy_file(r.scene, named);
    ev.truth.push_back(named.string());
  }
  ev.threads = 2;
  std::ostringstream table;
  EXPECT_EQ(eval(ev, table), ExitCode::ok);
  std::istringstream lines(table.str());
  std::string line, name;
  double p, s, sum_p = 0, sum_s = 0, mean_p = 0, mean_s = 0;
  std::getline(lines, line);  // header
  while (lines >> name >> p >> s) {
    if (name == "mean") {
      mean_p = p;
      mean_s = s;
    } else {
      sum_p += p;
      sum_s += s;
    }
  }
  // The table rounds to 2 and 4 decimals.
  EXPECT_NEAR(mean_p, sum_p / 3, 0.01);
  EXPECT_NEAR(mean_s, sum_s / 3, 0.0001);
}

TEST(Gradcheck, DefaultRunPassesAndFaultIsNamed) {
  GradcheckOptions opt;
  opt.blocks = false;
  std::ostringstream log;
  EXPECT_EQ(gradcheck(opt, log), ExitCode::ok);

  opt.inject_fault = "conv2d";
  std::ostringstream bad;
  EXPECT_EQ(gradcheck(opt, bad), ExitCode::verification_failed);
  EXPECT_NE(bad.str().find("failing primitive ops: conv2d\n"), std::string::npos) << bad.str();
}

TEST(Gradcheck, VerdictsStableAcrossSeeds) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    GradcheckOptions g;
    g.seed = seed;
    g.blocks = false;
    std::ostringstream log;
    EXPECT_EQ(gradcheck(g, log), ExitCode::ok) << "seed " << seed << "\n" << log.str();
    OracleCheckOptions o;
    o.seed = seed;
    EXPECT_EQ(oracle_check(o, log), ExitCode::ok) << "seed " << seed << "\n" << log.str();
  }
}

TEST(ConfigFile, ParsesPairsAndComments) {
  const auto dir = scratch("cfg");
  std::ofstream(dir / "run.cfg") << "# comment\nepochs = 3\nlr=1e-3\n\n";
  auto pairs = read_config_file(dir / "run.cfg");
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0], (std::pair<std::string, std::string>{"epochs", "3"}));
  EXPECT_EQ(pairs[1], (std::pair<std::string, std::string>{"lr", "1e-3"}));
}

TEST(Binary, EchoesResolvedConfigAndFlagsOverrideFile) {
  const auto dir = scratch("bin");
  std::ofstream(dir / "sim.cfg") << "seed=7\nd=3\n";
  auto r = run_tool("simulate --config " + (dir / "sim.cfg").string() + " --synthetic checker-spectra --d 2 --out " +
                    (dir / "o").string());
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("seed=7"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("d=2"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("32x46"), std::string::npos) << r.output;
}

TEST(Binary, UsageErrorsExitWithTwo) {
  const auto dir = scratch("bin_bad");
  EXPECT_EQ(run_tool("simulate --bogus 1").code, ExitCode::usage);
  std::ofstream(dir / "bad.cfg") << "colour=blue\n";
  EXPECT_EQ(run_tool("simulate --config " + (dir / "bad.cfg").string() + " --out x").code, ExitCode::usage);
  EXPECT_EQ(run_tool("simulate --out " + (dir / "o").string()).code, ExitCode::usage);
}

TEST(Binary, InjectedFaultExitsWithVerificationFailure) {
  auto r = run_tool("gradcheck --blocks=false --inject-fault softmax");
  EXPECT_EQ(r.code, ExitCode::verification_failed) << r.output;
  EXPECT_NE(r.output.find("failing primitive ops: softmax"), std::string::npos) << r.output;
}
