#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "renormflow/experiment.hpp"

using namespace renormflow;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("renormflow-cli-" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write_config(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  int run(const std::string& cmd, const std::string& cfg, const std::string& out, int workers = 1,
          std::optional<std::uint64_t> seed = std::nullopt) {
    cli::RunOptions opt;
    opt.config_path = cfg;
    opt.out_dir = (dir_ / out).string();
    opt.workers = workers;
    opt.seed = seed;
    std::ostringstream log, err;
    const int code = cli::run(cmd, opt, log, err);
    last_err_ = err.str();
    return code;
  }

  std::string slurp(const std::string& out, const std::string& file) const {
    std::ifstream is(dir_ / out / file, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }

  fs::path dir_;
  std::string last_err_;
};

const char* kFcEval =
    "[experiment]\nseed = 5\n[diffusion]\nkind = fixed_point\nb1 = 1\nb2 = 1\nc1 = 1\nc2 = 1\n"
    "[mc]\nn_samples = 300\ndt = 2e-3\n[fc-eval]\nc = 1\nprobes = 1 1; 2 1; 0 3\n";

}  // namespace

TEST_F(CliTest, FcEvalWritesCsvAndMetadata) {
  const auto cfg = write_config("a.ini", kFcEval);
  ASSERT_EQ(run("fc-eval", cfg, "out"), cli::kPass) << last_err_;
  const std::string csv = slurp("out", "fc-eval.csv");
  EXPECT_EQ(csv.rfind("theta1,theta2,fc1,fc2,se1,se2\r\n", 0), 0u);
  std::istringstream lines(csv);
  int n = 0;
  for (std::string l; std::getline(lines, l);) ++n;
  EXPECT_EQ(n, 4);
  const auto meta = nlohmann::json::parse(slurp("out", "fc-eval.meta.jsonl"));
  EXPECT_EQ(meta["command"], "fc-eval");
  EXPECT_EQ(meta["seed"], 5);
  EXPECT_EQ(meta["exit_code"], 0);
  EXPECT_EQ(meta["timestamp"], "2023-11-14T22:13:20Z");
  EXPECT_EQ(meta["config"]["fc-eval"]["c"], "1");
  EXPECT_EQ(meta["outputs"][0], "fc-eval.csv");
  EXPECT_EQ(meta["experiment_id"].get<std::string>().size(), 16u);
}

TEST_F(CliTest, ByteIdenticalAcrossWorkers) {
  const auto cfg = write_config("a.ini", kFcEval);
  ASSERT_EQ(run("fc-eval", cfg, "w1", 1), 0);
  ASSERT_EQ(run("fc-eval", cfg, "w4", 4), 0);
  EXPECT_EQ(slurp("w1", "fc-eval.csv"), slurp("w4", "fc-eval.csv"));
  EXPECT_EQ(slurp("w1", "fc-eval.meta.jsonl"), slurp("w4", "fc-eval.meta.jsonl"));
}

TEST_F(CliTest, SeedOverrideChangesOutputAndIsRecorded) {
  const auto cfg = write_config("a.ini", kFcEval);
  ASSERT_EQ(run("fc-eval", cfg, "a"), 0);
  ASSERT_EQ(run("fc-eval", cfg, "b", 1, 99), 0);
  EXPECT_NE(slurp("a", "fc-eval.csv"), slurp("b", "fc-eval.csv"));
  const auto meta = nlohmann::json::parse(slurp("b", "fc-eval.meta.jsonl"));
  EXPECT_EQ(meta["seed"], 99);
  EXPECT_EQ(meta["config"]["experiment"]["seed"], "99");
}

TEST_F(CliTest, EmptyProbesIsConfigError) {
  const auto cfg = write_config("e.ini",
                                "[diffusion]\nkind = fixed_point\nb1 = 1\nb2 = 1\n[fc-eval]\nc = 1\nprobes =\n");
  EXPECT_EQ(run("fc-eval", cfg, "out"), cli::kConfigError);
  EXPECT_NE(last_err_.find("empty probe list"), std::string::npos);
}

TEST_F(CliTest, UnknownKeyAndMissingFileAreConfigErrors) {
  const auto cfg = write_config("u.ini", "[diffusion]\nkind = fixed_point\nb1 = 1\nb2 = 1\n[fc-eval]\nc = 1\n"
                                         "probes = 1 1\nprobe = 2 2\n");
  EXPECT_EQ(run("fc-eval", cfg, "out"), cli::kConfigError);
  EXPECT_EQ(run("fc-eval", (dir_ / "missing.ini").string(), "out"), cli::kConfigError);
  EXPECT_EQ(run("no-such-command", cfg, "out"), cli::kConfigError);
}

TEST_F(CliTest, DegeneratePairIsConfigError) {
  const auto cfg = write_config("d.ini", "[diffusion]\nkind = fixed_point\nb1 = 1\n[fc-eval]\nc = 1\nprobes = 1 1\n");
  EXPECT_EQ(run("fc-eval", cfg, "out"), cli::kConfigError);
}

TEST_F(CliTest, DivergentOperatorIsDomainError) {
  const auto cfg = write_config("g.ini", "[diffusion]\nkind = polynomial\nalpha1 = 1\nbeta1 = 1\nbeta2 = 1\n"
                                         "[fc-eval]\nc = 1\nprobes = 1 1\n");
  EXPECT_EQ(run("fc-eval", cfg, "out"), cli::kDomainError);
  const auto meta = nlohmann::json::parse(slurp("out", "fc-eval.meta.jsonl"));
  EXPECT_EQ(meta["exit_code"], 3);
  EXPECT_NE(meta["error"].get<std::string>().find("diverges"), std::string::npos);
}

TEST_F(CliTest, FixedShapeFailsFixedPointTest) {
  const auto cfg = write_config("s.ini", "[experiment]\nseed = 3\n[diffusion]\nkind = polynomial\n"
                                         "alpha1 = 0.5\nbeta1 = 1\nbeta2 = 1\n[mc]\nn_samples = 2000\n"
                                         "[fixed-point-test]\nc = 1\nprobes = 1 1\n");
  EXPECT_EQ(run("fixed-point-test", cfg, "out"), cli::kToleranceFail);
  const auto meta = nlohmann::json::parse(slurp("out", "fixed-point-test.meta.jsonl"));
  EXPECT_EQ(meta["pass"], false);
  EXPECT_GT(meta["results"]["residual"].get<double>(), 0.1);  // exact value 0.375
}

TEST_F(CliTest, MomentsSmallRun) {
  const auto cfg = write_config("m.ini", "[experiment]\nseed = 4\n[diffusion]\nkind = fixed_point\nb1 = 1\nb2 = 1\n"
                                         "[mc]\nn_samples = 5000\n[moments]\nc = 1\ntheta = 1 2\nz_max = 4\n");
  EXPECT_EQ(run("moments", cfg, "out"), cli::kPass) << last_err_;
  const std::string csv = slurp("out", "moments.csv");
  EXPECT_NE(csv.find("second_x2"), std::string::npos);
}

TEST_F(CliTest, MomentsAtOriginAreExact) {
  const auto cfg = write_config("o.ini", "[diffusion]\nkind = fixed_point\nb1 = 1\nb2 = 1\n[mc]\nn_samples = 100\n"
                                         "[moments]\nc = 1\ntheta = 0 0\n");
  EXPECT_EQ(run("moments", cfg, "out"), cli::kPass) << last_err_;
  const auto meta = nlohmann::json::parse(slurp("out", "moments.meta.jsonl"));
  EXPECT_EQ(meta["results"]["max_abs_z"], 0.0);
  std::istringstream lines(slurp("out", "moments.csv"));
  std::string l;
  std::getline(lines, l);
  while (std::getline(lines, l)) EXPECT_NE(l.find(",0,0,0,0,0,"), std::string::npos) << l;
}

TEST_F(CliTest, LatticeSmallRunWritesSeries) {
  const auto cfg = write_config(
      "l.ini", "[experiment]\nseed = 2\n[diffusion]\nkind = fixed_point\nb1 = 1\nb2 = 1\nc1 = 1\nc2 = 1\n"
               "[mc]\nn_samples = 1000\n[lattice-sim]\nN = 2\nK = 2\ncoeffs = 1 1\ntheta = 1 1\nT = 0.05\n"
               "replicas = 3\nvar_tol = 10\nz_max = 100\nrecord_every = 25\n");
  EXPECT_EQ(run("lattice-sim", cfg, "out"), cli::kPass) << last_err_;
  const std::string traj = slurp("out", "lattice-trajectory.csv");
  std::istringstream lines(traj);
  int n = 0;
  for (std::string l; std::getline(lines, l);) ++n;
  EXPECT_EQ(n, 1 + 3 * 4);  // header, t = 0, 25 dt, 50 dt, 4 sites each
  EXPECT_NE(slurp("out", "lattice-blocks.csv").find("t,level,block,y1,y2"), std::string::npos);
  EXPECT_NE(slurp("out", "lattice-sim.csv").find("drift_conservation"), std::string::npos);
}

TEST_F(CliTest, ChainTrapSmallRun) {
  const auto cfg = write_config(
      "c.ini", "[experiment]\nseed = 2\n[diffusion]\nkind = fixed_point\nc1 = 1\nc2 = 1\n[mc]\ndt = 5e-3\n"
               "[chain-trap]\nc = 1\nx0 = 1 1\ndepth = 2\nn_chains = 10\ntolerance = 1\nmax_unresolved = 1\n");
  EXPECT_EQ(run("chain-trap", cfg, "out"), cli::kPass) << last_err_;
  const auto meta = nlohmann::json::parse(slurp("out", "chain-trap.meta.jsonl"));
  EXPECT_NEAR(meta["results"]["checks"]["inf_inf"]["expected"].get<double>(), 0.25, 1e-15);
  const auto bad = write_config(
      "b.ini", "[diffusion]\nkind = fixed_point\nc1 = 1\nc2 = 1\n[chain-trap]\nc = 1\nx0 = 1 1\nsampler = magic\n");
  EXPECT_EQ(run("chain-trap", bad, "out2"), cli::kConfigError);
}

TEST_F(CliTest, ConvergenceNeedsPerturbedFixedPoint) {
  const auto cfg = write_config("v.ini", "[diffusion]\nkind = fixed_point\nb1 = 1\nb2 = 1\n[convergence]\nm = 3\n");
  EXPECT_EQ(run("convergence", cfg, "out"), cli::kConfigError);
}

TEST_F(CliTest, ConvergenceWritesGrids) {
  const auto cfg = write_config(
      "v.ini", "[experiment]\nseed = 1\n[diffusion]\nkind = perturbed_fixed_point\nb1 = 1\nb2 = 1\nc1 = 1\n"
               "c2 = 1\nw = 1\n[mc]\nn_samples = 200\ndt = 2e-3\n[convergence]\nm = 3\niterations = 1\n"
               "tolerance = 10\n");
  EXPECT_EQ(run("convergence", cfg, "out"), cli::kPass) << last_err_;
  std::istringstream grid(slurp("out", "convergence-grid-01.txt"));
  EXPECT_NO_THROW(GridFunction::read(grid));
  EXPECT_NE(slurp("out", "convergence.csv").find("n,theta1,theta2,err1"), std::string::npos);
}

TEST(CliBinary, MissingConfigOptionExitsTwo) {
  const std::string cmd = std::string(RENORMFLOW_CLI) + " fc-eval > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 2);
}

TEST(CliBinary, VersionFlag) {
  const std::string cmd = std::string(RENORMFLOW_CLI) + " --version > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 0);
}

TEST(CliBinary, ShippedConfigsParse) {
  for (const auto& e : fs::directory_iterator(RENORMFLOW_CONFIGS)) {
    if (e.path().extension() != ".ini") continue;
    EXPECT_NO_THROW(Config::load(e.path().string())) << e.path();
    const auto cfg = Config::load(e.path().string());
    EXPECT_NO_THROW(diffusion_from_config(cfg)) << e.path();
  }
}
