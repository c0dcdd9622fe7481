#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "siv/io.hpp"

using namespace siv;
namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "siv_cli_tests";

int run(const std::string& args) {
  const std::string cmd = std::string(SIV_CLI_PATH) + " " + args + " >" + (kDir / "stdout.txt").string() +
                          " 2>" + (kDir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string p(const std::string& name) { return (kDir / name).string(); }

const char* kModel = R"({"m": 1, "n": 1,
  "graph": {"nodes": 3, "edges": [[0, 1], [1, 2], [2, 0]]},
  "nodes": [{"D": [[0.3]], "E": [[0]], "M": [[0]], "gamma": [0.4], "theta": [0.2]}],
  "beta": [0.0]})";

const char* kSeiv = R"({"m": 2, "n": 1,
  "graph": {"nodes": 3, "edges": [[0, 1], [1, 2], [2, 0]]},
  "nodes": [{"D": [[0], [0.3]], "E": [[0, 0.1], [0, 0]], "M": [[0]], "gamma": [0.4], "theta": [0.2]}],
  "beta": [0.0, 0.5]})";

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kDir);
    fs::create_directories(kDir);
    atomic_write(kDir / "model.json", kModel);
    atomic_write(kDir / "seiv.json", kSeiv);
  }
};

}  // namespace

TEST_F(Cli, GenerateGraphStrongAndDeterministic) {
  ASSERT_EQ(run("generate-graph --nodes 20 --prob 0.15 --seed 1 --require-strong --out " + p("g1.txt")), 0);
  ASSERT_EQ(run("generate-graph --nodes 20 --prob 0.15 --seed 1 --require-strong --out " + p("g2.txt")), 0);
  EXPECT_EQ(read_text(p("g1.txt")), read_text(p("g2.txt")));
  EXPECT_TRUE(is_strongly_connected(read_edge_list_file(p("g1.txt"))));
}

TEST_F(Cli, GenerateGraphImpossibleRequirement) {
  EXPECT_EQ(run("generate-graph --nodes 3 --prob 0 --seed 1 --require-strong --out " + p("g0.txt")), 1);
  EXPECT_FALSE(fs::exists(p("g0.txt")));
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run("stability --model " + p("model.json") + " --bogus"), 2);
  EXPECT_EQ(run("no-such-command"), 2);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("generate-graph --prob 2"), 2);
  EXPECT_EQ(run("--help"), 0);
}

TEST_F(Cli, StabilityOnNoInfectionModel) {
  ASSERT_EQ(run("stability --model " + p("model.json") + " --out " + p("stab.json") + " --dump-matrices " +
                p("mats")),
            0);
  const Json j = Json::parse(read_text(p("stab.json")));
  EXPECT_TRUE(j["global_sufficient"].get<bool>());
  EXPECT_TRUE(j["local_iff"].get<bool>());
  EXPECT_LT(j["lambda_qxx"].get<double>(), 0.0);
  EXPECT_EQ(j["vigilant_equilibrium"].size(), 3u);
  EXPECT_TRUE(fs::exists(kDir / "mats" / "wxx.csv"));
  EXPECT_TRUE(fs::exists(kDir / "mats" / "qxx.csv"));
}

TEST_F(Cli, ModuleErrorExitsOne) {
  atomic_write(kDir / "bad.json", R"({"m": 1, "n": 1, "graph": {"nodes": 1, "edges": []},
    "nodes": [{"D": [[-0.3]], "gamma": [0.4], "theta": [0.2]}]})");
  EXPECT_EQ(run("simulate-ode --model " + p("bad.json") + " --out " + p("bad_out")), 1);
  EXPECT_EQ(run("stability --model " + p("bad.json")), 1);
}

TEST_F(Cli, SimulateOdeWritesTrajectoryAndSummary) {
  ASSERT_EQ(run("simulate-ode --model " + p("seiv.json") + " --horizon 5 --step 0.05 --infected 0.2 --out " +
                p("ode")),
            0);
  const std::string traj = read_text(kDir / "ode" / "trajectory.csv");
  EXPECT_EQ(traj.substr(0, traj.find('\n')), "t,node,S,I1,I2,V1");
  const std::string sum = read_text(kDir / "ode" / "summary.csv");
  EXPECT_EQ(sum.substr(0, sum.find('\n')), "t,P_min,P_avg,P_max");
  EXPECT_EQ(std::count(sum.begin(), sum.end(), '\n'), 1 + 101);
  const Json m = Json::parse(read_text(kDir / "ode" / "manifest.json"));
  EXPECT_EQ(m["command"], "simulate-ode");
  EXPECT_TRUE(m.contains("version"));
  ASSERT_EQ(run("simulate-ode --model " + p("seiv.json") + " --horizon 5 --step 0.05 --infected 0.2 --out " +
                p("ode2")),
            0);
  EXPECT_EQ(traj, read_text(kDir / "ode2" / "trajectory.csv"));
}

TEST_F(Cli, SimulateCtmcEventsAndEnsemble) {
  ASSERT_EQ(run("simulate-ctmc --model " + p("seiv.json") + " --horizon 20 --seed 3 --out " + p("ctmc")), 0);
  const std::string ev = read_text(kDir / "ctmc" / "events.csv");
  EXPECT_EQ(ev.substr(0, ev.find('\n')), "t,node,from,to");
  ASSERT_EQ(run("simulate-ctmc --model " + p("seiv.json") + " --horizon 4 --seed 3 --runs 50 --jobs 2 --out " +
                p("ens")),
            0);
  const std::string occ = read_text(kDir / "ens" / "ensemble.csv");
  EXPECT_EQ(occ.substr(0, occ.find('\n')), "t,node,label,frequency");
  ASSERT_EQ(run("simulate-ctmc --model " + p("seiv.json") + " --horizon 4 --seed 3 --runs 50 --jobs 1 --out " +
                p("ens1")),
            0);
  EXPECT_EQ(occ, read_text(kDir / "ens1" / "ensemble.csv"));
  EXPECT_EQ(run("simulate-ctmc --model " + p("seiv.json") + " --labels S,I9,S --out " + p("x")), 1);
}

TEST_F(Cli, FitPhProducesValidPhaseType) {
  ASSERT_EQ(run("fit-ph --target lognormal --mean 12.7 --sd 4.31 --phases 10 --samples 2000 --max-iterations 40 "
                "--seed 2 --out " +
                p("ph.json")),
            0);
  const auto ph = phase_type_from_json(Json::parse(read_text(p("ph.json"))));
  EXPECT_EQ(ph.phases(), 10);
  EXPECT_NEAR(ph_mean(ph), 12.7, 0.1 * 12.7);
}

TEST_F(Cli, ExpandBuildsExtendedModel) {
  atomic_write(kDir / "erl.json", R"({"p": 3, "phi": [1, 0, 0], "S": [[-1, 1, 0], [0, -1, 1], [0, 0, -1]]})");
  ASSERT_EQ(run("expand --model " + p("seiv.json") + " --ph " + p("erl.json") + " --out " + p("exp.json")), 0);
  const Model m = read_model_file(p("exp.json"));
  EXPECT_EQ(m.m(), 4);
  EXPECT_EQ(m.node(0).infectious_internal(2, 3), 1.0);
  atomic_write(kDir / "mix.json", R"({"p": 2, "phi": [0.5, 0.5], "S": [[-1, 0], [0, -2]]})");
  ASSERT_EQ(run("expand --model " + p("seiv.json") + " --ph " + p("mix.json") + " --out " + p("exp2.json")), 0);
  EXPECT_EQ(read_model_file(p("exp2.json")).m(), 4);
  EXPECT_EQ(run("expand --model " + p("model.json") + " --ph " + p("erl.json")), 1);
}

TEST_F(Cli, SweepCsv) {
  ASSERT_EQ(run("sweep --model " + p("seiv.json") + " --axis beta --multipliers 0.1,1,10 --horizon 500 --step 0.05 "
                "--out " +
                p("sweep.csv")),
            0);
  const std::string csv = read_text(p("sweep.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "multiplier,lambda_qxx,P_min,P_avg,P_max,converged");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_EQ(run("sweep --model " + p("seiv.json") + " --multipliers 1,0.5"), 1);
  EXPECT_EQ(run("sweep --model " + p("seiv.json") + " --multipliers 1,abc"), 2);
  EXPECT_EQ(run("sweep --model " + p("seiv.json") + " --axis gamma --multipliers 1"), 2);
}
