#include <gtest/gtest.h>

#include <filesystem>

#include "oracles.hpp"
#include "siv/commands.hpp"
#include "siv/io.hpp"

using namespace siv;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("siv_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(FormatNumber, TwelveSignificantDigits) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333333");
  EXPECT_EQ(format_number(-2.5e-20), "-2.5e-20");
  EXPECT_EQ(round12(1.0 / 3.0), 0.333333333333);
}

TEST(ModelJson, RoundTrip) {
  Rng rng(1);
  const Model model = oracles::random_model(rng, 5, 2, 3);
  const Model back = model_from_json(model_to_json(model));
  EXPECT_EQ(back.graph(), model.graph());
  ASSERT_EQ(back.edges().size(), model.edges().size());
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(back.node(i).recovery, model.node(i).recovery);
    EXPECT_EQ(back.node(i).infectious_internal, model.node(i).infectious_internal);
    EXPECT_EQ(back.node(i).vigilant_internal, model.node(i).vigilant_internal);
    EXPECT_EQ(back.node(i).susceptibility, model.node(i).susceptibility);
    EXPECT_EQ(back.node(i).vigilance, model.node(i).vigilance);
  }
  for (std::size_t e = 0; e < model.edges().size(); ++e) EXPECT_EQ(back.edges()[e].beta, model.edges()[e].beta);
}

TEST(ModelJson, BroadcastNodesAndBeta) {
  const Json j = Json::parse(R"({
    "m": 1, "n": 1,
    "graph": {"nodes": 3, "edges": [[0, 1], [1, 2]]},
    "nodes": [{"D": [[0.2]], "E": [[0]], "M": [[0]], "gamma": [0.5], "theta": [0.1]}],
    "beta": [0.3]
  })");
  const Model model = model_from_json(j);
  EXPECT_EQ(model.node_count(), 3);
  EXPECT_EQ(model.node(2).recovery(0, 0), 0.2);
  EXPECT_EQ(model.beta(2, 1)(0), 0.3);
  EXPECT_EQ(model.beta(0, 1)(0), 0.0);
}

TEST(ModelJson, GraphFromEdgeListPath) {
  const fs::path dir = scratch_dir("graph_path");
  atomic_write(dir / "g.txt", "nodes 2\n0 1\n");
  atomic_write(dir / "m.json", R"({"m": 1, "n": 1, "graph": "g.txt",
    "nodes": [{"D": [[0.2]], "E": [[0]], "M": [[0]], "gamma": [0.5], "theta": [0.1]}],
    "edges": [{"from": 0, "to": 1, "beta": [0.4]}]})");
  const Model model = read_model_file(dir / "m.json");
  EXPECT_TRUE(model.graph().has_edge(0, 1));
  EXPECT_EQ(model.beta(1, 0)(0), 0.4);
}

TEST(ModelJson, RangesVariant) {
  const Json j = Json::parse(R"({
    "m": 2, "n": 1, "seed": 5,
    "graph": {"nodes": 4, "edges": [[0, 1], [1, 2], [2, 3], [3, 0]]},
    "ranges": {"D": [[[0, 0]], [[0.1, 0.4]]], "E": [[[0, 0], [0.5, 0.5]], [[0, 0], [0, 0]]],
               "M": [0, 0], "gamma": [0.2, 0.7], "theta": [0.3, 0.8], "beta": [[0, 0], [0.1, 0.4]]}
  })");
  const Model a = model_from_json(j);
  const Model b = model_from_json(j);
  EXPECT_EQ(a.node(3).recovery, b.node(3).recovery);
  EXPECT_EQ(a.node(1).infectious_internal(0, 1), 0.5);
  EXPECT_GE(a.node(1).recovery(1, 0), 0.1);
  EXPECT_LE(a.node(1).recovery(1, 0), 0.4);
  EXPECT_EQ(a.edges()[0].beta(0), 0.0);
}

TEST(ModelJson, Errors) {
  EXPECT_THROW(model_from_json(Json::parse(R"({"m": 1})")), InputError);
  EXPECT_THROW(model_from_json(Json::parse(R"({"m": 0, "n": 1, "graph": {"nodes": 1, "edges": []}, "nodes": []})")),
               InputError);
  EXPECT_THROW(parse_json("{not json", "x"), InputError);
  EXPECT_THROW(read_model_file("/nonexistent/model.json"), InputError);
}

TEST(PhaseTypeJson, RoundTripAndValidation) {
  const auto ph = PhaseType::erlang(3, 0.7);
  const auto back = phase_type_from_json(phase_type_to_json(ph));
  EXPECT_EQ(back.subgenerator, ph.subgenerator);
  EXPECT_EQ(back.initial, ph.initial);
  EXPECT_THROW(phase_type_from_json(Json::parse(R"({"p": 2, "phi": [1], "S": [[-1]]})")), InputError);
  EXPECT_THROW(phase_type_from_json(Json::parse(R"({"phi": [1], "S": [[1]]})")), InputError);
}

TEST(MeanFieldJson, RowsAndBroadcast) {
  Rng rng(2);
  const Model model = oracles::random_model(rng, 3, 1, 1);
  const auto b = mean_field_state_from_json(Json::parse("[0.5, 0.25, 0.25]"), model);
  EXPECT_EQ(b.I(2, 0), 0.25);
  const auto r = mean_field_state_from_json(Json::parse("[[1,0,0],[0,1,0],[0,0,1]]"), model);
  EXPECT_EQ(r.I(1, 0), 1.0);
  EXPECT_EQ(r.V(2, 0), 1.0);
  EXPECT_THROW(mean_field_state_from_json(Json::parse("[[1,0,0],[0,1,0]]"), model), InputError);
  EXPECT_THROW(mean_field_state_from_json(Json::parse("[1,0]"), model), InputError);
}

TEST(Csv, Headers) {
  NodeRates r = NodeRates::zeros(2, 1);
  r.recovery(1, 0) = 0.1;
  r.infectious_internal(0, 1) = 0.3;
  r.susceptibility(0) = 0.2;
  const Model model = homogeneous_model(build_graph(2, {{0, 1}}), r, Vector::Constant(2, 0.2));
  auto init = MeanFieldState::susceptible(2, 2, 1);
  init.S(0) = 0.5;
  init.I(0, 0) = 0.5;
  const auto traj = integrate(model, init, 1.0, {.step = 0.5});
  const std::string t = trajectory_csv(traj);
  EXPECT_EQ(t.substr(0, t.find('\n')), "t,node,S,I1,I2,V1");
  const std::string s = summary_csv(traj);
  EXPECT_EQ(s.substr(0, s.find('\n')), "t,P_min,P_avg,P_max");
  EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 1 + 3 * 2);

  Rng rng(3);
  const auto log = simulate_ctmc(model, {1, 0}, 50.0, rng);
  const std::string ev = event_log_csv(log, 2);
  EXPECT_EQ(ev.substr(0, ev.find('\n')), "t,node,from,to");
  EXPECT_NE(ev.find(",I1,I2"), std::string::npos);

  const auto occ = ensemble(model, {1, 0}, 2.0, 3, 1, {0.0, 1.0});
  const std::string o = occupancy_csv(occ, 2);
  EXPECT_EQ(o.substr(0, o.find('\n')), "t,node,label,frequency");
  EXPECT_EQ(std::count(o.begin(), o.end(), '\n'), 1 + 2 * 2 * 4);
}

TEST(AtomicWrite, ReplacesWithoutLeavingTemp) {
  const fs::path dir = scratch_dir("atomic");
  atomic_write(dir / "a.txt", "one");
  atomic_write(dir / "a.txt", "two");
  EXPECT_EQ(read_text(dir / "a.txt"), "two");
  EXPECT_FALSE(fs::exists(dir / "a.txt.tmp"));
}

TEST(Commands, StrongGraphGeneration) {
  const Graph g = generate_graph({20, 0.15, 1, true, 1000});
  EXPECT_TRUE(is_strongly_connected(g));
  EXPECT_EQ(g, generate_graph({20, 0.15, 1, true, 1000}));
  EXPECT_THROW(generate_graph({3, 0.0, 1, true, 1000}), NumericalError);
  EXPECT_EQ(generate_graph({5, 0.0, 1, false, 1000}).edge_count(), 0u);
}

TEST(Commands, SweepRejectsBadGrid) {
  Rng rng(4);
  const Model model = oracles::random_model(rng, 3, 1, 1);
  const auto init = oracles::random_simplex_state(model, rng);
  EXPECT_THROW(threshold_sweep(model, init, {1.0, 0.5}, SweepAxis::kBeta, 1e-8, 10.0), InputError);
  EXPECT_THROW(threshold_sweep(model, init, {0.0, 0.5}, SweepAxis::kBeta, 1e-8, 10.0), InputError);
}

TEST(Commands, SweepSeparatesRegimes) {
  const Graph g = erdos_renyi(6, 0.5, 3);
  NodeRates r = NodeRates::zeros(1, 1);
  r.recovery(0, 0) = 0.3;
  r.vigilance(0) = 0.1;
  r.susceptibility(0) = 0.3;
  const Model model = homogeneous_model(g, r, Vector::Constant(1, 0.2));
  auto init = MeanFieldState::susceptible(6, 1, 1);
  for (int i = 0; i < 6; ++i) {
    init.I(i, 0) = 0.3;
    init.S(i) = 0.7;
  }
  const auto points = threshold_sweep(model, init, {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}, SweepAxis::kBeta, 1e-10, 4000.0, 0.02, 2);
  bool below = false, above = false;
  for (const auto& p : points) {
    if (p.lambda_qxx < -0.05) {
      below = true;
      EXPECT_LT(p.steady.max, 1e-3);
    }
    if (p.lambda_qxx > 0.05) {
      above = true;
      EXPECT_GT(p.steady.min, 1e-2);
    }
  }
  EXPECT_TRUE(below);
  EXPECT_TRUE(above);
  for (std::size_t k = 1; k < points.size(); ++k) EXPECT_GT(points[k].lambda_qxx, points[k - 1].lambda_qxx);
  const auto recovery = threshold_sweep(model, init, {0.5, 1.0, 2.0}, SweepAxis::kRecovery, 1e-10, 100.0);
  EXPECT_GT(recovery[0].lambda_qxx, recovery[2].lambda_qxx);
}

TEST(Commands, PeakOfFinalState) {
  Trajectory traj;
  for (int k = 0; k < 5; ++k) {
    MeanFieldState s(2, 2, 1);
    s.I(0, 1) = 0.1 * (k == 3);
    s.I(1, 1) = 0.05 * (k == 3);
    s.S(0) = 1.0 - s.I(0, 1);
    s.S(1) = 1.0 - s.I(1, 1);
    traj.times.push_back(k * 2.0);
    traj.states.push_back(s);
  }
  EXPECT_EQ(average_final_state_peak(traj), 6.0);
}
