#include <gtest/gtest.h>

#include "oracles.hpp"
#include "siv/expansion.hpp"
#include "siv/stochastic.hpp"

using namespace siv;

namespace {

Model two_state(double theta, double gamma) {
  NodeRates r = NodeRates::zeros(1, 1);
  r.vigilance(0) = theta;
  r.susceptibility(0) = gamma;
  return homogeneous_model(build_graph(1, {}), r, Vector::Zero(1));
}

/// SEIV with the exposed holding time governed by `eps` (exponential).
Model seiv(const Graph& g, double eps, double delta, double beta, double theta = 0.1,
           double gamma = 0.2) {
  NodeRates r = NodeRates::zeros(2, 1);
  r.infectious_internal(0, 1) = eps;
  r.recovery(1, 0) = delta;
  r.vigilance(0) = theta;
  r.susceptibility(0) = gamma;
  Vector b(2);
  b << 0.0, beta;
  return homogeneous_model(g, r, b);
}

/// Time from entering I^1 to reaching `target` on an isolated node.
std::vector<double> absorption_times(const Model& model, int target, std::size_t runs,
                                     std::uint64_t seed) {
  std::vector<double> out;
  out.reserve(runs);
  for (std::size_t r = 0; r < runs; ++r) {
    Rng rng = make_rng(seed, r);
    const auto log = simulate_ctmc(model, {1}, 1e9, rng,
                                   [&](const Event& e, const NetworkState&) { return e.to == target; });
    out.push_back(log.events.back().time);
  }
  return out;
}

}  // namespace

TEST(Ctmc, TwoStateStationaryLaw) {
  const Model model = two_state(0.5, 0.5);
  Rng rng(1);
  const double horizon = 1e4;
  const auto log = simulate_ctmc(model, {0}, horizon, rng);
  double in_s = 0.0;
  double t = 0.0;
  int state = 0;
  for (const auto& e : log.events) {
    if (state == 0) in_s += e.time - t;
    t = e.time;
    state = e.to;
  }
  if (state == 0) in_s += horizon - t;
  EXPECT_NEAR(in_s / horizon, 0.5, 0.02);
}

TEST(Ctmc, NoInfectedNoEvents) {
  const Graph g = erdos_renyi(6, 0.6, 2);
  NodeRates r = NodeRates::zeros(2, 1);
  r.susceptibility(0) = 0.3;
  const Model model = homogeneous_model(g, r, Vector::Constant(2, 5.0));
  Rng rng(2);
  EXPECT_TRUE(simulate_ctmc(model, NetworkState(6, 0), 100.0, rng).events.empty());
}

TEST(Ctmc, AbsorptionTimeFollowsPhaseType) {
  Rng gen(3);
  for (int p = 1; p <= 5; ++p) {
    const auto ph = oracles::random_phase_type(gen, p, p % 2 == 1);
    const auto entry = has_unit_initial(ph) ? ph : densify(ph, default_densify_rate(ph));
    const Model model = expand_transition(seiv(build_graph(1, {}), 1.0, 0.2, 0.0), entry);
    const auto times = absorption_times(model, model.m(), 10000, 40 + p);
    EXPECT_LT(ks_statistic(times, ph), 0.02) << "p = " << p;
    EXPECT_LT(ks_statistic(times, entry), oracles::ks_critical(times.size(), 0.01)) << "p = " << p;
  }
}

TEST(Ctmc, InfectionLanding) {
  const Model model = seiv(build_graph(2, {{0, 1}}), 0.5, 0.3, 2.0);
  for (std::uint64_t s = 0; s < 50; ++s) {
    Rng rng(s);
    const auto log = simulate_ctmc(model, {2, 0}, 50.0, rng);
    for (const auto& e : log.events)
      if (e.from == 0 && e.to <= model.m()) EXPECT_EQ(e.to, 1);
  }
}

TEST(Ctmc, ReplayDeterminismAndLocality) {
  Rng gen(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Model model = oracles::random_model(gen, 6, 2, 2, 0.4, 0.3, 1.0, 2.0);
    NetworkState init(6);
    for (auto& s : init) s = static_cast<int>(gen() % model.states_per_node());
    Rng a(trial), b(trial);
    const auto la = simulate_ctmc(model, init, 30.0, a);
    const auto lb = simulate_ctmc(model, init, 30.0, b);
    ASSERT_EQ(la.events.size(), lb.events.size());
    for (std::size_t k = 0; k < la.events.size(); ++k) {
      EXPECT_EQ(la.events[k].time, lb.events[k].time);
      EXPECT_EQ(la.events[k].node, lb.events[k].node);
      EXPECT_EQ(la.events[k].to, lb.events[k].to);
    }
    EXPECT_EQ(replay(la), state_at(la, 30.0));
    // Every infection has an infectious in-neighbor with positive beta.
    NetworkState x = init;
    double last = 0.0;
    for (const auto& e : la.events) {
      EXPECT_GE(e.time, last);
      EXPECT_EQ(x[e.node], e.from);
      if (e.from == 0 && e.to == 1) {
        bool source = false;
        for (int idx : model.incoming(e.node)) {
          const auto& edge = model.edges()[idx];
          const int s = x[edge.from];
          if (s >= 1 && s <= model.m() && edge.beta(s - 1) > 0.0) source = true;
        }
        EXPECT_TRUE(source);
      }
      x[e.node] = e.to;
      last = e.time;
    }
  }
}

TEST(Ctmc, ReplayDetectsInconsistency) {
  EventLog log{{0, 0}, {{1.0, 0, 1, 2}}, 2.0};
  EXPECT_THROW(replay(log), InputError);
  EventLog backwards{{0}, {{2.0, 0, 0, 2}, {1.0, 0, 2, 0}}, 3.0};
  EXPECT_THROW(replay(backwards), InputError);
}

TEST(Ctmc, RejectsBadInitialState) {
  const Model model = two_state(0.5, 0.5);
  Rng rng(0);
  EXPECT_THROW(simulate_ctmc(model, {3}, 1.0, rng), InputError);
  EXPECT_THROW(simulate_ctmc(model, {0, 0}, 1.0, rng), InputError);
}

TEST(Ensemble, SingleRunIsIndicator) {
  Rng gen(6);
  const Model model = oracles::random_model(gen, 4, 2, 1);
  const auto occ = ensemble(model, NetworkState{1, 0, 0, 3}, 10.0, 1, 9, uniform_grid(10.0));
  for (std::size_t g = 0; g < occ.grid.size(); ++g) {
    for (int i = 0; i < 4; ++i) {
      double total = 0.0;
      for (int s = 0; s < occ.states; ++s) {
        const double f = occ.frequency(g, i, s);
        EXPECT_TRUE(f == 0.0 || f == 1.0);
        total += f;
      }
      EXPECT_EQ(total, 1.0);
    }
  }
}

TEST(Ensemble, LinearNodeMatchesMatrixExponential) {
  Rng gen(7);
  const Model model = oracles::random_model(gen, 1, 2, 2);
  const std::size_t runs = 10000;
  const auto grid = uniform_grid(5.0, 0.5);
  const auto occ = ensemble(model, {1}, 5.0, runs, 11, grid, 2);
  const Matrix g = isolated_node_generator(model, 0);
  // 55 correlated comparisons; 4.5 sigma keeps the family-wise false alarm rate near 1e-4.
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Eigen::RowVectorXd p = oracles::eigen_expm(g * grid[k]).row(1);
    double total = 0.0;
    for (int s = 0; s < occ.states; ++s) {
      const double f = occ.frequency(k, 0, s);
      const double sigma = std::sqrt(std::max(p(s) * (1.0 - p(s)), 1e-12) / runs);
      EXPECT_LE(std::abs(f - p(s)), 4.5 * sigma + 1e-12) << "t=" << grid[k] << " state " << s;
      total += f;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(Ensemble, IndependentOfJobCount) {
  Rng gen(8);
  const Model model = oracles::random_model(gen, 5, 2, 2, 0.5, 0.2, 1.0, 1.0);
  const NetworkState init{1, 0, 0, 0, 2};
  const auto grid = uniform_grid(8.0);
  const auto a = ensemble(model, init, 8.0, 300, 4, grid, 1);
  const auto b = ensemble(model, init, 8.0, 300, 4, grid, 3);
  EXPECT_EQ(a.counts, b.counts);
}

TEST(Ensemble, InputChecks) {
  const Model model = two_state(0.5, 0.5);
  EXPECT_THROW(ensemble(model, {0}, 1.0, 0, 0, {0.0}), InputError);
  EXPECT_THROW(ensemble(model, {0}, 1.0, 5, 0, {2.0}), InputError);
}

TEST(SemiMarkov, ExponentialOverrideMatchesMarkov) {
  const Graph g = erdos_renyi(4, 0.6, 1);
  const Model model = seiv(g, 0.4, 0.3, 0.5);
  const SemiMarkovSpec spec{model, {{1, 2, ExponentialHolding{0.4}}}};
  const NetworkState init{1, 0, 2, 0};
  std::vector<double> waits_markov, waits_semi;
  for (std::uint64_t s = 0; s < 3000; ++s) {
    Rng a = make_rng(100, s), b = make_rng(200, s);
    const auto la = simulate_ctmc(model, init, 40.0, a);
    const auto lb = simulate_semi_markov(spec, init, 40.0, b);
    double t = 0.0;
    for (const auto& e : la.events) {
      waits_markov.push_back(e.time - t);
      t = e.time;
    }
    t = 0.0;
    for (const auto& e : lb.events) {
      waits_semi.push_back(e.time - t);
      t = e.time;
    }
    EXPECT_NO_THROW(replay(lb));
  }
  EXPECT_LT(oracles::ks_two_sample(waits_markov, waits_semi),
            oracles::ks_two_sample_critical(waits_markov.size(), waits_semi.size(), 0.01));
}

TEST(SemiMarkov, LogNormalIncubationHistogram) {
  const auto law = LogNormal::from_mean_sd(12.7, 4.31);
  const Model model = seiv(build_graph(1, {}), 1.0, 0.2, 0.0);
  const SemiMarkovSpec spec{model, {{1, 2, law}}};
  std::vector<double> incubation;
  for (std::uint64_t s = 0; s < 10000; ++s) {
    Rng rng = make_rng(3, s);
    const auto log = simulate_semi_markov(spec, {1}, 500.0, rng);
    ASSERT_FALSE(log.events.empty());
    EXPECT_EQ(log.events.front().to, 2);
    incubation.push_back(log.events.front().time);
  }
  EXPECT_LT(ks_statistic(incubation, [&](double t) { return law.cdf(t); }),
            oracles::ks_critical(incubation.size(), 0.01));
}

TEST(SemiMarkov, RejectsRacesAndMissingTransitions) {
  const Graph g = build_graph(1, {});
  NodeRates race = NodeRates::zeros(2, 1);
  race.infectious_internal(0, 1) = 1.0;
  race.recovery(0, 0) = 0.3;
  race.susceptibility(0) = 1.0;
  const Model racing = homogeneous_model(g, race, Vector::Zero(2));
  EXPECT_THROW(validate_semi_markov({racing, {{1, 2, ExponentialHolding{1.0}}}}),
               UnsupportedConfiguration);
  const Model plain = seiv(g, 1.0, 0.2, 0.0);
  EXPECT_THROW(validate_semi_markov({plain, {{1, 3, ExponentialHolding{1.0}}}}), InputError);
  EXPECT_THROW(validate_semi_markov({plain, {{0, 1, ExponentialHolding{1.0}}}}), InputError);
  EXPECT_NO_THROW(validate_semi_markov({plain, {{1, 2, ExponentialHolding{1.0}}}}));
}

TEST(SemiMarkov, Deterministic) {
  const Model model = seiv(erdos_renyi(5, 0.5, 2), 1.0, 0.3, 0.6);
  const SemiMarkovSpec spec{model, {{1, 2, LogNormal::from_mean_sd(3.0, 1.0)}}};
  Rng a(4), b(4);
  const auto la = simulate_semi_markov(spec, {1, 0, 0, 0, 0}, 30.0, a);
  const auto lb = simulate_semi_markov(spec, {1, 0, 0, 0, 0}, 30.0, b);
  ASSERT_EQ(la.events.size(), lb.events.size());
  for (std::size_t k = 0; k < la.events.size(); ++k) EXPECT_EQ(la.events[k].time, lb.events[k].time);
}

TEST(SemiMarkov, PhaseTypeExpansionTracksLogNormalReference) {
  // Erlang-8 matched to the log-normal mean stands in for a fitted law.
  const auto law = LogNormal::from_mean_sd(12.7, 4.31);
  const auto ph = PhaseType::erlang(8, 8.0 / 12.7);
  const Graph g = erdos_renyi(5, 0.5, 6);
  const Model base = seiv(g, 1.0 / 12.7, 0.25, 0.3);
  const Model expanded = expand_transition(base, ph);
  const NetworkState init_markov{1, 0, 0, 0, 0};
  const auto grid = uniform_grid(60.0);
  const auto a = ensemble(expanded, init_markov, 60.0, 3000, 1, grid);
  const auto b = ensemble_semi_markov({base, {{1, 2, law}}}, init_markov, 60.0, 3000, 2, grid);
  double worst = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k)
    for (int i = 0; i < 5; ++i)
      worst = std::max(worst, std::abs(a.frequency_range(k, i, 1, expanded.m()) -
                                       b.frequency_range(k, i, 1, base.m())));
  EXPECT_LT(worst, 0.08);
}
