#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "siv/expansion.hpp"
#include "siv/graph.hpp"
#include "siv/io.hpp"
#include "siv/meanfield.hpp"
#include "siv/model.hpp"
#include "siv/phasetype.hpp"
#include "siv/random.hpp"
#include "siv/stability.hpp"
#include "siv/stochastic.hpp"

namespace siv {

inline constexpr const char* kVersion = SIV_VERSION;

/// Random streams derived from the one seed of an invocation.
enum class Stream : std::uint64_t {
  kTargetSamples = 1,
  kEmFit = 2,
  kGraph = 3,
  kParameters = 4,
  kInitialState = 5,
};

inline std::uint64_t stream_seed(std::uint64_t seed, Stream s) {
  return derive_seed(seed, static_cast<std::uint64_t>(s));
}

struct GraphRequest {
  int nodes = 20;
  double probability = 0.15;
  std::uint64_t seed = 0;
  bool require_strong = false;
  int max_retries = 1000;
};

/// Erdos-Renyi graph; with require_strong, retries seed, seed + 1, ...
/// until the draw is strongly connected.
inline Graph generate_graph(const GraphRequest& req) {
  for (int attempt = 0; attempt < std::max(1, req.max_retries); ++attempt) {
    Graph g = erdos_renyi(req.nodes, req.probability, req.seed + attempt);
    if (!req.require_strong || is_strongly_connected(g)) return g;
  }
  throw NumericalError("no strongly connected graph after " + std::to_string(req.max_retries) +
                       " seeds");
}

/// Independent draws from a log-normal given by its own mean and sd.
inline std::vector<double> lognormal_samples(double mean, double sd, std::size_t count,
                                             std::uint64_t seed) {
  const auto law = LogNormal::from_mean_sd(mean, sd);
  Rng rng(seed);
  std::vector<double> out(count);
  for (auto& x : out) x = law.sample(rng);
  return out;
}

// ---- Ebola reproduction -----------------------------------------------------

struct EbolaConfig {
  std::uint64_t seed = 1;
  int nodes = 20;
  double edge_probability = 0.15;
  int phases = 10;
  std::size_t samples = 10000;
  double incubation_mean = 12.7;
  double incubation_sd = 4.31;
  Interval vigilance{0.3, 0.8};
  Interval susceptibility{0.2, 0.7};
  Interval beta{0.1, 0.4};
  Interval recovery{0.1, 0.4};
  Interval initial_exposed{0.25, 0.75};
  double horizon = 200.0;
  double step = 0.01;
  EmOptions em;
  /// Global beta multipliers for the threshold sweep.
  std::vector<double> sweep_multipliers = {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0,
                                           1.1, 1.2, 1.4, 1.6, 1.8, 2.0, 2.5, 3.0};
  double sweep_horizon = 2000.0;
  double sweep_tolerance = 1e-9;
};

/// Rate bounds of the four-state SEIV base: I^1 exposed, I^2 infected, one
/// vigilant state. The exposed-to-infected rate is a placeholder replaced
/// by the phase-type expansion.
inline RateRanges seiv_base_ranges(const EbolaConfig& cfg) {
  RateRanges r = RateRanges::zeros(2, 1);
  const double placeholder = 1.0 / cfg.incubation_mean;
  r.infectious_internal[0][1] = {placeholder, placeholder};
  r.recovery[1][0] = cfg.recovery;
  r.susceptibility[0] = cfg.susceptibility;
  r.vigilance[0] = cfg.vigilance;
  r.beta[1] = cfg.beta;
  return r;
}

struct EbolaInstance {
  std::vector<double> incubation_samples;
  EmResult fit;
  Graph graph;
  Model base;
  Model expanded;
  MeanFieldState initial;
};

/// Fitted incubation law for the configuration (deterministic in the seed).
inline EmResult fit_ebola_incubation(const EbolaConfig& cfg, std::vector<double>* samples_out = nullptr) {
  auto samples = lognormal_samples(cfg.incubation_mean, cfg.incubation_sd, cfg.samples,
                                   stream_seed(cfg.seed, Stream::kTargetSamples));
  auto fit = fit_ph_em(samples, cfg.phases, cfg.em, stream_seed(cfg.seed, Stream::kEmFit));
  if (samples_out) *samples_out = std::move(samples);
  return fit;
}

/// Builds the network, draws the SEIV rates and expands the exposed state
/// with the given incubation law.
inline EbolaInstance build_ebola_instance(const EbolaConfig& cfg, EmResult fit,
                                          std::vector<double> samples = {}) {
  PhaseType incubation = fit.fit;
  if (!has_unit_initial(incubation)) incubation = densify(incubation, default_densify_rate(incubation));
  Graph graph = generate_graph({cfg.nodes, cfg.edge_probability,
                                stream_seed(cfg.seed, Stream::kGraph), true, 1000});
  Model base = sample_model_from_ranges(graph, 2, 1, seiv_base_ranges(cfg),
                                        stream_seed(cfg.seed, Stream::kParameters));
  Model expanded = expand_transition(base, incubation);
  MeanFieldState init = MeanFieldState::susceptible(cfg.nodes, expanded.m(), expanded.n());
  Rng rng(stream_seed(cfg.seed, Stream::kInitialState));
  for (int i = 0; i < cfg.nodes; ++i) {
    const double exposed = uniform(rng, cfg.initial_exposed.lo, cfg.initial_exposed.hi);
    init.I(i, 0) = exposed;
    init.S(i) = 1.0 - exposed;
  }
  return {std::move(samples), std::move(fit), std::move(graph), std::move(base),
          std::move(expanded), std::move(init)};
}

inline EbolaInstance build_ebola_instance(const EbolaConfig& cfg) {
  std::vector<double> samples;
  auto fit = fit_ebola_incubation(cfg, &samples);
  return build_ebola_instance(cfg, std::move(fit), std::move(samples));
}

struct SweepPoint {
  double multiplier = 1.0;
  double lambda_qxx = 0.0;
  ProbabilitySummary steady;
  bool converged = false;
};

enum class SweepAxis { kBeta, kRecovery };

/// Steady-state infection probabilities against lambda_max(Q_xx) while a
/// global multiplier scales beta (or recovery).
inline std::vector<SweepPoint> threshold_sweep(const Model& model, const MeanFieldState& init,
                                               const std::vector<double>& multipliers,
                                               SweepAxis axis, double tolerance,
                                               double max_horizon, double step = 0.01,
                                               unsigned jobs = 1) {
  for (std::size_t k = 0; k < multipliers.size(); ++k) {
    if (!(multipliers[k] > 0.0) || (k > 0 && !(multipliers[k] > multipliers[k - 1]))) {
      throw InputError("sweep multipliers must be positive and increasing");
    }
  }
  std::vector<SweepPoint> out(multipliers.size());
  parallel_for(multipliers.size(), jobs, [&](std::size_t k) {
    const double s = multipliers[k];
    const Model scaled =
        axis == SweepAxis::kBeta ? model.with_scaled_beta(s) : model.with_scaled_recovery(s);
    const Vector ystar = vigilant_equilibrium(scaled);
    const double lambda = spectral_abscissa(assemble_qxx(scaled, ystar));
    IntegrationOptions opt;
    opt.step = step;
    const auto ss = steady_state(scaled, init, tolerance, max_horizon, opt);
    std::vector<double> p(scaled.node_count());
    for (int i = 0; i < scaled.node_count(); ++i) p[i] = ss.state.infected(i);
    out[k] = {s, lambda, summarize(p), ss.converged};
  });
  return out;
}

inline std::string sweep_csv(const std::vector<SweepPoint>& points) {
  std::string out = "multiplier,lambda_qxx,P_min,P_avg,P_max,converged\n";
  for (const auto& p : points) {
    out += format_number(p.multiplier) + "," + format_number(p.lambda_qxx) + "," +
           format_number(p.steady.min) + "," + format_number(p.steady.avg) + "," +
           format_number(p.steady.max) + "," + (p.converged ? "1" : "0") + "\n";
  }
  return out;
}

/// Time at which the node-average of the final infectious state peaks.
inline double average_final_state_peak(const Trajectory& traj) {
  double best = -1.0;
  double when = 0.0;
  for (std::size_t s = 0; s < traj.states.size(); ++s) {
    const auto& st = traj.states[s];
    double avg = 0.0;
    for (int i = 0; i < st.node_count(); ++i) avg += st.I(i, st.m() - 1);
    avg /= st.node_count();
    if (avg > best) {
      best = avg;
      when = traj.times[s];
    }
  }
  return when;
}

inline double round12(double v) { return std::strtod(format_number(v).c_str(), nullptr); }

inline Json rounded(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(round12(v(k)));
  return a;
}

inline Json stability_json(const StabilityReport& r) {
  Json j{{"dimensions",
          {{"wxx", {r.wxx.rows(), r.wxx.cols()}}, {"wyy", {r.wyy.rows(), r.wyy.cols()}}}},
         {"global_sufficient", r.global_sufficient},
         {"lambda_wxx", round12(r.lambda_wxx)}};
  if (r.local_iff) {
    j["local_iff"] = *r.local_iff;
    j["lambda_qxx"] = round12(*r.lambda_qxx);
    j["vigilant_equilibrium"] = rounded(*r.vigilant_equilibrium);
  } else {
    j["local_iff"] = nullptr;
    j["lambda_qxx"] = nullptr;
    j["vigilant_equilibrium"] = nullptr;
    j["equilibrium_error"] = r.equilibrium_error;
  }
  return j;
}

inline Json rounded_phase_type(const PhaseType& ph) {
  Json s = Json::array();
  for (Eigen::Index r = 0; r < ph.subgenerator.rows(); ++r) {
    s.push_back(rounded(ph.subgenerator.row(r).transpose()));
  }
  return Json{{"p", ph.phases()}, {"phi", rounded(ph.initial)}, {"S", std::move(s)}};
}

struct EbolaOutcome {
  EbolaInstance instance;
  StabilityReport stability;
  Trajectory trajectory;
  std::vector<SweepPoint> sweep;
  double peak_day = 0.0;
  double final_p_max = 0.0;
};

/// The full incubation-expansion experiment: fit, expand, integrate,
/// analyze, sweep. Writes the bundle to `out_dir` when given.
inline EbolaOutcome reproduce_ebola(const EbolaConfig& cfg,
                                    const std::optional<std::filesystem::path>& out_dir,
                                    unsigned jobs = 1) {
  EbolaOutcome outcome{build_ebola_instance(cfg), {}, {}, {}, 0.0, 0.0};
  const auto& inst = outcome.instance;
  outcome.stability = stability_report(inst.expanded);
  IntegrationOptions opt;
  opt.step = cfg.step;
  opt.stride = std::max(1, static_cast<int>(std::lround(0.1 / cfg.step)));
  outcome.trajectory = integrate(inst.expanded, inst.initial, cfg.horizon, opt);
  outcome.peak_day = average_final_state_peak(outcome.trajectory);
  for (int i = 0; i < inst.expanded.node_count(); ++i) {
    outcome.final_p_max = std::max(outcome.final_p_max, outcome.trajectory.states.back().infected(i));
  }
  outcome.sweep = threshold_sweep(inst.expanded, inst.initial, cfg.sweep_multipliers,
                                  SweepAxis::kBeta, cfg.sweep_tolerance, cfg.sweep_horizon,
                                  cfg.step, jobs);
  if (!out_dir) return outcome;

  const auto& dir = *out_dir;
  std::filesystem::create_directories(dir);
  atomic_write(dir / "phase_type.json", rounded_phase_type(inst.fit.fit).dump(2) + "\n");
  atomic_write(dir / "model.json", model_to_json(inst.expanded).dump() + "\n");
  atomic_write(dir / "trajectory.csv", trajectory_csv(outcome.trajectory));
  atomic_write(dir / "summary.csv", summary_csv(outcome.trajectory));
  std::string infected = "t,node,I" + std::to_string(inst.expanded.m()) + "\n";
  for (std::size_t s = 0; s < outcome.trajectory.states.size(); ++s) {
    const auto& st = outcome.trajectory.states[s];
    for (int i = 0; i < st.node_count(); ++i) {
      infected += format_number(outcome.trajectory.times[s]) + "," + std::to_string(i) + "," +
                  format_number(st.I(i, st.m() - 1)) + "\n";
    }
  }
  atomic_write(dir / "infected.csv", infected);
  Json stab = stability_json(outcome.stability);
  stab["peak_day_final_state"] = round12(outcome.peak_day);
  stab["final_p_max"] = round12(outcome.final_p_max);
  atomic_write(dir / "stability.json", stab.dump(2) + "\n");
  atomic_write(dir / "sweep.csv", sweep_csv(outcome.sweep));
  Json manifest{{"toolkit", "siv"},
                {"version", kVersion},
                {"command", "reproduce-ebola"},
                {"seed", cfg.seed},
                {"config",
                 {{"nodes", cfg.nodes},
                  {"edge_probability", cfg.edge_probability},
                  {"phases", cfg.phases},
                  {"samples", cfg.samples},
                  {"incubation_mean", cfg.incubation_mean},
                  {"incubation_sd", cfg.incubation_sd},
                  {"theta", {cfg.vigilance.lo, cfg.vigilance.hi}},
                  {"gamma", {cfg.susceptibility.lo, cfg.susceptibility.hi}},
                  {"beta", {cfg.beta.lo, cfg.beta.hi}},
                  {"delta", {cfg.recovery.lo, cfg.recovery.hi}},
                  {"initial_exposed", {cfg.initial_exposed.lo, cfg.initial_exposed.hi}},
                  {"horizon", cfg.horizon},
                  {"step", cfg.step},
                  {"em_max_iterations", cfg.em.max_iterations},
                  {"em_restarts", cfg.em.restarts},
                  {"sweep_multipliers", cfg.sweep_multipliers},
                  {"sweep_horizon", cfg.sweep_horizon}}},
                {"files",
                 {"phase_type.json", "model.json", "trajectory.csv", "summary.csv", "infected.csv",
                  "stability.json", "sweep.csv"}}};
  atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
  return outcome;
}

}  // namespace siv
