#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "siv/errors.hpp"
#include "siv/model.hpp"
#include "siv/parallel.hpp"
#include "siv/phasetype.hpp"
#include "siv/random.hpp"

namespace siv {

/// Label of every node: 0 = S, k = I^k (1..m), m + l = V^l (1..n).
using NetworkState = std::vector<int>;

struct Event {
  double time = 0.0;
  int node = 0;
  int from = 0;
  int to = 0;
};

struct EventLog {
  NetworkState initial;
  std::vector<Event> events;
  double horizon = 0.0;
};

/// Applies every event to the initial state; throws if an event's
/// from-label disagrees with the replayed state.
inline NetworkState replay(const EventLog& log) {
  NetworkState state = log.initial;
  double last = 0.0;
  for (const auto& e : log.events) {
    if (e.time < last) throw InputError("event log: times decrease");
    if (e.node < 0 || e.node >= static_cast<int>(state.size()) || state[e.node] != e.from) {
      throw InputError("event log: inconsistent event at t=" + std::to_string(e.time));
    }
    state[e.node] = e.to;
    last = e.time;
  }
  return state;
}

/// State of every node at time t according to the log.
inline NetworkState state_at(const EventLog& log, double t) {
  NetworkState state = log.initial;
  for (const auto& e : log.events) {
    if (e.time > t) break;
    state[e.node] = e.to;
  }
  return state;
}

inline void check_network_state(const Model& model, const NetworkState& state) {
  if (static_cast<int>(state.size()) != model.node_count()) {
    throw InputError("network state has the wrong number of nodes");
  }
  for (int s : state) {
    if (s < 0 || s >= model.states_per_node()) throw InputError("network state label out of range");
  }
}

namespace detail {

struct Transition {
  int target;
  double rate;
};

// Exact direct-method bookkeeping shared by the Markov and semi-Markov
// simulators: per-node spontaneous transitions, infection pressure from
// in-neighbors, and per-node total rates.
class NetworkRates {
 public:
  explicit NetworkRates(const Model& model)
      : model_(model), m_(model.m()), n_(model.n()) {
    const int N = model.node_count();
    const int states = model.states_per_node();
    spontaneous_.assign(N, std::vector<std::vector<Transition>>(states));
    out_edges_.resize(N);
    for (int i = 0; i < N; ++i) {
      const auto& r = model.node(i);
      for (int l = 0; l < n_; ++l) {
        add(i, 0, 1 + m_ + l, r.vigilance(l));
        add(i, 1 + m_ + l, 0, r.susceptibility(l));
        for (int l2 = 0; l2 < n_; ++l2) {
          if (l2 != l) add(i, 1 + m_ + l, 1 + m_ + l2, r.vigilant_internal(l, l2));
        }
      }
      for (int k = 0; k < m_; ++k) {
        for (int k2 = 0; k2 < m_; ++k2) {
          if (k2 != k) add(i, 1 + k, 1 + k2, r.infectious_internal(k, k2));
        }
        for (int l = 0; l < n_; ++l) add(i, 1 + k, 1 + m_ + l, r.recovery(k, l));
      }
    }
    for (std::size_t e = 0; e < model.edges().size(); ++e) {
      out_edges_[model.edges()[e].from].push_back(static_cast<int>(e));
    }
  }

  const Model& model() const { return model_; }
  int m() const { return m_; }

  const std::vector<Transition>& spontaneous(int node, int state) const {
    return spontaneous_[node][state];
  }

  double spontaneous_rate(int node, int state) const {
    double total = 0.0;
    for (const auto& t : spontaneous_[node][state]) total += t.rate;
    return total;
  }

  /// sum_k sum_{j in in(i)} beta_ij^k 1[X_j = I^k].
  double pressure(int i, const NetworkState& x) const {
    double total = 0.0;
    for (int e : model_.incoming(i)) {
      const auto& edge = model_.edges()[e];
      const int s = x[edge.from];
      if (s >= 1 && s <= m_) total += edge.beta(s - 1);
    }
    return total;
  }

  /// Nodes whose infection pressure depends on node j.
  std::vector<int> dependents(int j) const {
    std::vector<int> out;
    for (int e : out_edges_[j]) out.push_back(model_.edges()[e].to);
    return out;
  }

  /// Chooses a target for a node in `state` given infection pressure.
  int choose_target(int node, int state, double pressure, double u) const {
    double acc = 0.0;
    if (state == 0) {
      if (u < pressure) return 1;
      acc = pressure;
    }
    const auto& list = spontaneous_[node][state];
    for (const auto& t : list) {
      acc += t.rate;
      if (u < acc) return t.target;
    }
    // Rounding at the top of the cumulative sum.
    for (auto it = list.rbegin(); it != list.rend(); ++it) {
      if (it->rate > 0.0) return it->target;
    }
    return 1;
  }

 private:
  void add(int i, int from, int to, double rate) {
    if (rate > 0.0) spontaneous_[i][from].push_back({to, rate});
  }

  const Model& model_;
  int m_;
  int n_;
  std::vector<std::vector<std::vector<Transition>>> spontaneous_;
  std::vector<std::vector<int>> out_edges_;
};

}  // namespace detail

/// Optional early stop: return true to end the run after recording the event.
using StopPredicate = std::function<bool(const Event&, const NetworkState&)>;

/// Exact simulation of the networked Markov process by the direct method.
inline EventLog simulate_ctmc(const Model& model, const NetworkState& init, double horizon,
                              Rng& rng, const StopPredicate& stop = {}) {
  require_valid(model);
  check_network_state(model, init);
  const detail::NetworkRates rates(model);
  const int N = model.node_count();
  NetworkState x = init;
  std::vector<double> pressure(N), node_rate(N);
  auto refresh = [&](int i) {
    pressure[i] = x[i] == 0 ? rates.pressure(i, x) : 0.0;
    node_rate[i] = pressure[i] + rates.spontaneous_rate(i, x[i]);
  };
  for (int i = 0; i < N; ++i) refresh(i);

  EventLog log{init, {}, horizon};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double t = 0.0;
  for (;;) {
    double total = 0.0;
    for (double r : node_rate) total += r;
    if (!(total > 0.0)) break;
    t += std::exponential_distribution<double>(total)(rng);
    if (t > horizon) break;
    double u = unit(rng) * total;
    int node = 0;
    for (; node + 1 < N; ++node) {
      if (u < node_rate[node]) break;
      u -= node_rate[node];
    }
    u = std::min(u, node_rate[node]);
    const int from = x[node];
    const int to = rates.choose_target(node, from, pressure[node], u);
    x[node] = to;
    refresh(node);
    for (int d : rates.dependents(node)) refresh(d);
    log.events.push_back({t, node, from, to});
    if (stop && stop(log.events.back(), x)) break;
  }
  return log;
}

/// Holding-time laws available for semi-Markov overrides.
struct ExponentialHolding {
  double rate = 1.0;
};
using HoldingDistribution = std::variant<ExponentialHolding, LogNormal, PhaseType>;

inline double sample_holding(const HoldingDistribution& d, Rng& rng) {
  return std::visit(
      [&](const auto& law) -> double {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, ExponentialHolding>) {
          return std::exponential_distribution<double>(law.rate)(rng);
        } else if constexpr (std::is_same_v<T, LogNormal>) {
          return law.sample(rng);
        } else {
          return ph_sample(law, rng);
        }
      },
      d);
}

/// The holding time in infectious state `state` (1-based label) is drawn
/// from `law` on entry, after which the node moves to `target`.
struct HoldingOverride {
  int state = 1;
  int target = 2;
  HoldingDistribution law;
};

struct SemiMarkovSpec {
  Model model;
  std::vector<HoldingOverride> overrides;
};

/// Validates overrides: the state must be infectious, the transition must
/// exist at every node and be the state's only outflow.
inline void validate_semi_markov(const SemiMarkovSpec& spec) {
  require_valid(spec.model);
  const int m = spec.model.m();
  std::vector<char> seen(spec.model.states_per_node(), 0);
  for (const auto& o : spec.overrides) {
    if (o.state < 1 || o.state > m) {
      throw InputError("semi-Markov override must start in an infectious state");
    }
    if (o.target < 1 || o.target >= spec.model.states_per_node() || o.target == o.state) {
      throw InputError("semi-Markov override target must be another infectious or vigilant state");
    }
    if (seen[o.state]) throw InputError("semi-Markov: two overrides on one state");
    seen[o.state] = 1;
    for (int i = 0; i < spec.model.node_count(); ++i) {
      const auto& r = spec.model.node(i);
      const int k = o.state - 1;
      double listed = 0.0;
      double competing = 0.0;
      for (int k2 = 0; k2 < m; ++k2) {
        if (k2 == k) continue;
        (1 + k2 == o.target ? listed : competing) += r.infectious_internal(k, k2);
      }
      for (int l = 0; l < spec.model.n(); ++l) {
        (1 + m + l == o.target ? listed : competing) += r.recovery(k, l);
      }
      if (!(listed > 0.0)) {
        throw InputError("semi-Markov override on a transition absent at node " +
                         std::to_string(i));
      }
      if (competing != 0.0) {
        throw UnsupportedConfiguration(
            "semi-Markov override races exponential transitions at node " +
            std::to_string(i) + "; only sole-outflow transitions can be overridden");
      }
    }
  }
}

/// Next-event simulation in which overridden states hold for a time drawn
/// from their law (clock set on entry, including at t = 0) and every other
/// transition is an exponential race handled by the direct method.
inline EventLog simulate_semi_markov(const SemiMarkovSpec& spec, const NetworkState& init,
                                     double horizon, Rng& rng) {
  validate_semi_markov(spec);
  const Model& model = spec.model;
  check_network_state(model, init);
  const detail::NetworkRates rates(model);
  const int N = model.node_count();
  std::vector<const HoldingOverride*> override_of(model.states_per_node(), nullptr);
  for (const auto& o : spec.overrides) override_of[o.state] = &o;

  NetworkState x = init;
  std::vector<double> pressure(N), node_rate(N);
  std::vector<double> clock(N, std::numeric_limits<double>::infinity());
  double t = 0.0;
  auto enter = [&](int i) {
    clock[i] = override_of[x[i]] ? t + sample_holding(override_of[x[i]]->law, rng)
                                 : std::numeric_limits<double>::infinity();
  };
  auto refresh = [&](int i) {
    pressure[i] = x[i] == 0 ? rates.pressure(i, x) : 0.0;
    node_rate[i] = override_of[x[i]] ? 0.0 : pressure[i] + rates.spontaneous_rate(i, x[i]);
  };
  for (int i = 0; i < N; ++i) {
    enter(i);
    refresh(i);
  }
  EventLog log{init, {}, horizon};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (;;) {
    double total = 0.0;
    for (double r : node_rate) total += r;
    const double wait = total > 0.0 ? std::exponential_distribution<double>(total)(rng)
                                    : std::numeric_limits<double>::infinity();
    const auto next_clock = std::min_element(clock.begin(), clock.end());
    const double t_clock = *next_clock;
    const double t_exp = t + wait;
    if (std::min(t_clock, t_exp) > horizon) break;
    int node = 0;
    int to = 0;
    if (t_clock <= t_exp) {
      // Memorylessness lets the exponential race restart after the clock fires.
      t = t_clock;
      node = static_cast<int>(next_clock - clock.begin());
      to = override_of[x[node]]->target;
    } else {
      t = t_exp;
      double u = unit(rng) * total;
      for (; node + 1 < N; ++node) {
        if (u < node_rate[node]) break;
        u -= node_rate[node];
      }
      u = std::min(u, node_rate[node]);
      to = rates.choose_target(node, x[node], pressure[node], u);
    }
    const int from = x[node];
    x[node] = to;
    enter(node);
    refresh(node);
    for (int d : rates.dependents(node)) refresh(d);
    log.events.push_back({t, node, from, to});
  }
  return log;
}

/// Empirical label frequencies per grid time and node.
struct Occupancy {
  std::vector<double> grid;
  int nodes = 0;
  int states = 0;
  std::size_t runs = 0;
  std::vector<std::uint32_t> counts;  // [time][node][state]

  double frequency(std::size_t t, int node, int state) const {
    return static_cast<double>(counts[(t * nodes + node) * states + state]) / runs;
  }
  /// Frequency of any label in [first, last].
  double frequency_range(std::size_t t, int node, int first, int last) const {
    double f = 0.0;
    for (int s = first; s <= last; ++s) f += frequency(t, node, s);
    return f;
  }
};

/// Runs `runs` independent simulations with seeds derive_seed(seed, r) and
/// tallies labels on the grid. The reduction sums integer counts, so the
/// result does not depend on the number of jobs.
template <typename Simulate>
Occupancy ensemble_with(int nodes, int states, double horizon, std::size_t runs,
                        std::uint64_t seed, const std::vector<double>& grid,
                        unsigned jobs, Simulate&& simulate) {
  if (runs < 1) throw InputError("ensemble: need at least one run");
  for (double g : grid) {
    if (g < 0.0 || g > horizon) throw InputError("ensemble: grid time outside [0, horizon]");
  }
  if (!std::is_sorted(grid.begin(), grid.end())) throw InputError("ensemble: grid must be sorted");
  Occupancy occ{grid, nodes, states, runs,
                std::vector<std::uint32_t>(grid.size() * nodes * states, 0)};
  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(runs)));
  std::vector<std::vector<std::uint32_t>> partial(workers, std::vector<std::uint32_t>(occ.counts.size(), 0));
  parallel_for(workers, workers, [&](std::size_t w) {
    auto& tally = partial[w];
    for (std::size_t r = w; r < runs; r += workers) {
      Rng rng = make_rng(seed, r);
      const EventLog log = simulate(rng);
      NetworkState x = log.initial;
      std::size_t next = 0;
      for (std::size_t g = 0; g < grid.size(); ++g) {
        while (next < log.events.size() && log.events[next].time <= grid[g]) {
          x[log.events[next].node] = log.events[next].to;
          ++next;
        }
        for (int i = 0; i < nodes; ++i) ++tally[(g * nodes + i) * states + x[i]];
      }
    }
  });
  for (const auto& tally : partial) {
    for (std::size_t k = 0; k < tally.size(); ++k) occ.counts[k] += tally[k];
  }
  return occ;
}

inline Occupancy ensemble(const Model& model, const NetworkState& init, double horizon,
                          std::size_t runs, std::uint64_t seed,
                          const std::vector<double>& grid, unsigned jobs = 1) {
  require_valid(model);
  check_network_state(model, init);
  return ensemble_with(model.node_count(), model.states_per_node(), horizon, runs, seed, grid,
                       jobs, [&](Rng& rng) { return simulate_ctmc(model, init, horizon, rng); });
}

inline Occupancy ensemble_semi_markov(const SemiMarkovSpec& spec, const NetworkState& init,
                                      double horizon, std::size_t runs, std::uint64_t seed,
                                      const std::vector<double>& grid, unsigned jobs = 1) {
  validate_semi_markov(spec);
  check_network_state(spec.model, init);
  return ensemble_with(spec.model.node_count(), spec.model.states_per_node(), horizon, runs,
                       seed, grid, jobs,
                       [&](Rng& rng) { return simulate_semi_markov(spec, init, horizon, rng); });
}

/// Uniform grid 0, spacing, 2 spacing, ... up to horizon.
inline std::vector<double> uniform_grid(double horizon, double spacing = 0.5) {
  std::vector<double> g;
  const int count = static_cast<int>(std::floor(horizon / spacing + 1e-9));
  for (int k = 0; k <= count; ++k) g.push_back(k * spacing);
  return g;
}

/// Draws an initial network state from per-node mean-field probabilities.
inline NetworkState sample_network_state(const Model& model, const std::vector<Vector>& probs,
                                         Rng& rng) {
  NetworkState x(model.node_count());
  for (int i = 0; i < model.node_count(); ++i) {
    std::discrete_distribution<int> d(probs[i].data(), probs[i].data() + probs[i].size());
    x[i] = d(rng);
  }
  return x;
}

}  // namespace siv
