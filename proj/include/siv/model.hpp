#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "siv/errors.hpp"
#include "siv/graph.hpp"
#include "siv/linalg.hpp"
#include "siv/random.hpp"

namespace siv {

/// Per-node transition rates, all in 1/day.
struct NodeRates {
  Matrix recovery;             // m x n, I^k -> V^l
  Matrix infectious_internal;  // m x m, I^k -> I^k', zero diagonal
  Matrix vigilant_internal;    // n x n, V^l -> V^l', zero diagonal
  Vector susceptibility;       // n, V^l -> S
  Vector vigilance;            // n, S -> V^l

  static NodeRates zeros(int m, int n) {
    return {Matrix::Zero(m, n), Matrix::Zero(m, m), Matrix::Zero(n, n),
            Vector::Zero(n), Vector::Zero(n)};
  }
};

/// Influence of `from` (in state I^k, entry k of beta) on the S -> I^1
/// rate of `to`.
struct InfectionEdge {
  int from = 0;
  int to = 0;
  Vector beta;
};

/// One instance of the networked model: a graph, m infectious and n
/// vigilant states, heterogeneous per-node rates and per-edge infection
/// rates. Node states are indexed S = 0, I^k = k (1..m), V^l = m + l.
class Model {
 public:
  Model(Graph graph, int m, int n, std::vector<NodeRates> nodes,
        std::vector<InfectionEdge> edges)
      : graph_(std::move(graph)),
        m_(m),
        n_(n),
        nodes_(std::move(nodes)),
        edges_(std::move(edges)) {
    if (m <= 0 || n <= 0) {
      throw InputError("model: need m > 0 infectious and n > 0 vigilant states");
    }
    if (static_cast<int>(nodes_.size()) != graph_.node_count()) {
      throw InputError("model: " + std::to_string(nodes_.size()) +
                       " node parameter sets for " +
                       std::to_string(graph_.node_count()) + " graph nodes");
    }
    incoming_.resize(graph_.node_count());
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      const auto& edge = edges_[e];
      if (edge.to >= 0 && edge.to < node_count() && edge.from >= 0 &&
          edge.from < node_count()) {
        incoming_[edge.to].push_back(static_cast<int>(e));
      }
    }
  }

  const Graph& graph() const { return graph_; }
  int node_count() const { return graph_.node_count(); }
  int m() const { return m_; }
  int n() const { return n_; }
  int states_per_node() const { return 1 + m_ + n_; }

  const NodeRates& node(int i) const { return nodes_[i]; }
  const std::vector<NodeRates>& nodes() const { return nodes_; }
  const std::vector<InfectionEdge>& edges() const { return edges_; }

  /// Indices into edges() of the infection edges pointing at node i.
  const std::vector<int>& incoming(int i) const { return incoming_[i]; }

  /// beta_ij as a length-m vector (zero when no edge j -> i is stored).
  Vector beta(int i, int j) const {
    Vector b = Vector::Zero(m_);
    for (int e : incoming_[i]) {
      if (edges_[e].from == j && edges_[e].beta.size() == m_) b += edges_[e].beta;
    }
    return b;
  }

  Model with_scaled_beta(double factor) const {
    auto edges = edges_;
    for (auto& e : edges) e.beta *= factor;
    return Model(graph_, m_, n_, nodes_, std::move(edges));
  }

  Model with_scaled_recovery(double factor) const {
    auto nodes = nodes_;
    for (auto& r : nodes) r.recovery *= factor;
    return Model(graph_, m_, n_, std::move(nodes), edges_);
  }

 private:
  Graph graph_;
  int m_;
  int n_;
  std::vector<NodeRates> nodes_;
  std::vector<InfectionEdge> edges_;
  std::vector<std::vector<int>> incoming_;
};

inline std::string state_label(int state, int m) {
  if (state == 0) return "S";
  if (state <= m) return "I" + std::to_string(state);
  return "V" + std::to_string(state - m);
}

/// Parses "S", "I<k>", "V<l>" back into a state index.
inline int parse_state_label(const std::string& label, int m, int n) {
  if (label == "S") return 0;
  if (label.size() >= 2 && (label[0] == 'I' || label[0] == 'V')) {
    int k = 0;
    try {
      k = std::stoi(label.substr(1));
    } catch (const std::logic_error&) {
      k = 0;
    }
    if (label[0] == 'I' && k >= 1 && k <= m) return k;
    if (label[0] == 'V' && k >= 1 && k <= n) return m + k;
  }
  throw InputError("unknown state label '" + label + "'");
}

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> warnings;
  std::vector<std::string> errors;
};

namespace detail {

inline bool any_negative(const Matrix& a) {
  return a.size() > 0 && a.minCoeff() < 0.0;
}

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

}  // namespace detail

/// Checks signs, shapes, zero diagonals and edge consistency. Absorbing
/// vigilant states are reported as warnings only.
inline ValidationReport validate_model(const Model& model) {
  ValidationReport report;
  const int m = model.m();
  const int n = model.n();
  auto err = [&](std::string s) { report.errors.push_back(std::move(s)); };
  auto warn = [&](std::string s) { report.warnings.push_back(std::move(s)); };

  for (int i = 0; i < model.node_count(); ++i) {
    const auto& r = model.node(i);
    const std::string at = " at node " + std::to_string(i);
    const bool shapes_ok =
        r.recovery.rows() == m && r.recovery.cols() == n &&
        r.infectious_internal.rows() == m && r.infectious_internal.cols() == m &&
        r.vigilant_internal.rows() == n && r.vigilant_internal.cols() == n &&
        r.susceptibility.size() == n && r.vigilance.size() == n;
    if (!shapes_ok) {
      err("dimension mismatch" + at);
      continue;
    }
    const bool finite = detail::all_finite(r.recovery) &&
                        detail::all_finite(r.infectious_internal) &&
                        detail::all_finite(r.vigilant_internal) &&
                        detail::all_finite(r.susceptibility) &&
                        detail::all_finite(r.vigilance);
    if (!finite) err("non-finite rate" + at);
    if (detail::any_negative(r.recovery) ||
        detail::any_negative(r.infectious_internal) ||
        detail::any_negative(r.vigilant_internal) ||
        detail::any_negative(r.susceptibility) ||
        detail::any_negative(r.vigilance)) {
      err("negative rate" + at);
    }
    if (r.infectious_internal.diagonal().cwiseAbs().maxCoeff() != 0.0) {
      err("nonzero diagonal in infectious internal rates" + at);
    }
    if (r.vigilant_internal.diagonal().cwiseAbs().maxCoeff() != 0.0) {
      err("nonzero diagonal in vigilant internal rates" + at);
    }
    for (int l = 0; l < n; ++l) {
      if (r.susceptibility(l) == 0.0 &&
          r.vigilant_internal.row(l).cwiseAbs().sum() == 0.0) {
        warn("absorbing vigilant state V" + std::to_string(l + 1) + at);
      }
    }
    if (r.vigilance.cwiseAbs().sum() == 0.0 &&
        r.susceptibility.cwiseAbs().sum() == 0.0) {
      warn("no exchange between S and the vigilant class" + at);
    }
  }

  for (const auto& e : model.edges()) {
    const std::string at =
        " on edge " + std::to_string(e.from) + "->" + std::to_string(e.to);
    if (e.from < 0 || e.from >= model.node_count() || e.to < 0 ||
        e.to >= model.node_count()) {
      err("edge endpoint out of range" + at);
      continue;
    }
    if (!model.graph().has_edge(e.from, e.to)) {
      err("infection rate on a non-edge" + at);
    }
    if (e.beta.size() != m) {
      err("dimension mismatch in beta" + at);
      continue;
    }
    if (!e.beta.allFinite()) err("non-finite rate" + at);
    if (detail::any_negative(e.beta)) err("negative rate" + at);
  }
  report.ok = report.errors.empty();
  return report;
}

/// Throws InputError listing every validation error.
inline void require_valid(const Model& model) {
  const auto report = validate_model(model);
  if (report.ok) return;
  std::string msg = "invalid model:";
  for (const auto& e : report.errors) msg += " " + e + ";";
  throw InputError(msg);
}

/// Same rates on every node and the same beta on every graph edge.
inline Model homogeneous_model(const Graph& graph, const NodeRates& rates,
                               const Vector& beta) {
  std::vector<NodeRates> nodes(graph.node_count(), rates);
  std::vector<InfectionEdge> edges;
  for (const auto& e : graph.edges()) edges.push_back({e.from, e.to, beta});
  return Model(graph, static_cast<int>(rates.recovery.rows()),
               static_cast<int>(rates.recovery.cols()), std::move(nodes),
               std::move(edges));
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Entry-wise uniform sampling bounds for one model instance.
struct RateRanges {
  std::vector<std::vector<Interval>> recovery;             // m x n
  std::vector<std::vector<Interval>> infectious_internal;  // m x m
  std::vector<std::vector<Interval>> vigilant_internal;    // n x n
  std::vector<Interval> susceptibility;                    // n
  std::vector<Interval> vigilance;                         // n
  std::vector<Interval> beta;                              // m

  /// Every entry of every parameter set to [0, 0].
  static RateRanges zeros(int m, int n) {
    RateRanges r;
    r.recovery.assign(m, std::vector<Interval>(n));
    r.infectious_internal.assign(m, std::vector<Interval>(m));
    r.vigilant_internal.assign(n, std::vector<Interval>(n));
    r.susceptibility.assign(n, {});
    r.vigilance.assign(n, {});
    r.beta.assign(m, {});
    return r;
  }
};

/// Draws one rate per node (and per edge for beta) uniformly from the
/// given ranges. Draw order: nodes in index order (D, E, M row-major, then
/// gamma, theta), then graph edges in (from, to) order.
inline Model sample_model_from_ranges(const Graph& graph, int m, int n,
                                      const RateRanges& ranges,
                                      std::uint64_t seed) {
  auto check = [](bool ok, const char* what) {
    if (!ok) throw InputError(std::string("ranges: bad shape for ") + what);
  };
  auto rows_ok = [](const std::vector<std::vector<Interval>>& a, int r, int c) {
    if (static_cast<int>(a.size()) != r) return false;
    for (const auto& row : a) {
      if (static_cast<int>(row.size()) != c) return false;
    }
    return true;
  };
  check(rows_ok(ranges.recovery, m, n), "D");
  check(rows_ok(ranges.infectious_internal, m, m), "E");
  check(rows_ok(ranges.vigilant_internal, n, n), "M");
  check(static_cast<int>(ranges.susceptibility.size()) == n, "gamma");
  check(static_cast<int>(ranges.vigilance.size()) == n, "theta");
  check(static_cast<int>(ranges.beta.size()) == m, "beta");

  Rng rng(seed);
  auto draw = [&](const Interval& iv) { return uniform(rng, iv.lo, iv.hi); };
  auto draw_matrix = [&](const std::vector<std::vector<Interval>>& iv, int r,
                         int c) {
    Matrix out(r, c);
    for (int a = 0; a < r; ++a) {
      for (int b = 0; b < c; ++b) out(a, b) = draw(iv[a][b]);
    }
    return out;
  };
  std::vector<NodeRates> nodes;
  nodes.reserve(graph.node_count());
  for (int i = 0; i < graph.node_count(); ++i) {
    NodeRates r;
    r.recovery = draw_matrix(ranges.recovery, m, n);
    r.infectious_internal = draw_matrix(ranges.infectious_internal, m, m);
    r.vigilant_internal = draw_matrix(ranges.vigilant_internal, n, n);
    r.infectious_internal.diagonal().setZero();
    r.vigilant_internal.diagonal().setZero();
    r.susceptibility.resize(n);
    r.vigilance.resize(n);
    for (int l = 0; l < n; ++l) r.susceptibility(l) = draw(ranges.susceptibility[l]);
    for (int l = 0; l < n; ++l) r.vigilance(l) = draw(ranges.vigilance[l]);
    nodes.push_back(std::move(r));
  }
  std::vector<InfectionEdge> edges;
  for (const auto& e : graph.edges()) {
    Vector b(m);
    for (int k = 0; k < m; ++k) b(k) = draw(ranges.beta[k]);
    edges.push_back({e.from, e.to, std::move(b)});
  }
  return Model(graph, m, n, std::move(nodes), std::move(edges));
}

/// CTMC generator of node i alone with all infection rates removed, in
/// the state order (S, I^1..I^m, V^1..V^n). Rows sum to zero.
inline Matrix isolated_node_generator(const Model& model, int i) {
  const int m = model.m();
  const int n = model.n();
  const auto& r = model.node(i);
  Matrix g = Matrix::Zero(1 + m + n, 1 + m + n);
  for (int l = 0; l < n; ++l) {
    g(0, 1 + m + l) = r.vigilance(l);
    g(1 + m + l, 0) = r.susceptibility(l);
    for (int l2 = 0; l2 < n; ++l2) {
      if (l2 != l) g(1 + m + l, 1 + m + l2) = r.vigilant_internal(l, l2);
    }
  }
  for (int k = 0; k < m; ++k) {
    for (int k2 = 0; k2 < m; ++k2) {
      if (k2 != k) g(1 + k, 1 + k2) = r.infectious_internal(k, k2);
    }
    for (int l = 0; l < n; ++l) g(1 + k, 1 + m + l) = r.recovery(k, l);
  }
  for (int s = 0; s < g.rows(); ++s) g(s, s) = -g.row(s).sum();
  return g;
}

}  // namespace siv
