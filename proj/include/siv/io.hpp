#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "siv/errors.hpp"
#include "siv/graph.hpp"
#include "siv/meanfield.hpp"
#include "siv/model.hpp"
#include "siv/phasetype.hpp"
#include "siv/stochastic.hpp"

namespace siv {

using Json = nlohmann::ordered_json;

/// Numbers in text outputs carry 12 significant digits.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Writes to `path.tmp` and renames over `path`.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw InputError("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw InputError(what + ": " + e.what());
  }
}

// ---- matrices -------------------------------------------------------------

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

inline Json to_json(const Matrix& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    a.push_back(std::move(row));
  }
  return a;
}

inline Vector vector_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw InputError(what + ": expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw InputError(what + ": expected numbers");
    v(static_cast<Eigen::Index>(k)) = j[k].get<double>();
  }
  return v;
}

inline Matrix matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) throw InputError(what + ": expected an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 && j[0].is_array() ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Vector row = vector_from_json(j[r], what);
    if (row.size() != cols) throw InputError(what + ": ragged matrix");
    m.row(r) = row.transpose();
  }
  return m;
}

// ---- graph ------------------------------------------------------------------

inline Json graph_to_json(const Graph& g) {
  Json edges = Json::array();
  for (const auto& e : g.edges()) edges.push_back(Json::array({e.from, e.to}));
  return Json{{"nodes", g.node_count()}, {"edges", std::move(edges)}};
}

/// Inline {"nodes": N, "edges": [[from, to], ...]} or a path to an edge
/// list, resolved against `base_dir`.
inline Graph graph_from_json(const Json& j, const std::filesystem::path& base_dir) {
  if (j.is_string()) {
    std::filesystem::path p = j.get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    return read_edge_list_file(p.string());
  }
  if (!j.is_object() || !j.contains("edges")) {
    throw InputError("model: 'graph' must be an edge-list path or {nodes, edges}");
  }
  std::vector<Edge> edges;
  int max_index = -1;
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 2) throw InputError("model: graph edges are [from, to] pairs");
    Edge edge{e[0].get<int>(), e[1].get<int>()};
    max_index = std::max({max_index, edge.from, edge.to});
    edges.push_back(edge);
  }
  const int n = j.contains("nodes") ? j.at("nodes").get<int>() : max_index + 1;
  return Graph(n, edges);
}

// ---- model ------------------------------------------------------------------

namespace detail {

inline bool is_interval(const Json& j) {
  return j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number();
}

inline Interval interval_from_json(const Json& j, const std::string& what) {
  if (!is_interval(j)) throw InputError("ranges: " + what + " entries must be [lo, hi]");
  Interval iv{j[0].get<double>(), j[1].get<double>()};
  if (iv.hi < iv.lo) throw InputError("ranges: " + what + " has hi < lo");
  return iv;
}

inline std::vector<Interval> interval_vector(const Json& j, int size, const std::string& what) {
  if (is_interval(j)) return std::vector<Interval>(size, interval_from_json(j, what));
  if (!j.is_array() || static_cast<int>(j.size()) != size) {
    throw InputError("ranges: " + what + " must be [lo, hi] or " + std::to_string(size) +
                     " intervals");
  }
  std::vector<Interval> out;
  for (const auto& e : j) out.push_back(interval_from_json(e, what));
  return out;
}

inline std::vector<std::vector<Interval>> interval_matrix(const Json& j, int rows, int cols,
                                                          const std::string& what) {
  if (is_interval(j)) {
    return std::vector<std::vector<Interval>>(rows,
                                              std::vector<Interval>(cols, interval_from_json(j, what)));
  }
  if (!j.is_array() || static_cast<int>(j.size()) != rows) {
    throw InputError("ranges: " + what + " must be [lo, hi] or a " + std::to_string(rows) +
                     "-row matrix of intervals");
  }
  std::vector<std::vector<Interval>> out;
  for (const auto& row : j) out.push_back(interval_vector(row, cols, what));
  return out;
}

inline NodeRates node_rates_from_json(const Json& j, int m, int n) {
  NodeRates r = NodeRates::zeros(m, n);
  if (j.contains("D")) r.recovery = matrix_from_json(j.at("D"), "D");
  if (j.contains("E")) r.infectious_internal = matrix_from_json(j.at("E"), "E");
  if (j.contains("M")) r.vigilant_internal = matrix_from_json(j.at("M"), "M");
  if (j.contains("gamma")) r.susceptibility = vector_from_json(j.at("gamma"), "gamma");
  if (j.contains("theta")) r.vigilance = vector_from_json(j.at("theta"), "theta");
  return r;
}

}  // namespace detail

inline RateRanges ranges_from_json(const Json& j, int m, int n) {
  RateRanges r = RateRanges::zeros(m, n);
  if (j.contains("D")) r.recovery = detail::interval_matrix(j.at("D"), m, n, "D");
  if (j.contains("E")) r.infectious_internal = detail::interval_matrix(j.at("E"), m, m, "E");
  if (j.contains("M")) r.vigilant_internal = detail::interval_matrix(j.at("M"), n, n, "M");
  if (j.contains("gamma")) r.susceptibility = detail::interval_vector(j.at("gamma"), n, "gamma");
  if (j.contains("theta")) r.vigilance = detail::interval_vector(j.at("theta"), n, "theta");
  if (j.contains("beta")) r.beta = detail::interval_vector(j.at("beta"), m, "beta");
  return r;
}

/// Builds a model from its JSON document. Either explicit per-node
/// parameters (`nodes`, `edges`) or sampling bounds (`ranges`, `seed`).
inline Model model_from_json(const Json& j, const std::filesystem::path& base_dir = ".") {
  try {
    const int m = j.at("m").get<int>();
    const int n = j.at("n").get<int>();
    if (m <= 0 || n <= 0) throw InputError("model: m and n must be positive");
    Graph graph = graph_from_json(j.at("graph"), base_dir);
    if (j.contains("ranges")) {
      const auto seed = j.value("seed", std::uint64_t{0});
      return sample_model_from_ranges(graph, m, n, ranges_from_json(j.at("ranges"), m, n), seed);
    }
    const auto& jn = j.at("nodes");
    if (!jn.is_array() || jn.empty()) throw InputError("model: 'nodes' must be a non-empty array");
    std::vector<NodeRates> nodes;
    if (jn.size() == 1) {
      nodes.assign(graph.node_count(), detail::node_rates_from_json(jn[0], m, n));
    } else {
      for (const auto& e : jn) nodes.push_back(detail::node_rates_from_json(e, m, n));
    }
    std::vector<InfectionEdge> edges;
    if (j.contains("edges")) {
      for (const auto& e : j.at("edges")) {
        edges.push_back({e.at("from").get<int>(), e.at("to").get<int>(),
                         vector_from_json(e.at("beta"), "beta")});
      }
    } else if (j.contains("beta")) {
      const Vector beta = vector_from_json(j.at("beta"), "beta");
      for (const auto& e : graph.edges()) edges.push_back({e.from, e.to, beta});
    }
    return Model(std::move(graph), m, n, std::move(nodes), std::move(edges));
  } catch (const Json::exception& e) {
    throw InputError(std::string("model: ") + e.what());
  }
}

inline Model read_model_file(const std::filesystem::path& path) {
  return model_from_json(parse_json(read_text(path), path.string()), path.parent_path());
}

inline Json model_to_json(const Model& model) {
  Json nodes = Json::array();
  for (const auto& r : model.nodes()) {
    nodes.push_back(Json{{"D", to_json(r.recovery)},
                         {"E", to_json(r.infectious_internal)},
                         {"M", to_json(r.vigilant_internal)},
                         {"gamma", to_json(r.susceptibility)},
                         {"theta", to_json(r.vigilance)}});
  }
  Json edges = Json::array();
  for (const auto& e : model.edges()) {
    edges.push_back(Json{{"from", e.from}, {"to", e.to}, {"beta", to_json(e.beta)}});
  }
  return Json{{"m", model.m()},
              {"n", model.n()},
              {"graph", graph_to_json(model.graph())},
              {"nodes", std::move(nodes)},
              {"edges", std::move(edges)}};
}

/// Initial mean-field state: an array of per-node [S, I1.., V1..] rows, or
/// a single row applied to every node.
inline MeanFieldState mean_field_state_from_json(const Json& j, const Model& model) {
  if (!j.is_array() || j.empty()) throw InputError("initial state: expected a non-empty array");
  const bool broadcast = j[0].is_number();
  const int rows = broadcast ? 1 : static_cast<int>(j.size());
  if (rows != 1 && rows != model.node_count()) {
    throw InputError("initial state: expected 1 or " + std::to_string(model.node_count()) + " rows");
  }
  MeanFieldState st(model.node_count(), model.m(), model.n());
  for (int i = 0; i < model.node_count(); ++i) {
    const Vector row = vector_from_json(broadcast ? j : j[rows == 1 ? 0 : i], "initial state");
    if (row.size() != model.states_per_node()) {
      throw InputError("initial state: row length must be 1 + m + n");
    }
    st.S(i) = row(0);
    for (int k = 0; k < model.m(); ++k) st.I(i, k) = row(1 + k);
    for (int l = 0; l < model.n(); ++l) st.V(i, l) = row(1 + model.m() + l);
  }
  return st;
}

// ---- phase-type -----------------------------------------------------------

inline Json phase_type_to_json(const PhaseType& ph) {
  return Json{{"p", ph.phases()}, {"phi", to_json(ph.initial)}, {"S", to_json(ph.subgenerator)}};
}

inline PhaseType phase_type_from_json(const Json& j) {
  try {
    PhaseType ph{vector_from_json(j.at("phi"), "phi"), matrix_from_json(j.at("S"), "S")};
    if (j.contains("p") && j.at("p").get<int>() != ph.phases()) {
      throw InputError("phase-type: 'p' disagrees with the length of 'phi'");
    }
    validate_phase_type(ph);
    return ph;
  } catch (const Json::exception& e) {
    throw InputError(std::string("phase-type: ") + e.what());
  }
}

// ---- CSV --------------------------------------------------------------------

/// Long-format trajectory: t,node,S,I1..Im,V1..Vn.
inline std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream out;
  if (traj.states.empty()) return "t,node,S\n";
  const int m = traj.states[0].m();
  const int n = traj.states[0].n();
  out << "t,node,S";
  for (int k = 1; k <= m; ++k) out << ",I" << k;
  for (int l = 1; l <= n; ++l) out << ",V" << l;
  out << '\n';
  for (std::size_t s = 0; s < traj.states.size(); ++s) {
    const auto& st = traj.states[s];
    for (int i = 0; i < st.node_count(); ++i) {
      out << format_number(traj.times[s]) << ',' << i << ',' << format_number(st.S(i));
      for (int k = 0; k < m; ++k) out << ',' << format_number(st.I(i, k));
      for (int l = 0; l < n; ++l) out << ',' << format_number(st.V(i, l));
      out << '\n';
    }
  }
  return out.str();
}

struct ProbabilitySummary {
  double min = 0.0;
  double avg = 0.0;
  double max = 0.0;
};

inline ProbabilitySummary summarize(const std::vector<double>& values) {
  ProbabilitySummary s{values.empty() ? 0.0 : values[0], 0.0, values.empty() ? 0.0 : values[0]};
  for (double v : values) {
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
    s.avg += v;
  }
  if (!values.empty()) s.avg /= values.size();
  return s;
}

/// t,P_min,P_avg,P_max of the infection probability across nodes.
inline std::string summary_csv(const Trajectory& traj) {
  std::ostringstream out;
  out << "t,P_min,P_avg,P_max\n";
  const auto p = infection_probability(traj);
  for (std::size_t s = 0; s < p.size(); ++s) {
    const auto sum = summarize(p[s]);
    out << format_number(traj.times[s]) << ',' << format_number(sum.min) << ','
        << format_number(sum.avg) << ',' << format_number(sum.max) << '\n';
  }
  return out.str();
}

inline std::string event_log_csv(const EventLog& log, int m) {
  std::ostringstream out;
  out << "t,node,from,to\n";
  for (const auto& e : log.events) {
    out << format_number(e.time) << ',' << e.node << ',' << state_label(e.from, m) << ','
        << state_label(e.to, m) << '\n';
  }
  return out.str();
}

inline std::string occupancy_csv(const Occupancy& occ, int m) {
  std::ostringstream out;
  out << "t,node,label,frequency\n";
  for (std::size_t g = 0; g < occ.grid.size(); ++g) {
    for (int i = 0; i < occ.nodes; ++i) {
      for (int s = 0; s < occ.states; ++s) {
        out << format_number(occ.grid[g]) << ',' << i << ',' << state_label(s, m) << ','
            << format_number(occ.frequency(g, i, s)) << '\n';
      }
    }
  }
  return out.str();
}

inline std::string matrix_csv(const Matrix& a) {
  std::ostringstream out;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
      if (c) out << ',';
      out << format_number(a(r, c));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace siv
