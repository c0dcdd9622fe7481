#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "siv/errors.hpp"
#include "siv/random.hpp"

namespace siv {

/// A directed edge `from -> to`.
struct Edge {
  int from = 0;
  int to = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Directed contact network on nodes 0..N-1, stored densely.
///
/// adjacency(j, i) == 1 means that there is an edge from i to j, so the
/// in-neighbors of i are the j with adjacency(i, j) == 1. Immutable after
/// construction.
class Graph {
 public:
  Graph() = default;

  Graph(int node_count, const std::vector<Edge>& edges) : n_(node_count) {
    if (node_count <= 0) throw InputError("graph: node count must be positive");
    adjacency_.assign(static_cast<std::size_t>(n_) * n_, 0);
    for (const auto& e : edges) {
      if (e.from < 0 || e.from >= n_ || e.to < 0 || e.to >= n_) {
        throw InputError("graph: edge endpoint out of range (" +
                         std::to_string(e.from) + ", " + std::to_string(e.to) +
                         ") for " + std::to_string(n_) + " nodes");
      }
      if (e.from == e.to) {
        throw InputError("graph: self-loop on node " + std::to_string(e.from));
      }
      adjacency_[index(e.to, e.from)] = 1;
    }
    in_.resize(n_);
    out_.resize(n_);
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < n_; ++j) {
        if (adjacency(i, j)) in_[i].push_back(j);
        if (adjacency(j, i)) out_[i].push_back(j);
      }
    }
  }

  int node_count() const { return n_; }

  /// Entry a_{row,col}; 1 iff there is an edge col -> row.
  int adjacency(int row, int col) const { return adjacency_[index(row, col)]; }

  bool has_edge(int from, int to) const { return adjacency(to, from) != 0; }

  const std::vector<int>& in_neighbors(int i) const { return in_[i]; }
  const std::vector<int>& out_neighbors(int i) const { return out_[i]; }

  std::size_t edge_count() const {
    return static_cast<std::size_t>(
        std::count(adjacency_.begin(), adjacency_.end(), std::uint8_t{1}));
  }

  /// Edges in (from, to) lexicographic order.
  std::vector<Edge> edges() const {
    std::vector<Edge> result;
    for (int i = 0; i < n_; ++i) {
      for (int j : out_[i]) result.push_back({i, j});
    }
    return result;
  }

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.n_ == b.n_ && a.adjacency_ == b.adjacency_;
  }

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * n_ + col;
  }

  int n_ = 0;
  std::vector<std::uint8_t> adjacency_;
  std::vector<std::vector<int>> in_;
  std::vector<std::vector<int>> out_;
};

inline Graph build_graph(int node_count, const std::vector<Edge>& edges) {
  return Graph(node_count, edges);
}

/// Directed Erdos-Renyi graph: every ordered pair (i, j), i != j, gets an
/// edge independently with the given probability.
inline Graph erdos_renyi(int node_count, double edge_probability,
                         std::uint64_t seed) {
  if (node_count < 1) throw InputError("erdos_renyi: need at least one node");
  if (!(edge_probability >= 0.0 && edge_probability <= 1.0)) {
    throw InputError("erdos_renyi: probability must lie in [0, 1]");
  }
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Edge> edges;
  for (int i = 0; i < node_count; ++i) {
    for (int j = 0; j < node_count; ++j) {
      if (i == j) continue;
      if (unit(rng) < edge_probability) edges.push_back({i, j});
    }
  }
  return Graph(node_count, edges);
}

namespace detail {

inline std::vector<char> reachable_from(const Graph& g, int source,
                                        bool reverse) {
  std::vector<char> seen(g.node_count(), 0);
  std::vector<int> frontier{source};
  seen[source] = 1;
  while (!frontier.empty()) {
    const int v = frontier.back();
    frontier.pop_back();
    const auto& next = reverse ? g.in_neighbors(v) : g.out_neighbors(v);
    for (int w : next) {
      if (!seen[w]) {
        seen[w] = 1;
        frontier.push_back(w);
      }
    }
  }
  return seen;
}

}  // namespace detail

/// Forward and backward reachability from node 0.
inline bool is_strongly_connected(const Graph& g) {
  if (g.node_count() <= 1) return true;
  const auto fwd = detail::reachable_from(g, 0, false);
  const auto bwd = detail::reachable_from(g, 0, true);
  for (int i = 0; i < g.node_count(); ++i) {
    if (!fwd[i] || !bwd[i]) return false;
  }
  return true;
}

/// Parses an edge list: one `from to` pair per line, `#` starts a comment,
/// an optional `nodes N` line fixes the node count (otherwise max index + 1).
inline Graph read_edge_list(std::istream& in) {
  std::vector<Edge> edges;
  int declared = -1;
  int max_index = -1;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string first;
    if (!(fields >> first)) continue;
    auto fail = [&] {
      throw InputError("edge list: malformed line " + std::to_string(line_no));
    };
    if (first == "nodes") {
      if (!(fields >> declared) || declared <= 0) fail();
      continue;
    }
    Edge e;
    try {
      std::size_t used = 0;
      e.from = std::stoi(first, &used);
      if (used != first.size()) fail();
    } catch (const std::logic_error&) {
      fail();
    }
    if (!(fields >> e.to)) fail();
    std::string extra;
    if (fields >> extra) fail();
    max_index = std::max({max_index, e.from, e.to});
    edges.push_back(e);
  }
  const int n = declared > 0 ? declared : max_index + 1;
  if (n <= 0) throw InputError("edge list: no nodes");
  return Graph(n, edges);
}

inline Graph read_edge_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open edge list '" + path + "'");
  return read_edge_list(in);
}

inline void write_edge_list(std::ostream& out, const Graph& g) {
  out << "nodes " << g.node_count() << '\n';
  for (const auto& e : g.edges()) out << e.from << ' ' << e.to << '\n';
}

}  // namespace siv
