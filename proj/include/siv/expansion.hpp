#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "siv/errors.hpp"
#include "siv/model.hpp"
#include "siv/phasetype.hpp"

namespace siv {

/// Replaces the exposed state of an SEIV-shaped model by a phase-type chain.
///
/// The base model must have m = 2, with I^1 the exposed state and I^2 the
/// infected state: I^1 may only leave towards I^2, it must not be
/// contagious, and I^2 must not return to I^1. The incubation law must
/// start in its first phase (apply densify() first otherwise).
///
/// The result has m = p + 1 infectious states. Phases 1..p carry the
/// sub-generator off-diagonals as internal rates and exit into I^{p+1} with
/// the exit rates. Only I^{p+1} infects (with the base I^2 rates) and only
/// I^{p+1} recovers (with the base I^2 recovery rates). The base exposed
/// rate eps^{12} is discarded.
inline Model expand_transition(const Model& base, const PhaseType& incubation) {
  require_valid(base);
  validate_phase_type(incubation);
  if (!has_unit_initial(incubation)) {
    throw InputError(
        "expand_transition: incubation law must start in phase 1; apply densify() first");
  }
  if (base.m() != 2) {
    throw InputError("expand_transition: base model must have exactly 2 infectious states");
  }
  const int p = incubation.phases();
  const int m = p + 1;
  const int n = base.n();
  // Row sums of a fitted sub-generator can come out as -1e-17 where the
  // exit rate is zero; such round-off is clamped to 0.
  const Vector exits = incubation.exit_rates().cwiseMax(0.0);

  std::vector<NodeRates> nodes;
  nodes.reserve(base.node_count());
  for (int i = 0; i < base.node_count(); ++i) {
    const auto& r = base.node(i);
    const std::string at = " (node " + std::to_string(i) + ")";
    if (r.recovery.row(0).cwiseAbs().sum() != 0.0) {
      throw InputError("expand_transition: exposed state must not recover directly" + at);
    }
    if (r.infectious_internal(1, 0) != 0.0) {
      throw InputError("expand_transition: infected state must not return to exposed" + at);
    }
    NodeRates out = NodeRates::zeros(m, n);
    for (int k = 0; k < p; ++k) {
      for (int k2 = 0; k2 < p; ++k2) {
        if (k2 != k) out.infectious_internal(k, k2) = std::max(0.0, incubation.subgenerator(k, k2));
      }
      out.infectious_internal(k, p) = exits(k);
    }
    out.recovery.row(p) = r.recovery.row(1);
    out.vigilant_internal = r.vigilant_internal;
    out.susceptibility = r.susceptibility;
    out.vigilance = r.vigilance;
    nodes.push_back(std::move(out));
  }
  std::vector<InfectionEdge> edges;
  edges.reserve(base.edges().size());
  for (const auto& e : base.edges()) {
    if (e.beta(0) != 0.0) {
      throw InputError("expand_transition: exposed state must not be contagious (edge " +
                       std::to_string(e.from) + "->" + std::to_string(e.to) + ")");
    }
    Vector b = Vector::Zero(m);
    b(p) = e.beta(1);
    edges.push_back({e.from, e.to, std::move(b)});
  }
  return Model(base.graph(), m, n, std::move(nodes), std::move(edges));
}

/// The m x m matrix whose off-diagonals are node i's internal infectious
/// rates and whose diagonal makes the infectious-class rows sum to zero
/// (ignoring recovery). When m = p + 1 and I^m is absorbing within the
/// class, its leading p x p block is the sub-generator of the time from
/// I^1 to I^m.
inline Matrix infectious_class_generator(const Model& model, int i) {
  const Matrix& e = model.node(i).infectious_internal;
  Matrix s = e;
  for (int k = 0; k < e.rows(); ++k) s(k, k) = -e.row(k).sum();
  return s;
}

}  // namespace siv
