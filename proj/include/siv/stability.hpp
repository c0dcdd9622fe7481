#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "siv/errors.hpp"
#include "siv/linalg.hpp"
#include "siv/meanfield.hpp"
#include "siv/model.hpp"

namespace siv {

// Block assembly of the linear part of the reduced dynamics. Every block
// is oriented so that it acts on column vectors: xdot = W_xx x + ...
// Blocks within a node therefore carry the transposes of the internal
// rate matrices (I^k receives eps^{k'k} I^{k'}).

/// Nm x Nm matrix of infectious-to-infectious couplings.
inline Matrix assemble_wxx(const Model& model) {
  require_valid(model);
  const int m = model.m();
  const int N = model.node_count();
  Matrix w = Matrix::Zero(N * m, N * m);
  for (int i = 0; i < N; ++i) {
    const auto& r = model.node(i);
    w.block(i * m, i * m, m, m) = r.infectious_internal.transpose() -
                                  degree_matrix(r.infectious_internal) -
                                  degree_matrix(r.recovery);
    for (int e : model.incoming(i)) {
      const auto& edge = model.edges()[e];
      w.block(i * m, edge.from * m, 1, m) += edge.beta.transpose();
    }
  }
  return w;
}

/// Nn x Nn block-diagonal vigilant-to-vigilant matrix.
inline Matrix assemble_wyy(const Model& model) {
  require_valid(model);
  const int n = model.n();
  const int N = model.node_count();
  Matrix w = Matrix::Zero(N * n, N * n);
  for (int i = 0; i < N; ++i) {
    const auto& r = model.node(i);
    const Matrix theta_cols = r.vigilance * Eigen::RowVectorXd::Ones(n);
    w.block(i * n, i * n, n, n) = r.vigilant_internal.transpose() -
                                  degree_matrix(r.vigilant_internal) -
                                  theta_cols -
                                  Matrix(r.susceptibility.asDiagonal());
  }
  return w;
}

/// Nn x Nm block-diagonal infectious-to-vigilant matrix.
inline Matrix assemble_wyx(const Model& model) {
  require_valid(model);
  const int m = model.m();
  const int n = model.n();
  const int N = model.node_count();
  Matrix w = Matrix::Zero(N * n, N * m);
  for (int i = 0; i < N; ++i) {
    const auto& r = model.node(i);
    w.block(i * n, i * m, n, m) =
        r.recovery.transpose() - r.vigilance * Eigen::RowVectorXd::Ones(m);
  }
  return w;
}

/// Constant forcing of the vigilant class, (theta_i^1..theta_i^n) stacked.
inline Vector vigilant_forcing(const Model& model) {
  const int n = model.n();
  Vector h(model.node_count() * n);
  for (int i = 0; i < model.node_count(); ++i) h.segment(i * n, n) = model.node(i).vigilance;
  return h;
}

/// Relative pivot threshold below which a factorization counts as singular.
inline constexpr double kSingularPivot = 1e-12;

namespace detail {

// FullPivLU with a relative pivot check; returns nullopt when singular.
inline std::optional<Eigen::FullPivLU<Matrix>> factorize(const Matrix& q) {
  Eigen::FullPivLU<Matrix> lu(q);
  const Vector pivots = lu.matrixLU().diagonal().cwiseAbs();
  if (pivots.size() == 0) return lu;
  const double largest = pivots.maxCoeff();
  if (!(largest > 0.0) || pivots.minCoeff() < kSingularPivot * largest) {
    return std::nullopt;
  }
  return lu;
}

}  // namespace detail

/// Equilibrium of the vigilant class at x = 0: solves W_yy y + H_y = 0.
/// Returns the stacked y* (length N n).
inline Vector vigilant_equilibrium(const Model& model) {
  const int n = model.n();
  Vector ystar(model.node_count() * n);
  const Matrix wyy = assemble_wyy(model);
  for (int i = 0; i < model.node_count(); ++i) {
    const Matrix block = wyy.block(i * n, i * n, n, n);
    const auto lu = detail::factorize(block);
    if (!lu) {
      throw EquilibriumUndefined("vigilant block of node " + std::to_string(i) +
                                 " is singular (absorbing vigilant class)");
    }
    ystar.segment(i * n, n) = lu->solve(-model.node(i).vigilance);
  }
  return ystar;
}

/// Linearization of the infectious block at (x, y) = (0, y*): W_xx with the
/// neighbor blocks of node i scaled by 1 - sum_l Vbar_i^l.
inline Matrix assemble_qxx(const Model& model, const Vector& ystar) {
  const int m = model.m();
  const int n = model.n();
  if (ystar.size() != model.node_count() * n) {
    throw InputError("assemble_qxx: equilibrium vector has the wrong length");
  }
  Matrix q = assemble_wxx(model);
  for (int i = 0; i < model.node_count(); ++i) {
    const double scale = 1.0 - ystar.segment(i * n, n).sum();
    for (int j = 0; j < model.node_count(); ++j) {
      if (j != i) q.block(i * m, j * m, m, m) *= scale;
    }
  }
  return q;
}

struct HurwitzCertificate {
  bool hurwitz = false;
  /// Solution of Q z = -1 (empty when Q is singular).
  Vector z;
  /// max_i (Q z)_i; strictly negative when hurwitz.
  double margin = 0.0;
};

/// Decides whether a Metzler matrix is Hurwitz by solving Q z = -1 and
/// checking z > 0, which certifies Q z < 0 with a positive vector.
inline HurwitzCertificate metzler_hurwitz_certificate(const Matrix& q) {
  if (!is_metzler(q, 1e-12)) throw InputError("matrix is not Metzler");
  HurwitzCertificate cert;
  if (q.rows() == 0) {
    cert.hurwitz = true;
    return cert;
  }
  const auto lu = detail::factorize(q);
  if (!lu) return cert;
  const Vector ones = Vector::Ones(q.rows());
  cert.z = lu->solve(-ones);
  cert.margin = (q * cert.z).maxCoeff();
  cert.hurwitz = cert.z.minCoeff() > 0.0;
  return cert;
}

inline bool is_metzler_hurwitz(const Matrix& q) {
  return metzler_hurwitz_certificate(q).hurwitz;
}

namespace detail {

// Perron root of an irreducible nonnegative matrix with positive diagonal,
// bracketed by Collatz-Wielandt bounds min/max (A x)_i / x_i. Falls back
// to repeated squaring to sharpen the iterate when plain iteration stalls.
inline double perron_root(const Matrix& a, double tolerance, int max_iterations) {
  const auto n = a.rows();
  if (n == 1) return a(0, 0);
  Vector x = Vector::Ones(n);
  double lower = 0.0;
  double upper = 0.0;
  auto bounds = [&](const Vector& ax) {
    lower = (ax.array() / x.array()).minCoeff();
    upper = (ax.array() / x.array()).maxCoeff();
  };
  auto converged = [&] { return upper - lower <= tolerance * std::max(1.0, upper); };
  Matrix power;
  int squarings = 0;
  for (int it = 0; it < max_iterations; ++it) {
    const Vector ax = a * x;
    bounds(ax);
    if (converged()) return 0.5 * (lower + upper);
    if (it > 0 && it % 256 == 0 && squarings < 60) {
      // Push x toward the Perron vector with A^(2^k) x.
      if (squarings == 0) power = a / a.cwiseAbs().maxCoeff();
      power = power * power;
      power /= power.cwiseAbs().maxCoeff();
      ++squarings;
      Vector next = power * x;
      if (next.minCoeff() > 0.0) x = next / next.maxCoeff();
      continue;
    }
    x = ax / ax.maxCoeff();
  }
  throw NumericalError("spectral abscissa: power iteration did not converge",
                       0.5 * (lower + upper));
}

}  // namespace detail

/// Largest real part of the eigenvalues of a Metzler matrix.
///
/// The rightmost eigenvalue of a Metzler matrix is real. Each irreducible
/// diagonal block (strongly connected component of the off-diagonal
/// pattern) is shifted by c = 1 + max|q_ii| into a nonnegative primitive
/// matrix whose Perron root is found by power iteration; the abscissa is
/// the maximum over blocks of rho - c.
inline double spectral_abscissa(const Matrix& q, double tolerance = 1e-13,
                                int max_iterations = 200000) {
  if (!is_metzler(q, 1e-12)) throw InputError("matrix is not Metzler");
  if (q.rows() == 0) throw InputError("spectral_abscissa: empty matrix");
  const double shift = 1.0 + q.diagonal().cwiseAbs().maxCoeff();
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& comp : pattern_components(q)) {
    const auto k = static_cast<Eigen::Index>(comp.size());
    if (k == 1) {
      best = std::max(best, q(comp[0], comp[0]));
      continue;
    }
    Matrix block(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < k; ++b) {
        block(a, b) = std::max(0.0, q(comp[a], comp[b]) + (a == b ? shift : 0.0));
      }
    }
    best = std::max(best, detail::perron_root(block, tolerance, max_iterations) - shift);
  }
  return best;
}

struct StabilityReport {
  Matrix wxx;
  Matrix wyy;
  Matrix wyx;
  double lambda_wxx = 0.0;
  /// Sufficient condition for global stability: W_xx Hurwitz.
  bool global_sufficient = false;

  /// Absent when the vigilant equilibrium is undefined.
  std::optional<Vector> vigilant_equilibrium;
  std::optional<Matrix> qxx;
  std::optional<double> lambda_qxx;
  /// Necessary and sufficient condition for local stability: Q_xx Hurwitz.
  std::optional<bool> local_iff;
  std::string equilibrium_error;
};

inline StabilityReport stability_report(const Model& model) {
  StabilityReport report;
  report.wxx = assemble_wxx(model);
  report.wyy = assemble_wyy(model);
  report.wyx = assemble_wyx(model);
  report.global_sufficient = is_metzler_hurwitz(report.wxx);
  report.lambda_wxx = spectral_abscissa(report.wxx);
  try {
    Vector ystar = vigilant_equilibrium(model);
    Matrix qxx = assemble_qxx(model, ystar);
    report.local_iff = is_metzler_hurwitz(qxx);
    report.lambda_qxx = spectral_abscissa(qxx);
    report.vigilant_equilibrium = std::move(ystar);
    report.qxx = std::move(qxx);
  } catch (const EquilibriumUndefined& e) {
    report.equilibrium_error = e.what();
  }
  return report;
}

/// Disease-free mean-field state: x = 0, y = y*.
inline MeanFieldState disease_free_state(const Model& model, const Vector& ystar) {
  return MeanFieldState::from_xy(model.node_count(), model.m(), model.n(),
                                 Vector::Zero(model.node_count() * model.m()), ystar);
}

}  // namespace siv
