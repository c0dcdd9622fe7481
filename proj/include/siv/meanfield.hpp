#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "siv/errors.hpp"
#include "siv/model.hpp"

namespace siv {

/// Per-node probability vectors (S_i, I_i^1..I_i^m, V_i^1..V_i^n), stored
/// node-major with stride 1 + m + n.
class MeanFieldState {
 public:
  MeanFieldState() = default;
  MeanFieldState(int nodes, int m, int n)
      : nodes_(nodes), m_(m), n_(n), data_(Vector::Zero(nodes * (1 + m + n))) {}

  /// Everyone susceptible.
  static MeanFieldState susceptible(int nodes, int m, int n) {
    MeanFieldState s(nodes, m, n);
    for (int i = 0; i < nodes; ++i) s.S(i) = 1.0;
    return s;
  }

  int node_count() const { return nodes_; }
  int m() const { return m_; }
  int n() const { return n_; }
  int stride() const { return 1 + m_ + n_; }

  double& S(int i) { return data_(i * stride()); }
  double S(int i) const { return data_(i * stride()); }
  /// k is 0-based: I(i, 0) is I_i^1.
  double& I(int i, int k) { return data_(i * stride() + 1 + k); }
  double I(int i, int k) const { return data_(i * stride() + 1 + k); }
  /// l is 0-based: V(i, 0) is V_i^1.
  double& V(int i, int l) { return data_(i * stride() + 1 + m_ + l); }
  double V(int i, int l) const { return data_(i * stride() + 1 + m_ + l); }

  /// Probability of node i being in any infectious state.
  double infected(int i) const {
    return data_.segment(i * stride() + 1, m_).sum();
  }
  double node_sum(int i) const { return data_.segment(i * stride(), stride()).sum(); }

  const Vector& data() const { return data_; }
  Vector& data() { return data_; }

  /// Stacked infectious vector x = (x_1, ..., x_N), x_i = (I_i^1..I_i^m).
  Vector x() const {
    Vector out(nodes_ * m_);
    for (int i = 0; i < nodes_; ++i) out.segment(i * m_, m_) = data_.segment(i * stride() + 1, m_);
    return out;
  }
  /// Stacked vigilant vector y = (y_1, ..., y_N), y_i = (V_i^1..V_i^n).
  Vector y() const {
    Vector out(nodes_ * n_);
    for (int i = 0; i < nodes_; ++i) out.segment(i * n_, n_) = data_.segment(i * stride() + 1 + m_, n_);
    return out;
  }

  /// Rebuilds a state from stacked x and y, with S = 1 - sum I - sum V.
  static MeanFieldState from_xy(int nodes, int m, int n, const Vector& x,
                                const Vector& y) {
    MeanFieldState s(nodes, m, n);
    for (int i = 0; i < nodes; ++i) {
      s.data_.segment(i * s.stride() + 1, m) = x.segment(i * m, m);
      s.data_.segment(i * s.stride() + 1 + m, n) = y.segment(i * n, n);
      s.S(i) = 1.0 - x.segment(i * m, m).sum() - y.segment(i * n, n).sum();
    }
    return s;
  }

  /// Largest deviation of any per-node sum from 1.
  double simplex_defect() const {
    double worst = 0.0;
    for (int i = 0; i < nodes_; ++i) worst = std::max(worst, std::abs(node_sum(i) - 1.0));
    return worst;
  }

 private:
  int nodes_ = 0;
  int m_ = 0;
  int n_ = 0;
  Vector data_;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<MeanFieldState> states;
};

struct IntegrationOptions {
  double step = 0.01;
  /// Record every `stride` steps; 0 picks every step for horizons up to
  /// 100 days and at most 10^4 samples otherwise.
  int stride = 0;
  double sum_tolerance = 1e-6;
  double negativity_tolerance = 1e-8;
};

/// The reduced mean-field system compiled into flat arrays. The state
/// vector z holds (I_i^1..I_i^m, V_i^1..V_i^n) per node, S is implied.
class MeanFieldSystem {
 public:
  explicit MeanFieldSystem(const Model& model)
      : nodes_(model.node_count()), m_(model.m()), n_(model.n()) {
    require_valid(model);
    inflow_i_.resize(nodes_);
    outflow_i_.resize(nodes_);
    recovery_.resize(nodes_);
    inflow_v_.resize(nodes_);
    outflow_v_.resize(nodes_);
    theta_.resize(nodes_);
    sources_.resize(nodes_);
    for (int i = 0; i < nodes_; ++i) {
      const auto& r = model.node(i);
      // Flows enter as transposes: I^k receives eps^{k'k} I^k'.
      inflow_i_[i] = r.infectious_internal.transpose();
      outflow_i_[i] = r.infectious_internal.rowwise().sum() + r.recovery.rowwise().sum();
      recovery_[i] = r.recovery.transpose();
      inflow_v_[i] = r.vigilant_internal.transpose();
      outflow_v_[i] = r.vigilant_internal.rowwise().sum() + r.susceptibility;
      theta_[i] = r.vigilance;
      for (int e : model.incoming(i)) {
        const auto& edge = model.edges()[e];
        sources_[i].push_back({edge.from, edge.beta});
      }
    }
  }

  int node_count() const { return nodes_; }
  int m() const { return m_; }
  int n() const { return n_; }
  int dimension() const { return nodes_ * (m_ + n_); }

  /// Reduced right-hand side dz = f(z).
  void evaluate(const Vector& z, Vector& dz) const {
    const int w = m_ + n_;
    dz.resize(z.size());
    for (int i = 0; i < nodes_; ++i) {
      const auto xi = z.segment(i * w, m_);
      const auto yi = z.segment(i * w + m_, n_);
      const double s = 1.0 - xi.sum() - yi.sum();
      double pressure = 0.0;
      for (const auto& src : sources_[i]) {
        pressure += src.beta.dot(z.segment(src.node * w, m_));
      }
      auto dx = dz.segment(i * w, m_);
      auto dy = dz.segment(i * w + m_, n_);
      dx.noalias() = inflow_i_[i] * xi;
      dx -= outflow_i_[i].cwiseProduct(xi);
      dx(0) += s * pressure;
      dy.noalias() = recovery_[i] * xi;
      dy.noalias() += inflow_v_[i] * yi;
      dy -= outflow_v_[i].cwiseProduct(yi);
      dy += s * theta_[i];
    }
  }

  Vector pack(const MeanFieldState& state) const {
    check_shape(state);
    const int w = m_ + n_;
    Vector z(nodes_ * w);
    for (int i = 0; i < nodes_; ++i) {
      z.segment(i * w, w) = state.data().segment(i * state.stride() + 1, w);
    }
    return z;
  }

  MeanFieldState unpack(const Vector& z) const {
    const int w = m_ + n_;
    MeanFieldState s(nodes_, m_, n_);
    for (int i = 0; i < nodes_; ++i) {
      s.data().segment(i * s.stride() + 1, w) = z.segment(i * w, w);
      s.S(i) = 1.0 - z.segment(i * w, w).sum();
    }
    return s;
  }

  void check_shape(const MeanFieldState& state) const {
    if (state.node_count() != nodes_ || state.m() != m_ || state.n() != n_) {
      throw InputError("mean-field state dimensions do not match the model");
    }
  }

 private:
  struct Source {
    int node;
    Vector beta;
  };
  int nodes_;
  int m_;
  int n_;
  std::vector<Matrix> inflow_i_;
  std::vector<Vector> outflow_i_;
  std::vector<Matrix> recovery_;
  std::vector<Matrix> inflow_v_;
  std::vector<Vector> outflow_v_;
  std::vector<Vector> theta_;
  std::vector<std::vector<Source>> sources_;
};

namespace detail {

inline void require_on_simplex(const MeanFieldState& state, double tol,
                               const char* who) {
  if (state.simplex_defect() > tol) {
    throw InputError(std::string(who) + ": state is not on the probability simplex");
  }
  if (state.data().size() > 0 && state.data().minCoeff() < -tol) {
    throw InputError(std::string(who) + ": state has negative probabilities");
  }
}

}  // namespace detail

/// Time derivative of every coordinate; S_i is taken as 1 - sum I - sum V
/// and its derivative as minus the sum of the others.
inline MeanFieldState rhs(const Model& model, const MeanFieldState& state) {
  const MeanFieldSystem system(model);
  detail::require_on_simplex(state, 1e-6, "rhs");
  Vector dz;
  system.evaluate(system.pack(state), dz);
  const int w = model.m() + model.n();
  MeanFieldState out(model.node_count(), model.m(), model.n());
  for (int i = 0; i < model.node_count(); ++i) {
    out.data().segment(i * out.stride() + 1, w) = dz.segment(i * w, w);
    out.S(i) = -dz.segment(i * w, w).sum();
  }
  return out;
}

/// Direct evaluation of the full system including the S equation, using
/// the S stored in the state. Agrees with rhs() on the simplex; kept as an
/// independent route for cross-checks.
inline MeanFieldState rhs_full(const Model& model, const MeanFieldState& state) {
  require_valid(model);
  const int m = model.m();
  const int n = model.n();
  MeanFieldState d(model.node_count(), m, n);
  for (int i = 0; i < model.node_count(); ++i) {
    const auto& r = model.node(i);
    double pressure = 0.0;
    for (int e : model.incoming(i)) {
      const auto& edge = model.edges()[e];
      for (int k = 0; k < m; ++k) pressure += edge.beta(k) * state.I(edge.from, k);
    }
    const double s = state.S(i);
    double ds = -s * pressure;
    for (int l = 0; l < n; ++l) ds += r.susceptibility(l) * state.V(i, l) - r.vigilance(l) * s;
    d.S(i) = ds;
    for (int k = 0; k < m; ++k) {
      double di = (k == 0) ? s * pressure : 0.0;
      for (int l = 0; l < n; ++l) di -= state.I(i, k) * r.recovery(k, l);
      for (int k2 = 0; k2 < m; ++k2) {
        di += state.I(i, k2) * r.infectious_internal(k2, k) -
              state.I(i, k) * r.infectious_internal(k, k2);
      }
      d.I(i, k) = di;
    }
    for (int l = 0; l < n; ++l) {
      double dv = r.vigilance(l) * s - r.susceptibility(l) * state.V(i, l);
      for (int k = 0; k < m; ++k) dv += r.recovery(k, l) * state.I(i, k);
      for (int l2 = 0; l2 < n; ++l2) {
        dv += state.V(i, l2) * r.vigilant_internal(l2, l) -
              state.V(i, l) * r.vigilant_internal(l, l2);
      }
      d.V(i, l) = dv;
    }
  }
  return d;
}

namespace detail {

inline void rk4_step(const MeanFieldSystem& sys, Vector& z, double h, Vector& k1,
                     Vector& k2, Vector& k3, Vector& k4, Vector& tmp,
                     bool k1_ready) {
  if (!k1_ready) sys.evaluate(z, k1);
  tmp = z + 0.5 * h * k1;
  sys.evaluate(tmp, k2);
  tmp = z + 0.5 * h * k2;
  sys.evaluate(tmp, k3);
  tmp = z + h * k3;
  sys.evaluate(tmp, k4);
  z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline void check_simplex(const MeanFieldSystem& sys, const Vector& z, double t,
                          const IntegrationOptions& opt) {
  const int w = sys.m() + sys.n();
  for (int i = 0; i < sys.node_count(); ++i) {
    const auto seg = z.segment(i * w, w);
    const double total = seg.sum();
    const double s = 1.0 - total;
    const bool bad = seg.minCoeff() < -opt.negativity_tolerance ||
                     s < -opt.negativity_tolerance ||
                     std::abs(s + total - 1.0) > opt.sum_tolerance ||
                     !seg.allFinite();
    if (bad) {
      throw IntegrationError("integration left the probability simplex at t=" +
                             std::to_string(t) + " (node " + std::to_string(i) +
                             "); try a smaller step");
    }
  }
}

inline int step_count(double horizon, double step) {
  return std::max(1, static_cast<int>(std::ceil(horizon / step - 1e-9)));
}

}  // namespace detail

/// Classical fixed-step fourth-order Runge-Kutta integration of the
/// reduced system from `init` over [0, horizon].
inline Trajectory integrate(const Model& model, const MeanFieldState& init,
                            double horizon, const IntegrationOptions& options = {}) {
  if (!(options.step > 0.0)) throw InputError("integrate: step must be positive");
  if (!(horizon >= options.step)) throw InputError("integrate: horizon must be at least one step");
  detail::require_on_simplex(init, 1e-6, "integrate");
  const MeanFieldSystem sys(model);
  sys.check_shape(init);

  const int steps = detail::step_count(horizon, options.step);
  int stride = options.stride;
  if (stride <= 0) stride = horizon <= 100.0 ? 1 : std::max(1, (steps + 9999) / 10000);

  Trajectory traj;
  Vector z = sys.pack(init);
  Vector k1, k2, k3, k4, tmp;
  traj.times.push_back(0.0);
  traj.states.push_back(sys.unpack(z));
  for (int s = 1; s <= steps; ++s) {
    const double t0 = (s - 1) * options.step;
    const double h = std::min(options.step, horizon - t0);
    detail::rk4_step(sys, z, h, k1, k2, k3, k4, tmp, false);
    const double t = s == steps ? horizon : s * options.step;
    detail::check_simplex(sys, z, t, options);
    if (s % stride == 0 || s == steps) {
      traj.times.push_back(t);
      traj.states.push_back(sys.unpack(z));
    }
  }
  return traj;
}

/// P_i(t) = sum_k I_i^k(t), indexed [time][node].
inline std::vector<std::vector<double>> infection_probability(const Trajectory& traj) {
  std::vector<std::vector<double>> out;
  out.reserve(traj.states.size());
  for (const auto& s : traj.states) {
    std::vector<double> row(s.node_count());
    for (int i = 0; i < s.node_count(); ++i) row[i] = s.infected(i);
    out.push_back(std::move(row));
  }
  return out;
}

struct SteadyStateResult {
  MeanFieldState state;
  double time = 0.0;
  /// True when the derivative max-norm fell below the tolerance; false
  /// when the horizon cap fired first.
  bool converged = false;
};

inline SteadyStateResult steady_state(const Model& model, const MeanFieldState& init,
                                      double tolerance, double max_horizon,
                                      const IntegrationOptions& options = {}) {
  if (!(tolerance > 0.0)) throw InputError("steady_state: tolerance must be positive");
  if (!(options.step > 0.0)) throw InputError("steady_state: step must be positive");
  detail::require_on_simplex(init, 1e-6, "steady_state");
  const MeanFieldSystem sys(model);
  sys.check_shape(init);
  Vector z = sys.pack(init);
  Vector k1, k2, k3, k4, tmp;
  double t = 0.0;
  for (;;) {
    sys.evaluate(z, k1);
    // Derivative of S is minus the per-node sum, so bound it as well.
    double norm = k1.size() > 0 ? k1.cwiseAbs().maxCoeff() : 0.0;
    const int w = sys.m() + sys.n();
    for (int i = 0; i < sys.node_count(); ++i) {
      norm = std::max(norm, std::abs(k1.segment(i * w, w).sum()));
    }
    if (norm < tolerance) return {sys.unpack(z), t, true};
    if (t >= max_horizon - 1e-12) return {sys.unpack(z), t, false};
    const double h = std::min(options.step, max_horizon - t);
    detail::rk4_step(sys, z, h, k1, k2, k3, k4, tmp, true);
    t += h;
    detail::check_simplex(sys, z, t, options);
  }
}

}  // namespace siv
