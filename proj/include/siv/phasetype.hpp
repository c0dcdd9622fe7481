#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "siv/errors.hpp"
#include "siv/linalg.hpp"
#include "siv/parallel.hpp"
#include "siv/random.hpp"

namespace siv {

/// Absorption time of a finite CTMC with transient sub-generator S and
/// initial distribution phi (no atom at zero).
struct PhaseType {
  Vector initial;
  Matrix subgenerator;

  int phases() const { return static_cast<int>(initial.size()); }
  /// s0 = -S 1.
  Vector exit_rates() const { return -subgenerator.rowwise().sum(); }

  static PhaseType exponential(double rate) {
    return {Vector::Ones(1), Matrix::Constant(1, 1, -rate)};
  }

  /// Erlang chain of `phases` stages, each with the given rate.
  static PhaseType erlang(int phases, double rate) {
    PhaseType ph{Vector::Zero(phases), Matrix::Zero(phases, phases)};
    ph.initial(0) = 1.0;
    for (int k = 0; k < phases; ++k) {
      ph.subgenerator(k, k) = -rate;
      if (k + 1 < phases) ph.subgenerator(k, k + 1) = rate;
    }
    return ph;
  }
};

/// Throws InputError unless the sign structure, normalization and
/// invertibility requirements hold.
inline void validate_phase_type(const PhaseType& ph, double tol = 1e-9) {
  const int p = ph.phases();
  if (p < 1) throw InputError("phase-type: need at least one phase");
  const auto& s = ph.subgenerator;
  if (s.rows() != p || s.cols() != p) {
    throw InputError("phase-type: sub-generator must be " + std::to_string(p) +
                     "x" + std::to_string(p));
  }
  if (!ph.initial.allFinite() || !s.allFinite()) {
    throw InputError("phase-type: non-finite entries");
  }
  if (ph.initial.minCoeff() < -tol) throw InputError("phase-type: negative initial probability");
  if (std::abs(ph.initial.sum() - 1.0) > 1e-8) {
    throw InputError("phase-type: initial distribution must sum to 1");
  }
  if (!is_metzler(s, tol)) throw InputError("phase-type: sub-generator is not Metzler");
  const Vector exits = ph.exit_rates();
  if (exits.minCoeff() < -tol * std::max(1.0, s.cwiseAbs().maxCoeff())) {
    throw InputError("phase-type: sub-generator has a positive row sum");
  }
  if (!(exits.maxCoeff() > 0.0)) throw InputError("phase-type: no exit to absorption");
  Eigen::FullPivLU<Matrix> lu(s);
  if (!lu.isInvertible()) throw InputError("phase-type: sub-generator is singular");
}

inline double ph_pdf(const PhaseType& ph, double t) {
  if (!(t >= 0.0)) throw InputError("ph_pdf: time must be nonnegative");
  const Vector v = expm(ph.subgenerator * t) * ph.exit_rates();
  return std::max(0.0, ph.initial.dot(v));
}

inline double ph_cdf(const PhaseType& ph, double t) {
  if (!(t >= 0.0)) throw InputError("ph_cdf: time must be nonnegative");
  const Vector v = expm(ph.subgenerator * t) * Vector::Ones(ph.phases());
  return std::clamp(1.0 - ph.initial.dot(v), 0.0, 1.0);
}

/// CDF at nondecreasing times, propagating phi^T exp(S t) step by step.
inline std::vector<double> ph_cdf_sorted(const PhaseType& ph,
                                         const std::vector<double>& times) {
  std::vector<double> out;
  out.reserve(times.size());
  Eigen::RowVectorXd a = ph.initial.transpose();
  double now = 0.0;
  double last_delta = -1.0;
  Matrix step;
  for (double t : times) {
    if (t < now) throw InputError("ph_cdf_sorted: times must be nondecreasing and >= 0");
    const double delta = t - now;
    if (delta > 0.0) {
      if (delta != last_delta) {
        step = expm(ph.subgenerator * delta);
        last_delta = delta;
      }
      a = a * step;
      now = t;
    }
    out.push_back(std::clamp(1.0 - a.sum(), 0.0, 1.0));
  }
  return out;
}

/// k-th raw moment, (-1)^k k! phi^T S^{-k} 1.
inline double ph_moment(const PhaseType& ph, int order) {
  if (order < 1) throw InputError("ph_moment: order must be >= 1");
  Eigen::FullPivLU<Matrix> lu(ph.subgenerator);
  if (!lu.isInvertible()) throw NumericalError("ph_moment: singular sub-generator");
  Vector v = Vector::Ones(ph.phases());
  double factorial = 1.0;
  for (int k = 1; k <= order; ++k) {
    v = lu.solve(v);
    factorial *= k;
  }
  const double sign = (order % 2 == 0) ? 1.0 : -1.0;
  return sign * factorial * ph.initial.dot(v);
}

inline double ph_mean(const PhaseType& ph) { return ph_moment(ph, 1); }

inline double ph_sd(const PhaseType& ph) {
  const double m1 = ph_moment(ph, 1);
  return std::sqrt(std::max(0.0, ph_moment(ph, 2) - m1 * m1));
}

/// Simulates the underlying chain to absorption.
inline double ph_sample(const PhaseType& ph, Rng& rng) {
  const int p = ph.phases();
  std::discrete_distribution<int> start(ph.initial.data(), ph.initial.data() + p);
  int phase = start(rng);
  const Vector exits = ph.exit_rates();
  double t = 0.0;
  std::vector<double> weights(p + 1);
  for (;;) {
    const double rate = -ph.subgenerator(phase, phase);
    t += std::exponential_distribution<double>(rate)(rng);
    for (int k = 0; k < p; ++k) {
      weights[k] = (k == phase) ? 0.0 : std::max(0.0, ph.subgenerator(phase, k));
    }
    weights[p] = std::max(0.0, exits(phase));
    const int next = std::discrete_distribution<int>(weights.begin(), weights.end())(rng);
    if (next == p) return t;
    phase = next;
  }
}

/// (e_1, T_r) with T_r = [[-r, r phi^T], [0, S]]: a fast entry phase in
/// front of (phi, S).
inline PhaseType densify(const PhaseType& ph, double rate) {
  if (!(rate > 0.0)) throw InputError("densify: rate must be positive");
  const int p = ph.phases();
  PhaseType out{Vector::Zero(p + 1), Matrix::Zero(p + 1, p + 1)};
  out.initial(0) = 1.0;
  out.subgenerator(0, 0) = -rate;
  out.subgenerator.block(0, 1, 1, p) = rate * ph.initial.transpose();
  out.subgenerator.block(1, 1, p, p) = ph.subgenerator;
  return out;
}

/// Default entry rate for densify(): 100 times the fastest phase.
inline double default_densify_rate(const PhaseType& ph) {
  return 100.0 * ph.subgenerator.diagonal().cwiseAbs().maxCoeff();
}

inline bool has_unit_initial(const PhaseType& ph, double tol = 1e-12) {
  if (ph.phases() < 1 || std::abs(ph.initial(0) - 1.0) > tol) return false;
  return ph.initial.tail(ph.phases() - 1).cwiseAbs().sum() <= tol;
}

/// Log-normal law parameterized by the mean and standard deviation of the
/// distribution itself.
struct LogNormal {
  double mu = 0.0;
  double sigma = 1.0;

  static LogNormal from_mean_sd(double mean, double sd) {
    if (!(mean > 0.0) || !(sd > 0.0)) throw InputError("log-normal: mean and sd must be positive");
    const double s2 = std::log1p((sd * sd) / (mean * mean));
    return {std::log(mean) - 0.5 * s2, std::sqrt(s2)};
  }

  double mean() const { return std::exp(mu + 0.5 * sigma * sigma); }
  double sd() const {
    return mean() * std::sqrt(std::expm1(sigma * sigma));
  }
  double cdf(double t) const {
    if (t <= 0.0) return 0.0;
    return 0.5 * std::erfc(-(std::log(t) - mu) / (sigma * std::sqrt(2.0)));
  }
  double pdf(double t) const {
    if (t <= 0.0) return 0.0;
    const double z = (std::log(t) - mu) / sigma;
    return std::exp(-0.5 * z * z) / (t * sigma * std::sqrt(2.0 * M_PI));
  }
  double sample(Rng& rng) const {
    return std::lognormal_distribution<double>(mu, sigma)(rng);
  }
};

/// One-sample Kolmogorov-Smirnov statistic of `samples` against a CDF
/// evaluated at the sorted sample points.
inline double ks_statistic_sorted(const std::vector<double>& sorted,
                                  const std::vector<double>& cdf_at_sorted) {
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf_at_sorted[i];
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

inline double ks_statistic(std::vector<double> samples,
                           const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  std::vector<double> f(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) f[i] = cdf(samples[i]);
  return ks_statistic_sorted(samples, f);
}

inline double ks_statistic(std::vector<double> samples, const PhaseType& ph) {
  std::sort(samples.begin(), samples.end());
  return ks_statistic_sorted(samples, ph_cdf_sorted(ph, samples));
}

struct EmOptions {
  int max_iterations = 400;
  double relative_tolerance = 1e-8;
  int restarts = 5;
  /// Iterations given to every restart before the best one is continued.
  int warmup_iterations = 20;
  /// Fit the initial vector too; by default it stays at e_1.
  bool free_initial = false;
  unsigned jobs = 1;
};

struct EmResult {
  PhaseType fit;
  /// Log-likelihood of the parameters entering each iteration.
  std::vector<double> log_likelihood;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

// Sufficient statistics of one E-step over sorted samples.
struct EmStatistics {
  Vector starts;     // sum phi_k b_k / f
  Vector exits;      // sum a_k s0_k / f (before multiplying by s0)
  Matrix sojourn;    // sum C / f, diagonal gives sojourn times
  double log_likelihood = 0.0;
};

// Advances (P, C) = blocks of exp(A y), A = [[S, s0 phi^T], [0, S]], by h
// with a Taylor series, splitting h so that each piece has |S| h <= 1/2.
class BlockPropagator {
 public:
  BlockPropagator(const Matrix& s, const Vector& s0, const Vector& phi)
      : s_(s), s0_(s0), phi_(phi), norm_(s.cwiseAbs().rowwise().sum().maxCoeff()) {
    const auto p = s.rows();
    tp_.resize(p, p);
    tc_.resize(p, p);
    np_.resize(p, p);
    nc_.resize(p, p);
  }

  void advance(Matrix& pm, Matrix& cm, double h) {
    if (h <= 0.0) return;
    const int pieces = std::max(1, static_cast<int>(std::ceil(h * norm_ / 0.5)));
    const double piece = h / pieces;
    for (int k = 0; k < pieces; ++k) step(pm, cm, piece);
  }

 private:
  void step(Matrix& pm, Matrix& cm, double h) {
    tp_ = pm;
    tc_ = cm;
    for (int j = 1; j < 40; ++j) {
      const double c = h / j;
      nc_.noalias() = s_ * tc_;
      nc_.noalias() += s0_ * (phi_.transpose() * tp_);
      np_.noalias() = s_ * tp_;
      tp_ = c * np_;
      tc_ = c * nc_;
      pm += tp_;
      cm += tc_;
      const double tail = tp_.cwiseAbs().maxCoeff() + tc_.cwiseAbs().maxCoeff();
      const double scale = pm.cwiseAbs().maxCoeff() + cm.cwiseAbs().maxCoeff();
      if (tail <= 1e-17 * scale) break;
    }
  }

  const Matrix& s_;
  const Vector& s0_;
  const Vector& phi_;
  double norm_;
  Matrix tp_, tc_, np_, nc_;
};

inline EmStatistics em_expectation(const PhaseType& ph,
                                   const std::vector<double>& sorted) {
  const int p = ph.phases();
  const Vector s0 = ph.exit_rates();
  EmStatistics st{Vector::Zero(p), Vector::Zero(p), Matrix::Zero(p, p), 0.0};
  Matrix pm = Matrix::Identity(p, p);
  Matrix cm = Matrix::Zero(p, p);
  BlockPropagator prop(ph.subgenerator, s0, ph.initial);
  double now = 0.0;
  for (double y : sorted) {
    prop.advance(pm, cm, y - now);
    now = y;
    const Eigen::RowVectorXd a = ph.initial.transpose() * pm;
    const Vector b = pm * s0;
    const double f = a.dot(s0);
    if (!(f > 0.0) || !std::isfinite(f)) {
      st.log_likelihood = -std::numeric_limits<double>::infinity();
      return st;
    }
    const double inv = 1.0 / f;
    st.starts += inv * ph.initial.cwiseProduct(b);
    st.exits += inv * a.transpose();
    st.sojourn += inv * cm;
    st.log_likelihood += std::log(f);
  }
  return st;
}

inline PhaseType em_maximization(const PhaseType& ph, const EmStatistics& st,
                                 std::size_t count, bool free_initial) {
  const int p = ph.phases();
  const Vector s0 = ph.exit_rates();
  PhaseType next{ph.initial, Matrix::Zero(p, p)};
  if (free_initial) {
    next.initial = st.starts / static_cast<double>(count);
    next.initial /= next.initial.sum();
  }
  for (int k = 0; k < p; ++k) {
    const double z = st.sojourn(k, k);
    double out = 0.0;
    for (int l = 0; l < p; ++l) {
      if (l == k) continue;
      const double rate = z > 0.0 ? ph.subgenerator(k, l) * st.sojourn(l, k) / z : 0.0;
      next.subgenerator(k, l) = std::max(0.0, rate);
      out += next.subgenerator(k, l);
    }
    const double exit = z > 0.0 ? std::max(0.0, s0(k) * st.exits(k) / z) : 0.0;
    next.subgenerator(k, k) = -(out + exit);
  }
  return next;
}

inline PhaseType em_initial_guess(int p, double sample_mean, Rng& rng,
                                  bool free_initial) {
  const double base = p / sample_mean;
  PhaseType ph{Vector::Zero(p), Matrix::Zero(p, p)};
  Vector exits = Vector::Zero(p);
  for (int k = 0; k < p; ++k) {
    const double rate = base * uniform(rng, 0.5, 1.5);
    const double main = rate * uniform(rng, 0.9, 1.0);
    if (k + 1 < p) {
      ph.subgenerator(k, k + 1) = main;
    } else {
      exits(k) = main;
    }
    // Small random fill keeps every transition available to EM.
    for (int l = 0; l < p; ++l) {
      if (l != k && l != k + 1) ph.subgenerator(k, l) = rate * uniform(rng, 0.0, 0.02);
    }
    if (k + 1 < p) exits(k) = rate * uniform(rng, 0.0, 0.02);
  }
  for (int k = 0; k < p; ++k) {
    double off = 0.0;
    for (int l = 0; l < p; ++l) off += (l == k) ? 0.0 : ph.subgenerator(k, l);
    ph.subgenerator(k, k) = -(off + exits(k));
  }
  ph.initial(0) = 1.0;
  if (free_initial) {
    for (int k = 1; k < p; ++k) ph.initial(k) = uniform(rng, 0.0, 0.05);
    ph.initial /= ph.initial.sum();
  }
  // Match the sample mean.
  ph.subgenerator *= ph_mean(ph) / sample_mean;
  return ph;
}

struct EmRun {
  PhaseType ph;
  std::vector<double> log_likelihood;
  bool converged = false;
};

// Runs up to `iterations` EM steps from `run.ph`, appending the likelihood
// of each visited parameter set.
inline void em_iterate(EmRun& run, const std::vector<double>& sorted, int iterations,
                       const EmOptions& options) {
  for (int it = 0; it < iterations && !run.converged; ++it) {
    const auto st = em_expectation(run.ph, sorted);
    if (!std::isfinite(st.log_likelihood)) {
      throw FitError("EM: likelihood vanished on the samples");
    }
    if (!run.log_likelihood.empty()) {
      const double prev = run.log_likelihood.back();
      if (std::abs(st.log_likelihood - prev) <
          options.relative_tolerance * std::abs(prev)) {
        run.log_likelihood.push_back(st.log_likelihood);
        run.converged = true;
        break;
      }
    }
    run.log_likelihood.push_back(st.log_likelihood);
    run.ph = em_maximization(run.ph, st, sorted.size(), options.free_initial);
  }
}

}  // namespace detail

/// Maximum-likelihood phase-type fit to positive samples by
/// expectation-maximization. Each restart starts from a randomized
/// Coxian-like chain with small fill; the best restart after the warm-up
/// is iterated to convergence or the iteration cap.
inline EmResult fit_ph_em(const std::vector<double>& samples, int phases,
                          const EmOptions& options, std::uint64_t seed) {
  if (phases < 1) throw InputError("fit_ph_em: need at least one phase");
  if (samples.size() < 100) throw InputError("fit_ph_em: need at least 100 samples");
  for (double y : samples) {
    if (!(y > 0.0) || !std::isfinite(y)) throw InputError("fit_ph_em: samples must be positive");
  }
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) throw FitError("fit_ph_em: all samples are equal");
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / sorted.size();

  const int restarts = std::max(1, options.restarts);
  const int warmup = std::min(options.max_iterations, std::max(1, options.warmup_iterations));
  std::vector<detail::EmRun> runs(restarts);
  parallel_for(static_cast<std::size_t>(restarts), options.jobs, [&](std::size_t r) {
    Rng rng = make_rng(seed, r);
    runs[r].ph = detail::em_initial_guess(phases, mean, rng, options.free_initial);
    detail::em_iterate(runs[r], sorted, warmup, options);
  });
  auto best = std::max_element(runs.begin(), runs.end(), [](const auto& a, const auto& b) {
    return a.log_likelihood.back() < b.log_likelihood.back();
  });
  detail::EmRun run = std::move(*best);
  detail::em_iterate(run, sorted, options.max_iterations - warmup, options);

  EmResult result;
  result.fit = run.ph;
  result.log_likelihood = std::move(run.log_likelihood);
  result.iterations = static_cast<int>(result.log_likelihood.size());
  result.converged = run.converged;
  validate_phase_type(result.fit);
  return result;
}

/// Log-likelihood of samples under a phase-type law.
inline double ph_log_likelihood(const PhaseType& ph, std::vector<double> samples) {
  std::sort(samples.begin(), samples.end());
  return detail::em_expectation(ph, samples).log_likelihood;
}

}  // namespace siv
