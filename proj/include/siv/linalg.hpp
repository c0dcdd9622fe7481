#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "siv/errors.hpp"

namespace siv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Diagonal matrix of the row sums of a (possibly rectangular) matrix.
inline Matrix degree_matrix(const Matrix& q) {
  return q.rowwise().sum().asDiagonal();
}

/// deg(Q) - Q. Rows of the result sum to zero.
inline Matrix laplacian(const Matrix& q) {
  if (q.rows() != q.cols()) {
    throw InputError("laplacian: matrix must be square");
  }
  return degree_matrix(q) - q;
}

/// True when every off-diagonal entry is >= -tolerance.
inline bool is_metzler(const Matrix& q, double tolerance = 1e-12) {
  if (q.rows() != q.cols()) return false;
  for (Eigen::Index j = 0; j < q.cols(); ++j) {
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
      if (i != j && q(i, j) < -tolerance) return false;
    }
  }
  return true;
}

namespace detail {

inline double one_norm(const Matrix& a) {
  return a.cwiseAbs().colwise().sum().maxCoeff();
}

// Pade approximant numerator/denominator pieces for degree 3..9.
template <std::size_t K>
void pade_low(const Matrix& a, const std::array<double, K>& b, Matrix& u,
              Matrix& v) {
  const auto n = a.rows();
  const Matrix ident = Matrix::Identity(n, n);
  const Matrix a2 = a * a;
  Matrix power = ident;
  Matrix odd = b[1] * ident;
  Matrix even = b[0] * ident;
  for (std::size_t k = 2; k < K; k += 2) {
    power = power * a2;
    even += b[k] * power;
    if (k + 1 < K) odd += b[k + 1] * power;
  }
  u = a * odd;
  v = even;
}

}  // namespace detail

/// Matrix exponential by scaling and squaring with Pade approximants of
/// degree 3, 5, 7, 9 or 13, selected from the 1-norm of the argument.
inline Matrix expm(const Matrix& a) {
  if (a.rows() != a.cols()) throw InputError("expm: matrix must be square");
  const auto n = a.rows();
  if (n == 0) return a;

  static constexpr std::array<double, 4> b3{120.0, 60.0, 12.0, 1.0};
  static constexpr std::array<double, 6> b5{30240.0, 15120.0, 3360.0,
                                            420.0,   30.0,    1.0};
  static constexpr std::array<double, 8> b7{17297280.0, 8648640.0, 1995840.0,
                                            277200.0,   25200.0,   1512.0,
                                            56.0,       1.0};
  static constexpr std::array<double, 10> b9{
      17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
      2162160.0,     110880.0,     3960.0,       90.0,        1.0};
  static constexpr std::array<double, 14> b13{
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
      1187353796428800.0,  129060195264000.0,   10559470521600.0,
      670442572800.0,      33522128640.0,       1323241920.0,
      40840800.0,          960960.0,            16380.0,
      182.0,               1.0};
  static constexpr std::array<double, 5> theta{
      1.495585217958292e-2, 2.539398330063230e-1, 9.504178996162932e-1,
      2.097847961257068e0, 5.371920351148152e0};

  const double norm = detail::one_norm(a);
  Matrix u;
  Matrix v;
  int squarings = 0;
  if (norm <= theta[0]) {
    detail::pade_low(a, b3, u, v);
  } else if (norm <= theta[1]) {
    detail::pade_low(a, b5, u, v);
  } else if (norm <= theta[2]) {
    detail::pade_low(a, b7, u, v);
  } else if (norm <= theta[3]) {
    detail::pade_low(a, b9, u, v);
  } else {
    squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / theta[4]))));
    const Matrix s = a / std::ldexp(1.0, squarings);
    const Matrix ident = Matrix::Identity(n, n);
    const Matrix s2 = s * s;
    const Matrix s4 = s2 * s2;
    const Matrix s6 = s4 * s2;
    const Matrix inner_u = b13[13] * s6 + b13[11] * s4 + b13[9] * s2;
    u = s * (s6 * inner_u + b13[7] * s6 + b13[5] * s4 + b13[3] * s2 +
             b13[1] * ident);
    const Matrix inner_v = b13[12] * s6 + b13[10] * s4 + b13[8] * s2;
    v = s6 * inner_v + b13[6] * s6 + b13[4] * s4 + b13[2] * s2 +
        b13[0] * ident;
  }
  Matrix result = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) result = result * result;
  return result;
}

/// Strongly connected components of the directed pattern "i -> j when
/// q(i, j) != 0, i != j". Components are returned in no particular order.
inline std::vector<std::vector<int>> pattern_components(const Matrix& q) {
  const int n = static_cast<int>(q.rows());
  std::vector<int> index(n, -1);
  std::vector<int> low(n, 0);
  std::vector<char> on_stack(n, 0);
  std::vector<int> stack;
  std::vector<std::vector<int>> components;
  int counter = 0;

  // Iterative Tarjan.
  struct Frame {
    int node;
    int next;
  };
  for (int root = 0; root < n; ++root) {
    if (index[root] >= 0) continue;
    std::vector<Frame> frames{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!frames.empty()) {
      Frame& f = frames.back();
      if (f.next < n) {
        const int w = f.next++;
        if (w == f.node || q(f.node, w) == 0.0) continue;
        if (index[w] < 0) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          frames.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.node] = std::min(low[f.node], index[w]);
        }
        continue;
      }
      const int v = f.node;
      frames.pop_back();
      if (!frames.empty()) {
        low[frames.back().node] = std::min(low[frames.back().node], low[v]);
      }
      if (low[v] == index[v]) {
        std::vector<int> comp;
        int w = -1;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp.push_back(w);
        } while (w != v);
        components.push_back(std::move(comp));
      }
    }
  }
  return components;
}

}  // namespace siv
