#pragma once
// Helpers shared by the test binaries: seeded random matrices, finite
// differences and small fixtures.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "cuber/linalg.hpp"
#include "cuber/random.hpp"

namespace cuber::test {

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (double& v : m.data()) v = n(rng);
  return m;
}

inline Basis random_basis(std::size_t d, std::size_t k, Rng& rng) {
  return orthonormalize(random_matrix(d, k, rng));
}

/// Max over entries of |a - n| / max(|a|, |n|, floor); floor keeps
/// near-zero entries from dominating.
inline double max_relative_error(std::span<const double> analytic, std::span<const double> numeric,
                                 double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double den = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / den);
  }
  return worst;
}

/// Central differences of f with respect to every entry of m.
inline Matrix numeric_gradient(Matrix& m, const std::function<double()>& f, double h = 1e-5) {
  Matrix g(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double keep = m.data()[i];
    m.data()[i] = keep + h;
    const double up = f();
    m.data()[i] = keep - h;
    const double down = f();
    m.data()[i] = keep;
    g.data()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline std::vector<double> numeric_gradient(std::vector<double>& v, const std::function<double()>& f,
                                            double h = 1e-5) {
  std::vector<double> g(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double keep = v[i];
    v[i] = keep + h;
    const double up = f();
    v[i] = keep - h;
    const double down = f();
    v[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace cuber::test
