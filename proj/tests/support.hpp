#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <random>
#include <string>

#include "gspnet/error.hpp"
#include "gspnet/graph.hpp"
#include "gspnet/spectral.hpp"

namespace gspnet::testing {

// Random weighted graph on n vertices: a random spanning path keeps it
// connected, other pairs are linked with probability p.
inline Graph random_connected_graph(Index n, double p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> weight(0.1, 1.0);
  std::bernoulli_distribution link(p);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  for (Index i = 0; i + 1 < n; ++i) {
    const Index a = perm[static_cast<std::size_t>(i)];
    const Index b = perm[static_cast<std::size_t>(i + 1)];
    w(a, b) = w(b, a) = weight(rng);
  }
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (w(i, j) == 0.0 && link(rng)) w(i, j) = w(j, i) = weight(rng);
  return Graph::from_dense(w);
}

inline Graph path_graph(Index n) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i + 1 < n; ++i) w(i, i + 1) = w(i + 1, i) = 1.0;
  return Graph::from_dense(w);
}

// Ring with chords to vertex i+5: regular, connected, rich spectrum.
inline Graph ring_graph(Index n) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    w(i, (i + 1) % n) = w((i + 1) % n, i) = 1.0;
    w(i, (i + 5) % n) = w((i + 5) % n, i) = 0.5;
  }
  return Graph::from_dense(w);
}

inline SpectralBasis basis_of(const Graph& g) { return build_basis(normalized_laplacian(g)); }

inline Eigen::MatrixXd random_symmetric(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (Index i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  return (a + a.transpose()) / 2.0;
}

// Code of the gspnet::Error thrown by f, or "" when nothing is thrown.
template <typename F>
std::string error_code(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

template <typename F>
ErrorKind error_kind(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  throw std::logic_error("no error thrown");
}

}  // namespace gspnet::testing
