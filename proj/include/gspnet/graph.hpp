#pragma once

#include <Eigen/Dense>

#include <filesystem>

#include "gspnet/linalg.hpp"

namespace gspnet {

/// Undirected weighted graph held as its dense weight matrix. Weights are
/// symmetric, non-negative, with an exactly zero diagonal; at least 2 vertices.
class Graph {
 public:
  /// Symmetrizes by averaging with the transpose and zeroes the diagonal.
  /// Negative entries are rejected: correlation graphs must be rectified by
  /// the caller first.
  static Graph from_dense(const Eigen::MatrixXd& weights);

  Index size() const { return weights_.rows(); }
  const Eigen::MatrixXd& weights() const { return weights_; }
  double weight(Index i, Index j) const { return weights_(i, j); }

  friend bool operator==(const Graph& a, const Graph& b) { return a.weights_ == b.weights_; }

 private:
  explicit Graph(Eigen::MatrixXd weights) : weights_(std::move(weights)) {}
  Eigen::MatrixXd weights_;
};

/// Unit-weight graph linking each vertex to its k strongest positive-weight
/// neighbours, symmetrized by union. Neighbours tied with the k-th strongest
/// weight are all kept, which makes the operation idempotent.
Graph knn_binarize(const Graph& g, Index k);

/// L = I - D^{-1/2} W D^{-1/2}. Throws on an isolated vertex.
SymMatrix<double> normalized_laplacian(const Graph& g);

bool is_connected(const Graph& g);

/// Reads a dense CSV (n rows of n values, zero diagonal) or an edge list of
/// "i,j,w" lines with 0-based indices. The first line's column count picks
/// the format; a square table with zero diagonal is read as dense.
Graph read_graph(const std::filesystem::path& path);

/// Dense CSV with 17 significant digits.
void write_graph(const Graph& g, const std::filesystem::path& path);

}  // namespace gspnet
