#include "gspnet/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gspnet/io.hpp"

namespace gspnet {

namespace {

Error graph_error(ErrorKind kind, const std::string& code, const std::string& message) {
  return Error(kind, "graph", "graph." + code, message);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_number(std::string text, std::size_t line_no) {
  const auto first = text.find_first_not_of(" \t\r");
  const auto last = text.find_last_not_of(" \t\r");
  if (first == std::string::npos) {
    throw graph_error(ErrorKind::format, "parse", "empty field on line " + std::to_string(line_no));
  }
  text = text.substr(first, last - first + 1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    throw graph_error(ErrorKind::format, "parse",
                      "invalid number '" + text + "' on line " + std::to_string(line_no));
  }
  return value;
}

}  // namespace

Graph Graph::from_dense(const Eigen::MatrixXd& weights) {
  if (weights.rows() != weights.cols()) {
    throw graph_error(ErrorKind::usage, "not_square",
                      "weight matrix must be square, got " + std::to_string(weights.rows()) + "x" +
                          std::to_string(weights.cols()));
  }
  if (weights.rows() < 2) {
    throw graph_error(ErrorKind::usage, "too_small", "a graph needs at least 2 vertices");
  }
  if (!weights.allFinite()) {
    throw graph_error(ErrorKind::usage, "non_finite", "weight matrix has non-finite entries");
  }
  if ((weights.array() < 0.0).any()) {
    throw graph_error(ErrorKind::usage, "negative_weight",
                      "negative weights are not allowed; rectify correlations before building the graph");
  }
  Eigen::MatrixXd w = SymMatrix<double>(weights).matrix();
  w.diagonal().setZero();
  return Graph(std::move(w));
}

Graph knn_binarize(const Graph& g, Index k) {
  const Index n = g.size();
  if (k < 1 || k >= n) {
    throw graph_error(ErrorKind::usage, "bad_k",
                      "k must lie in [1, n-1] = [1, " + std::to_string(n - 1) + "], got " + std::to_string(k));
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  std::vector<Index> neighbours;
  for (Index i = 0; i < n; ++i) {
    neighbours.clear();
    for (Index j = 0; j < n; ++j)
      if (j != i && g.weight(i, j) > 0.0) neighbours.push_back(j);
    std::stable_sort(neighbours.begin(), neighbours.end(),
                     [&](Index a, Index b) { return g.weight(i, a) > g.weight(i, b); });
    if (neighbours.empty()) continue;
    const auto cut = std::min<std::size_t>(static_cast<std::size_t>(k), neighbours.size());
    const double kth = g.weight(i, neighbours[cut - 1]);
    for (Index j : neighbours) {
      if (g.weight(i, j) < kth) break;
      out(i, j) = 1.0;
      out(j, i) = 1.0;
    }
  }
  return Graph::from_dense(out);
}

SymMatrix<double> normalized_laplacian(const Graph& g) {
  const Index n = g.size();
  const Eigen::VectorXd degree = g.weights().rowwise().sum();
  for (Index i = 0; i < n; ++i) {
    if (!(degree(i) > 0.0)) {
      throw graph_error(ErrorKind::usage, "isolated_vertex",
                        "vertex " + std::to_string(i) + " has zero degree; the normalized Laplacian is undefined");
    }
  }
  Eigen::MatrixXd l = Eigen::MatrixXd::Identity(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      const double w = g.weight(i, j);
      if (w != 0.0) l(i, j) = -w / std::sqrt(degree(i) * degree(j));
    }
  }
  return SymMatrix<double>(l);
}

bool is_connected(const Graph& g) {
  const Index n = g.size();
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::deque<Index> frontier{0};
  seen[0] = true;
  Index reached = 1;
  while (!frontier.empty()) {
    const Index i = frontier.front();
    frontier.pop_front();
    for (Index j = 0; j < n; ++j) {
      if (!seen[j] && g.weight(i, j) != 0.0) {
        seen[j] = true;
        ++reached;
        frontier.push_back(j);
      }
    }
  }
  return reached == n;
}

Graph read_graph(const std::filesystem::path& path) {
  const std::string text = io::read_text(path, "graph");
  std::vector<std::vector<std::string>> rows;
  {
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") == std::string::npos) continue;
      rows.push_back(split_fields(line));
    }
  }
  if (rows.empty()) throw graph_error(ErrorKind::format, "empty", "graph file '" + path.string() + "' is empty");

  const std::size_t cols = rows.front().size();
  bool dense = rows.size() == cols && cols >= 2;
  if (dense) {
    for (const auto& r : rows) dense = dense && r.size() == cols;
  }
  if (dense) {
    Eigen::MatrixXd w(static_cast<Index>(cols), static_cast<Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < cols; ++j) w(i, j) = parse_number(rows[i][j], i + 1);
    // Three columns with a non-zero diagonal can only be an edge list.
    if ((w.diagonal().array() == 0.0).all() || cols != 3) return Graph::from_dense(w);
  }
  if (cols != 3) {
    throw graph_error(ErrorKind::format, "bad_shape",
                      "expected a square dense CSV or 'i,j,w' edge lines in '" + path.string() + "'");
  }

  std::map<std::pair<Index, Index>, double> edges;
  Index n = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != 3) {
      throw graph_error(ErrorKind::format, "bad_shape", "edge line " + std::to_string(r + 1) + " needs 3 fields");
    }
    const double fi = parse_number(rows[r][0], r + 1);
    const double fj = parse_number(rows[r][1], r + 1);
    const double w = parse_number(rows[r][2], r + 1);
    if (fi < 0 || fj < 0 || fi != std::floor(fi) || fj != std::floor(fj)) {
      throw graph_error(ErrorKind::format, "bad_index", "edge line " + std::to_string(r + 1) + " has a bad index");
    }
    const auto i = static_cast<Index>(fi);
    const auto j = static_cast<Index>(fj);
    const auto key = std::minmax(i, j);
    const auto [it, inserted] = edges.emplace(std::pair<Index, Index>(key.first, key.second), w);
    if (!inserted && it->second != w) {
      throw graph_error(ErrorKind::format, "duplicate_edge",
                        "edge " + std::to_string(i) + "-" + std::to_string(j) + " listed with conflicting weights");
    }
    n = std::max(n, std::max(i, j) + 1);
  }
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [key, value] : edges) {
    w(key.first, key.second) = value;
    w(key.second, key.first) = value;
  }
  return Graph::from_dense(w);
}

void write_graph(const Graph& g, const std::filesystem::path& path) {
  std::string out;
  for (Index i = 0; i < g.size(); ++i) {
    for (Index j = 0; j < g.size(); ++j) {
      if (j) out.push_back(',');
      out += io::format_double(g.weight(i, j));
    }
    out.push_back('\n');
  }
  io::write_text(path, out, "graph");
}

}  // namespace gspnet
