#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sewerml/cluster.hpp"
#include "sewerml/error.hpp"
#include "sewerml/rng.hpp"

namespace sewerml::cluster {

std::pair<int, int> som_grid_size(int n_samples) {
  if (n_samples < 4) throw Error(ErrorCode::kInvalidArgument, "SOM sizing needs at least 4 samples");
  const auto target = static_cast<int>(std::floor(5.0 * std::sqrt(static_cast<double>(n_samples))));
  int rows = 1;
  while (true) {
    // rows x rows, then rows x (rows + 1): products increase monotonically
    if (rows * rows >= target) return {rows, rows};
    if (rows * (rows + 1) >= target) return {rows, rows + 1};
    ++rows;
  }
}

std::array<double, 2> hex_position(int row, int col) {
  return {static_cast<double>(col) + ((row & 1) ? 0.5 : 0.0), static_cast<double>(row) * std::sqrt(3.0) / 2.0};
}

std::vector<int> hex_neighbors(int rows, int cols, int index) {
  const auto p = hex_position(index / cols, index % cols);
  std::vector<int> out;
  for (int r = std::max(0, index / cols - 1); r <= std::min(rows - 1, index / cols + 1); ++r)
    for (int c = 0; c < cols; ++c) {
      const int j = r * cols + c;
      if (j == index) continue;
      const auto q = hex_position(r, c);
      const double dist = std::hypot(p[0] - q[0], p[1] - q[1]);
      if (std::abs(dist - 1.0) < 1e-9) out.push_back(j);
    }
  return out;
}

namespace {

int best_matching_unit(const Eigen::MatrixXd& weights, const Eigen::RowVectorXd& x, double* distance = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < weights.rows(); ++j) {
    const double d = (weights.row(j) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  if (distance) *distance = std::sqrt(best_d);
  return best;
}

double quantization_error(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& data) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    double d = 0.0;
    best_matching_unit(weights, data.row(i), &d);
    total += d;
  }
  return total / static_cast<double>(data.rows());
}

}  // namespace

SomGrid som_train(const Eigen::MatrixXd& data, int rows, int cols, std::uint64_t seed, const SomOptions& options) {
  if (rows < 1 || cols < 1 || rows * cols < 2) throw Error(ErrorCode::kInvalidArgument, "SOM lattice needs at least 2 neurons");
  if (data.rows() < 1) throw Error(ErrorCode::kInvalidArgument, "SOM training needs at least one sample");
  if (!data.allFinite()) throw Error(ErrorCode::kInvalidArgument, "SOM input has non-finite entries");
  if (options.epochs < 1) throw Error(ErrorCode::kInvalidArgument, "SOM needs at least one epoch");

  const int units = rows * cols;
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  SomGrid g;
  g.rows = rows;
  g.cols = cols;
  g.seed = seed;
  g.degenerate = true;
  for (Eigen::Index i = 1; i < n && g.degenerate; ++i) g.degenerate = data.row(i) == data.row(0);

  Rng rng(seed);
  const Eigen::RowVectorXd lo = data.colwise().minCoeff();
  const Eigen::RowVectorXd hi = data.colwise().maxCoeff();
  g.weights.resize(units, d);
  for (int j = 0; j < units; ++j)
    for (Eigen::Index c = 0; c < d; ++c) g.weights(j, c) = rng.uniform(lo(c), hi(c));

  // squared lattice distances between every pair of neurons
  Eigen::MatrixXd lattice2(units, units);
  for (int a = 0; a < units; ++a)
    for (int b = 0; b < units; ++b) {
      const auto p = hex_position(a / cols, a % cols);
      const auto q = hex_position(b / cols, b % cols);
      lattice2(a, b) = (p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1]);
    }

  const double r0 = options.radius_start.value_or(std::max(1.0, std::max(rows, cols) / 2.0));
  const double r1 = options.radius_end;
  const double lr0 = options.learning_rate_start;
  const double lr1 = options.learning_rate_end;
  const double total = static_cast<double>(options.epochs) * static_cast<double>(n);
  const int coarse_epoch = std::max(1, options.epochs / 2);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  double t = 0.0;
  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
    for (Eigen::Index s : order) {
      const double frac = total > 1.0 ? t / (total - 1.0) : 0.0;
      const double lr = lr0 + (lr1 - lr0) * frac;
      const double radius = r0 + (r1 - r0) * frac;
      const double inv = 1.0 / (2.0 * radius * radius);
      const int bmu = best_matching_unit(g.weights, data.row(s));
      for (int j = 0; j < units; ++j) {
        const double h = std::exp(-lattice2(bmu, j) * inv);
        g.weights.row(j) += lr * h * (data.row(s) - g.weights.row(j));
      }
      t += 1.0;
    }
    g.quantization_history.push_back(quantization_error(g.weights, data));
    if (epoch == coarse_epoch) g.quantization_coarse = g.quantization_history.back();
  }
  g.quantization_final = g.quantization_history.back();

  g.hits.assign(static_cast<std::size_t>(units), 0);
  g.bmu.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int b = best_matching_unit(g.weights, data.row(i));
    g.bmu[static_cast<std::size_t>(i)] = b;
    ++g.hits[static_cast<std::size_t>(b)];
  }
  g.u_matrix.assign(static_cast<std::size_t>(units), 0.0);
  for (int a = 0; a < units; ++a) {
    const auto nb = hex_neighbors(rows, cols, a);
    double sum = 0.0;
    for (int b : nb) {
      const double dist = (g.weights.row(a) - g.weights.row(b)).norm();
      sum += dist;
      if (a < b) g.edges.push_back({a, b, dist});
    }
    if (!nb.empty()) g.u_matrix[static_cast<std::size_t>(a)] = sum / static_cast<double>(nb.size());
  }
  return g;
}

SomClustering som_clusters(const SomGrid& grid, const Eigen::MatrixXd& data, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "SOM clustering needs k >= 2");
  if (static_cast<std::size_t>(data.rows()) != grid.bmu.size())
    throw Error(ErrorCode::kInvalidArgument, "SOM clustering data does not match the trained grid");
  std::vector<int> occupied;
  for (std::size_t j = 0; j < grid.hits.size(); ++j)
    if (grid.hits[j] > 0) occupied.push_back(static_cast<int>(j));
  if (k > static_cast<int>(occupied.size()))
    throw Error(ErrorCode::kInvalidArgument, "k = " + std::to_string(k) + " exceeds the " +
                                                 std::to_string(occupied.size()) + " distinct occupied neurons");

  Eigen::MatrixXd prototypes(static_cast<Eigen::Index>(occupied.size()), grid.weights.cols());
  for (std::size_t i = 0; i < occupied.size(); ++i) prototypes.row(static_cast<Eigen::Index>(i)) = grid.weights.row(occupied[i]);
  const KMeansState km = kmeans(prototypes, k, seed);

  std::vector<int> neuron_labels(grid.hits.size());
  for (std::size_t j = 0; j < grid.hits.size(); ++j) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const double dist = (grid.weights.row(static_cast<Eigen::Index>(j)) - km.centroids.row(c)).squaredNorm();
      if (dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    neuron_labels[j] = best;
  }
  for (std::size_t i = 0; i < occupied.size(); ++i)
    neuron_labels[static_cast<std::size_t>(occupied[i])] = km.labels[i];

  std::vector<int> raw(grid.bmu.size());
  for (std::size_t i = 0; i < grid.bmu.size(); ++i) raw[i] = neuron_labels[static_cast<std::size_t>(grid.bmu[i])];
  // renumber by first appearance among samples and carry the neuron map along
  std::vector<int> remap(static_cast<std::size_t>(k), -1);
  int next = 0;
  for (int l : raw)
    if (remap[static_cast<std::size_t>(l)] < 0) remap[static_cast<std::size_t>(l)] = next++;
  for (int& l : raw) l = remap[static_cast<std::size_t>(l)];
  for (int& l : neuron_labels) l = remap[static_cast<std::size_t>(l)];

  std::optional<double> quality;
  if (data.rows() > k) {
    try {
      quality = silhouette(data, raw).mean;
    } catch (const Error&) {
      quality.reset();
    }
  }
  return {ClusterAssignment(Method::kSom, raw, k, quality, seed), neuron_labels};
}

}  // namespace sewerml::cluster
