#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sewerml::cluster {

enum class Method { kKMeans, kHca, kSom };

const char* to_string(Method m);
Method method_from_string(std::string_view s);

/// Rows labelled 0..k-1 with every label in use.
class ClusterAssignment {
 public:
  ClusterAssignment(Method method, std::vector<int> labels, int k, std::optional<double> quality = std::nullopt,
                    std::optional<std::uint64_t> seed = std::nullopt, std::vector<std::string> row_ids = {});

  Method method() const { return method_; }
  const std::vector<int>& labels() const { return labels_; }
  int k() const { return k_; }
  std::size_t size() const { return labels_.size(); }
  /// Mean silhouette, when defined.
  std::optional<double> quality() const { return quality_; }
  std::optional<std::uint64_t> seed() const { return seed_; }
  const std::vector<std::string>& row_ids() const { return row_ids_; }

  ClusterAssignment with_quality(std::optional<double> q) const;
  ClusterAssignment with_row_ids(std::vector<std::string> ids) const;

 private:
  Method method_;
  std::vector<int> labels_;
  int k_;
  std::optional<double> quality_;
  std::optional<std::uint64_t> seed_;
  std::vector<std::string> row_ids_;
};

/// Renumbers labels in order of first appearance.
std::vector<int> canonical_labels(const std::vector<int>& labels);

// k-means ---------------------------------------------------------------------

struct KMeansOptions {
  int restarts = 20;
  int max_iter = 300;
};

struct KMeansState {
  Eigen::MatrixXd centroids;  // k x d
  std::vector<int> labels;
  double sse = 0.0;
  int iterations = 0;
  std::vector<double> sse_history;  // one entry per iteration of the kept restart
  std::uint64_t seed = 0;           // seed of the kept restart
};

/// Best of `restarts` runs (restart r seeded with seed + r). Each run uses
/// k-means++ seeding, Lloyd iterations until the assignment is stable, then
/// single-point moves until no move lowers the SSE.
KMeansState kmeans(const Eigen::MatrixXd& data, int k, std::uint64_t seed, const KMeansOptions& options = {});

double sum_squared_error(const Eigen::MatrixXd& data, const std::vector<int>& labels, int k);

/// True if no single point can move to another cluster (recomputing both
/// means) and lower the SSE by more than `tolerance` relative.
bool is_single_move_optimal(const Eigen::MatrixXd& data, const std::vector<int>& labels, int k,
                            double tolerance = 1e-12);

ClusterAssignment to_assignment(const KMeansState& state, Method method = Method::kKMeans);

// silhouette --------------------------------------------------------------------

struct Silhouette {
  std::vector<double> values;  // s(i)
  double mean = 0.0;           // SC
};

/// Euclidean silhouette. Points alone in their cluster score 0.
Silhouette silhouette(const Eigen::MatrixXd& data, const std::vector<int>& labels);

struct KSelection {
  int best_k = 0;
  std::vector<std::pair<int, double>> scores;  // (k, mean SC)
  KMeansState best;
};

/// k-means + silhouette for every k in [k_min, k_max]; ties go to the
/// smaller k.
KSelection select_k(const Eigen::MatrixXd& data, int k_min, int k_max, std::uint64_t seed,
                    const KMeansOptions& options = {});

// Ward hierarchical clustering --------------------------------------------------

struct Merge {
  int a = 0;  // node ids: leaves 0..n-1, merge i creates node n+i; a < b
  int b = 0;
  double height = 0.0;
  int size = 0;
};

struct Dendrogram {
  std::vector<Merge> merges;
  std::vector<std::string> leaf_ids;

  std::size_t leaves() const { return merges.size() + 1; }
  double max_height() const { return merges.empty() ? 0.0 : merges.back().height; }
};

/// Agglomerative clustering with Euclidean distance and Ward linkage,
/// updated by the Lance-Williams recurrence. Heights are in the Euclidean
/// scale: two singletons merge at their distance.
Dendrogram hca_ward(const Eigen::MatrixXd& data, std::vector<std::string> leaf_ids = {});

/// n x n matrix of merge heights at which each pair first shares a cluster.
Eigen::MatrixXd cophenetic(const Dendrogram& d);

struct DendrogramCut {
  ClusterAssignment assignment;
  double cut_height = 0.0;
  double lower = 0.0;  // any height in (lower, upper] gives the same partition
  double upper = 0.0;
  bool in_rule_of_thumb = false;  // overlaps [D_max / 3, 2 D_max / 3]
};

DendrogramCut cut_dendrogram_k(const Dendrogram& d, int k);
/// Keeps merges strictly below `height`; requires 0 < height <= D_max.
DendrogramCut cut_dendrogram_height(const Dendrogram& d, double height);

std::string to_newick(const Dendrogram& d);

// Self-organizing map -------------------------------------------------------------

/// Lattice size from n_nodes ~ 5 sqrt(n_samples): the near-square pair
/// (cols - rows in {0, 1}) with the smallest product not below
/// floor(5 sqrt(n)).
std::pair<int, int> som_grid_size(int n_samples);

/// Offset-row hexagonal lattice: odd rows shift half a cell right.
std::array<double, 2> hex_position(int row, int col);
std::vector<int> hex_neighbors(int rows, int cols, int index);

struct SomOptions {
  int epochs = 200;
  double learning_rate_start = 0.5;
  double learning_rate_end = 0.01;
  std::optional<double> radius_start;  // default max(rows, cols) / 2
  double radius_end = 1.0;
};

struct NeighborEdge {
  int a = 0;
  int b = 0;
  double distance = 0.0;  // between the two weight vectors
};

struct SomGrid {
  int rows = 0;
  int cols = 0;
  Eigen::MatrixXd weights;  // (rows * cols) x d, neuron index = row * cols + col
  std::vector<int> hits;
  std::vector<int> bmu;     // per sample
  std::vector<NeighborEdge> edges;
  std::vector<double> u_matrix;  // mean distance to lattice neighbours, per neuron
  std::vector<double> quantization_history;  // mean BMU distance after each epoch
  double quantization_coarse = 0.0;  // after the first half of training
  double quantization_final = 0.0;
  bool degenerate = false;  // all samples identical
  std::uint64_t seed = 0;
};

/// Sequential training with linearly decaying learning rate and Gaussian
/// neighbourhood radius.
SomGrid som_train(const Eigen::MatrixXd& data, int rows, int cols, std::uint64_t seed, const SomOptions& options = {});

struct SomClustering {
  ClusterAssignment assignment;
  std::vector<int> neuron_labels;  // per neuron
};

/// k-means over the weight vectors of occupied neurons; every sample takes
/// its BMU's cluster. Unoccupied neurons get the nearest cluster centroid.
SomClustering som_clusters(const SomGrid& grid, const Eigen::MatrixXd& data, int k, std::uint64_t seed);

// agreement between methods ------------------------------------------------------

struct Alignment {
  std::vector<int> relabeled;  // other's rows in the reference label space
  std::vector<int> mapping;    // other label -> reference label
  double agreement = 0.0;      // matched rows / n
  double adjusted_rand = 0.0;
};

/// One-to-one label matching maximising the contingency diagonal:
/// exhaustive for up to 8 labels, Hungarian beyond.
Alignment align_labels(const ClusterAssignment& reference, const ClusterAssignment& other);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace sewerml::cluster
