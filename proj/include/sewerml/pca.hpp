#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sewerml/cluster.hpp"
#include "sewerml/features.hpp"

namespace sewerml::pca {

struct PcaResult {
  std::vector<std::string> attributes;
  std::vector<std::string> row_ids;
  Eigen::MatrixXd loadings;      // d x p, unit-norm columns
  Eigen::MatrixXd scores;        // n x p
  Eigen::VectorXd eigenvalues;   // sample covariance (n - 1), descending
  std::vector<double> explained; // eigenvalue / trace
  Eigen::RowVectorXd center;     // column means removed before projection
  bool tied_eigenvalues = false;
};

/// Eigendecomposition of the sample covariance of `data`. Within each
/// loading column the entry of largest magnitude is made positive.
PcaResult pca(const Eigen::MatrixXd& data, std::vector<std::string> attributes = {},
              std::vector<std::string> row_ids = {});

/// Correlation PCA of a scaled feature matrix; raw matrices are refused.
PcaResult pca(const features::FeatureMatrix& matrix);

struct LoadingExtremes {
  int component = 0;
  std::optional<std::pair<std::string, double>> highest;  // largest positive loading
  std::optional<std::pair<std::string, double>> lowest;   // most negative loading
  std::vector<std::pair<std::string, double>> sorted;     // descending
};

std::vector<LoadingExtremes> loading_extremes(const PcaResult& result, int n_pcs = 4);

struct ClusterScores {
  Eigen::MatrixXd means;   // k x n_pcs
  std::vector<int> sizes;
};

ClusterScores cluster_scores(const PcaResult& result, const cluster::ClusterAssignment& assignment, int n_pcs = 4);

struct PriorityRule {
  std::string name;
  std::map<int, double> weights;  // 0-based component -> weight
  std::string rationale;
};

PriorityRule parse_priority_rule(const std::string& json_text, const std::string& source);
PriorityRule load_priority_rule(const std::filesystem::path& path);

struct RankedCluster {
  int cluster = 0;
  double score = 0.0;
  bool indistinguishable = false;  // same score as a neighbour in the ranking
  std::vector<std::pair<int, double>> contributions;  // component -> weight * mean, largest |.| first
  std::string rationale;
};

/// Orders clusters by sum_j weight_j * mean_score_j, largest first; ties keep
/// cluster index order. `extremes` (optional) enriches the rationale text.
std::vector<RankedCluster> rank_clusters(const ClusterScores& scores, const PriorityRule& rule,
                                         const std::vector<LoadingExtremes>& extremes = {});

}  // namespace sewerml::pca
