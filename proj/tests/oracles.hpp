#pragma once

// Reference computations for the test suite. Nothing here links against the
// library under test; each function is a separate, deliberately naive
// formulation of the quantity it checks.

#include <array>
#include <complex>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// W(a, b) of a continuous signal by composite Simpson integration on a
/// grid `per_unit` times finer than one time unit, over |t - b| <= 7 a
/// (the Morlet envelope is below 1e-14 beyond).
std::complex<double> morlet_cwt_dense(const std::function<double(double)>& f, double a, double b, double fb, double fc,
                                      int per_unit = 16);

/// Global minimum SSE over every split of the rows into two non-empty groups.
double best_two_partition_sse(const Eigen::MatrixXd& x);

struct NaiveMerge {
  std::vector<int> members;  // sorted union
  double height = 0.0;
};

/// Ward agglomeration recomputing every cluster-pair cost from the member
/// points: sqrt(2 |A||B| / (|A| + |B|)) * |mean A - mean B|.
std::vector<NaiveMerge> naive_ward(const Eigen::MatrixXd& x);
Eigen::MatrixXd naive_cophenetic(const Eigen::MatrixXd& x);

double two_pass_mean(const std::vector<double>& v);
double two_pass_sample_sd(const std::vector<double>& v);
double two_pass_pearson_r2(const std::vector<double>& x, const std::vector<double>& y);

/// Smallest-product (rows, cols) with cols - rows in {0, 1} and
/// rows * cols >= floor(5 sqrt(n)), found by scanning all pairs.
std::pair<int, int> som_size_by_enumeration(int n);

/// Adjusted Rand index from raw pair counts.
double ari_by_pair_counting(const std::vector<int>& a, const std::vector<int>& b);

/// Closed-form eigenvalues of a symmetric 3x3 matrix, descending.
std::array<double, 3> sym3_eigenvalues(const Eigen::Matrix3d& m);
/// Unit eigenvector for a simple eigenvalue via cross products of rows of
/// (m - lambda I); sign unspecified.
Eigen::Vector3d sym3_eigenvector(const Eigen::Matrix3d& m, double lambda);

/// Mean silhouette evaluated straight from the definition.
double naive_silhouette(const Eigen::MatrixXd& x, const std::vector<int>& labels);

}  // namespace oracle
