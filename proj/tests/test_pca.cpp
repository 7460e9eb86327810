#include <cmath>
#include <random>

#include "doctest.h"

#include "oracles.hpp"
#include "sewerml/cluster.hpp"
#include "sewerml/error.hpp"
#include "sewerml/pca.hpp"

using namespace sewerml;
using pca::PcaResult;
using pca::ClusterScores;
using pca::PriorityRule;
using pca::RankedCluster;
using pca::loading_extremes;
using pca::cluster_scores;
using pca::parse_priority_rule;
using pca::load_priority_rule;
using pca::rank_clusters;

namespace {

Eigen::MatrixXd correlated(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd z(n, 5);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 5; ++j) z(i, j) = g(rng);
  Eigen::MatrixXd mix(5, 5);
  mix << 2, 0.5, 0, 0, 0.1, 0, 1, 0.3, 0, 0, 0, 0, 0.7, 0.2, 0, 0.4, 0, 0, 0.5, 0, 0, 0, 0.1, 0, 0.2;
  return z * mix;
}

ClusterScores means_of(std::initializer_list<std::initializer_list<double>> rows) {
  ClusterScores s;
  s.means.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) s.means(r, c++) = v;
    s.sizes.push_back(1);
    ++r;
  }
  return s;
}

std::vector<int> order_of(const std::vector<RankedCluster>& ranked) {
  std::vector<int> out;
  for (const auto& r : ranked) out.push_back(r.cluster);
  return out;
}

}  // namespace

TEST_CASE("points on y = x give a single diagonal component") {
  Eigen::MatrixXd x(5, 2);
  x << -2, -2, -1, -1, 0, 0, 1, 1, 3, 3;
  const auto r = pca::pca(x);
  CHECK(r.loadings(0, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(r.loadings(1, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(r.explained[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.explained[1] == doctest::Approx(0.0));
}

TEST_CASE("isotropic data spreads variance evenly") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(20000, 4);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (int j = 0; j < 4; ++j) x(i, j) = g(rng);
  const auto r = pca::pca(x);
  for (double e : r.explained) CHECK(std::abs(e - 0.25) < 0.02);
}

TEST_CASE("PCA identities") {
  const auto x = correlated(60, 5);
  const auto r = pca::pca(x);
  const Eigen::MatrixXd gram = r.loadings.transpose() * r.loadings;
  CHECK((gram - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-9);
  double total = 0.0;
  for (std::size_t j = 0; j < r.explained.size(); ++j) {
    total += r.explained[j];
    if (j > 0) CHECK(r.explained[j] <= r.explained[j - 1]);
  }
  CHECK(std::abs(total - 1.0) < 1e-9);
  const Eigen::MatrixXd back = (r.scores * r.loadings.transpose()).rowwise() + r.center;
  CHECK((back - x).cwiseAbs().maxCoeff() < 1e-9);
  const Eigen::MatrixXd sc = r.scores.rowwise() - r.scores.colwise().mean();
  const Eigen::MatrixXd cov = sc.transpose() * sc / 59.0;
  for (int i = 0; i < 5; ++i) {
    CHECK(cov(i, i) == doctest::Approx(r.eigenvalues(i)).epsilon(1e-9));
    for (int j = 0; j < 5; ++j)
      if (i != j) CHECK(std::abs(cov(i, j)) < 1e-9);
  }
  for (int j = 0; j < 5; ++j) {
    Eigen::Index m = 0;
    r.loadings.col(j).cwiseAbs().maxCoeff(&m);
    CHECK(r.loadings(m, j) > 0.0);
  }
  const auto again = pca::pca(x);
  CHECK(again.loadings == r.loadings);
  CHECK(again.scores == r.scores);
}

TEST_CASE("rank-one data is explained by the first component") {
  Eigen::MatrixXd x(8, 3);
  for (int i = 0; i < 8; ++i) x.row(i) << 1.0 * i, -2.0 * i, 0.5 * i;
  const auto r = pca::pca(x);
  CHECK(r.explained[0] >= 1.0 - 1e-9);
}

TEST_CASE("3 x 3 problem matches the closed-form eigendecomposition") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(40, 3);
  for (int i = 0; i < 40; ++i) {
    const double a = g(rng), b = g(rng), c = g(rng);
    x.row(i) << 3.0 * a + 0.2 * c, -1.5 * a + b, 0.5 * b + 0.3 * c;
  }
  // covariance by explicit two-pass sums
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  std::vector<double> mean(3);
  for (int j = 0; j < 3; ++j) {
    std::vector<double> col;
    for (int i = 0; i < 40; ++i) col.push_back(x(i, j));
    mean[static_cast<std::size_t>(j)] = oracle::two_pass_mean(col);
  }
  for (int i = 0; i < 40; ++i)
    for (int p = 0; p < 3; ++p)
      for (int q = 0; q < 3; ++q)
        cov(p, q) += (x(i, p) - mean[static_cast<std::size_t>(p)]) * (x(i, q) - mean[static_cast<std::size_t>(q)]) / 39.0;
  const auto lambda = oracle::sym3_eigenvalues(cov);
  const auto r = pca::pca(x, {"A", "B", "C"});
  const auto extremes = loading_extremes(r, 3);
  for (int j = 0; j < 3; ++j) {
    CHECK(r.eigenvalues(j) == doctest::Approx(lambda[static_cast<std::size_t>(j)]).epsilon(1e-10));
    Eigen::Vector3d v = oracle::sym3_eigenvector(cov, lambda[static_cast<std::size_t>(j)]);
    Eigen::Index m = 0;
    v.cwiseAbs().maxCoeff(&m);
    if (v(m) < 0) v = -v;
    CHECK((v - r.loadings.col(j)).cwiseAbs().maxCoeff() < 1e-8);
    Eigen::Index hi = 0, lo = 0;
    v.maxCoeff(&hi);
    v.minCoeff(&lo);
    const char* names[] = {"A", "B", "C"};
    REQUIRE(extremes[static_cast<std::size_t>(j)].highest.has_value());
    CHECK(extremes[static_cast<std::size_t>(j)].highest->first == names[hi]);
    if (v(lo) < 0) {
      REQUIRE(extremes[static_cast<std::size_t>(j)].lowest.has_value());
      CHECK(extremes[static_cast<std::size_t>(j)].lowest->first == names[lo]);
    }
  }
}

TEST_CASE("equal eigenvalues are flagged") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 0, -1, 0, 0, 1, 0, -1;
  const auto r = pca::pca(x);
  CHECK(r.tied_eigenvalues);
  CHECK(r.eigenvalues(0) == doctest::Approx(r.eigenvalues(1)));
  CHECK_FALSE(pca::pca(correlated(30, 2)).tied_eigenvalues);
}

TEST_CASE("PCA input checks") {
  CHECK_THROWS_AS(pca::pca(Eigen::MatrixXd::Ones(1, 3)), Error);
  try {
    pca::pca(Eigen::MatrixXd::Ones(5, 3));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerate);
  }
  const features::FeatureMatrix raw({"a", "b", "c"}, {"X", "Y"}, correlated(3, 1).leftCols(2));
  CHECK_THROWS_AS(pca::pca(raw), Error);
}

TEST_CASE("loading extremes") {
  PcaResult r;
  r.attributes = {"A", "B", "C"};
  r.loadings.resize(3, 2);
  r.loadings << 0.9, 0.5, -0.1, 0.6, -0.4, 0.62;
  const auto e = loading_extremes(r, 2);
  CHECK(e[0].highest == std::pair<std::string, double>{"A", 0.9});
  CHECK(e[0].lowest == std::pair<std::string, double>{"C", -0.4});
  CHECK(e[1].highest->first == "C");
  CHECK_FALSE(e[1].lowest.has_value());
  CHECK_THROWS_AS(loading_extremes(r, 3), Error);
}

TEST_CASE("cluster mean scores") {
  Eigen::MatrixXd x(5, 2);
  x << 1, 2, -1, -2, 0.5, 0.1, 3, -1, -3.5, 0.9;
  const auto r = pca::pca(x);
  const cluster::ClusterAssignment a(cluster::Method::kSom, {0, 0, 1, 2, 2}, 3);
  const auto s = cluster_scores(r, a, 2);
  CHECK(s.sizes == std::vector<int>{2, 1, 2});
  CHECK(s.means.row(1) == r.scores.row(2));
  CHECK((s.means.row(0) - 0.5 * (r.scores.row(0) + r.scores.row(1))).norm() < 1e-15);
  Eigen::MatrixXd sym(4, 2);
  sym << 1, 2, -1, -2, 3, -1, -3, 1;
  const auto rs = pca::pca(sym);
  const auto ss = cluster_scores(rs, cluster::ClusterAssignment(cluster::Method::kSom, {0, 0, 1, 1}, 2), 2);
  CHECK(ss.means.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("priority rule parsing") {
  const auto rule = parse_priority_rule(R"({"name":"r","weights":{"PC1":1,"pc-4":-0.5},"rationale":"why"})", "mem");
  CHECK(rule.weights.at(0) == 1.0);
  CHECK(rule.weights.at(3) == -0.5);
  CHECK(rule.rationale == "why");
  CHECK_THROWS_AS(parse_priority_rule(R"({"weights":{"PC1":0}})", "mem"), Error);
  CHECK_THROWS_AS(parse_priority_rule(R"({"weights":{"X1":1}})", "mem"), Error);
  CHECK_THROWS_AS(parse_priority_rule("not json", "mem"), Error);
  const auto shipped = load_priority_rule(SEWERML_SOURCE_DIR "/config/default_priority_rule.json");
  CHECK(shipped.weights.size() == 3);
  CHECK(shipped.weights.at(3) < 0.0);
}

TEST_CASE("ranking on a single component") {
  PriorityRule rule;
  rule.weights[0] = 1.0;
  const auto ranked = rank_clusters(means_of({{2.0}, {-1.0}, {0.0}}), rule);
  CHECK(order_of(ranked) == std::vector<int>{0, 2, 1});
  CHECK(ranked[0].rationale.find("high PC1") != std::string::npos);
  CHECK_FALSE(ranked[0].indistinguishable);
}

TEST_CASE("all-zero means tie in index order and are flagged") {
  PriorityRule rule;
  rule.weights[0] = 1.0;
  rule.weights[1] = -2.0;
  const auto ranked = rank_clusters(means_of({{0, 0}, {0, 0}, {0, 0}}), rule);
  CHECK(order_of(ranked) == std::vector<int>{0, 1, 2});
  for (const auto& r : ranked) {
    CHECK(r.indistinguishable);
    CHECK(r.rationale.find("indistinguishable") != std::string::npos);
  }
}

TEST_CASE("ranking ignores positive rescaling of the weights") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    ClusterScores s;
    s.means.resize(5, 4);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 4; ++j) s.means(i, j) = g(rng);
    s.sizes.assign(5, 1);
    PriorityRule rule;
    rule.weights = {{0, 1.0}, {1, 1.0}, {3, -1.0}};
    PriorityRule scaled = rule;
    for (auto& [pc, w] : scaled.weights) w *= 0.37 + trial;
    CHECK(order_of(rank_clusters(s, rule)) == order_of(rank_clusters(s, scaled)));
  }
}

TEST_CASE("rules referencing missing components are refused") {
  PriorityRule rule;
  rule.weights[5] = 1.0;
  CHECK_THROWS_AS(rank_clusters(means_of({{1, 2}}), rule), Error);
}
