#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"

#include "oracles.hpp"
#include "sewerml/cluster.hpp"
#include "sewerml/error.hpp"
#include "sewerml/fixture.hpp"

using namespace sewerml;
using namespace sewerml::cluster;

namespace {

Eigen::MatrixXd random_points(int n, int d, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) x(i, j) = g(rng);
  return x;
}

Eigen::MatrixXd random_rotation(int d, unsigned seed) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_points(d, d, seed));
  return qr.householderQ();
}

double agreement(const std::vector<int>& a, int ka, const std::vector<int>& b, int kb) {
  return align_labels(ClusterAssignment(Method::kKMeans, a, ka), ClusterAssignment(Method::kHca, b, kb)).agreement;
}

std::vector<int> members_of(const Dendrogram& d, int node) {
  const int n = static_cast<int>(d.leaves());
  if (node < n) return {node};
  const auto& m = d.merges[static_cast<std::size_t>(node - n)];
  auto a = members_of(d, m.a);
  const auto b = members_of(d, m.b);
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  return a;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

// k-means ------------------------------------------------------------------------

TEST_CASE("k-means with k = n puts every point on its own centroid") {
  const auto x = random_points(6, 2, 1);
  const auto s = kmeans(x, 6, 1);
  CHECK(s.sse == 0.0);
  std::set<int> labels(s.labels.begin(), s.labels.end());
  CHECK(labels.size() == 6);
}

TEST_CASE("k-means finds the means of two separated blobs") {
  const auto b = fixture::planted_blobs({7, 5}, 2, 50.0, 1.0, 11);
  const auto s = kmeans(b.points, 2, 3);
  for (int c = 0; c < 2; ++c) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(2);
    int count = 0;
    for (int i = 0; i < b.points.rows(); ++i)
      if (b.labels[static_cast<std::size_t>(i)] == c) {
        mean += b.points.row(i);
        ++count;
      }
    mean /= count;
    const int label = s.labels[static_cast<std::size_t>(std::find(b.labels.begin(), b.labels.end(), c) - b.labels.begin())];
    CHECK((s.centroids.row(label) - mean).norm() < 1e-9);
  }
}

TEST_CASE("k-means with k = 2 reaches the exhaustive optimum on small inputs") {
  for (unsigned seed = 0; seed < 20; ++seed) {
    const int n = 3 + static_cast<int>(seed % 6);
    const int d = 1 + static_cast<int>(seed % 3);
    const auto x = random_points(n, d, 100 + seed);
    const auto s = kmeans(x, 2, seed);
    CHECK(s.sse == doctest::Approx(oracle::best_two_partition_sse(x)).epsilon(1e-9));
  }
}

TEST_CASE("k-means state invariants") {
  const auto x = random_points(40, 3, 5);
  const auto s = kmeans(x, 4, 9);
  for (std::size_t i = 1; i < s.sse_history.size(); ++i) CHECK(s.sse_history[i] <= s.sse_history[i - 1] * (1 + 1e-12));
  CHECK(is_single_move_optimal(x, s.labels, 4));
  CHECK(s.sse == doctest::Approx(sum_squared_error(x, s.labels, 4)).epsilon(1e-12));
  for (int c = 0; c < 4; ++c) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(3);
    int count = 0;
    for (int i = 0; i < 40; ++i)
      if (s.labels[static_cast<std::size_t>(i)] == c) {
        mean += x.row(i);
        ++count;
      }
    REQUIRE(count > 0);
    CHECK((s.centroids.row(c) - mean / count).norm() < 1e-12);
  }
  const auto again = kmeans(x, 4, 9);
  CHECK(again.labels == s.labels);
  CHECK(again.sse == s.sse);
}

TEST_CASE("k-means argument checks") {
  const auto x = random_points(5, 2, 1);
  CHECK(code_of([&] { kmeans(x, 1, 0); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([&] { kmeans(x, 6, 0); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("cluster assignments require every label to be used") {
  CHECK_THROWS_AS(ClusterAssignment(Method::kKMeans, {0, 0, 2}, 3), Error);
  CHECK_THROWS_AS(ClusterAssignment(Method::kKMeans, {0, 3}, 2), Error);
  CHECK(canonical_labels({2, 2, 0, 1, 0}) == std::vector<int>{0, 0, 1, 2, 1});
}

// silhouette -----------------------------------------------------------------------

TEST_CASE("silhouette by hand") {
  Eigen::MatrixXd x(4, 1);
  x << 0, 1, 10, 11;
  const auto s = silhouette(x, {0, 0, 1, 1});
  CHECK(s.values[0] == doctest::Approx(9.5 / 10.5).epsilon(1e-15));
  CHECK(s.values[3] == doctest::Approx(9.5 / 10.5).epsilon(1e-15));
  CHECK(s.values[1] == doctest::Approx(8.5 / 9.5).epsilon(1e-15));
}

TEST_CASE("silhouette is one when a point coincides with its whole cluster") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 1, 1, 1, 1, 1, 5, 5;
  const auto s = silhouette(x, {0, 0, 0, 1});
  CHECK(s.values[0] == 1.0);
  CHECK(s.values[3] == 0.0);  // singleton
}

TEST_CASE("silhouette matches the definition and is invariant under relabelling and rotation") {
  const auto x = random_points(25, 3, 7);
  std::vector<int> labels(25);
  for (int i = 0; i < 25; ++i) labels[static_cast<std::size_t>(i)] = i % 3;
  labels[0] = 3;  // singleton
  const auto s = silhouette(x, labels);
  CHECK(s.mean == doctest::Approx(oracle::naive_silhouette(x, labels)).epsilon(1e-12));
  for (double v : s.values) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  std::vector<int> swapped = labels;
  for (int& l : swapped) l = (l + 2) % 4;
  const auto t = silhouette(x, swapped);
  for (std::size_t i = 0; i < s.values.size(); ++i) CHECK(t.values[i] == doctest::Approx(s.values[i]).epsilon(1e-14));
  const Eigen::MatrixXd rotated = x * random_rotation(3, 8) + Eigen::MatrixXd::Constant(25, 3, 4.0);
  CHECK(silhouette(rotated, labels).mean == doctest::Approx(s.mean).epsilon(1e-12));
}

// k selection ----------------------------------------------------------------------

TEST_CASE("select_k recovers the number of planted blobs") {
  const auto four = fixture::planted_blobs({5, 4, 4, 4}, 3, 10.0, 1.0, 21);
  const auto sel = select_k(four.points, 2, 8, 21);
  CHECK(sel.best_k == 4);
  CHECK(sel.scores.size() == 7);
  const auto two = fixture::planted_blobs({8, 9}, 2, 12.0, 1.0, 22);
  CHECK(select_k(two.points, 2, 8, 22).best_k == 2);
}

TEST_CASE("select_k on identical points reports degenerate data") {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(10, 3);
  try {
    select_k(x, 2, 5, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerate);
    CHECK(std::string(e.what()).find("degenerate data") != std::string::npos);
  }
}

// Ward -----------------------------------------------------------------------------

TEST_CASE("two points merge at their distance") {
  Eigen::MatrixXd x(2, 2);
  x << 0, 0, 3, 4;
  const auto d = hca_ward(x);
  REQUIRE(d.merges.size() == 1);
  CHECK(d.merges[0].height == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(d.merges[0].size == 2);
}

TEST_CASE("two tight pairs merge first") {
  Eigen::MatrixXd x(4, 1);
  x << 0, 1, 10, 12;
  const auto d = hca_ward(x, {"a", "b", "c", "d"});
  REQUIRE(d.merges.size() == 3);
  CHECK(members_of(d, 4) == std::vector<int>{0, 1});
  CHECK(members_of(d, 5) == std::vector<int>{2, 3});
  CHECK(d.merges[0].height == doctest::Approx(1.0));
  CHECK(d.merges[1].height == doctest::Approx(2.0));
  // sqrt(2 * 2 * 2 / 4) * |0.5 - 11|
  CHECK(d.merges[2].height == doctest::Approx(std::sqrt(2.0) * 10.5).epsilon(1e-14));
  const auto cut = cut_dendrogram_k(d, 2);
  CHECK(cut.assignment.labels() == std::vector<int>{0, 0, 1, 1});
  CHECK(cut.lower == doctest::Approx(2.0));
  CHECK(cut.upper == doctest::Approx(std::sqrt(2.0) * 10.5));
  const auto newick = to_newick(d);
  for (const char* id : {"a", "b", "c", "d"}) CHECK(newick.find(id) != std::string::npos);
  CHECK(newick.substr(newick.find_last_not_of('\n')) == ";\n");
}

TEST_CASE("dendrogram cuts at the extremes") {
  const auto x = random_points(9, 2, 3);
  const auto d = hca_ward(x);
  const auto all = cut_dendrogram_k(d, 9);
  CHECK(all.assignment.k() == 9);
  std::set<int> distinct(all.assignment.labels().begin(), all.assignment.labels().end());
  CHECK(distinct.size() == 9);
  const auto one = cut_dendrogram_k(d, 1);
  CHECK(one.assignment.labels() == std::vector<int>(9, 0));
  CHECK_THROWS_AS(cut_dendrogram_k(d, 10), Error);
  const auto by_height = cut_dendrogram_height(d, d.max_height());
  CHECK(by_height.assignment.k() == 2);
}

TEST_CASE("Ward merges match the naive recomputation and heights never decrease") {
  for (unsigned seed = 0; seed < 15; ++seed) {
    const int n = 3 + static_cast<int>(seed % 12);
    const auto x = random_points(n, 1 + static_cast<int>(seed % 4), 300 + seed);
    const auto d = hca_ward(x);
    const auto naive = oracle::naive_ward(x);
    REQUIRE(d.merges.size() == naive.size());
    for (std::size_t i = 0; i < naive.size(); ++i) {
      if (i > 0) CHECK(d.merges[i].height >= d.merges[i - 1].height);
      CHECK(members_of(d, n + static_cast<int>(i)) == naive[i].members);
      CHECK(d.merges[i].height == doctest::Approx(naive[i].height).epsilon(1e-9));
    }
    const Eigen::MatrixXd c = cophenetic(d);
    CHECK((c - oracle::naive_cophenetic(x)).cwiseAbs().maxCoeff() <= 1e-9 * d.max_height());
  }
}

// SOM ------------------------------------------------------------------------------

TEST_CASE("SOM lattice sizes") {
  CHECK(som_grid_size(17) == std::pair{4, 5});
  CHECK(som_grid_size(4) == std::pair{3, 4});
  CHECK(som_grid_size(100) == std::pair{7, 8});
  for (int n = 4; n <= 600; ++n) CHECK(som_grid_size(n) == oracle::som_size_by_enumeration(n));
  CHECK_THROWS_AS(som_grid_size(3), Error);
}

TEST_CASE("hex lattice neighbourhoods") {
  // 4 x 5 lattice, offset odd rows
  CHECK(hex_neighbors(4, 5, 0).size() == 2);
  CHECK(hex_neighbors(4, 5, 7).size() == 6);
  for (int i = 0; i < 20; ++i)
    for (int j : hex_neighbors(4, 5, i)) {
      const auto a = hex_position(i / 5, i % 5);
      const auto b = hex_position(j / 5, j % 5);
      CHECK(std::hypot(a[0] - b[0], a[1] - b[1]) == doctest::Approx(1.0));
      const auto back = hex_neighbors(4, 5, j);
      CHECK(std::find(back.begin(), back.end(), i) != back.end());
    }
}

TEST_CASE("a single sample pulls the whole map onto itself") {
  Eigen::MatrixXd x(1, 3);
  x << 0.3, -1.2, 2.0;
  const auto g = som_train(x, 3, 4, 5);
  CHECK(g.quantization_final < 1e-6);
  CHECK(g.hits[static_cast<std::size_t>(g.bmu[0])] == 1);
}

TEST_CASE("SOM training invariants and determinism") {
  const auto b = fixture::planted_blobs({9, 8}, 3, 20.0, 1.0, 31);
  const auto [rows, cols] = som_grid_size(17);
  const auto g = som_train(b.points, rows, cols, 7);
  CHECK(std::accumulate(g.hits.begin(), g.hits.end(), 0) == 17);
  CHECK(g.bmu.size() == 17);
  CHECK(g.u_matrix.size() == static_cast<std::size_t>(rows * cols));
  CHECK(g.quantization_final <= g.quantization_coarse);
  CHECK_FALSE(g.degenerate);
  const auto h = som_train(b.points, rows, cols, 7);
  CHECK(h.weights == g.weights);
  CHECK(h.bmu == g.bmu);

  // BMUs of the two blobs are never lattice neighbours
  for (int i = 0; i < 17; ++i)
    for (int j = 0; j < 17; ++j) {
      if (b.labels[static_cast<std::size_t>(i)] == b.labels[static_cast<std::size_t>(j)]) continue;
      const auto nb = hex_neighbors(rows, cols, g.bmu[static_cast<std::size_t>(i)]);
      CHECK(g.bmu[static_cast<std::size_t>(i)] != g.bmu[static_cast<std::size_t>(j)]);
      CHECK(std::find(nb.begin(), nb.end(), g.bmu[static_cast<std::size_t>(j)]) == nb.end());
    }
  // the largest neighbour distance is a ridge far above the in-blob spread
  double ridge = 0.0;
  for (const auto& e : g.edges) ridge = std::max(ridge, e.distance);
  double spread = 0.0;
  for (int i = 0; i < 17; ++i) spread = std::max(spread, (b.points.row(i) - g.weights.row(g.bmu[static_cast<std::size_t>(i)])).norm());
  CHECK(ridge > 2.0 * spread);
}

TEST_CASE("identical samples flag a degenerate map") {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Constant(6, 2, 0.5);
  const auto g = som_train(x, 2, 3, 1);
  CHECK(g.degenerate);
  CHECK(g.weights.rows() == 6);
}

TEST_CASE("SOM-derived clusters agree with direct k-means") {
  const auto two = fixture::planted_blobs({9, 8}, 3, 20.0, 1.0, 41);
  const auto [r2, c2] = som_grid_size(17);
  const auto sc2 = som_clusters(som_train(two.points, r2, c2, 41), two.points, 2, 41);
  const auto km2 = kmeans(two.points, 2, 41);
  CHECK(agreement(km2.labels, 2, sc2.assignment.labels(), 2) == 1.0);

  const auto four = fixture::planted_blobs({5, 4, 4, 4}, 3, 10.0, 1.0, 42);
  const auto sc4 = som_clusters(som_train(four.points, r2, c2, 42), four.points, 4, 42);
  const auto km4 = kmeans(four.points, 4, 42);
  CHECK(sc4.assignment.k() == 4);
  CHECK(agreement(km4.labels, 4, sc4.assignment.labels(), 4) >= 0.9);
}

TEST_CASE("every method recovers well-separated blobs exactly") {
  for (unsigned seed = 50; seed < 55; ++seed) {
    const auto b = fixture::planted_blobs({5, 4, 4, 4}, 3, 10.0, 1.0, seed);
    const auto km = kmeans(b.points, 4, seed);
    const auto hc = cut_dendrogram_k(hca_ward(b.points), 4);
    const auto [rows, cols] = som_grid_size(17);
    const auto sc = som_clusters(som_train(b.points, rows, cols, seed), b.points, 4, seed);
    CHECK(agreement(b.labels, 4, km.labels, 4) == 1.0);
    CHECK(agreement(b.labels, 4, hc.assignment.labels(), 4) == 1.0);
    CHECK(agreement(b.labels, 4, sc.assignment.labels(), 4) == 1.0);
  }
}

// alignment ------------------------------------------------------------------------

TEST_CASE("label alignment") {
  const std::vector<int> ref{0, 0, 1, 1, 2, 2, 3, 3, 0, 1, 2, 3, 0, 1, 2, 3, 3};
  std::vector<int> permuted;
  for (int l : ref) permuted.push_back((l + 1) % 4);
  const auto a = align_labels(ClusterAssignment(Method::kSom, ref, 4), ClusterAssignment(Method::kKMeans, permuted, 4));
  CHECK(a.agreement == 1.0);
  CHECK(a.relabeled == ref);
  CHECK(a.adjusted_rand == doctest::Approx(1.0));

  std::vector<int> one_off = ref;
  one_off[4] = 0;
  CHECK(agreement(ref, 4, one_off, 4) == doctest::Approx(16.0 / 17.0).epsilon(1e-15));
}

TEST_CASE("alignment with more than eight labels") {
  std::vector<int> ref;
  for (int i = 0; i < 60; ++i) ref.push_back(i % 10);
  std::vector<int> permuted;
  for (int l : ref) permuted.push_back((l * 3 + 1) % 10);
  CHECK(agreement(ref, 10, permuted, 10) == 1.0);
}

TEST_CASE("adjusted Rand index matches pair counting") {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> pick(0, 3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> a(30), b(30);
    for (int i = 0; i < 30; ++i) {
      a[static_cast<std::size_t>(i)] = i % 4;
      b[static_cast<std::size_t>(i)] = trial % 2 ? pick(rng) : (i % 4 + (i % 5 == 0)) % 4;
    }
    CHECK(adjusted_rand_index(a, b) == doctest::Approx(oracle::ari_by_pair_counting(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("independent labellings have adjusted Rand near zero") {
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> pick(0, 3);
  double worst = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    std::vector<int> a(2000), b(2000);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = pick(rng);
      b[i] = pick(rng);
    }
    worst = std::max(worst, std::abs(adjusted_rand_index(a, b)));
  }
  CHECK(worst < 0.1);
}
