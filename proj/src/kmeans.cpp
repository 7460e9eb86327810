#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "sewerml/cluster.hpp"
#include "sewerml/error.hpp"
#include "sewerml/rng.hpp"

namespace sewerml::cluster {

const char* to_string(Method m) {
  switch (m) {
    case Method::kKMeans: return "kmeans";
    case Method::kHca: return "hca";
    case Method::kSom: return "som";
  }
  return "kmeans";
}

Method method_from_string(std::string_view s) {
  if (s == "kmeans") return Method::kKMeans;
  if (s == "hca") return Method::kHca;
  if (s == "som") return Method::kSom;
  throw Error(ErrorCode::kConfig, "unknown clustering method '" + std::string(s) + "'");
}

ClusterAssignment::ClusterAssignment(Method method, std::vector<int> labels, int k, std::optional<double> quality,
                                     std::optional<std::uint64_t> seed, std::vector<std::string> row_ids)
    : method_(method),
      labels_(std::move(labels)),
      k_(k),
      quality_(quality),
      seed_(seed),
      row_ids_(std::move(row_ids)) {
  if (k_ < 1) throw Error(ErrorCode::kInvalidArgument, "cluster count must be at least 1");
  if (!row_ids_.empty() && row_ids_.size() != labels_.size())
    throw Error(ErrorCode::kInvalidArgument, "cluster assignment row ids do not match labels");
  std::vector<int> count(static_cast<std::size_t>(k_), 0);
  for (int l : labels_) {
    if (l < 0 || l >= k_) throw Error(ErrorCode::kInvalidArgument, "cluster label out of range");
    ++count[static_cast<std::size_t>(l)];
  }
  for (int c = 0; c < k_; ++c)
    if (count[static_cast<std::size_t>(c)] == 0)
      throw Error(ErrorCode::kInvalidArgument, "cluster " + std::to_string(c) + " is empty");
}

ClusterAssignment ClusterAssignment::with_quality(std::optional<double> q) const {
  ClusterAssignment out = *this;
  out.quality_ = q;
  return out;
}

ClusterAssignment ClusterAssignment::with_row_ids(std::vector<std::string> ids) const {
  return ClusterAssignment(method_, labels_, k_, quality_, seed_, std::move(ids));
}

std::vector<int> canonical_labels(const std::vector<int>& labels) {
  std::map<int, int> remap;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) {
    auto [it, inserted] = remap.try_emplace(l, static_cast<int>(remap.size()));
    out.push_back(it->second);
  }
  return out;
}

namespace {

Eigen::MatrixXd cluster_means(const Eigen::MatrixXd& data, const std::vector<int>& labels, int k) {
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(k, data.cols());
  std::vector<int> count(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    means.row(l) += data.row(i);
    ++count[static_cast<std::size_t>(l)];
  }
  for (int c = 0; c < k; ++c)
    if (count[static_cast<std::size_t>(c)] > 0) means.row(c) /= static_cast<double>(count[static_cast<std::size_t>(c)]);
  return means;
}

// k-means++ seeding
Eigen::MatrixXd seed_centroids(const Eigen::MatrixXd& data, int k, Rng& rng) {
  const Eigen::Index n = data.rows();
  Eigen::MatrixXd centroids(k, data.cols());
  std::vector<bool> chosen(static_cast<std::size_t>(n), false);
  auto first = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
  centroids.row(0) = data.row(first);
  chosen[static_cast<std::size_t>(first)] = true;
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = (data.row(i) - centroids.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    Eigen::Index pick = -1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[static_cast<std::size_t>(i)];
        if (d2[static_cast<std::size_t>(i)] > 0.0 && acc > target) {
          pick = i;
          break;
        }
      }
      if (pick < 0)  // rounding left target beyond the last positive weight
        for (Eigen::Index i = n - 1; i >= 0; --i)
          if (d2[static_cast<std::size_t>(i)] > 0.0) {
            pick = i;
            break;
          }
    } else {
      for (Eigen::Index i = 0; i < n; ++i)
        if (!chosen[static_cast<std::size_t>(i)]) {
          pick = i;
          break;
        }
    }
    centroids.row(c) = data.row(pick);
    chosen[static_cast<std::size_t>(pick)] = true;
    for (Eigen::Index i = 0; i < n; ++i)
      d2[static_cast<std::size_t>(i)] =
          std::min(d2[static_cast<std::size_t>(i)], (data.row(i) - centroids.row(c)).squaredNorm());
  }
  return centroids;
}

int nearest(const Eigen::MatrixXd& centroids, const Eigen::RowVectorXd& x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

KMeansState run_once(const Eigen::MatrixXd& data, int k, std::uint64_t seed, int max_iter) {
  const Eigen::Index n = data.rows();
  Rng rng(seed);
  KMeansState st;
  st.seed = seed;
  st.centroids = seed_centroids(data, k, rng);
  st.labels.assign(static_cast<std::size_t>(n), -1);

  for (int iter = 1; iter <= max_iter; ++iter) {
    std::vector<int> next(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) next[static_cast<std::size_t>(i)] = nearest(st.centroids, data.row(i));

    // an empty cluster takes the point farthest from its own centroid
    std::vector<int> count(static_cast<std::size_t>(k), 0);
    for (int l : next) ++count[static_cast<std::size_t>(l)];
    for (int c = 0; c < k; ++c) {
      if (count[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int l = next[static_cast<std::size_t>(i)];
        if (count[static_cast<std::size_t>(l)] < 2) continue;
        const double d = (data.row(i) - st.centroids.row(l)).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far < 0) break;
      --count[static_cast<std::size_t>(next[static_cast<std::size_t>(far)])];
      next[static_cast<std::size_t>(far)] = c;
      count[static_cast<std::size_t>(c)] = 1;
    }

    const bool stable = next == st.labels;
    st.labels = std::move(next);
    st.centroids = cluster_means(data, st.labels, k);
    st.iterations = iter;
    st.sse_history.push_back(sum_squared_error(data, st.labels, k));
    if (stable) break;
  }

  // single-point moves: moving x from A to B changes the SSE by
  // nB/(nB+1)|x-muB|^2 - nA/(nA-1)|x-muA|^2
  std::vector<int> count(static_cast<std::size_t>(k), 0);
  for (int l : st.labels) ++count[static_cast<std::size_t>(l)];
  for (int pass = 0; pass < max_iter; ++pass) {
    bool moved = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int from = st.labels[static_cast<std::size_t>(i)];
      const double na = count[static_cast<std::size_t>(from)];
      if (na < 2) continue;
      const double removal = na / (na - 1.0) * (data.row(i) - st.centroids.row(from)).squaredNorm();
      int to = from;
      double best_add = removal;
      for (int c = 0; c < k; ++c) {
        if (c == from) continue;
        const double nb = count[static_cast<std::size_t>(c)];
        const double add = nb / (nb + 1.0) * (data.row(i) - st.centroids.row(c)).squaredNorm();
        if (add < best_add) {
          best_add = add;
          to = c;
        }
      }
      if (to == from || removal - best_add <= 1e-12 * std::max(1.0, st.sse_history.back())) continue;
      st.labels[static_cast<std::size_t>(i)] = to;
      --count[static_cast<std::size_t>(from)];
      ++count[static_cast<std::size_t>(to)];
      st.centroids = cluster_means(data, st.labels, k);
      moved = true;
    }
    if (!moved) break;
    st.sse_history.push_back(sum_squared_error(data, st.labels, k));
  }
  st.sse = sum_squared_error(data, st.labels, k);
  return st;
}

}  // namespace

double sum_squared_error(const Eigen::MatrixXd& data, const std::vector<int>& labels, int k) {
  const Eigen::MatrixXd means = cluster_means(data, labels, k);
  double sse = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    sse += (data.row(i) - means.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
  return sse;
}

bool is_single_move_optimal(const Eigen::MatrixXd& data, const std::vector<int>& labels, int k, double tolerance) {
  const double base = sum_squared_error(data, labels, k);
  std::vector<int> count(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++count[static_cast<std::size_t>(l)];
  std::vector<int> trial = labels;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (count[static_cast<std::size_t>(labels[i])] < 2) continue;
    for (int c = 0; c < k; ++c) {
      if (c == labels[i]) continue;
      trial[i] = c;
      const double sse = sum_squared_error(data, trial, k);
      if (sse < base - tolerance * std::max(1.0, base)) return false;
    }
    trial[i] = labels[i];
  }
  return true;
}

KMeansState kmeans(const Eigen::MatrixXd& data, int k, std::uint64_t seed, const KMeansOptions& options) {
  const auto n = static_cast<int>(data.rows());
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "k-means needs k >= 2");
  if (k > n) throw Error(ErrorCode::kInvalidArgument, "k-means k = " + std::to_string(k) + " exceeds n = " + std::to_string(n));
  if (options.restarts < 1 || options.max_iter < 1)
    throw Error(ErrorCode::kInvalidArgument, "k-means needs at least one restart and one iteration");
  if (!data.allFinite()) throw Error(ErrorCode::kInvalidArgument, "k-means input has non-finite entries");

  KMeansState best;
  bool have = false;
  for (int r = 0; r < options.restarts; ++r) {
    KMeansState st = run_once(data, k, seed + static_cast<std::uint64_t>(r), options.max_iter);
    if (!have || st.sse < best.sse) {
      best = std::move(st);
      have = true;
    }
  }
  for (std::size_t i = 1; i < best.sse_history.size(); ++i)
    if (best.sse_history[i] > best.sse_history[i - 1] * (1.0 + 1e-12) + 1e-300)
      throw std::logic_error("k-means SSE increased between iterations");
  if (!is_single_move_optimal(data, best.labels, k, 1e-9))
    throw std::logic_error("k-means result is not single-move optimal");
  return best;
}

ClusterAssignment to_assignment(const KMeansState& state, Method method) {
  const std::vector<int> labels = canonical_labels(state.labels);
  const int k = labels.empty() ? 1 : *std::max_element(labels.begin(), labels.end()) + 1;
  return ClusterAssignment(method, labels, k, std::nullopt, state.seed);
}

// silhouette ------------------------------------------------------------------------

Silhouette silhouette(const Eigen::MatrixXd& data, const std::vector<int>& labels) {
  const Eigen::Index n = data.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n)
    throw Error(ErrorCode::kInvalidArgument, "silhouette labels do not match row count");
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "silhouette of an empty data set");
  const int k = *std::max_element(labels.begin(), labels.end()) + 1;
  if (*std::min_element(labels.begin(), labels.end()) < 0)
    throw Error(ErrorCode::kInvalidArgument, "negative cluster label");
  std::vector<int> size(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++size[static_cast<std::size_t>(l)];
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "silhouette needs at least two clusters");
  for (int c = 0; c < k; ++c)
    if (size[static_cast<std::size_t>(c)] == 0)
      throw Error(ErrorCode::kInvalidArgument, "silhouette: cluster " + std::to_string(c) + " is empty");

  Silhouette out;
  out.values.assign(static_cast<std::size_t>(n), 0.0);
  std::vector<double> sum(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::fill(sum.begin(), sum.end(), 0.0);
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) sum[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])] += (data.row(i) - data.row(j)).norm();
    const int own = labels[static_cast<std::size_t>(i)];
    const int own_size = size[static_cast<std::size_t>(own)];
    if (own_size == 1) continue;  // s(i) = 0 for singletons
    const double a = sum[static_cast<std::size_t>(own)] / (own_size - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c)
      if (c != own) b = std::min(b, sum[static_cast<std::size_t>(c)] / size[static_cast<std::size_t>(c)]);
    const double denom = std::max(a, b);
    if (denom == 0.0)
      throw Error(ErrorCode::kDegenerate, "degenerate data: silhouette undefined (a = b = 0) at row " + std::to_string(i));
    out.values[static_cast<std::size_t>(i)] = (b - a) / denom;
  }
  double total = 0.0;
  for (double s : out.values) total += s;
  out.mean = total / static_cast<double>(n);
  return out;
}

KSelection select_k(const Eigen::MatrixXd& data, int k_min, int k_max, std::uint64_t seed, const KMeansOptions& options) {
  const auto n = static_cast<int>(data.rows());
  if (k_min > k_max) throw Error(ErrorCode::kInvalidArgument, "empty k range");
  if (k_min < 2 || k_max > n - 1)
    throw Error(ErrorCode::kInvalidArgument, "k range [" + std::to_string(k_min) + ", " + std::to_string(k_max) +
                                                 "] must lie within [2, n-1] = [2, " + std::to_string(n - 1) + "]");
  bool identical = true;
  for (Eigen::Index i = 1; i < data.rows() && identical; ++i) identical = data.row(i) == data.row(0);
  if (identical) throw Error(ErrorCode::kDegenerate, "degenerate data: all rows identical");

  KSelection out;
  double best_sc = -std::numeric_limits<double>::infinity();
  for (int k = k_min; k <= k_max; ++k) {
    KMeansState st = kmeans(data, k, seed, options);
    const double sc = silhouette(data, st.labels).mean;
    out.scores.emplace_back(k, sc);
    if (sc > best_sc) {
      best_sc = sc;
      out.best_k = k;
      out.best = std::move(st);
    }
  }
  return out;
}

}  // namespace sewerml::cluster
