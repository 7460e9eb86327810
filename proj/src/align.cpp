#include <algorithm>
#include <limits>
#include <numeric>

#include "sewerml/cluster.hpp"
#include "sewerml/error.hpp"

namespace sewerml::cluster {

namespace {

using Table = std::vector<std::vector<long>>;

// Maximum-weight perfect matching on a square table; returns row -> column.
std::vector<int> hungarian_max(const Table& w) {
  const int n = static_cast<int>(w.size());
  long top = 0;
  for (const auto& row : w)
    for (long v : row) top = std::max(top, v);
  // minimise top - w with the classic potentials formulation (1-based)
  const long inf = std::numeric_limits<long>::max() / 4;
  std::vector<long> u(static_cast<std::size_t>(n + 1), 0), v(static_cast<std::size_t>(n + 1), 0);
  std::vector<int> p(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<long> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<bool> used(static_cast<std::size_t>(n + 1), false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const int i0 = p[static_cast<std::size_t>(j0)];
      long delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const long cost = top - w[static_cast<std::size_t>(i0 - 1)][static_cast<std::size_t>(j - 1)];
        const long cur = cost - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> assign(static_cast<std::size_t>(n));
  for (int j = 1; j <= n; ++j) assign[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return assign;
}

std::vector<int> exhaustive_max(const Table& w) {
  const int n = static_cast<int>(w.size());
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  long best_score = -1;
  do {
    long score = 0;
    for (int i = 0; i < n; ++i) score += w[static_cast<std::size_t>(i)][static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
    if (score > best_score) {
      best_score = score;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

Alignment align_labels(const ClusterAssignment& reference, const ClusterAssignment& other) {
  if (reference.size() != other.size())
    throw Error(ErrorCode::kInvalidArgument, "cannot align assignments over different row counts");
  if (!reference.row_ids().empty() && !other.row_ids().empty() && reference.row_ids() != other.row_ids())
    throw Error(ErrorCode::kInvalidArgument, "cannot align assignments over different row sets");
  const int kk = std::max(reference.k(), other.k());
  Table contingency(static_cast<std::size_t>(kk), std::vector<long>(static_cast<std::size_t>(kk), 0));
  for (std::size_t i = 0; i < reference.size(); ++i)
    ++contingency[static_cast<std::size_t>(other.labels()[i])][static_cast<std::size_t>(reference.labels()[i])];

  Alignment out;
  out.mapping = kk <= 8 ? exhaustive_max(contingency) : hungarian_max(contingency);
  out.mapping.resize(static_cast<std::size_t>(other.k()));
  long matched = 0;
  out.relabeled.resize(other.size());
  for (std::size_t i = 0; i < other.size(); ++i) {
    out.relabeled[i] = out.mapping[static_cast<std::size_t>(other.labels()[i])];
    if (out.relabeled[i] == reference.labels()[i]) ++matched;
  }
  out.agreement = reference.size() == 0 ? 1.0 : static_cast<double>(matched) / static_cast<double>(reference.size());
  out.adjusted_rand = adjusted_rand_index(reference.labels(), other.labels());
  return out;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kInvalidArgument, "adjusted Rand index over different row counts");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  const int ka = *std::max_element(a.begin(), a.end()) + 1;
  const int kb = *std::max_element(b.begin(), b.end()) + 1;
  std::vector<std::vector<double>> table(static_cast<std::size_t>(ka), std::vector<double>(static_cast<std::size_t>(kb), 0.0));
  for (std::size_t i = 0; i < n; ++i) table[static_cast<std::size_t>(a[i])][static_cast<std::size_t>(b[i])] += 1.0;
  auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0;
  std::vector<double> rows(static_cast<std::size_t>(ka), 0.0), cols(static_cast<std::size_t>(kb), 0.0);
  for (int i = 0; i < ka; ++i)
    for (int j = 0; j < kb; ++j) {
      const double v = table[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      index += pairs(v);
      rows[static_cast<std::size_t>(i)] += v;
      cols[static_cast<std::size_t>(j)] += v;
    }
  double sum_rows = 0.0;
  double sum_cols = 0.0;
  for (double v : rows) sum_rows += pairs(v);
  for (double v : cols) sum_cols += pairs(v);
  const double expected = sum_rows * sum_cols / pairs(static_cast<double>(n));
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return index == expected ? 1.0 : 0.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace sewerml::cluster
