#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "sewerml/cluster.hpp"
#include "sewerml/error.hpp"
#include "sewerml/io.hpp"

namespace sewerml::cluster {

Dendrogram hca_ward(const Eigen::MatrixXd& data, std::vector<std::string> leaf_ids) {
  const auto n = static_cast<int>(data.rows());
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "hierarchical clustering needs at least two rows");
  if (!data.allFinite()) throw Error(ErrorCode::kInvalidArgument, "hierarchical clustering input has non-finite entries");
  if (leaf_ids.empty())
    for (int i = 0; i < n; ++i) leaf_ids.push_back(std::to_string(i));
  if (static_cast<int>(leaf_ids.size()) != n)
    throw Error(ErrorCode::kInvalidArgument, "leaf id count does not match row count");

  // squared Ward distances between active slots
  Eigen::MatrixXd d2(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) d2(i, j) = (data.row(i) - data.row(j)).squaredNorm();
  std::vector<int> node(static_cast<std::size_t>(n));
  std::iota(node.begin(), node.end(), 0);
  std::vector<int> size(static_cast<std::size_t>(n), 1);
  std::vector<bool> active(static_cast<std::size_t>(n), true);

  Dendrogram out;
  out.leaf_ids = std::move(leaf_ids);
  for (int step = 0; step < n - 1; ++step) {
    int bi = -1;
    int bj = -1;
    double best = std::numeric_limits<double>::infinity();
    std::pair<int, int> best_key{std::numeric_limits<int>::max(), std::numeric_limits<int>::max()};
    for (int i = 0; i < n; ++i) {
      if (!active[static_cast<std::size_t>(i)]) continue;
      for (int j = i + 1; j < n; ++j) {
        if (!active[static_cast<std::size_t>(j)]) continue;
        const int ni = node[static_cast<std::size_t>(i)];
        const int nj = node[static_cast<std::size_t>(j)];
        const std::pair<int, int> key{std::min(ni, nj), std::max(ni, nj)};
        const double v = d2(i, j);
        if (v < best || (v == best && key < best_key)) {
          best = v;
          best_key = key;
          bi = i;
          bj = j;
        }
      }
    }
    const double si = size[static_cast<std::size_t>(bi)];
    const double sj = size[static_cast<std::size_t>(bj)];
    for (int k = 0; k < n; ++k) {
      if (!active[static_cast<std::size_t>(k)] || k == bi || k == bj) continue;
      const double sk = size[static_cast<std::size_t>(k)];
      const double v = ((si + sk) * d2(bi, k) + (sj + sk) * d2(bj, k) - sk * best) / (si + sj + sk);
      d2(bi, k) = v;
      d2(k, bi) = v;
    }
    const int new_size = size[static_cast<std::size_t>(bi)] + size[static_cast<std::size_t>(bj)];
    out.merges.push_back({best_key.first, best_key.second, std::sqrt(std::max(best, 0.0)), new_size});
    node[static_cast<std::size_t>(bi)] = n + step;
    size[static_cast<std::size_t>(bi)] = new_size;
    active[static_cast<std::size_t>(bj)] = false;
  }
  return out;
}

namespace {

// Leaf members of every node id after applying the first `count` merges.
std::vector<std::vector<int>> members_by_node(const Dendrogram& d) {
  const auto n = static_cast<int>(d.leaves());
  std::vector<std::vector<int>> members(static_cast<std::size_t>(2 * n - 1));
  for (int i = 0; i < n; ++i) members[static_cast<std::size_t>(i)] = {i};
  for (std::size_t m = 0; m < d.merges.size(); ++m) {
    auto& target = members[static_cast<std::size_t>(n) + m];
    target = members[static_cast<std::size_t>(d.merges[m].a)];
    const auto& other = members[static_cast<std::size_t>(d.merges[m].b)];
    target.insert(target.end(), other.begin(), other.end());
  }
  return members;
}

std::vector<int> labels_after(const Dendrogram& d, std::size_t applied) {
  const auto n = d.leaves();
  std::vector<int> parent(2 * n - 1);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> root = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
    return x;
  };
  for (std::size_t m = 0; m < applied; ++m) {
    parent[static_cast<std::size_t>(d.merges[m].a)] = static_cast<int>(n + m);
    parent[static_cast<std::size_t>(d.merges[m].b)] = static_cast<int>(n + m);
  }
  std::vector<int> roots(n);
  for (std::size_t i = 0; i < n; ++i) roots[i] = root(static_cast<int>(i));
  return canonical_labels(roots);
}

bool overlaps_rule_of_thumb(double lower, double upper, double dmax) {
  // (lower, upper] against [dmax / 3, 2 dmax / 3]
  return upper >= dmax / 3.0 && lower < 2.0 * dmax / 3.0;
}

}  // namespace

Eigen::MatrixXd cophenetic(const Dendrogram& d) {
  const auto n = static_cast<int>(d.leaves());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  const auto members = members_by_node(d);
  for (const auto& m : d.merges) {
    for (int x : members[static_cast<std::size_t>(m.a)])
      for (int y : members[static_cast<std::size_t>(m.b)]) {
        out(x, y) = m.height;
        out(y, x) = m.height;
      }
  }
  return out;
}

DendrogramCut cut_dendrogram_k(const Dendrogram& d, int k) {
  const auto n = static_cast<int>(d.leaves());
  if (k < 1 || k > n)
    throw Error(ErrorCode::kInvalidArgument, "cut k = " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  const auto applied = static_cast<std::size_t>(n - k);
  const double dmax = d.max_height();
  const double lower = applied == 0 ? 0.0 : d.merges[applied - 1].height;
  const double upper = applied == d.merges.size() ? std::numeric_limits<double>::infinity() : d.merges[applied].height;
  DendrogramCut cut{ClusterAssignment(Method::kHca, labels_after(d, applied), k, std::nullopt, std::nullopt, d.leaf_ids)};
  cut.lower = lower;
  cut.upper = upper;
  cut.cut_height = std::isinf(upper) ? dmax : 0.5 * (lower + upper);
  cut.in_rule_of_thumb = overlaps_rule_of_thumb(lower, upper, dmax);
  return cut;
}

DendrogramCut cut_dendrogram_height(const Dendrogram& d, double height) {
  const double dmax = d.max_height();
  if (!(height > 0.0) || height > dmax)
    throw Error(ErrorCode::kInvalidArgument,
                "cut height " + io::format_number(height) + " outside (0, D_max = " + io::format_number(dmax) + "]");
  std::size_t applied = 0;
  while (applied < d.merges.size() && d.merges[applied].height < height) ++applied;
  const int k = static_cast<int>(d.leaves() - applied);
  DendrogramCut cut{ClusterAssignment(Method::kHca, labels_after(d, applied), k, std::nullopt, std::nullopt, d.leaf_ids)};
  cut.cut_height = height;
  cut.lower = applied == 0 ? 0.0 : d.merges[applied - 1].height;
  cut.upper = d.merges[applied].height;
  cut.in_rule_of_thumb = height >= dmax / 3.0 && height <= 2.0 * dmax / 3.0;
  return cut;
}

std::string to_newick(const Dendrogram& d) {
  const auto n = static_cast<int>(d.leaves());
  auto height_of = [&](int node) { return node < n ? 0.0 : d.merges[static_cast<std::size_t>(node - n)].height; };
  auto quote = [](const std::string& s) {
    if (s.find_first_of("()[]':;, \t") == std::string::npos) return s;
    std::string out = "'";
    for (char c : s) {
      if (c == '\'') out += '\'';
      out += c;
    }
    return out + "'";
  };
  std::function<std::string(int)> render = [&](int node) -> std::string {
    if (node < n) return quote(d.leaf_ids[static_cast<std::size_t>(node)]);
    const Merge& m = d.merges[static_cast<std::size_t>(node - n)];
    return "(" + render(m.a) + ":" + io::format_number(m.height - height_of(m.a)) + "," + render(m.b) + ":" +
           io::format_number(m.height - height_of(m.b)) + ")";
  };
  return render(2 * n - 2) + ";\n";
}

}  // namespace sewerml::cluster
