#include "sewerml/pca.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "json.hpp"

#include "sewerml/error.hpp"
#include "sewerml/io.hpp"

namespace sewerml::pca {

namespace {

Eigen::Index dominant_index(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (std::abs(v(i)) > std::abs(v(best))) best = i;
  return best;
}

std::string pc_name(int j) { return "PC" + std::to_string(j + 1); }

}  // namespace

PcaResult pca(const Eigen::MatrixXd& data, std::vector<std::string> attributes, std::vector<std::string> row_ids) {
  const Eigen::Index n = data.rows();
  const Eigen::Index d = data.cols();
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "PCA needs at least two rows");
  if (d < 1) throw Error(ErrorCode::kInvalidArgument, "PCA needs at least one column");
  if (!data.allFinite()) throw Error(ErrorCode::kInvalidArgument, "PCA input has non-finite entries");
  if (attributes.empty())
    for (Eigen::Index c = 0; c < d; ++c) attributes.push_back("X" + std::to_string(c + 1));
  if (row_ids.empty())
    for (Eigen::Index r = 0; r < n; ++r) row_ids.push_back(std::to_string(r + 1));
  if (static_cast<Eigen::Index>(attributes.size()) != d || static_cast<Eigen::Index>(row_ids.size()) != n)
    throw Error(ErrorCode::kInvalidArgument, "PCA labels do not match the data shape");

  PcaResult out;
  out.attributes = std::move(attributes);
  out.row_ids = std::move(row_ids);
  out.center = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - out.center;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::kDegenerate, "PCA eigendecomposition failed");
  const Eigen::VectorXd values = solver.eigenvalues();
  Eigen::MatrixXd vectors = solver.eigenvectors();
  for (Eigen::Index j = 0; j < d; ++j) {
    const Eigen::Index m = dominant_index(vectors.col(j));
    if (vectors(m, j) < 0.0) vectors.col(j) *= -1.0;
  }

  const double top = std::max(values.maxCoeff(), 0.0);
  if (!(top > 0.0)) throw Error(ErrorCode::kDegenerate, "degenerate data: zero total variance");
  const double tie_tol = 1e-12 * top;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (std::abs(values(a) - values(b)) > tie_tol) return values(a) > values(b);
    const Eigen::Index ia = dominant_index(vectors.col(a));
    const Eigen::Index ib = dominant_index(vectors.col(b));
    return ia != ib ? ia < ib : a < b;
  });

  out.loadings.resize(d, d);
  out.eigenvalues.resize(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const Eigen::Index src = order[static_cast<std::size_t>(j)];
    out.loadings.col(j) = vectors.col(src);
    out.eigenvalues(j) = values(src) > tie_tol ? values(src) : 0.0;
    if (j > 0 && std::abs(values(src) - values(order[static_cast<std::size_t>(j - 1)])) <= tie_tol &&
        out.eigenvalues(j) > 0.0)
      out.tied_eigenvalues = true;
  }
  // within a tie group the reordering may leave differences below tie_tol
  // out of order; the reported values are kept non-increasing
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end(), std::greater<>());
  const double trace = out.eigenvalues.sum();
  for (Eigen::Index j = 0; j < d; ++j) out.explained.push_back(out.eigenvalues(j) / trace);
  out.scores = centered * out.loadings;
  return out;
}

PcaResult pca(const features::FeatureMatrix& matrix) {
  if (matrix.scaling() == features::Scaling::kRaw)
    throw Error(ErrorCode::kInvalidArgument, "PCA expects a scaled feature matrix (zscore for correlation PCA)");
  return pca(matrix.values(), matrix.column_names(), matrix.row_ids());
}

std::vector<LoadingExtremes> loading_extremes(const PcaResult& result, int n_pcs) {
  if (n_pcs < 1 || n_pcs > result.loadings.cols())
    throw Error(ErrorCode::kInvalidArgument, "n_pcs = " + std::to_string(n_pcs) + " outside [1, " +
                                                 std::to_string(result.loadings.cols()) + "]");
  std::vector<LoadingExtremes> out;
  for (int j = 0; j < n_pcs; ++j) {
    LoadingExtremes e;
    e.component = j;
    for (Eigen::Index i = 0; i < result.loadings.rows(); ++i)
      e.sorted.emplace_back(result.attributes[static_cast<std::size_t>(i)], result.loadings(i, j));
    std::stable_sort(e.sorted.begin(), e.sorted.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (e.sorted.front().second > 0.0) e.highest = e.sorted.front();
    if (e.sorted.back().second < 0.0) e.lowest = e.sorted.back();
    out.push_back(std::move(e));
  }
  return out;
}

ClusterScores cluster_scores(const PcaResult& result, const cluster::ClusterAssignment& assignment, int n_pcs) {
  if (static_cast<Eigen::Index>(assignment.size()) != result.scores.rows())
    throw Error(ErrorCode::kInvalidArgument, "cluster assignment and PCA scores cover different rows");
  if (!assignment.row_ids().empty() && assignment.row_ids() != result.row_ids)
    throw Error(ErrorCode::kInvalidArgument, "cluster assignment and PCA scores cover different row ids");
  if (n_pcs < 1 || n_pcs > result.scores.cols())
    throw Error(ErrorCode::kInvalidArgument, "n_pcs = " + std::to_string(n_pcs) + " exceeds available components");
  ClusterScores out;
  out.means = Eigen::MatrixXd::Zero(assignment.k(), n_pcs);
  out.sizes.assign(static_cast<std::size_t>(assignment.k()), 0);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const int c = assignment.labels()[i];
    out.means.row(c) += result.scores.row(static_cast<Eigen::Index>(i)).head(n_pcs);
    ++out.sizes[static_cast<std::size_t>(c)];
  }
  for (int c = 0; c < assignment.k(); ++c) out.means.row(c) /= static_cast<double>(out.sizes[static_cast<std::size_t>(c)]);
  return out;
}

PriorityRule parse_priority_rule(const std::string& json_text, const std::string& source) {
  PriorityRule rule;
  try {
    const auto j = nlohmann::json::parse(json_text);
    rule.name = j.value("name", std::string());
    rule.rationale = j.value("rationale", std::string());
    for (const auto& [key, value] : j.at("weights").items()) {
      const std::string upper = io::to_upper(key);
      std::string digits = upper.rfind("PC-", 0) == 0 ? upper.substr(3) : upper.rfind("PC", 0) == 0 ? upper.substr(2) : "";
      int pc = 0;
      try {
        std::size_t used = 0;
        pc = std::stoi(digits, &used);
        if (used != digits.size()) pc = 0;
      } catch (const std::exception&) {
        pc = 0;
      }
      if (pc < 1) throw Error(ErrorCode::kConfig, source + ": weight key '" + key + "' is not of the form PC<n>");
      rule.weights[pc - 1] = value.get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, source + ": " + e.what());
  }
  if (std::none_of(rule.weights.begin(), rule.weights.end(), [](const auto& kv) { return kv.second != 0.0; }))
    throw Error(ErrorCode::kConfig, source + ": priority rule needs at least one nonzero weight");
  return rule;
}

PriorityRule load_priority_rule(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kConfig, "priority rule not found: " + path.string());
  return parse_priority_rule(io::read_file(path), path.string());
}

std::vector<RankedCluster> rank_clusters(const ClusterScores& scores, const PriorityRule& rule,
                                         const std::vector<LoadingExtremes>& extremes) {
  for (const auto& [pc, w] : rule.weights)
    if (pc < 0 || pc >= scores.means.cols())
      throw Error(ErrorCode::kInvalidArgument, "priority rule references " + pc_name(pc) + " but only " +
                                                   std::to_string(scores.means.cols()) + " components are available");

  std::vector<RankedCluster> out;
  for (Eigen::Index c = 0; c < scores.means.rows(); ++c) {
    RankedCluster rc;
    rc.cluster = static_cast<int>(c);
    for (const auto& [pc, w] : rule.weights) {
      const double part = w * scores.means(c, pc);
      rc.score += part;
      if (w != 0.0) rc.contributions.emplace_back(pc, part);
    }
    std::stable_sort(rc.contributions.begin(), rc.contributions.end(),
                     [](const auto& a, const auto& b) { return std::abs(a.second) > std::abs(b.second); });
    out.push_back(std::move(rc));
  }
  std::stable_sort(out.begin(), out.end(), [](const RankedCluster& a, const RankedCluster& b) { return a.score > b.score; });

  auto same = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}); };
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].indistinguishable = (i > 0 && same(out[i].score, out[i - 1].score)) ||
                               (i + 1 < out.size() && same(out[i].score, out[i + 1].score));
    std::string text = "score " + io::format_number(out[i].score);
    if (!out[i].contributions.empty()) text += "; driven by";
    for (std::size_t k = 0; k < out[i].contributions.size(); ++k) {
      const auto [pc, part] = out[i].contributions[k];
      const double mean = scores.means(out[i].cluster, pc);
      text += (k ? ", " : " ") + std::string(mean >= 0.0 ? "high " : "low ") + pc_name(pc) + " (" +
              (part >= 0.0 ? "+" : "") + io::format_number(part) + ")";
      if (pc < static_cast<int>(extremes.size())) {
        const auto& e = extremes[static_cast<std::size_t>(pc)];
        const auto& pole = mean >= 0.0 ? e.highest : e.lowest;
        if (pole) text += " [" + pole->first + "]";
      }
    }
    if (out[i].indistinguishable) text += "; indistinguishable from a neighbour under this rule";
    out[i].rationale = std::move(text);
  }
  return out;
}

}  // namespace sewerml::pca
