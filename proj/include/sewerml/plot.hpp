#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sewerml/cluster.hpp"
#include "sewerml/pca.hpp"
#include "sewerml/wavelet.hpp"

// Self-contained SVG renderings. Every function returns the whole document.
namespace sewerml::plot {

/// |W(a, b)| heatmap, log-scale axis, cone of influence hatched out.
std::string scalogram_svg(const wavelet::WaveletSpectrum& spectrum, const std::string& title);

std::string variance_svg(const wavelet::VarianceCurve& curve, const std::vector<wavelet::DominantPeriod>& peaks,
                         const std::string& title);

/// Mean silhouette against k, best k marked.
std::string silhouette_svg(const std::vector<std::pair<int, double>>& scores, int best_k);

std::string dendrogram_svg(const cluster::Dendrogram& dendrogram, double cut_height);

/// Hexagonal lattice shaded by `values`; `labels` (may be empty) are
/// printed in each cell.
std::string som_map_svg(int rows, int cols, const std::vector<double>& values, const std::vector<std::string>& labels,
                        const std::string& title);

/// Scores of two components coloured by cluster, with loading arrows.
std::string biplot_svg(const pca::PcaResult& result, int pc_x, int pc_y, const std::vector<int>& cluster_of_row,
                       const std::vector<std::string>& cluster_names);

/// Grouped bars of mean component scores per cluster.
std::string score_bars_svg(const pca::ClusterScores& scores, const std::vector<std::string>& cluster_names);

}  // namespace sewerml::plot
