#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "sewerml/error.hpp"
#include "sewerml/pipeline.hpp"

namespace fs = std::filesystem;
using namespace sewerml;

namespace {

struct Flags {
  std::string config, manifest, output, rule, scaling, spacing, method = "all", reference, r2_mode, scalogram, wave_feature;
  double scale_min = 0, scale_max = 0, bandwidth = 0, center_frequency = 0;
  std::size_t scale_count = 0;
  int k = 0, k_min = 0, k_max = 0, restarts = 0, epochs = 0, n_pcs = 0;
  std::uint64_t seed = 0;
  unsigned threads = 0;
  std::vector<int> som_shape;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "run.json; flags given on the command line override it");
  sub->add_option("--manifest", f.manifest, "dataset manifest (dataset.json)");
  sub->add_option("--out", f.output, "artifact directory");
  sub->add_option("--seed", f.seed, "random seed (mandatory for clustering)");
  sub->add_option("--scale-min", f.scale_min, "smallest wavelet scale in hours (default two sampling steps)");
  sub->add_option("--scale-max", f.scale_max, "largest wavelet scale in hours (default 1200)");
  sub->add_option("--scale-count", f.scale_count, "number of scales (default 200)");
  sub->add_option("--spacing", f.spacing, "scale spacing: log or linear")->check(CLI::IsMember({"log", "linear"}));
  sub->add_option("--bandwidth", f.bandwidth, "Morlet bandwidth parameter fb (default 1.5)");
  sub->add_option("--center-frequency", f.center_frequency, "Morlet centre frequency fc (default 1.0)");
  sub->add_option("--scaling", f.scaling, "feature scaling: zscore, minmax or raw");
  sub->add_option("--k", f.k, "fixed cluster count (default: best mean silhouette)");
  sub->add_option("--k-min", f.k_min, "smallest k tried by silhouette selection");
  sub->add_option("--k-max", f.k_max, "largest k tried by silhouette selection");
  sub->add_option("--restarts", f.restarts, "k-means restarts (default 20)");
  sub->add_option("--som-epochs", f.epochs, "SOM training epochs (default 200)");
  sub->add_option("--som-shape", f.som_shape, "SOM lattice rows cols (default from sample count)")->expected(2);
  sub->add_option("--reference", f.reference, "label space for clusters.csv and ranking: som, kmeans or hca");
  sub->add_option("--rule", f.rule, "priority rule JSON");
  sub->add_option("--n-pcs", f.n_pcs, "components used for interpretation (default 4)");
  sub->add_option("--r2-mode", f.r2_mode, "R^2 definition: pearson or identity");
  sub->add_option("--wave-feature", f.wave_feature, "WAVE1..3 hold the peak period or the peak variance");
  sub->add_option("--threads", f.threads, "CWT worker threads (0 = all cores)");
  sub->add_option("--scalogram", f.scalogram, "catchment id for the scalogram plot");
}

pipeline::RunConfig build_config(const CLI::App* sub, const Flags& f) {
  pipeline::RunConfig c = f.config.empty() ? pipeline::RunConfig{} : pipeline::load_run_config(f.config);
  auto given = [&](const char* name) { return sub->count(name) > 0; };
  if (given("--manifest")) c.manifest = fs::absolute(f.manifest).lexically_normal();
  if (given("--out")) c.output = fs::absolute(f.output).lexically_normal();
  if (given("--rule")) c.priority_rule = fs::absolute(f.rule).lexically_normal();
  if (given("--seed")) c.seed = f.seed;
  if (given("--scale-min")) c.scales.min = f.scale_min;
  if (given("--scale-max")) c.scales.max = f.scale_max;
  if (given("--scale-count")) c.scales.count = f.scale_count;
  if (given("--spacing")) c.scales.spacing = f.spacing == "log" ? wavelet::Spacing::kLog : wavelet::Spacing::kLinear;
  if (given("--bandwidth")) c.morlet.bandwidth = f.bandwidth;
  if (given("--center-frequency")) c.morlet.center_frequency = f.center_frequency;
  if (given("--scaling")) c.scaling = features::scaling_from_string(f.scaling);
  if (given("--k")) c.k = f.k;
  if (given("--k-min")) c.k_min = f.k_min;
  if (given("--k-max")) c.k_max = f.k_max;
  if (given("--restarts")) c.kmeans_restarts = f.restarts;
  if (given("--som-epochs")) c.som.epochs = f.epochs;
  if (given("--som-shape")) c.som_shape = std::pair{f.som_shape[0], f.som_shape[1]};
  if (given("--reference")) c.reference = cluster::method_from_string(f.reference);
  if (given("--n-pcs")) c.n_pcs = f.n_pcs;
  if (given("--r2-mode")) c.r2_mode = calibration::r_squared_mode_from_string(f.r2_mode);
  if (given("--wave-feature")) c.wave_feature = pipeline::wave_feature_from_string(f.wave_feature);
  if (given("--threads")) c.threads = f.threads;
  if (given("--scalogram")) c.scalogram_catchment = f.scalogram;
  return c;
}

void list_plots() {
  std::cout << "producible plots (written to <out>/plots):\n";
  for (const auto& p : pipeline::producible_plots())
    std::cout << "  " << p.file << "  " << p.description << "  [needs " << p.needs << "]\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sewerml: wavelet features, clustering and priority ranking of sewer sub-catchments"};
  app.require_subcommand(1, 1);
  Flags f;
  auto* run = app.add_subcommand("run", "full pipeline: features, cluster, pca, rank, calibrate, plot, report");
  auto* feat = app.add_subcommand("features", "wavelet water-level features and the scaled feature matrix");
  auto* clus = app.add_subcommand("cluster", "k-means, Ward HCA and SOM clustering of features.csv");
  auto* pcas = app.add_subcommand("pca", "principal component loadings, scores and extremes");
  auto* rank = app.add_subcommand("rank", "cluster priority ranking under a priority rule");
  auto* cal = app.add_subcommand("calibrate", "NSE and R^2 of simulated against observed flows");
  auto* plot = app.add_subcommand("plot", "SVG plots from existing artifacts (lists plots when given no inputs)");
  for (auto* sub : {run, feat, clus, pcas, rank, cal, plot}) add_common(sub, f);
  clus->add_option("--method", f.method, "all, kmeans, hca or som")->check(CLI::IsMember({"all", "kmeans", "hca", "som"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  pipeline::RunConfig config;
  try {
    if (sub == plot && f.config.empty() && f.output.empty()) {
      list_plots();
      return 0;
    }
    config = build_config(sub, f);
    if (sub == run) {
      pipeline::run_pipeline(config);
    } else if (sub == feat) {
      pipeline::run_features(config);
    } else if (sub == clus) {
      pipeline::run_cluster(config, pipeline::methods_from_string(f.method));
    } else if (sub == pcas) {
      pipeline::run_pca(config);
    } else if (sub == rank) {
      pipeline::run_rank(config);
    } else if (sub == cal) {
      pipeline::run_calibrate(config);
    } else if (sub == plot) {
      const auto written = pipeline::run_plots(config);
      if (written.empty()) {
        list_plots();
        return 0;
      }
      for (const auto& w : written) std::cout << (config.output / "plots" / w).string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << pipeline::error_record(e) << "\n";
    pipeline::write_error_record(config.output, e);
    return exit_status(e.code());
  } catch (const std::exception& e) {
    const Error wrapped(ErrorCode::kInvalidArgument, e.what());
    std::cerr << pipeline::error_record(wrapped) << "\n";
    pipeline::write_error_record(config.output, wrapped);
    return 1;
  }
  return 0;
}
