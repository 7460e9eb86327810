#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sewerml/calibration.hpp"
#include "sewerml/cluster.hpp"
#include "sewerml/error.hpp"
#include "sewerml/features.hpp"
#include "sewerml/wavelet.hpp"

namespace sewerml::pipeline {

struct ScaleGridSpec {
  std::optional<double> min;  // default: two sampling steps
  double max = 1200.0;        // hours
  std::size_t count = 200;
  wavelet::Spacing spacing = wavelet::Spacing::kLog;
};

/// What WAVE1..3 hold: the period of each ranked variance peak, or the
/// variance at that peak.
enum class WaveFeature { kPeriod, kVariance };
const char* to_string(WaveFeature w);
WaveFeature wave_feature_from_string(const std::string& text);

struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path output;
  std::filesystem::path priority_rule;
  ScaleGridSpec scales;
  wavelet::MorletParams morlet;
  WaveFeature wave_feature = WaveFeature::kPeriod;
  features::Scaling scaling = features::Scaling::kZScore;
  std::optional<int> k;  // fixed k; otherwise chosen by silhouette over [k_min, k_max]
  int k_min = 2;
  int k_max = 8;
  std::optional<std::uint64_t> seed;
  int kmeans_restarts = 20;
  cluster::SomOptions som;
  std::optional<std::pair<int, int>> som_shape;
  cluster::Method reference = cluster::Method::kSom;  // label space for clusters.csv and ranking
  int n_pcs = 4;
  calibration::RSquaredMode r2_mode = calibration::RSquaredMode::kPearson;
  unsigned threads = 0;
  std::string scalogram_catchment;  // empty: first catchment

  /// Checks ranges and that the referenced files exist. `need_seed`
  /// applies to stages that draw random numbers.
  void validate(bool need_manifest, bool need_seed, bool need_rule) const;
};

/// Reads `run.json`. Relative paths resolve against the file's directory.
RunConfig load_run_config(const std::filesystem::path& path);

enum class Methods { kAll, kKMeans, kHca, kSom };
Methods methods_from_string(const std::string& text);

// Each stage reads its inputs from the manifest or from artifacts earlier
// stages left in the output directory.
void run_features(const RunConfig& config);
void run_cluster(const RunConfig& config, Methods methods = Methods::kAll);
void run_pca(const RunConfig& config);
void run_rank(const RunConfig& config);
void run_calibrate(const RunConfig& config);
/// Renders every plot whose inputs are present; returns the file names.
std::vector<std::string> run_plots(const RunConfig& config);
/// Checksums every artifact and writes report.json.
void write_report(const RunConfig& config);

/// All stages in order, then the report.
void run_pipeline(const RunConfig& config);

struct PlotInfo {
  std::string file;
  std::string description;
  std::string needs;
};
const std::vector<PlotInfo>& producible_plots();

/// Machine-readable error record; also written to `<output>/error.json`
/// when the output directory is known.
std::string error_record(const Error& error);
void write_error_record(const std::filesystem::path& output, const Error& error);

}  // namespace sewerml::pipeline
