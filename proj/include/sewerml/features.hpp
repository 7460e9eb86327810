#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sewerml/ingest.hpp"

namespace sewerml::features {

enum class Scaling { kRaw, kZScore, kMinMax };

const char* to_string(Scaling s);
Scaling scaling_from_string(std::string_view s);

enum class FeatureSource { kIngested, kComputed };

/// WAVE1..3 and MFD derived from a level series.
struct WaterLevelFeatures {
  std::optional<double> wave1;
  std::optional<double> wave2;
  std::optional<double> wave3;
  std::optional<double> mfd;

  std::optional<double> get(ingest::Attribute a) const;
};

/// Rows are sub-catchments, columns attributes. A matrix is created raw and
/// can be scaled exactly once; the per-column affine parameters are kept so
/// scaled values can be mapped back.
class FeatureMatrix {
 public:
  FeatureMatrix(std::vector<std::string> row_ids, std::vector<std::string> column_names, Eigen::MatrixXd values,
                std::vector<FeatureSource> sources = {});

  const std::vector<std::string>& row_ids() const { return row_ids_; }
  const std::vector<std::string>& column_names() const { return column_names_; }
  const Eigen::MatrixXd& values() const { return values_; }
  Eigen::Index rows() const { return values_.rows(); }
  Eigen::Index cols() const { return values_.cols(); }

  Scaling scaling() const { return scaling_; }
  /// Mean (zscore) or minimum (minmax) per column; empty when raw.
  const std::vector<double>& center() const { return center_; }
  /// Sample std (zscore) or range (minmax) per column; 0 for constant columns.
  const std::vector<double>& spread() const { return spread_; }
  const std::vector<bool>& constant_columns() const { return constant_; }
  /// Row-major, rows() x cols(); tells where each value came from.
  FeatureSource source(Eigen::Index row, Eigen::Index col) const {
    return sources_[static_cast<std::size_t>(row * values_.cols() + col)];
  }

  /// Values mapped back to raw units.
  Eigen::MatrixXd unscaled() const;

 private:
  friend FeatureMatrix scale(const FeatureMatrix&, Scaling);
  friend FeatureMatrix read_features(const std::filesystem::path&, const std::filesystem::path&);

  std::vector<std::string> row_ids_;
  std::vector<std::string> column_names_;
  Eigen::MatrixXd values_;
  std::vector<FeatureSource> sources_;
  Scaling scaling_ = Scaling::kRaw;
  std::vector<double> center_;
  std::vector<double> spread_;
  std::vector<bool> constant_;
};

/// All 20 attributes in their canonical order.
std::vector<ingest::Attribute> all_attributes();

/// Builds the raw matrix in table row order. A computed water-level feature
/// takes precedence over a stored one.
FeatureMatrix assemble(const ingest::AttributeTable& table,
                       const std::map<std::string, WaterLevelFeatures>& computed,
                       const std::vector<ingest::Attribute>& columns = all_attributes());

/// Per-column affine scaling. zscore uses the sample (n-1) standard
/// deviation. Constant columns become zero and are flagged.
FeatureMatrix scale(const FeatureMatrix& raw, Scaling method);

std::string write_features_csv(const FeatureMatrix& m);
std::string write_features_meta(const FeatureMatrix& m, std::string_view csv_sha256);

/// Reads `features.csv` plus its sidecar and refuses a csv whose checksum
/// disagrees with the sidecar.
FeatureMatrix read_features(const std::filesystem::path& csv_path, const std::filesystem::path& meta_path);

}  // namespace sewerml::features
