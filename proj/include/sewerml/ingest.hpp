#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sewerml::ingest {

using Timestamp = std::chrono::sys_seconds;

/// Accepts `YYYY-MM-DDTHH:MM[:SS][Z]` (a space may replace the `T`).
Timestamp parse_timestamp(std::string_view text);
/// Always `YYYY-MM-DDTHH:MM:SSZ`.
std::string format_timestamp(Timestamp t);

/// Uniformly sampled water level at one sub-catchment outlet. Missing
/// samples hold NaN and are flagged in the mask.
class LevelSeries {
 public:
  LevelSeries(std::string catchment_id, Timestamp start_time, std::chrono::seconds step,
              std::vector<double> levels, std::vector<bool> missing, double pipe_diameter);

  const std::string& catchment_id() const { return catchment_id_; }
  Timestamp start_time() const { return start_time_; }
  std::chrono::seconds step() const { return step_; }
  double step_hours() const { return static_cast<double>(step_.count()) / 3600.0; }
  const std::vector<double>& levels() const { return levels_; }
  const std::vector<bool>& missing() const { return missing_; }
  double pipe_diameter() const { return pipe_diameter_; }
  std::size_t size() const { return levels_.size(); }
  std::size_t missing_count() const;
  Timestamp time_at(std::size_t i) const { return start_time_ + step_ * static_cast<long>(i); }

 private:
  std::string catchment_id_;
  Timestamp start_time_;
  std::chrono::seconds step_;
  std::vector<double> levels_;
  std::vector<bool> missing_;
  double pipe_diameter_;
};

struct SeriesOptions {
  std::chrono::seconds step{3600};
  std::size_t max_gap = 6;  // longest run of missing samples tolerated
};

/// Reads `timestamp,level`. An empty or `nan` level marks a missing
/// sample; skipped grid points are inserted as missing.
LevelSeries parse_level_series(std::istream& in, const std::string& source, std::string catchment_id,
                               double pipe_diameter, const SeriesOptions& options = {});
LevelSeries parse_level_series_file(const std::filesystem::path& path, std::string catchment_id,
                                    double pipe_diameter, const SeriesOptions& options = {});
std::string write_level_series(const LevelSeries& series);

/// Mean of level / diameter over the non-missing samples, in percent.
double mean_filling_degree(const LevelSeries& series);

// Attribute table ------------------------------------------------------------

enum class Attribute {
  SA, SG, SP, CA, CG, CP, STA, STG, STP, ELE,
  TVO, ADD, INF, OVL, IMP, SAN,
  WAVE1, WAVE2, WAVE3, MFD,
};

inline constexpr std::size_t kAttributeCount = 20;
inline constexpr std::array<std::string_view, kAttributeCount> kAttributeNames = {
    "SA", "SG", "SP", "CA", "CG", "CP", "STA", "STG", "STP", "ELE",
    "TVO", "ADD", "INF", "OVL", "IMP", "SAN", "WAVE1", "WAVE2", "WAVE3", "MFD"};

constexpr std::size_t index_of(Attribute a) { return static_cast<std::size_t>(a); }
std::string_view name_of(Attribute a);
std::optional<Attribute> attribute_from_name(std::string_view name);  // case-insensitive
/// WAVE1..3 and MFD; the only columns allowed to be absent.
bool is_water_level_feature(Attribute a);

struct AttributeRecord {
  std::string id;
  std::string name;
  std::array<std::optional<double>, kAttributeCount> values;

  const std::optional<double>& operator[](Attribute a) const { return values[index_of(a)]; }
};

struct AttributeOptions {
  double composition_tolerance = 1.0;  // percentage points around 100
};

class AttributeTable {
 public:
  AttributeTable() = default;
  explicit AttributeTable(std::vector<AttributeRecord> records, const AttributeOptions& options = {});

  const std::vector<AttributeRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  const AttributeRecord* find(std::string_view id) const;
  /// True if any record lacks one of WAVE1..3 or MFD.
  bool needs_wavelet_features() const;

 private:
  std::vector<AttributeRecord> records_;
};

AttributeTable parse_attribute_table(std::istream& in, const std::string& source,
                                     const AttributeOptions& options = {});
AttributeTable parse_attribute_table_file(const std::filesystem::path& path,
                                          const AttributeOptions& options = {});
std::string write_attribute_table(const AttributeTable& table);

// Observed / simulated flow pairs -------------------------------------------

class FlowPair {
 public:
  FlowPair(std::string catchment_id, std::vector<double> observed, std::vector<double> simulated);

  const std::string& catchment_id() const { return catchment_id_; }
  const std::vector<double>& observed() const { return observed_; }
  const std::vector<double>& simulated() const { return simulated_; }
  std::size_t size() const { return observed_.size(); }

 private:
  std::string catchment_id_;
  std::vector<double> observed_;
  std::vector<double> simulated_;
};

/// Reads `timestamp,observed,simulated` with strictly increasing timestamps.
FlowPair parse_flow_pair(std::istream& in, const std::string& source, std::string catchment_id);
FlowPair parse_flow_pair_file(const std::filesystem::path& path, std::string catchment_id);

// Dataset manifest ------------------------------------------------------------

struct CatchmentEntry {
  std::string id;
  std::string name;
  std::filesystem::path levels;               // absolute after loading
  double pipe_diameter = 0.0;
  std::optional<std::filesystem::path> flows;  // absolute after loading
};

/// `dataset.json`. Relative paths inside it resolve against its directory.
struct Manifest {
  std::filesystem::path path;
  std::filesystem::path attributes;
  std::vector<CatchmentEntry> catchments;
  SeriesOptions series;
  AttributeOptions attribute_options;
};

Manifest load_manifest(const std::filesystem::path& path);

}  // namespace sewerml::ingest
