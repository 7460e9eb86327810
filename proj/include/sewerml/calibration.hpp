#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sewerml/ingest.hpp"

namespace sewerml::calibration {

enum class RSquaredMode { kPearson, kIdentity };

const char* to_string(RSquaredMode mode);
RSquaredMode r_squared_mode_from_string(const std::string& text);

inline constexpr double kAcceptanceThreshold = 0.5;

/// 1 - sum (obs - sim)^2 / sum (obs - mean obs)^2. Unbounded below.
double nse(const ingest::FlowPair& pair);

struct RSquared {
  double value = 0.0;
  bool negative_slope = false;  // obs and sim are anticorrelated
};

/// kPearson: squared correlation, requires both series to vary.
/// kIdentity: max(0, 1 - SSres / SStot) about the line sim = obs.
RSquared r_squared(const ingest::FlowPair& pair, RSquaredMode mode = RSquaredMode::kPearson);

struct CalibrationScore {
  std::string catchment_id;
  double nse = 0.0;
  double r2 = 0.0;
  bool accepted = false;
  bool negative_slope = false;
};

/// Both metrics must strictly exceed the threshold.
bool is_accepted(double nse_value, double r2_value);

CalibrationScore evaluate(const ingest::FlowPair& pair, RSquaredMode mode = RSquaredMode::kPearson);

void write_calibration_csv(const std::filesystem::path& path, const std::vector<CalibrationScore>& scores);
std::vector<CalibrationScore> parse_calibration_csv(const std::filesystem::path& path);

}  // namespace sewerml::calibration
