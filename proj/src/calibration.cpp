#include "sewerml/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sewerml/error.hpp"
#include "sewerml/io.hpp"

namespace sewerml::calibration {

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

const char* to_string(RSquaredMode mode) { return mode == RSquaredMode::kPearson ? "pearson" : "identity"; }

RSquaredMode r_squared_mode_from_string(const std::string& text) {
  if (text == "pearson") return RSquaredMode::kPearson;
  if (text == "identity") return RSquaredMode::kIdentity;
  throw Error(ErrorCode::kConfig, "unknown R^2 mode '" + text + "' (expected pearson or identity)");
}

double nse(const ingest::FlowPair& pair) {
  const auto& obs = pair.observed();
  const auto& sim = pair.simulated();
  const double m = mean_of(obs);
  double residual = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    residual += (obs[i] - sim[i]) * (obs[i] - sim[i]);
    total += (obs[i] - m) * (obs[i] - m);
  }
  if (!(total > 0.0)) throw Error(ErrorCode::kDegenerate, pair.catchment_id() + ": observed series is constant");
  return 1.0 - residual / total;
}

RSquared r_squared(const ingest::FlowPair& pair, RSquaredMode mode) {
  const auto& obs = pair.observed();
  const auto& sim = pair.simulated();
  const double mo = mean_of(obs);
  const double ms = mean_of(sim);
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    sxx += (obs[i] - mo) * (obs[i] - mo);
    syy += (sim[i] - ms) * (sim[i] - ms);
    sxy += (obs[i] - mo) * (sim[i] - ms);
  }
  RSquared out;
  out.negative_slope = sxy < 0.0;
  if (mode == RSquaredMode::kIdentity) {
    if (!(sxx > 0.0)) throw Error(ErrorCode::kDegenerate, pair.catchment_id() + ": observed series is constant");
    double residual = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) residual += (obs[i] - sim[i]) * (obs[i] - sim[i]);
    out.value = std::max(0.0, 1.0 - residual / sxx);
    return out;
  }
  if (!(sxx > 0.0) || !(syy > 0.0))
    throw Error(ErrorCode::kDegenerate, pair.catchment_id() + ": R^2 needs both series to vary");
  out.value = std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
  return out;
}

bool is_accepted(double nse_value, double r2_value) {
  return nse_value > kAcceptanceThreshold && r2_value > kAcceptanceThreshold;
}

CalibrationScore evaluate(const ingest::FlowPair& pair, RSquaredMode mode) {
  CalibrationScore s;
  s.catchment_id = pair.catchment_id();
  s.nse = nse(pair);
  const RSquared r2 = r_squared(pair, mode);
  s.r2 = r2.value;
  s.negative_slope = r2.negative_slope;
  s.accepted = is_accepted(s.nse, s.r2);
  return s;
}

void write_calibration_csv(const std::filesystem::path& path, const std::vector<CalibrationScore>& scores) {
  std::string text = "id,nse,r2,accepted\n";
  for (const auto& s : scores)
    text += io::csv_line({s.catchment_id, io::format_number(s.nse), io::format_number(s.r2), s.accepted ? "true" : "false"});
  io::write_file_atomic(path, text);
}

std::vector<CalibrationScore> parse_calibration_csv(const std::filesystem::path& path) {
  const io::CsvTable table = io::read_csv_file(path);
  if (table.header != std::vector<std::string>{"id", "nse", "r2", "accepted"})
    throw Error(ErrorCode::kParse, path.string() + ": expected header id,nse,r2,accepted");
  std::vector<CalibrationScore> out;
  for (const auto& row : table.rows) {
    CalibrationScore s;
    s.catchment_id = row[0];
    s.nse = io::parse_number(row[1], path.string());
    s.r2 = io::parse_number(row[2], path.string());
    if (row[3] != "true" && row[3] != "false")
      throw Error(ErrorCode::kParse, path.string() + ": accepted must be true or false");
    s.accepted = row[3] == "true";
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace sewerml::calibration
