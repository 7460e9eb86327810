#include "sewerml/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>

#include "json.hpp"

#include "sewerml/error.hpp"
#include "sewerml/io.hpp"

namespace sewerml::ingest {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int parse_fixed_int(std::string_view s, std::string_view whole) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorCode::kParse, "bad timestamp '" + std::string(whole) + "'");
  return v;
}

bool is_missing_token(const std::string& s) {
  if (s.empty()) return true;
  const std::string u = io::to_upper(s);
  return u == "NAN" || u == "NA";
}

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
  const std::string t = io::trim(text);
  std::string_view s = t;
  if (!s.empty() && (s.back() == 'Z' || s.back() == 'z')) s.remove_suffix(1);
  // YYYY-MM-DDTHH:MM or YYYY-MM-DDTHH:MM:SS
  const bool shape_ok = (s.size() == 16 || s.size() == 19) && s[4] == '-' && s[7] == '-' &&
                        (s[10] == 'T' || s[10] == ' ') && s[13] == ':' && (s.size() == 16 || s[16] == ':');
  if (!shape_ok) throw Error(ErrorCode::kParse, "bad timestamp '" + t + "'");
  const int year = parse_fixed_int(s.substr(0, 4), t);
  const int month = parse_fixed_int(s.substr(5, 2), t);
  const int day = parse_fixed_int(s.substr(8, 2), t);
  const int hour = parse_fixed_int(s.substr(11, 2), t);
  const int minute = parse_fixed_int(s.substr(14, 2), t);
  const int second = s.size() == 19 ? parse_fixed_int(s.substr(17, 2), t) : 0;
  const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                                        std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 59 || hour < 0 || minute < 0 || second < 0)
    throw Error(ErrorCode::kParse, "bad timestamp '" + t + "'");
  return std::chrono::sys_days{ymd} + std::chrono::hours{hour} + std::chrono::minutes{minute} +
         std::chrono::seconds{second};
}

std::string format_timestamp(Timestamp t) {
  const auto days = std::chrono::floor<std::chrono::days>(t);
  const std::chrono::year_month_day ymd{days};
  const std::chrono::hh_mm_ss hms{t - days};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

// LevelSeries -----------------------------------------------------------------

LevelSeries::LevelSeries(std::string catchment_id, Timestamp start_time, std::chrono::seconds step,
                         std::vector<double> levels, std::vector<bool> missing, double pipe_diameter)
    : catchment_id_(std::move(catchment_id)),
      start_time_(start_time),
      step_(step),
      levels_(std::move(levels)),
      missing_(std::move(missing)),
      pipe_diameter_(pipe_diameter) {
  const std::string where = "level series '" + catchment_id_ + "'";
  if (step_.count() <= 0) throw Error(ErrorCode::kValidation, where + ": step must be positive");
  if (levels_.empty()) throw Error(ErrorCode::kValidation, where + ": no samples");
  if (!(pipe_diameter_ > 0.0) || !std::isfinite(pipe_diameter_))
    throw Error(ErrorCode::kValidation, where + ": pipe diameter must be positive");
  if (missing_.empty()) missing_.assign(levels_.size(), false);
  if (missing_.size() != levels_.size())
    throw Error(ErrorCode::kValidation, where + ": missing mask length differs from levels");
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    if (missing_[i]) {
      levels_[i] = kNaN;
      continue;
    }
    if (!std::isfinite(levels_[i]) || levels_[i] < 0.0)
      throw Error(ErrorCode::kValidation,
                  where + ": sample " + std::to_string(i) + " is negative or non-finite");
  }
}

std::size_t LevelSeries::missing_count() const {
  return static_cast<std::size_t>(std::count(missing_.begin(), missing_.end(), true));
}

LevelSeries parse_level_series(std::istream& in, const std::string& source, std::string catchment_id,
                               double pipe_diameter, const SeriesOptions& options) {
  const io::CsvTable table = io::read_csv(in, source);
  if (table.header.size() != 2 || io::to_upper(table.header[0]) != "TIMESTAMP" ||
      io::to_upper(table.header[1]) != "LEVEL")
    throw Error(ErrorCode::kParse, source + ": header must be 'timestamp,level'");
  if (table.rows.empty()) throw Error(ErrorCode::kParse, source + ": empty file");
  if (options.step.count() <= 0) throw Error(ErrorCode::kInvalidArgument, "step must be positive");

  std::vector<double> levels;
  std::vector<bool> missing;
  Timestamp start{};
  Timestamp previous{};
  std::size_t run = 0;  // current run of consecutive missing samples

  auto push = [&](double value, bool is_missing, std::size_t line) {
    levels.push_back(value);
    missing.push_back(is_missing);
    run = is_missing ? run + 1 : 0;
    if (run > options.max_gap)
      throw Error(ErrorCode::kValidation, source + ":" + std::to_string(line) + ": gap of more than " +
                                              std::to_string(options.max_gap) + " samples");
  };

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.line_numbers[r];
    const std::string where = source + ":" + std::to_string(line);
    const Timestamp t = parse_timestamp(row[0]);
    if (r == 0) {
      start = t;
    } else {
      if (t <= previous) throw Error(ErrorCode::kValidation, where + ": non-monotone timestamps");
      const auto delta = t - previous;
      if (delta % options.step != std::chrono::seconds{0})
        throw Error(ErrorCode::kValidation,
                    where + ": irregular step not resolvable to declared step of " +
                        std::to_string(options.step.count()) + " s");
      const auto skipped = static_cast<std::size_t>(delta / options.step) - 1;
      for (std::size_t g = 0; g < skipped; ++g) push(kNaN, true, line);
    }
    previous = t;
    if (is_missing_token(row[1])) {
      push(kNaN, true, line);
    } else {
      push(io::parse_number(row[1], where), false, line);
    }
  }
  return LevelSeries(std::move(catchment_id), start, options.step, std::move(levels), std::move(missing),
                     pipe_diameter);
}

LevelSeries parse_level_series_file(const std::filesystem::path& path, std::string catchment_id,
                                    double pipe_diameter, const SeriesOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return parse_level_series(in, path.string(), std::move(catchment_id), pipe_diameter, options);
}

std::string write_level_series(const LevelSeries& series) {
  std::string out = "timestamp,level\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    out += format_timestamp(series.time_at(i));
    out += ',';
    if (!series.missing()[i]) out += io::format_number(series.levels()[i]);
    out += '\n';
  }
  return out;
}

double mean_filling_degree(const LevelSeries& series) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series.missing()[i]) continue;
    sum += series.levels()[i] / series.pipe_diameter();
    ++count;
  }
  if (count == 0)
    throw Error(ErrorCode::kDegenerate, "level series '" + series.catchment_id() + "': all samples missing");
  return 100.0 * sum / static_cast<double>(count);
}

// AttributeTable ---------------------------------------------------------------

std::string_view name_of(Attribute a) { return kAttributeNames[index_of(a)]; }

std::optional<Attribute> attribute_from_name(std::string_view name) {
  const std::string upper = io::to_upper(io::trim(name));
  for (std::size_t i = 0; i < kAttributeCount; ++i)
    if (kAttributeNames[i] == upper) return static_cast<Attribute>(i);
  return std::nullopt;
}

bool is_water_level_feature(Attribute a) {
  return a == Attribute::WAVE1 || a == Attribute::WAVE2 || a == Attribute::WAVE3 || a == Attribute::MFD;
}

namespace {

bool is_percentage(Attribute a) {
  switch (a) {
    case Attribute::SG: case Attribute::CG: case Attribute::STG:
    case Attribute::ADD: case Attribute::INF: case Attribute::OVL: case Attribute::IMP: case Attribute::SAN:
      return true;
    default:
      return false;
  }
}

bool is_nonnegative(Attribute a) {
  switch (a) {
    case Attribute::SA: case Attribute::CA: case Attribute::STA:
    case Attribute::SP: case Attribute::CP: case Attribute::STP:
    case Attribute::TVO: case Attribute::MFD:
      return true;
    default:
      return false;
  }
}

void validate_record(const AttributeRecord& rec, const AttributeOptions& options) {
  const std::string where = "attribute record '" + rec.id + "'";
  for (std::size_t i = 0; i < kAttributeCount; ++i) {
    const auto a = static_cast<Attribute>(i);
    const auto& v = rec.values[i];
    if (!v) {
      if (!is_water_level_feature(a))
        throw Error(ErrorCode::kValidation, where + ": missing required value " + std::string(name_of(a)));
      continue;
    }
    const std::string col = std::string(name_of(a));
    if (!std::isfinite(*v)) throw Error(ErrorCode::kValidation, where + ": " + col + " is not finite");
    if (is_percentage(a) && (*v < 0.0 || *v > 100.0))
      throw Error(ErrorCode::kValidation, where + ": percentage out of range: " + col + " = " + io::format_number(*v));
    if (is_nonnegative(a) && *v < 0.0)
      throw Error(ErrorCode::kValidation, where + ": " + col + " must be non-negative");
    if ((a == Attribute::WAVE1 || a == Attribute::WAVE2 || a == Attribute::WAVE3) && !(*v > 0.0))
      throw Error(ErrorCode::kValidation, where + ": " + col + " must be a positive period");
  }
  const double sum = *rec[Attribute::ADD] + *rec[Attribute::INF] + *rec[Attribute::OVL] + *rec[Attribute::IMP] +
                     *rec[Attribute::SAN];
  if (std::abs(sum - 100.0) > options.composition_tolerance)
    throw Error(ErrorCode::kValidation,
                where + ": composition sum out of tolerance (" + io::format_number(sum) + "%)");
}

}  // namespace

AttributeTable::AttributeTable(std::vector<AttributeRecord> records, const AttributeOptions& options)
    : records_(std::move(records)) {
  std::set<std::string> ids;
  for (const auto& rec : records_) {
    if (rec.id.empty()) throw Error(ErrorCode::kValidation, "attribute record with empty id");
    if (!ids.insert(rec.id).second) throw Error(ErrorCode::kValidation, "duplicate id '" + rec.id + "'");
    validate_record(rec, options);
  }
}

const AttributeRecord* AttributeTable::find(std::string_view id) const {
  for (const auto& rec : records_)
    if (rec.id == id) return &rec;
  return nullptr;
}

bool AttributeTable::needs_wavelet_features() const {
  for (const auto& rec : records_)
    for (auto a : {Attribute::WAVE1, Attribute::WAVE2, Attribute::WAVE3, Attribute::MFD})
      if (!rec[a]) return true;
  return false;
}

AttributeTable parse_attribute_table(std::istream& in, const std::string& source, const AttributeOptions& options) {
  const io::CsvTable table = io::read_csv(in, source);
  std::optional<std::size_t> id_col;
  std::optional<std::size_t> name_col;
  std::array<std::optional<std::size_t>, kAttributeCount> columns{};
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const std::string upper = io::to_upper(table.header[c]);
    std::optional<std::size_t>* slot = nullptr;
    if (upper == "ID") {
      slot = &id_col;
    } else if (upper == "NAME") {
      slot = &name_col;
    } else if (auto a = attribute_from_name(upper)) {
      slot = &columns[index_of(*a)];
    } else {
      throw Error(ErrorCode::kParse, source + ": unknown column '" + table.header[c] + "'");
    }
    if (*slot) throw Error(ErrorCode::kParse, source + ": duplicate column '" + table.header[c] + "'");
    *slot = c;
  }
  if (!id_col) throw Error(ErrorCode::kParse, source + ": missing column 'id'");
  for (std::size_t i = 0; i < kAttributeCount; ++i) {
    const auto a = static_cast<Attribute>(i);
    if (!columns[i] && !is_water_level_feature(a))
      throw Error(ErrorCode::kParse, source + ": missing column '" + std::string(name_of(a)) + "'");
  }

  std::vector<AttributeRecord> records;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    AttributeRecord rec;
    rec.id = row[*id_col];
    if (name_col) rec.name = row[*name_col];
    for (std::size_t i = 0; i < kAttributeCount; ++i) {
      if (!columns[i]) continue;
      const std::string& cell = row[*columns[i]];
      const auto a = static_cast<Attribute>(i);
      if (cell.empty() && is_water_level_feature(a)) continue;
      rec.values[i] = io::parse_number(cell, source + ":" + std::to_string(table.line_numbers[r]) + ": " +
                                                 std::string(name_of(a)));
    }
    records.push_back(std::move(rec));
  }
  return AttributeTable(std::move(records), options);
}

AttributeTable parse_attribute_table_file(const std::filesystem::path& path, const AttributeOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return parse_attribute_table(in, path.string(), options);
}

std::string write_attribute_table(const AttributeTable& table) {
  std::vector<std::string> header{"id", "name"};
  for (auto n : kAttributeNames) header.emplace_back(n);
  std::string out = io::csv_line(header);
  for (const auto& rec : table.records()) {
    std::vector<std::string> fields{rec.id, rec.name};
    for (const auto& v : rec.values) fields.push_back(v ? io::format_number(*v) : std::string());
    out += io::csv_line(fields);
  }
  return out;
}

// FlowPair ----------------------------------------------------------------------

FlowPair::FlowPair(std::string catchment_id, std::vector<double> observed, std::vector<double> simulated)
    : catchment_id_(std::move(catchment_id)), observed_(std::move(observed)), simulated_(std::move(simulated)) {
  const std::string where = "flow pair '" + catchment_id_ + "'";
  if (observed_.size() != simulated_.size())
    throw Error(ErrorCode::kValidation, where + ": observed and simulated lengths differ");
  if (observed_.size() < 2) throw Error(ErrorCode::kValidation, where + ": fewer than 2 samples");
  for (std::size_t i = 0; i < observed_.size(); ++i)
    if (!std::isfinite(observed_[i]) || !std::isfinite(simulated_[i]))
      throw Error(ErrorCode::kValidation, where + ": non-finite value at sample " + std::to_string(i));
  const auto [lo, hi] = std::minmax_element(observed_.begin(), observed_.end());
  if (*lo == *hi) throw Error(ErrorCode::kDegenerate, where + ": constant observed series");
}

FlowPair parse_flow_pair(std::istream& in, const std::string& source, std::string catchment_id) {
  const io::CsvTable table = io::read_csv(in, source);
  if (table.header.size() != 3 || io::to_upper(table.header[0]) != "TIMESTAMP" ||
      io::to_upper(table.header[1]) != "OBSERVED" || io::to_upper(table.header[2]) != "SIMULATED")
    throw Error(ErrorCode::kParse, source + ": header must be 'timestamp,observed,simulated'");
  if (table.rows.empty()) throw Error(ErrorCode::kParse, source + ": empty file");
  std::vector<double> obs;
  std::vector<double> sim;
  std::optional<Timestamp> previous;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string where = source + ":" + std::to_string(table.line_numbers[r]);
    const Timestamp t = parse_timestamp(table.rows[r][0]);
    if (previous && t <= *previous) throw Error(ErrorCode::kValidation, where + ": non-monotone timestamps");
    previous = t;
    obs.push_back(io::parse_number(table.rows[r][1], where));
    sim.push_back(io::parse_number(table.rows[r][2], where));
  }
  return FlowPair(std::move(catchment_id), std::move(obs), std::move(sim));
}

FlowPair parse_flow_pair_file(const std::filesystem::path& path, std::string catchment_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return parse_flow_pair(in, path.string(), std::move(catchment_id));
}

// Manifest -------------------------------------------------------------------------

Manifest load_manifest(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  if (!fs::exists(path)) throw Error(ErrorCode::kConfig, "manifest not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
  const fs::path root = fs::absolute(path).parent_path();
  auto resolve = [&](const std::string& p) { return (root / p).lexically_normal(); };

  Manifest m;
  m.path = fs::absolute(path).lexically_normal();
  try {
    m.attributes = resolve(j.at("attributes").get<std::string>());
    if (j.contains("step_hours")) {
      const double h = j["step_hours"].get<double>();
      const auto secs = std::llround(h * 3600.0);
      if (!(h > 0.0) || secs <= 0) throw Error(ErrorCode::kConfig, path.string() + ": step_hours must be positive");
      m.series.step = std::chrono::seconds{secs};
    }
    if (j.contains("max_gap")) m.series.max_gap = j["max_gap"].get<std::size_t>();
    if (j.contains("composition_tolerance"))
      m.attribute_options.composition_tolerance = j["composition_tolerance"].get<double>();
    std::set<std::string> seen;
    for (const auto& c : j.at("catchments")) {
      CatchmentEntry e;
      e.id = c.at("id").is_string() ? c.at("id").get<std::string>() : c.at("id").dump();
      e.name = c.value("name", std::string());
      e.levels = resolve(c.at("levels").get<std::string>());
      e.pipe_diameter = c.at("pipe_diameter").get<double>();
      if (c.contains("flows") && !c["flows"].is_null()) e.flows = resolve(c["flows"].get<std::string>());
      if (!(e.pipe_diameter > 0.0))
        throw Error(ErrorCode::kConfig, path.string() + ": catchment '" + e.id + "' needs a positive pipe_diameter");
      if (!seen.insert(e.id).second)
        throw Error(ErrorCode::kConfig, path.string() + ": duplicate catchment id '" + e.id + "'");
      m.catchments.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
  return m;
}

}  // namespace sewerml::ingest
