#include "sewerml/features.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"

#include "sewerml/error.hpp"
#include "sewerml/io.hpp"

namespace sewerml::features {

using ingest::Attribute;

const char* to_string(Scaling s) {
  switch (s) {
    case Scaling::kRaw: return "raw";
    case Scaling::kZScore: return "zscore";
    case Scaling::kMinMax: return "minmax";
  }
  return "raw";
}

Scaling scaling_from_string(std::string_view s) {
  if (s == "raw") return Scaling::kRaw;
  if (s == "zscore") return Scaling::kZScore;
  if (s == "minmax") return Scaling::kMinMax;
  throw Error(ErrorCode::kConfig, "unknown scaling '" + std::string(s) + "' (expected zscore or minmax)");
}

std::optional<double> WaterLevelFeatures::get(Attribute a) const {
  switch (a) {
    case Attribute::WAVE1: return wave1;
    case Attribute::WAVE2: return wave2;
    case Attribute::WAVE3: return wave3;
    case Attribute::MFD: return mfd;
    default: return std::nullopt;
  }
}

FeatureMatrix::FeatureMatrix(std::vector<std::string> row_ids, std::vector<std::string> column_names,
                             Eigen::MatrixXd values, std::vector<FeatureSource> sources)
    : row_ids_(std::move(row_ids)),
      column_names_(std::move(column_names)),
      values_(std::move(values)),
      sources_(std::move(sources)) {
  if (static_cast<Eigen::Index>(row_ids_.size()) != values_.rows() ||
      static_cast<Eigen::Index>(column_names_.size()) != values_.cols())
    throw Error(ErrorCode::kInvalidArgument, "feature matrix labels do not match its shape");
  if (!values_.allFinite()) throw Error(ErrorCode::kValidation, "feature matrix has non-finite entries");
  if (sources_.empty()) sources_.assign(static_cast<std::size_t>(values_.size()), FeatureSource::kIngested);
  if (sources_.size() != static_cast<std::size_t>(values_.size()))
    throw Error(ErrorCode::kInvalidArgument, "feature provenance does not match matrix shape");
}

Eigen::MatrixXd FeatureMatrix::unscaled() const {
  if (scaling_ == Scaling::kRaw) return values_;
  Eigen::MatrixXd out = values_;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    const auto cc = static_cast<std::size_t>(c);
    out.col(c) = (values_.col(c).array() * spread_[cc] + center_[cc]).matrix();
  }
  return out;
}

std::vector<Attribute> all_attributes() {
  std::vector<Attribute> out;
  for (std::size_t i = 0; i < ingest::kAttributeCount; ++i) out.push_back(static_cast<Attribute>(i));
  return out;
}

FeatureMatrix assemble(const ingest::AttributeTable& table, const std::map<std::string, WaterLevelFeatures>& computed,
                       const std::vector<Attribute>& columns) {
  if (columns.empty()) throw Error(ErrorCode::kInvalidArgument, "feature subset is empty");
  const auto n = static_cast<Eigen::Index>(table.size());
  const auto d = static_cast<Eigen::Index>(columns.size());
  Eigen::MatrixXd values(n, d);
  std::vector<FeatureSource> sources(static_cast<std::size_t>(n * d), FeatureSource::kIngested);
  std::vector<std::string> ids;
  std::vector<std::string> names;
  for (auto a : columns) names.emplace_back(ingest::name_of(a));

  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& rec = table.records()[static_cast<std::size_t>(r)];
    ids.push_back(rec.id);
    const auto it = computed.find(rec.id);
    for (Eigen::Index c = 0; c < d; ++c) {
      const Attribute a = columns[static_cast<std::size_t>(c)];
      std::optional<double> v;
      if (it != computed.end() && ingest::is_water_level_feature(a)) {
        v = it->second.get(a);
        if (v) sources[static_cast<std::size_t>(r * d + c)] = FeatureSource::kComputed;
      }
      if (!v) v = rec[a];
      if (!v)
        throw Error(ErrorCode::kValidation, "sub-catchment '" + rec.id + "' has no value for " +
                                                std::string(ingest::name_of(a)) + " (neither stored nor computed)");
      values(r, c) = *v;
    }
  }
  return FeatureMatrix(std::move(ids), std::move(names), std::move(values), std::move(sources));
}

FeatureMatrix scale(const FeatureMatrix& raw, Scaling method) {
  if (raw.scaling() != Scaling::kRaw)
    throw Error(ErrorCode::kInvalidArgument, "feature matrix is already scaled (" + std::string(to_string(raw.scaling())) + ")");
  if (method == Scaling::kRaw) throw Error(ErrorCode::kInvalidArgument, "scale() needs zscore or minmax");
  if (raw.rows() < 1) throw Error(ErrorCode::kInvalidArgument, "cannot scale an empty matrix");

  FeatureMatrix out = raw;
  out.scaling_ = method;
  const auto d = static_cast<std::size_t>(raw.cols());
  out.center_.assign(d, 0.0);
  out.spread_.assign(d, 0.0);
  out.constant_.assign(d, false);
  const Eigen::Index n = raw.rows();
  for (Eigen::Index c = 0; c < raw.cols(); ++c) {
    const auto cc = static_cast<std::size_t>(c);
    const auto col = raw.values().col(c);
    const double lo = col.minCoeff();
    const double hi = col.maxCoeff();
    if (lo == hi || (method == Scaling::kZScore && n < 2)) {
      out.constant_[cc] = true;
      out.center_[cc] = method == Scaling::kZScore ? col.mean() : lo;
      out.spread_[cc] = 0.0;
      out.values_.col(c).setZero();
      continue;
    }
    if (method == Scaling::kZScore) {
      double mean = 0.0;
      for (Eigen::Index r = 0; r < n; ++r) mean += col(r);
      mean /= static_cast<double>(n);
      double ss = 0.0;
      for (Eigen::Index r = 0; r < n; ++r) ss += (col(r) - mean) * (col(r) - mean);
      const double sd = std::sqrt(ss / static_cast<double>(n - 1));
      out.center_[cc] = mean;
      out.spread_[cc] = sd;
    } else {
      out.center_[cc] = lo;
      out.spread_[cc] = hi - lo;
    }
    for (Eigen::Index r = 0; r < n; ++r)
      out.values_(r, c) = (col(r) - out.center_[cc]) / out.spread_[cc];
    if (method == Scaling::kMinMax) {
      // pin the extremes so the column spans exactly [0, 1]
      for (Eigen::Index r = 0; r < n; ++r) {
        if (col(r) == lo) out.values_(r, c) = 0.0;
        if (col(r) == hi) out.values_(r, c) = 1.0;
      }
    }
  }
  return out;
}

std::string write_features_csv(const FeatureMatrix& m) {
  std::vector<std::string> header{"id"};
  header.insert(header.end(), m.column_names().begin(), m.column_names().end());
  std::string out = io::csv_line(header);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<std::string> fields{m.row_ids()[static_cast<std::size_t>(r)]};
    for (Eigen::Index c = 0; c < m.cols(); ++c) fields.push_back(io::format_number(m.values()(r, c)));
    out += io::csv_line(fields);
  }
  return out;
}

std::string write_features_meta(const FeatureMatrix& m, std::string_view csv_sha256) {
  nlohmann::json j;
  j["scaling"] = to_string(m.scaling());
  j["columns"] = m.column_names();
  j["rows"] = m.row_ids();
  j["center"] = m.center();
  j["spread"] = m.spread();
  nlohmann::json constant = nlohmann::json::array();
  for (bool b : m.constant_columns()) constant.push_back(b);
  j["constant"] = constant;
  nlohmann::json prov = nlohmann::json::object();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json computed = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      if (m.source(r, c) == FeatureSource::kComputed) computed.push_back(m.column_names()[static_cast<std::size_t>(c)]);
    prov[m.row_ids()[static_cast<std::size_t>(r)]] = computed;
  }
  j["computed_features"] = prov;
  j["features_sha256"] = std::string(csv_sha256);
  return j.dump(2) + "\n";
}

FeatureMatrix read_features(const std::filesystem::path& csv_path, const std::filesystem::path& meta_path) {
  if (!std::filesystem::exists(csv_path))
    throw Error(ErrorCode::kDependency, "missing upstream artifact " + csv_path.string() + " (run `features` first)");
  if (!std::filesystem::exists(meta_path))
    throw Error(ErrorCode::kDependency, "missing upstream artifact " + meta_path.string() + " (run `features` first)");
  const std::string csv = io::read_file(csv_path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(io::read_file(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, meta_path.string() + ": " + e.what());
  }
  if (meta.value("features_sha256", std::string()) != io::sha256_hex(csv))
    throw Error(ErrorCode::kDependency, "stale artifact: " + csv_path.string() + " does not match " +
                                            meta_path.string() + " (re-run `features`)");

  std::istringstream in(csv);
  const io::CsvTable t = io::read_csv(in, csv_path.string());
  if (t.header.empty() || t.header[0] != "id") throw Error(ErrorCode::kParse, csv_path.string() + ": first column must be 'id'");
  std::vector<std::string> cols(t.header.begin() + 1, t.header.end());
  std::vector<std::string> ids;
  Eigen::MatrixXd values(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    ids.push_back(t.rows[r][0]);
    for (std::size_t c = 0; c < cols.size(); ++c)
      values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          io::parse_number(t.rows[r][c + 1], csv_path.string() + ":" + std::to_string(t.line_numbers[r]));
  }
  FeatureMatrix m(ids, cols, std::move(values));
  try {
    m.scaling_ = scaling_from_string(meta.at("scaling").get<std::string>());
    if (meta.at("columns").get<std::vector<std::string>>() != cols)
      throw Error(ErrorCode::kDependency, "stale artifact: columns of " + csv_path.string() + " differ from sidecar");
    if (m.scaling_ != Scaling::kRaw) {
      m.center_ = meta.at("center").get<std::vector<double>>();
      m.spread_ = meta.at("spread").get<std::vector<double>>();
      m.constant_ = meta.at("constant").get<std::vector<bool>>();
      if (m.center_.size() != cols.size() || m.spread_.size() != cols.size() || m.constant_.size() != cols.size())
        throw Error(ErrorCode::kParse, meta_path.string() + ": scaling parameters do not match column count");
    }
    const auto& prov = meta.at("computed_features");
    for (std::size_t r = 0; r < ids.size(); ++r) {
      if (!prov.contains(ids[r])) continue;
      for (const auto& name : prov[ids[r]]) {
        for (std::size_t c = 0; c < cols.size(); ++c)
          if (cols[c] == name.get<std::string>()) m.sources_[r * cols.size() + c] = FeatureSource::kComputed;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, meta_path.string() + ": " + e.what());
  }
  return m;
}

}  // namespace sewerml::features
