#include "sewerml/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "sewerml/ingest.hpp"
#include "sewerml/io.hpp"
#include "sewerml/pca.hpp"
#include "sewerml/plot.hpp"

#ifndef SEWERML_DEFAULT_RULE
#define SEWERML_DEFAULT_RULE "config/default_priority_rule.json"
#endif

namespace sewerml::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFeaturesCsv = "features.csv";
constexpr const char* kFeaturesMeta = "features.meta.json";
constexpr const char* kRawCsv = "features_raw.csv";
constexpr const char* kRawMeta = "features_raw.meta.json";
constexpr const char* kClustersCsv = "clusters.csv";
constexpr const char* kClusterMeta = "cluster_meta.json";
constexpr const char* kScVsK = "sc_vs_k.csv";
constexpr const char* kDendrogramJson = "dendrogram.json";
constexpr const char* kSomJson = "som.json";
constexpr const char* kRankingJson = "ranking.json";
constexpr const char* kCalibrationCsv = "calibration.csv";
constexpr const char* kReportJson = "report.json";

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json read_json(const fs::path& path, ErrorCode missing_code, const std::string& hint) {
  if (!fs::exists(path)) throw Error(missing_code, "missing upstream artifact " + path.string() + hint);
  try {
    return json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

fs::path rule_path(const RunConfig& c) { return c.priority_rule.empty() ? fs::path(SEWERML_DEFAULT_RULE) : c.priority_rule; }

std::string pc_label(int j) { return "PC" + std::to_string(j + 1); }

features::FeatureMatrix load_scaled(const RunConfig& c) {
  return features::read_features(c.output / kFeaturesCsv, c.output / kFeaturesMeta);
}

std::string sha_of_file(const fs::path& p) { return io::sha256_hex(io::read_file(p)); }

std::vector<double> scale_grid(const RunConfig& c, double step_hours) {
  return wavelet::make_scale_grid(c.scales.min.value_or(2.0 * step_hours), c.scales.max, c.scales.count, c.scales.spacing);
}

const char* spacing_name(wavelet::Spacing s) { return s == wavelet::Spacing::kLog ? "log" : "linear"; }

// clusters.csv ------------------------------------------------------------------

struct ClusterTable {
  std::vector<std::string> ids;
  std::vector<std::string> methods;
  std::vector<std::vector<int>> labels;  // per method, 0-based
};

ClusterTable read_clusters(const fs::path& path) {
  if (!fs::exists(path))
    throw Error(ErrorCode::kDependency, "missing upstream artifact " + path.string() + " (run `cluster` first)");
  const io::CsvTable t = io::read_csv_file(path);
  if (t.header.size() < 2 || t.header[0] != "id") throw Error(ErrorCode::kParse, path.string() + ": expected id,<method>...");
  ClusterTable out;
  out.methods.assign(t.header.begin() + 1, t.header.end());
  out.labels.resize(out.methods.size());
  for (const auto& row : t.rows) {
    out.ids.push_back(row[0]);
    for (std::size_t m = 0; m < out.methods.size(); ++m) {
      const double v = io::parse_number(row[m + 1], path.string());
      if (v < 1 || v != std::floor(v)) throw Error(ErrorCode::kParse, path.string() + ": cluster labels are positive integers");
      out.labels[m].push_back(static_cast<int>(v) - 1);
    }
  }
  return out;
}

cluster::ClusterAssignment reference_assignment(const RunConfig& c, const ClusterTable& t, std::string* used) {
  std::size_t col = 0;
  const std::string want = cluster::to_string(c.reference);
  for (std::size_t m = 0; m < t.methods.size(); ++m)
    if (t.methods[m] == want) col = m;
  if (used) *used = t.methods[col];
  const auto& labels = t.labels[col];
  const int k = *std::max_element(labels.begin(), labels.end()) + 1;
  return cluster::ClusterAssignment(cluster::method_from_string(t.methods[col]), labels, k, std::nullopt, std::nullopt, t.ids);
}

void check_fresh(const RunConfig& c) {
  const json meta = read_json(c.output / kClusterMeta, ErrorCode::kDependency, " (run `cluster` first)");
  if (meta.value("features_sha256", std::string()) != sha_of_file(c.output / kFeaturesCsv))
    throw Error(ErrorCode::kDependency, "stale artifact " + (c.output / kClustersCsv).string() +
                                            ": features.csv changed since clustering (re-run `cluster`)");
}

}  // namespace

// configuration ----------------------------------------------------------------------

void RunConfig::validate(bool need_manifest, bool need_seed, bool need_rule) const {
  if (output.empty()) throw Error(ErrorCode::kConfig, "output directory is required");
  if (need_manifest) {
    if (manifest.empty()) throw Error(ErrorCode::kConfig, "manifest path is required");
    if (!fs::exists(manifest)) throw Error(ErrorCode::kConfig, "manifest not found: " + manifest.string());
  }
  if (need_seed && !seed) throw Error(ErrorCode::kConfig, "seed is mandatory (no wall-clock default)");
  if (need_rule && !fs::exists(rule_path(*this)))
    throw Error(ErrorCode::kConfig, "priority rule not found: " + rule_path(*this).string());
  if (scales.count < 3) throw Error(ErrorCode::kConfig, "scale grid needs at least 3 scales");
  if (!(scales.max > 0.0) || (scales.min && !(*scales.min > 0.0 && *scales.min < scales.max)))
    throw Error(ErrorCode::kConfig, "scale grid needs 0 < min < max");
  morlet.validate();
  if (k && *k < 2) throw Error(ErrorCode::kConfig, "k must be at least 2");
  if (k_min < 2 || k_max < k_min) throw Error(ErrorCode::kConfig, "k range needs 2 <= k_min <= k_max");
  if (kmeans_restarts < 1) throw Error(ErrorCode::kConfig, "k-means needs at least one restart");
  if (som.epochs < 1) throw Error(ErrorCode::kConfig, "SOM needs at least one epoch");
  if (n_pcs < 1) throw Error(ErrorCode::kConfig, "n_pcs must be positive");
}

RunConfig load_run_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::kConfig, "config not found: " + path.string());
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
  const fs::path root = fs::absolute(path).parent_path();
  auto resolve = [&](const json& v) { return (root / v.get<std::string>()).lexically_normal(); };
  static const std::set<std::string> kKeys = {"manifest", "output", "priority_rule", "seed", "scales", "morlet",
                                              "scaling", "k", "k_range", "kmeans_restarts", "som", "reference",
                                              "n_pcs", "r2_mode", "wave_feature", "threads", "scalogram_catchment"};
  RunConfig c;
  try {
    for (const auto& [key, value] : j.items())
      if (!kKeys.count(key)) throw Error(ErrorCode::kConfig, path.string() + ": unknown key '" + key + "'");
    if (j.contains("manifest")) c.manifest = resolve(j["manifest"]);
    if (j.contains("output")) c.output = resolve(j["output"]);
    if (j.contains("priority_rule")) c.priority_rule = resolve(j["priority_rule"]);
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("scales")) {
      const auto& s = j["scales"];
      if (s.contains("min")) c.scales.min = s["min"].get<double>();
      c.scales.max = s.value("max", c.scales.max);
      c.scales.count = s.value("count", c.scales.count);
      const std::string spacing = s.value("spacing", std::string("log"));
      if (spacing != "log" && spacing != "linear") throw Error(ErrorCode::kConfig, path.string() + ": spacing is log or linear");
      c.scales.spacing = spacing == "log" ? wavelet::Spacing::kLog : wavelet::Spacing::kLinear;
    }
    if (j.contains("morlet")) {
      c.morlet.bandwidth = j["morlet"].value("bandwidth", c.morlet.bandwidth);
      c.morlet.center_frequency = j["morlet"].value("center_frequency", c.morlet.center_frequency);
    }
    if (j.contains("scaling")) c.scaling = features::scaling_from_string(j["scaling"].get<std::string>());
    if (j.contains("k")) c.k = j["k"].get<int>();
    if (j.contains("k_range")) {
      const auto r = j["k_range"].get<std::vector<int>>();
      if (r.size() != 2) throw Error(ErrorCode::kConfig, path.string() + ": k_range is [k_min, k_max]");
      c.k_min = r[0];
      c.k_max = r[1];
    }
    c.kmeans_restarts = j.value("kmeans_restarts", c.kmeans_restarts);
    if (j.contains("som")) {
      const auto& s = j["som"];
      c.som.epochs = s.value("epochs", c.som.epochs);
      if (s.contains("learning_rate")) {
        const auto lr = s["learning_rate"].get<std::vector<double>>();
        if (lr.size() != 2) throw Error(ErrorCode::kConfig, path.string() + ": som.learning_rate is [start, end]");
        c.som.learning_rate_start = lr[0];
        c.som.learning_rate_end = lr[1];
      }
      if (s.contains("radius")) {
        const auto r = s["radius"].get<std::vector<double>>();
        if (r.size() != 2) throw Error(ErrorCode::kConfig, path.string() + ": som.radius is [start, end]");
        c.som.radius_start = r[0];
        c.som.radius_end = r[1];
      }
      if (s.contains("shape")) {
        const auto sh = s["shape"].get<std::vector<int>>();
        if (sh.size() != 2) throw Error(ErrorCode::kConfig, path.string() + ": som.shape is [rows, cols]");
        c.som_shape = std::pair{sh[0], sh[1]};
      }
    }
    if (j.contains("reference")) c.reference = cluster::method_from_string(j["reference"].get<std::string>());
    c.n_pcs = j.value("n_pcs", c.n_pcs);
    if (j.contains("wave_feature")) c.wave_feature = wave_feature_from_string(j["wave_feature"].get<std::string>());
    if (j.contains("r2_mode")) c.r2_mode = calibration::r_squared_mode_from_string(j["r2_mode"].get<std::string>());
    c.threads = j.value("threads", c.threads);
    c.scalogram_catchment = j.value("scalogram_catchment", c.scalogram_catchment);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    throw Error(ErrorCode::kConfig, path.string() + ": " + e.what());
  }
  return c;
}

const char* to_string(WaveFeature w) { return w == WaveFeature::kPeriod ? "period" : "variance"; }

WaveFeature wave_feature_from_string(const std::string& text) {
  if (text == "period") return WaveFeature::kPeriod;
  if (text == "variance") return WaveFeature::kVariance;
  throw Error(ErrorCode::kConfig, "unknown wave feature '" + text + "' (expected period or variance)");
}

Methods methods_from_string(const std::string& text) {
  if (text == "all") return Methods::kAll;
  if (text == "kmeans") return Methods::kKMeans;
  if (text == "hca") return Methods::kHca;
  if (text == "som") return Methods::kSom;
  throw Error(ErrorCode::kConfig, "unknown method '" + text + "' (expected all, kmeans, hca or som)");
}

// features ---------------------------------------------------------------------------

void run_features(const RunConfig& c) {
  c.validate(true, false, false);
  const ingest::Manifest manifest = ingest::load_manifest(c.manifest);
  const ingest::AttributeTable table = ingest::parse_attribute_table_file(manifest.attributes, manifest.attribute_options);
  std::map<std::string, const ingest::CatchmentEntry*> entries;
  for (const auto& e : manifest.catchments) {
    if (!table.find(e.id))
      throw Error(ErrorCode::kValidation, "catchment '" + e.id + "' in the manifest has no attribute record");
    entries[e.id] = &e;
  }

  std::map<std::string, features::WaterLevelFeatures> computed;
  std::string summary = "id,WAVE1,WAVE2,WAVE3,MFD,filled_peaks,missing_samples\n";
  for (const auto& rec : table.records()) {
    const auto it = entries.find(rec.id);
    if (it == entries.end()) continue;
    const ingest::LevelSeries series =
        ingest::parse_level_series_file(it->second->levels, rec.id, it->second->pipe_diameter, manifest.series);
    const auto scales = scale_grid(c, series.step_hours());
    wavelet::CwtOptions opts;
    opts.threads = c.threads;
    const auto spectrum = wavelet::cwt(series, scales, c.morlet, opts);
    const auto curve = wavelet::wavelet_variance(spectrum);
    io::write_file_atomic(c.output / ("wavevar_" + rec.id + ".csv"), wavelet::write_variance_curve(curve));
    const auto peaks = wavelet::top_periods(curve, 3);
    features::WaterLevelFeatures w;
    auto wave = [&](std::size_t i) {
      return c.wave_feature == WaveFeature::kPeriod ? peaks[i].scale / c.morlet.center_frequency : peaks[i].variance;
    };
    w.wave1 = wave(0);
    w.wave2 = wave(1);
    w.wave3 = wave(2);
    w.mfd = ingest::mean_filling_degree(series);
    const auto filled = std::count_if(peaks.begin(), peaks.end(), [](const auto& p) { return p.filled; });
    summary += io::csv_line({rec.id, io::format_number(*w.wave1), io::format_number(*w.wave2), io::format_number(*w.wave3),
                             io::format_number(*w.mfd), std::to_string(filled), std::to_string(series.missing_count())});
    computed[rec.id] = w;
  }
  io::write_file_atomic(c.output / "water_level_features.csv", summary);

  const auto raw = features::assemble(table, computed);
  const std::string raw_csv = features::write_features_csv(raw);
  io::write_file_atomic(c.output / kRawCsv, raw_csv);
  io::write_file_atomic(c.output / kRawMeta, features::write_features_meta(raw, io::sha256_hex(raw_csv)));
  if (c.scaling == features::Scaling::kRaw) {
    io::write_file_atomic(c.output / kFeaturesCsv, raw_csv);
    io::write_file_atomic(c.output / kFeaturesMeta, features::write_features_meta(raw, io::sha256_hex(raw_csv)));
    return;
  }
  const auto scaled = features::scale(raw, c.scaling);
  const std::string csv = features::write_features_csv(scaled);
  io::write_file_atomic(c.output / kFeaturesCsv, csv);
  io::write_file_atomic(c.output / kFeaturesMeta, features::write_features_meta(scaled, io::sha256_hex(csv)));
}

// clustering -------------------------------------------------------------------------

void run_cluster(const RunConfig& c, Methods methods) {
  c.validate(false, true, false);
  const auto matrix = load_scaled(c);
  const Eigen::MatrixXd& x = matrix.values();
  const int n = static_cast<int>(x.rows());
  const std::uint64_t seed = *c.seed;
  cluster::KMeansOptions km_opts;
  km_opts.restarts = c.kmeans_restarts;

  json meta;
  meta["features_sha256"] = sha_of_file(c.output / kFeaturesCsv);
  meta["seed"] = seed;

  // k from silhouette unless fixed
  const int k_max = std::min(c.k_max, n - 1);
  if (k_max < c.k_min)
    throw Error(ErrorCode::kInvalidArgument, "k range [" + std::to_string(c.k_min) + ", " + std::to_string(c.k_max) +
                                                 "] is empty for " + std::to_string(n) + " rows");
  const cluster::KSelection selection = cluster::select_k(x, c.k_min, k_max, seed, km_opts);
  std::string sc = "k,silhouette\n";
  for (const auto& [k, s] : selection.scores) sc += io::csv_line({std::to_string(k), io::format_number(s)});
  io::write_file_atomic(c.output / kScVsK, sc);
  const int k = c.k.value_or(selection.best_k);
  meta["k"] = k;
  meta["k_source"] = c.k ? "config" : "silhouette";
  meta["k_range"] = {c.k_min, k_max};
  meta["silhouette_best_k"] = selection.best_k;

  std::vector<cluster::ClusterAssignment> found;
  const bool all = methods == Methods::kAll;
  if (all || methods == Methods::kKMeans) {
    const auto state = cluster::kmeans(x, k, seed, km_opts);
    auto a = cluster::to_assignment(state).with_row_ids(matrix.row_ids());
    const double s = cluster::silhouette(x, a.labels()).mean;
    meta["kmeans"] = {{"sse", state.sse}, {"iterations", state.iterations}, {"silhouette", s}, {"seed", state.seed}};
    found.push_back(a.with_quality(s));
  }
  if (all || methods == Methods::kHca) {
    const auto dendrogram = cluster::hca_ward(x, matrix.row_ids());
    const auto cut = cluster::cut_dendrogram_k(dendrogram, k);
    io::write_file_atomic(c.output / "dendrogram.nwk", cluster::to_newick(dendrogram));
    json d;
    d["leaves"] = dendrogram.leaf_ids;
    d["merges"] = json::array();
    for (const auto& m : dendrogram.merges) d["merges"].push_back({{"a", m.a}, {"b", m.b}, {"height", m.height}, {"size", m.size}});
    d["cut"] = {{"k", k}, {"height", cut.cut_height}, {"lower", cut.lower}, {"in_rule_of_thumb", cut.in_rule_of_thumb}};
    io::write_file_atomic(c.output / kDendrogramJson, dump(d));
    const double s = cluster::silhouette(x, cut.assignment.labels()).mean;
    meta["hca"] = {{"cut_height", cut.cut_height},
                   {"cut_lower", cut.lower},
                   {"max_height", dendrogram.max_height()},
                   {"in_rule_of_thumb", cut.in_rule_of_thumb},
                   {"silhouette", s}};
    found.push_back(cut.assignment.with_quality(s));
  }
  if (all || methods == Methods::kSom) {
    const auto [rows, cols] = c.som_shape.value_or(cluster::som_grid_size(n));
    const auto grid = cluster::som_train(x, rows, cols, seed + 1000, c.som);
    const auto sc_result = cluster::som_clusters(grid, x, k, seed + 2000);
    json s;
    s["rows"] = grid.rows;
    s["cols"] = grid.cols;
    s["columns"] = matrix.column_names();
    s["weights"] = json::array();
    for (Eigen::Index j = 0; j < grid.weights.rows(); ++j) {
      std::vector<double> w;
      for (Eigen::Index d = 0; d < grid.weights.cols(); ++d) w.push_back(grid.weights(j, d));
      s["weights"].push_back(w);
    }
    s["hits"] = grid.hits;
    s["bmu"] = grid.bmu;
    s["ids"] = matrix.row_ids();
    s["u_matrix"] = grid.u_matrix;
    s["neuron_labels"] = sc_result.neuron_labels;
    s["quantization_history"] = grid.quantization_history;
    s["quantization_coarse"] = grid.quantization_coarse;
    s["quantization_final"] = grid.quantization_final;
    s["degenerate"] = grid.degenerate;
    io::write_file_atomic(c.output / kSomJson, dump(s));
    meta["som"] = {{"rows", rows},
                   {"cols", cols},
                   {"quantization_coarse", grid.quantization_coarse},
                   {"quantization_final", grid.quantization_final},
                   {"silhouette", sc_result.assignment.quality() ? json(*sc_result.assignment.quality()) : json()}};
    found.push_back(sc_result.assignment.with_row_ids(matrix.row_ids()));
  }

  // align everything into the reference label space
  std::size_t ref = 0;
  for (std::size_t i = 0; i < found.size(); ++i)
    if (found[i].method() == c.reference) ref = i;
  meta["reference"] = cluster::to_string(found[ref].method());
  std::vector<std::vector<int>> aligned(found.size());
  for (std::size_t i = 0; i < found.size(); ++i)
    aligned[i] = i == ref ? found[i].labels() : cluster::align_labels(found[ref], found[i]).relabeled;
  meta["agreement"] = json::array();
  for (std::size_t i = 0; i < found.size(); ++i)
    for (std::size_t j = i + 1; j < found.size(); ++j) {
      const auto al = cluster::align_labels(found[i], found[j]);
      meta["agreement"].push_back({{"a", cluster::to_string(found[i].method())},
                                   {"b", cluster::to_string(found[j].method())},
                                   {"agreement", al.agreement},
                                   {"adjusted_rand", al.adjusted_rand}});
    }

  std::vector<std::string> header{"id"};
  for (const auto& f : found) header.emplace_back(cluster::to_string(f.method()));
  std::string csv = io::csv_line(header);
  for (int r = 0; r < n; ++r) {
    std::vector<std::string> row{matrix.row_ids()[static_cast<std::size_t>(r)]};
    for (const auto& a : aligned) row.push_back(std::to_string(a[static_cast<std::size_t>(r)] + 1));
    csv += io::csv_line(row);
  }
  io::write_file_atomic(c.output / kClustersCsv, csv);
  io::write_file_atomic(c.output / kClusterMeta, dump(meta));
}

// pca and ranking ----------------------------------------------------------------------

void run_pca(const RunConfig& c) {
  c.validate(false, false, false);
  const auto matrix = load_scaled(c);
  const pca::PcaResult r = pca::pca(matrix);
  const auto p = static_cast<int>(r.loadings.cols());

  std::vector<std::string> header{"attribute"};
  for (int j = 0; j < p; ++j) header.push_back(pc_label(j));
  std::string loadings = io::csv_line(header);
  for (Eigen::Index i = 0; i < r.loadings.rows(); ++i) {
    std::vector<std::string> row{r.attributes[static_cast<std::size_t>(i)]};
    for (int j = 0; j < p; ++j) row.push_back(io::format_number(r.loadings(i, j)));
    loadings += io::csv_line(row);
  }
  io::write_file_atomic(c.output / "pca_loadings.csv", loadings);

  header[0] = "id";
  std::string scores = io::csv_line(header);
  for (Eigen::Index i = 0; i < r.scores.rows(); ++i) {
    std::vector<std::string> row{r.row_ids[static_cast<std::size_t>(i)]};
    for (int j = 0; j < p; ++j) row.push_back(io::format_number(r.scores(i, j)));
    scores += io::csv_line(row);
  }
  io::write_file_atomic(c.output / "pca_scores.csv", scores);

  std::string explained = "component,eigenvalue,explained,cumulative\n";
  double cumulative = 0.0;
  for (int j = 0; j < p; ++j) {
    cumulative += r.explained[static_cast<std::size_t>(j)];
    explained += io::csv_line({pc_label(j), io::format_number(r.eigenvalues(j)),
                               io::format_number(r.explained[static_cast<std::size_t>(j)]), io::format_number(cumulative)});
  }
  io::write_file_atomic(c.output / "pca_explained.csv", explained);

  std::string extremes = "component,highest_attribute,highest_loading,lowest_attribute,lowest_loading\n";
  for (const auto& e : pca::loading_extremes(r, std::min(c.n_pcs, p)))
    extremes += io::csv_line({pc_label(e.component), e.highest ? e.highest->first : "none",
                              e.highest ? io::format_number(e.highest->second) : "",
                              e.lowest ? e.lowest->first : "none", e.lowest ? io::format_number(e.lowest->second) : ""});
  io::write_file_atomic(c.output / "pca_extremes.csv", extremes);
}

void run_rank(const RunConfig& c) {
  c.validate(false, false, true);
  const auto matrix = load_scaled(c);
  check_fresh(c);
  const ClusterTable table = read_clusters(c.output / kClustersCsv);
  if (table.ids != matrix.row_ids())
    throw Error(ErrorCode::kDependency, "stale artifact " + (c.output / kClustersCsv).string() + ": row ids differ from features.csv");
  std::string used;
  const auto reference = reference_assignment(c, table, &used);
  const pca::PcaResult r = pca::pca(matrix);
  const int n_pcs = std::min<int>(c.n_pcs, static_cast<int>(r.loadings.cols()));
  const auto extremes = pca::loading_extremes(r, n_pcs);
  const auto means = pca::cluster_scores(r, reference, n_pcs);
  const auto rule = pca::load_priority_rule(rule_path(c));
  const auto ranked = pca::rank_clusters(means, rule, extremes);

  std::vector<char> letter(static_cast<std::size_t>(reference.k()));
  for (std::size_t i = 0; i < ranked.size(); ++i) letter[static_cast<std::size_t>(ranked[i].cluster)] = static_cast<char>('A' + i);

  json out;
  out["rule"] = {{"name", rule.name}, {"rationale", rule.rationale}};
  out["rule"]["weights"] = json::object();
  for (const auto& [pc, w] : rule.weights) out["rule"]["weights"][pc_label(pc)] = w;
  out["reference_method"] = used;
  out["n_pcs"] = n_pcs;
  out["clusters"] = json::array();
  for (const auto& rc : ranked) {
    std::vector<double> m;
    for (int j = 0; j < n_pcs; ++j) m.push_back(means.means(rc.cluster, j));
    std::vector<std::string> members;
    for (std::size_t i = 0; i < reference.size(); ++i)
      if (reference.labels()[i] == rc.cluster) members.push_back(table.ids[i]);
    out["clusters"].push_back({{"letter", std::string(1, letter[static_cast<std::size_t>(rc.cluster)])},
                               {"cluster", rc.cluster + 1},
                               {"score", rc.score},
                               {"size", means.sizes[static_cast<std::size_t>(rc.cluster)]},
                               {"mean_scores", m},
                               {"members", members},
                               {"indistinguishable", rc.indistinguishable},
                               {"rationale", rc.rationale}});
  }
  io::write_file_atomic(c.output / kRankingJson, dump(out));

  std::vector<std::string> header{"id"};
  header.insert(header.end(), table.methods.begin(), table.methods.end());
  std::string csv = io::csv_line(header);
  for (std::size_t i = 0; i < table.ids.size(); ++i) {
    std::vector<std::string> row{table.ids[i]};
    for (const auto& labels : table.labels) {
      const int l = labels[i];
      row.emplace_back(l < reference.k() ? std::string(1, letter[static_cast<std::size_t>(l)]) : std::to_string(l + 1));
    }
    csv += io::csv_line(row);
  }
  io::write_file_atomic(c.output / "clusters_ranked.csv", csv);
}

// calibration --------------------------------------------------------------------------

void run_calibrate(const RunConfig& c) {
  c.validate(true, false, false);
  const ingest::Manifest manifest = ingest::load_manifest(c.manifest);
  std::vector<calibration::CalibrationScore> scores;
  json warnings = json::array();
  for (const auto& e : manifest.catchments) {
    if (!e.flows) continue;
    const auto pair = ingest::parse_flow_pair_file(*e.flows, e.id);
    scores.push_back(calibration::evaluate(pair, c.r2_mode));
    if (scores.back().negative_slope) warnings.push_back(e.id + ": simulated flow is anticorrelated with observed flow");
  }
  if (scores.empty()) throw Error(ErrorCode::kValidation, "no catchment in the manifest has a flows file");
  calibration::write_calibration_csv(c.output / kCalibrationCsv, scores);
  if (!warnings.empty()) io::write_file_atomic(c.output / "calibration_warnings.json", dump(warnings));
}

// plots ------------------------------------------------------------------------------

const std::vector<PlotInfo>& producible_plots() {
  static const std::vector<PlotInfo> kPlots = {
      {"scalogram_<id>.svg", "wavelet coefficient magnitude over time and scale", "manifest"},
      {"wavevar_<id>.svg", "wavelet variance against scale with WAVE1..3 marked", "wavevar_<id>.csv"},
      {"sc_vs_k.svg", "mean silhouette coefficient against number of clusters", "sc_vs_k.csv"},
      {"dendrogram.svg", "Ward dendrogram with the k-cluster cut", "dendrogram.json"},
      {"som_hits.svg", "SOM hits map on the hexagonal lattice", "som.json"},
      {"som_umatrix.svg", "SOM neighbour weight distances (U-matrix)", "som.json"},
      {"som_clusters.svg", "SOM neuron cluster labels", "som.json"},
      {"pca_biplot_12.svg", "PC1 vs PC2 scores and loadings", "features.csv, clusters.csv"},
      {"pca_biplot_34.svg", "PC3 vs PC4 scores and loadings", "features.csv, clusters.csv"},
      {"cluster_scores.svg", "mean PC scores per cluster", "features.csv, clusters.csv, ranking.json"},
  };
  return kPlots;
}

std::vector<std::string> run_plots(const RunConfig& c) {
  if (c.output.empty()) throw Error(ErrorCode::kConfig, "output directory is required");
  const fs::path dir = c.output / "plots";
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& svg) {
    io::write_file_atomic(dir / name, svg);
    written.push_back(name);
  };

  if (!c.manifest.empty() && fs::exists(c.manifest)) {
    const auto manifest = ingest::load_manifest(c.manifest);
    if (!manifest.catchments.empty()) {
      const ingest::CatchmentEntry* entry = &manifest.catchments.front();
      for (const auto& e : manifest.catchments)
        if (e.id == c.scalogram_catchment) entry = &e;
      const auto series = ingest::parse_level_series_file(entry->levels, entry->id, entry->pipe_diameter, manifest.series);
      wavelet::CwtOptions opts;
      opts.threads = c.threads;
      const auto spectrum = wavelet::cwt(series, scale_grid(c, series.step_hours()), c.morlet, opts);
      emit("scalogram_" + entry->id + ".svg", plot::scalogram_svg(spectrum, "wavelet coefficients, " + entry->id));
    }
  }
  if (fs::exists(c.output)) {
    std::vector<fs::path> curves;
    for (const auto& f : fs::directory_iterator(c.output)) {
      const std::string name = f.path().filename().string();
      if (name.rfind("wavevar_", 0) == 0 && f.path().extension() == ".csv") curves.push_back(f.path());
    }
    std::sort(curves.begin(), curves.end());
    for (const auto& p : curves) {
      std::ifstream in(p, std::ios::binary);
      const auto curve = wavelet::parse_variance_curve(in, p.string());
      const std::string id = p.stem().string().substr(8);
      emit("wavevar_" + id + ".svg", plot::variance_svg(curve, wavelet::top_periods(curve, 3), "wavelet variance, " + id));
    }
  }
  if (fs::exists(c.output / kScVsK)) {
    const auto t = io::read_csv_file(c.output / kScVsK);
    std::vector<std::pair<int, double>> scores;
    for (const auto& row : t.rows)
      scores.emplace_back(static_cast<int>(io::parse_number(row[0], kScVsK)), io::parse_number(row[1], kScVsK));
    int best = scores.front().first;
    double best_s = scores.front().second;
    for (const auto& [k, s] : scores)
      if (s > best_s) {
        best = k;
        best_s = s;
      }
    if (!scores.empty()) emit("sc_vs_k.svg", plot::silhouette_svg(scores, best));
  }
  if (fs::exists(c.output / kDendrogramJson)) {
    const json d = read_json(c.output / kDendrogramJson, ErrorCode::kDependency, "");
    cluster::Dendrogram dg;
    dg.leaf_ids = d.at("leaves").get<std::vector<std::string>>();
    for (const auto& m : d.at("merges"))
      dg.merges.push_back({m.at("a").get<int>(), m.at("b").get<int>(), m.at("height").get<double>(), m.at("size").get<int>()});
    emit("dendrogram.svg", plot::dendrogram_svg(dg, d.at("cut").at("height").get<double>()));
  }
  if (fs::exists(c.output / kSomJson)) {
    const json s = read_json(c.output / kSomJson, ErrorCode::kDependency, "");
    const int rows = s.at("rows").get<int>(), cols = s.at("cols").get<int>();
    const auto hits = s.at("hits").get<std::vector<int>>();
    std::vector<double> hv(hits.begin(), hits.end());
    std::vector<std::string> hl;
    for (int h : hits) hl.push_back(h ? std::to_string(h) : "");
    emit("som_hits.svg", plot::som_map_svg(rows, cols, hv, hl, "SOM hits"));
    emit("som_umatrix.svg", plot::som_map_svg(rows, cols, s.at("u_matrix").get<std::vector<double>>(), {},
                                              "SOM neighbour weight distances"));
    const auto nl = s.at("neuron_labels").get<std::vector<int>>();
    std::vector<double> lv(nl.begin(), nl.end());
    std::vector<std::string> ll;
    for (int l : nl) ll.push_back(std::to_string(l + 1));
    emit("som_clusters.svg", plot::som_map_svg(rows, cols, lv, ll, "SOM neuron clusters"));
  }
  if (fs::exists(c.output / kFeaturesCsv) && fs::exists(c.output / kClustersCsv)) {
    const auto matrix = load_scaled(c);
    const ClusterTable table = read_clusters(c.output / kClustersCsv);
    if (table.ids == matrix.row_ids() && matrix.scaling() != features::Scaling::kRaw) {
      const auto reference = reference_assignment(c, table, nullptr);
      const pca::PcaResult r = pca::pca(matrix);
      std::vector<std::string> names;
      for (int k = 0; k < reference.k(); ++k) names.push_back(std::to_string(k + 1));
      if (fs::exists(c.output / kRankingJson)) {
        const json rk = read_json(c.output / kRankingJson, ErrorCode::kDependency, "");
        for (const auto& e : rk.at("clusters")) {
          const int idx = e.at("cluster").get<int>() - 1;
          if (idx >= 0 && idx < reference.k()) names[static_cast<std::size_t>(idx)] = e.at("letter").get<std::string>();
        }
      }
      if (r.loadings.cols() >= 2) emit("pca_biplot_12.svg", plot::biplot_svg(r, 0, 1, reference.labels(), names));
      if (r.loadings.cols() >= 4) emit("pca_biplot_34.svg", plot::biplot_svg(r, 2, 3, reference.labels(), names));
      const int n_pcs = std::min<int>(c.n_pcs, static_cast<int>(r.loadings.cols()));
      emit("cluster_scores.svg", plot::score_bars_svg(pca::cluster_scores(r, reference, n_pcs), names));
    }
  }
  return written;
}

// report ---------------------------------------------------------------------------------

void write_report(const RunConfig& c) {
  json report;
  report["tool"] = "sewerml";
  report["seed"] = c.seed ? json(*c.seed) : json();
  report["config"] = {{"scales",
                       {{"min", c.scales.min ? json(*c.scales.min) : json("2 * step")},
                        {"max", c.scales.max},
                        {"count", c.scales.count},
                        {"spacing", spacing_name(c.scales.spacing)}}},
                      {"morlet", {{"bandwidth", c.morlet.bandwidth}, {"center_frequency", c.morlet.center_frequency}}},
                      {"scaling", features::to_string(c.scaling)},
                      {"k_range", {c.k_min, c.k_max}},
                      {"k", c.k ? json(*c.k) : json()},
                      {"som_epochs", c.som.epochs},
                      {"n_pcs", c.n_pcs},
                      {"r2_mode", calibration::to_string(c.r2_mode)},
                      {"wave_feature", to_string(c.wave_feature)}};
  if (fs::exists(c.output / kClusterMeta)) {
    const json meta = read_json(c.output / kClusterMeta, ErrorCode::kDependency, "");
    report["k"] = meta.at("k");
    report["k_source"] = meta.at("k_source");
    report["reference_method"] = meta.at("reference");
    report["agreement"] = meta.at("agreement");
    bool high = true;
    for (const auto& a : meta.at("agreement")) high = high && a.at("agreement").get<double>() >= 0.8;
    report["high_consistency"] = high;
  }
  if (fs::exists(c.output / "pca_explained.csv")) {
    const auto t = io::read_csv_file(c.output / "pca_explained.csv");
    std::vector<double> ex;
    for (const auto& row : t.rows) ex.push_back(io::parse_number(row[2], "pca_explained.csv"));
    report["pca_explained"] = ex;
  }
  if (fs::exists(c.output / kRankingJson)) {
    const json rk = read_json(c.output / kRankingJson, ErrorCode::kDependency, "");
    report["ranking"] = json::array();
    for (const auto& e : rk.at("clusters"))
      report["ranking"].push_back({{"letter", e.at("letter")}, {"cluster", e.at("cluster")}, {"score", e.at("score")},
                                   {"members", e.at("members")}});
  }
  if (fs::exists(c.output / kCalibrationCsv)) {
    const auto scores = calibration::parse_calibration_csv(c.output / kCalibrationCsv);
    report["calibration"] = {{"catchments", scores.size()},
                             {"accepted", std::count_if(scores.begin(), scores.end(), [](const auto& s) { return s.accepted; })}};
  }
  std::vector<std::string> files;
  for (const auto& f : fs::recursive_directory_iterator(c.output)) {
    if (!f.is_regular_file()) continue;
    const std::string rel = fs::relative(f.path(), c.output).generic_string();
    if (rel == kReportJson || rel == "error.json") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  report["artifacts"] = json::object();
  for (const auto& rel : files) report["artifacts"][rel] = sha_of_file(c.output / rel);
  io::write_file_atomic(c.output / kReportJson, dump(report));
}

void run_pipeline(const RunConfig& c) {
  c.validate(true, true, true);
  if (fs::exists(c.output / "error.json")) fs::remove(c.output / "error.json");
  run_features(c);
  run_cluster(c, Methods::kAll);
  run_pca(c);
  run_rank(c);
  const ingest::Manifest manifest = ingest::load_manifest(c.manifest);
  if (std::any_of(manifest.catchments.begin(), manifest.catchments.end(), [](const auto& e) { return e.flows.has_value(); }))
    run_calibrate(c);
  run_plots(c);
  write_report(c);
}

std::string error_record(const Error& error) {
  json j;
  j["error"] = to_string(error.code());
  j["message"] = error.what();
  j["exit_status"] = exit_status(error.code());
  return j.dump();
}

void write_error_record(const fs::path& output, const Error& error) {
  if (output.empty()) return;
  try {
    io::write_file_atomic(output / "error.json", error_record(error) + "\n");
  } catch (const std::exception&) {
    // the record is also printed to stderr by the caller
  }
}

}  // namespace sewerml::pipeline
