#include "sewerml/fixture.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <numbers>

#include "json.hpp"

#include "sewerml/error.hpp"
#include "sewerml/ingest.hpp"
#include "sewerml/io.hpp"
#include "sewerml/rng.hpp"

namespace sewerml::fixture {

namespace {

struct Archetype {
  const char* name;
  // SA SG SP CA CG CP STA STG STP ELE TVO | ADD INF OVL IMP SAN
  std::array<double, 11> physical;
  std::array<double, 5> composition;
  std::array<double, 3> periods;      // hours
  std::array<double, 3> amplitudes;   // relative to the mean level
  double filling;                     // mean level / diameter
  double diameter;                    // m
  double flow_noise;                  // relative simulation error
};

// Loosely follows the four cluster narratives: large separate sewer on high
// ground with a slow water level; combined-leaning with fast oscillations;
// stable and mixed; dense combined sewer, highly filled and fluctuating.
const std::array<Archetype, 4> kArchetypes = {{
    {"quiet-separate", {120, 45, 3000, 10, 20, 400, 40, 50, 200, 120, 900000}, {12, 30, 20, 15, 23}, {450, 900, 200},
     {0.30, 0.25, 0.12}, 0.15, 1.6, 0.08},
    {"flashy-mixed", {40, 25, 1500, 60, 15, 4000, 10, 30, 100, 40, 400000}, {8, 15, 12, 30, 35}, {24, 12, 168},
     {0.30, 0.20, 0.10}, 0.35, 1.0, 0.35},
    {"stable-mixed", {60, 35, 1800, 45, 25, 2500, 25, 40, 150, 90, 600000}, {10, 35, 22, 13, 20}, {300, 700, 120},
     {0.25, 0.20, 0.10}, 0.25, 1.2, 0.15},
    {"dense-combined", {15, 10, 800, 90, 8, 7000, 5, 15, 50, 15, 300000}, {5, 10, 8, 37, 40}, {12, 48, 24},
     {0.35, 0.20, 0.15}, 0.55, 0.8, 0.60},
}};

// Archetype of sub-catchments 1..17.
constexpr std::array<int, 17> kMembership = {2, 0, 3, 1, 0, 3, 2, 1, 0, 3, 2, 1, 0, 1, 3, 0, 2};

// result is the double nearest to the rounded decimal
double round_to(double v, double step) {
  const double per_unit = std::round(1.0 / step);
  return std::round(v * per_unit) / per_unit;
}

std::string catchment_id(std::size_t i) { return (i + 1 < 10 ? "SC0" : "SC") + std::to_string(i + 1); }

}  // namespace

CatchmentFixture write_catchment_fixture(const std::filesystem::path& dir, const FixtureOptions& options) {
  namespace fs = std::filesystem;
  using ingest::Attribute;
  Rng rng(options.seed);
  CatchmentFixture out;
  for (const auto& a : kArchetypes) out.archetype_names.emplace_back(a.name);

  std::vector<ingest::AttributeRecord> records;
  nlohmann::json manifest;
  manifest["attributes"] = "attributes.csv";
  manifest["step_hours"] = 1;
  manifest["max_gap"] = 6;
  manifest["catchments"] = nlohmann::json::array();
  const auto start = ingest::parse_timestamp("2014-01-01T00:00:00Z");

  for (std::size_t i = 0; i < kMembership.size(); ++i) {
    const Archetype& arch = kArchetypes[static_cast<std::size_t>(kMembership[i])];
    const std::string id = catchment_id(i);
    out.ids.push_back(id);
    out.archetype.push_back(kMembership[i]);

    ingest::AttributeRecord rec;
    rec.id = id;
    rec.name = "Sub-catchment " + std::to_string(i + 1);
    for (std::size_t c = 0; c < arch.physical.size(); ++c) {
      const double v = arch.physical[c] * (1.0 + 0.05 * rng.normal());
      rec.values[c] = std::max(0.0, round_to(v, c == ingest::index_of(Attribute::TVO) ? 1.0 : 0.01));
    }
    std::array<double, 5> comp{};
    double total = 0.0;
    for (std::size_t c = 0; c < comp.size(); ++c) {
      comp[c] = arch.composition[c] * (1.0 + 0.05 * rng.normal());
      total += comp[c];
    }
    for (std::size_t c = 0; c < comp.size(); ++c)
      rec.values[ingest::index_of(Attribute::ADD) + c] = round_to(100.0 * comp[c] / total, 0.01);
    records.push_back(rec);

    // water level: three periodic components, red-ish noise and a few short gaps
    std::vector<double> phase;
    for (int k = 0; k < 3; ++k) phase.push_back(rng.uniform(0.0, 2.0 * std::numbers::pi));
    const double mean_level = arch.filling * arch.diameter;
    std::vector<double> levels(options.hours);
    std::vector<bool> missing(options.hours, false);
    double ar = 0.0;
    for (std::size_t t = 0; t < options.hours; ++t) {
      ar = 0.7 * ar + 0.02 * rng.normal();
      double v = 1.0 + ar;
      for (int k = 0; k < 3; ++k)
        v += arch.amplitudes[static_cast<std::size_t>(k)] *
             std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / arch.periods[static_cast<std::size_t>(k)] +
                      phase[static_cast<std::size_t>(k)]);
      levels[t] = round_to(std::max(0.0, mean_level * v), 1e-4);
    }
    for (int g = 0; g < 3; ++g) {
      const auto at = static_cast<std::size_t>(rng.below(options.hours - 20)) + 10;
      const auto len = static_cast<std::size_t>(rng.below(4)) + 1;
      for (std::size_t t = at; t < at + len; ++t) missing[t] = true;
    }
    const ingest::LevelSeries series(id, start, std::chrono::hours(1), levels, missing, arch.diameter);
    const fs::path level_rel = fs::path("levels") / (id + ".csv");
    io::write_file_atomic(dir / level_rel, ingest::write_level_series(series));

    nlohmann::json entry;
    entry["id"] = id;
    entry["name"] = rec.name;
    entry["levels"] = level_rel.generic_string();
    entry["pipe_diameter"] = arch.diameter;

    // flows for the four calibrated sub-catchments
    if (id == "SC01" || id == "SC03" || id == "SC14" || id == "SC16") {
      std::string text = "timestamp,observed,simulated\n";
      double storm = 0.0;
      for (std::size_t t = 0; t < options.flow_hours; ++t) {
        if (rng.uniform() < 0.01) storm += rng.uniform(0.5, 2.0);
        storm *= 0.9;
        const double obs = 1.0 + 0.3 * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 24.0) + storm;
        const double sim = obs * (1.0 + arch.flow_noise * rng.normal()) + 0.05 * rng.normal();
        text += io::csv_line({ingest::format_timestamp(start + std::chrono::hours(t)), io::format_number(round_to(obs, 1e-4)),
                              io::format_number(round_to(sim, 1e-4))});
      }
      const fs::path flow_rel = fs::path("flows") / (id + ".csv");
      io::write_file_atomic(dir / flow_rel, text);
      entry["flows"] = flow_rel.generic_string();
    }
    manifest["catchments"].push_back(entry);
  }

  io::write_file_atomic(dir / "attributes.csv", ingest::write_attribute_table(ingest::AttributeTable(records)));
  io::write_file_atomic(dir / "dataset.json", manifest.dump(2) + "\n");

  nlohmann::json rule;
  rule["name"] = "flood-retarding suitability";
  rule["weights"] = {{"PC1", 1.0}, {"PC2", 1.0}, {"PC4", -1.0}};
  rule["rationale"] = "high PC1 (long quiet water-level periods), high PC2 (separate sewer, green space), "
                      "low PC4 (low mean filling degree) mark storage usable for retarding floods";
  io::write_file_atomic(dir / "priority_rule.json", rule.dump(2) + "\n");

  nlohmann::json run;
  run["manifest"] = "dataset.json";
  run["seed"] = 2020;
  run["scales"] = {{"min", 2.0}, {"max", 1200.0}, {"count", 200}, {"spacing", "log"}};
  run["morlet"] = {{"bandwidth", 1.5}, {"center_frequency", 1.0}};
  run["scaling"] = "zscore";
  run["k_range"] = {2, 8};
  run["som"] = {{"epochs", 200}};
  run["priority_rule"] = "priority_rule.json";
  run["output"] = "out";
  io::write_file_atomic(dir / "run.json", run.dump(2) + "\n");
  return out;
}

Blobs planted_blobs(const std::vector<int>& sizes, int dims, double separation, double sigma, std::uint64_t seed) {
  const auto k = static_cast<int>(sizes.size());
  if (k < 1 || dims < 1) throw Error(ErrorCode::kInvalidArgument, "blobs need at least one blob and one dimension");
  if (dims < k - 1 && k > 2)
    throw Error(ErrorCode::kInvalidArgument, "blob layout needs dims >= number of blobs - 1");
  // centre c sits on axis c - 1 (c > 0); the origin holds centre 0, so every
  // pair is at least `separation` apart
  Eigen::MatrixXd centres = Eigen::MatrixXd::Zero(k, dims);
  for (int c = 1; c < k; ++c) centres(c, (c - 1) % dims) = separation * (1 + (c - 1) / dims);
  Rng rng(seed);
  Blobs out;
  int n = 0;
  for (int s : sizes) n += s;
  out.points.resize(n, dims);
  int row = 0;
  for (int c = 0; c < k; ++c)
    for (int i = 0; i < sizes[static_cast<std::size_t>(c)]; ++i, ++row) {
      for (int d = 0; d < dims; ++d) out.points(row, d) = centres(c, d) + sigma * rng.normal();
      out.labels.push_back(c);
    }
  return out;
}

}  // namespace sewerml::fixture
