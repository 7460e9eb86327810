#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"

#include "sewerml/calibration.hpp"
#include "sewerml/features.hpp"
#include "sewerml/fixture.hpp"
#include "sewerml/io.hpp"
#include "sewerml/pipeline.hpp"
#include "sewerml/wavelet.hpp"

namespace fs = std::filesystem;
using namespace sewerml;
using nlohmann::json;

namespace {

struct Shell {
  int status = 0;
  std::string out;
  std::string err;
};

Shell run_cli(const std::string& args) {
  const fs::path tmp = fs::temp_directory_path();
  const fs::path out = tmp / "sewerml_cli_stdout.txt";
  const fs::path err = tmp / "sewerml_cli_stderr.txt";
  const std::string cmd = std::string("\"") + SEWERML_CLI_PATH + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                          err.string() + "\"";
  const int raw = std::system(cmd.c_str());
  Shell s;
  s.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  s.out = io::read_file(out);
  s.err = io::read_file(err);
  return s;
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

// One fixture shared by every case; shorter series and a coarser scale grid
// keep the suite quick.
const fs::path& fixture_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "sewerml_test_pipeline";
    fs::remove_all(d);
    fixture::FixtureOptions o;
    o.hours = 3000;
    fixture::write_catchment_fixture(d, o);
    return d;
  }();
  return dir;
}

pipeline::RunConfig quick_config(const std::string& out) {
  auto c = pipeline::load_run_config(fixture_dir() / "run.json");
  c.scales.count = 60;
  c.output = fixture_dir() / out;
  fs::remove_all(c.output);
  return c;
}

std::string quick_flags(const std::string& out) {
  return "--config \"" + (fixture_dir() / "run.json").string() + "\" --scale-count 60 --out \"" +
         (fixture_dir() / out).string() + "\"";
}

}  // namespace

TEST_CASE("full pipeline on the synthetic catchments") {
  const auto c = quick_config("full");
  pipeline::run_pipeline(c);
  const json report = json::parse(io::read_file(c.output / "report.json"));
  CHECK(report.at("k") == 4);
  CHECK(report.at("high_consistency") == true);
  for (const auto& a : report.at("agreement")) CHECK(a.at("agreement").get<double>() >= 0.8);
  CHECK(report.at("ranking").size() == 4);
  CHECK(report.at("calibration").at("catchments") == 4);
  CHECK(report.at("artifacts").contains("clusters.csv"));
  CHECK(report.dump().find(fs::temp_directory_path().string()) == std::string::npos);

  CHECK(first_line(c.output / "clusters.csv") == "id,kmeans,hca,som");
  CHECK(first_line(c.output / "calibration.csv") == "id,nse,r2,accepted");
  CHECK(first_line(c.output / "clusters_ranked.csv").rfind("id,", 0) == 0);

  // everything non-SVG reads back through the library parsers
  const auto feats = features::read_features(c.output / "features.csv", c.output / "features.meta.json");
  CHECK(feats.rows() == 17);
  CHECK(feats.cols() == 20);
  CHECK(feats.scaling() == features::Scaling::kZScore);
  CHECK(calibration::parse_calibration_csv(c.output / "calibration.csv").size() == 4);
  std::ifstream wv(c.output / "wavevar_SC01.csv");
  CHECK(wavelet::parse_variance_curve(wv, "wavevar").scales.size() == 60);
  for (const char* f : {"clusters.csv", "sc_vs_k.csv", "pca_loadings.csv", "pca_scores.csv", "pca_explained.csv",
                        "pca_extremes.csv", "water_level_features.csv", "clusters_ranked.csv"})
    CHECK(io::read_csv_file(c.output / f).rows.size() > 0);
  for (const char* f : {"ranking.json", "som.json", "dendrogram.json", "cluster_meta.json", "features.meta.json"})
    CHECK(json::accept(io::read_file(c.output / f)));
  CHECK(io::read_csv_file(c.output / "pca_loadings.csv").rows.size() == 20);
  CHECK(fs::exists(c.output / "plots" / "dendrogram.svg"));
}

TEST_CASE("stages refuse missing or stale upstream artifacts") {
  const auto c = quick_config("stale");
  try {
    pipeline::run_pca(c);
    FAIL("pca ran without features");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDependency);
  }
  pipeline::run_features(c);
  pipeline::run_cluster(c);
  pipeline::run_pca(c);
  // rewrite features.csv and its sidecar consistently: clusters are now stale
  const auto m = features::read_features(c.output / "features.csv", c.output / "features.meta.json");
  const std::string csv = features::write_features_csv(m) + "\n";
  io::write_file_atomic(c.output / "features.csv", csv);
  io::write_file_atomic(c.output / "features.meta.json", features::write_features_meta(m, io::sha256_hex(csv)));
  try {
    pipeline::run_rank(c);
    FAIL("rank used stale clusters");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDependency);
    CHECK(std::string(e.what()).find("stale artifact") != std::string::npos);
  }
}

TEST_CASE("config files are strict") {
  const fs::path p = fixture_dir() / "bad_run.json";
  io::write_file_atomic(p, R"({"manifest":"dataset.json","seed":1,"colour":"red"})");
  CHECK_THROWS_AS(pipeline::load_run_config(p), Error);
  io::write_file_atomic(p, R"({"manifest":"dataset.json","seed":1,"wave_feature":"amplitude"})");
  CHECK_THROWS_AS(pipeline::load_run_config(p), Error);
  io::write_file_atomic(p, R"({"manifest":"dataset.json","output":"o"})");
  auto c = pipeline::load_run_config(p);
  CHECK(c.manifest == (fixture_dir() / "dataset.json").lexically_normal());
  CHECK_FALSE(c.seed.has_value());
  CHECK_THROWS_AS(c.validate(true, true, false), Error);
}

TEST_CASE("cli: missing manifest exits 2") {
  const fs::path p = fixture_dir() / "no_manifest.json";
  io::write_file_atomic(p, R"({"manifest":"nowhere.json","seed":3,"output":"nm_out"})");
  const auto r = run_cli("run --config \"" + p.string() + "\"");
  CHECK(r.status == 2);
  CHECK(r.err.find("manifest not found") != std::string::npos);
  const json record = json::parse(r.err);
  CHECK(record.at("error") == "config");
  CHECK(record.at("exit_status") == 2);
  CHECK(fs::exists(fixture_dir() / "nm_out" / "error.json"));
}

TEST_CASE("cli: plot without inputs lists the plots") {
  const auto r = run_cli("plot");
  CHECK(r.status == 0);
  CHECK(r.out.find("dendrogram.svg") != std::string::npos);
  const auto empty = run_cli("plot --out \"" + (fixture_dir() / "nothing_here").string() + "\"");
  CHECK(empty.status == 0);
  CHECK(empty.out.find("producible plots") != std::string::npos);
}

TEST_CASE("cli: stage by stage") {
  CHECK(run_cli("features " + quick_flags("cli")).status == 0);
  const auto cl = run_cli("cluster --method all " + quick_flags("cli"));
  CHECK(cl.status == 0);
  CHECK(first_line(fixture_dir() / "cli" / "clusters.csv") == "id,kmeans,hca,som");
  CHECK(run_cli("pca " + quick_flags("cli")).status == 0);
  CHECK(run_cli("rank " + quick_flags("cli")).status == 0);
  const auto cal = run_cli("calibrate " + quick_flags("cli"));
  CHECK(cal.status == 0);
  const auto table = io::read_csv_file(fixture_dir() / "cli" / "calibration.csv");
  CHECK(table.header == std::vector<std::string>{"id", "nse", "r2", "accepted"});
  CHECK(table.rows.size() == 4);
  const auto pl = run_cli("plot " + quick_flags("cli"));
  CHECK(pl.status == 0);
  CHECK(pl.out.find("pca_biplot_12.svg") != std::string::npos);
}

TEST_CASE("cli: argument and dependency errors") {
  CHECK(run_cli("cluster --method spectral " + quick_flags("cli_err")).status == 2);
  CHECK(run_cli("frobnicate").status == 2);
  const auto r = run_cli("rank " + quick_flags("cli_err"));
  CHECK(r.status == 2);
  CHECK(r.err.find("dependency") != std::string::npos);
  CHECK(run_cli("features --scaling robust " + quick_flags("cli_err")).status == 2);
}

TEST_CASE("cli: WAVE columns can hold peak variance instead of period") {
  CHECK(run_cli("features --wave-feature variance " + quick_flags("cli_var")).status == 0);
  const fs::path out = fixture_dir() / "cli_var";
  std::ifstream wv(out / "wavevar_SC02.csv");
  const auto curve = wavelet::parse_variance_curve(wv, "wavevar");
  const auto top = wavelet::top_periods(curve, 3);
  const auto t = io::read_csv_file(out / "water_level_features.csv");
  REQUIRE(t.rows.size() == 17);
  CHECK(t.rows[1][0] == "SC02");
  CHECK(io::parse_number(t.rows[1][1], "WAVE1") == top[0].variance);
}
