#include <cmath>
#include <filesystem>
#include <sstream>

#include "doctest.h"

#include "oracles.hpp"
#include "sewerml/error.hpp"
#include "sewerml/features.hpp"
#include "sewerml/io.hpp"

using namespace sewerml;
using namespace sewerml::features;
using ingest::Attribute;

namespace {

// Three catchments, water-level columns filled in unless `drop` names one.
ingest::AttributeTable small_table(const std::string& drop = "") {
  std::string csv = "id,name,SA,SG,SP,CA,CG,CP,STA,STG,STP,ELE,TVO,ADD,INF,OVL,IMP,SAN";
  for (const char* w : {"WAVE1", "WAVE2", "WAVE3", "MFD"})
    if (drop != w) csv += std::string(",") + w;
  csv += "\n";
  const char* rows[] = {"A,a,10,50,100,5,30,20,1,5,0,12,300,20,20,20,20,20", "B,b,20,40,300,6,35,10,2,6,0,15,900,10,30,20,20,20",
                        "C,c,15,45,200,7,25,15,3,7,0,18,600,30,10,20,20,20"};
  const char* waves[][4] = {{"24", "12", "168", "30"}, {"450", "900", "200", "15"}, {"300", "700", "120", "25"}};
  const char* names[] = {"WAVE1", "WAVE2", "WAVE3", "MFD"};
  for (int r = 0; r < 3; ++r) {
    csv += rows[r];
    for (int w = 0; w < 4; ++w)
      if (drop != names[w]) csv += std::string(",") + waves[r][w];
    csv += "\n";
  }
  std::istringstream in(csv);
  return ingest::parse_attribute_table(in, "mem");
}

FeatureMatrix column_matrix(const std::vector<double>& v) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < v.size(); ++i) {
    m(static_cast<Eigen::Index>(i), 0) = v[i];
    ids.push_back("r" + std::to_string(i));
  }
  return FeatureMatrix(ids, {"X"}, m);
}

std::string message_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("assembly of the full attribute set") {
  const auto m = assemble(small_table(), {});
  CHECK(m.rows() == 3);
  CHECK(m.cols() == 20);
  CHECK(m.column_names().front() == "SA");
  CHECK(m.column_names().back() == "MFD");
  CHECK(m.row_ids() == std::vector<std::string>{"A", "B", "C"});
  CHECK(m.values()(1, 16) == 450.0);
  CHECK(m.source(1, 16) == FeatureSource::kIngested);
}

TEST_CASE("a computed MFD fills the same matrix as a stored one") {
  const auto stored = assemble(small_table(), {});
  std::map<std::string, WaterLevelFeatures> computed;
  computed["A"].mfd = 30.0;
  computed["B"].mfd = 15.0;
  computed["C"].mfd = 25.0;
  const auto filled = assemble(small_table("MFD"), computed);
  CHECK(filled.values() == stored.values());
  CHECK(filled.source(0, 19) == FeatureSource::kComputed);
}

TEST_CASE("computed water-level features override stored ones") {
  std::map<std::string, WaterLevelFeatures> computed;
  computed["B"].wave1 = 451.0;
  const auto m = assemble(small_table(), computed);
  CHECK(m.values()(1, 16) == 451.0);
  CHECK(m.source(1, 16) == FeatureSource::kComputed);
  CHECK(m.source(0, 16) == FeatureSource::kIngested);
}

TEST_CASE("a missing feature names the catchment and the column") {
  const auto msg = message_of([] { assemble(small_table("WAVE2"), {}); });
  CHECK(msg.find("'A'") != std::string::npos);
  CHECK(msg.find("WAVE2") != std::string::npos);
}

TEST_CASE("a column subset keeps the requested order") {
  const auto m = assemble(small_table(), {}, {Attribute::MFD, Attribute::SA});
  CHECK(m.column_names() == std::vector<std::string>{"MFD", "SA"});
  CHECK(m.values()(2, 0) == 25.0);
}

TEST_CASE("zscore uses the sample standard deviation") {
  const auto z = scale(column_matrix({1, 2, 3}), Scaling::kZScore);
  CHECK(z.values()(0, 0) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(z.values()(1, 0) == doctest::Approx(0.0));
  CHECK(z.values()(2, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("constant columns scale to zero and are flagged") {
  const auto mm = scale(column_matrix({5, 5, 5}), Scaling::kMinMax);
  CHECK(mm.values().col(0).isZero(0.0));
  CHECK(mm.constant_columns()[0]);
  const auto z = scale(column_matrix({5, 5, 5}), Scaling::kZScore);
  CHECK(z.values().col(0).isZero(0.0));
  CHECK(z.constant_columns()[0]);
}

TEST_CASE("scaled matrices satisfy their column invariants") {
  const auto raw = assemble(small_table(), {});
  const auto z = scale(raw, Scaling::kZScore);
  const auto mm = scale(raw, Scaling::kMinMax);
  for (Eigen::Index c = 0; c < raw.cols(); ++c) {
    std::vector<double> col;
    for (Eigen::Index r = 0; r < raw.rows(); ++r) col.push_back(z.values()(r, c));
    if (z.constant_columns()[static_cast<std::size_t>(c)]) {
      CHECK(raw.values().col(c).maxCoeff() == raw.values().col(c).minCoeff());
      continue;
    }
    CHECK(std::abs(oracle::two_pass_mean(col)) < 1e-9);
    CHECK(std::abs(oracle::two_pass_sample_sd(col) - 1.0) < 1e-9);
    CHECK(mm.values().col(c).minCoeff() == 0.0);
    CHECK(mm.values().col(c).maxCoeff() == doctest::Approx(1.0).epsilon(1e-15));
    std::vector<double> raw_col;
    for (Eigen::Index r = 0; r < raw.rows(); ++r) raw_col.push_back(raw.values()(r, c));
    CHECK(z.center()[static_cast<std::size_t>(c)] == doctest::Approx(oracle::two_pass_mean(raw_col)).epsilon(1e-14));
    CHECK(z.spread()[static_cast<std::size_t>(c)] == doctest::Approx(oracle::two_pass_sample_sd(raw_col)).epsilon(1e-14));
  }
}

TEST_CASE("scaling maps back to raw units") {
  const auto raw = assemble(small_table(), {});
  for (auto method : {Scaling::kZScore, Scaling::kMinMax}) {
    const auto back = scale(raw, method).unscaled();
    for (Eigen::Index r = 0; r < raw.rows(); ++r)
      for (Eigen::Index c = 0; c < raw.cols(); ++c)
        CHECK(std::abs(back(r, c) - raw.values()(r, c)) <= 1e-12 * std::max(1.0, std::abs(raw.values()(r, c))));
  }
}

TEST_CASE("scaling is a one-way transition") {
  const auto z = scale(column_matrix({1, 2, 4}), Scaling::kZScore);
  CHECK_THROWS_AS(scale(z, Scaling::kMinMax), Error);
  CHECK_THROWS_AS(scale(column_matrix({1, 2}), Scaling::kRaw), Error);
}

TEST_CASE("non-finite entries are refused") {
  Eigen::MatrixXd m(2, 1);
  m << 1.0, std::nan("");
  CHECK_THROWS_AS(FeatureMatrix({"a", "b"}, {"X"}, m), Error);
}

TEST_CASE("scaling names") {
  CHECK(scaling_from_string("zscore") == Scaling::kZScore);
  CHECK(scaling_from_string("minmax") == Scaling::kMinMax);
  CHECK_THROWS_AS(scaling_from_string("robust"), Error);
}

TEST_CASE("features csv and sidecar round trip, stale csv refused") {
  const auto dir = std::filesystem::temp_directory_path() / "sewerml_test_features";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const auto z = scale(assemble(small_table(), {}), Scaling::kZScore);
  const std::string csv = write_features_csv(z);
  io::write_file_atomic(dir / "features.csv", csv);
  io::write_file_atomic(dir / "features.meta.json", write_features_meta(z, io::sha256_hex(csv)));
  const auto back = read_features(dir / "features.csv", dir / "features.meta.json");
  CHECK(back.values() == z.values());
  CHECK(back.scaling() == Scaling::kZScore);
  CHECK(back.center() == z.center());
  CHECK(back.spread() == z.spread());
  CHECK(back.row_ids() == z.row_ids());
  CHECK(write_features_csv(back) == csv);

  io::write_file_atomic(dir / "features.csv", csv + "\n");
  try {
    read_features(dir / "features.csv", dir / "features.meta.json");
    FAIL("stale csv accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDependency);
    CHECK(std::string(e.what()).find("stale artifact") != std::string::npos);
  }
  std::filesystem::remove(dir / "features.meta.json");
  try {
    read_features(dir / "features.csv", dir / "features.meta.json");
    FAIL("missing sidecar accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDependency);
  }
  std::filesystem::remove_all(dir);
}
