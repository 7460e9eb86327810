#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sewerml::fixture {

/// Seventeen synthetic sub-catchments drawn from four archetypes. Members of
/// one archetype share attribute centroids (5% relative noise), dominant
/// water-level periods and mean filling degree.
struct CatchmentFixture {
  std::vector<std::string> ids;
  std::vector<int> archetype;           // 0..3 per catchment
  std::vector<std::string> archetype_names;
};

struct FixtureOptions {
  std::uint64_t seed = 2020;
  std::size_t hours = 4096;      // level series length
  std::size_t flow_hours = 720;  // observed/simulated flow length
};

/// Writes dataset.json, attributes.csv, levels/, flows/, run.json and
/// priority_rule.json into `dir`.
CatchmentFixture write_catchment_fixture(const std::filesystem::path& dir, const FixtureOptions& options = {});

/// Isotropic Gaussian blobs with centres on a simplex-like layout whose
/// nearest pair is `separation` apart; labels follow blob order.
struct Blobs {
  Eigen::MatrixXd points;
  std::vector<int> labels;
};

Blobs planted_blobs(const std::vector<int>& sizes, int dims, double separation, double sigma, std::uint64_t seed);

}  // namespace sewerml::fixture
