// Synthetic CTR data with a latent per-user preference.
//
// Every query is one user drawn from a latent cluster c; the user's features
// are the cluster centroid plus noise. Each of the query's items is a
// standard normal vector and is clicked with probability
// sigmoid(<pref_c, item> / tau). Ranking items within a query therefore
// requires recovering the user's cluster and applying its preference.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "msn/numerics.hpp"

namespace msn {

struct DataConfig {
  Index n_queries = 2000;
  Index items_per_query = 10;
  Index n_clusters = 32;
  Index d_user = 8;
  Index d_item = 8;
  Index d_noise = 4;
  double tau = 1.0;          // 0 gives deterministic labels sign(<pref, item>)
  double user_noise = 0.3;   // std of user features around the centroid
  double pref_scale = 3.0;   // norm of each cluster preference vector
  double test_fraction = 0.2;
  std::uint64_t seed = 1;

  Index d_in() const { return d_user + d_item + d_noise; }
  void validate() const;

  bool operator==(const DataConfig&) const = default;
};

struct Sample {
  std::int64_t query_id = 0;
  VectorXd x;
  int label = 0;
};

struct SyntheticDataset {
  DataConfig cfg;
  std::vector<Sample> samples;  // grouped by query, query ids ascending
  Index d_in = 0;
};

struct DataSplit {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

SyntheticDataset generate_dataset(const DataConfig& cfg);

/// The last test_fraction of queries (by id) form the test split.
DataSplit split_by_query(const SyntheticDataset& data);

/// Columnar CSV (query_id,label,f0..f{d-1}) plus a JSON sidecar holding the
/// generator config. Features are written with round-trip precision.
void export_dataset(const SyntheticDataset& data, const std::filesystem::path& csv_path);
SyntheticDataset import_dataset(const std::filesystem::path& csv_path);

nlohmann::json to_json(const DataConfig& cfg);

}  // namespace msn
