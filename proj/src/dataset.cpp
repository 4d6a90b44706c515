#include "msn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace msn {

void DataConfig::validate() const {
  require(n_clusters >= 2, "data.n_clusters must be >= 2");
  require(n_queries >= 1, "data.n_queries must be >= 1");
  require(items_per_query >= 1, "data.items_per_query must be >= 1");
  require(d_user >= 1 && d_item >= 1 && d_noise >= 0, "data: feature dims must be positive (d_noise may be 0)");
  require(tau >= 0.0, "data.tau must be >= 0");
  require(user_noise >= 0.0, "data.user_noise must be >= 0");
  require(test_fraction >= 0.0 && test_fraction < 1.0, "data.test_fraction must be in [0, 1)");
}

SyntheticDataset generate_dataset(const DataConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<Index> pick_cluster(0, cfg.n_clusters - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  MatrixXd centroids(cfg.n_clusters, cfg.d_user);
  MatrixXd prefs(cfg.n_clusters, cfg.d_item);
  for (Index c = 0; c < cfg.n_clusters; ++c) {
    for (Index j = 0; j < cfg.d_user; ++j) centroids(c, j) = normal(rng);
    for (Index j = 0; j < cfg.d_item; ++j) prefs(c, j) = normal(rng);
    prefs.row(c) *= cfg.pref_scale / std::sqrt(static_cast<double>(cfg.d_item));
  }

  SyntheticDataset data;
  data.cfg = cfg;
  data.d_in = cfg.d_in();
  data.samples.reserve(static_cast<std::size_t>(cfg.n_queries * cfg.items_per_query));
  for (Index q = 0; q < cfg.n_queries; ++q) {
    const Index c = pick_cluster(rng);
    VectorXd user(cfg.d_user);
    for (Index j = 0; j < cfg.d_user; ++j) user[j] = centroids(c, j) + cfg.user_noise * normal(rng);
    for (Index t = 0; t < cfg.items_per_query; ++t) {
      Sample s;
      s.query_id = q;
      s.x.resize(cfg.d_in());
      s.x.head(cfg.d_user) = user;
      double affinity = 0.0;
      for (Index j = 0; j < cfg.d_item; ++j) {
        const double v = normal(rng);
        s.x[cfg.d_user + j] = v;
        affinity += prefs(c, j) * v;
      }
      for (Index j = 0; j < cfg.d_noise; ++j) s.x[cfg.d_user + cfg.d_item + j] = normal(rng);
      const double u = unit(rng);
      if (cfg.tau == 0.0) {
        s.label = affinity > 0.0 ? 1 : (affinity < 0.0 ? 0 : (u < 0.5 ? 1 : 0));
      } else {
        s.label = u < sigmoid(affinity / cfg.tau) ? 1 : 0;
      }
      data.samples.push_back(std::move(s));
    }
  }
  return data;
}

DataSplit split_by_query(const SyntheticDataset& data) {
  const auto n_test = static_cast<std::int64_t>(std::floor(data.cfg.test_fraction * static_cast<double>(data.cfg.n_queries)));
  const std::int64_t first_test = data.cfg.n_queries - n_test;
  DataSplit split;
  for (const auto& s : data.samples) (s.query_id < first_test ? split.train : split.test).push_back(s);
  return split;
}

nlohmann::json to_json(const DataConfig& cfg) {
  return {{"n_queries", cfg.n_queries},   {"items_per_query", cfg.items_per_query},
          {"n_clusters", cfg.n_clusters}, {"d_user", cfg.d_user},
          {"d_item", cfg.d_item},         {"d_noise", cfg.d_noise},
          {"tau", cfg.tau},               {"user_noise", cfg.user_noise},
          {"pref_scale", cfg.pref_scale}, {"test_fraction", cfg.test_fraction},
          {"seed", cfg.seed}};
}

namespace {

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p.replace_extension(".json");
  return p;
}

}  // namespace

void export_dataset(const SyntheticDataset& data, const std::filesystem::path& csv_path) {
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write " + csv_path.string());
  csv << "query_id,label";
  for (Index j = 0; j < data.d_in; ++j) csv << ",f" << j;
  csv << '\n';
  csv.precision(17);
  for (const auto& s : data.samples) {
    csv << s.query_id << ',' << s.label;
    for (Index j = 0; j < s.x.size(); ++j) csv << ',' << s.x[j];
    csv << '\n';
  }
  nlohmann::json side = {{"seed", data.cfg.seed},
                         {"generator", to_json(data.cfg)},
                         {"d_in", data.d_in},
                         {"samples", data.samples.size()}};
  std::ofstream(sidecar_path(csv_path)) << side.dump(2) << '\n';
}

SyntheticDataset import_dataset(const std::filesystem::path& csv_path) {
  std::ifstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot read " + csv_path.string());
  SyntheticDataset data;
  std::ifstream side_in(sidecar_path(csv_path));
  if (side_in) {
    const auto side = nlohmann::json::parse(side_in);
    const auto& g = side.at("generator");
    auto& c = data.cfg;
    c.n_queries = g.at("n_queries");
    c.items_per_query = g.at("items_per_query");
    c.n_clusters = g.at("n_clusters");
    c.d_user = g.at("d_user");
    c.d_item = g.at("d_item");
    c.d_noise = g.at("d_noise");
    c.tau = g.at("tau");
    c.user_noise = g.at("user_noise");
    c.pref_scale = g.at("pref_scale");
    c.test_fraction = g.at("test_fraction");
    c.seed = g.at("seed");
  }
  std::string line;
  std::getline(csv, line);
  const auto columns = static_cast<Index>(std::count(line.begin(), line.end(), ','));
  data.d_in = columns - 1;
  require(data.d_in >= 1, "dataset csv: no feature columns");
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    Sample s;
    std::getline(row, cell, ',');
    s.query_id = std::stoll(cell);
    std::getline(row, cell, ',');
    s.label = std::stoi(cell);
    require(s.label == 0 || s.label == 1, "dataset csv: label must be 0 or 1");
    s.x.resize(data.d_in);
    for (Index j = 0; j < data.d_in; ++j) {
      require(static_cast<bool>(std::getline(row, cell, ',')), "dataset csv: short row");
      s.x[j] = std::stod(cell);
    }
    data.samples.push_back(std::move(s));
  }
  return data;
}

}  // namespace msn
