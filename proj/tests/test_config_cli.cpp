#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "msn/config.hpp"
#include "msn/experiment.hpp"

using namespace msn;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json toy_config() {
  return json::parse(R"({
    "model": {"layers": ["msn-ffn", "ffn"], "n": 64, "k": 4, "d_model": 8, "d_key": 4, "ffn_hidden": 8},
    "data": {"n_queries": 60, "items_per_query": 5, "n_clusters": 4, "seed": 3},
    "train": {"lr": 0.01, "warmup_steps": 10, "epochs": 1, "batch_size": 8, "seed": 5},
    "output": {"dir": "unused"}
  })");
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("msn_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path write_config(const fs::path& dir, const json& j) {
  const auto p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MSN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("config round-trips through json") {
  const auto cfg = parse_experiment(toy_config());
  CHECK(cfg.model.n == 64);
  CHECK(cfg.model.layers == std::vector<BlockKind>{BlockKind::kMsnFfn, BlockKind::kFfn});
  CHECK(cfg.output_dir == "unused");
  CHECK(parse_experiment(to_json(cfg)) == cfg);
}

TEST_CASE("config errors name the offending field") {
  auto expect_error = [](json j, const std::string& field) {
    try {
      parse_experiment(j);
      FAIL("expected ConfigError for " << field);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(field) != std::string::npos);
    }
  };
  auto j = toy_config();
  j["model"].erase("n");
  expect_error(j, "model.n");
  j = toy_config();
  j["model"]["colour"] = 1;
  expect_error(j, "model.colour");
  j = toy_config();
  j["model"]["msn_layer_count"] = 2;
  expect_error(j, "msn_layer_count");
  j = toy_config();
  j["model"]["n"] = 63;
  expect_error(j, "model");
  j = toy_config();
  j["train"]["optimizer"] = "lbfgs";
  expect_error(j, "train.optimizer");
  j = toy_config();
  j["model"]["k"] = "four";
  expect_error(j, "model.k");
}

TEST_CASE("apply_axis maps values onto the config") {
  const auto cfg = parse_experiment(toy_config());
  CHECK(apply_axis(cfg, "topk", "2").model.k == 2);
  CHECK(apply_axis(cfg, "memory_n", "256").model.n == 256);
  CHECK(apply_axis(cfg, "msn_layers", "0").model.msn_layer_count() == 0);
  CHECK(apply_axis(cfg, "gating_fn", "sigmoid").model.gating == GatingFn::kSigmoid);
  CHECK(apply_axis(cfg, "per_token_values", "true").model.per_token_values);
  CHECK_THROWS_AS(apply_axis(cfg, "colour", "1"), ConfigError);
  CHECK_THROWS_AS(apply_axis(cfg, "topk", "65"), ConfigError);
  CHECK_THROWS_AS(apply_axis(cfg, "topk", "x"), ConfigError);
}

TEST_CASE("cli train writes metrics, checkpoint and histogram") {
  const auto dir = scratch("train");
  const auto config = write_config(dir, toy_config());
  REQUIRE(run_cli("train --config " + config.string() + " --out " + (dir / "a").string()) == 0);
  CHECK(fs::exists(dir / "a" / "metrics.jsonl"));
  CHECK(fs::exists(dir / "a" / "checkpoint.msn"));
  CHECK(fs::exists(dir / "a" / "histogram.csv"));

  std::ifstream log(dir / "a" / "metrics.jsonl");
  std::string line;
  int records = 0;
  while (std::getline(log, line)) {
    const auto rec = json::parse(line);
    for (const char* key : {"step", "epoch", "loss", "auc", "qauc", "lr", "flops_report", "histogram_path"})
      CHECK_MESSAGE(rec.contains(key), key);
    ++records;
  }
  CHECK(records >= 1);

  SUBCASE("strict replay is byte-identical") {
    REQUIRE(run_cli("train --strict --config " + config.string() + " --out " + (dir / "b").string()) == 0);
    for (const char* f : {"metrics.jsonl", "checkpoint.msn", "histogram.csv"})
      CHECK_MESSAGE(slurp(dir / "a" / f) == slurp(dir / "b" / f), f);
  }
  SUBCASE("eval and export-histogram read the checkpoint") {
    const auto ckpt = (dir / "a" / "checkpoint.msn").string();
    CHECK(run_cli("eval --config " + config.string() + " --checkpoint " + ckpt + " --out " + (dir / "e").string()) ==
          0);
    const auto e = json::parse(slurp(dir / "e" / "eval.json"));
    CHECK(e.contains("qauc"));
    CHECK(run_cli("export-histogram --config " + config.string() + " --checkpoint " + ckpt + " --out " +
                  (dir / "h").string()) == 0);
    CHECK(slurp(dir / "h" / "histogram.csv") == slurp(dir / "a" / "histogram.csv"));
  }
  fs::remove_all(dir);
}

TEST_CASE("cli exit codes") {
  const auto dir = scratch("codes");
  auto j = toy_config();
  j["model"].erase("n");
  const auto bad = write_config(dir, j);
  CHECK(run_cli("train --config " + bad.string()) == 2);
  CHECK(run_cli("train --config " + (dir / "missing.json").string()) == 2);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("bench --kernel topk --m 64 --k 65 --out " + dir.string()) == 2);
  CHECK(run_cli("bench --kernel topk --m 64 --k 64 --reps 5 --out " + dir.string()) == 0);
  CHECK(run_cli("bench --kernel gather --m 64 --k 8 --reps 5 --out " + dir.string()) == 0);
  std::ifstream bench(dir / "bench.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(bench, line)) {
    CHECK(json::parse(line)["oracle_ok"] == true);
    ++lines;
  }
  CHECK(lines == 2);
  const auto good = write_config(dir, toy_config());
  CHECK(run_cli("ablate --config " + good.string() + " --axis colour --values 1,2 --out " + dir.string()) == 2);
  fs::remove_all(dir);
}

TEST_CASE("cli ablate writes one row per value") {
  const auto dir = scratch("ablate");
  const auto config = write_config(dir, toy_config());

  REQUIRE(run_cli("ablate --config " + config.string() + " --axis topk --values 2,4,8 --out " + dir.string()) == 0);
  auto rows = read_csv(dir / "ablation_topk.csv");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == std::vector<std::string>{"variant", "delta_qauc", "total_params", "activated_params",
                                            "msn_param_ratio", "qauc"});
  CHECK(rows[1][1] == "0");
  for (std::size_t r = 2; r < rows.size(); ++r)
    for (std::size_t c = 2; c <= 4; ++c) CHECK(rows[r][c] == rows[1][c]);

  // the ratio column equals memory params over total params recomputed from dims
  const auto cfg = parse_experiment(toy_config());
  const Index d_in = cfg.data.d_in();
  const Index r = 8, dk = 4, d_model = 8, dv = 8;
  const std::int64_t memory = 2 * r * dk + 2 * dk * d_model + 2 * dk + 2 * dk * dk + 4 * dk + 64 * dv;
  const std::int64_t ffn = 2 * (d_model * 8 + 8 + 8 * d_model);
  const std::int64_t total = d_model * d_in + d_model + d_model + 1 + ffn + memory;
  CHECK(std::stoll(rows[1][2]) == total);
  CHECK(std::stod(rows[1][4]) == doctest::Approx(static_cast<double>(memory) / static_cast<double>(total)));

  REQUIRE(run_cli("ablate --config " + config.string() + " --axis gating_fn --values tanh,sigmoid,identity --out " +
                  dir.string()) == 0);
  CHECK(read_csv(dir / "ablation_gating_fn.csv").size() == 4);

  REQUIRE(run_cli("ablate --config " + config.string() + " --axis memory_n --values 256 --out " + dir.string()) == 0);
  rows = read_csv(dir / "ablation_memory_n.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[1][1] == "0");
  fs::remove_all(dir);
}
