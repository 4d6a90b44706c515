#include "msn/experiment.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "msn/checkpoint.hpp"
#include "msn/dataset.hpp"

namespace msn {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

nlohmann::json metric(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

BlockStack model_from_checkpoint(const ExperimentConfig& cfg, const fs::path& path) {
  auto model = load_model(Checkpoint::read(path));
  if (model.d_in != cfg.data.d_in())
    throw ConfigError("checkpoint expects d_in=" + std::to_string(model.d_in) + " but data gives " +
                      std::to_string(cfg.data.d_in()));
  return model;
}

}  // namespace

TrainArtifacts cmd_train(const ExperimentConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const auto data = generate_dataset(cfg.data);
  const auto split = split_by_query(data);
  auto model = init_model(cfg.model, data.d_in, cfg.train.seed);
  const auto flops = count_flops(cfg.model, data.d_in).to_json();
  const bool has_msn = cfg.model.msn_layer_count() > 0;

  TrainArtifacts a;
  a.metrics = out_dir / "metrics.jsonl";
  a.checkpoint = out_dir / "checkpoint.msn";
  if (has_msn) a.histogram = out_dir / "histogram.csv";

  auto log = open_out(a.metrics);
  a.result = train(model, split.train, split.test, cfg.train, [&](const MetricsRecord& r) {
    nlohmann::json rec = {{"step", r.step},
                          {"epoch", r.epoch},
                          {"train_loss", metric(r.train_loss)},
                          {"loss", metric(r.loss)},
                          {"auc", metric(r.auc)},
                          {"qauc", metric(r.qauc)},
                          {"lr", r.lr},
                          {"flops_report", flops},
                          {"histogram_path", has_msn ? nlohmann::json("histogram.csv") : nlohmann::json(nullptr)}};
    log << rec.dump() << '\n';
  });
  log.flush();

  save_model(model).write(a.checkpoint);
  if (has_msn) activation_histogram(model, split.test).write_csv(a.histogram);
  a.final_eval = evaluate(model, split.test);
  return a;
}

EvalResult cmd_eval(const ExperimentConfig& cfg, const fs::path& checkpoint, const fs::path& out_dir) {
  const auto model = model_from_checkpoint(cfg, checkpoint);
  const auto split = split_by_query(generate_dataset(cfg.data));
  const auto e = evaluate(model, split.test);
  fs::create_directories(out_dir);
  auto out = open_out(out_dir / "eval.json");
  out << nlohmann::json{{"loss", metric(e.loss)}, {"auc", metric(e.auc)}, {"qauc", metric(e.qauc)},
                        {"samples", e.samples}}
             .dump(2)
      << '\n';
  return e;
}

fs::path cmd_export_histogram(const ExperimentConfig& cfg, const fs::path& checkpoint, const fs::path& out_dir) {
  const auto model = model_from_checkpoint(cfg, checkpoint);
  const auto split = split_by_query(generate_dataset(cfg.data));
  fs::create_directories(out_dir);
  const auto path = out_dir / "histogram.csv";
  activation_histogram(model, split.test).write_csv(path);
  return path;
}

ExperimentConfig apply_axis(const ExperimentConfig& cfg, const std::string& axis, const std::string& value) {
  ExperimentConfig c = cfg;
  auto& m = c.model;
  const auto as_index = [&]() -> Index {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != value.size()) throw ConfigError("axis " + axis + ": '" + value + "' is not an integer");
    return static_cast<Index>(v);
  };
  try {
    if (axis == "msn_layers") {
      const Index x = as_index();
      if (x < 0 || x > static_cast<Index>(m.layers.size()))
        throw ConfigError("axis msn_layers: " + value + " is outside [0, " + std::to_string(m.layers.size()) + "]");
      m.layers = with_msn_layers(m.layers, x);
    } else if (axis == "memory_n") {
      m.n = as_index();
    } else if (axis == "topk") {
      m.k = as_index();
    } else if (axis == "gating_fn") {
      m.gating = parse_gating_fn(value);
    } else if (axis == "weight_mode") {
      m.weight_mode = parse_weight_mode(value);
    } else if (axis == "per_token_values") {
      if (value != "true" && value != "false")
        throw ConfigError("axis per_token_values: expected true or false, got '" + value + "'");
      m.per_token_values = value == "true";
    } else {
      std::string known;
      for (const auto& a : ablation_axes()) known += (known.empty() ? "" : ", ") + a;
      throw ConfigError("unknown ablation axis '" + axis + "' (expected one of " + known + ")");
    }
    m.validate();
  } catch (const ContractError& e) {
    throw ConfigError("axis " + axis + "=" + value + ": " + e.what());
  }
  return c;
}

std::vector<AblationRow> cmd_ablate(const ExperimentConfig& cfg, const std::string& axis,
                                    const std::vector<std::string>& values, const fs::path& out_dir) {
  if (values.empty()) throw ConfigError("ablate: --values is empty");
  std::vector<ExperimentConfig> variants;
  for (const auto& v : values) variants.push_back(apply_axis(cfg, axis, v));

  const auto data = generate_dataset(cfg.data);
  const auto split = split_by_query(data);
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const auto& c = variants[i];
    auto model = init_model(c.model, data.d_in, c.train.seed);
    train(model, split.train, split.test, c.train);
    const auto counts = count_params(c.model, data.d_in);
    AblationRow r;
    r.variant = axis + "=" + values[i];
    r.qauc = evaluate(model, split.test).qauc;
    r.total_params = counts.total;
    r.activated_params = counts.activated;
    r.msn_param_ratio = counts.memory_ratio();
    rows.push_back(r);
  }
  for (auto& r : rows) r.delta_qauc = r.qauc - rows.front().qauc;

  fs::create_directories(out_dir);
  auto out = open_out(out_dir / ("ablation_" + axis + ".csv"));
  out << "variant,delta_qauc,total_params,activated_params,msn_param_ratio,qauc\n" << std::setprecision(10);
  for (const auto& r : rows)
    out << r.variant << ',' << r.delta_qauc << ',' << r.total_params << ',' << r.activated_params << ','
        << r.msn_param_ratio << ',' << r.qauc << '\n';
  return rows;
}

BenchReport cmd_bench(const BenchConfig& cfg, const fs::path& out_dir) {
  const auto r = run_bench(cfg);
  fs::create_directories(out_dir);
  auto out = open_out(out_dir / "bench.jsonl", std::ios::app);
  out << r.to_json().dump() << '\n';
  return r;
}

}  // namespace msn
