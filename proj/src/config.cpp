#include "msn/config.hpp"

#include <fstream>
#include <set>

namespace msn {

namespace {

using nlohmann::json;

// Reads keys from one JSON object, remembering which were consumed so that
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out, bool required = false) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) {
      if (required) throw ConfigError(path_ + "." + key + ": required field is missing");
      return;
    }
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  template <typename Enum, typename Parse>
  void get_enum(const char* key, Enum& out, Parse parse) {
    std::string s;
    bool present = j_.contains(key);
    get(key, s);
    if (!present) return;
    try {
      out = parse(s);
    } catch (const ContractError& e) {
      throw ConfigError(path_ + "." + key + ": " + e.what());
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError(path_ + "." + key + ": unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Fn>
void validated(const std::string& section, Fn&& fn) {
  try {
    fn();
  } catch (const ContractError& e) {
    throw ConfigError(section + ": " + e.what());
  }
}

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam") return OptimizerKind::kAdam;
  throw ContractError("unknown optimizer '" + s + "' (expected sgd, adam)");
}

}  // namespace

json to_json(const ModelConfig& c) {
  json layers = json::array();
  for (auto k : c.layers) layers.push_back(to_string(k));
  return {{"layers", layers},
          {"msn_layer_count", c.msn_layer_count()},
          {"d_model", c.d_model},
          {"tokens", c.tokens},
          {"ffn_hidden", c.ffn_hidden},
          {"activation", to_string(c.activation)},
          {"smoe_experts", c.smoe_experts},
          {"smoe_active", c.smoe_active},
          {"branch_scale", c.branch_scale},
          {"n", c.n},
          {"k", c.k},
          {"d_key", c.d_key},
          {"weight_mode", to_string(c.weight_mode)},
          {"gating_fn", to_string(c.gating)},
          {"over_param", c.over_param},
          {"layernorm_qk", c.layernorm_qk},
          {"layernorm_affine", c.layernorm_affine},
          {"per_token_values", c.per_token_values},
          {"value_init_scale", c.value_init_scale}};
}

json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"warmup_steps", c.warmup_steps},
          {"warmup_floor", c.warmup_floor},
          {"epochs", c.epochs},
          {"steps", c.steps},
          {"batch_size", c.batch_size},
          {"optimizer", c.optimizer.kind == OptimizerKind::kAdam ? "adam" : "sgd"},
          {"adam_beta1", c.optimizer.beta1},
          {"adam_beta2", c.optimizer.beta2},
          {"adam_epsilon", c.optimizer.epsilon},
          {"strict_mode", c.strict_mode},
          {"seed", c.seed},
          {"eval_every", c.eval_every},
          {"histogram_start_step", c.histogram_start_step}};
}

json to_json(const ExperimentConfig& c) {
  return {{"model", to_json(c.model)},
          {"data", to_json(c.data)},
          {"train", to_json(c.train)},
          {"output", {{"dir", c.output_dir}}}};
}

ModelConfig model_config_from_json(const json& j, const std::string& path) {
  Section s(j, path);
  ModelConfig c;
  std::vector<std::string> layers;
  s.get("layers", layers, true);
  c.layers.clear();
  for (const auto& name : layers) {
    try {
      c.layers.push_back(parse_block_kind(name));
    } catch (const ContractError& e) {
      throw ConfigError(path + ".layers: " + e.what());
    }
  }
  s.get("n", c.n, true);
  s.get("k", c.k, true);
  Index msn_layer_count = -1;
  s.get("msn_layer_count", msn_layer_count);
  s.get("d_model", c.d_model);
  s.get("tokens", c.tokens);
  s.get("ffn_hidden", c.ffn_hidden);
  s.get_enum("activation", c.activation, parse_activation);
  s.get("smoe_experts", c.smoe_experts);
  s.get("smoe_active", c.smoe_active);
  s.get("branch_scale", c.branch_scale);
  s.get("d_key", c.d_key);
  s.get_enum("weight_mode", c.weight_mode, parse_weight_mode);
  s.get_enum("gating_fn", c.gating, parse_gating_fn);
  s.get("over_param", c.over_param);
  s.get("layernorm_qk", c.layernorm_qk);
  s.get("layernorm_affine", c.layernorm_affine);
  s.get("per_token_values", c.per_token_values);
  s.get("value_init_scale", c.value_init_scale);
  s.finish();
  if (msn_layer_count >= 0 && msn_layer_count != c.msn_layer_count())
    throw ConfigError(path + ".msn_layer_count: " + std::to_string(msn_layer_count) + " does not match the " +
                      std::to_string(c.msn_layer_count()) + " msn layers listed in " + path + ".layers");
  validated(path, [&] { c.validate(); });
  return c;
}

DataConfig data_config_from_json(const json& j, const std::string& path) {
  Section s(j, path);
  DataConfig c;
  s.get("n_queries", c.n_queries);
  s.get("items_per_query", c.items_per_query);
  s.get("n_clusters", c.n_clusters);
  s.get("d_user", c.d_user);
  s.get("d_item", c.d_item);
  s.get("d_noise", c.d_noise);
  s.get("tau", c.tau);
  s.get("user_noise", c.user_noise);
  s.get("pref_scale", c.pref_scale);
  s.get("test_fraction", c.test_fraction);
  s.get("seed", c.seed);
  s.finish();
  validated(path, [&] { c.validate(); });
  return c;
}

TrainConfig train_config_from_json(const json& j, const std::string& path) {
  Section s(j, path);
  TrainConfig c;
  s.get("lr", c.lr);
  s.get("warmup_steps", c.warmup_steps);
  s.get("warmup_floor", c.warmup_floor);
  s.get("epochs", c.epochs);
  s.get("steps", c.steps);
  s.get("batch_size", c.batch_size);
  s.get_enum("optimizer", c.optimizer.kind, parse_optimizer);
  s.get("adam_beta1", c.optimizer.beta1);
  s.get("adam_beta2", c.optimizer.beta2);
  s.get("adam_epsilon", c.optimizer.epsilon);
  s.get("strict_mode", c.strict_mode);
  s.get("seed", c.seed);
  s.get("eval_every", c.eval_every);
  s.get("histogram_start_step", c.histogram_start_step);
  s.finish();
  validated(path, [&] { c.validate(); });
  return c;
}

ExperimentConfig parse_experiment(const json& j) {
  Section s(j, "config");
  ExperimentConfig c;
  json model;
  json data = json::object();
  json train = json::object();
  json output = json::object();
  s.get("model", model, true);
  s.get("data", data);
  s.get("train", train);
  s.get("output", output);
  s.finish();
  c.model = model_config_from_json(model, "model");
  c.data = data_config_from_json(data, "data");
  c.train = train_config_from_json(train, "train");
  Section out(output, "output");
  out.get("dir", c.output_dir);
  out.finish();
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_experiment(j);
}

}  // namespace msn
