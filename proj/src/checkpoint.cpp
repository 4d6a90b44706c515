#include "msn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "msn/config.hpp"

namespace msn {

namespace {

void put_u64_le(std::vector<char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_u64_le(const char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

void put_f32_le(std::vector<char>& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

float get_f32_le(const char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

const Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw CheckpointError("checkpoint has no tensor named " + name);
}

std::vector<char> Checkpoint::serialize() const {
  nlohmann::json header = {{"format", "msn-checkpoint"}, {"version", kVersion}, {"config", config}};
  auto& entries = header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    const std::uint64_t nbytes = 4 * t.data.size();
    entries.push_back({{"name", t.name}, {"shape", {t.rows, t.cols}}, {"offset", offset}, {"nbytes", nbytes}});
    offset += nbytes;
  }
  const std::string text = header.dump();
  std::vector<char> out(kMagic, kMagic + 8);
  put_u64_le(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset);
  for (const auto& t : tensors)
    for (float f : t.data) put_f32_le(out, f);
  return out;
}

Checkpoint Checkpoint::deserialize(const std::vector<char>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw CheckpointError("not an msn checkpoint (bad magic)");
  const std::uint64_t header_len = get_u64_le(bytes.data() + 8);
  if (header_len > bytes.size() - 16) throw CheckpointError("truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  if (header.value("format", "") != "msn-checkpoint" || header.value("version", 0) != kVersion)
    throw CheckpointError("unsupported checkpoint format or version");
  const std::size_t payload = 16 + header_len;
  Checkpoint c;
  c.config = header.value("config", nlohmann::json::object());
  for (const auto& e : header.at("tensors")) {
    Tensor t;
    t.name = e.at("name").get<std::string>();
    t.rows = e.at("shape").at(0).get<Index>();
    t.cols = e.at("shape").at(1).get<Index>();
    const auto offset = e.at("offset").get<std::uint64_t>();
    const auto nbytes = e.at("nbytes").get<std::uint64_t>();
    if (nbytes != 4 * static_cast<std::uint64_t>(t.rows * t.cols))
      throw CheckpointError("tensor " + t.name + ": byte count does not match its shape");
    if (payload + offset + nbytes > bytes.size()) throw CheckpointError("tensor " + t.name + " runs past end of file");
    t.data.resize(static_cast<std::size_t>(t.rows * t.cols));
    const char* p = bytes.data() + payload + offset;
    for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = get_f32_le(p + 4 * i);
    c.tensors.push_back(std::move(t));
  }
  return c;
}

void Checkpoint::write(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint Checkpoint::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

nlohmann::json to_json(const MemoryConfig& c) {
  return {{"n", c.n},
          {"d_key", c.d_key},
          {"d_value", c.d_value},
          {"d_in", c.d_in},
          {"k", c.k},
          {"weight_mode", to_string(c.weight_mode)},
          {"gating_fn", to_string(c.gating)},
          {"over_param", c.over_param},
          {"layernorm_qk", c.layernorm_qk},
          {"layernorm_affine", c.layernorm_affine},
          {"layernorm_epsilon", c.layernorm_epsilon}};
}

MemoryConfig memory_config_from_json(const nlohmann::json& j) {
  MemoryConfig c;
  c.n = j.at("n");
  c.d_key = j.at("d_key");
  c.d_value = j.at("d_value");
  c.d_in = j.at("d_in");
  c.k = j.at("k");
  c.weight_mode = parse_weight_mode(j.at("weight_mode"));
  c.gating = parse_gating_fn(j.at("gating_fn"));
  c.over_param = j.at("over_param");
  c.layernorm_qk = j.at("layernorm_qk");
  c.layernorm_affine = j.at("layernorm_affine");
  c.layernorm_epsilon = j.at("layernorm_epsilon");
  c.validate();
  return c;
}

namespace {

template <typename Block>
void add_memory_tensors(Checkpoint& c, const std::string& prefix, Block& b) {
  if (b.values.size() > 0) c.add(prefix + "values", b.values);
  c.add(prefix + "key_row", b.key_row);
  c.add(prefix + "key_col", b.key_col);
  c.add(prefix + "theta_row", b.theta_row);
  c.add(prefix + "theta_col", b.theta_col);
  c.add(prefix + "query_weight", b.query_weight);
  c.add(prefix + "query_bias", b.query_bias);
  c.add(prefix + "ln_q.gamma", b.ln_q.gamma);
  c.add(prefix + "ln_q.beta", b.ln_q.beta);
  c.add(prefix + "ln_k.gamma", b.ln_k.gamma);
  c.add(prefix + "ln_k.beta", b.ln_k.beta);
}

}  // namespace

Checkpoint save_memory_block(const MemoryBlock<double>& block, const MemoryConfig& cfg) {
  block.check(cfg);
  Checkpoint c;
  c.config = {{"kind", "memory-block"}, {"memory", to_json(cfg)}};
  add_memory_tensors(c, "", block);
  return c;
}

MemoryBlock<double> load_memory_block(const Checkpoint& ckpt, MemoryConfig* cfg_out) {
  if (ckpt.config.value("kind", "") != "memory-block") throw CheckpointError("checkpoint does not hold a memory block");
  const auto cfg = memory_config_from_json(ckpt.config.at("memory"));
  std::mt19937_64 unused(0);
  auto b = init_memory_block<double>(cfg, unused);
  ckpt.fill("values", b.values);
  ckpt.fill("key_row", b.key_row);
  ckpt.fill("key_col", b.key_col);
  ckpt.fill("theta_row", b.theta_row);
  ckpt.fill("theta_col", b.theta_col);
  ckpt.fill("query_weight", b.query_weight);
  ckpt.fill("query_bias", b.query_bias);
  ckpt.fill("ln_q.gamma", b.ln_q.gamma);
  ckpt.fill("ln_q.beta", b.ln_q.beta);
  ckpt.fill("ln_k.gamma", b.ln_k.gamma);
  ckpt.fill("ln_k.beta", b.ln_k.beta);
  if (cfg_out != nullptr) *cfg_out = cfg;
  return b;
}

Checkpoint save_model(const BlockStack& model) {
  Checkpoint c;
  c.config = {{"kind", "block-stack"}, {"d_in", model.d_in}, {"model", to_json(model.cfg)}};
  auto& m = const_cast<BlockStack&>(model);  // param_slots only hands out pointers; nothing is written
  for (const auto& slot : param_slots(m))
    c.add(slot.name, Eigen::Map<const MatrixXd>(slot.data, slot.rows, slot.cols));
  return c;
}

BlockStack load_model(const Checkpoint& ckpt) {
  if (ckpt.config.value("kind", "") != "block-stack") throw CheckpointError("checkpoint does not hold a model");
  ModelConfig cfg;
  try {
    cfg = model_config_from_json(ckpt.config.at("model"), "checkpoint.model");
  } catch (const ConfigError& e) {
    throw CheckpointError(e.what());
  }
  auto model = init_model(cfg, ckpt.config.at("d_in").get<Index>(), 0);
  for (const auto& slot : param_slots(model)) {
    Eigen::Map<MatrixXd> target(slot.data, slot.rows, slot.cols);
    ckpt.fill(slot.name, target);
  }
  return model;
}

}  // namespace msn
