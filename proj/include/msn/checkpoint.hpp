// Portable parameter container.
//
//   offset 0   8 bytes  magic "MSNCKPT1"
//   offset 8   8 bytes  header length H, unsigned little-endian
//   offset 16  H bytes  UTF-8 JSON header
//   offset 16+H         payload: little-endian IEEE-754 float32 tensors
//
// Header: {"format": "msn-checkpoint", "version": 1, "config": {...},
//          "tensors": [{"name", "shape": [rows, cols], "offset", "nbytes"}]}
// Offsets are in bytes from the payload start; tensors are row-major and
// packed in header order without padding.
#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "msn/memory.hpp"
#include "msn/model.hpp"

namespace msn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Tensor {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  std::vector<float> data;
};

struct Checkpoint {
  static constexpr char kMagic[9] = "MSNCKPT1";
  static constexpr int kVersion = 1;

  nlohmann::json config = nlohmann::json::object();
  std::vector<Tensor> tensors;

  template <typename Derived>
  void add(const std::string& name, const Eigen::DenseBase<Derived>& m) {
    Tensor t{name, m.rows(), m.cols(), {}};
    t.data.reserve(static_cast<std::size_t>(m.rows() * m.cols()));
    for (Index i = 0; i < m.rows(); ++i)
      for (Index j = 0; j < m.cols(); ++j) t.data.push_back(static_cast<float>(m(i, j)));
    tensors.push_back(std::move(t));
  }

  const Tensor& get(const std::string& name) const;

  /// Copies tensor `name` into `out`, which must already have its shape.
  template <typename Derived>
  void fill(const std::string& name, Eigen::DenseBase<Derived>& out) const {
    const auto& t = get(name);
    if (t.rows != out.rows() || t.cols != out.cols())
      throw CheckpointError("tensor " + name + " has shape [" + std::to_string(t.rows) + ", " +
                            std::to_string(t.cols) + "], expected [" + std::to_string(out.rows()) + ", " +
                            std::to_string(out.cols()) + "]");
    for (Index i = 0; i < t.rows; ++i)
      for (Index j = 0; j < t.cols; ++j)
        out(i, j) = static_cast<typename Derived::Scalar>(t.data[static_cast<std::size_t>(i * t.cols + j)]);
  }

  std::vector<char> serialize() const;
  static Checkpoint deserialize(const std::vector<char>& bytes);
  void write(const std::filesystem::path& path) const;
  static Checkpoint read(const std::filesystem::path& path);
};

nlohmann::json to_json(const MemoryConfig& cfg);
MemoryConfig memory_config_from_json(const nlohmann::json& j);

Checkpoint save_memory_block(const MemoryBlock<double>& block, const MemoryConfig& cfg);
MemoryBlock<double> load_memory_block(const Checkpoint& ckpt, MemoryConfig* cfg_out = nullptr);

Checkpoint save_model(const BlockStack& model);
BlockStack load_model(const Checkpoint& ckpt);

}  // namespace msn
