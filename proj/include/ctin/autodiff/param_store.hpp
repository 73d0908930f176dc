#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctin/autodiff/graph.hpp"

namespace ctin::ad {

struct ParamEntry {
  Var var;
  Tensor adam_m;
  Tensor adam_v;
  bool trainable = true;
};

/// Named parameters plus non-trainable buffers (running statistics, input
/// normalization). Iteration is lexicographic by name.
class ParamStore {
 public:
  using Snapshot = std::map<std::string, Tensor>;

  /// Registers a parameter; names are unique.
  Var add(const std::string& name, Tensor init, bool trainable = true);
  Var get(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  Tensor& add_buffer(const std::string& name, Tensor init);
  Tensor& buffer(const std::string& name);
  const Tensor& buffer(const std::string& name) const;

  std::map<std::string, ParamEntry>& entries() { return params_; }
  const std::map<std::string, ParamEntry>& entries() const { return params_; }
  const std::map<std::string, Tensor>& buffers() const { return buffers_; }

  /// Number of trainable scalars.
  std::size_t parameter_count() const;
  void zero_grad();

  /// Values of every parameter and buffer.
  Snapshot snapshot() const;
  void restore(const Snapshot& snap);

  /// {"version": "1", "parameters": {name: {shape, values}}, "buffers": {...}}
  nlohmann::json to_json() const;
  /// Overwrites values from a checkpoint; names and shapes must match.
  void load_json(const nlohmann::json& doc);

 private:
  std::map<std::string, ParamEntry> params_;
  std::map<std::string, Tensor> buffers_;
};

nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j);

}  // namespace ctin::ad
