#include "ctin/autodiff/param_store.hpp"

#include "ctin/errors.hpp"

namespace ctin::ad {

Var ParamStore::add(const std::string& name, Tensor init, bool trainable) {
  if (params_.count(name) || buffers_.count(name)) {
    throw ConfigError("duplicate parameter name '" + name + "'");
  }
  ParamEntry e;
  e.adam_m = Tensor(init.shape(), 0.0);
  e.adam_v = Tensor(init.shape(), 0.0);
  e.var = trainable ? parameter(std::move(init)) : constant(std::move(init));
  e.trainable = trainable;
  return params_.emplace(name, std::move(e)).first->second.var;
}

Var ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second.var;
}

Tensor& ParamStore::add_buffer(const std::string& name, Tensor init) {
  if (params_.count(name) || buffers_.count(name)) {
    throw ConfigError("duplicate buffer name '" + name + "'");
  }
  return buffers_.emplace(name, std::move(init)).first->second;
}

Tensor& ParamStore::buffer(const std::string& name) {
  auto it = buffers_.find(name);
  if (it == buffers_.end()) throw ConfigError("unknown buffer '" + name + "'");
  return it->second;
}

const Tensor& ParamStore::buffer(const std::string& name) const {
  auto it = buffers_.find(name);
  if (it == buffers_.end()) throw ConfigError("unknown buffer '" + name + "'");
  return it->second;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, e] : params_) {
    if (e.trainable) n += e.var.value().size();
  }
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, e] : params_) e.var.zero_grad();
}

ParamStore::Snapshot ParamStore::snapshot() const {
  Snapshot s;
  for (const auto& [name, e] : params_) s.emplace(name, e.var.value());
  for (const auto& [name, b] : buffers_) s.emplace(name, b);
  return s;
}

void ParamStore::restore(const Snapshot& snap) {
  for (const auto& [name, t] : snap) {
    if (auto it = params_.find(name); it != params_.end()) {
      it->second.var.mutable_value() = t;
    } else {
      buffer(name) = t;
    }
  }
}

nlohmann::json tensor_to_json(const Tensor& t) {
  return {{"shape", t.shape()}, {"values", std::vector<double>(t.values().begin(), t.values().end())}};
}

Tensor tensor_from_json(const nlohmann::json& j) {
  try {
    return Tensor(j.at("shape").get<Shape>(), j.at("values").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad tensor record: ") + e.what());
  }
}

nlohmann::json ParamStore::to_json() const {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, e] : params_) params[name] = tensor_to_json(e.var.value());
  nlohmann::json bufs = nlohmann::json::object();
  for (const auto& [name, b] : buffers_) bufs[name] = tensor_to_json(b);
  return {{"version", "1"}, {"parameters", params}, {"buffers", bufs}};
}

namespace {

void assign_checked(const std::string& name, Tensor& dst, Tensor src) {
  if (src.shape() != dst.shape()) {
    throw FormatError("checkpoint shape " + shape_str(src.shape()) + " for '" + name +
                      "' does not match " + shape_str(dst.shape()));
  }
  dst = std::move(src);
}

}  // namespace

void ParamStore::load_json(const nlohmann::json& doc) {
  if (!doc.is_object() || doc.value("version", "") != "1" || !doc.contains("parameters")) {
    throw FormatError("checkpoint is not a version 1 parameter document");
  }
  const auto& params = doc.at("parameters");
  for (auto& [name, e] : params_) {
    if (!params.contains(name)) throw FormatError("checkpoint is missing parameter '" + name + "'");
    assign_checked(name, e.var.mutable_value(), tensor_from_json(params.at(name)));
  }
  for (auto it = params.begin(); it != params.end(); ++it) {
    if (!params_.count(it.key())) {
      throw FormatError("checkpoint has unknown parameter '" + it.key() + "'");
    }
  }
  if (doc.contains("buffers")) {
    for (auto it = doc.at("buffers").begin(); it != doc.at("buffers").end(); ++it) {
      auto b = buffers_.find(it.key());
      if (b == buffers_.end()) {
        throw FormatError("checkpoint has unknown buffer '" + it.key() + "'");
      }
      assign_checked(it.key(), b->second, tensor_from_json(it.value()));
    }
  }
}

}  // namespace ctin::ad
