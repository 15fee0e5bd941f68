#pragma once
// Model file format: a single self-describing JSON document holding the layer
// list (per-neuron weights, biases, margins, support indices), activation
// tags, role annotations and class names, under an explicit schema version.
// Serialization is deterministic: identical networks produce identical bytes.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "enn/model.hpp"

namespace enn {

inline constexpr int kModelSchemaVersion = 1;
inline constexpr const char* kModelFormatName = "enn-model";

inline nlohmann::json network_to_json(const Network& net) {
  net.validate();
  nlohmann::json doc;
  doc["format"] = kModelFormatName;
  doc["schema_version"] = kModelSchemaVersion;
  doc["class_names"] = net.class_names;
  nlohmann::json roles = nlohmann::json::object();
  for (const auto& [idx, role] : net.roles) roles[std::to_string(idx)] = role_name(role);
  doc["roles"] = roles;
  nlohmann::json layers = nlohmann::json::array();
  for (const Layer& l : net.layers) {
    nlohmann::json jl;
    jl["activation"] = activation_name(l.activation);
    jl["symbolic_tolerance"] = l.symbolic_tolerance;
    nlohmann::json units = nlohmann::json::array();
    for (const Hyperplane& u : l.units) {
      nlohmann::json ju;
      ju["w"] = u.w;
      ju["b"] = u.b;
      ju["margin"] = u.margin;
      ju["support"] = u.support_indices;
      units.push_back(std::move(ju));
    }
    jl["neurons"] = std::move(units);
    layers.push_back(std::move(jl));
  }
  doc["layers"] = std::move(layers);
  return doc;
}

inline Network network_from_json(const nlohmann::json& doc) {
  if (!doc.contains("format") || doc["format"] != kModelFormatName)
    throw std::runtime_error("model file: missing or wrong \"format\" field");
  int version = doc.at("schema_version").get<int>();
  if (version != kModelSchemaVersion)
    throw std::runtime_error("model file: unsupported schema_version " +
                             std::to_string(version) + " (expected " +
                             std::to_string(kModelSchemaVersion) + ")");
  Network net;
  net.class_names = doc.at("class_names").get<std::vector<std::string>>();
  for (const auto& [key, val] : doc.at("roles").items()) {
    auto role = role_from_name(val.get<std::string>());
    if (!role) throw std::runtime_error("model file: unknown role \"" + val.get<std::string>() + "\"");
    net.roles[std::stoul(key)] = *role;
  }
  for (const auto& jl : doc.at("layers")) {
    Layer l;
    auto act = activation_from_name(jl.at("activation").get<std::string>());
    if (!act)
      throw std::runtime_error("model file: unknown activation \"" +
                               jl.at("activation").get<std::string>() + "\"");
    l.activation = *act;
    l.symbolic_tolerance = jl.at("symbolic_tolerance").get<double>();
    for (const auto& ju : jl.at("neurons")) {
      Hyperplane u;
      u.w = ju.at("w").get<std::vector<double>>();
      u.b = ju.at("b").get<double>();
      u.margin = ju.at("margin").get<double>();
      u.support_indices = ju.at("support").get<std::vector<std::size_t>>();
      l.units.push_back(std::move(u));
    }
    net.layers.push_back(std::move(l));
  }
  net.validate();
  return net;
}

// Parse errors carry the byte offset reported by the JSON parser.
inline nlohmann::json parse_document(const std::string& bytes) {
  try {
    return nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("model file: parse error: ") + e.what());
  }
}

inline std::string serialize_network(const Network& net) {
  return network_to_json(net).dump(2) + "\n";
}

inline Network deserialize_network(const std::string& bytes) {
  return network_from_json(parse_document(bytes));
}

inline void write_text_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << bytes;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace enn
