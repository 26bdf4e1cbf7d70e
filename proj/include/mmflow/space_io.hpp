#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mmflow/error.hpp"
#include "mmflow/space.hpp"

namespace mmflow {

inline constexpr int kSpaceSchemaVersion = 1;

inline nlohmann::json space_to_json(const DiscreteMMSpace& space) {
  nlohmann::json edges = nlohmann::json::array();
  for (const Edge& e : space.edges()) edges.push_back({e.i, e.j, e.length, e.conductance});
  std::vector<double> measure(space.measure().data(), space.measure().data() + space.measure().size());
  return {{"schema_version", kSpaceSchemaVersion},
          {"name", space.name()},
          {"n", space.size()},
          {"edges", std::move(edges)},
          {"measure", std::move(measure)},
          {"metadata", space.metadata()}};
}

inline DiscreteMMSpace space_from_json(const nlohmann::json& doc) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::SchemaViolation, what); };
  if (!doc.is_object()) fail("space document must be an object");
  for (const char* key : {"schema_version", "n", "edges", "measure"})
    if (!doc.contains(key)) fail(std::string("missing field '") + key + "'");
  if (!doc["schema_version"].is_number_integer() || doc["schema_version"].get<int>() != kSpaceSchemaVersion)
    fail("unsupported schema_version");
  if (!doc["n"].is_number_unsigned()) fail("'n' must be a nonnegative integer");
  const auto n = doc["n"].get<std::size_t>();
  if (!doc["edges"].is_array()) fail("'edges' must be an array");
  if (!doc["measure"].is_array() || doc["measure"].size() != n) fail("'measure' must list n numbers");

  std::vector<Edge> edges;
  edges.reserve(doc["edges"].size());
  for (const auto& row : doc["edges"]) {
    if (!row.is_array() || row.size() != 4 || !row[0].is_number_unsigned() || !row[1].is_number_unsigned() ||
        !row[2].is_number() || !row[3].is_number())
      fail("edges must be rows [i, j, length, conductance]");
    edges.push_back({row[0].get<std::size_t>(), row[1].get<std::size_t>(), row[2].get<double>(), row[3].get<double>()});
  }
  Field measure(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (!doc["measure"][i].is_number()) fail("measure entries must be numbers");
    measure[static_cast<Eigen::Index>(i)] = doc["measure"][i].get<double>();
  }
  const std::string name = doc.value("name", std::string());
  nlohmann::json meta = doc.value("metadata", nlohmann::json::object());
  if (!meta.is_object()) fail("'metadata' must be an object");
  return build_space(n, std::move(edges), std::move(measure), name, std::move(meta));
}

inline void save_space(const DiscreteMMSpace& space, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path + " for writing");
  out << space_to_json(space).dump(1) << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, "write to " + path + " failed");
}

inline DiscreteMMSpace load_space(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, path + ": " + e.what());
  }
  return space_from_json(doc);
}

/// Reads a vector of numbers either as a JSON array or as whitespace/comma
/// separated text.
inline Field load_vector(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::string text = buffer.str();
  std::vector<double> values;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    try {
      values = nlohmann::json::parse(text).get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::SchemaViolation, path + ": " + e.what());
    }
  } else {
    for (char& ch : text)
      if (ch == ',') ch = ' ';
    std::istringstream tokens(text);
    std::string token;
    while (tokens >> token) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(token, &used));
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        throw Error(ErrorCode::SchemaViolation, path + ": not a number: " + token);
      }
    }
  }
  return Eigen::Map<const Field>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace mmflow
