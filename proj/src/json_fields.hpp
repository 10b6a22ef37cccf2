#pragma once

// Checked accessors over nlohmann::json that report the field path on error.

#include <string>
#include <vector>

#include <json.hpp>

#include "mkfusion/files.hpp"

namespace mkfusion::detail {

using Json = nlohmann::json;

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(what + ": " + e.what());
  }
}

inline const Json& field(const Json& obj, const std::string& key, const std::string& path = "") {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError("missing field: " + (path.empty() ? key : path + "." + key));
  }
  return obj.at(key);
}

template <typename T>
T get_as(const Json& value, const std::string& path) {
  try {
    return value.get<T>();
  } catch (const Json::exception&) {
    throw ParseError("field " + path + ": unexpected type " + value.type_name());
  }
}

inline std::vector<double> real_array(const Json& value, const std::string& path) {
  if (!value.is_array()) throw ParseError("field " + path + ": expected array of numbers");
  std::vector<double> out;
  out.reserve(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (!value[i].is_number()) {
      throw ParseError("field " + path + "[" + std::to_string(i) + "]: expected number");
    }
    out.push_back(value[i].get<double>());
  }
  return out;
}

}  // namespace mkfusion::detail
