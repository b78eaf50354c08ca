#pragma once

// Strict JSON field access shared by the config readers.

#include <initializer_list>
#include <string>
#include <type_traits>

#include "json.hpp"
#include "rsoftmax/error.hpp"

namespace rsoftmax {

using nlohmann::json;

namespace detail {

template <typename T>
T read_field(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
      throw ConfigError(std::string("config field '") + key + "' must be a nonnegative integer");
    }
  }
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError(std::string("config field '") + key + "' must be true or false");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(std::string("unknown field '") + key + "' in " + where);
  }
}

}  // namespace detail

}  // namespace rsoftmax
