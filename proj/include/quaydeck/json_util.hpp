#ifndef QUAYDECK_JSON_UTIL_HPP_
#define QUAYDECK_JSON_UTIL_HPP_

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "quaydeck/error.hpp"

namespace quaydeck {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

namespace detail {

/// Reads `obj[key]` as T, reporting `path.key` on absence or type mismatch.
template <typename T>
T field(const Json& obj, const char* key, const std::string& path) {
  const std::string where = path.empty() ? std::string(key) : path + "." + key;
  if (!obj.is_object()) throw ParseError(path.empty() ? "<root>" : path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where, "missing field");
  try {
    return it->template get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where, e.what());
  }
}

inline const Json& member(const Json& obj, const char* key, const std::string& path) {
  const std::string where = path.empty() ? std::string(key) : path + "." + key;
  if (!obj.is_object()) throw ParseError(path.empty() ? "<root>" : path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where, "missing field");
  return *it;
}

inline Json parse_document(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(what, e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << contents;
  if (!out) throw Error("short write to '" + path + "'");
}

}  // namespace detail

/// Shortest decimal text that round-trips a double ("%.17g").
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace quaydeck

#endif  // QUAYDECK_JSON_UTIL_HPP_
