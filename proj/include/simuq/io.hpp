#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>

#include <nlohmann/json.hpp>

#include "simuq/errors.hpp"

namespace simuq {

/// Insertion-ordered JSON. Used everywhere so serialized artifacts keep a
/// stable, documented field order (plain nlohmann::json sorts keys).
using json = nlohmann::ordered_json;

/// Shortest round-trip decimal rendering of a double. Deterministic and
/// re-parses to the identical bits, which is what makes rerun outputs
/// byte-comparable.
inline std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("MissingFile", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& body) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw config_error("WriteFailed", "cannot write " + path);
  out << body;
}

inline json read_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error("InvalidConfig", path + ": " + e.what());
  }
}

inline void write_json(const std::string& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

}  // namespace simuq
