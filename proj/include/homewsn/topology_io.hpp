#pragma once

// JSON topology files:
//   {"positions": [[x, y], ...]}                 Euclidean table
//   {"matrix": [[...], ...], "symmetrize": true}  explicit table
// Optional "coordinator": <node id> (default 1).

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "homewsn/netmodel.hpp"

namespace homewsn {

namespace detail {

inline std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

inline double json_number(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number()) throw Error(Errc::InvalidInput, where + " is not a number");
  return v.get<double>();
}

}  // namespace detail

inline Topology parse_topology(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::InvalidInput, "topology JSON parse error at line " +
                                        std::to_string(detail::line_of(text, e.byte == 0 ? 0 : e.byte - 1)) +
                                        ": " + e.what());
  }
  if (!doc.is_object()) throw Error(Errc::InvalidInput, "topology document must be a JSON object");

  NodeId coordinator{1};
  if (doc.contains("coordinator")) {
    if (!doc["coordinator"].is_number_integer()) throw Error(Errc::InvalidInput, "coordinator must be an integer");
    coordinator = NodeId{doc["coordinator"].get<int>()};
  }

  const bool has_pos = doc.contains("positions");
  const bool has_matrix = doc.contains("matrix");
  if (has_pos == has_matrix) {
    throw Error(Errc::InvalidInput, "topology needs exactly one of \"positions\" or \"matrix\"");
  }

  if (has_pos) {
    const auto& arr = doc["positions"];
    if (!arr.is_array()) throw Error(Errc::InvalidInput, "\"positions\" must be an array");
    std::vector<Position> pos;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto& p = arr[i];
      const std::string where = "positions[" + std::to_string(i) + "]";
      if (!p.is_array() || p.size() != 2) throw Error(Errc::InvalidInput, where + " must be [x, y]");
      pos.push_back({detail::json_number(p[0], where), detail::json_number(p[1], where)});
    }
    return Topology::from_positions(std::move(pos), coordinator);
  }

  const auto& m = doc["matrix"];
  if (!m.is_array()) throw Error(Errc::InvalidInput, "\"matrix\" must be an array of rows");
  std::vector<std::vector<double>> raw;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (!m[i].is_array()) throw Error(Errc::InvalidInput, "matrix row " + std::to_string(i + 1) + " is not an array");
    std::vector<double> row;
    for (std::size_t j = 0; j < m[i].size(); ++j) {
      row.push_back(detail::json_number(m[i][j], "matrix[" + std::to_string(i) + "][" + std::to_string(j) + "]"));
    }
    raw.push_back(std::move(row));
  }
  const bool symmetrize = doc.value("symmetrize", false);
  return Topology(validate_table(raw, symmetrize ? SymmetryPolicy::SymmetrizeUpper : SymmetryPolicy::Strict),
                  coordinator);
}

inline Topology load_topology(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open topology file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_topology(ss.str());
}

/// FNV-1a over n and the IEEE-754 bit patterns of the matrix, row-major.
inline std::uint64_t table_hash(const DistanceTable& t) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
      h ^= (word >> (8 * b)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  };
  mix(t.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = 0; j < t.size(); ++j) {
      const double c = t.at(i, j);
      std::uint64_t bits;
      std::memcpy(&bits, &c, sizeof bits);
      mix(bits);
    }
  return h;
}

}  // namespace homewsn
