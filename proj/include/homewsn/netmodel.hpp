#pragma once

// Network model: node identities, planar positions and the pairwise
// distance table that drives routing.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "homewsn/error.hpp"

namespace homewsn {

/// 1-based node identifier. Index 0 is never a valid node.
struct NodeId {
  int value = 0;

  constexpr auto operator<=>(const NodeId&) const = default;
  constexpr std::size_t index() const { return static_cast<std::size_t>(value - 1); }
  static constexpr NodeId from_index(std::size_t i) { return NodeId{static_cast<int>(i) + 1}; }
};

inline std::ostream& operator<<(std::ostream& os, NodeId id) { return os << id.value; }

using Path = std::vector<NodeId>;

struct Position {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Position&) const = default;
};

enum class SymmetryPolicy { Strict, SymmetrizeUpper };

/// Dense n x n cost matrix. Zero diagonal, finite non-negative entries.
/// Symmetry is a property of validated fixtures, not of the type: directed
/// tables built with `from_directed` are legal routing inputs.
class DistanceTable {
 public:
  DistanceTable() = default;

  /// Checks shape and entries, then enforces the symmetry policy.
  static DistanceTable validate(const std::vector<std::vector<double>>& raw, SymmetryPolicy policy) {
    DistanceTable t = from_directed(raw);
    const std::size_t n = t.n_;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double a = t.at(i, j);
        const double b = t.at(j, i);
        if (a == b) continue;
        if (policy == SymmetryPolicy::Strict) {
          throw AsymmetricTableError(static_cast<int>(i + 1), static_cast<int>(j + 1), a, b);
        }
        t.cost_[j * n + i] = a;
      }
    }
    return t;
  }

  /// Same entry checks as `validate` but keeps the matrix as given.
  static DistanceTable from_directed(const std::vector<std::vector<double>>& raw) {
    const std::size_t n = raw.size();
    if (n == 0) throw Error(Errc::InvalidInput, "distance table is empty");
    DistanceTable t;
    t.n_ = n;
    t.cost_.reserve(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      if (raw[i].size() != n) {
        throw Error(Errc::InvalidInput, "row " + std::to_string(i + 1) + " has " +
                                            std::to_string(raw[i].size()) + " entries, expected " +
                                            std::to_string(n));
      }
      for (std::size_t j = 0; j < n; ++j) {
        const double c = raw[i][j];
        if (!std::isfinite(c) || c < 0.0) {
          throw Error(Errc::InvalidInput, "cost[" + std::to_string(i + 1) + "][" +
                                              std::to_string(j + 1) + "] must be finite and non-negative");
        }
        if (i == j && c != 0.0) {
          throw Error(Errc::InvalidInput, "cost[" + std::to_string(i + 1) + "][" +
                                              std::to_string(i + 1) + "] must be zero");
        }
        t.cost_.push_back(c);
      }
    }
    return t;
  }

  std::size_t size() const { return n_; }

  bool contains(NodeId v) const { return v.value >= 1 && static_cast<std::size_t>(v.value) <= n_; }

  void require(NodeId v) const {
    if (!contains(v)) {
      throw Error(Errc::UnknownNode, "node " + std::to_string(v.value) + " is not in the table (n=" +
                                         std::to_string(n_) + ")");
    }
  }

  /// 0-based access.
  double at(std::size_t i, std::size_t j) const { return cost_[i * n_ + j]; }

  double cost(NodeId a, NodeId b) const {
    require(a);
    require(b);
    return at(a.index(), b.index());
  }

  bool is_symmetric() const {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j)
        if (at(i, j) != at(j, i)) return false;
    return true;
  }

  std::vector<std::vector<double>> rows() const {
    std::vector<std::vector<double>> out(n_, std::vector<double>(n_));
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) out[i][j] = at(i, j);
    return out;
  }

  bool operator==(const DistanceTable&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> cost_;
};

/// Pairwise Euclidean distances, unrounded.
inline DistanceTable table_from_positions(std::span<const Position> positions) {
  if (positions.empty()) throw Error(Errc::InvalidInput, "at least one position is required");
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (!std::isfinite(positions[i].x) || !std::isfinite(positions[i].y)) {
      throw Error(Errc::InvalidInput, "position of node " + std::to_string(i + 1) + " is not finite");
    }
  }
  const std::size_t n = positions.size();
  std::vector<std::vector<double>> raw(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::hypot(positions[i].x - positions[j].x, positions[i].y - positions[j].y);
      raw[i][j] = d;
      raw[j][i] = d;
    }
  }
  return DistanceTable::from_directed(raw);
}

inline DistanceTable validate_table(const std::vector<std::vector<double>>& raw, SymmetryPolicy policy) {
  return DistanceTable::validate(raw, policy);
}

inline void require_radius(double k) {
  if (!(k >= 0.0) || std::isinf(k)) {
    throw Error(Errc::InvalidInput, "transmission radius must be finite and non-negative");
  }
}

/// Nodes within one hop of `v` under radius `k`, ascending.
inline std::vector<NodeId> neighbors(const DistanceTable& table, NodeId v, double k) {
  table.require(v);
  require_radius(k);
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (i != v.index() && table.at(v.index(), i) <= k) out.push_back(NodeId::from_index(i));
  }
  return out;
}

/// A sensor network instance. Node ids are always 1..n.
class Topology {
 public:
  static constexpr double kPositionTolerance = 1e-9;

  explicit Topology(DistanceTable table, NodeId coordinator = NodeId{1})
      : table_(std::move(table)), coordinator_(coordinator) {
    table_.require(coordinator_);
  }

  Topology(std::vector<Position> positions, DistanceTable table, NodeId coordinator = NodeId{1})
      : table_(std::move(table)), positions_(std::move(positions)), coordinator_(coordinator) {
    table_.require(coordinator_);
    if (positions_->size() != table_.size()) {
      throw Error(Errc::InvalidInput, "position count does not match table dimension");
    }
    const DistanceTable euclid = table_from_positions(*positions_);
    for (std::size_t i = 0; i < table_.size(); ++i)
      for (std::size_t j = 0; j < table_.size(); ++j)
        if (std::abs(euclid.at(i, j) - table_.at(i, j)) > kPositionTolerance) {
          throw Error(Errc::InvalidInput, "table disagrees with positions at (" + std::to_string(i + 1) +
                                              "," + std::to_string(j + 1) + ")");
        }
  }

  static Topology from_positions(std::vector<Position> positions, NodeId coordinator = NodeId{1}) {
    DistanceTable t = table_from_positions(positions);
    return Topology(std::move(positions), std::move(t), coordinator);
  }

  std::size_t size() const { return table_.size(); }
  const DistanceTable& table() const { return table_; }
  const std::optional<std::vector<Position>>& positions() const { return positions_; }
  NodeId coordinator() const { return coordinator_; }

  std::vector<NodeId> nodes() const {
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back(NodeId::from_index(i));
    return out;
  }

 private:
  DistanceTable table_;
  std::optional<std::vector<Position>> positions_;
  NodeId coordinator_;
};

}  // namespace homewsn
