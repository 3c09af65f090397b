#pragma once

// Radius-constrained optimal routing.
//
// A hop a->b is usable iff cost[a][b] <= k. Among all simple paths made of
// usable hops, the optimal route minimises (dist, hops, node-id sequence)
// lexicographically: shortest total distance first, then fewest hops, then
// the smallest id sequence.

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include "homewsn/netmodel.hpp"
#include "homewsn/visits.hpp"

namespace homewsn {

struct RouteQuery {
  NodeId from;  // sending node
  NodeId to;    // receiving node
  double radius = 0.0;
};

struct Route {
  Path path;
  double dist = 0.0;
  std::size_t hops = 0;

  bool operator==(const Route&) const = default;

  /// Relay nodes, i.e. the interior of the path.
  std::vector<NodeId> relays() const {
    if (path.size() <= 2) return {};
    return {path.begin() + 1, path.end() - 1};
  }
};

inline std::ostream& operator<<(std::ostream& os, const Route& r) {
  os << '[';
  for (std::size_t i = 0; i < r.path.size(); ++i) os << (i ? "," : "") << r.path[i];
  return os << "] dist=" << r.dist << " hops=" << r.hops;
}

/// Strict weak order used by both the search and the oracle.
inline bool route_less(double d1, std::size_t h1, const Path& p1, double d2, std::size_t h2, const Path& p2) {
  if (d1 != d2) return d1 < d2;
  if (h1 != h2) return h1 < h2;
  return p1 < p2;
}

inline double path_distance(const DistanceTable& table, const Path& path) {
  if (path.empty()) throw Error(Errc::InvalidPath, "path is empty");
  std::vector<bool> seen(table.size(), false);
  for (NodeId v : path) {
    table.require(v);
    if (seen[v.index()]) throw Error(Errc::InvalidPath, "node " + std::to_string(v.value) + " repeats");
    seen[v.index()] = true;
  }
  double d = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) d += table.at(path[i - 1].index(), path[i].index());
  return d;
}

/// Visit marks and expansion counter of one search.
struct SearchState {
  std::vector<unsigned char> marks;  // 1 once a node's best label is final
  std::size_t expansions = 0;

  explicit SearchState(std::size_t n) : marks(n, 0) {}
};

namespace detail {

struct Label {
  double dist = std::numeric_limits<double>::infinity();
  Path path;
  bool reached = false;

  bool better_than(const Label& o) const {
    if (!o.reached) return reached;
    if (!reached) return false;
    return route_less(dist, path.size(), path, o.dist, o.path.size(), o.path);
  }
};

inline void check_query(const DistanceTable& table, const RouteQuery& q) {
  table.require(q.from);
  table.require(q.to);
  require_radius(q.radius);
}

}  // namespace detail

/// Label-setting search over the k-pruned hop set. Every hop adds one to the
/// hop count, so the lexicographic key strictly grows along any extension and
/// the first label settled at `to` is optimal. Returns nullopt when `to` is
/// unreachable.
inline std::optional<Route> try_find_optimal_path(const DistanceTable& table, const RouteQuery& q) {
  detail::check_query(table, q);
  const std::size_t n = table.size();
  if (q.from == q.to) return Route{{q.from}, 0.0, 0};

  SearchState state(n);
  std::vector<detail::Label> labels(n);
  labels[q.from.index()] = {0.0, {q.from}, true};

  for (;;) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (state.marks[i] || !labels[i].reached) continue;
      if (best == n || labels[i].better_than(labels[best])) best = i;
    }
    if (best == n) return std::nullopt;
    state.marks[best] = 1;
    ++state.expansions;

    const detail::Label& cur = labels[best];
    if (best == q.to.index()) {
      return Route{cur.path, cur.dist, cur.path.size() - 1};
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (j == best || state.marks[j]) continue;
      const double c = table.at(best, j);
      if (c > q.radius) continue;
      detail::Label cand{cur.dist + c, cur.path, true};
      cand.path.push_back(NodeId::from_index(j));
      if (cand.better_than(labels[j])) labels[j] = std::move(cand);
    }
  }
}

inline Route find_optimal_path(const DistanceTable& table, const RouteQuery& q) {
  if (auto r = try_find_optimal_path(table, q)) return *std::move(r);
  throw Error(Errc::NoPath, "node " + std::to_string(q.to.value) + " is unreachable from node " +
                                std::to_string(q.from.value) + " with radius " + std::to_string(q.radius));
}

inline constexpr std::size_t kBruteForceMaxNodes = 12;

/// Exhaustive enumeration of simple paths. Same contract as
/// find_optimal_path; only for small tables.
inline std::optional<Route> try_brute_force_route(const DistanceTable& table, const RouteQuery& q) {
  detail::check_query(table, q);
  const std::size_t n = table.size();
  if (n > kBruteForceMaxNodes) {
    throw Error(Errc::InstanceTooLarge, "brute force is limited to " + std::to_string(kBruteForceMaxNodes) + " nodes");
  }
  std::optional<Route> best;
  Path path{q.from};
  std::vector<bool> on_path(n, false);
  on_path[q.from.index()] = true;

  auto dfs = [&](auto&& self, double d) -> void {
    const NodeId here = path.back();
    if (here == q.to) {
      const std::size_t h = path.size() - 1;
      if (!best || route_less(d, h, path, best->dist, best->hops, best->path)) best = Route{path, d, h};
      return;
    }
    for (std::size_t j = 0; j < n; ++j) {
      const double c = table.at(here.index(), j);
      if (on_path[j] || c > q.radius) continue;
      on_path[j] = true;
      path.push_back(NodeId::from_index(j));
      self(self, d + c);
      path.pop_back();
      on_path[j] = false;
    }
  };
  dfs(dfs, 0.0);
  return best;
}

inline Route brute_force_route(const DistanceTable& table, const RouteQuery& q) {
  if (auto r = try_brute_force_route(table, q)) return *std::move(r);
  throw Error(Errc::NoPath, "no feasible path from node " + std::to_string(q.from.value) + " to node " +
                                std::to_string(q.to.value));
}

/// Routes every ordered pair (v, w), v != w, exactly once.
inline VisitStats all_pairs_profile(const DistanceTable& table, double radius, CountingMode mode) {
  require_radius(radius);
  const std::size_t n = table.size();
  if (n < 2) throw Error(Errc::InvalidInput, "profiling needs at least two nodes");
  VisitStats stats(n, mode);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t w = 0; w < n; ++w) {
      if (v == w) continue;
      auto r = try_find_optimal_path(table, {NodeId::from_index(v), NodeId::from_index(w), radius});
      if (r) {
        stats.record_delivery(r->path);
      } else {
        stats.record_unreachable();
      }
    }
  }
  return stats;
}

/// Nodes ordered by descending count, ties by ascending id.
inline std::vector<NodeId> rank_nodes(const std::vector<std::uint64_t>& counts) {
  std::vector<NodeId> ids;
  for (std::size_t i = 0; i < counts.size(); ++i) ids.push_back(NodeId::from_index(i));
  std::stable_sort(ids.begin(), ids.end(),
                   [&](NodeId a, NodeId b) { return counts[a.index()] > counts[b.index()]; });
  return ids;
}

}  // namespace homewsn
