#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "homewsn/netmodel.hpp"

namespace homewsn {

/// How a delivered path is attributed to nodes.
///  - TransmittersOnly: every node that sends the packet, i.e. all but the receiver.
///  - AllPathNodes: every node on the path, receiver included.
enum class CountingMode { TransmittersOnly, AllPathNodes };

inline std::string_view to_string(CountingMode m) {
  return m == CountingMode::TransmittersOnly ? "transmitters" : "all";
}

/// Per-node visit counts accumulated over a set of delivered routes.
struct VisitStats {
  CountingMode mode = CountingMode::TransmittersOnly;
  std::vector<std::uint64_t> counts;        // by node index, per `mode`
  std::vector<std::uint64_t> relay_counts;  // interior (relay) positions only
  std::uint64_t transmissions = 0;          // attempted, delivered or not
  std::uint64_t delivered = 0;
  std::uint64_t unreachable = 0;
  std::uint64_t path_nodes = 0;             // sum of delivered path lengths

  VisitStats() = default;
  VisitStats(std::size_t n, CountingMode m) : mode(m), counts(n, 0), relay_counts(n, 0) {}

  std::uint64_t count(NodeId v) const { return counts.at(v.index()); }
  std::uint64_t relay_count(NodeId v) const { return relay_counts.at(v.index()); }

  void record_delivery(const Path& path) {
    ++transmissions;
    ++delivered;
    path_nodes += path.size();
    const std::size_t last = path.size() - 1;
    for (std::size_t i = 0; i < path.size(); ++i) {
      if (mode == CountingMode::AllPathNodes || i < last) ++counts[path[i].index()];
      if (i > 0 && i < last) ++relay_counts[path[i].index()];
    }
  }

  void record_unreachable() {
    ++transmissions;
    ++unreachable;
  }

  std::uint64_t total() const {
    std::uint64_t s = 0;
    for (auto c : counts) s += c;
    return s;
  }

  /// Sum the counting mode must produce for the deliveries seen so far.
  std::uint64_t expected_total() const {
    return mode == CountingMode::AllPathNodes ? path_nodes : path_nodes - delivered;
  }

  bool operator==(const VisitStats&) const = default;
};

}  // namespace homewsn
