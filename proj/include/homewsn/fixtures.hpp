#pragma once

#include <vector>

#include "homewsn/netmodel.hpp"

namespace homewsn::fixtures {

/// The 10-node reference distance matrix, verbatim. Entries (5,7) and (7,5)
/// disagree (5 vs 4).
inline std::vector<std::vector<double>> table1_raw() {
  return {
      {0, 4, 2, 5, 5, 7, 6, 8, 9, 9}, {4, 0, 2, 7, 6, 5, 5, 7, 7, 8}, {2, 2, 0, 5, 4, 5, 4, 6, 7, 8},
      {5, 7, 5, 0, 3, 8, 7, 7, 9, 8}, {5, 6, 4, 3, 0, 6, 5, 2, 7, 5}, {7, 5, 5, 8, 6, 0, 3, 8, 2, 5},
      {6, 5, 4, 7, 4, 3, 0, 5, 4, 4}, {8, 7, 6, 7, 2, 8, 5, 0, 6, 4}, {9, 7, 7, 9, 7, 2, 4, 6, 0, 4},
      {9, 8, 8, 8, 5, 5, 4, 4, 4, 0},
  };
}

/// Reference matrix with the upper triangle mirrored down.
inline DistanceTable table1() { return validate_table(table1_raw(), SymmetryPolicy::SymmetrizeUpper); }

inline Topology table1_topology() { return Topology(table1(), NodeId{1}); }

}  // namespace homewsn::fixtures
