// Routes 1 -> 10 on the reference table for a few radii and prints the
// relay profile at k = 5.

#include <iostream>

#include "homewsn/fixtures.hpp"
#include "homewsn/routing.hpp"

int main() {
  using namespace homewsn;
  const DistanceTable table = fixtures::table1();

  for (double k : {1.0, 4.0, 5.0, 9.0}) {
    std::cout << "k=" << k << "  ";
    if (auto r = try_find_optimal_path(table, {NodeId{1}, NodeId{10}, k})) {
      std::cout << *r << "\n";
    } else {
      std::cout << "no path\n";
    }
  }

  const VisitStats s = all_pairs_profile(table, 5.0, CountingMode::TransmittersOnly);
  std::cout << "relay counts at k=5:";
  for (std::size_t i = 0; i < s.relay_counts.size(); ++i) std::cout << ' ' << (i + 1) << ':' << s.relay_counts[i];
  std::cout << "\n";
}
