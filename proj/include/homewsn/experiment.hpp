#pragma once

// Visit-count experiments: a seeded traffic run next to its all-pairs
// expectation, rendered as CSV and a short text report.

#include <cstdio>
#include <string>
#include <vector>

#include "homewsn/routing.hpp"
#include "homewsn/simnet.hpp"
#include "homewsn/topology_io.hpp"

namespace homewsn {

struct ExperimentReport {
  std::uint64_t topology_hash = 0;
  sim::SimConfig config;
  VisitStats simulated;
  VisitStats analytic;            // every ordered pair once
  std::vector<double> expected;   // transmissions * analytic / pair count
  std::vector<NodeId> top3;       // by simulated count
};

inline ExperimentReport run_experiment(const Topology& topo, const sim::SimConfig& cfg) {
  ExperimentReport rep;
  rep.topology_hash = table_hash(topo.table());
  rep.config = cfg;
  rep.simulated = sim::run_traffic(topo, cfg);
  rep.analytic = all_pairs_profile(topo.table(), cfg.radius, cfg.mode);
  const double pairs = static_cast<double>(topo.size() * (topo.size() - 1));
  for (auto c : rep.analytic.counts) rep.expected.push_back(static_cast<double>(cfg.transmissions) * c / pairs);
  auto ranked = rank_nodes(rep.simulated.counts);
  ranked.resize(std::min<std::size_t>(3, ranked.size()));
  rep.top3 = ranked;
  return rep;
}

inline std::string format_fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

/// Columns: node_id, simulated_count, expected_count (4 decimals).
inline std::string visits_csv(const ExperimentReport& rep) {
  std::string out = "node_id,simulated_count,expected_count\n";
  for (std::size_t i = 0; i < rep.simulated.counts.size(); ++i) {
    out += std::to_string(i + 1) + "," + std::to_string(rep.simulated.counts[i]) + "," +
           format_fixed4(rep.expected[i]) + "\n";
  }
  return out;
}

inline std::string join_ids(const std::vector<NodeId>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? "," : "") + std::to_string(ids[i].value);
  return s;
}

inline std::string join_counts(const std::vector<std::uint64_t>& c) {
  std::string s;
  for (std::size_t i = 0; i < c.size(); ++i) s += (i ? "," : "") + std::to_string(c[i]);
  return s;
}

inline std::string format_report(const ExperimentReport& rep) {
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(rep.topology_hash));
  std::string out;
  out += "topology_hash " + std::string(hash) + "\n";
  out += "k " + format_fixed4(rep.config.radius) + "\n";
  out += "seed " + std::to_string(rep.config.seed) + "\n";
  out += "mode " + std::string(to_string(rep.config.mode)) + "\n";
  out += "transmissions " + std::to_string(rep.config.transmissions) + "\n";
  out += "delivered " + std::to_string(rep.simulated.delivered) + "\n";
  out += "unreachable " + std::to_string(rep.simulated.unreachable) + "\n";
  out += "counts " + join_counts(rep.simulated.counts) + "\n";
  out += "relay_counts " + join_counts(rep.simulated.relay_counts) + "\n";
  out += "top3 " + join_ids(rep.top3) + "\n";
  return out;
}

}  // namespace homewsn
