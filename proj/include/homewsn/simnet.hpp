#pragma once

// Deterministic emulation of the sensor mesh: node state machines, frame
// forwarding along source routes, distance-table discovery, the coordinator
// bridge and random traffic for visit statistics.
//
// Time is an integer tick. Nothing here reads a clock.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "homewsn/netmodel.hpp"
#include "homewsn/routing.hpp"
#include "homewsn/splitmix.hpp"
#include "homewsn/visits.hpp"
#include "homewsn/wire.hpp"

namespace homewsn::sim {

using Tick = std::uint64_t;

inline constexpr std::size_t kMaxFramePayload = 96;

enum class FrameKind { SensorReading, Command, DiscoveryRequest, DiscoveryReport, Alarm };

inline const char* to_string(FrameKind k) {
  switch (k) {
    case FrameKind::SensorReading: return "reading";
    case FrameKind::Command: return "command";
    case FrameKind::DiscoveryRequest: return "discovery_request";
    case FrameKind::DiscoveryReport: return "discovery_report";
    case FrameKind::Alarm: return "alarm";
  }
  return "?";
}

/// A source-routed radio frame. `hop_index` is the position in `route` of
/// the node that receives the frame next; the originator emits it as 1
/// (or 0 for a single-node route).
struct RadioFrame {
  NodeId src;
  NodeId dst;
  Path route;
  FrameKind kind = FrameKind::SensorReading;
  wire::Bytes payload;
  std::size_t hop_index = 0;

  bool operator==(const RadioFrame&) const = default;

  NodeId receiver() const { return route.at(hop_index); }
  bool at_destination() const { return hop_index + 1 == route.size(); }
};

inline RadioFrame make_frame(FrameKind kind, Path route, wire::Bytes payload) {
  if (route.empty()) throw Error(Errc::InvalidInput, "frame route is empty");
  if (payload.size() > kMaxFramePayload) {
    throw Error(Errc::PayloadTooLarge, "radio frame payload exceeds " + std::to_string(kMaxFramePayload) + " bytes");
  }
  RadioFrame f;
  f.src = route.front();
  f.dst = route.back();
  f.kind = kind;
  f.payload = std::move(payload);
  f.hop_index = route.size() > 1 ? 1 : 0;
  f.route = std::move(route);
  return f;
}

/// One line per event: tick, kind, src, dst, detail, tab separated.
class EventTrace {
 public:
  void record(Tick t, std::string_view kind, NodeId src, NodeId dst, std::string_view detail) {
    std::ostringstream os;
    os << t << '\t' << kind << '\t' << src.value << '\t' << dst.value << '\t' << detail;
    lines_.push_back(os.str());
  }

  const std::vector<std::string>& lines() const { return lines_; }

  std::string str() const {
    std::string out;
    for (const auto& l : lines_) out += l + '\n';
    return out;
  }

  bool operator==(const EventTrace&) const = default;

 private:
  std::vector<std::string> lines_;
};

inline std::string path_string(const Path& p) {
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) s += (i ? ">" : "") + std::to_string(p[i].value);
  return s;
}

// Node state machine --------------------------------------------------------

enum class NodeMode { Sampling, Sending, Hibernating };
enum class Switch { Off, On };

struct NodeState {
  NodeId id;
  NodeMode mode = NodeMode::Hibernating;
  Switch relay_switch = Switch::Off;
  Tick sample_period = 60;
  Tick next_wake = 0;
  std::uint16_t last_reading = 0;
  std::uint64_t seed = 0;
  Path uplink;  // route to the coordinator; empty when unreachable

  bool operator==(const NodeState&) const = default;
};

/// 12-bit A/D value as a pure function of (id, tick, seed).
inline std::uint16_t synthetic_reading(NodeId id, Tick now, std::uint64_t seed) {
  const std::uint64_t key = seed ^ (static_cast<std::uint64_t>(id.value) << 40) ^ now;
  return static_cast<std::uint16_t>(SplitMix64::mix(key) & 0x0FFF);
}

struct TickResult {
  NodeState state;
  std::vector<RadioFrame> frames;
};

/// Wakes the node if due: sample, send one reading toward the coordinator,
/// schedule the next wake and hibernate again.
inline TickResult node_tick(NodeState state, Tick now) {
  if (now < state.next_wake) return {std::move(state), {}};

  TickResult out;
  state.mode = NodeMode::Sampling;
  state.last_reading = synthetic_reading(state.id, now, state.seed);

  state.mode = NodeMode::Sending;
  if (!state.uplink.empty()) {
    wire::ReadingPayload r{state.relay_switch == Switch::On, false, state.last_reading, 0};
    out.frames.push_back(make_frame(FrameKind::SensorReading, state.uplink, wire::encode_reading(r)));
  }

  state.next_wake += state.sample_period;
  if (state.next_wake <= now) state.next_wake = now + state.sample_period;
  state.mode = NodeMode::Hibernating;
  out.state = std::move(state);
  return out;
}

struct ReceiveResult {
  NodeState state;
  std::vector<RadioFrame> frames;  // forwarded frame or acknowledgement
  bool consumed = false;           // true when this node was the destination
};

/// Receive interrupt. Does not touch the sleep schedule.
inline ReceiveResult node_on_receive(NodeState state, const RadioFrame& frame) {
  if (frame.hop_index >= frame.route.size() || frame.route[frame.hop_index] != state.id) {
    throw Error(Errc::MisroutedFrame, "node " + std::to_string(state.id.value) + " is not the next hop of route " +
                                          path_string(frame.route));
  }
  ReceiveResult out;
  if (!frame.at_destination()) {
    RadioFrame fwd = frame;
    ++fwd.hop_index;
    out.frames.push_back(std::move(fwd));
    out.state = std::move(state);
    return out;
  }

  out.consumed = true;
  if (frame.kind == FrameKind::Command) {
    const wire::CommandPayload cmd = wire::decode_command(frame.payload);
    if (cmd.opcode == wire::Opcode::SwitchOn) state.relay_switch = Switch::On;
    if (cmd.opcode == wire::Opcode::SwitchOff) state.relay_switch = Switch::Off;
    if (!state.uplink.empty()) {
      wire::ReadingPayload ack{state.relay_switch == Switch::On, true, state.last_reading,
                               static_cast<std::uint8_t>(cmd.opcode)};
      out.frames.push_back(make_frame(FrameKind::SensorReading, state.uplink, wire::encode_reading(ack)));
    }
  }
  out.state = std::move(state);
  return out;
}

// Discovery ------------------------------------------------------------------

struct DiscoveryResult {
  DistanceTable table;
  std::size_t message_count = 0;
};

namespace detail {

inline void put_f64(wire::Bytes& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(bits >> s));
}

inline double get_f64(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits = (bits << 8) | b[at + i];
  return std::bit_cast<double>(bits);
}

}  // namespace detail

/// Largest matrix-only network whose distance rows fit one report frame.
inline constexpr std::size_t kMaxRowReportNodes = (kMaxFramePayload - 2) / 8;

/// Builds the report a node sends in answer to the root's request: its id,
/// then its location, or its measured distance row when positions are
/// unknown. Coordinates and distances travel as big-endian IEEE-754 doubles.
inline wire::Bytes discovery_report_payload(const Topology& topo, NodeId id) {
  wire::Bytes p;
  wire::detail::put16(p, static_cast<std::uint16_t>(id.value));
  if (topo.positions()) {
    const Position& pos = (*topo.positions())[id.index()];
    detail::put_f64(p, pos.x);
    detail::put_f64(p, pos.y);
  } else {
    for (std::size_t j = 0; j < topo.size(); ++j) detail::put_f64(p, topo.table().at(id.index(), j));
  }
  return p;
}

/// The root broadcasts one request and each other node answers once.
/// Discovery traffic is flooded, independent of the routing radius.
inline DiscoveryResult run_discovery(const Topology& topo, NodeId root, EventTrace* trace = nullptr, Tick now = 0) {
  topo.table().require(root);
  const std::size_t n = topo.size();
  if (!topo.positions() && n > kMaxRowReportNodes) {
    throw Error(Errc::InvalidInput, "matrix-only discovery supports at most " + std::to_string(kMaxRowReportNodes) +
                                        " nodes per report frame");
  }
  std::size_t messages = 1;
  if (trace) trace->record(now, "discovery_request", root, NodeId{0}, "broadcast");

  std::vector<Position> positions(n);
  std::vector<std::vector<double>> rows(n, std::vector<double>(n, 0.0));
  auto absorb = [&](const wire::Bytes& p) {
    const std::size_t idx = NodeId{wire::detail::get16(p, 0)}.index();
    if (topo.positions()) {
      positions[idx] = {detail::get_f64(p, 2), detail::get_f64(p, 10)};
    } else {
      for (std::size_t j = 0; j < n; ++j) rows[idx][j] = detail::get_f64(p, 2 + 8 * j);
    }
  };

  absorb(discovery_report_payload(topo, root));  // root knows itself
  for (NodeId id : topo.nodes()) {
    if (id == root) continue;
    const RadioFrame report = make_frame(FrameKind::DiscoveryReport, {id, root}, discovery_report_payload(topo, id));
    ++messages;
    if (trace) trace->record(now, "discovery_report", id, root, std::to_string(report.payload.size()) + "B");
    absorb(report.payload);
  }

  DiscoveryResult out;
  out.table = topo.positions() ? table_from_positions(positions) : DistanceTable::from_directed(rows);
  out.message_count = messages;
  return out;
}

// Random traffic -----------------------------------------------------------

struct SimConfig {
  double radius = 5.0;
  std::uint64_t transmissions = 0;
  std::uint64_t seed = 0;
  CountingMode mode = CountingMode::TransmittersOnly;
};

struct TrafficRecord {
  NodeId from;
  NodeId to;
  std::optional<Route> route;
};

/// Routes each (from, to) pair in order and tallies visits. `log`, if
/// given, receives one record per pair.
inline VisitStats route_pairs(const DistanceTable& table, std::span<const std::pair<NodeId, NodeId>> pairs,
                              double radius, CountingMode mode, std::vector<TrafficRecord>* log = nullptr) {
  require_radius(radius);
  const std::size_t n = table.size();
  // n^2 distinct routes at most; cache them so long runs stay cheap.
  std::vector<std::optional<std::optional<Route>>> cache(n * n);
  VisitStats stats(n, mode);
  for (const auto& [v, w] : pairs) {
    table.require(v);
    table.require(w);
    auto& slot = cache[v.index() * n + w.index()];
    if (!slot) slot = try_find_optimal_path(table, {v, w, radius});
    if (*slot) {
      stats.record_delivery((*slot)->path);
    } else {
      stats.record_unreachable();
    }
    if (log) log->push_back({v, w, *slot});
  }
  return stats;
}

/// Draws `transmissions` uniform ordered pairs from SplitMix64(seed) and
/// routes each one.
inline VisitStats run_traffic(const Topology& topo, const SimConfig& cfg, std::vector<TrafficRecord>* log = nullptr) {
  require_radius(cfg.radius);
  const std::size_t n = topo.size();
  if (n < 2) throw Error(Errc::InvalidInput, "traffic needs at least two nodes");
  SplitMix64 rng(cfg.seed);
  std::vector<std::pair<NodeId, NodeId>> pairs;
  pairs.reserve(cfg.transmissions);
  for (std::uint64_t t = 0; t < cfg.transmissions; ++t) {
    const auto [v, w] = draw_ordered_pair(rng, n);
    pairs.emplace_back(NodeId::from_index(v), NodeId::from_index(w));
  }
  return route_pairs(topo.table(), pairs, cfg.radius, cfg.mode, log);
}

// Coordinator ---------------------------------------------------------------

/// NACK payload reason codes.
enum class NackReason : std::uint8_t { NoPath = 0x01, UnknownNode = 0x02, BadCommand = 0x03 };

/// Bridges radio frames and uplink datagrams.
class Coordinator {
 public:
  Coordinator(DistanceTable table, NodeId self, double radius)
      : table_(std::move(table)), self_(self), radius_(radius) {
    table_.require(self_);
    require_radius(radius_);
  }

  struct Output {
    std::vector<wire::Datagram> uplink;
    std::vector<RadioFrame> radio;
  };

  Output step(std::span<const RadioFrame> from_radio, std::span<const wire::Datagram> from_uplink) {
    Output out;
    for (const RadioFrame& f : from_radio) translate_frame(f, out);
    for (const wire::Datagram& d : from_uplink) translate_datagram(d, out);
    return out;
  }

  NodeId id() const { return self_; }
  double radius() const { return radius_; }
  void set_radius(double k) {
    require_radius(k);
    radius_ = k;
  }
  const DistanceTable& table() const { return table_; }
  std::size_t pending_commands() const {
    std::size_t s = 0;
    for (const auto& [node, q] : pending_) s += q.size();
    return s;
  }

  std::uint16_t next_seq() { return seq_++; }

 private:
  void translate_frame(const RadioFrame& f, Output& out) {
    switch (f.kind) {
      case FrameKind::SensorReading: {
        out.uplink.push_back({wire::MsgType::SensorData, next_seq(), static_cast<std::uint16_t>(f.src.value), f.payload});
        if (f.payload.size() == 4 && wire::decode_reading(f.payload).command_ack) {
          auto it = pending_.find(f.src.value);
          if (it != pending_.end() && !it->second.empty()) {
            out.uplink.push_back({wire::MsgType::Ack, it->second.front(), static_cast<std::uint16_t>(f.src.value), {}});
            it->second.pop_front();
          }
        }
        break;
      }
      case FrameKind::Alarm:
        out.uplink.push_back({wire::MsgType::AlarmCid, next_seq(), static_cast<std::uint16_t>(f.src.value), f.payload});
        break;
      case FrameKind::DiscoveryReport:
        out.uplink.push_back(
            {wire::MsgType::DiscoveryReport, next_seq(), static_cast<std::uint16_t>(f.src.value), f.payload});
        break;
      case FrameKind::Command:
      case FrameKind::DiscoveryRequest:
        break;
    }
  }

  void translate_datagram(const wire::Datagram& d, Output& out) {
    if (d.type != wire::MsgType::Command) return;
    auto nack = [&](NackReason why, std::uint16_t node) {
      out.uplink.push_back({wire::MsgType::Nack, d.seq, node, {static_cast<std::uint8_t>(why)}});
    };
    wire::CommandPayload cmd;
    try {
      cmd = wire::decode_command(d.payload);
    } catch (const Error&) {
      nack(NackReason::BadCommand, 0);
      return;
    }
    const NodeId target{cmd.target};
    if (!table_.contains(target)) {
      nack(NackReason::UnknownNode, cmd.target);
      return;
    }
    auto route = try_find_optimal_path(table_, {self_, target, radius_});
    if (!route) {
      nack(NackReason::NoPath, cmd.target);
      return;
    }
    out.radio.push_back(make_frame(FrameKind::Command, route->path, d.payload));
    pending_[target.value].push_back(d.seq);
  }

  DistanceTable table_;
  NodeId self_;
  double radius_;
  std::uint16_t seq_ = 0;
  std::map<int, std::deque<std::uint16_t>> pending_;
};

// Event loop ----------------------------------------------------------------

struct NetworkConfig {
  double radius = 5.0;
  std::uint64_t seed = 1;
  Tick sample_period = 60;
};

/// Single-threaded mesh emulation around one coordinator. Every hop takes
/// one tick.
class Network {
 public:
  Network(Topology topo, NetworkConfig cfg)
      : topo_(std::move(topo)),
        cfg_(cfg),
        discovery_(run_discovery(topo_, topo_.coordinator(), &trace_, 0)),
        coordinator_(discovery_.table, topo_.coordinator(), cfg.radius) {
    for (NodeId id : topo_.nodes()) {
      NodeState s;
      s.id = id;
      s.sample_period = cfg_.sample_period;
      s.next_wake = static_cast<Tick>(id.value) % std::max<Tick>(cfg_.sample_period, 1);
      s.seed = cfg_.seed;
      nodes_.push_back(std::move(s));
    }
    compute_uplinks();
  }

  /// Runs one tick and returns the datagrams the coordinator sends upstream.
  std::vector<wire::Datagram> step() {
    std::vector<RadioFrame> to_coordinator;
    std::vector<RadioFrame> due;
    auto split = std::stable_partition(in_flight_.begin(), in_flight_.end(),
                                       [&](const auto& e) { return e.first <= now_; });
    for (auto it = in_flight_.begin(); it != split; ++it) due.push_back(std::move(it->second));
    in_flight_.erase(in_flight_.begin(), split);

    for (RadioFrame& f : due) {
      const NodeId at = f.receiver();
      const bool for_coordinator = f.at_destination() && at == coordinator_.id() && f.kind != FrameKind::Command;
      if (for_coordinator) {
        trace_.record(now_, "deliver", f.src, at, std::string(to_string(f.kind)) + " " + path_string(f.route));
        to_coordinator.push_back(std::move(f));
        continue;
      }
      NodeState& st = nodes_[at.index()];
      ReceiveResult r = node_on_receive(st, f);
      const Switch before = st.relay_switch;
      st = std::move(r.state);
      if (r.consumed) {
        trace_.record(now_, "deliver", f.src, at, std::string(to_string(f.kind)) + " " + path_string(f.route));
      } else {
        trace_.record(now_, "forward", at, r.frames.front().receiver(), to_string(f.kind));
      }
      if (st.relay_switch != before) {
        trace_.record(now_, "switch", at, at, st.relay_switch == Switch::On ? "on" : "off");
      }
      for (RadioFrame& out : r.frames) schedule(std::move(out));
    }

    Coordinator::Output co = coordinator_.step(to_coordinator, downlink_);
    for (const wire::Datagram& d : downlink_) {
      trace_.record(now_, "downlink", coordinator_.id(), NodeId{d.src_node}, wire::to_string(d.type));
    }
    downlink_.clear();
    for (RadioFrame& f : co.radio) {
      trace_.record(now_, "route", f.src, f.dst, path_string(f.route));
      schedule(std::move(f));
    }
    for (const wire::Datagram& d : co.uplink) {
      trace_.record(now_, "uplink", NodeId{d.src_node}, coordinator_.id(),
                    std::string(wire::to_string(d.type)) + " seq=" + std::to_string(d.seq));
    }

    for (NodeState& st : nodes_) {
      TickResult r = node_tick(st, now_);
      const bool sampled = r.state.next_wake != st.next_wake;
      st = std::move(r.state);
      if (sampled) {
        ++samples_;
        trace_.record(now_, "sample", st.id, coordinator_.id(), std::to_string(st.last_reading));
      }
      for (RadioFrame& f : r.frames) {
        ++readings_sent_;
        schedule(std::move(f));
      }
    }
    ++now_;
    return std::move(co.uplink);
  }

  /// Queues a datagram from the monitoring center for the next tick.
  void submit(wire::Datagram d) { downlink_.push_back(std::move(d)); }

  /// Alarm panel wired to the coordinator reports a Contact-ID message.
  void inject_alarm(const std::string& digits) {
    const wire::Bytes payload(digits.begin(), digits.end());
    trace_.record(now_, "alarm", coordinator_.id(), coordinator_.id(), digits);
    schedule(make_frame(FrameKind::Alarm, {coordinator_.id()}, payload));
  }

  /// Sequence number for datagrams the gateway originates itself.
  std::uint16_t allocate_seq() { return coordinator_.next_seq(); }

  void set_radius(double k) {
    coordinator_.set_radius(k);
    cfg_.radius = k;
    compute_uplinks();
  }

  Tick now() const { return now_; }
  double radius() const { return cfg_.radius; }
  const Topology& topology() const { return topo_; }
  const NodeState& node(NodeId id) const { return nodes_.at(id.index()); }
  const Coordinator& coordinator() const { return coordinator_; }
  const DiscoveryResult& discovery() const { return discovery_; }
  const EventTrace& trace() const { return trace_; }
  std::size_t in_flight() const { return in_flight_.size(); }
  std::uint64_t readings_sent() const { return readings_sent_; }
  std::uint64_t samples() const { return samples_; }

 private:
  void schedule(RadioFrame f) { in_flight_.emplace_back(now_ + 1, std::move(f)); }

  void compute_uplinks() {
    for (NodeState& st : nodes_) {
      auto r = try_find_optimal_path(discovery_.table, {st.id, coordinator_.id(), cfg_.radius});
      st.uplink = r ? r->path : Path{};
    }
  }

  Topology topo_;
  NetworkConfig cfg_;
  EventTrace trace_;
  DiscoveryResult discovery_;
  Coordinator coordinator_;
  std::vector<NodeState> nodes_;
  std::vector<std::pair<Tick, RadioFrame>> in_flight_;
  std::vector<wire::Datagram> downlink_;
  Tick now_ = 0;
  std::uint64_t readings_sent_ = 0;
  std::uint64_t samples_ = 0;
};

}  // namespace homewsn::sim
