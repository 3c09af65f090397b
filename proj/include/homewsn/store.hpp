#pragma once

// Append-only record log for the monitoring center.
//
// File layout, repeated per record (integers big-endian):
//   8 bytes  received_at (ns, strictly increasing)
//   4 bytes  coordinator_id
//   4 bytes  frame length L
//   L bytes  encoded datagram (wire format, CRC included)
//
// The in-memory index is rebuilt from the file on open. A partial record at
// the tail (interrupted write) is cut off.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "homewsn/cid.hpp"
#include "homewsn/netmodel.hpp"
#include "homewsn/wire.hpp"

namespace homewsn::monitor {

enum class RecordKind : std::uint8_t { Reading, Alarm, Heartbeat };

inline const char* to_string(RecordKind k) {
  switch (k) {
    case RecordKind::Reading: return "reading";
    case RecordKind::Alarm: return "alarm";
    case RecordKind::Heartbeat: return "heartbeat";
  }
  return "?";
}

inline std::optional<RecordKind> parse_record_kind(std::string_view s) {
  if (s == "reading") return RecordKind::Reading;
  if (s == "alarm") return RecordKind::Alarm;
  if (s == "heartbeat") return RecordKind::Heartbeat;
  return std::nullopt;
}

inline std::optional<RecordKind> record_kind_for(wire::MsgType t) {
  switch (t) {
    case wire::MsgType::SensorData: return RecordKind::Reading;
    case wire::MsgType::AlarmCid: return RecordKind::Alarm;
    case wire::MsgType::Heartbeat: return RecordKind::Heartbeat;
    default: return std::nullopt;
  }
}

struct SensorRecord {
  std::uint64_t position = 0;     // index in the log; doubles as pagination cursor
  std::uint64_t received_at = 0;  // ns
  std::uint32_t coordinator_id = 0;
  NodeId src_node;
  std::uint16_t seq = 0;
  RecordKind kind = RecordKind::Reading;
  wire::Bytes payload;
  std::optional<cid::CidEvent> alarm;  // parsed Contact-ID for alarms
  bool parse_error = false;            // alarm payload failed to decode
};

struct HistoryFilter {
  std::optional<NodeId> src_node;
  std::optional<RecordKind> kind;
  std::optional<std::uint32_t> coordinator_id;
  std::optional<std::uint64_t> from;  // received_at, inclusive
  std::optional<std::uint64_t> to;    // received_at, inclusive

  bool matches(const SensorRecord& r) const {
    if (src_node && r.src_node != *src_node) return false;
    if (kind && r.kind != *kind) return false;
    if (coordinator_id && r.coordinator_id != *coordinator_id) return false;
    if (from && r.received_at < *from) return false;
    if (to && r.received_at > *to) return false;
    return true;
  }
};

struct HistoryPage {
  std::vector<SensorRecord> records;
  std::optional<std::uint64_t> next_cursor;  // pass back to continue
};

/// Not thread-safe; the owning service serializes access.
class RecordStore {
 public:
  explicit RecordStore(std::filesystem::path path) : path_(std::move(path)) {
    load();
    file_ = std::fopen(path_.c_str(), "ab");
    if (!file_) throw Error(Errc::StoreError, "cannot open store " + path_.string() + " for append");
  }

  RecordStore(const RecordStore&) = delete;
  RecordStore& operator=(const RecordStore&) = delete;

  ~RecordStore() {
    if (file_) std::fclose(file_);
  }

  /// Persists and indexes one datagram. Returns the stored record.
  const SensorRecord& append(std::uint32_t coordinator_id, const wire::Datagram& d) {
    const auto kind = record_kind_for(d.type);
    if (!kind) throw Error(Errc::InvalidInput, std::string(wire::to_string(d.type)) + " is not a storable datagram");
    const std::uint64_t at = next_timestamp();
    const wire::Bytes frame = wire::encode_datagram(d);

    wire::Bytes rec;
    for (int s = 56; s >= 0; s -= 8) rec.push_back(static_cast<std::uint8_t>(at >> s));
    for (int s = 24; s >= 0; s -= 8) rec.push_back(static_cast<std::uint8_t>(coordinator_id >> s));
    const auto len = static_cast<std::uint32_t>(frame.size());
    for (int s = 24; s >= 0; s -= 8) rec.push_back(static_cast<std::uint8_t>(len >> s));
    rec.insert(rec.end(), frame.begin(), frame.end());
    if (std::fwrite(rec.data(), 1, rec.size(), file_) != rec.size() || std::fflush(file_) != 0) {
      throw Error(Errc::StoreError, "write to " + path_.string() + " failed");
    }
    index(at, coordinator_id, d);
    return records_.back();
  }

  HistoryPage query(const HistoryFilter& f, std::size_t limit, std::uint64_t cursor = 0) const {
    if (limit == 0) throw Error(Errc::InvalidInput, "limit must be positive");
    if (f.from && f.to && *f.from > *f.to) throw Error(Errc::InvalidInput, "time range is inverted");
    if (f.src_node && f.src_node->value < 1) throw Error(Errc::InvalidInput, "node ids start at 1");
    HistoryPage page;
    for (std::uint64_t i = cursor; i < records_.size(); ++i) {
      if (!f.matches(records_[i])) continue;
      if (page.records.size() == limit) {
        page.next_cursor = i;
        break;
      }
      page.records.push_back(records_[i]);
    }
    return page;
  }

  /// Latest record per (coordinator, node), ordered by that key.
  std::vector<SensorRecord> latest() const {
    std::vector<SensorRecord> out;
    for (const auto& [key, pos] : latest_) out.push_back(records_[pos]);
    return out;
  }

  std::size_t size() const { return records_.size(); }
  const std::vector<SensorRecord>& records() const { return records_; }
  std::uint32_t max_coordinator_id() const { return max_coordinator_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::uint64_t next_timestamp() {
    const auto now = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::system_clock::now().time_since_epoch())
            .count());
    last_ts_ = std::max(now, last_ts_ + 1);
    return last_ts_;
  }

  void index(std::uint64_t at, std::uint32_t coordinator_id, const wire::Datagram& d) {
    SensorRecord r;
    r.position = records_.size();
    r.received_at = at;
    r.coordinator_id = coordinator_id;
    r.src_node = NodeId{d.src_node};
    r.seq = d.seq;
    r.kind = *record_kind_for(d.type);
    r.payload = d.payload;
    if (r.kind == RecordKind::Alarm) {
      try {
        r.alarm = cid::decode_cid(std::string(d.payload.begin(), d.payload.end()));
      } catch (const Error&) {
        r.parse_error = true;
      }
    }
    latest_[{coordinator_id, d.src_node}] = r.position;
    max_coordinator_ = std::max(max_coordinator_, coordinator_id);
    last_ts_ = std::max(last_ts_, at);
    records_.push_back(std::move(r));
  }

  void load() {
    std::FILE* in = std::fopen(path_.c_str(), "rb");
    if (!in) {
      if (std::filesystem::exists(path_)) throw Error(Errc::StoreError, "cannot read store " + path_.string());
      return;
    }
    std::vector<std::uint8_t> data;
    std::uint8_t chunk[65536];
    std::size_t got;
    while ((got = std::fread(chunk, 1, sizeof chunk, in)) > 0) data.insert(data.end(), chunk, chunk + got);
    std::fclose(in);

    std::size_t off = 0;
    auto be = [&](std::size_t at, int bytes) {
      std::uint64_t v = 0;
      for (int i = 0; i < bytes; ++i) v = (v << 8) | data[at + i];
      return v;
    };
    while (off + 16 <= data.size()) {
      const std::uint64_t at = be(off, 8);
      const auto coord = static_cast<std::uint32_t>(be(off + 8, 4));
      const std::size_t len = be(off + 12, 4);
      if (off + 16 + len > data.size()) break;
      wire::Datagram d;
      try {
        d = wire::decode_datagram(std::span<const std::uint8_t>(data).subspan(off + 16, len));
      } catch (const DecodeError& e) {
        throw Error(Errc::StoreError, "corrupt record at offset " + std::to_string(off) + ": " + e.what());
      }
      index(at, coord, d);
      off += 16 + len;
    }
    if (off != data.size()) std::filesystem::resize_file(path_, off);
  }

  std::filesystem::path path_;
  std::FILE* file_ = nullptr;
  std::vector<SensorRecord> records_;
  std::map<std::pair<std::uint32_t, std::uint16_t>, std::uint64_t> latest_;
  std::uint64_t last_ts_ = 0;
  std::uint32_t max_coordinator_ = 0;
};

}  // namespace homewsn::monitor
