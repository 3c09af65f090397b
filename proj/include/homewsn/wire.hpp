#pragma once

// Coordinator <-> monitoring-center datagram framing.
//
//   offset  size  field
//   0       2     magic 0xA5 0x5A
//   2       1     version 0x01
//   3       1     msg_type
//   4       2     seq            (big-endian)
//   6       2     src_node       (big-endian)
//   8       2     payload_len    (big-endian)
//   10      len   payload
//   10+len  4     CRC-32/IEEE over bytes [0, 10+len), big-endian

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/crc.hpp>

#include "homewsn/error.hpp"

namespace homewsn::wire {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::uint8_t kMagic0 = 0xA5;
inline constexpr std::uint8_t kMagic1 = 0x5A;
inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::size_t kHeaderSize = 10;
inline constexpr std::size_t kCrcSize = 4;
inline constexpr std::size_t kMinFrame = kHeaderSize + kCrcSize;
inline constexpr std::size_t kMaxPayload = 1024;

enum class MsgType : std::uint8_t {
  SensorData = 0x01,
  Command = 0x02,
  Ack = 0x03,
  AlarmCid = 0x04,
  Heartbeat = 0x05,
  DiscoveryReport = 0x06,
  Nack = 0x07,
};

inline bool is_known_type(std::uint8_t t) { return t >= 0x01 && t <= 0x07; }

inline const char* to_string(MsgType t) {
  switch (t) {
    case MsgType::SensorData: return "SENSOR_DATA";
    case MsgType::Command: return "COMMAND";
    case MsgType::Ack: return "ACK";
    case MsgType::AlarmCid: return "ALARM_CID";
    case MsgType::Heartbeat: return "HEARTBEAT";
    case MsgType::DiscoveryReport: return "DISCOVERY_REPORT";
    case MsgType::Nack: return "NACK";
  }
  return "?";
}

struct Datagram {
  MsgType type = MsgType::Heartbeat;
  std::uint16_t seq = 0;
  std::uint16_t src_node = 0;
  Bytes payload;

  bool operator==(const Datagram&) const = default;
};

inline std::uint32_t crc32(std::span<const std::uint8_t> data) {
  boost::crc_32_type crc;
  crc.process_bytes(data.data(), data.size());
  return crc.checksum();
}

namespace detail {

inline void put16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint16_t get16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

inline std::uint32_t get32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

}  // namespace detail

inline Bytes encode_datagram(const Datagram& d) {
  if (d.payload.size() > kMaxPayload) {
    throw Error(Errc::PayloadTooLarge, "payload of " + std::to_string(d.payload.size()) + " bytes exceeds " +
                                           std::to_string(kMaxPayload));
  }
  Bytes out;
  out.reserve(kMinFrame + d.payload.size());
  out.push_back(kMagic0);
  out.push_back(kMagic1);
  out.push_back(kVersion);
  out.push_back(static_cast<std::uint8_t>(d.type));
  detail::put16(out, d.seq);
  detail::put16(out, d.src_node);
  detail::put16(out, static_cast<std::uint16_t>(d.payload.size()));
  out.insert(out.end(), d.payload.begin(), d.payload.end());
  const std::uint32_t crc = crc32(out);
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(crc >> shift));
  return out;
}

/// Validates the header of a frame at the front of `b` and returns the full
/// frame size, or nullopt if more bytes are needed to decide. Header errors
/// are raised as soon as the offending byte is available.
inline std::optional<std::size_t> frame_size(std::span<const std::uint8_t> b) {
  if (b.size() > 0 && b[0] != kMagic0) throw DecodeError(Errc::BadMagic, 0, "bad magic byte");
  if (b.size() > 1 && b[1] != kMagic1) throw DecodeError(Errc::BadMagic, 1, "bad magic byte");
  if (b.size() > 2 && b[2] != kVersion) {
    throw DecodeError(Errc::UnsupportedVersion, 2, "version " + std::to_string(b[2]));
  }
  if (b.size() > 3 && !is_known_type(b[3])) {
    throw DecodeError(Errc::UnknownType, 3, "message type " + std::to_string(b[3]));
  }
  if (b.size() < kHeaderSize) return std::nullopt;
  const std::size_t len = detail::get16(b, 8);
  if (len > kMaxPayload) {
    throw DecodeError(Errc::LengthMismatch, 8, "declared payload length " + std::to_string(len) + " exceeds maximum");
  }
  return kMinFrame + len;
}

/// Decodes exactly one frame occupying all of `bytes`.
inline Datagram decode_datagram(std::span<const std::uint8_t> bytes) {
  const auto size = frame_size(bytes);
  if (bytes.size() < kMinFrame) {
    throw DecodeError(Errc::Truncated, bytes.size(),
                      "frame of " + std::to_string(bytes.size()) + " bytes is below the 14-byte minimum");
  }
  if (bytes.size() < *size) {
    throw DecodeError(Errc::Truncated, bytes.size(),
                      "declared length implies " + std::to_string(*size) + " bytes, got " + std::to_string(bytes.size()));
  }
  if (bytes.size() > *size) {
    throw DecodeError(Errc::LengthMismatch, 8,
                      "declared length implies " + std::to_string(*size) + " bytes, got " + std::to_string(bytes.size()));
  }
  const std::size_t body = bytes.size() - kCrcSize;
  const std::uint32_t want = detail::get32(bytes, body);
  if (crc32(bytes.first(body)) != want) throw DecodeError(Errc::BadCrc, body, "CRC mismatch");

  Datagram d;
  d.type = static_cast<MsgType>(bytes[3]);
  d.seq = detail::get16(bytes, 4);
  d.src_node = detail::get16(bytes, 6);
  d.payload.assign(bytes.begin() + kHeaderSize, bytes.begin() + static_cast<std::ptrdiff_t>(body));
  return d;
}

/// Incremental decoder for a byte stream carrying back-to-back frames.
/// Any error is sticky: the stream has lost framing and must be dropped.
class StreamDecoder {
 public:
  void feed(std::span<const std::uint8_t> data) { buf_.insert(buf_.end(), data.begin(), data.end()); }

  /// Next complete frame, or nullopt when more input is needed.
  std::optional<Datagram> next() {
    const auto size = frame_size(buf_);
    if (!size || buf_.size() < *size) return std::nullopt;
    Datagram d;
    try {
      d = decode_datagram(std::span<const std::uint8_t>(buf_).first(*size));
    } catch (const DecodeError& e) {
      throw DecodeError(e.code(), consumed_ + e.offset(), "stream frame rejected");
    }
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(*size));
    consumed_ += *size;
    return d;
  }

  std::size_t buffered() const { return buf_.size(); }

 private:
  Bytes buf_;
  std::size_t consumed_ = 0;
};

// Payload conventions -------------------------------------------------------

enum class Opcode : std::uint8_t { SwitchOn = 0x01, SwitchOff = 0x02, QuerySwitch = 0x03 };

struct CommandPayload {
  std::uint8_t target = 0;  // low 8 bits of the node id
  Opcode opcode = Opcode::QuerySwitch;

  bool operator==(const CommandPayload&) const = default;
};

inline Bytes encode_command(const CommandPayload& c) {
  return {c.target, static_cast<std::uint8_t>(c.opcode)};
}

inline CommandPayload decode_command(std::span<const std::uint8_t> p) {
  if (p.size() != 2) throw DecodeError(Errc::LengthMismatch, 0, "COMMAND payload must be 2 bytes");
  if (p[1] < 0x01 || p[1] > 0x03) throw DecodeError(Errc::InvalidInput, 1, "unknown opcode");
  return {p[0], static_cast<Opcode>(p[1])};
}

/// SENSOR_DATA payload: flags (bit0 relay on, bit1 command acknowledgement),
/// 16-bit big-endian reading, and the acknowledged opcode (0 if none).
struct ReadingPayload {
  bool relay_on = false;
  bool command_ack = false;
  std::uint16_t reading = 0;
  std::uint8_t acked_opcode = 0;

  bool operator==(const ReadingPayload&) const = default;
};

inline Bytes encode_reading(const ReadingPayload& r) {
  const std::uint8_t flags = static_cast<std::uint8_t>((r.relay_on ? 1 : 0) | (r.command_ack ? 2 : 0));
  return {flags, static_cast<std::uint8_t>(r.reading >> 8), static_cast<std::uint8_t>(r.reading), r.acked_opcode};
}

inline ReadingPayload decode_reading(std::span<const std::uint8_t> p) {
  if (p.size() != 4) throw DecodeError(Errc::LengthMismatch, 0, "reading payload must be 4 bytes");
  return {(p[0] & 1) != 0, (p[0] & 2) != 0, detail::get16(p, 1), p[3]};
}

}  // namespace homewsn::wire
