#pragma once

// Contact-ID alarm messages: 16 decimal digits
//   ACCT(4) MT(2) Q(1) EEE(3) GG(2) CCC(3) S(1)
// The digit values must sum to a multiple of 15, with '0' counted as 10.

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "homewsn/error.hpp"

namespace homewsn::cid {

inline constexpr std::size_t kMessageLength = 16;

enum class Qualifier : std::uint8_t { NewEvent = 1, Restore = 3, Status = 6 };

inline const char* to_string(Qualifier q) {
  switch (q) {
    case Qualifier::NewEvent: return "new event";
    case Qualifier::Restore: return "restore";
    case Qualifier::Status: return "status";
  }
  return "?";
}

struct CidEvent {
  std::string account;       // 4 digits
  std::string message_type;  // "18" or "98"
  Qualifier qualifier = Qualifier::NewEvent;
  std::string event_code;    // 3 digits
  std::string partition;     // 2 digits
  std::string zone;          // 3 digits
  char checksum = '0';

  int event_number() const { return std::stoi(event_code); }

  bool operator==(const CidEvent&) const = default;
};

inline int digit_value(char c) { return c == '0' ? 10 : c - '0'; }

inline void require_digits(std::string_view s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] < '0' || s[i] > '9') {
      throw DecodeError(Errc::BadDigit, i, std::string("'") + s[i] + "' is not a decimal digit");
    }
  }
}

inline int digit_sum(std::string_view s) {
  int sum = 0;
  for (char c : s) sum += digit_value(c);
  return sum;
}

/// Checksum digit for the first 15 digits of a message. Digit values span
/// 1..10, so a required value of 11..15 has no encoding.
inline char cid_checksum(std::string_view first15) {
  if (first15.size() != kMessageLength - 1) {
    throw Error(Errc::BadLength, "checksum needs 15 digits, got " + std::to_string(first15.size()));
  }
  require_digits(first15);
  const int need = 15 - digit_sum(first15) % 15;  // 1..15
  if (need > 10) {
    throw Error(Errc::NoValidChecksum, "required checksum value " + std::to_string(need) + " has no digit");
  }
  return need == 10 ? '0' : static_cast<char>('0' + need);
}

/// Checksum is verified before field semantics, so any corrupted digit
/// reports BadChecksum.
inline CidEvent decode_cid(std::string_view digits) {
  if (digits.size() != kMessageLength) {
    throw DecodeError(Errc::BadLength, digits.size(),
                      "Contact-ID message must be 16 digits, got " + std::to_string(digits.size()));
  }
  require_digits(digits);
  if (digit_sum(digits) % 15 != 0) throw DecodeError(Errc::BadChecksum, 15, "digit sum is not a multiple of 15");

  CidEvent ev;
  ev.account = std::string(digits.substr(0, 4));
  ev.message_type = std::string(digits.substr(4, 2));
  if (ev.message_type != "18" && ev.message_type != "98") {
    throw DecodeError(Errc::BadMessageType, 4, "message type " + ev.message_type);
  }
  switch (digits[6]) {
    case '1': ev.qualifier = Qualifier::NewEvent; break;
    case '3': ev.qualifier = Qualifier::Restore; break;
    case '6': ev.qualifier = Qualifier::Status; break;
    default: throw DecodeError(Errc::BadQualifier, 6, std::string("qualifier ") + digits[6]);
  }
  ev.event_code = std::string(digits.substr(7, 3));
  ev.partition = std::string(digits.substr(10, 2));
  ev.zone = std::string(digits.substr(12, 3));
  ev.checksum = digits[15];
  return ev;
}

/// Builds a complete message from its fields.
inline std::string encode_cid(std::string_view account, std::string_view message_type, Qualifier q,
                              std::string_view event_code, std::string_view partition, std::string_view zone) {
  if (account.size() != 4 || message_type.size() != 2 || event_code.size() != 3 || partition.size() != 2 ||
      zone.size() != 3) {
    throw Error(Errc::BadLength, "Contact-ID field has the wrong width");
  }
  std::string body;
  body += account;
  body += message_type;
  body += static_cast<char>('0' + static_cast<int>(q));
  body += event_code;
  body += partition;
  body += zone;
  body += cid_checksum(body);
  return body;
}

}  // namespace homewsn::cid
