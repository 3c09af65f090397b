#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace homewsn {

enum class Errc {
  InvalidInput,
  AsymmetricTable,
  UnknownNode,
  NoPath,
  InvalidPath,
  InstanceTooLarge,
  MisroutedFrame,
  // datagram codec
  PayloadTooLarge,
  BadMagic,
  UnsupportedVersion,
  UnknownType,
  LengthMismatch,
  BadCrc,
  Truncated,
  // contact-id
  BadLength,
  BadDigit,
  BadMessageType,
  BadQualifier,
  BadChecksum,
  NoValidChecksum,
  // monitoring service
  NoCoordinator,
  StartupError,
  StoreError,
  IoError,
};

inline std::string_view to_string(Errc e) {
  switch (e) {
    case Errc::InvalidInput: return "InvalidInput";
    case Errc::AsymmetricTable: return "AsymmetricTable";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::NoPath: return "NoPath";
    case Errc::InvalidPath: return "InvalidPath";
    case Errc::InstanceTooLarge: return "InstanceTooLarge";
    case Errc::MisroutedFrame: return "MisroutedFrame";
    case Errc::PayloadTooLarge: return "PayloadTooLarge";
    case Errc::BadMagic: return "BadMagic";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::UnknownType: return "UnknownType";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::BadCrc: return "BadCrc";
    case Errc::Truncated: return "Truncated";
    case Errc::BadLength: return "BadLength";
    case Errc::BadDigit: return "BadDigit";
    case Errc::BadMessageType: return "BadMessageType";
    case Errc::BadQualifier: return "BadQualifier";
    case Errc::BadChecksum: return "BadChecksum";
    case Errc::NoValidChecksum: return "NoValidChecksum";
    case Errc::NoCoordinator: return "NoCoordinator";
    case Errc::StartupError: return "StartupError";
    case Errc::StoreError: return "StoreError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Decoder failures additionally report where in the input they were detected.
class DecodeError : public Error {
 public:
  DecodeError(Errc code, std::size_t offset, const std::string& what)
      : Error(code, what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Raised by strict table validation; ids are 1-based.
class AsymmetricTableError : public Error {
 public:
  AsymmetricTableError(int i, int j, double a, double b)
      : Error(Errc::AsymmetricTable, "cost[" + std::to_string(i) + "][" + std::to_string(j) +
                                         "]=" + std::to_string(a) + " but cost[" +
                                         std::to_string(j) + "][" + std::to_string(i) +
                                         "]=" + std::to_string(b)),
        i(i), j(j), a(a), b(b) {}

  int i, j;
  double a, b;
};

}  // namespace homewsn
