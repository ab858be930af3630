#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <string_view>

namespace offdift {

enum class ErrorCode {
  UnalignedAddress,
  MalformedPacket,
  TooManyContexts,
  BranchBeforeSync,
  UnknownOpcode,
  InvalidOperandRange,
  InvalidRuleEncoding,
  MissingBlock,
  CorruptHeader,
  TruncatedBlock,
  TmmuFull,
  TmmuMiss,
  FifoEmpty,
  FifoOverflow,
  StreamDesync,
  HaltedState,
  TooManySlots,
  UninstrumentedDynamicAccess,
  RuntimeFault,
  MismatchedOrigin,
  ParseError,
  InvalidConfig,
};

constexpr std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnalignedAddress: return "UnalignedAddress";
    case ErrorCode::MalformedPacket: return "MalformedPacket";
    case ErrorCode::TooManyContexts: return "TooManyContexts";
    case ErrorCode::BranchBeforeSync: return "BranchBeforeSync";
    case ErrorCode::UnknownOpcode: return "UnknownOpcode";
    case ErrorCode::InvalidOperandRange: return "InvalidOperandRange";
    case ErrorCode::InvalidRuleEncoding: return "InvalidRuleEncoding";
    case ErrorCode::MissingBlock: return "MissingBlock";
    case ErrorCode::CorruptHeader: return "CorruptHeader";
    case ErrorCode::TruncatedBlock: return "TruncatedBlock";
    case ErrorCode::TmmuFull: return "TmmuFull";
    case ErrorCode::TmmuMiss: return "TmmuMiss";
    case ErrorCode::FifoEmpty: return "FifoEmpty";
    case ErrorCode::FifoOverflow: return "FifoOverflow";
    case ErrorCode::StreamDesync: return "StreamDesync";
    case ErrorCode::HaltedState: return "HaltedState";
    case ErrorCode::TooManySlots: return "TooManySlots";
    case ErrorCode::UninstrumentedDynamicAccess: return "UninstrumentedDynamicAccess";
    case ErrorCode::RuntimeFault: return "RuntimeFault";
    case ErrorCode::MismatchedOrigin: return "MismatchedOrigin";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

// Every failure in the library is reported through this type; code() names
// the condition, what() carries "<Name>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_name(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view name() const noexcept { return error_name(code_); }

 private:
  ErrorCode code_;
};

inline std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

inline std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

// Parses decimal, 0x-hex and negative integers; throws ParseError.
inline std::int64_t parse_int(std::string_view text) {
  std::string s(text);
  if (s.empty()) throw Error(ErrorCode::ParseError, "empty number");
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used, 0);
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "bad number '" + s + "'");
  }
  if (used != s.size()) throw Error(ErrorCode::ParseError, "bad number '" + s + "'");
  return v;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace detail
}  // namespace offdift
