#pragma once

// Simplified program-flow trace: a fixed-length packet format carrying
// basic-block start addresses and context IDs, and the decoder that turns it
// into the decoded-trace memory representation (address with the thread slot
// stored in the two always-zero low bits).

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "offdift/error.hpp"

namespace offdift::pft {

struct ContextId {
  std::uint8_t asid = 0;
  std::uint32_t tid = 0;  // 24 bits

  constexpr std::uint32_t word() const { return (tid << 8) | asid; }
  static constexpr ContextId from_word(std::uint32_t w) {
    return ContextId{static_cast<std::uint8_t>(w & 0xFF), w >> 8};
  }
  friend constexpr bool operator==(const ContextId&, const ContextId&) = default;
  friend constexpr auto operator<=>(const ContextId&, const ContextId&) = default;
};

inline std::string to_string(ContextId c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "asid=%x tid=%x", c.asid, c.tid);
  return buf;
}

struct ASync {
  friend bool operator==(const ASync&, const ASync&) = default;
};
struct ISync {
  std::uint32_t address = 0;
  ContextId ctx;
  friend bool operator==(const ISync&, const ISync&) = default;
};
struct BranchAddr {
  std::uint32_t address = 0;
  friend bool operator==(const BranchAddr&, const BranchAddr&) = default;
};

using TracePacket = std::variant<ASync, ISync, BranchAddr>;

inline constexpr std::uint8_t kHeaderASync = 0x00;
inline constexpr std::uint8_t kHeaderISync = 0x08;
inline constexpr std::uint8_t kHeaderBranch = 0xB0;
inline constexpr std::size_t kMaxSlots = 4;
inline constexpr std::uint32_t kUnusedSlotWord = 0xFFFFFFFF;

struct DecodedEntry {
  std::uint32_t word = 0;
  friend bool operator==(const DecodedEntry&, const DecodedEntry&) = default;
};

constexpr std::uint32_t entry_address(DecodedEntry e) { return e.word & 0xFFFFFFFCu; }
constexpr unsigned entry_slot(DecodedEntry e) { return e.word & 0x3u; }

// Contexts in order of first appearance; index is the thread slot.
class SlotTable {
 public:
  std::size_t size() const { return contexts_.size(); }
  bool empty() const { return contexts_.empty(); }
  const ContextId& operator[](std::size_t i) const { return contexts_.at(i); }
  const std::vector<ContextId>& contexts() const { return contexts_; }

  std::optional<unsigned> find(ContextId c) const {
    for (std::size_t i = 0; i < contexts_.size(); ++i)
      if (contexts_[i] == c) return static_cast<unsigned>(i);
    return std::nullopt;
  }

  unsigned install(ContextId c) {
    if (auto s = find(c)) return *s;
    if (contexts_.size() == kMaxSlots)
      throw Error(ErrorCode::TooManyContexts, "fifth distinct context " + to_string(c));
    contexts_.push_back(c);
    return static_cast<unsigned>(contexts_.size() - 1);
  }

  friend bool operator==(const SlotTable&, const SlotTable&) = default;

 private:
  std::vector<ContextId> contexts_;
};

inline void append_packet(std::string& out, const TracePacket& packet) {
  auto check = [](std::uint32_t a) {
    if (a & 0x3) throw Error(ErrorCode::UnalignedAddress, "packet address " + hex32(a));
  };
  if (std::holds_alternative<ASync>(packet)) {
    out.append(5, '\0');
    out.push_back(static_cast<char>(0x80));
  } else if (auto* is = std::get_if<ISync>(&packet)) {
    check(is->address);
    out.push_back(static_cast<char>(kHeaderISync));
    detail::put_u32(out, is->address);
    detail::put_u32(out, is->ctx.word());
  } else {
    const auto& br = std::get<BranchAddr>(packet);
    check(br.address);
    out.push_back(static_cast<char>(kHeaderBranch));
    detail::put_u32(out, br.address);
  }
}

inline std::vector<std::uint8_t> encode_packets(std::span<const TracePacket> packets) {
  std::string out;
  for (const auto& p : packets) append_packet(out, p);
  return {out.begin(), out.end()};
}

// Incremental decoder; bytes may arrive in arbitrary chunks. Entries are
// returned as soon as their packet is complete.
class StreamDecoder {
 public:
  template <typename Sink>
  void feed(std::span<const std::uint8_t> bytes, Sink&& sink) {
    for (auto b : bytes) {
      pending_.push_back(b);
      if (auto e = try_packet()) sink(*e);
    }
  }

  // Throws MalformedPacket if a packet is still incomplete.
  void finish() const {
    if (!pending_.empty())
      throw Error(ErrorCode::MalformedPacket,
                  "truncated packet at byte offset " + std::to_string(packet_start_));
  }

  const SlotTable& slots() const { return slots_; }
  std::size_t bytes_consumed() const { return packet_start_ + pending_.size(); }

 private:
  std::optional<DecodedEntry> try_packet() {
    const std::uint8_t header = pending_.front();
    std::size_t need = 0;
    switch (header) {
      case kHeaderASync: need = 6; break;
      case kHeaderISync: need = 9; break;
      case kHeaderBranch: need = 5; break;
      default:
        throw Error(ErrorCode::MalformedPacket,
                    "unknown header " + hex(header) + " at byte offset " + std::to_string(packet_start_));
    }
    if (pending_.size() < need) return std::nullopt;

    std::optional<DecodedEntry> out;
    if (header == kHeaderASync) {
      if (pending_[1] | pending_[2] | pending_[3] | pending_[4] || pending_[5] != 0x80)
        throw Error(ErrorCode::MalformedPacket,
                    "bad async body at byte offset " + std::to_string(packet_start_));
    } else {
      const std::uint32_t addr = detail::get_u32(pending_.data() + 1);
      if (addr & 0x3)
        throw Error(ErrorCode::MalformedPacket,
                    "unaligned address " + hex32(addr) + " at byte offset " + std::to_string(packet_start_));
      if (header == kHeaderISync) {
        current_ = slots_.install(ContextId::from_word(detail::get_u32(pending_.data() + 5)));
        synced_ = true;
      } else if (!synced_) {
        throw Error(ErrorCode::BranchBeforeSync,
                    "branch packet at byte offset " + std::to_string(packet_start_));
      }
      out = DecodedEntry{addr | current_};
    }
    packet_start_ += need;
    pending_.clear();
    return out;
  }

  std::vector<std::uint8_t> pending_;
  std::size_t packet_start_ = 0;
  SlotTable slots_;
  unsigned current_ = 0;
  bool synced_ = false;
};

struct DecodedTrace {
  std::vector<DecodedEntry> entries;
  SlotTable slots;
};

inline DecodedTrace decode_stream(std::span<const std::uint8_t> bytes) {
  StreamDecoder dec;
  DecodedTrace out;
  dec.feed(bytes, [&](DecodedEntry e) { out.entries.push_back(e); });
  dec.finish();
  out.slots = dec.slots();
  return out;
}

// Decoded-trace file: 4 slot words then the entry words, all little-endian.
inline std::vector<std::uint8_t> save_decoded(const DecodedTrace& t) {
  std::string out;
  for (std::size_t i = 0; i < kMaxSlots; ++i)
    detail::put_u32(out, i < t.slots.size() ? t.slots[i].word() : kUnusedSlotWord);
  for (auto e : t.entries) detail::put_u32(out, e.word);
  return {out.begin(), out.end()};
}

inline DecodedTrace load_decoded(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16 || bytes.size() % 4 != 0)
    throw Error(ErrorCode::MalformedPacket, "decoded-trace file size " + std::to_string(bytes.size()));
  DecodedTrace t;
  for (std::size_t i = 0; i < kMaxSlots; ++i) {
    const auto w = detail::get_u32(bytes.data() + 4 * i);
    if (w != kUnusedSlotWord) t.slots.install(ContextId::from_word(w));
  }
  for (std::size_t off = 16; off < bytes.size(); off += 4)
    t.entries.push_back(DecodedEntry{detail::get_u32(bytes.data() + off)});
  return t;
}

}  // namespace offdift::pft
