#pragma once

// Virtual-address tag memory: a 64-entry tag MMU mapping virtual page
// numbers to tag pages, one 32-bit tag per 4-byte data word.

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "offdift/error.hpp"

namespace offdift::tagmem {

inline constexpr unsigned kPageShift = 12;
inline constexpr std::uint32_t kPageSize = 1u << kPageShift;
inline constexpr unsigned kTagsPerPage = kPageSize / 4;
inline constexpr unsigned kTmmuEntries = 64;

struct TmmuEntry {
  std::uint32_t vpn = 0;
  std::uint32_t tag_ppn = 0;
  bool valid = false;
  friend bool operator==(const TmmuEntry&, const TmmuEntry&) = default;
};

struct TagLocation {
  std::uint32_t tag_ppn = 0;
  std::uint32_t word_index = 0;
  friend bool operator==(const TagLocation&, const TagLocation&) = default;
};

class Tmmu {
 public:
  const std::array<TmmuEntry, kTmmuEntries>& entries() const { return entries_; }

  unsigned valid_count() const {
    unsigned n = 0;
    for (const auto& e : entries_) n += e.valid;
    return n;
  }

  std::optional<std::uint32_t> lookup(std::uint32_t vpn) const {
    for (const auto& e : entries_)
      if (e.valid && e.vpn == vpn) return e.tag_ppn;
    return std::nullopt;
  }

  // Installs vpn -> tag_ppn in the first free slot. Callers go through
  // register_mapping so a tag page is allocated alongside.
  void install(std::uint32_t vpn, std::uint32_t tag_ppn) {
    for (auto& e : entries_) {
      if (!e.valid) {
        e = TmmuEntry{vpn, tag_ppn, true};
        return;
      }
    }
    throw Error(ErrorCode::TmmuFull, "no free entry for vpn " + hex(vpn));
  }

  friend bool operator==(const Tmmu&, const Tmmu&) = default;

 private:
  std::array<TmmuEntry, kTmmuEntries> entries_{};
};

using TagPage = std::array<std::uint32_t, kTagsPerPage>;

class TagMemory {
 public:
  std::uint32_t allocate() {
    pages_.push_back(std::make_unique<TagPage>());
    pages_.back()->fill(0);
    return static_cast<std::uint32_t>(pages_.size() - 1);
  }

  std::uint32_t& at(TagLocation loc) { return (*pages_.at(loc.tag_ppn))[loc.word_index]; }
  std::uint32_t at(TagLocation loc) const { return (*pages_.at(loc.tag_ppn))[loc.word_index]; }
  std::size_t page_count() const { return pages_.size(); }
  const TagPage& page(std::uint32_t ppn) const { return *pages_.at(ppn); }

  TagMemory() = default;
  TagMemory(const TagMemory& other) { *this = other; }
  TagMemory& operator=(const TagMemory& other) {
    if (this == &other) return *this;
    pages_.clear();
    for (const auto& p : other.pages_) pages_.push_back(std::make_unique<TagPage>(*p));
    return *this;
  }
  TagMemory(TagMemory&&) noexcept = default;
  TagMemory& operator=(TagMemory&&) noexcept = default;

 private:
  std::vector<std::unique_ptr<TagPage>> pages_;
};

// A TMMU together with the tag pages it points at.
struct TaggedSpace {
  Tmmu tmmu;
  TagMemory mem;
};

inline void register_mapping(Tmmu& tmmu, TagMemory& mem, std::uint32_t vpn) {
  if (vpn >= (1u << 20)) throw Error(ErrorCode::InvalidConfig, "vpn " + hex(vpn) + " exceeds 20 bits");
  if (tmmu.lookup(vpn)) return;
  if (tmmu.valid_count() == kTmmuEntries)
    throw Error(ErrorCode::TmmuFull, "cannot map vpn " + hex(vpn) + ": all 64 entries in use");
  tmmu.install(vpn, mem.allocate());
}

inline void register_mapping(TaggedSpace& s, std::uint32_t vpn) { register_mapping(s.tmmu, s.mem, vpn); }

inline TagLocation translate(const Tmmu& tmmu, std::uint32_t vaddr) {
  const auto ppn = tmmu.lookup(vaddr >> kPageShift);
  if (!ppn) throw Error(ErrorCode::TmmuMiss, "unmapped virtual address " + hex32(vaddr));
  return TagLocation{*ppn, (vaddr & (kPageSize - 1)) >> 2};
}

inline std::uint32_t read_tag(const TaggedSpace& s, std::uint32_t vaddr) {
  return s.mem.at(translate(s.tmmu, vaddr));
}

inline void write_tag(TaggedSpace& s, std::uint32_t vaddr, std::uint32_t tag) {
  s.mem.at(translate(s.tmmu, vaddr)) = tag;
}

namespace detail {

// Word addresses overlapping [vaddr, vaddr + count); validated before use.
inline std::vector<TagLocation> range_locations(const Tmmu& tmmu, std::uint32_t vaddr, std::uint32_t count) {
  std::vector<TagLocation> locs;
  if (count == 0) return locs;
  const std::uint64_t first = vaddr & ~3u;
  const std::uint64_t end = std::uint64_t(vaddr) + count;
  if (end > (1ull << 32)) throw Error(ErrorCode::TmmuMiss, "range wraps past 4 GiB at " + hex32(vaddr));
  for (std::uint64_t a = first; a < end; a += 4) locs.push_back(translate(tmmu, static_cast<std::uint32_t>(a)));
  return locs;
}

}  // namespace detail

inline void write_tag_range(TaggedSpace& s, std::uint32_t vaddr, std::uint32_t count, std::uint32_t tag) {
  for (auto loc : detail::range_locations(s.tmmu, vaddr, count)) s.mem.at(loc) = tag;
}

inline std::uint32_t fold_tag_range(const TaggedSpace& s, std::uint32_t vaddr, std::uint32_t count) {
  std::uint32_t acc = 0;
  for (auto loc : detail::range_locations(s.tmmu, vaddr, count)) acc |= s.mem.at(loc);
  return acc;
}

// Nonzero tags keyed by word virtual address.
inline std::map<std::uint32_t, std::uint32_t> nonzero_tags(const TaggedSpace& s) {
  std::map<std::uint32_t, std::uint32_t> out;
  for (const auto& e : s.tmmu.entries()) {
    if (!e.valid) continue;
    const auto& page = s.mem.page(e.tag_ppn);
    for (unsigned i = 0; i < kTagsPerPage; ++i)
      if (page[i] != 0) out[(e.vpn << kPageShift) | (i << 2)] = page[i];
  }
  return out;
}

}  // namespace offdift::tagmem
