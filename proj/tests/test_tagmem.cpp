#include <gtest/gtest.h>

#include <map>
#include <random>

#include "offdift/tagmem.hpp"

using namespace offdift;
using namespace offdift::tagmem;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidConfig;
}

TaggedSpace space_with(std::initializer_list<std::uint32_t> vpns) {
  TaggedSpace s;
  for (auto v : vpns) register_mapping(s, v);
  return s;
}

}  // namespace

TEST(Tmmu, SixtyFourEntriesThenFull) {
  TaggedSpace s;
  for (std::uint32_t v = 0; v < kTmmuEntries; ++v) register_mapping(s, 0x100 + v);
  EXPECT_EQ(s.tmmu.valid_count(), 64u);
  EXPECT_EQ(code_of([&] { register_mapping(s, 0x500); }), ErrorCode::TmmuFull);
  // Re-registering a present page is not an allocation.
  register_mapping(s, 0x100);
  EXPECT_EQ(s.mem.page_count(), 64u);
}

TEST(Tmmu, VpnLimitedToTwentyBits) {
  TaggedSpace s;
  EXPECT_EQ(code_of([&] { register_mapping(s, 1u << 20); }), ErrorCode::InvalidConfig);
}

TEST(Tmmu, TranslateSplitsPageAndWord) {
  auto s = space_with({0x20, 0x21});
  EXPECT_EQ(translate(s.tmmu, 0x20ff4), (TagLocation{0, 0x3FD}));
  EXPECT_EQ(translate(s.tmmu, 0x21000), (TagLocation{1, 0}));
  // Byte addresses share their word's tag.
  EXPECT_EQ(translate(s.tmmu, 0x21007), translate(s.tmmu, 0x21004));
  EXPECT_EQ(code_of([&] { translate(s.tmmu, 0x22000); }), ErrorCode::TmmuMiss);
}

TEST(Tmmu, RandomTranslationsMatchMapOracle) {
  std::mt19937_64 rng(1);
  TaggedSpace s;
  std::map<std::uint32_t, std::uint32_t> oracle;  // vpn -> ppn
  while (oracle.size() < 40) {
    const auto vpn = static_cast<std::uint32_t>(rng() % (1u << 20));
    if (oracle.count(vpn)) continue;
    register_mapping(s, vpn);
    oracle[vpn] = static_cast<std::uint32_t>(oracle.size());
  }
  std::vector<std::uint32_t> vpns;
  for (auto& [v, p] : oracle) vpns.push_back(v);
  for (int i = 0; i < 1000; ++i) {
    const auto vpn = vpns[rng() % vpns.size()];
    const auto addr = (vpn << 12) | static_cast<std::uint32_t>(rng() % 4096);
    ASSERT_EQ(translate(s.tmmu, addr), (TagLocation{oracle[vpn], (addr & 0xFFF) / 4}));
  }
}

TEST(TagRange, ReadMessageTwelveBytesTagsThreeWords) {
  auto s = space_with({0x20});
  write_tag_range(s, 0x20000, 12, 0x1);
  EXPECT_EQ(nonzero_tags(s), (std::map<std::uint32_t, std::uint32_t>{{0x20000, 1}, {0x20004, 1}, {0x20008, 1}}));
}

TEST(TagRange, UnalignedRangeCoversOverlappedWords) {
  auto s = space_with({0x20});
  write_tag_range(s, 0x20002, 3, 0x2);  // bytes 2..4 touch two words
  EXPECT_EQ(nonzero_tags(s), (std::map<std::uint32_t, std::uint32_t>{{0x20000, 2}, {0x20004, 2}}));
}

TEST(TagRange, ZeroCountWritesNothing) {
  auto s = space_with({0x20});
  write_tag_range(s, 0x20000, 0, 0x1);
  EXPECT_TRUE(nonzero_tags(s).empty());
  EXPECT_EQ(fold_tag_range(s, 0x20000, 0), 0u);
  // An empty range needs no translation either.
  EXPECT_EQ(fold_tag_range(s, 0x90000, 0), 0u);
}

TEST(TagRange, UnmappedRangeLeavesNoPartialWrites) {
  auto s = space_with({0x20});
  EXPECT_EQ(code_of([&] { write_tag_range(s, 0x20ff8, 16, 0x1); }), ErrorCode::TmmuMiss);
  EXPECT_TRUE(nonzero_tags(s).empty());
}

TEST(TagRange, FoldIsOrOfWords) {
  auto s = space_with({0x20});
  write_tag(s, 0x20100, 0x1);
  write_tag(s, 0x20104, 0x4);
  write_tag(s, 0x20108, 0x0);
  EXPECT_EQ(fold_tag_range(s, 0x20100, 12), 0x5u);
  EXPECT_EQ(fold_tag_range(s, 0x20200, 64), 0u);
}

TEST(TagRange, FoldPropertyAgainstWordLoop) {
  std::mt19937_64 rng(2);
  auto s = space_with({0x20, 0x21});
  std::map<std::uint32_t, std::uint32_t> model;
  for (int i = 0; i < 300; ++i) {
    const auto a = 0x20000 + 4 * static_cast<std::uint32_t>(rng() % 2048);
    const auto t = static_cast<std::uint32_t>(1u << (rng() % 32));
    write_tag(s, a, t);
    model[a] = t;
  }
  for (int i = 0; i < 500; ++i) {
    const auto start = 0x20000 + static_cast<std::uint32_t>(rng() % 8000);
    const auto count = static_cast<std::uint32_t>(rng() % 192);
    std::uint32_t expect = 0;
    for (std::uint32_t b = start; b < start + count; ++b) {
      auto it = model.find(b & ~3u);
      if (it != model.end()) expect |= it->second;
    }
    ASSERT_EQ(fold_tag_range(s, start, count), expect);
  }
}

TEST(TagMemoryCopy, IsDeep) {
  auto s = space_with({0x20});
  write_tag(s, 0x20000, 7);
  TaggedSpace copy = s;
  write_tag(copy, 0x20000, 9);
  EXPECT_EQ(read_tag(s, 0x20000), 7u);
  EXPECT_EQ(read_tag(copy, 0x20000), 9u);
}
