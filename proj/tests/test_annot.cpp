#include <gtest/gtest.h>

#include <random>

#include "offdift/annot.hpp"
#include "support/codec_gen.hpp"

using namespace offdift;
using namespace offdift::annot;

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

// Field packing written out by hand: opcode 6 bits, class 2, three 6-bit
// registers, sub 6, imm 32.
std::uint64_t pack(unsigned op, unsigned cls, unsigned d, unsigned s1, unsigned s2, unsigned sub, std::uint32_t imm) {
  return std::uint64_t(op) * (1ull << 58) + std::uint64_t(cls) * (1ull << 56) + std::uint64_t(d) * (1ull << 50) +
         std::uint64_t(s1) * (1ull << 44) + std::uint64_t(s2) * (1ull << 38) + std::uint64_t(sub) * (1ull << 32) + imm;
}

}  // namespace

TEST(AnnotEncoding, FrozenWords) {
  const Annotation rrr{Opcode::TagRRR, InstrClass::ArithLogic, trf(1), trf(2), trf(3), 0, 0};
  EXPECT_EQ(encode_annotation(rrr), 0x0C0420C000000000ull);
  EXPECT_EQ(encode_annotation(rrr), pack(3, 0, 1, 2, 3, 0, 0));

  const Annotation trm2{Opcode::TagTRM2, InstrClass::LoadStore, trf(3), grf(13), trf(13), 1, 4};
  EXPECT_EQ(encode_annotation(trm2), pack(8, 1, 3, 61, 13, 1, 4));

  const Annotation itr{Opcode::TagITR, InstrClass::FpLoadStore, 0, trf_fp(5), trf(2), 0, -8};
  EXPECT_EQ(encode_annotation(itr), pack(9, 3, 0, 21, 2, 0, 0xFFFFFFF8u));
}

TEST(AnnotEncoding, RegisterFiles) {
  EXPECT_EQ(trf(15), 15);
  EXPECT_EQ(trf_fp(0), 16);
  EXPECT_EQ(trf_fp(31), 47);
  EXPECT_EQ(grf(0), 48);
  EXPECT_EQ(grf(15), 63);
  EXPECT_EQ(reg_name(trf_fp(3)), "F3");
  EXPECT_EQ(reg_name(grf(13)), "G13");
}

TEST(AnnotEncoding, UnknownOpcodeRejected) {
  EXPECT_EQ(code_of([] { decode_annotation(pack(16, 0, 0, 0, 0, 0, 0)); }), ErrorCode::UnknownOpcode);
  EXPECT_EQ(code_of([] { decode_annotation(pack(63, 0, 0, 0, 0, 0, 0)); }), ErrorCode::UnknownOpcode);
}

TEST(AnnotEncoding, OperandRangesEnforced) {
  // GRF where a tag register belongs.
  EXPECT_EQ(code_of([] { decode_annotation(pack(1, 0, 50, 1, 0, 0, 0)); }), ErrorCode::InvalidOperandRange);
  // Unused src1 must be zero.
  EXPECT_EQ(code_of([] { decode_annotation(pack(0, 0, 1, 1, 0, 0, 0)); }), ErrorCode::InvalidOperandRange);
  // Base tag of an ITR must be an integer register.
  EXPECT_EQ(code_of([] { decode_annotation(pack(9, 1, 0, 1, 20, 0, 0)); }), ErrorCode::InvalidOperandRange);
  // Runtime opcodes carry no sub field; compile-time sub is a valid rule.
  EXPECT_EQ(code_of([] { decode_annotation(pack(3, 0, 1, 2, 3, 1, 0)); }), ErrorCode::InvalidOperandRange);
  EXPECT_EQ(code_of([] { decode_annotation(pack(4, 0, 1, 2, 3, 7, 0)); }), ErrorCode::InvalidOperandRange);
  // General sub-operation out of range; immediate on an opcode without one.
  EXPECT_EQ(code_of([] { decode_annotation(pack(15, 0, 0, 0, 0, 5, 0)); }), ErrorCode::InvalidOperandRange);
  EXPECT_EQ(code_of([] { decode_annotation(pack(1, 0, 1, 2, 0, 0, 9)); }), ErrorCode::InvalidOperandRange);
  // Class bits on a classless opcode.
  EXPECT_EQ(code_of([] { decode_annotation(pack(1, 2, 1, 2, 0, 0, 0)); }), ErrorCode::InvalidOperandRange);
}

TEST(AnnotEncoding, Rendering) {
  EXPECT_EQ(to_string(Annotation{Opcode::TagRRR, InstrClass::ArithLogic, trf(1), trf(2), trf(3), 0, 0}),
            "TagRRR arith T1,T2,T3");
  EXPECT_EQ(to_string(Annotation{Opcode::TagTRM2, InstrClass::LoadStore, trf(3), grf(13), trf(13), 1, 4}),
            "TagTRM2 copy loadstore T3,G13,T13,#4");
  Annotation set{Opcode::General, InstrClass::ArithLogic, grf(13), 0, 0, 0, 0x20ff0};
  EXPECT_EQ(to_string(set), "General set G13,#135152");
}

TEST(AnnotProperty, RandomAnnotationsRoundTrip) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 5000; ++i) {
    const auto a = testgen::random_annotation(rng);
    ASSERT_EQ(decode_annotation(encode_annotation(a)), a) << to_string(a);
  }
}

TEST(AnnotStore, RoundTripAndLookup) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 300; ++i) {
    const auto s = testgen::random_store(rng);
    ASSERT_EQ(load_store(save_store(s)), s);
  }
  AnnotationStore s;
  s[0x10168] = {Annotation{Opcode::TagRImm, InstrClass::ArithLogic, trf(2), 0, 0, 0, 0}};
  EXPECT_EQ(lookup_block(s, 0x10168).size(), 1u);
  EXPECT_EQ(code_of([&] { lookup_block(s, 0x1016c); }), ErrorCode::MissingBlock);
}

TEST(AnnotStore, HeaderLayout) {
  AnnotationStore s;
  s[0x10000] = {};
  const auto b = save_store(s);
  ASSERT_EQ(b.size(), 24u);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "TANN");
  EXPECT_EQ(offdift::detail::get_u32(b.data() + 4), kStoreVersion);
  EXPECT_EQ(offdift::detail::get_u32(b.data() + 8), 1u);
  EXPECT_EQ(offdift::detail::get_u32(b.data() + 16), 0x10000u);
  EXPECT_EQ(offdift::detail::get_u32(b.data() + 20), 0u);
}

TEST(AnnotStore, CorruptionDetected) {
  AnnotationStore s;
  s[0x10000] = {Annotation{Opcode::TagRImm, InstrClass::ArithLogic, trf(1), 0, 0, 0, 0},
                Annotation{Opcode::TagRR, InstrClass::ArithLogic, trf(2), trf(1), 0, 0, 0}};
  s[0x10010] = {};
  const auto good = save_store(s);

  auto magic = good;
  magic[0] = 'X';
  EXPECT_EQ(code_of([&] { load_store(magic); }), ErrorCode::CorruptHeader);

  auto version = good;
  version[4] = 2;
  EXPECT_EQ(code_of([&] { load_store(version); }), ErrorCode::CorruptHeader);

  auto reserved = good;
  reserved[12] = 1;
  EXPECT_EQ(code_of([&] { load_store(reserved); }), ErrorCode::CorruptHeader);

  auto cut = good;
  cut.resize(cut.size() - 12);
  EXPECT_EQ(code_of([&] { load_store(cut); }), ErrorCode::TruncatedBlock);

  auto trailing = good;
  trailing.push_back(0);
  EXPECT_EQ(code_of([&] { load_store(trailing); }), ErrorCode::TruncatedBlock);

  auto unaligned = good;
  unaligned[16] = 0x02;
  EXPECT_EQ(code_of([&] { load_store(unaligned); }), ErrorCode::CorruptHeader);

  auto dup = good;
  dup[16 + 8 + 16] = 0x00;  // second block address 0x10010 -> 0x10000
  EXPECT_EQ(code_of([&] { load_store(dup); }), ErrorCode::CorruptHeader);

  auto badop = good;
  badop[16 + 8 + 7] = 0xFC;  // top byte of the first annotation: opcode 63
  EXPECT_EQ(code_of([&] { load_store(badop); }), ErrorCode::UnknownOpcode);

  EXPECT_EQ(code_of([] { load_store(std::vector<std::uint8_t>{'T', 'A'}); }), ErrorCode::CorruptHeader);
}

TEST(AnnotClassification, RuntimeAndCompileTimePairs) {
  for (unsigned i = 0; i < kOpcodeCount; ++i) {
    const auto op = Opcode(i);
    EXPECT_FALSE(is_runtime(op) && is_compile_time(op));
  }
  EXPECT_TRUE(uses_instrumentation(Opcode::TagITR2));
  EXPECT_FALSE(uses_instrumentation(Opcode::TagMTR));
  Annotation kw{Opcode::General, InstrClass::LoadStore, 0, 0, 0, 4, 0};
  EXPECT_TRUE(is_checked(kw));
  Annotation kr{Opcode::General, InstrClass::ArithLogic, 0, 0, 0, 3, 0};
  EXPECT_FALSE(is_checked(kr));
}
