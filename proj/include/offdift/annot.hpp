#pragma once

// Coprocessor annotation ISA, its fixed 64-bit encoding, and the per-block
// annotation store with its file format.
//
// Word layout, MSB first:
//   opcode[63:58] class[57:56] dst[55:50] src1[49:44] src2[43:38] sub[37:32] imm[31:0]
// `sub` carries the hard-coded rule of compile-time opcodes and the operation
// of General annotations; fields an opcode does not use must be zero.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "offdift/error.hpp"
#include "offdift/policy.hpp"

namespace offdift::annot {

enum class Opcode : std::uint8_t {
  TagRImm = 0,
  TagRR,
  TagMR,
  TagRRR,
  TagRRR2,
  TagMTR,
  TagTRM,
  TagMTR2,
  TagTRM2,
  TagITR,
  TagTRI,
  TagITR2,
  TagTRI2,
  TagKTR,
  TagTRK,
  General,
};
inline constexpr unsigned kOpcodeCount = 16;

// Sub-operations of Opcode::General.
enum class GeneralOp : std::uint8_t { Set = 0, Add, Sub, KernelRead, KernelWrite };
inline constexpr unsigned kGeneralOpCount = 5;

// 0-15 TRF, 16-47 TRF_FP, 48-63 GRF.
using RegId = std::uint8_t;
inline constexpr RegId kTrfBase = 0;
inline constexpr RegId kTrfFpBase = 16;
inline constexpr RegId kGrfBase = 48;

constexpr RegId trf(unsigned r) { return static_cast<RegId>(kTrfBase + r); }
constexpr RegId trf_fp(unsigned s) { return static_cast<RegId>(kTrfFpBase + s); }
constexpr RegId grf(unsigned g) { return static_cast<RegId>(kGrfBase + g); }
constexpr bool is_tag_reg(RegId r) { return r < kGrfBase; }
constexpr bool is_grf(RegId r) { return r >= kGrfBase && r < 64; }

struct Annotation {
  Opcode opcode = Opcode::TagRImm;
  InstrClass cls = InstrClass::ArithLogic;
  RegId dst = 0;
  RegId src1 = 0;
  RegId src2 = 0;
  std::uint8_t sub = 0;
  std::int32_t imm = 0;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

constexpr bool is_runtime(Opcode op) {
  return op == Opcode::TagRRR || op == Opcode::TagMTR || op == Opcode::TagTRM || op == Opcode::TagITR ||
         op == Opcode::TagTRI;
}

constexpr bool is_compile_time(Opcode op) {
  return op == Opcode::TagRRR2 || op == Opcode::TagMTR2 || op == Opcode::TagTRM2 || op == Opcode::TagITR2 ||
         op == Opcode::TagTRI2;
}

// Annotations whose class selects TCR checks.
constexpr bool is_checked(const Annotation& a) {
  return is_runtime(a.opcode) || is_compile_time(a.opcode) ||
         (a.opcode == Opcode::General && a.sub == static_cast<std::uint8_t>(GeneralOp::KernelWrite));
}

constexpr bool uses_instrumentation(Opcode op) {
  return op == Opcode::TagITR || op == Opcode::TagTRI || op == Opcode::TagITR2 || op == Opcode::TagTRI2;
}

namespace detail {

enum class Operand { None, Tag, Trf, Grf };

struct Shape {
  Operand dst, src1, src2;
  bool has_class;
  bool has_imm;
};

inline Shape shape_of(Opcode op, std::uint8_t sub) {
  using O = Operand;
  switch (op) {
    case Opcode::TagRImm: return {O::Tag, O::None, O::None, false, true};
    case Opcode::TagRR: return {O::Tag, O::Tag, O::None, false, false};
    case Opcode::TagMR: return {O::Tag, O::Grf, O::None, false, false};
    case Opcode::TagRRR:
    case Opcode::TagRRR2: return {O::Tag, O::Tag, O::Tag, true, false};
    case Opcode::TagMTR:
    case Opcode::TagMTR2: return {O::Grf, O::Tag, O::Trf, true, true};
    case Opcode::TagTRM:
    case Opcode::TagTRM2: return {O::Tag, O::Grf, O::Trf, true, true};
    case Opcode::TagITR:
    case Opcode::TagITR2: return {O::None, O::Tag, O::Trf, true, true};
    case Opcode::TagTRI:
    case Opcode::TagTRI2: return {O::Tag, O::None, O::Trf, true, true};
    case Opcode::TagKTR: return {O::None, O::Tag, O::None, false, false};
    case Opcode::TagTRK: return {O::Tag, O::None, O::None, false, false};
    case Opcode::General:
      switch (GeneralOp(sub)) {
        case GeneralOp::Set: return {O::Grf, O::None, O::None, false, true};
        case GeneralOp::Add:
        case GeneralOp::Sub: return {O::Grf, O::Grf, O::None, false, true};
        case GeneralOp::KernelRead: return {O::None, O::None, O::None, false, false};
        case GeneralOp::KernelWrite: return {O::None, O::None, O::None, true, false};
      }
  }
  return {O::None, O::None, O::None, false, false};
}

inline bool operand_ok(Operand kind, RegId r) {
  switch (kind) {
    case Operand::None: return r == 0;
    case Operand::Tag: return is_tag_reg(r);
    case Operand::Trf: return r < kTrfFpBase;
    case Operand::Grf: return is_grf(r);
  }
  return false;
}

}  // namespace detail

inline void validate(const Annotation& a) {
  const auto op = static_cast<unsigned>(a.opcode);
  if (op >= kOpcodeCount) throw Error(ErrorCode::UnknownOpcode, "opcode " + std::to_string(op));
  auto bad = [&](const std::string& what) {
    throw Error(ErrorCode::InvalidOperandRange, what + " of opcode " + std::to_string(op));
  };
  if (a.opcode == Opcode::General) {
    if (a.sub >= kGeneralOpCount) bad("sub-operation " + std::to_string(a.sub));
  } else if (is_compile_time(a.opcode)) {
    if (a.sub >= kRuleCount) bad("hard-coded rule " + std::to_string(a.sub));
  } else if (a.sub != 0) {
    bad("sub field");
  }
  const auto s = detail::shape_of(a.opcode, a.sub);
  if (!detail::operand_ok(s.dst, a.dst)) bad("dst " + std::to_string(a.dst));
  if (!detail::operand_ok(s.src1, a.src1)) bad("src1 " + std::to_string(a.src1));
  if (!detail::operand_ok(s.src2, a.src2)) bad("src2 " + std::to_string(a.src2));
  if (!s.has_class && a.cls != InstrClass::ArithLogic) bad("class");
  if (static_cast<unsigned>(a.cls) >= kClassCount) bad("class");
  if (!s.has_imm && a.imm != 0) bad("immediate");
}

inline std::uint64_t encode_annotation(const Annotation& a) {
  validate(a);
  return (std::uint64_t(a.opcode) << 58) | (std::uint64_t(a.cls) << 56) | (std::uint64_t(a.dst) << 50) |
         (std::uint64_t(a.src1) << 44) | (std::uint64_t(a.src2) << 38) | (std::uint64_t(a.sub) << 32) |
         std::uint64_t(static_cast<std::uint32_t>(a.imm));
}

inline Annotation decode_annotation(std::uint64_t w) {
  const unsigned op = static_cast<unsigned>(w >> 58);
  if (op >= kOpcodeCount) throw Error(ErrorCode::UnknownOpcode, "opcode " + std::to_string(op));
  Annotation a;
  a.opcode = Opcode(op);
  a.cls = InstrClass((w >> 56) & 0x3);
  a.dst = static_cast<RegId>((w >> 50) & 0x3F);
  a.src1 = static_cast<RegId>((w >> 44) & 0x3F);
  a.src2 = static_cast<RegId>((w >> 38) & 0x3F);
  a.sub = static_cast<std::uint8_t>((w >> 32) & 0x3F);
  a.imm = static_cast<std::int32_t>(static_cast<std::uint32_t>(w & 0xFFFFFFFFu));
  validate(a);
  return a;
}

constexpr std::string_view opcode_name(Opcode op) {
  constexpr std::string_view names[kOpcodeCount] = {
      "TagRImm", "TagRR",  "TagMR",  "TagRRR", "TagRRR2", "TagMTR", "TagTRM", "TagMTR2",
      "TagTRM2", "TagITR", "TagTRI", "TagITR2", "TagTRI2", "TagKTR", "TagTRK", "General"};
  return names[static_cast<unsigned>(op)];
}

inline std::string reg_name(RegId r) {
  if (r < kTrfFpBase) return "T" + std::to_string(r);
  if (r < kGrfBase) return "F" + std::to_string(r - kTrfFpBase);
  return "G" + std::to_string(r - kGrfBase);
}

// Assembly-style rendering, e.g. "TagRRR arith T1,T2,T3" or "TagTRM2 copy T3,G13,T13,#4".
inline std::string to_string(const Annotation& a) {
  std::string out(opcode_name(a.opcode));
  if (a.opcode == Opcode::General) {
    constexpr std::string_view ops[] = {"set", "add", "sub", "kread", "kwrite"};
    out += " " + std::string(ops[a.sub]);
  } else if (is_compile_time(a.opcode)) {
    out += " " + std::string(rule_name(PropagationRule(a.sub)));
  }
  const auto s = detail::shape_of(a.opcode, a.sub);
  if (s.has_class) out += " " + std::string(class_name(a.cls));
  std::string ops;
  auto add = [&](const std::string& x) { ops += (ops.empty() ? " " : ",") + x; };
  if (s.dst != detail::Operand::None) add(reg_name(a.dst));
  if (s.src1 != detail::Operand::None) add(reg_name(a.src1));
  if (s.src2 != detail::Operand::None) add(reg_name(a.src2));
  if (s.has_imm) add("#" + std::to_string(a.imm));
  return out + ops;
}

using AnnotationStore = std::map<std::uint32_t, std::vector<Annotation>>;

inline const std::vector<Annotation>& lookup_block(const AnnotationStore& store, std::uint32_t addr) {
  auto it = store.find(addr);
  if (it == store.end())
    throw Error(ErrorCode::MissingBlock, "no annotations for block " + hex32(addr));
  return it->second;
}

inline constexpr std::uint32_t kStoreVersion = 1;

inline std::vector<std::uint8_t> save_store(const AnnotationStore& store) {
  std::string out = "TANN";
  offdift::detail::put_u32(out, kStoreVersion);
  offdift::detail::put_u32(out, static_cast<std::uint32_t>(store.size()));
  offdift::detail::put_u32(out, 0);
  for (const auto& [addr, block] : store) {
    offdift::detail::put_u32(out, addr);
    offdift::detail::put_u32(out, static_cast<std::uint32_t>(block.size()));
    for (const auto& a : block) {
      const auto w = encode_annotation(a);
      offdift::detail::put_u32(out, static_cast<std::uint32_t>(w));
      offdift::detail::put_u32(out, static_cast<std::uint32_t>(w >> 32));
    }
  }
  return {out.begin(), out.end()};
}

inline AnnotationStore load_store(std::span<const std::uint8_t> bytes) {
  using offdift::detail::get_u32;
  if (bytes.size() < 16 || bytes[0] != 'T' || bytes[1] != 'A' || bytes[2] != 'N' || bytes[3] != 'N')
    throw Error(ErrorCode::CorruptHeader, "bad annotation-store magic");
  if (get_u32(bytes.data() + 4) != kStoreVersion)
    throw Error(ErrorCode::CorruptHeader, "unsupported version " + std::to_string(get_u32(bytes.data() + 4)));
  if (get_u32(bytes.data() + 12) != 0) throw Error(ErrorCode::CorruptHeader, "nonzero reserved word");
  const std::uint32_t blocks = get_u32(bytes.data() + 8);
  AnnotationStore store;
  std::size_t off = 16;
  for (std::uint32_t b = 0; b < blocks; ++b) {
    if (bytes.size() - off < 8)
      throw Error(ErrorCode::TruncatedBlock, "block header " + std::to_string(b) + " at offset " + std::to_string(off));
    const std::uint32_t addr = get_u32(bytes.data() + off);
    const std::uint32_t count = get_u32(bytes.data() + off + 4);
    off += 8;
    if (addr & 0x3) throw Error(ErrorCode::CorruptHeader, "unaligned block address " + hex32(addr));
    if ((bytes.size() - off) / 8 < count)
      throw Error(ErrorCode::TruncatedBlock, "block " + hex32(addr) + " declares " + std::to_string(count) + " annotations");
    std::vector<Annotation> seq;
    seq.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i, off += 8) {
      const std::uint64_t w = std::uint64_t(get_u32(bytes.data() + off)) |
                              (std::uint64_t(get_u32(bytes.data() + off + 4)) << 32);
      seq.push_back(decode_annotation(w));
    }
    if (!store.emplace(addr, std::move(seq)).second)
      throw Error(ErrorCode::CorruptHeader, "duplicate block " + hex32(addr));
  }
  if (off != bytes.size()) throw Error(ErrorCode::TruncatedBlock, "trailing bytes after last block");
  return store;
}

}  // namespace offdift::annot
