#pragma once

// Toy RISC program model standing in for the traced ARM core: 16 integer
// registers (r9 reserved for instrumentation, fp=r11, sp=r13, lr=r14,
// pc=r15), 32 single-precision registers, 4-byte instructions, code laid
// out contiguously in basic blocks that each end in one control transfer.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "offdift/error.hpp"

namespace offdift::toyisa {

inline constexpr unsigned kR9 = 9;
inline constexpr unsigned kFp = 11;
inline constexpr unsigned kSp = 13;
inline constexpr unsigned kLr = 14;
inline constexpr unsigned kPc = 15;

enum class AluOp : std::uint8_t { Add, Sub, And, Or, Xor };
enum class FpOp : std::uint8_t { Add, Sub, Mul };

struct MovImm {
  unsigned rd = 0;
  std::uint32_t imm = 0;
  friend bool operator==(const MovImm&, const MovImm&) = default;
};
struct MovReg {
  unsigned rd = 0, rn = 0;
  friend bool operator==(const MovReg&, const MovReg&) = default;
};
struct Alu {
  AluOp op = AluOp::Add;
  unsigned rd = 0, rn = 0;
  bool has_imm = false;
  unsigned rm = 0;
  std::uint32_t imm = 0;
  friend bool operator==(const Alu&, const Alu&) = default;
};
// ldr/str (fp=false, rt integer) and vldr/vstr (fp=true, rt names s0-s31).
struct Mem {
  bool store = false;
  bool fp = false;
  unsigned rt = 0;
  unsigned base = 0;
  std::int32_t offset = 0;
  friend bool operator==(const Mem&, const Mem&) = default;
};
struct FAlu {
  FpOp op = FpOp::Add;
  unsigned sd = 0, sn = 0, sm = 0;
  friend bool operator==(const FAlu&, const FAlu&) = default;
};
struct FMov {
  unsigned sd = 0, sn = 0;
  friend bool operator==(const FMov&, const FMov&) = default;
};
struct B {
  std::string label;
  std::uint32_t target = 0;
  friend bool operator==(const B&, const B&) = default;
};
struct Bcond {  // bnz: taken when cond_reg != 0
  unsigned cond_reg = 0;
  std::string label;
  std::uint32_t target = 0;
  friend bool operator==(const Bcond&, const Bcond&) = default;
};
struct Call {
  std::string label;
  std::uint32_t target = 0;
  friend bool operator==(const Call&, const Call&) = default;
};
struct Ret {
  friend bool operator==(const Ret&, const Ret&) = default;
};
struct Halt {
  friend bool operator==(const Halt&, const Halt&) = default;
};
struct SysRead {
  std::uint32_t file_id = 0;
  unsigned buf_reg = 0, len_reg = 0;
  friend bool operator==(const SysRead&, const SysRead&) = default;
};
struct SysWrite {
  std::uint32_t file_id = 0;
  unsigned buf_reg = 0, len_reg = 0;
  friend bool operator==(const SysWrite&, const SysWrite&) = default;
};
// The injected `str <addr_reg>, [r9]` that exports a runtime address.
struct InstrEmit {
  unsigned addr_reg = 0;
  friend bool operator==(const InstrEmit&, const InstrEmit&) = default;
};

using Instr = std::variant<MovImm, MovReg, Alu, Mem, FAlu, FMov, B, Bcond, Call, Ret, Halt, SysRead, SysWrite,
                           InstrEmit>;

inline bool is_control_transfer(const Instr& i) {
  return std::holds_alternative<B>(i) || std::holds_alternative<Bcond>(i) || std::holds_alternative<Call>(i) ||
         std::holds_alternative<Ret>(i) || std::holds_alternative<Halt>(i);
}

struct Block {
  std::string label;
  std::vector<Instr> instrs;
  std::uint32_t address = 0;
  friend bool operator==(const Block&, const Block&) = default;
};

struct Function {
  std::string name;
  bool library = false;
  std::vector<Block> blocks;
  friend bool operator==(const Function&, const Function&) = default;
};

struct ToyProgram {
  std::uint32_t text_base = 0x10000;
  std::vector<Function> functions;
  std::vector<std::uint32_t> data_vpns;
  std::uint32_t initial_sp = 0;
  std::map<std::uint32_t, std::uint32_t> init_words;
  std::map<std::uint32_t, std::uint32_t> seed_tags;

  std::uint32_t entry() const { return functions.at(0).blocks.at(0).address; }

  std::size_t instruction_count() const {
    std::size_t n = 0;
    for (const auto& f : functions)
      for (const auto& b : f.blocks) n += b.instrs.size();
    return n;
  }
  std::uint32_t code_bytes() const { return static_cast<std::uint32_t>(4 * instruction_count()); }

  // Code pages followed by declared data pages, without duplicates.
  std::vector<std::uint32_t> mapped_vpns() const {
    std::vector<std::uint32_t> out;
    std::set<std::uint32_t> seen;
    const std::uint32_t end = text_base + code_bytes();
    for (std::uint32_t v = text_base >> 12; v <= (end == text_base ? end : end - 1) >> 12; ++v)
      if (seen.insert(v).second) out.push_back(v);
    for (auto v : data_vpns)
      if (seen.insert(v).second) out.push_back(v);
    return out;
  }

  friend bool operator==(const ToyProgram&, const ToyProgram&) = default;
};

struct InstrLocation {
  std::size_t function = 0, block = 0, index = 0;
};

// Address -> instruction position, built by layout().
struct CodeMap {
  std::map<std::uint32_t, InstrLocation> at;
  std::set<std::uint32_t> block_starts;

  const Instr& fetch(const ToyProgram& p, std::uint32_t pc) const {
    auto it = at.find(pc);
    if (it == at.end()) throw Error(ErrorCode::RuntimeFault, "no instruction at " + hex32(pc));
    const auto& l = it->second;
    return p.functions[l.function].blocks[l.block].instrs[l.index];
  }
  std::uint32_t block_of(const ToyProgram& p, std::uint32_t pc) const {
    const auto& l = at.at(pc);
    return p.functions[l.function].blocks[l.block].address;
  }
  bool is_library(const ToyProgram& p, std::uint32_t pc) const { return p.functions[at.at(pc).function].library; }
};

inline std::string reg_name(unsigned r) {
  switch (r) {
    case kFp: return "fp";
    case kSp: return "sp";
    case kLr: return "lr";
    case kPc: return "pc";
    default: return "r" + std::to_string(r);
  }
}

namespace detail {

inline void check_app_reg(unsigned r, const std::string& where) {
  if (r > 15) throw Error(ErrorCode::ParseError, where + ": register out of range");
  if (r == kR9) throw Error(ErrorCode::ParseError, where + ": r9 is reserved for instrumentation");
}

inline void validate_instr(const Instr& i, const std::string& where) {
  auto writable = [&](unsigned r) {
    check_app_reg(r, where);
    if (r == kPc) throw Error(ErrorCode::ParseError, where + ": pc cannot be a destination");
  };
  auto fpr = [&](unsigned s) {
    if (s > 31) throw Error(ErrorCode::ParseError, where + ": FP register out of range");
  };
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, MovImm>) writable(x.rd);
        else if constexpr (std::is_same_v<T, MovReg>) { writable(x.rd); check_app_reg(x.rn, where); }
        else if constexpr (std::is_same_v<T, Alu>) {
          writable(x.rd);
          check_app_reg(x.rn, where);
          if (!x.has_imm) check_app_reg(x.rm, where);
        } else if constexpr (std::is_same_v<T, Mem>) {
          check_app_reg(x.base, where);
          if (x.fp) fpr(x.rt);
          else if (x.store) check_app_reg(x.rt, where);
          else writable(x.rt);
          if (x.offset % 4 != 0) throw Error(ErrorCode::ParseError, where + ": offset must be word aligned");
        } else if constexpr (std::is_same_v<T, FAlu>) { fpr(x.sd); fpr(x.sn); fpr(x.sm); }
        else if constexpr (std::is_same_v<T, FMov>) { fpr(x.sd); fpr(x.sn); }
        else if constexpr (std::is_same_v<T, Bcond>) check_app_reg(x.cond_reg, where);
        else if constexpr (std::is_same_v<T, SysRead> || std::is_same_v<T, SysWrite>) {
          check_app_reg(x.buf_reg, where);
          check_app_reg(x.len_reg, where);
        } else if constexpr (std::is_same_v<T, InstrEmit>) check_app_reg(x.addr_reg, where);
      },
      i);
}

}  // namespace detail

// Assigns addresses, resolves labels and checks structural invariants.
inline CodeMap layout(ToyProgram& p) {
  if (p.functions.empty() || p.functions[0].blocks.empty())
    throw Error(ErrorCode::ParseError, "program has no code");
  if (p.text_base & 3) throw Error(ErrorCode::ParseError, "text base " + hex32(p.text_base) + " not word aligned");
  CodeMap map;
  std::map<std::string, std::uint32_t> labels;
  std::uint32_t addr = p.text_base;
  for (std::size_t f = 0; f < p.functions.size(); ++f) {
    for (std::size_t b = 0; b < p.functions[f].blocks.size(); ++b) {
      auto& blk = p.functions[f].blocks[b];
      if (blk.instrs.empty()) throw Error(ErrorCode::ParseError, "block " + blk.label + " is empty");
      blk.address = addr;
      if (!blk.label.empty() && !labels.emplace(blk.label, addr).second)
        throw Error(ErrorCode::ParseError, "duplicate label " + blk.label);
      map.block_starts.insert(addr);
      for (std::size_t i = 0; i < blk.instrs.size(); ++i) {
        const std::string where = "block " + blk.label + " instruction " + std::to_string(i);
        detail::validate_instr(blk.instrs[i], where);
        const bool last = i + 1 == blk.instrs.size();
        if (is_control_transfer(blk.instrs[i]) != last)
          throw Error(ErrorCode::ParseError, where + ": blocks end in exactly one control transfer");
        if (auto* e = std::get_if<InstrEmit>(&blk.instrs[i])) {
          const Mem* next = last ? nullptr : std::get_if<Mem>(&blk.instrs[i + 1]);
          if (!next || next->base != e->addr_reg)
            throw Error(ErrorCode::ParseError, where + ": instrumentation store must precede a memory access on the same base");
        }
        map.at[addr] = InstrLocation{f, b, i};
        addr += 4;
      }
    }
  }
  auto resolve = [&](const std::string& label, std::uint32_t& target) {
    auto it = labels.find(label);
    if (it == labels.end()) throw Error(ErrorCode::ParseError, "undefined label " + label);
    target = it->second;
  };
  for (auto& f : p.functions) {
    for (auto& blk : f.blocks) {
      auto& last = blk.instrs.back();
      if (auto* x = std::get_if<B>(&last)) resolve(x->label, x->target);
      else if (auto* x = std::get_if<Bcond>(&last)) resolve(x->label, x->target);
      else if (auto* x = std::get_if<Call>(&last)) resolve(x->label, x->target);
    }
  }
  // Bcond and Call fall through to the next block in layout order.
  for (const auto& [a, loc] : map.at) {
    const Instr& i = p.functions[loc.function].blocks[loc.block].instrs[loc.index];
    if ((std::holds_alternative<Bcond>(i) || std::holds_alternative<Call>(i)) && !map.block_starts.count(a + 4))
      throw Error(ErrorCode::ParseError, "no fall-through block after " + hex32(a));
  }
  return map;
}

// Removes instrumentation stores, recovering the original program.
inline ToyProgram strip_instrumentation(ToyProgram p) {
  for (auto& f : p.functions)
    for (auto& b : f.blocks)
      std::erase_if(b.instrs, [](const Instr& i) { return std::holds_alternative<InstrEmit>(i); });
  layout(p);
  return p;
}

}  // namespace offdift::toyisa
