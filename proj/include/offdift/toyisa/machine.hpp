#pragma once

// Architectural interpreter for toy programs and the round-robin scheduler
// shared by the trace-producing executor and the taint oracle. Observers see
// every block entry and every retired instruction with its effects.

#include <array>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "offdift/pft.hpp"
#include "offdift/toyisa/filesystem.hpp"
#include "offdift/toyisa/program.hpp"

namespace offdift::toyisa {

class AddressSpace {
 public:
  void map_page(std::uint32_t vpn) { pages_.try_emplace(vpn, std::vector<std::uint8_t>(4096, 0)); }
  bool mapped(std::uint32_t addr) const { return pages_.count(addr >> 12) != 0; }

  std::uint8_t read8(std::uint32_t addr) const { return page(addr)[addr & 0xFFF]; }
  void write8(std::uint32_t addr, std::uint8_t v) { page(addr)[addr & 0xFFF] = v; }

  std::uint32_t read32(std::uint32_t addr) const {
    aligned(addr);
    const auto& p = page(addr);
    const auto o = addr & 0xFFF;
    return std::uint32_t(p[o]) | (std::uint32_t(p[o + 1]) << 8) | (std::uint32_t(p[o + 2]) << 16) |
           (std::uint32_t(p[o + 3]) << 24);
  }
  void write32(std::uint32_t addr, std::uint32_t v) {
    aligned(addr);
    auto& p = page(addr);
    const auto o = addr & 0xFFF;
    for (int i = 0; i < 4; ++i) p[o + i] = static_cast<std::uint8_t>(v >> (8 * i));
  }

  // Nonzero words, for comparing architectural results.
  std::map<std::uint32_t, std::uint32_t> nonzero_words() const {
    std::map<std::uint32_t, std::uint32_t> out;
    for (const auto& [vpn, bytes] : pages_)
      for (std::uint32_t o = 0; o < 4096; o += 4)
        if (auto v = read32((vpn << 12) | o)) out[(vpn << 12) | o] = v;
    return out;
  }

 private:
  static void aligned(std::uint32_t addr) {
    if (addr & 3) throw Error(ErrorCode::RuntimeFault, "unaligned word access at " + hex32(addr));
  }
  const std::vector<std::uint8_t>& page(std::uint32_t addr) const {
    auto it = pages_.find(addr >> 12);
    if (it == pages_.end()) throw Error(ErrorCode::RuntimeFault, "unmapped data access at " + hex32(addr));
    return it->second;
  }
  std::vector<std::uint8_t>& page(std::uint32_t addr) {
    return const_cast<std::vector<std::uint8_t>&>(static_cast<const AddressSpace*>(this)->page(addr));
  }

  std::map<std::uint32_t, std::vector<std::uint8_t>> pages_;
};

struct ThreadState {
  std::array<std::uint32_t, 16> r{};
  std::array<std::uint32_t, 32> s{};
  std::uint32_t pc = 0;
  bool halted = false;
  AddressSpace mem;
};

struct Thread {
  const ToyProgram* program = nullptr;
  CodeMap code;
  pft::ContextId ctx;
  ThreadState state;
};

inline Thread load_thread(const ToyProgram& p, pft::ContextId ctx) {
  Thread t;
  t.program = &p;
  ToyProgram copy = p;
  t.code = layout(copy);
  if (copy != p) throw Error(ErrorCode::InvalidConfig, "program must be laid out before loading");
  t.ctx = ctx;
  for (auto vpn : p.mapped_vpns()) t.state.mem.map_page(vpn);
  for (const auto& [a, v] : p.init_words) t.state.mem.write32(a, v);
  t.state.r[kSp] = p.initial_sp;
  t.state.pc = p.entry();
  return t;
}

// What one retired instruction did.
struct Effect {
  const Instr* instr = nullptr;
  std::uint32_t pc = 0;
  std::uint32_t block = 0;
  bool library = false;
  std::optional<std::uint32_t> address;  // memory accesses
  std::uint32_t emit_value = 0;          // instrumentation stores
  std::uint32_t file_id = 0;             // syscalls
  std::uint32_t buf = 0;
  std::uint32_t count = 0;
  std::uint32_t file_tag = 0;            // tag of the file read
};

inline std::uint32_t alu(AluOp op, std::uint32_t a, std::uint32_t b) {
  switch (op) {
    case AluOp::Add: return a + b;
    case AluOp::Sub: return a - b;
    case AluOp::And: return a & b;
    case AluOp::Or: return a | b;
    case AluOp::Xor: return a ^ b;
  }
  return 0;
}

inline std::uint32_t fpu(FpOp op, std::uint32_t a, std::uint32_t b) {
  const float x = std::bit_cast<float>(a), y = std::bit_cast<float>(b);
  float z = 0;
  switch (op) {
    case FpOp::Add: z = x + y; break;
    case FpOp::Sub: z = x - y; break;
    case FpOp::Mul: z = x * y; break;
  }
  return std::bit_cast<std::uint32_t>(z);
}

// Executes the instruction at pc. SysWrite stores the bytes; the caller sets
// the resulting file tag.
inline Effect step(Thread& t, SimFileSystem& fs) {
  auto& st = t.state;
  const std::uint32_t pc = st.pc;
  const Instr& ins = t.code.fetch(*t.program, pc);
  Effect e;
  e.instr = &ins;
  e.pc = pc;
  e.block = t.code.block_of(*t.program, pc);
  e.library = t.code.is_library(*t.program, pc);
  auto reg = [&](unsigned r) { return r == kPc ? pc : st.r[r]; };
  std::uint32_t next = pc + 4;
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, MovImm>) st.r[x.rd] = x.imm;
        else if constexpr (std::is_same_v<T, MovReg>) st.r[x.rd] = reg(x.rn);
        else if constexpr (std::is_same_v<T, Alu>) st.r[x.rd] = alu(x.op, reg(x.rn), x.has_imm ? x.imm : reg(x.rm));
        else if constexpr (std::is_same_v<T, Mem>) {
          const std::uint32_t ea = reg(x.base) + static_cast<std::uint32_t>(x.offset);
          e.address = ea;
          if (x.store) st.mem.write32(ea, x.fp ? st.s[x.rt] : reg(x.rt));
          else if (x.fp) st.s[x.rt] = st.mem.read32(ea);
          else st.r[x.rt] = st.mem.read32(ea);
        } else if constexpr (std::is_same_v<T, FAlu>) st.s[x.sd] = fpu(x.op, st.s[x.sn], st.s[x.sm]);
        else if constexpr (std::is_same_v<T, FMov>) st.s[x.sd] = st.s[x.sn];
        else if constexpr (std::is_same_v<T, B>) next = x.target;
        else if constexpr (std::is_same_v<T, Bcond>) { if (reg(x.cond_reg) != 0) next = x.target; }
        else if constexpr (std::is_same_v<T, Call>) {
          st.r[kLr] = pc + 4;
          next = x.target;
        } else if constexpr (std::is_same_v<T, Ret>) {
          next = st.r[kLr];
          if (!t.code.block_starts.count(next))
            throw Error(ErrorCode::RuntimeFault, "return to non-block address " + hex32(next));
        } else if constexpr (std::is_same_v<T, Halt>) st.halted = true;
        else if constexpr (std::is_same_v<T, SysRead>) {
          e.file_id = x.file_id;
          e.buf = reg(x.buf_reg);
          const auto it = fs.find(x.file_id);
          const std::uint32_t avail = it == fs.end() ? 0 : static_cast<std::uint32_t>(it->second.bytes.size());
          e.count = std::min(reg(x.len_reg), avail);
          e.file_tag = it == fs.end() ? 0 : it->second.tag;
          for (std::uint32_t i = 0; i < e.count; ++i)
            if (!st.mem.mapped(e.buf + i)) throw Error(ErrorCode::RuntimeFault, "read buffer unmapped at " + hex32(e.buf + i));
          for (std::uint32_t i = 0; i < e.count; ++i) st.mem.write8(e.buf + i, it->second.bytes[i]);
        } else if constexpr (std::is_same_v<T, SysWrite>) {
          e.file_id = x.file_id;
          e.buf = reg(x.buf_reg);
          e.count = reg(x.len_reg);
          std::vector<std::uint8_t> bytes;
          for (std::uint32_t i = 0; i < e.count; ++i) bytes.push_back(st.mem.read8(e.buf + i));
          fs[x.file_id].bytes = std::move(bytes);
        } else if constexpr (std::is_same_v<T, InstrEmit>) e.emit_value = reg(x.addr_reg);
      },
      ins);
  st.pc = next;
  return e;
}

class ExecutionObserver {
 public:
  virtual ~ExecutionObserver() = default;
  // A thread starts or resumes at a block (context switch).
  virtual void on_switch(unsigned thread, const Thread& t) = 0;
  // The running thread enters another block.
  virtual void on_block(unsigned thread, const Thread& t) = 0;
  virtual void on_retire(unsigned thread, const Thread& t, const Effect& e) = 0;
  // Returns the tag the kernel stores on the written file.
  virtual std::uint32_t on_write(unsigned thread, const Thread& t, const Effect& e) = 0;
};

struct ExecOptions {
  unsigned quantum = 1;
  std::uint64_t max_steps = 1'000'000;
};

// Round-robin over runnable threads. A turn lasts at least `quantum`
// instructions and ends at the next block boundary, so every resumption
// point is a block start.
inline void run_threads(std::vector<Thread>& threads, const ExecOptions& opts, SimFileSystem& fs,
                        ExecutionObserver& obs) {
  if (opts.quantum < 1) throw Error(ErrorCode::InvalidConfig, "quantum must be at least 1");
  if (threads.empty() || threads.size() > pft::kMaxSlots)
    throw Error(ErrorCode::InvalidConfig, "between 1 and 4 programs required");
  std::uint64_t steps = 0;
  std::size_t cur = 0;
  bool switched = true;
  auto next_runnable = [&](std::size_t from) -> std::optional<std::size_t> {
    for (std::size_t k = 1; k <= threads.size(); ++k) {
      const auto i = (from + k) % threads.size();
      if (!threads[i].state.halted) return i;
    }
    return std::nullopt;
  };
  while (true) {
    Thread& t = threads[cur];
    if (switched) obs.on_switch(static_cast<unsigned>(cur), t);
    else obs.on_block(static_cast<unsigned>(cur), t);
    switched = false;
    unsigned turn = 0;
    while (true) {
      if (++steps > opts.max_steps) throw Error(ErrorCode::RuntimeFault, "step limit exceeded");
      const Effect e = step(t, fs);
      ++turn;
      if (std::holds_alternative<SysWrite>(*e.instr)) fs[e.file_id].tag = obs.on_write(static_cast<unsigned>(cur), t, e);
      obs.on_retire(static_cast<unsigned>(cur), t, e);
      if (!is_control_transfer(*e.instr)) continue;
      if (t.state.halted) break;
      if (turn >= opts.quantum) {
        auto n = next_runnable(cur);
        if (n && *n != cur) break;
        turn = 0;
      }
      obs.on_block(static_cast<unsigned>(cur), t);
    }
    auto n = next_runnable(cur);
    if (!n) return;
    if (*n != cur) switched = true;
    else if (t.state.halted) return;
    cur = *n;
  }
}

}  // namespace offdift::toyisa
