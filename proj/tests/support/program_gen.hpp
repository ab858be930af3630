#pragma once

// Random toy programs for property tests. Each thread gets its own code
// range and data pages. Generated code uses:
//   r0-r4, r6, r7   data registers
//   r5              loop counter (only loop blocks write it)
//   r8, r10         fixed pointers into the data page
//   r12             computed pointer (masked data-dependent address, syscall buffer)
//   fp, sp          frame registers; sp moves only in balanced pairs
// Every generated program terminates and never faults.

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "offdift/cosim.hpp"
#include "offdift/toyisa/asm.hpp"

namespace offdift::testgen {

struct GenOptions {
  unsigned min_threads = 1;
  unsigned max_threads = 4;
  unsigned max_blocks = 8;
  unsigned max_block_len = 7;
  bool syscalls = true;
  bool fp_ops = true;
  bool library_helpers = true;
  bool seed_tags = true;
  // pc as a base or operand; off when results must not depend on layout.
  bool pc_values = true;
};

class Generator {
 public:
  explicit Generator(std::uint64_t seed, GenOptions o = {}) : rng_(seed), o_(o) {}

  unsigned pick(unsigned lo, unsigned hi) { return std::uniform_int_distribution<unsigned>(lo, hi)(rng_); }
  bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }
  template <typename T>
  const T& one_of(const std::vector<T>& v) { return v[pick(0, static_cast<unsigned>(v.size() - 1))]; }

  // Data page: vpn 0x20 + 4k; stack page: vpn 0x21 + 4k; code at 0x10000 + 0x4000k.
  std::string program(unsigned k) {
    std::ostringstream out;
    const std::uint32_t code = 0x10000 + 0x4000 * k;
    const std::uint32_t data = (0x20 + 4 * k) << 12;
    const std::uint32_t stack = (0x21 + 4 * k) << 12;
    data_ = data;
    out << ".text " << hex32(code) << "\n.page " << hex(data >> 12) << "\n.page " << hex(stack >> 12) << "\n";
    out << ".sp " << hex32(stack + 0xF00) << "\n";
    for (unsigned i = 0, n = pick(0, 12); i < n; ++i)
      out << ".word " << hex32(data + 4 * pick(0, 0x2F)) << " " << hex32(static_cast<std::uint32_t>(rng_())) << "\n";
    for (unsigned i = 0, n = pick(0, 6); i < n; ++i)
      out << ".word " << hex32(stack + 0xEC0 + 4 * pick(0, 0x4F)) << " " << hex32(static_cast<std::uint32_t>(rng_())) << "\n";
    if (o_.seed_tags) {
      for (unsigned i = 0, n = pick(2, 10); i < n; ++i)
        out << ".tag " << hex32(data + 4 * pick(0, 0x2F)) << " " << hex(1u << pick(0, 3)) << "\n";
      for (unsigned i = 0, n = pick(0, 3); i < n; ++i)
        out << ".tag " << hex32(stack + 0xEC0 + 4 * pick(0, 0x4F)) << " " << hex(1u << pick(0, 3)) << "\n";
    }
    const bool helper = chance(0.6);
    const bool helper_is_lib = o_.library_helpers && chance(0.5);

    out << "\n.func main\nentry:\n";
    out << "    mov r10, " << "#" << hex(data) << "\n";
    out << "    add r8, r10, #0x40\n";
    out << "    mov fp, sp\n";
    out << "    mov r5, #0\n";
    for (unsigned r : {0u, 1u, 2u, 3u}) out << "    ldr r" << r << ", [r10, #" << 4 * pick(0, 0x2F) << "]\n";
    out << "    b b0\n";

    const unsigned blocks = pick(1, o_.max_blocks);
    for (unsigned b = 0; b < blocks; ++b) {
      const bool loop = chance(0.2);
      if (loop) {
        out << "b" << b << ":\n    mov r5, #" << pick(1, 4) << "\n    b b" << b << "_loop\n";
        out << "b" << b << "_loop:\n";
        body(out);
        out << "    sub r5, r5, #1\n    bnz r5, b" << b << "_loop\n";
        out << "b" << b << "_after:\n";
        body(out);
      } else {
        out << "b" << b << ":\n";
        body(out);
      }
      const std::string next = "b" + std::to_string(b + 1);
      const unsigned t = pick(0, 9);
      if (helper && t < 3) {
        out << "    bl helper\n" << "b" << b << "_ret:\n";
        body(out);
        out << "    b " << next << "\n";
      } else if (t < 6) {
        // Forward conditional: to the next block or the one after.
        const std::string target = "b" + std::to_string(std::min(b + 2, blocks));
        out << "    bnz r" << one_of(data_regs_) << ", " << target << "\n";
        out << "b" << b << "_ft:\n";
        body(out);
        out << "    b " << next << "\n";
      } else {
        out << "    b " << next << "\n";
      }
    }
    out << "b" << blocks << ":\n";
    body(out);
    out << "    halt\n";
    if (helper) {
      out << "\n" << (helper_is_lib ? ".lib" : ".func") << " helper\nhelper:\n";
      body(out);
      out << "    b helper_tail\nhelper_tail:\n";
      body(out);
      out << "    ret\n";
    }
    return out.str();
  }

  // Policy with random rules, checks and tag width.
  PolicyRegisters policy() {
    PolicyRegisters p;
    for (unsigned c = 0; c < kClassCount; ++c) {
      p.set_rule(InstrClass(c), PropagationRule(pick(0, kRuleCount - 1)));
      p.set_checks(InstrClass(c), chance(0.35) ? static_cast<std::uint8_t>(pick(1, 7)) : 0);
    }
    p.check_mask = pick(0, 15);
    p.tag_width = one_of(std::vector<unsigned>{4, 8, 32});
    return p;
  }

  toyisa::SimFileSystem files() {
    toyisa::SimFileSystem fs;
    for (std::uint32_t id = 1; id <= 3; ++id) {
      toyisa::SimFile f;
      for (unsigned i = 0, n = pick(0, 40); i < n; ++i) f.bytes.push_back(static_cast<std::uint8_t>(rng_()));
      f.tag = chance(0.7) ? 1u << (id - 1) : 0;
      fs[id] = std::move(f);
    }
    return fs;
  }

  Scenario scenario() {
    Scenario s;
    const unsigned n = pick(o_.min_threads, o_.max_threads);
    for (unsigned k = 0; k < n; ++k) {
      s.programs.push_back(toyisa::parse_program(program(k)));
      s.contexts.push_back(pft::ContextId{static_cast<std::uint8_t>(0x40 + k), 0x4d2 + k});
    }
    const unsigned policies = chance(0.5) ? 1 : n;
    PolicyRegisters shared = policy();
    for (unsigned i = 0; i < policies; ++i) {
      PolicyRegisters p = policy();
      p.tpr = shared.tpr;  // compile-time runs need one rule set
      s.policies.push_back(p);
    }
    s.quantum = one_of(std::vector<unsigned>{1, 2, 5, 50});
    s.fs = files();
    s.library_code = chance(0.8);
    return s;
  }

 private:
  unsigned data_reg() { return one_of(data_regs_); }
  unsigned any_reg() {
    if (chance(0.8)) return data_reg();
    return o_.pc_values ? one_of(std::vector<unsigned>{8, 10, 11, 13, 15}) : one_of(std::vector<unsigned>{8, 10, 11, 13});
  }

  std::string reg(unsigned r) { return toyisa::reg_name(r); }

  void mem_op(std::ostringstream& out) {
    const bool store = chance(0.45);
    const bool fp = o_.fp_ops && chance(0.25);
    const std::string rt = fp ? "s" + std::to_string(pick(0, 7)) : reg(store ? any_reg() : data_reg());
    const std::string m = fp ? (store ? "vstr" : "vldr") : (store ? "str" : "ldr");
    unsigned form = pick(0, 5);
    if (form == 4 && !o_.pc_values) form = 0;
    switch (form) {
      case 0: out << "    " << m << " " << rt << ", [r10, #" << 4 * pick(0, 0x1F) << "]\n"; break;
      case 1: out << "    " << m << " " << rt << ", [r8, #" << 4 * pick(0, 0x1F) << "]\n"; break;
      case 2: out << "    " << m << " " << rt << ", [sp, #" << 4 * pick(0, 0x3C) << "]\n"; break;
      case 3: out << "    " << m << " " << rt << ", [fp, #" << 4 * pick(0, 0x1F) << "]\n"; break;
      case 4: out << "    " << m << " " << rt << ", [pc, #" << 4 * pick(0, 16) << "]\n"; break;
      default:
        out << "    and r12, " << reg(data_reg()) << ", #0x7c\n";
        out << "    add r12, r12, r10\n";
        out << "    " << m << " " << rt << ", [r12, #" << 4 * pick(0, 0x10) << "]\n";
        break;
    }
  }

  void syscall(std::ostringstream& out) {
    out << "    add r12, r10, #" << pick(0, 0x80) << "\n";
    out << "    mov r7, #" << pick(0, 48) << "\n";
    out << "    " << (chance(0.5) ? "sysread" : "syswrite") << " #" << pick(1, 3) << ", r12, r7\n";
  }

  void body(std::ostringstream& out) {
    static const std::vector<std::string> alu = {"add", "sub", "and", "orr", "eor"};
    static const std::vector<std::string> falu = {"vadd", "vsub", "vmul"};
    for (unsigned i = 0, n = pick(1, o_.max_block_len); i < n; ++i) {
      const unsigned k = pick(0, 99);
      if (k < 12) out << "    mov " << reg(data_reg()) << ", #" << hex(rng_() & 0xFFFF) << "\n";
      else if (k < 20) out << "    mov " << reg(data_reg()) << ", " << reg(any_reg()) << "\n";
      else if (k < 34)
        out << "    " << one_of(alu) << " " << reg(data_reg()) << ", " << reg(any_reg()) << ", " << reg(any_reg()) << "\n";
      else if (k < 40) out << "    " << one_of(alu) << " " << reg(data_reg()) << ", " << reg(any_reg()) << ", #" << pick(0, 255) << "\n";
      else if (k < 62) mem_op(out);
      else if (k < 68 && o_.fp_ops)
        out << "    " << one_of(falu) << " s" << pick(0, 7) << ", s" << pick(0, 7) << ", s" << pick(0, 7) << "\n";
      else if (k < 71 && o_.fp_ops) out << "    vmov s" << pick(0, 7) << ", s" << pick(0, 7) << "\n";
      else if (k < 78) {
        const unsigned frame = 4 * pick(1, 16);
        out << "    sub sp, sp, #" << frame << "\n";
        mem_op(out);
        out << "    add sp, sp, #" << frame << "\n";
      } else if (k < 82) out << "    " << (chance(0.5) ? "mov fp, sp" : "add fp, sp, #" + std::to_string(4 * pick(0, 8))) << "\n";
      else if (k < 88 && o_.syscalls) syscall(out);
      else mem_op(out);
    }
  }

  std::mt19937_64 rng_;
  GenOptions o_;
  std::uint32_t data_ = 0;
  std::vector<unsigned> data_regs_ = {0, 1, 2, 3, 4, 6, 7};
};

}  // namespace offdift::testgen
