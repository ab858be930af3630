#pragma once

// Line-oriented assembly text for toy programs.
//
//   .text 0x10168        code base address
//   .page 0x20           map a data page (virtual page number)
//   .sp 0x20ff0          initial stack pointer
//   .word 0x20100 0x5    initial data word
//   .tag 0x20100 0x1     seeded memory tag
//   .func main           start a function (.lib for a library function)
//   label:               start a basic block
//   mov r2, #0x20100     instructions, one per line; ';' starts a comment

#include <cctype>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "offdift/toyisa/program.hpp"

namespace offdift::toyisa {

namespace asm_detail {

inline std::vector<std::string> split_operands(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '[') ++depth;
    if (c == ']') --depth;
    if (c == ',' && depth == 0) {
      out.emplace_back(offdift::detail::trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!offdift::detail::trim(cur).empty()) out.emplace_back(offdift::detail::trim(cur));
  return out;
}

struct LineParser {
  int lineno;

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": " + msg);
  }

  unsigned reg(const std::string& s) const {
    if (s == "sp") return kSp;
    if (s == "fp") return kFp;
    if (s == "lr") return kLr;
    if (s == "pc") return kPc;
    if (s.size() >= 2 && s[0] == 'r') {
      const auto v = offdift::detail::parse_int(s.substr(1));
      if (v >= 0 && v <= 15) return static_cast<unsigned>(v);
    }
    fail("bad register '" + s + "'");
  }

  unsigned freg(const std::string& s) const {
    if (s.size() >= 2 && s[0] == 's') {
      const auto v = offdift::detail::parse_int(s.substr(1));
      if (v >= 0 && v <= 31) return static_cast<unsigned>(v);
    }
    fail("bad FP register '" + s + "'");
  }

  std::int64_t imm(const std::string& s) const {
    if (s.empty() || s[0] != '#') fail("expected immediate, got '" + s + "'");
    return offdift::detail::parse_int(s.substr(1));
  }

  bool is_imm(const std::string& s) const { return !s.empty() && s[0] == '#'; }

  // "[rb]" or "[rb, #off]"
  std::pair<unsigned, std::int32_t> address(const std::string& s) const {
    if (s.size() < 3 || s.front() != '[' || s.back() != ']') fail("bad address '" + s + "'");
    auto parts = split_operands(std::string_view(s).substr(1, s.size() - 2));
    if (parts.size() == 1) return {reg(parts[0]), 0};
    if (parts.size() == 2) return {reg(parts[0]), static_cast<std::int32_t>(imm(parts[1]))};
    fail("bad address '" + s + "'");
  }

  void arity(const std::vector<std::string>& ops, std::size_t n, const std::string& m) const {
    if (ops.size() != n) fail(m + " expects " + std::to_string(n) + " operands");
  }

  Instr instr(const std::string& mnemonic, const std::vector<std::string>& ops) const {
    const auto& m = mnemonic;
    if (m == "mov") {
      arity(ops, 2, m);
      if (is_imm(ops[1])) return MovImm{reg(ops[0]), static_cast<std::uint32_t>(imm(ops[1]))};
      return MovReg{reg(ops[0]), reg(ops[1])};
    }
    static const std::pair<const char*, AluOp> alu[] = {
        {"add", AluOp::Add}, {"sub", AluOp::Sub}, {"and", AluOp::And}, {"orr", AluOp::Or}, {"eor", AluOp::Xor}};
    for (const auto& [name, op] : alu) {
      if (m == name) {
        arity(ops, 3, m);
        Alu a{op, reg(ops[0]), reg(ops[1])};
        if (is_imm(ops[2])) {
          a.has_imm = true;
          a.imm = static_cast<std::uint32_t>(imm(ops[2]));
        } else {
          a.rm = reg(ops[2]);
        }
        return a;
      }
    }
    if (m == "ldr" || m == "str") {
      arity(ops, 2, m);
      auto [base, off] = address(ops[1]);
      if (m == "str" && base == kR9) {
        if (off != 0) fail("instrumentation store takes no offset");
        return InstrEmit{reg(ops[0])};
      }
      return Mem{m == "str", false, reg(ops[0]), base, off};
    }
    if (m == "vldr" || m == "vstr") {
      arity(ops, 2, m);
      auto [base, off] = address(ops[1]);
      return Mem{m == "vstr", true, freg(ops[0]), base, off};
    }
    static const std::pair<const char*, FpOp> fops[] = {{"vadd", FpOp::Add}, {"vsub", FpOp::Sub}, {"vmul", FpOp::Mul}};
    for (const auto& [name, op] : fops) {
      if (m == name) {
        arity(ops, 3, m);
        return FAlu{op, freg(ops[0]), freg(ops[1]), freg(ops[2])};
      }
    }
    if (m == "vmov") {
      arity(ops, 2, m);
      return FMov{freg(ops[0]), freg(ops[1])};
    }
    if (m == "b") {
      arity(ops, 1, m);
      return B{ops[0]};
    }
    if (m == "bnz") {
      arity(ops, 2, m);
      return Bcond{reg(ops[0]), ops[1]};
    }
    if (m == "bl") {
      arity(ops, 1, m);
      return Call{ops[0]};
    }
    if (m == "ret") {
      arity(ops, 0, m);
      return Ret{};
    }
    if (m == "halt") {
      arity(ops, 0, m);
      return Halt{};
    }
    if (m == "sysread" || m == "syswrite") {
      arity(ops, 3, m);
      const auto fid = static_cast<std::uint32_t>(imm(ops[0]));
      if (m == "sysread") return SysRead{fid, reg(ops[1]), reg(ops[2])};
      return SysWrite{fid, reg(ops[1]), reg(ops[2])};
    }
    fail("unknown mnemonic '" + m + "'");
  }
};

}  // namespace asm_detail

inline ToyProgram parse_program(std::string_view text) {
  ToyProgram p;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  bool have_sp = false;
  while (std::getline(in, raw)) {
    ++lineno;
    asm_detail::LineParser lp{lineno};
    std::string_view line = offdift::detail::trim(std::string_view(raw).substr(0, raw.find(';')));
    if (line.empty()) continue;
    std::string word;
    std::string rest;
    {
      const auto sp = line.find_first_of(" \t");
      word = std::string(line.substr(0, sp));
      if (sp != std::string_view::npos) rest = std::string(offdift::detail::trim(line.substr(sp)));
    }
    auto args = [&] {
      std::vector<std::string> out;
      std::istringstream ws(rest);
      for (std::string t; ws >> t;) out.push_back(t);
      return out;
    };
    if (word[0] == '.') {
      auto a = args();
      auto need = [&](std::size_t n) {
        if (a.size() != n) lp.fail(word + " expects " + std::to_string(n) + " arguments");
      };
      auto num = [&](std::size_t i) { return static_cast<std::uint32_t>(offdift::detail::parse_int(a[i])); };
      if (word == ".text") { need(1); p.text_base = num(0); }
      else if (word == ".page") { need(1); p.data_vpns.push_back(num(0)); }
      else if (word == ".sp") { need(1); p.initial_sp = num(0); have_sp = true; }
      else if (word == ".word") { need(2); p.init_words[num(0)] = num(1); }
      else if (word == ".tag") { need(2); p.seed_tags[num(0)] = num(1); }
      else if (word == ".func" || word == ".lib") {
        need(1);
        p.functions.push_back(Function{a[0], word == ".lib", {}});
      } else lp.fail("unknown directive " + word);
      continue;
    }
    if (word.back() == ':' && rest.empty()) {
      if (p.functions.empty()) p.functions.push_back(Function{"main", false, {}});
      p.functions.back().blocks.push_back(Block{word.substr(0, word.size() - 1), {}, 0});
      continue;
    }
    if (p.functions.empty() || p.functions.back().blocks.empty()) lp.fail("instruction outside a block");
    std::string lower;
    for (char c : word) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    p.functions.back().blocks.back().instrs.push_back(lp.instr(lower, asm_detail::split_operands(rest)));
  }
  if (!have_sp) p.initial_sp = 0;
  layout(p);
  return p;
}

inline std::string format_instr(const Instr& instr) {
  auto h = [](std::uint64_t v) { return "#" + hex(v); };
  auto off = [](unsigned base, std::int32_t o) {
    return "[" + reg_name(base) + (o ? ", #" + std::to_string(o) : std::string()) + "]";
  };
  return std::visit(
      [&](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, MovImm>) return "mov " + reg_name(x.rd) + ", " + h(x.imm);
        else if constexpr (std::is_same_v<T, MovReg>) return "mov " + reg_name(x.rd) + ", " + reg_name(x.rn);
        else if constexpr (std::is_same_v<T, Alu>) {
          static const char* names[] = {"add", "sub", "and", "orr", "eor"};
          return std::string(names[static_cast<int>(x.op)]) + " " + reg_name(x.rd) + ", " + reg_name(x.rn) + ", " +
                 (x.has_imm ? h(x.imm) : reg_name(x.rm));
        } else if constexpr (std::is_same_v<T, Mem>) {
          const std::string m = x.fp ? (x.store ? "vstr" : "vldr") : (x.store ? "str" : "ldr");
          return m + " " + (x.fp ? "s" + std::to_string(x.rt) : reg_name(x.rt)) + ", " + off(x.base, x.offset);
        } else if constexpr (std::is_same_v<T, FAlu>) {
          static const char* names[] = {"vadd", "vsub", "vmul"};
          return std::string(names[static_cast<int>(x.op)]) + " s" + std::to_string(x.sd) + ", s" +
                 std::to_string(x.sn) + ", s" + std::to_string(x.sm);
        } else if constexpr (std::is_same_v<T, FMov>) return "vmov s" + std::to_string(x.sd) + ", s" + std::to_string(x.sn);
        else if constexpr (std::is_same_v<T, B>) return "b " + x.label;
        else if constexpr (std::is_same_v<T, Bcond>) return "bnz " + reg_name(x.cond_reg) + ", " + x.label;
        else if constexpr (std::is_same_v<T, Call>) return "bl " + x.label;
        else if constexpr (std::is_same_v<T, Ret>) return "ret";
        else if constexpr (std::is_same_v<T, Halt>) return "halt";
        else if constexpr (std::is_same_v<T, SysRead>)
          return "sysread #" + std::to_string(x.file_id) + ", " + reg_name(x.buf_reg) + ", " + reg_name(x.len_reg);
        else if constexpr (std::is_same_v<T, SysWrite>)
          return "syswrite #" + std::to_string(x.file_id) + ", " + reg_name(x.buf_reg) + ", " + reg_name(x.len_reg);
        else return "str " + reg_name(x.addr_reg) + ", [r9]";
      },
      instr);
}

// Listing that parses back to the same program; addresses appear as comments.
inline std::string format_program(const ToyProgram& p) {
  std::ostringstream out;
  out << ".text " << hex32(p.text_base) << "\n";
  for (auto v : p.data_vpns) out << ".page " << hex(v) << "\n";
  if (p.initial_sp) out << ".sp " << hex32(p.initial_sp) << "\n";
  for (const auto& [a, v] : p.init_words) out << ".word " << hex32(a) << " " << hex32(v) << "\n";
  for (const auto& [a, v] : p.seed_tags) out << ".tag " << hex32(a) << " " << hex32(v) << "\n";
  for (const auto& f : p.functions) {
    out << "\n" << (f.library ? ".lib " : ".func ") << f.name << "\n";
    for (const auto& b : f.blocks) {
      out << b.label << ":\n";
      std::uint32_t addr = b.address;
      for (const auto& i : b.instrs) {
        std::string text = "    " + format_instr(i);
        if (text.size() < 32) text.resize(32, ' ');
        out << text << " ; " << hex32(addr) << "\n";
        addr += 4;
      }
    }
  }
  return out.str();
}

}  // namespace offdift::toyisa
