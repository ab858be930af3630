#pragma once

// Security policy registers: per-class propagation rules (TPR), per-class
// check enables (TCR), the check mask and the tag width.

#include <array>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "offdift/error.hpp"

namespace offdift {

enum class InstrClass : std::uint8_t { ArithLogic = 0, LoadStore = 1, Branch = 2, FpLoadStore = 3 };
inline constexpr unsigned kClassCount = 4;

enum class PropagationRule : std::uint8_t { Zero = 0, CopySrc1, Or, And, Xor, Max, KeepDest };
inline constexpr unsigned kRuleCount = 7;

enum class PolicyMode : std::uint8_t { Runtime, CompileTime };

// TCR check bits (per class).
enum CheckBits : std::uint8_t { kCheckSrc1 = 1, kCheckSrc2 = 2, kCheckDst = 4 };

constexpr std::uint32_t apply_rule(PropagationRule r, std::uint32_t src1, std::uint32_t src2,
                                   std::uint32_t old_dst) {
  switch (r) {
    case PropagationRule::Zero: return 0;
    case PropagationRule::CopySrc1: return src1;
    case PropagationRule::Or: return src1 | src2;
    case PropagationRule::And: return src1 & src2;
    case PropagationRule::Xor: return src1 ^ src2;
    case PropagationRule::Max: return src1 > src2 ? src1 : src2;
    case PropagationRule::KeepDest: return old_dst;
  }
  return 0;
}

constexpr std::string_view rule_name(PropagationRule r) {
  constexpr std::array<std::string_view, kRuleCount> names{"zero", "copy", "or", "and", "xor", "max", "keep"};
  return names[static_cast<unsigned>(r)];
}

constexpr std::string_view class_name(InstrClass c) {
  constexpr std::array<std::string_view, kClassCount> names{"arith", "loadstore", "branch", "fploadstore"};
  return names[static_cast<unsigned>(c)];
}

inline PropagationRule parse_rule(std::string_view s) {
  for (unsigned i = 0; i < kRuleCount; ++i)
    if (rule_name(PropagationRule(i)) == s) return PropagationRule(i);
  throw Error(ErrorCode::ParseError, "unknown propagation rule '" + std::string(s) + "'");
}

inline InstrClass parse_class(std::string_view s) {
  for (unsigned i = 0; i < kClassCount; ++i)
    if (class_name(InstrClass(i)) == s) return InstrClass(i);
  throw Error(ErrorCode::ParseError, "unknown instruction class '" + std::string(s) + "'");
}

constexpr std::uint32_t width_mask(unsigned tag_width) {
  return tag_width >= 32 ? 0xFFFFFFFFu : ((1u << tag_width) - 1u);
}

struct PolicyRegisters {
  PolicyMode mode = PolicyMode::Runtime;
  std::uint32_t tpr = 0;
  std::uint32_t tcr = 0;
  std::uint32_t check_mask = 0;
  unsigned tag_width = 32;

  std::uint32_t mask() const { return width_mask(tag_width); }

  void set_rule(InstrClass c, PropagationRule r) {
    const unsigned shift = 4 * static_cast<unsigned>(c);
    tpr = (tpr & ~(0xFu << shift)) | (std::uint32_t(r) << shift);
  }
  void set_checks(InstrClass c, std::uint8_t bits) {
    const unsigned shift = 4 * static_cast<unsigned>(c);
    tcr = (tcr & ~(0xFu << shift)) | (std::uint32_t(bits & 0x7) << shift);
  }

  friend bool operator==(const PolicyRegisters&, const PolicyRegisters&) = default;
};

inline PropagationRule tpr_rule(const PolicyRegisters& p, InstrClass c) {
  const unsigned field = (p.tpr >> (4 * static_cast<unsigned>(c))) & 0xF;
  if (field >= kRuleCount)
    throw Error(ErrorCode::InvalidRuleEncoding,
                "TPR field " + std::to_string(field) + " for class " + std::string(class_name(c)));
  return PropagationRule(field);
}

inline std::uint8_t tcr_checks(const PolicyRegisters& p, InstrClass c) {
  return static_cast<std::uint8_t>((p.tcr >> (4 * static_cast<unsigned>(c))) & 0x7);
}

inline void validate(const PolicyRegisters& p) {
  if (p.tag_width < 1 || p.tag_width > 32)
    throw Error(ErrorCode::InvalidConfig, "tag_width " + std::to_string(p.tag_width) + " outside 1..32");
  for (unsigned c = 0; c < kClassCount; ++c) (void)tpr_rule(p, InstrClass(c));
}

// Policy text: `mode=`, `tag_width=`, `check_mask=`, `tpr.<class>=<rule>`,
// `tcr.<class>=<src1|src2|dst joined by '|', or a number>`. Branch defaults
// to keep; the other classes default to zero.
inline PolicyRegisters parse_policy(std::string_view text) {
  PolicyRegisters p;
  p.set_rule(InstrClass::Branch, PropagationRule::KeepDest);
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = detail::trim(std::string_view(line).substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::ParseError, "policy line " + std::to_string(lineno) + ": expected key=value");
    const auto key = detail::trim(body.substr(0, eq));
    const auto value = detail::trim(body.substr(eq + 1));
    if (key == "mode") {
      if (value == "runtime") p.mode = PolicyMode::Runtime;
      else if (value == "compile") p.mode = PolicyMode::CompileTime;
      else throw Error(ErrorCode::ParseError, "policy mode '" + std::string(value) + "'");
    } else if (key == "tag_width") {
      p.tag_width = static_cast<unsigned>(detail::parse_int(value));
    } else if (key == "check_mask") {
      p.check_mask = static_cast<std::uint32_t>(detail::parse_int(value));
    } else if (key.starts_with("tpr.")) {
      p.set_rule(parse_class(key.substr(4)), parse_rule(value));
    } else if (key.starts_with("tcr.")) {
      std::uint8_t bits = 0;
      if (!value.empty() && value.front() >= '0' && value.front() <= '9') {
        bits = static_cast<std::uint8_t>(detail::parse_int(value));
      } else {
        std::string_view rest = value;
        while (!rest.empty()) {
          const auto bar = rest.find('|');
          const auto tok = detail::trim(rest.substr(0, bar));
          if (tok == "src1") bits |= kCheckSrc1;
          else if (tok == "src2") bits |= kCheckSrc2;
          else if (tok == "dst") bits |= kCheckDst;
          else if (tok != "none") throw Error(ErrorCode::ParseError, "tcr flag '" + std::string(tok) + "'");
          rest = bar == std::string_view::npos ? std::string_view{} : rest.substr(bar + 1);
        }
      }
      if (bits > 7) throw Error(ErrorCode::ParseError, "tcr value out of range");
      p.set_checks(parse_class(key.substr(4)), bits);
    } else {
      throw Error(ErrorCode::ParseError, "unknown policy key '" + std::string(key) + "'");
    }
  }
  validate(p);
  return p;
}

inline std::string format_policy(const PolicyRegisters& p) {
  std::ostringstream out;
  out << "mode=" << (p.mode == PolicyMode::Runtime ? "runtime" : "compile") << "\n";
  out << "tag_width=" << p.tag_width << "\n";
  out << "check_mask=" << hex32(p.check_mask) << "\n";
  for (unsigned c = 0; c < kClassCount; ++c)
    out << "tpr." << class_name(InstrClass(c)) << "=" << rule_name(tpr_rule(p, InstrClass(c))) << "\n";
  for (unsigned c = 0; c < kClassCount; ++c)
    out << "tcr." << class_name(InstrClass(c)) << "=" << unsigned(tcr_checks(p, InstrClass(c))) << "\n";
  return out.str();
}

}  // namespace offdift
