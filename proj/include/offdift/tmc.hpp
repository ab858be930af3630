#pragma once

// Tag Management Core: executes annotations for one thread under one
// security policy. Each call is one architectural step; propagation is
// written back first, then the class's TCR checks inspect the operands.

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "offdift/annot.hpp"
#include "offdift/fifo.hpp"
#include "offdift/pft.hpp"
#include "offdift/policy.hpp"
#include "offdift/tagmem.hpp"

namespace offdift::tmc {

enum class CheckKind : std::uint8_t { Src1, Src2, Dst };

constexpr std::string_view check_kind_name(CheckKind k) {
  switch (k) {
    case CheckKind::Src1: return "src1";
    case CheckKind::Src2: return "src2";
    case CheckKind::Dst: return "dst";
  }
  return "?";
}

struct TmcState {
  std::array<std::uint32_t, 16> trf{};
  std::array<std::uint32_t, 32> trf_fp{};
  std::array<std::uint32_t, 16> grf{};
  bool halted = false;
  unsigned slot = 0;
  pft::ContextId context;

  std::uint32_t& tag(annot::RegId r) {
    if (r < annot::kTrfFpBase) return trf[r];
    if (r < annot::kGrfBase) return trf_fp[r - annot::kTrfFpBase];
    throw Error(ErrorCode::InvalidOperandRange, "register " + annot::reg_name(r) + " is not a tag register");
  }
  std::uint32_t& general(annot::RegId r) {
    if (!annot::is_grf(r)) throw Error(ErrorCode::InvalidOperandRange, "register " + std::to_string(r) + " is not a GRF register");
    return grf[r - annot::kGrfBase];
  }

  friend bool operator==(const TmcState&, const TmcState&) = default;
};

struct Violation {
  unsigned slot = 0;
  pft::ContextId context;
  std::uint32_t block_address = 0;
  std::uint32_t annotation_index = 0;
  std::uint32_t checked_tag = 0;
  CheckKind check_kind = CheckKind::Src1;
  friend bool operator==(const Violation&, const Violation&) = default;
};

// Where the annotation being executed came from; copied into a Violation.
struct Site {
  std::uint32_t block_address = 0;
  std::uint32_t annotation_index = 0;
};

struct CheckOperands {
  std::optional<std::uint32_t> src1, src2, dst;
};

// A TCR bit fires when the inspected tag intersects the check mask.
inline std::optional<std::pair<CheckKind, std::uint32_t>> evaluate_checks(const PolicyRegisters& policy,
                                                                          InstrClass cls,
                                                                          const CheckOperands& ops) {
  const auto bits = tcr_checks(policy, cls);
  if ((bits & kCheckSrc1) && ops.src1 && (*ops.src1 & policy.check_mask)) return std::pair{CheckKind::Src1, *ops.src1};
  if ((bits & kCheckSrc2) && ops.src2 && (*ops.src2 & policy.check_mask)) return std::pair{CheckKind::Src2, *ops.src2};
  if ((bits & kCheckDst) && ops.dst && (*ops.dst & policy.check_mask)) return std::pair{CheckKind::Dst, *ops.dst};
  return std::nullopt;
}

enum class GrfOp : std::uint8_t { Set, Add, Sub };

inline void grf_op(TmcState& s, GrfOp op, annot::RegId dst, annot::RegId src, std::int32_t imm) {
  auto& d = s.general(dst);
  switch (op) {
    case GrfOp::Set: d = static_cast<std::uint32_t>(imm); break;
    case GrfOp::Add: d = s.general(src) + static_cast<std::uint32_t>(imm); break;
    case GrfOp::Sub: d = s.general(src) - static_cast<std::uint32_t>(imm); break;
  }
}

inline std::optional<Violation> execute_annotation(TmcState& s, const annot::Annotation& a,
                                                   const PolicyRegisters& policy, TmcFifos& fifos,
                                                   tagmem::TaggedSpace& space, Site site = {}) {
  using annot::Opcode;
  if (s.halted) throw Error(ErrorCode::HaltedState, "TMC unit for slot " + std::to_string(s.slot) + " halted after a violation");
  const std::uint32_t mask = policy.mask();
  const PropagationRule rule =
      annot::is_compile_time(a.opcode) ? PropagationRule(a.sub) : tpr_rule(policy, a.cls);
  const auto imm = static_cast<std::uint32_t>(a.imm);
  CheckOperands ops;

  auto store_to = [&](std::uint32_t addr) {
    const std::uint32_t value = s.tag(a.src1);
    const std::uint32_t base = s.tag(a.src2);
    auto loc = tagmem::translate(space.tmmu, addr);
    const std::uint32_t next = apply_rule(rule, value, base, space.mem.at(loc)) & mask;
    space.mem.at(loc) = next;
    ops = {value, base, next};
  };
  auto load_from = [&](std::uint32_t addr) {
    const std::uint32_t mem = tagmem::read_tag(space, addr);
    const std::uint32_t base = s.tag(a.src2);
    auto& dst = s.tag(a.dst);
    dst = apply_rule(rule, mem, base, dst) & mask;
    ops = {std::nullopt, base, dst};
  };

  switch (a.opcode) {
    case Opcode::TagRImm: s.tag(a.dst) = imm & mask; break;
    case Opcode::TagRR: s.tag(a.dst) = s.tag(a.src1) & mask; break;
    case Opcode::TagMR: tagmem::write_tag(space, s.general(a.src1), s.tag(a.dst) & mask); break;
    case Opcode::TagRRR:
    case Opcode::TagRRR2: {
      const std::uint32_t x = s.tag(a.src1), y = s.tag(a.src2);
      auto& dst = s.tag(a.dst);
      dst = apply_rule(rule, x, y, dst) & mask;
      ops = {x, y, dst};
      break;
    }
    case Opcode::TagMTR:
    case Opcode::TagMTR2: store_to(s.general(a.dst) + imm); break;
    case Opcode::TagTRM:
    case Opcode::TagTRM2: load_from(s.general(a.src1) + imm); break;
    case Opcode::TagITR:
    case Opcode::TagITR2: store_to(fifos.instrumentation.pop() + imm); break;
    case Opcode::TagTRI:
    case Opcode::TagTRI2: load_from(fifos.instrumentation.pop() + imm); break;
    case Opcode::TagKTR: fifos.pl2ps.push(s.tag(a.src1)); break;
    case Opcode::TagTRK: s.tag(a.dst) = tagmem::read_tag(space, fifos.ps2pl.pop()) & mask; break;
    case Opcode::General:
      switch (annot::GeneralOp(a.sub)) {
        case annot::GeneralOp::Set: grf_op(s, GrfOp::Set, a.dst, a.src1, a.imm); break;
        case annot::GeneralOp::Add: grf_op(s, GrfOp::Add, a.dst, a.src1, a.imm); break;
        case annot::GeneralOp::Sub: grf_op(s, GrfOp::Sub, a.dst, a.src1, a.imm); break;
        case annot::GeneralOp::KernelRead:
        case annot::GeneralOp::KernelWrite:
          throw Error(ErrorCode::InvalidOperandRange, "kernel markers are serviced by the dispatcher");
      }
      break;
  }

  if (!annot::is_checked(a)) return std::nullopt;
  if (auto hit = evaluate_checks(policy, a.cls, ops)) {
    s.halted = true;
    return Violation{s.slot, s.context, site.block_address, site.annotation_index, hit->second, hit->first};
  }
  return std::nullopt;
}

}  // namespace offdift::tmc
