#pragma once

// Static analysis: one annotation group per instruction of each basic block.
// Memory accesses preceded by an instrumentation store read their address
// from the instrumentation FIFO; under S2 the remaining sp/fp/pc-relative
// accesses address tag memory through GRF registers G11/G13/G15, which the
// analysis keeps in step with every statically visible fp/sp update.

#include <cstdint>

#include "offdift/annot.hpp"
#include "offdift/policy.hpp"
#include "offdift/toyisa/instrument.hpp"
#include "offdift/toyisa/program.hpp"

namespace offdift::toyisa {

struct AnalyzeOptions {
  PolicyMode mode = PolicyMode::Runtime;
  Strategy strategy = Strategy::S1;
  // Compile-time mode hard-codes this policy's TPR rules into the annotations.
  PolicyRegisters policy{};
  // When false, library functions keep only GRF and kernel bookkeeping;
  // their information flows go untracked.
  bool library_code = true;
};

namespace analyze_detail {

using annot::Annotation;
using annot::Opcode;

// Zero tag source for immediate operands: the pc tag is never written.
inline constexpr annot::RegId kZeroTag = annot::trf(kPc);

class Analyzer {
 public:
  explicit Analyzer(const AnalyzeOptions& o) : o_(o) {}

  std::vector<Annotation> block(const Block& b, bool track) {
    std::vector<Annotation> out;
    for (std::size_t i = 0; i < b.instrs.size(); ++i) {
      const bool emitted = i > 0 && std::holds_alternative<InstrEmit>(b.instrs[i - 1]);
      instr(b.instrs[i], b.address + 4 * static_cast<std::uint32_t>(i), emitted, track, out);
    }
    return out;
  }

 private:
  bool mirror() const { return o_.strategy == Strategy::S2; }
  bool runtime() const { return o_.mode == PolicyMode::Runtime; }

  Annotation classed(Opcode rt, Opcode ct, InstrClass cls) const {
    Annotation a;
    a.cls = cls;
    if (runtime()) {
      a.opcode = rt;
    } else {
      a.opcode = ct;
      a.sub = static_cast<std::uint8_t>(tpr_rule(o_.policy, cls));
    }
    return a;
  }

  static Annotation general(annot::GeneralOp op, annot::RegId dst = 0, annot::RegId src = 0, std::int32_t imm = 0) {
    Annotation a;
    a.opcode = Opcode::General;
    a.sub = static_cast<std::uint8_t>(op);
    a.dst = dst;
    a.src1 = src;
    a.imm = imm;
    return a;
  }

  [[noreturn]] static void dynamic(std::uint32_t pc, const std::string& what) {
    throw Error(ErrorCode::UninstrumentedDynamicAccess, what + " at " + hex32(pc));
  }

  static bool frame_reg(unsigned r) { return r == kSp || r == kFp; }

  void instr(const Instr& ins, std::uint32_t pc, bool emitted, bool track, std::vector<Annotation>& out) const {
    using annot::GeneralOp;
    using annot::grf;
    using annot::trf;
    using annot::trf_fp;
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, MovImm>) {
            if (track) out.push_back(Annotation{Opcode::TagRImm, InstrClass::ArithLogic, trf(x.rd), 0, 0, 0, 0});
            if (mirror() && frame_reg(x.rd))
              out.push_back(general(GeneralOp::Set, grf(x.rd), 0, static_cast<std::int32_t>(x.imm)));
          } else if constexpr (std::is_same_v<T, MovReg>) {
            if (track) out.push_back(Annotation{Opcode::TagRR, InstrClass::ArithLogic, trf(x.rd), trf(x.rn), 0, 0, 0});
            if (mirror() && frame_reg(x.rd)) {
              if (!frame_reg(x.rn)) dynamic(pc, "frame register loaded from " + reg_name(x.rn));
              out.push_back(general(GeneralOp::Add, grf(x.rd), grf(x.rn), 0));
            }
          } else if constexpr (std::is_same_v<T, Alu>) {
            if (track) {
              auto a = classed(Opcode::TagRRR, Opcode::TagRRR2, InstrClass::ArithLogic);
              a.dst = trf(x.rd);
              a.src1 = trf(x.rn);
              a.src2 = x.has_imm ? kZeroTag : trf(x.rm);
              out.push_back(a);
            }
            if (mirror() && frame_reg(x.rd)) {
              if (!x.has_imm || !frame_reg(x.rn) || (x.op != AluOp::Add && x.op != AluOp::Sub))
                dynamic(pc, "non-static update of " + reg_name(x.rd));
              out.push_back(general(x.op == AluOp::Add ? GeneralOp::Add : GeneralOp::Sub, grf(x.rd), grf(x.rn),
                                    static_cast<std::int32_t>(x.imm)));
            }
          } else if constexpr (std::is_same_v<T, FAlu>) {
            if (track) {
              auto a = classed(Opcode::TagRRR, Opcode::TagRRR2, InstrClass::FpLoadStore);
              a.dst = trf_fp(x.sd);
              a.src1 = trf_fp(x.sn);
              a.src2 = trf_fp(x.sm);
              out.push_back(a);
            }
          } else if constexpr (std::is_same_v<T, FMov>) {
            if (track) out.push_back(Annotation{Opcode::TagRR, InstrClass::ArithLogic, trf_fp(x.sd), trf_fp(x.sn), 0, 0, 0});
          } else if constexpr (std::is_same_v<T, Mem>) {
            mem(x, pc, emitted, track, out);
          } else if constexpr (std::is_same_v<T, Call>) {
            if (track) out.push_back(Annotation{Opcode::TagRImm, InstrClass::ArithLogic, trf(kLr), 0, 0, 0, 0});
          } else if constexpr (std::is_same_v<T, SysRead>) {
            out.push_back(general(GeneralOp::KernelRead));
          } else if constexpr (std::is_same_v<T, SysWrite>) {
            auto a = general(GeneralOp::KernelWrite);
            a.cls = InstrClass::LoadStore;
            out.push_back(a);
          }
        },
        ins);
  }

  void mem(const Mem& m, std::uint32_t pc, bool emitted, bool track, std::vector<Annotation>& out) const {
    using annot::grf;
    using annot::trf;
    const InstrClass cls = m.fp ? InstrClass::FpLoadStore : InstrClass::LoadStore;
    const annot::RegId value = m.fp ? annot::trf_fp(m.rt) : trf(m.rt);
    const bool loads_frame = !m.store && !m.fp && frame_reg(m.rt);
    if (mirror() && loads_frame) dynamic(pc, "frame register loaded from memory");

    if (emitted) {
      if (!track) return;
      // The emitted pc value is the instrumentation store's own address.
      const std::int32_t imm = m.offset + (m.base == kPc ? 4 : 0);
      Annotation a = m.store ? classed(Opcode::TagITR, Opcode::TagITR2, cls) : classed(Opcode::TagTRI, Opcode::TagTRI2, cls);
      if (m.store) a.src1 = value;
      else a.dst = value;
      a.src2 = trf(m.base);
      a.imm = imm;
      out.push_back(a);
      return;
    }
    if (o_.strategy != Strategy::S2 || !is_static_base(m.base)) {
      if (!track && !o_.library_code) return;
      dynamic(pc, "memory access through " + reg_name(m.base) + " without instrumentation");
    }
    if (!track) return;
    if (m.base == kPc) out.push_back(general(annot::GeneralOp::Set, grf(kPc), 0, static_cast<std::int32_t>(pc)));
    Annotation a = m.store ? classed(Opcode::TagMTR, Opcode::TagMTR2, cls) : classed(Opcode::TagTRM, Opcode::TagTRM2, cls);
    if (m.store) {
      a.dst = grf(m.base);
      a.src1 = value;
    } else {
      a.dst = value;
      a.src1 = grf(m.base);
    }
    a.src2 = trf(m.base);
    a.imm = m.offset;
    out.push_back(a);
  }

  const AnalyzeOptions& o_;
};

}  // namespace analyze_detail

inline annot::AnnotationStore analyze(const ToyProgram& p, const AnalyzeOptions& opts) {
  offdift::validate(opts.policy);
  analyze_detail::Analyzer an(opts);
  annot::AnnotationStore store;
  for (const auto& f : p.functions) {
    const bool track = !f.library || opts.library_code;
    for (const auto& b : f.blocks) store.emplace(b.address, an.block(b, track));
  }
  return store;
}

// GRF contents the loader installs: the frame-register mirrors.
inline std::array<std::uint32_t, 16> initial_grf(const ToyProgram& p) {
  std::array<std::uint32_t, 16> g{};
  g[kSp] = p.initial_sp;
  return g;
}

}  // namespace offdift::toyisa
