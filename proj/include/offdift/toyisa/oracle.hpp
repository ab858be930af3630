#pragma once

// Reference taint interpreter. It follows the architectural execution
// directly: registers, memory words and files carry tags, memory accesses
// use the real effective addresses, and the policy's rules and checks are
// applied per instruction. No trace, annotations or FIFOs are involved.
//
// Units mirror the coprocessor's: one per thread, or one per policy over a
// single thread. A unit that detects a violation freezes its tags; files it
// writes afterwards still receive the fold of its frozen memory.

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "offdift/dispatch.hpp"
#include "offdift/policy.hpp"
#include "offdift/report.hpp"
#include "offdift/toyisa/machine.hpp"

namespace offdift::toyisa {

struct OracleConfig {
  dispatch::DispatchMode mode = dispatch::DispatchMode::PerThread;
  std::vector<PolicyRegisters> policies;
  // When false, instructions in library functions move no tags.
  bool library_code = true;
};

namespace oracle_detail {

struct UnitState {
  unsigned index = 0;
  unsigned slot = 0;
  unsigned policy = 0;
  pft::ContextId ctx;
  bool halted = false;
  std::array<std::uint32_t, 16> r{};
  std::array<std::uint32_t, 32> s{};
  std::map<std::uint32_t, std::uint32_t> mem;  // word address -> tag

  std::uint32_t mem_tag(std::uint32_t a) const {
    auto it = mem.find(a & ~3u);
    return it == mem.end() ? 0 : it->second;
  }
  void set_mem(std::uint32_t a, std::uint32_t t) {
    if (t) mem[a & ~3u] = t;
    else mem.erase(a & ~3u);
  }
};

// Word addresses overlapping [buf, buf + count).
inline std::vector<std::uint32_t> words(std::uint32_t buf, std::uint32_t count) {
  std::vector<std::uint32_t> out;
  if (count == 0) return out;
  for (std::uint64_t a = buf & ~3u; a < std::uint64_t(buf) + count; a += 4) out.push_back(static_cast<std::uint32_t>(a));
  return out;
}

class Oracle final : public ExecutionObserver {
 public:
  Oracle(const OracleConfig& cfg, const std::vector<Thread>& threads) : cfg_(cfg) {
    if (cfg.policies.empty()) throw Error(ErrorCode::InvalidConfig, "at least one policy required");
    for (const auto& p : cfg.policies) offdift::validate(p);
    if (cfg.mode == dispatch::DispatchMode::PerThread) {
      if (cfg.policies.size() != 1 && cfg.policies.size() != threads.size())
        throw Error(ErrorCode::InvalidConfig, "PerThread needs one shared policy or one per thread");
      for (unsigned i = 0; i < threads.size(); ++i) add_unit(i, cfg.policies.size() == 1 ? 0 : i, threads[i]);
    } else {
      if (threads.size() != 1) throw Error(ErrorCode::TooManySlots, "MultiPolicy mode follows a single thread");
      for (unsigned i = 0; i < cfg.policies.size(); ++i) add_unit(i, i, threads[0]);
    }
  }

  void on_switch(unsigned, const Thread&) override {}
  void on_block(unsigned, const Thread&) override {}

  void on_retire(unsigned thread, const Thread& t, const Effect& e) override {
    if (std::holds_alternative<SysWrite>(*e.instr)) return;  // handled in on_write
    for (auto* u : units_of(thread))
      if (!u->halted) apply(*u, t, e);
  }

  std::uint32_t on_write(unsigned thread, const Thread&, const Effect& e) override {
    std::optional<std::uint32_t> reply;
    for (auto* u : units_of(thread)) {
      std::uint32_t fold = 0;
      for (auto a : words(e.buf, e.count)) fold |= u->mem_tag(a);
      if (!reply) reply = fold;
      if (!u->halted) check(*u, e, InstrClass::LoadStore, fold, std::nullopt, std::nullopt);
    }
    return *reply;
  }

  report::Report report(const SimFileSystem& fs) const {
    report::Report r;
    r.source = "oracle";
    r.mode = cfg_.mode;
    for (const auto& u : units_) {
      report::UnitTags t;
      t.unit = u.index;
      t.slot = u.slot;
      t.policy = u.policy;
      t.ctx = u.ctx;
      t.halted = u.halted;
      t.trf = u.r;
      t.trf_fp = u.s;
      t.mem = u.mem;
      r.units.push_back(std::move(t));
    }
    r.violations = violations_;
    r.files = file_tags(fs);
    return r;
  }

 private:
  void add_unit(unsigned index, unsigned policy, const Thread& t) {
    UnitState u;
    u.index = index;
    u.slot = cfg_.mode == dispatch::DispatchMode::PerThread ? index : 0;
    u.policy = policy;
    u.ctx = t.ctx;
    const auto mask = cfg_.policies[policy].mask();
    for (const auto& [a, tag] : t.program->seed_tags) u.set_mem(a, tag & mask);
    units_.push_back(std::move(u));
  }

  std::vector<UnitState*> units_of(unsigned thread) {
    std::vector<UnitState*> out;
    if (cfg_.mode == dispatch::DispatchMode::PerThread) out.push_back(&units_[thread]);
    else
      for (auto& u : units_) out.push_back(&u);
    return out;
  }

  void check(UnitState& u, const Effect& e, InstrClass cls, std::optional<std::uint32_t> src1,
             std::optional<std::uint32_t> src2, std::optional<std::uint32_t> dst) {
    const auto& p = cfg_.policies[u.policy];
    const auto bits = tcr_checks(p, cls);
    auto fires = [&](std::uint8_t bit, std::optional<std::uint32_t> v) {
      return (bits & bit) && v && (*v & p.check_mask);
    };
    std::optional<std::pair<tmc::CheckKind, std::uint32_t>> hit;
    if (fires(kCheckSrc1, src1)) hit = {tmc::CheckKind::Src1, *src1};
    else if (fires(kCheckSrc2, src2)) hit = {tmc::CheckKind::Src2, *src2};
    else if (fires(kCheckDst, dst)) hit = {tmc::CheckKind::Dst, *dst};
    if (!hit) return;
    u.halted = true;
    violations_.push_back(report::ViolationRecord{u.index, u.slot, u.ctx, e.block, hit->first, hit->second, {}, e.pc});
  }

  void apply(UnitState& u, const Thread& t, const Effect& e) {
    const auto& p = cfg_.policies[u.policy];
    const auto mask = p.mask();
    if (const auto* r = std::get_if<SysRead>(e.instr)) {
      (void)r;
      for (auto a : words(e.buf, e.count)) u.set_mem(a, e.file_tag & mask);
      return;
    }
    if (e.library && !cfg_.library_code) return;
    auto rule = [&](InstrClass c) { return tpr_rule(p, c); };
    auto rtag = [&](unsigned reg) { return reg == kPc ? 0u : u.r[reg]; };
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, MovImm>) u.r[x.rd] = 0;
          else if constexpr (std::is_same_v<T, MovReg>) u.r[x.rd] = rtag(x.rn) & mask;
          else if constexpr (std::is_same_v<T, FMov>) u.s[x.sd] = u.s[x.sn] & mask;
          else if constexpr (std::is_same_v<T, Call>) u.r[kLr] = 0;
          else if constexpr (std::is_same_v<T, Alu>) {
            const auto a = rtag(x.rn), b = x.has_imm ? 0u : rtag(x.rm);
            u.r[x.rd] = apply_rule(rule(InstrClass::ArithLogic), a, b, u.r[x.rd]) & mask;
            check(u, e, InstrClass::ArithLogic, a, b, u.r[x.rd]);
          } else if constexpr (std::is_same_v<T, FAlu>) {
            const auto a = u.s[x.sn], b = u.s[x.sm];
            u.s[x.sd] = apply_rule(rule(InstrClass::FpLoadStore), a, b, u.s[x.sd]) & mask;
            check(u, e, InstrClass::FpLoadStore, a, b, u.s[x.sd]);
          } else if constexpr (std::is_same_v<T, Mem>) {
            const auto cls = x.fp ? InstrClass::FpLoadStore : InstrClass::LoadStore;
            const auto ea = *e.address;
            const auto base = rtag(x.base);
            auto& reg = x.fp ? u.s[x.rt] : u.r[x.rt];
            if (x.store) {
              const auto value = reg;
              const auto next = apply_rule(rule(cls), value, base, u.mem_tag(ea)) & mask;
              u.set_mem(ea, next);
              check(u, e, cls, value, base, next);
            } else {
              reg = apply_rule(rule(cls), u.mem_tag(ea), base, reg) & mask;
              check(u, e, cls, std::nullopt, base, reg);
            }
          }
        },
        *e.instr);
    (void)t;
  }

  const OracleConfig& cfg_;
  std::vector<UnitState> units_;
  std::vector<report::ViolationRecord> violations_;
};

}  // namespace oracle_detail

struct OracleResult {
  report::Report report;
  SimFileSystem fs;
  std::vector<ThreadState> final_states;
};

// Programs are the ones actually executed (instrumented or not; the
// instrumentation stores move no tags).
inline OracleResult oracle_taint(const std::vector<const ToyProgram*>& programs,
                                 const std::vector<pft::ContextId>& ctxs, const ExecOptions& opts,
                                 SimFileSystem fs, const OracleConfig& cfg) {
  if (programs.size() != ctxs.size()) throw Error(ErrorCode::InvalidConfig, "one context per program required");
  std::vector<Thread> threads;
  for (std::size_t i = 0; i < programs.size(); ++i) threads.push_back(load_thread(*programs[i], ctxs[i]));
  oracle_detail::Oracle o(cfg, threads);
  run_threads(threads, opts, fs, o);
  OracleResult r;
  r.report = o.report(fs);
  r.fs = std::move(fs);
  for (auto& t : threads) r.final_states.push_back(std::move(t.state));
  return r;
}

}  // namespace offdift::toyisa
