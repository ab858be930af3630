#pragma once

// End-to-end runs. A Scenario names the original programs, their contexts,
// the strategy, policies and file system. prepare() instruments and analyzes
// the programs; run_pipeline() executes them while streaming the trace
// through the PFT decoder into the dispatcher; run_oracle() executes the same
// programs under the reference interpreter.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "offdift/annot.hpp"
#include "offdift/dispatch.hpp"
#include "offdift/pft.hpp"
#include "offdift/report.hpp"
#include "offdift/toyisa/analyze.hpp"
#include "offdift/toyisa/execute.hpp"
#include "offdift/toyisa/instrument.hpp"
#include "offdift/toyisa/oracle.hpp"

namespace offdift {

struct Scenario {
  std::vector<toyisa::ToyProgram> programs;  // uninstrumented
  std::vector<pft::ContextId> contexts;
  std::vector<PolicyRegisters> policies;
  toyisa::Strategy strategy = toyisa::Strategy::S1;
  PolicyMode mode = PolicyMode::Runtime;
  dispatch::DispatchMode dispatch = dispatch::DispatchMode::PerThread;
  unsigned quantum = 1;
  toyisa::SimFileSystem fs;
  bool library_code = true;
  std::uint64_t max_steps = 1'000'000;
  // Replaces the analyzer's output when set.
  std::optional<annot::AnnotationStore> annotations;
};

struct Prepared {
  std::vector<toyisa::ToyProgram> programs;  // instrumented
  annot::AnnotationStore store;
  std::vector<dispatch::ContextLoad> loads;
  dispatch::DispatchConfig config;

  std::vector<const toyisa::ToyProgram*> pointers() const {
    std::vector<const toyisa::ToyProgram*> out;
    for (const auto& p : programs) out.push_back(&p);
    return out;
  }
};

inline void validate(const Scenario& s) {
  toyisa::check_contexts(s.contexts);
  if (s.programs.size() != s.contexts.size()) throw Error(ErrorCode::InvalidConfig, "one context per program required");
  if (s.quantum < 1) throw Error(ErrorCode::InvalidConfig, "quantum must be at least 1");
  if (s.policies.empty() || s.policies.size() > dispatch::kMaxUnits)
    throw Error(ErrorCode::InvalidConfig, "between 1 and 8 policies required");
  if (s.dispatch == dispatch::DispatchMode::MultiPolicy && s.programs.size() != 1)
    throw Error(ErrorCode::InvalidConfig, "multi-policy runs take exactly one program");
  // Compile-time annotations hard-code one set of rules for every unit.
  if (s.mode == PolicyMode::CompileTime)
    for (const auto& p : s.policies)
      if (p.tpr != s.policies[0].tpr)
        throw Error(ErrorCode::InvalidConfig, "compile-time mode requires every policy to share its TPR rules");
}

inline Prepared prepare(const Scenario& s) {
  validate(s);
  Prepared out;
  toyisa::AnalyzeOptions ao;
  ao.mode = s.mode;
  ao.strategy = s.strategy;
  ao.policy = s.policies[0];
  ao.library_code = s.library_code;
  for (std::size_t i = 0; i < s.programs.size(); ++i) {
    auto p = toyisa::instrument(s.programs[i], s.strategy, {s.library_code});
    if (!s.annotations) {
      // Programs share one annotation memory; overlapping code must agree.
      for (auto& [addr, block] : toyisa::analyze(p, ao)) {
        auto [it, fresh] = out.store.emplace(addr, block);
        if (!fresh && it->second != block)
          throw Error(ErrorCode::InvalidConfig, "programs place different code at " + hex32(addr));
      }
    }
    dispatch::ContextLoad load;
    load.ctx = s.contexts[i];
    load.vpns = p.mapped_vpns();
    load.grf = toyisa::initial_grf(p);
    load.seed_tags = p.seed_tags;
    out.loads.push_back(std::move(load));
    out.programs.push_back(std::move(p));
  }
  if (s.annotations) out.store = *s.annotations;
  out.config.mode = s.dispatch;
  out.config.policies = s.policies;
  out.config.tmc_count = static_cast<unsigned>(s.dispatch == dispatch::DispatchMode::PerThread ? s.programs.size()
                                                                                                : s.policies.size());
  dispatch::validate(out.config);
  return out;
}

// Streams executor output into the decoder and dispatcher as it is produced.
class PipelinePort final : public toyisa::KernelPort {
 public:
  PipelinePort(const annot::AnnotationStore& store, const dispatch::DispatchConfig& config,
               std::vector<dispatch::ContextLoad> loads)
      : dispatcher_(store, config, std::move(loads), decoder_.slots()) {}

  void trace(std::span<const std::uint8_t> bytes) override {
    decoder_.feed(bytes, [&](pft::DecodedEntry e) {
      entries_.push_back(e);
      dispatcher_.on_entry(e);
    });
  }
  void instrumentation(pft::ContextId ctx, std::uint32_t value) override { dispatcher_.on_instrumentation(slot(ctx), value); }
  void read(const dispatch::ReadMsg& m) override { dispatcher_.on_kernel(slot(m.ctx), m); }
  std::uint32_t write(const dispatch::WriteMsg& m) override {
    auto reply = dispatcher_.on_kernel(slot(m.ctx), m);
    if (!reply) throw Error(ErrorCode::StreamDesync, "write message produced no reply");
    return *reply;
  }

  dispatch::RunReport finish() {
    decoder_.finish();
    return dispatcher_.finish();
  }
  const std::vector<pft::DecodedEntry>& entries() const { return entries_; }
  const pft::SlotTable& slots() const { return decoder_.slots(); }

 private:
  unsigned slot(pft::ContextId ctx) const {
    auto s = decoder_.slots().find(ctx);
    if (!s) throw Error(ErrorCode::StreamDesync, "data for " + pft::to_string(ctx) + " before its sync packet");
    return *s;
  }

  pft::StreamDecoder decoder_;
  dispatch::Dispatcher dispatcher_;
  std::vector<pft::DecodedEntry> entries_;
};

struct PipelineResult {
  Prepared prepared;
  toyisa::ExecResult exec;
  std::vector<pft::DecodedEntry> entries;
  pft::SlotTable slots;
  dispatch::RunReport run;
  report::Report report;
};

inline toyisa::ExecOptions exec_options(const Scenario& s) { return toyisa::ExecOptions{s.quantum, s.max_steps}; }

inline PipelineResult run_pipeline(const Scenario& s) {
  PipelineResult r;
  r.prepared = prepare(s);
  PipelinePort port(r.prepared.store, r.prepared.config, r.prepared.loads);
  r.exec = toyisa::execute(r.prepared.pointers(), s.contexts, exec_options(s), s.fs, port);
  r.run = port.finish();
  r.entries = port.entries();
  r.slots = port.slots();
  r.report = report::from_run(r.run, toyisa::file_tags(r.exec.fs));
  return r;
}

inline toyisa::OracleConfig oracle_config(const Scenario& s) {
  return toyisa::OracleConfig{s.dispatch, s.policies, s.library_code};
}

// `full_tracking` ignores the scenario's library setting, giving the verdict
// a fully instrumented system would reach.
inline toyisa::OracleResult run_oracle(const Scenario& s, bool full_tracking = false) {
  validate(s);
  auto cfg = oracle_config(s);
  if (full_tracking) cfg.library_code = true;
  // Same binaries as the pipeline, so block addresses and interleaving match.
  std::vector<toyisa::ToyProgram> laid;
  for (const auto& p : s.programs) laid.push_back(toyisa::instrument(p, s.strategy, {s.library_code}));
  std::vector<const toyisa::ToyProgram*> ptrs;
  for (const auto& p : laid) ptrs.push_back(&p);
  return toyisa::oracle_taint(ptrs, s.contexts, exec_options(s), s.fs, cfg);
}

}  // namespace offdift
