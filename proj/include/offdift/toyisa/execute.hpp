#pragma once

// Trace-producing executor. Runs 1-4 instrumented programs under the shared
// scheduler and turns their execution into the three streams the
// coprocessor consumes: PFT bytes, instrumentation values and kernel
// messages. Each item is also appended to a totally ordered EventStream.

#include <cstdint>
#include <string>
#include <vector>

#include "offdift/dispatch.hpp"
#include "offdift/pft.hpp"
#include "offdift/toyisa/machine.hpp"

namespace offdift::toyisa {

// Receiver of the streams, in program order.
class KernelPort {
 public:
  virtual ~KernelPort() = default;
  virtual void trace(std::span<const std::uint8_t> bytes) = 0;
  virtual void instrumentation(pft::ContextId ctx, std::uint32_t value) = 0;
  virtual void read(const dispatch::ReadMsg& m) = 0;
  // Returns the tag the kernel stores on the written file.
  virtual std::uint32_t write(const dispatch::WriteMsg& m) = 0;
};

// Discards everything; written files become untagged.
class NullPort final : public KernelPort {
 public:
  void trace(std::span<const std::uint8_t>) override {}
  void instrumentation(pft::ContextId, std::uint32_t) override {}
  void read(const dispatch::ReadMsg&) override {}
  std::uint32_t write(const dispatch::WriteMsg&) override { return 0; }
};

struct EventStream {
  std::vector<std::uint8_t> trace;      // complete PFT byte stream
  std::vector<dispatch::Event> events;  // one Trace event per block entry
};

struct ExecResult {
  EventStream stream;
  std::vector<ThreadState> final_states;
  SimFileSystem fs;
  std::uint64_t instructions = 0;
};

namespace execute_detail {

class Emitter final : public ExecutionObserver {
 public:
  Emitter(KernelPort& port, EventStream& out) : port_(port), out_(out) {
    packet(pft::ASync{}, nullptr);
  }

  void on_switch(unsigned, const Thread& t) override { packet(pft::ISync{t.state.pc, t.ctx}, &t); }
  void on_block(unsigned, const Thread& t) override { packet(pft::BranchAddr{t.state.pc}, &t); }

  void on_retire(unsigned, const Thread& t, const Effect& e) override {
    ++instructions;
    using dispatch::Event;
    if (std::holds_alternative<InstrEmit>(*e.instr)) {
      out_.events.push_back(Event{Event::Kind::Instrumentation, t.ctx, e.emit_value, {}});
      port_.instrumentation(t.ctx, e.emit_value);
    } else if (std::holds_alternative<SysRead>(*e.instr)) {
      const dispatch::ReadMsg m{e.file_tag, e.buf, e.count, t.ctx};
      out_.events.push_back(Event{Event::Kind::Kernel, t.ctx, 0, m});
      port_.read(m);
    }
  }

  std::uint32_t on_write(unsigned, const Thread& t, const Effect& e) override {
    using dispatch::Event;
    const dispatch::WriteMsg m{e.buf, e.count, t.ctx};
    out_.events.push_back(Event{Event::Kind::Kernel, t.ctx, 0, m});
    return port_.write(m);
  }

  std::uint64_t instructions = 0;

 private:
  void packet(const pft::TracePacket& p, const Thread* t) {
    std::string bytes;
    pft::append_packet(bytes, p);
    const auto first = out_.trace.size();
    out_.trace.insert(out_.trace.end(), bytes.begin(), bytes.end());
    if (t) out_.events.push_back(dispatch::Event{dispatch::Event::Kind::Trace, t->ctx, t->state.pc, {}});
    port_.trace(std::span(out_.trace).subspan(first));
  }

  KernelPort& port_;
  EventStream& out_;
};

}  // namespace execute_detail

inline void check_contexts(const std::vector<pft::ContextId>& ctxs) {
  if (ctxs.empty() || ctxs.size() > pft::kMaxSlots)
    throw Error(ErrorCode::InvalidConfig, "between 1 and 4 programs required");
  for (std::size_t i = 0; i < ctxs.size(); ++i)
    for (std::size_t j = i + 1; j < ctxs.size(); ++j)
      if (ctxs[i] == ctxs[j]) throw Error(ErrorCode::InvalidConfig, "duplicate context " + pft::to_string(ctxs[i]));
}

// Programs must already be instrumented and laid out. `fs` is copied; the
// result carries its final contents.
inline ExecResult execute(const std::vector<const ToyProgram*>& programs, const std::vector<pft::ContextId>& ctxs,
                          const ExecOptions& opts, SimFileSystem fs, KernelPort& port) {
  if (programs.size() != ctxs.size()) throw Error(ErrorCode::InvalidConfig, "one context per program required");
  check_contexts(ctxs);
  std::vector<Thread> threads;
  for (std::size_t i = 0; i < programs.size(); ++i) threads.push_back(load_thread(*programs[i], ctxs[i]));
  ExecResult r;
  execute_detail::Emitter em(port, r.stream);
  run_threads(threads, opts, fs, em);
  for (auto& t : threads) r.final_states.push_back(std::move(t.state));
  r.fs = std::move(fs);
  r.instructions = em.instructions;
  return r;
}

}  // namespace offdift::toyisa
