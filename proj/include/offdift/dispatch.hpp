#pragma once

// Dispatcher: consumes decoded trace entries, fetches each block's
// annotations, and drives one TMC unit per thread slot (PerThread) or one
// unit per security policy over the slot-0 stream (MultiPolicy). It also
// services the instrumentation FIFO and the kernel file-tag protocol.
//
// Annotations run eagerly. A unit stalls only on an annotation whose data
// has not arrived yet (instrumentation address or kernel message) and
// resumes when the data is delivered.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "offdift/annot.hpp"
#include "offdift/fifo.hpp"
#include "offdift/pft.hpp"
#include "offdift/policy.hpp"
#include "offdift/tagmem.hpp"
#include "offdift/tmc.hpp"

namespace offdift::dispatch {

enum class DispatchMode : std::uint8_t { PerThread, MultiPolicy };
inline constexpr unsigned kMaxUnits = 8;

struct DispatchConfig {
  DispatchMode mode = DispatchMode::PerThread;
  std::vector<PolicyRegisters> policies;
  unsigned tmc_count = 1;
};

struct ReadMsg {
  std::uint32_t file_tag = 0;
  std::uint32_t buf_vaddr = 0;
  std::uint32_t count_bytes = 0;
  pft::ContextId ctx;
  friend bool operator==(const ReadMsg&, const ReadMsg&) = default;
};

struct WriteMsg {
  std::uint32_t buf_vaddr = 0;
  std::uint32_t count_bytes = 0;
  pft::ContextId ctx;
  friend bool operator==(const WriteMsg&, const WriteMsg&) = default;
};

using KernelMessage = std::variant<ReadMsg, WriteMsg>;

inline pft::ContextId message_context(const KernelMessage& m) {
  return std::visit([](const auto& x) { return x.ctx; }, m);
}

// What the loader hands the coprocessor for one context before it runs:
// process mappings, initial GRF contents and seeded memory tags.
struct ContextLoad {
  pft::ContextId ctx;
  std::vector<std::uint32_t> vpns;
  std::array<std::uint32_t, 16> grf{};
  std::map<std::uint32_t, std::uint32_t> seed_tags;
};

struct Event {
  enum class Kind : std::uint8_t { Trace, Instrumentation, Kernel };
  Kind kind = Kind::Trace;
  pft::ContextId ctx;
  std::uint32_t value = 0;
  KernelMessage message;
};

struct KernelRecord {
  unsigned unit = 0;
  pft::ContextId ctx;
  bool is_write = false;
  std::uint32_t tag = 0;  // file tag for reads, reply for writes
  std::uint32_t buf_vaddr = 0;
  std::uint32_t count_bytes = 0;
  std::uint64_t blocks_dispatched = 0;      // unit's blocks fetched when serviced
  std::uint64_t annotations_executed = 0;   // unit's annotations retired when serviced
  bool serviced_halted = false;
};

struct FifoStats {
  std::size_t instrumentation = 0;
  std::size_t ps2pl = 0;
  std::size_t pl2ps = 0;
  friend bool operator==(const FifoStats&, const FifoStats&) = default;
};

struct UnitReport {
  unsigned index = 0;
  unsigned policy_index = 0;
  bool bound = false;
  tmc::TmcState state;
  std::map<std::uint32_t, std::uint32_t> mem_tags;
  FifoStats high_water;
  std::uint64_t blocks_dispatched = 0;
  std::uint64_t annotations_executed = 0;
  std::uint64_t instrumentation_pops = 0;
};

struct UnitViolation {
  unsigned unit = 0;
  tmc::Violation violation;
};

struct RunReport {
  DispatchMode mode = DispatchMode::PerThread;
  std::vector<UnitReport> units;
  std::vector<UnitViolation> violations;
  std::vector<KernelRecord> kernel_log;
};

inline void validate(const DispatchConfig& c) {
  if (c.tmc_count < 1 || c.tmc_count > kMaxUnits)
    throw Error(ErrorCode::InvalidConfig, "tmc_count " + std::to_string(c.tmc_count) + " outside 1..8");
  if (c.policies.empty() || c.policies.size() > kMaxUnits)
    throw Error(ErrorCode::InvalidConfig, "between 1 and 8 policies required");
  if (c.mode == DispatchMode::MultiPolicy && c.policies.size() != c.tmc_count)
    throw Error(ErrorCode::InvalidConfig, "MultiPolicy needs one policy per TMC unit");
  if (c.mode == DispatchMode::PerThread && c.policies.size() != 1 && c.policies.size() != c.tmc_count)
    throw Error(ErrorCode::InvalidConfig, "PerThread needs one shared policy or one per unit");
  for (const auto& p : c.policies) offdift::validate(p);
}

// Writes the file tag over every word the read buffer overlaps. The whole
// range is translated before any word changes.
inline void handle_read_msg(const ReadMsg& m, tagmem::TaggedSpace& space, const PolicyRegisters& policy) {
  tagmem::write_tag_range(space, m.buf_vaddr, m.count_bytes, m.file_tag & policy.mask());
}

// OR-fold of the buffer's tags, pushed to PL2PS for the kernel.
inline std::uint32_t handle_write_msg(const WriteMsg& m, const tagmem::TaggedSpace& space, TmcFifos& fifos) {
  const std::uint32_t tag = tagmem::fold_tag_range(space, m.buf_vaddr, m.count_bytes);
  fifos.pl2ps.push(tag);
  return tag;
}

class Dispatcher {
 public:
  Dispatcher(const annot::AnnotationStore& store, DispatchConfig config, std::vector<ContextLoad> loads,
             const pft::SlotTable& slots)
      : store_(store), config_(std::move(config)), loads_(std::move(loads)), slots_(slots) {
    validate(config_);
    units_.resize(config_.tmc_count);
    for (unsigned i = 0; i < config_.tmc_count; ++i) {
      units_[i].index = i;
      units_[i].policy_index = config_.policies.size() == 1 ? 0 : i;
    }
  }

  void on_entry(pft::DecodedEntry e) {
    const unsigned slot = pft::entry_slot(e);
    const std::uint32_t addr = pft::entry_address(e);
    const auto& block = annot::lookup_block(store_, addr);
    for (Unit* u : units_for_slot(slot)) {
      ++u->blocks;
      if (u->state.halted) continue;
      for (std::uint32_t i = 0; i < block.size(); ++i) u->pending.push_back(Pending{&block[i], addr, i});
      run(*u);
    }
  }

  void on_instrumentation(unsigned slot, std::uint32_t value) {
    for (Unit* u : units_for_slot(slot)) {
      if (u->state.halted) continue;
      u->fifos.instrumentation.push(value);
      run(*u);
    }
  }

  // Services a kernel message; for writes returns the tag the kernel should
  // store on the file.
  std::optional<std::uint32_t> on_kernel(unsigned slot, const KernelMessage& msg) {
    auto targets = units_for_slot(slot);
    std::optional<std::uint32_t> reply;
    for (Unit* u : targets) {
      const bool replying = u == targets.front();
      if (u->state.halted) {
        KernelRecord rec = record(*u, msg);
        rec.serviced_halted = true;
        if (auto* w = std::get_if<WriteMsg>(&msg)) {
          rec.tag = tagmem::fold_tag_range(u->space, w->buf_vaddr, w->count_bytes);
          if (replying) reply = rec.tag;
        }
        log_.push_back(rec);
        continue;
      }
      if (auto* r = std::get_if<ReadMsg>(&msg)) {
        u->fifos.ps2pl.push(r->file_tag);
        u->fifos.ps2pl.push(r->buf_vaddr);
        u->fifos.ps2pl.push(r->count_bytes);
      } else {
        const auto& w = std::get<WriteMsg>(msg);
        u->fifos.ps2pl.push(w.buf_vaddr);
        u->fifos.ps2pl.push(w.count_bytes);
      }
      u->inbox.push_back(msg);
      run(*u);
      if (!u->inbox.empty())
        throw Error(ErrorCode::StreamDesync, "kernel message for slot " + std::to_string(slot) +
                                                 " arrived before its marker annotation");
      if (std::holds_alternative<WriteMsg>(msg)) {
        const auto tag = u->fifos.pl2ps.pop();
        if (replying) reply = tag;
      }
    }
    return reply;
  }

  // Every bound unit must have drained its annotations and FIFOs.
  RunReport finish() {
    RunReport rep;
    rep.mode = config_.mode;
    for (auto& u : units_) {
      if (u.bound && !u.state.halted &&
          (!u.pending.empty() || !u.fifos.instrumentation.empty() || !u.fifos.ps2pl.empty() || !u.inbox.empty()))
        throw Error(ErrorCode::StreamDesync,
                    "unit " + std::to_string(u.index) + " ended with " + std::to_string(u.pending.size()) +
                        " pending annotations and " + std::to_string(u.fifos.instrumentation.size()) +
                        " unused instrumentation values");
      UnitReport ur;
      ur.index = u.index;
      ur.policy_index = u.policy_index;
      ur.bound = u.bound;
      ur.state = u.state;
      if (u.bound) ur.mem_tags = tagmem::nonzero_tags(u.space);
      ur.high_water = {u.fifos.instrumentation.high_water(), u.fifos.ps2pl.high_water(), u.fifos.pl2ps.high_water()};
      ur.blocks_dispatched = u.blocks;
      ur.annotations_executed = u.executed;
      ur.instrumentation_pops = u.fifos.instrumentation.pops();
      rep.units.push_back(std::move(ur));
    }
    rep.violations = violations_;
    rep.kernel_log = log_;
    return rep;
  }

  const std::vector<UnitViolation>& violations() const { return violations_; }
  const std::vector<KernelRecord>& kernel_log() const { return log_; }

  // True when every unit serving `slot` is halted.
  bool slot_halted(unsigned slot) const {
    for (const auto& u : units_)
      if (u.bound && u.slot == slot && !u.state.halted) return false;
    return true;
  }

 private:
  struct Pending {
    const annot::Annotation* annotation;
    std::uint32_t block;
    std::uint32_t index;
  };

  struct Unit {
    unsigned index = 0;
    unsigned policy_index = 0;
    unsigned slot = 0;
    bool bound = false;
    tmc::TmcState state;
    TmcFifos fifos;
    tagmem::TaggedSpace space;
    std::deque<Pending> pending;
    std::deque<KernelMessage> inbox;
    std::uint64_t blocks = 0;
    std::uint64_t executed = 0;
  };

  const PolicyRegisters& policy(const Unit& u) const { return config_.policies[u.policy_index]; }

  void bind(Unit& u, unsigned slot) {
    if (slot >= slots_.size())
      throw Error(ErrorCode::StreamDesync, "slot " + std::to_string(slot) + " has no context");
    const pft::ContextId ctx = slots_[slot];
    const ContextLoad* load = nullptr;
    for (const auto& l : loads_)
      if (l.ctx == ctx) load = &l;
    if (!load) throw Error(ErrorCode::InvalidConfig, "no process mappings for context " + pft::to_string(ctx));
    u.bound = true;
    u.slot = slot;
    u.state.slot = slot;
    u.state.context = ctx;
    u.state.grf = load->grf;
    for (auto vpn : load->vpns) tagmem::register_mapping(u.space, vpn);
    for (const auto& [addr, tag] : load->seed_tags) tagmem::write_tag(u.space, addr, tag & policy(u).mask());
  }

  std::vector<Unit*> units_for_slot(unsigned slot) {
    std::vector<Unit*> out;
    if (config_.mode == DispatchMode::PerThread) {
      if (slot >= units_.size())
        throw Error(ErrorCode::TooManySlots,
                    "slot " + std::to_string(slot) + " but only " + std::to_string(units_.size()) + " TMC units");
      if (!units_[slot].bound) bind(units_[slot], slot);
      out.push_back(&units_[slot]);
    } else {
      if (slot != 0) throw Error(ErrorCode::TooManySlots, "MultiPolicy mode follows slot 0 only, got slot " + std::to_string(slot));
      for (auto& u : units_) {
        if (!u.bound) bind(u, 0);
        out.push_back(&u);
      }
    }
    return out;
  }

  KernelRecord record(const Unit& u, const KernelMessage& msg) const {
    KernelRecord rec;
    rec.unit = u.index;
    rec.ctx = message_context(msg);
    rec.blocks_dispatched = u.blocks;
    rec.annotations_executed = u.executed;
    if (auto* r = std::get_if<ReadMsg>(&msg)) {
      rec.tag = r->file_tag;
      rec.buf_vaddr = r->buf_vaddr;
      rec.count_bytes = r->count_bytes;
    } else {
      const auto& w = std::get<WriteMsg>(msg);
      rec.is_write = true;
      rec.buf_vaddr = w.buf_vaddr;
      rec.count_bytes = w.count_bytes;
    }
    return rec;
  }

  void halt(Unit& u, const tmc::Violation& v) {
    violations_.push_back(UnitViolation{u.index, v});
    u.state.halted = true;
    u.pending.clear();
    u.inbox.clear();
    while (!u.fifos.instrumentation.empty()) u.fifos.instrumentation.pop();
    while (!u.fifos.ps2pl.empty()) u.fifos.ps2pl.pop();
  }

  void service_kernel(Unit& u, const Pending& p) {
    using annot::GeneralOp;
    const auto op = GeneralOp(p.annotation->sub);
    const KernelMessage msg = u.inbox.front();
    u.inbox.pop_front();
    KernelRecord rec = record(u, msg);
    if (op == GeneralOp::KernelRead) {
      if (!std::holds_alternative<ReadMsg>(msg))
        throw Error(ErrorCode::StreamDesync, "read marker met a write message");
      ReadMsg m;
      m.file_tag = u.fifos.ps2pl.pop();
      m.buf_vaddr = u.fifos.ps2pl.pop();
      m.count_bytes = u.fifos.ps2pl.pop();
      m.ctx = rec.ctx;
      handle_read_msg(m, u.space, policy(u));
      log_.push_back(rec);
      return;
    }
    if (!std::holds_alternative<WriteMsg>(msg))
      throw Error(ErrorCode::StreamDesync, "write marker met a read message");
    WriteMsg m;
    m.buf_vaddr = u.fifos.ps2pl.pop();
    m.count_bytes = u.fifos.ps2pl.pop();
    m.ctx = rec.ctx;
    rec.tag = handle_write_msg(m, u.space, u.fifos);
    log_.push_back(rec);
    if (annot::is_checked(*p.annotation)) {
      tmc::CheckOperands ops{rec.tag, std::nullopt, std::nullopt};
      if (auto hit = tmc::evaluate_checks(policy(u), p.annotation->cls, ops))
        halt(u, tmc::Violation{u.slot, u.state.context, p.block, p.index, hit->second, hit->first});
    }
  }

  void run(Unit& u) {
    while (!u.pending.empty() && !u.state.halted) {
      const Pending p = u.pending.front();
      const auto& a = *p.annotation;
      if (annot::uses_instrumentation(a.opcode) && u.fifos.instrumentation.empty()) return;
      if (a.opcode == annot::Opcode::TagTRK && u.fifos.ps2pl.empty()) return;
      const bool kernel = a.opcode == annot::Opcode::General &&
                          (a.sub == std::uint8_t(annot::GeneralOp::KernelRead) ||
                           a.sub == std::uint8_t(annot::GeneralOp::KernelWrite));
      u.pending.pop_front();
      ++u.executed;
      if (kernel) {
        if (u.inbox.empty()) {
          u.pending.push_front(p);
          --u.executed;
          return;
        }
        service_kernel(u, p);
        continue;
      }
      if (auto v = tmc::execute_annotation(u.state, a, policy(u), u.fifos, u.space, tmc::Site{p.block, p.index}))
        halt(u, *v);
    }
  }

  const annot::AnnotationStore& store_;
  DispatchConfig config_;
  std::vector<ContextLoad> loads_;
  const pft::SlotTable& slots_;
  std::vector<Unit> units_;
  std::vector<UnitViolation> violations_;
  std::vector<KernelRecord> log_;
};

// Batch form: replays a recorded event stream against decoded entries.
inline RunReport run(std::span<const pft::DecodedEntry> entries, const pft::SlotTable& slots,
                     const annot::AnnotationStore& store, const DispatchConfig& config,
                     const std::vector<ContextLoad>& loads, std::span<const Event> events) {
  Dispatcher d(store, config, loads, slots);
  std::size_t next = 0;
  auto slot_of = [&](pft::ContextId c) {
    auto s = slots.find(c);
    if (!s) throw Error(ErrorCode::StreamDesync, "event for unknown context " + pft::to_string(c));
    return *s;
  };
  for (const auto& ev : events) {
    switch (ev.kind) {
      case Event::Kind::Trace:
        if (next >= entries.size()) throw Error(ErrorCode::StreamDesync, "event stream has more trace events than entries");
        d.on_entry(entries[next++]);
        break;
      case Event::Kind::Instrumentation: d.on_instrumentation(slot_of(ev.ctx), ev.value); break;
      case Event::Kind::Kernel: d.on_kernel(slot_of(ev.ctx), ev.message); break;
    }
  }
  if (next != entries.size()) throw Error(ErrorCode::StreamDesync, "decoded entries left unconsumed");
  return d.finish();
}

}  // namespace offdift::dispatch
