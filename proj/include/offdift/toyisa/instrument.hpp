#pragma once

// Instrumentation strategies and their cost metrics.
//   RelatedWork: every memory access instrumented, two instructions per site.
//   S1: every memory access instrumented, one store to [r9] per site.
//   S2: only accesses whose base is not sp, fp or pc.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "offdift/toyisa/program.hpp"

namespace offdift::toyisa {

enum class Strategy : std::uint8_t { RelatedWork, S1, S2 };

constexpr std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::RelatedWork: return "related";
    case Strategy::S1: return "s1";
    case Strategy::S2: return "s2";
  }
  return "?";
}

inline Strategy parse_strategy(std::string_view s) {
  if (s == "related") return Strategy::RelatedWork;
  if (s == "s1") return Strategy::S1;
  if (s == "s2") return Strategy::S2;
  throw Error(ErrorCode::ParseError, "unknown strategy '" + std::string(s) + "'");
}

constexpr bool is_static_base(unsigned base) { return base == kSp || base == kFp || base == kPc; }

inline bool needs_site(Strategy s, const Mem& m) { return s != Strategy::S2 || !is_static_base(m.base); }

struct InstrumentOptions {
  bool library_code = true;
};

inline ToyProgram instrument(const ToyProgram& original, Strategy strategy, InstrumentOptions opts = {}) {
  ToyProgram p = strip_instrumentation(original);
  for (auto& f : p.functions) {
    if (f.library && !opts.library_code) continue;
    for (auto& b : f.blocks) {
      std::vector<Instr> out;
      out.reserve(b.instrs.size());
      for (auto& i : b.instrs) {
        if (auto* m = std::get_if<Mem>(&i); m && needs_site(strategy, *m)) out.push_back(InstrEmit{m->base});
        out.push_back(std::move(i));
      }
      b.instrs = std::move(out);
    }
  }
  layout(p);
  return p;
}

inline unsigned count_sites(const ToyProgram& p, Strategy strategy, InstrumentOptions opts = {}) {
  unsigned n = 0;
  for (const auto& f : p.functions) {
    if (f.library && !opts.library_code) continue;
    for (const auto& b : f.blocks)
      for (const auto& i : b.instrs)
        if (auto* m = std::get_if<Mem>(&i); m && needs_site(strategy, *m)) ++n;
  }
  return n;
}

inline unsigned count_emits(const ToyProgram& p) {
  unsigned n = 0;
  for (const auto& f : p.functions)
    for (const auto& b : f.blocks)
      for (const auto& i : b.instrs) n += std::holds_alternative<InstrEmit>(i);
  return n;
}

struct StrategyMetrics {
  Strategy strategy = Strategy::S1;
  unsigned sites = 0;
  unsigned added_instructions = 0;
  std::uint32_t original_bytes = 0;
  std::uint32_t code_size_bytes = 0;
  // added_instructions * 4 / original_bytes, as a percentage.
  double overhead_percent = 0;
};

constexpr unsigned cost_per_site(Strategy s) { return s == Strategy::RelatedWork ? 2 : 1; }

inline StrategyMetrics metrics_for(const ToyProgram& original, Strategy strategy, const ToyProgram& variant) {
  const ToyProgram base = strip_instrumentation(original);
  if (strip_instrumentation(variant) != base)
    throw Error(ErrorCode::MismatchedOrigin,
                "variant for strategy " + std::string(strategy_name(strategy)) + " is not derived from the original");
  StrategyMetrics m;
  m.strategy = strategy;
  m.sites = count_emits(variant);
  m.added_instructions = m.sites * cost_per_site(strategy);
  m.original_bytes = base.code_bytes();
  m.code_size_bytes = m.original_bytes + 4 * m.added_instructions;
  m.overhead_percent = m.original_bytes ? 100.0 * (4.0 * m.added_instructions) / m.original_bytes : 0.0;
  return m;
}

inline std::vector<StrategyMetrics> metrics(const ToyProgram& original,
                                            const std::vector<std::pair<Strategy, ToyProgram>>& variants) {
  std::vector<StrategyMetrics> out;
  for (const auto& [s, v] : variants) out.push_back(metrics_for(original, s, v));
  return out;
}

inline std::vector<StrategyMetrics> all_strategy_metrics(const ToyProgram& original, InstrumentOptions opts = {}) {
  std::vector<std::pair<Strategy, ToyProgram>> variants;
  for (auto s : {Strategy::RelatedWork, Strategy::S1, Strategy::S2}) variants.emplace_back(s, instrument(original, s, opts));
  return metrics(original, variants);
}

}  // namespace offdift::toyisa
