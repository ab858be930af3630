#pragma once

// Final tag state of a run, shared by the pipeline and the oracle.
//
// Text form is one `key=value` record per line:
//   source=pipeline
//   mode=per-thread
//   unit.0.context=0x42:0x4d2
//   unit.0.trf=0x0 0x1 ...            16 values
//   unit.0.mem.0x00020100=0x00000001  nonzero words only
//   violation.0=unit:0 slot:0 context:0x42:0x4d2 block:0x00010168 kind:src1 tag:0x1 annotation:3
//   file.2=0x00000001
// `source`, FIFO high-water marks and the annotation/pc fields of violation
// records are informational and ignored by diff().

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "offdift/dispatch.hpp"
#include "offdift/tmc.hpp"

namespace offdift::report {

struct UnitTags {
  unsigned unit = 0;
  unsigned slot = 0;
  unsigned policy = 0;
  pft::ContextId ctx;
  bool halted = false;
  std::array<std::uint32_t, 16> trf{};
  std::array<std::uint32_t, 32> trf_fp{};
  std::map<std::uint32_t, std::uint32_t> mem;
  std::optional<dispatch::FifoStats> fifo_high_water;
};

struct ViolationRecord {
  unsigned unit = 0;
  unsigned slot = 0;
  pft::ContextId ctx;
  std::uint32_t block = 0;
  tmc::CheckKind kind = tmc::CheckKind::Src1;
  std::uint32_t tag = 0;
  std::optional<std::uint32_t> annotation;  // pipeline only
  std::optional<std::uint32_t> pc;          // oracle only
};

struct Report {
  std::string source;
  dispatch::DispatchMode mode = dispatch::DispatchMode::PerThread;
  std::vector<UnitTags> units;
  std::vector<ViolationRecord> violations;
  std::map<std::uint32_t, std::uint32_t> files;
};

inline std::string mode_name(dispatch::DispatchMode m) {
  return m == dispatch::DispatchMode::PerThread ? "per-thread" : "multi-policy";
}

inline dispatch::DispatchMode parse_mode(std::string_view s) {
  if (s == "per-thread") return dispatch::DispatchMode::PerThread;
  if (s == "multi-policy") return dispatch::DispatchMode::MultiPolicy;
  throw Error(ErrorCode::ParseError, "unknown dispatch mode '" + std::string(s) + "'");
}

inline std::string context_text(pft::ContextId c) { return hex(c.asid) + ":" + hex(c.tid); }

inline std::string violation_text(const ViolationRecord& v) {
  std::string s = "unit:" + std::to_string(v.unit) + " slot:" + std::to_string(v.slot) + " context:" +
                  context_text(v.ctx) + " block:" + hex32(v.block) + " kind:" +
                  std::string(tmc::check_kind_name(v.kind)) + " tag:" + hex(v.tag);
  if (v.annotation) s += " annotation:" + std::to_string(*v.annotation);
  if (v.pc) s += " pc:" + hex32(*v.pc);
  return s;
}

// Pipeline result; unbound units are omitted.
inline Report from_run(const dispatch::RunReport& rr, const std::map<std::uint32_t, std::uint32_t>& files) {
  Report r;
  r.source = "pipeline";
  r.mode = rr.mode;
  for (const auto& u : rr.units) {
    if (!u.bound) continue;
    UnitTags t;
    t.unit = u.index;
    t.slot = u.state.slot;
    t.policy = u.policy_index;
    t.ctx = u.state.context;
    t.halted = u.state.halted;
    t.trf = u.state.trf;
    t.trf_fp = u.state.trf_fp;
    t.mem = u.mem_tags;
    t.fifo_high_water = u.high_water;
    r.units.push_back(std::move(t));
  }
  for (const auto& uv : rr.violations) {
    const auto& v = uv.violation;
    r.violations.push_back(
        ViolationRecord{uv.unit, v.slot, v.context, v.block_address, v.check_kind, v.checked_tag, v.annotation_index, {}});
  }
  r.files = files;
  return r;
}

inline std::string to_text(const Report& r) {
  std::ostringstream out;
  auto join = [](const auto& values) {
    std::string s;
    for (auto v : values) s += (s.empty() ? "" : " ") + hex(v);
    return s;
  };
  out << "source=" << r.source << "\n";
  out << "mode=" << mode_name(r.mode) << "\n";
  out << "units=" << r.units.size() << "\n";
  for (const auto& u : r.units) {
    const std::string k = "unit." + std::to_string(u.unit) + ".";
    out << k << "slot=" << u.slot << "\n";
    out << k << "policy=" << u.policy << "\n";
    out << k << "context=" << context_text(u.ctx) << "\n";
    out << k << "halted=" << (u.halted ? 1 : 0) << "\n";
    out << k << "trf=" << join(u.trf) << "\n";
    out << k << "trf_fp=" << join(u.trf_fp) << "\n";
    for (const auto& [a, t] : u.mem) out << k << "mem." << hex32(a) << "=" << hex32(t) << "\n";
    if (u.fifo_high_water)
      out << k << "fifo_high_water=instrumentation:" << u.fifo_high_water->instrumentation
          << " ps2pl:" << u.fifo_high_water->ps2pl << " pl2ps:" << u.fifo_high_water->pl2ps << "\n";
  }
  out << "violations=" << r.violations.size() << "\n";
  for (std::size_t i = 0; i < r.violations.size(); ++i)
    out << "violation." << i << "=" << violation_text(r.violations[i]) << "\n";
  out << "files=" << r.files.size() << "\n";
  for (const auto& [id, t] : r.files) out << "file." << id << "=" << hex32(t) << "\n";
  return out.str();
}

// The report restricted to one unit and its violations, for comparing a
// unit of a multi-policy run with a single-policy run.
inline Report unit_view(const Report& r, unsigned unit) {
  Report out;
  out.source = r.source;
  out.mode = r.mode;
  for (const auto& u : r.units)
    if (u.unit == unit) out.units.push_back(u);
  for (const auto& v : r.violations)
    if (v.unit == unit) out.violations.push_back(v);
  out.files = r.files;
  return out;
}

inline nlohmann::json to_json(const Report& r) {
  using nlohmann::json;
  json j;
  j["source"] = r.source;
  j["mode"] = mode_name(r.mode);
  j["units"] = json::array();
  for (const auto& u : r.units) {
    json ju;
    ju["unit"] = u.unit;
    ju["slot"] = u.slot;
    ju["policy"] = u.policy;
    ju["context"] = {{"asid", u.ctx.asid}, {"tid", u.ctx.tid}};
    ju["halted"] = u.halted;
    ju["trf"] = u.trf;
    ju["trf_fp"] = u.trf_fp;
    json mem = json::object();
    for (const auto& [a, t] : u.mem) mem[hex32(a)] = t;
    ju["mem"] = mem;
    if (u.fifo_high_water)
      ju["fifo_high_water"] = {{"instrumentation", u.fifo_high_water->instrumentation},
                               {"ps2pl", u.fifo_high_water->ps2pl},
                               {"pl2ps", u.fifo_high_water->pl2ps}};
    j["units"].push_back(ju);
  }
  j["violations"] = json::array();
  for (const auto& v : r.violations) {
    json jv = {{"unit", v.unit},
               {"slot", v.slot},
               {"context", {{"asid", v.ctx.asid}, {"tid", v.ctx.tid}}},
               {"block", v.block},
               {"kind", std::string(tmc::check_kind_name(v.kind))},
               {"tag", v.tag}};
    if (v.annotation) jv["annotation"] = *v.annotation;
    if (v.pc) jv["pc"] = *v.pc;
    j["violations"].push_back(jv);
  }
  json files = json::object();
  for (const auto& [id, t] : r.files) files[std::to_string(id)] = t;
  j["files"] = files;
  return j;
}

// key -> value with informational fields removed.
inline std::map<std::string, std::string> comparable_records(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::ParseError, "report line " + std::to_string(lineno) + " has no '='");
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "source" || key.ends_with(".fifo_high_water")) continue;
    if (key.starts_with("violation.")) {
      std::istringstream fields(value);
      std::string kept;
      for (std::string f; fields >> f;)
        if (!f.starts_with("annotation:") && !f.starts_with("pc:")) kept += (kept.empty() ? "" : " ") + f;
      value = kept;
    }
    if (!out.emplace(key, value).second)
      throw Error(ErrorCode::ParseError, "report line " + std::to_string(lineno) + " repeats key " + key);
  }
  return out;
}

// Human-readable differences; empty when the reports are tag-equivalent.
inline std::vector<std::string> diff(std::string_view a, std::string_view b) {
  const auto ra = comparable_records(a), rb = comparable_records(b);
  std::vector<std::string> out;
  for (const auto& [k, v] : ra) {
    auto it = rb.find(k);
    if (it == rb.end()) out.push_back(k + ": " + v + " vs <absent>");
    else if (it->second != v) out.push_back(k + ": " + v + " vs " + it->second);
  }
  for (const auto& [k, v] : rb)
    if (!ra.count(k)) out.push_back(k + ": <absent> vs " + v);
  return out;
}

inline std::vector<std::string> diff(const Report& a, const Report& b) { return diff(to_text(a), to_text(b)); }

}  // namespace offdift::report
