#pragma once

// Run manifests: `key=value` lines, paths relative to the manifest.
//
//   program=stack_copy.s,0x42,0x4d2     program path, ASID, TID (1-4 lines)
//   policy=store_check.policy     policy file (1-8 lines)
//   strategy=s1                   related | s1 | s2
//   mode=runtime                  runtime | compile
//   dispatch=per-thread           per-thread | multi-policy
//   quantum=5
//   fs=files.fs                   file-system manifest
//   annotations=prebuilt.tann     use a saved annotation store
//   lib_instrumentation=1
//   max_steps=1000000

#include <filesystem>
#include <sstream>
#include <string>

#include "offdift/cosim.hpp"
#include "offdift/toyisa/asm.hpp"
#include "offdift/toyisa/filesystem.hpp"

namespace offdift {

inline bool parse_bool(std::string_view v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw Error(ErrorCode::ParseError, "expected a boolean, got '" + std::string(v) + "'");
}

inline PolicyMode parse_policy_mode(std::string_view v) {
  if (v == "runtime") return PolicyMode::Runtime;
  if (v == "compile") return PolicyMode::CompileTime;
  throw Error(ErrorCode::ParseError, "unknown policy mode '" + std::string(v) + "'");
}

inline Scenario parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  Scenario s;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  bool mode_set = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = offdift::detail::trim(std::string_view(line).substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::ParseError, "manifest line " + std::to_string(lineno) + ": expected key=value");
    const std::string key(offdift::detail::trim(body.substr(0, eq)));
    const std::string value(offdift::detail::trim(body.substr(eq + 1)));
    auto path = [&](const std::string& p) { return base_dir / p; };
    if (key == "program") {
      std::vector<std::string> parts;
      std::istringstream ps(value);
      for (std::string f; std::getline(ps, f, ',');) parts.emplace_back(offdift::detail::trim(f));
      if (parts.size() != 3)
        throw Error(ErrorCode::ParseError, "manifest line " + std::to_string(lineno) + ": program=path,asid,tid");
      const auto asid = offdift::detail::parse_int(parts[1]);
      const auto tid = offdift::detail::parse_int(parts[2]);
      if (asid < 0 || asid > 0xFF || tid < 0 || tid > 0xFFFFFF)
        throw Error(ErrorCode::InvalidConfig, "manifest line " + std::to_string(lineno) + ": context out of range");
      s.programs.push_back(toyisa::parse_program(toyisa::read_text(path(parts[0]))));
      s.contexts.push_back(pft::ContextId{static_cast<std::uint8_t>(asid), static_cast<std::uint32_t>(tid)});
    } else if (key == "policy") {
      s.policies.push_back(parse_policy(toyisa::read_text(path(value))));
    } else if (key == "strategy") {
      s.strategy = toyisa::parse_strategy(value);
    } else if (key == "mode") {
      s.mode = parse_policy_mode(value);
      mode_set = true;
    } else if (key == "dispatch") {
      s.dispatch = report::parse_mode(value);
    } else if (key == "quantum") {
      const auto q = offdift::detail::parse_int(value);
      if (q < 1) throw Error(ErrorCode::InvalidConfig, "quantum must be at least 1");
      s.quantum = static_cast<unsigned>(q);
    } else if (key == "fs") {
      s.fs = toyisa::parse_fs_manifest(toyisa::read_text(path(value)), path(value).parent_path());
    } else if (key == "annotations") {
      s.annotations = annot::load_store(toyisa::read_binary(path(value)));
    } else if (key == "lib_instrumentation") {
      s.library_code = parse_bool(value);
    } else if (key == "max_steps") {
      s.max_steps = static_cast<std::uint64_t>(offdift::detail::parse_int(value));
    } else {
      throw Error(ErrorCode::ParseError, "manifest line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  // A policy file's own mode applies unless the manifest sets one.
  if (!mode_set && !s.policies.empty()) s.mode = s.policies[0].mode;
  validate(s);
  return s;
}

inline Scenario load_manifest(const std::filesystem::path& path) {
  return parse_manifest(toyisa::read_text(path), path.parent_path());
}

}  // namespace offdift
