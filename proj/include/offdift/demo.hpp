#pragma once

// Built-in attack demonstrations.
//   secret-leak      a program copies a SECRET file into a PUBLIC one.
//   library-wrapper  the same copy hidden in a library function, as an
//                    interposed wrapper would do it.
// Both run under a policy that checks tagged stores and tagged file writes.

#include <string>
#include <string_view>

#include "offdift/cosim.hpp"
#include "offdift/toyisa/asm.hpp"

namespace offdift::demo {

inline constexpr std::uint32_t kSecretFile = 1;
inline constexpr std::uint32_t kPublicFile = 2;
inline constexpr std::uint32_t kSecretTag = 0x1;

inline constexpr std::string_view kPolicy = R"(mode=runtime
check_mask=0x1
tpr.arith=or
tpr.loadstore=copy
tpr.fploadstore=copy
tcr.loadstore=src1
)";

inline constexpr std::string_view kSecretLeak = R"(.text 0x10000
.page 0x20
.sp 0x20ff0

.func main
start:
    mov r4, #0x20000      ; input buffer
    mov r5, #8
    sysread #1, r4, r5
    mov r6, #0x20100      ; output buffer
    ldr r0, [r4]
    ldr r1, [r4, #4]
    str r0, [r6]
    str r1, [r6, #4]
    syswrite #2, r6, r5
    halt
)";

inline constexpr std::string_view kLibraryWrapper = R"(.text 0x10000
.page 0x20
.sp 0x20ff0

.func main
start:
    mov r4, #0x20000      ; input buffer
    mov r5, #8
    sysread #1, r4, r5
    mov r6, #0x20100      ; output buffer
    mov r0, r6
    mov r1, r4
    bl copy8
resume:
    syswrite #2, r6, r5
    halt

.lib copy8
copy8:
    ldr r2, [r1]
    str r2, [r0]
    ldr r2, [r1, #4]
    str r2, [r0, #4]
    ret
)";

inline toyisa::SimFileSystem demo_files() {
  toyisa::SimFileSystem fs;
  fs[kSecretFile] = toyisa::SimFile{{'p', 'a', 's', 's', 'w', 'o', 'r', 'd'}, kSecretTag};
  fs[kPublicFile] = toyisa::SimFile{{}, 0};
  return fs;
}

inline std::string_view program_text(std::string_view name) {
  if (name == "secret-leak") return kSecretLeak;
  if (name == "library-wrapper") return kLibraryWrapper;
  throw Error(ErrorCode::InvalidConfig, "unknown demo '" + std::string(name) + "'");
}

inline Scenario scenario(std::string_view name, bool library_code = true) {
  Scenario s;
  s.programs.push_back(toyisa::parse_program(program_text(name)));
  s.contexts.push_back(pft::ContextId{0x42, 0x4d2});
  s.policies.push_back(parse_policy(kPolicy));
  s.strategy = toyisa::Strategy::S1;
  s.library_code = library_code;
  s.fs = demo_files();
  return s;
}

struct DemoResult {
  std::string name;
  PipelineResult pipeline;
  report::Report expected;  // fully tracked oracle verdict
  bool detected = false;
  bool expected_detection = false;

  bool missed() const { return expected_detection && !detected; }
};

inline DemoResult run(std::string_view name, bool library_code = true) {
  const Scenario s = scenario(name, library_code);
  DemoResult r;
  r.name = name;
  r.pipeline = run_pipeline(s);
  r.expected = run_oracle(s, /*full_tracking=*/true).report;
  r.detected = !r.pipeline.report.violations.empty();
  r.expected_detection = !r.expected.violations.empty();
  return r;
}

inline std::string summary(const DemoResult& r) {
  std::string s = "demo=" + r.name + "\n";
  s += "detected=" + std::string(r.detected ? "1" : "0") + "\n";
  s += "expected_detection=" + std::string(r.expected_detection ? "1" : "0") + "\n";
  if (r.missed()) {
    const auto& v = r.expected.violations.front();
    s += "missed-detection=" + report::violation_text(v) + "\n";
  }
  s += "public_file_tag=" + hex32(r.pipeline.report.files.at(kPublicFile)) + "\n";
  return s;
}

}  // namespace offdift::demo
