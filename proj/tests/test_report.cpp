#include <gtest/gtest.h>

#include "offdift/report.hpp"

using namespace offdift;
using namespace offdift::report;

namespace {

Report sample() {
  Report r;
  r.source = "pipeline";
  UnitTags u;
  u.unit = 0;
  u.slot = 0;
  u.ctx = {0x42, 0x4d2};
  u.trf[3] = 0x1;
  u.trf_fp[31] = 0x4;
  u.mem[0x20100] = 0x1;
  u.fifo_high_water = dispatch::FifoStats{2, 3, 1};
  r.units.push_back(u);
  r.violations.push_back(ViolationRecord{0, 0, {0x42, 0x4d2}, 0x10168, tmc::CheckKind::Src1, 0x1, 4, {}});
  r.files = {{1, 0x1}, {2, 0x0}};
  return r;
}

}  // namespace

TEST(ReportText, FrozenLayout) {
  const std::string expected =
      "source=pipeline\n"
      "mode=per-thread\n"
      "units=1\n"
      "unit.0.slot=0\n"
      "unit.0.policy=0\n"
      "unit.0.context=0x42:0x4d2\n"
      "unit.0.halted=0\n"
      "unit.0.trf=0x0 0x0 0x0 0x1 0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x0\n"
      "unit.0.trf_fp=0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x0 "
      "0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x0 0x4\n"
      "unit.0.mem.0x00020100=0x00000001\n"
      "unit.0.fifo_high_water=instrumentation:2 ps2pl:3 pl2ps:1\n"
      "violations=1\n"
      "violation.0=unit:0 slot:0 context:0x42:0x4d2 block:0x00010168 kind:src1 tag:0x1 annotation:4\n"
      "files=2\n"
      "file.1=0x00000001\n"
      "file.2=0x00000000\n";
  EXPECT_EQ(to_text(sample()), expected);
}

TEST(ReportDiff, IgnoresInformationalFields) {
  auto a = sample();
  auto b = sample();
  b.source = "oracle";
  b.units[0].fifo_high_water.reset();
  b.violations[0].annotation.reset();
  b.violations[0].pc = 0x10170;
  EXPECT_TRUE(diff(a, b).empty());
}

TEST(ReportDiff, ReportsTagDifferences) {
  auto a = sample();
  auto b = sample();
  b.units[0].mem[0x20104] = 0x2;
  b.files[2] = 0x1;
  b.violations.clear();
  const auto d = diff(a, b);
  ASSERT_EQ(d.size(), 4u);
  EXPECT_EQ(d[0], "file.2: 0x00000000 vs 0x00000001");
  EXPECT_EQ(d[1], "violation.0: unit:0 slot:0 context:0x42:0x4d2 block:0x00010168 kind:src1 tag:0x1 vs <absent>");
  EXPECT_EQ(d[2], "violations: 1 vs 0");
  EXPECT_EQ(d[3], "unit.0.mem.0x00020104: <absent> vs 0x00000002");
}

TEST(ReportDiff, MalformedInput) {
  EXPECT_THROW(diff("source=a\nnonsense\n", "source=a\n"), Error);
  EXPECT_THROW(diff("units=1\nunits=2\n", "units=1\n"), Error);
}

TEST(ReportJson, Structure) {
  const auto j = to_json(sample());
  EXPECT_EQ(j["mode"], "per-thread");
  EXPECT_EQ(j["units"][0]["context"]["tid"], 0x4d2);
  EXPECT_EQ(j["units"][0]["trf"][3], 1);
  EXPECT_EQ(j["units"][0]["mem"]["0x00020100"], 1);
  EXPECT_EQ(j["units"][0]["fifo_high_water"]["ps2pl"], 3);
  EXPECT_EQ(j["violations"][0]["kind"], "src1");
  EXPECT_EQ(j["violations"][0]["annotation"], 4);
  EXPECT_FALSE(j["violations"][0].contains("pc"));
  EXPECT_EQ(j["files"]["1"], 1);
}

TEST(ReportView, RestrictsToOneUnit) {
  auto r = sample();
  auto second = r.units[0];
  second.unit = 1;
  second.policy = 1;
  r.units.push_back(second);
  r.violations.push_back(ViolationRecord{1, 0, {0x42, 0x4d2}, 0x10168, tmc::CheckKind::Dst, 0x2, 1, {}});
  const auto v = unit_view(r, 1);
  ASSERT_EQ(v.units.size(), 1u);
  EXPECT_EQ(v.units[0].unit, 1u);
  ASSERT_EQ(v.violations.size(), 1u);
  EXPECT_EQ(v.violations[0].kind, tmc::CheckKind::Dst);
  EXPECT_EQ(v.files, r.files);
}

TEST(ReportFromRun, SkipsUnboundUnits) {
  dispatch::RunReport rr;
  rr.units.resize(2);
  rr.units[0].bound = true;
  rr.units[0].state.context = {0x42, 0x4d2};
  rr.units[0].state.trf[1] = 0x8;
  rr.violations.push_back({0, tmc::Violation{0, {0x42, 0x4d2}, 0x10000, 2, 0x8, tmc::CheckKind::Src2}});
  const auto r = from_run(rr, {{5, 0x8}});
  ASSERT_EQ(r.units.size(), 1u);
  EXPECT_EQ(r.units[0].trf[1], 0x8u);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(violation_text(r.violations[0]),
            "unit:0 slot:0 context:0x42:0x4d2 block:0x00010000 kind:src2 tag:0x8 annotation:2");
  EXPECT_EQ(r.files.at(5), 0x8u);
}

TEST(ReportModes, NamesRoundTrip) {
  for (auto m : {dispatch::DispatchMode::PerThread, dispatch::DispatchMode::MultiPolicy})
    EXPECT_EQ(parse_mode(mode_name(m)), m);
  EXPECT_THROW(parse_mode("round-robin"), Error);
}
