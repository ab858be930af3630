#include <gtest/gtest.h>

#include <random>

#include "offdift/policy.hpp"
#include "offdift/toyisa/filesystem.hpp"
#include "support/cli_runner.hpp"

using namespace offdift;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidConfig;
}

}  // namespace

TEST(PolicyRules, Table) {
  EXPECT_EQ(apply_rule(PropagationRule::Zero, 5, 6, 7), 0u);
  EXPECT_EQ(apply_rule(PropagationRule::CopySrc1, 5, 6, 7), 5u);
  EXPECT_EQ(apply_rule(PropagationRule::Or, 5, 6, 7), 7u);
  EXPECT_EQ(apply_rule(PropagationRule::And, 5, 6, 7), 4u);
  EXPECT_EQ(apply_rule(PropagationRule::Xor, 5, 6, 7), 3u);
  EXPECT_EQ(apply_rule(PropagationRule::Max, 5, 6, 7), 6u);
  EXPECT_EQ(apply_rule(PropagationRule::KeepDest, 5, 6, 7), 7u);
}

TEST(PolicyRegistersTest, FourBitsPerClass) {
  PolicyRegisters p;
  p.set_rule(InstrClass::ArithLogic, PropagationRule::Or);
  p.set_rule(InstrClass::FpLoadStore, PropagationRule::Max);
  p.set_checks(InstrClass::LoadStore, kCheckSrc1 | kCheckDst);
  EXPECT_EQ(p.tpr, 0x5002u);
  EXPECT_EQ(p.tcr, 0x0050u);
  EXPECT_EQ(tpr_rule(p, InstrClass::FpLoadStore), PropagationRule::Max);
  EXPECT_EQ(tcr_checks(p, InstrClass::LoadStore), 5);
  p.set_rule(InstrClass::ArithLogic, PropagationRule::Xor);
  EXPECT_EQ(p.tpr, 0x5004u);
}

TEST(PolicyRegistersTest, InvalidRuleField) {
  PolicyRegisters p;
  p.tpr = 0x0070;
  EXPECT_EQ(code_of([&] { tpr_rule(p, InstrClass::LoadStore); }), ErrorCode::InvalidRuleEncoding);
  EXPECT_EQ(code_of([&] { validate(p); }), ErrorCode::InvalidRuleEncoding);
}

TEST(PolicyRegistersTest, TagWidthMask) {
  EXPECT_EQ(width_mask(1), 0x1u);
  EXPECT_EQ(width_mask(8), 0xFFu);
  EXPECT_EQ(width_mask(32), 0xFFFFFFFFu);
  PolicyRegisters p;
  p.tag_width = 0;
  EXPECT_EQ(code_of([&] { validate(p); }), ErrorCode::InvalidConfig);
  p.tag_width = 33;
  EXPECT_EQ(code_of([&] { validate(p); }), ErrorCode::InvalidConfig);
}

TEST(PolicyText, ParseNamedAndNumericForms) {
  const auto p = parse_policy(R"(# comment
mode=compile
tag_width=8
check_mask=0x3
tpr.arith=or
tpr.loadstore=copy
tcr.loadstore=src1|dst
tcr.arith=2
)");
  EXPECT_EQ(p.mode, PolicyMode::CompileTime);
  EXPECT_EQ(p.tag_width, 8u);
  EXPECT_EQ(p.check_mask, 3u);
  EXPECT_EQ(tpr_rule(p, InstrClass::ArithLogic), PropagationRule::Or);
  EXPECT_EQ(tpr_rule(p, InstrClass::Branch), PropagationRule::KeepDest);
  EXPECT_EQ(tpr_rule(p, InstrClass::FpLoadStore), PropagationRule::Zero);
  EXPECT_EQ(tcr_checks(p, InstrClass::LoadStore), kCheckSrc1 | kCheckDst);
  EXPECT_EQ(tcr_checks(p, InstrClass::ArithLogic), kCheckSrc2);
}

TEST(PolicyText, Errors) {
  EXPECT_EQ(code_of([] { parse_policy("bogus=1"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_policy("tpr.arith=plus"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_policy("tpr.vector=or"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_policy("tcr.arith=src3"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_policy("tcr.arith=9"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_policy("mode=sometimes"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_policy("no equals sign"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_policy("tag_width=40"); }), ErrorCode::InvalidConfig);
}

TEST(PolicyText, FormatParseRoundTrip) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 500; ++i) {
    PolicyRegisters p;
    p.mode = rng() % 2 ? PolicyMode::Runtime : PolicyMode::CompileTime;
    for (unsigned c = 0; c < kClassCount; ++c) {
      p.set_rule(InstrClass(c), PropagationRule(rng() % kRuleCount));
      p.set_checks(InstrClass(c), static_cast<std::uint8_t>(rng() % 8));
    }
    p.check_mask = static_cast<std::uint32_t>(rng());
    p.tag_width = 1 + rng() % 32;
    ASSERT_EQ(parse_policy(format_policy(p)), p);
  }
}

TEST(PolicyText, BundledPolicies) {
  using testsupport::scenario;
  const auto store = parse_policy(toyisa::read_text(scenario("policies/store_check.policy")));
  EXPECT_EQ(store.check_mask, 1u);
  EXPECT_EQ(tcr_checks(store, InstrClass::LoadStore), kCheckSrc1);
  const auto observe = parse_policy(toyisa::read_text(scenario("policies/observe.policy")));
  EXPECT_EQ(observe.tpr, store.tpr);
  EXPECT_EQ(observe.tcr, 0u);
  const auto all = parse_policy(toyisa::read_text(scenario("policies/or_all.policy")));
  EXPECT_EQ(all.tag_width, 8u);
  const auto fp = parse_policy(toyisa::read_text(scenario("policies/fp_check.policy")));
  EXPECT_EQ(tcr_checks(fp, InstrClass::FpLoadStore), kCheckSrc1 | kCheckSrc2);
}
