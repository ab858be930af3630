// offdift: command-line front end for the off-core DIFT simulator.
//
// Exit codes: 0 success or equivalent, 1 detection or difference,
// 2 usage or input error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "offdift/cosim.hpp"
#include "offdift/demo.hpp"
#include "offdift/report.hpp"
#include "offdift/scenario.hpp"
#include "offdift/toyisa/asm.hpp"

namespace fs = std::filesystem;
using namespace offdift;

namespace {

struct Overrides {
  std::string strategy;
  std::string mode;
  unsigned quantum = 0;
  std::vector<std::string> policies;
  bool no_lib = false;
  std::string out;
  bool json = false;
};

void write_file(const fs::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::InvalidConfig, "cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

void write_file(const fs::path& path, const std::vector<std::uint8_t>& data) {
  write_file(path, std::string_view(reinterpret_cast<const char*>(data.data()), data.size()));
}

std::vector<PolicyRegisters> load_policies(const std::vector<std::string>& paths) {
  std::vector<PolicyRegisters> out;
  for (const auto& p : paths) out.push_back(parse_policy(toyisa::read_text(p)));
  return out;
}

Scenario scenario_from(const std::string& manifest, const Overrides& o) {
  Scenario s = load_manifest(manifest);
  if (!o.policies.empty()) s.policies = load_policies(o.policies);
  if (!o.strategy.empty()) s.strategy = toyisa::parse_strategy(o.strategy);
  if (!o.mode.empty()) s.mode = parse_policy_mode(o.mode);
  if (o.quantum) s.quantum = o.quantum;
  if (o.no_lib) s.library_code = false;
  validate(s);
  return s;
}

// Prints the report or writes it under --out; returns 1 on any violation.
int emit_report(const report::Report& r, const Overrides& o, const std::string& stem) {
  const std::string text = report::to_text(r);
  if (o.out.empty()) {
    std::cout << (o.json ? report::to_json(r).dump(2) + "\n" : text);
  } else {
    fs::create_directories(o.out);
    write_file(fs::path(o.out) / (stem + ".txt"), text);
    if (o.json) write_file(fs::path(o.out) / (stem + ".json"), report::to_json(r).dump(2) + "\n");
  }
  return r.violations.empty() ? 0 : 1;
}

std::string metrics_text(const std::vector<toyisa::StrategyMetrics>& ms) {
  std::ostringstream out;
  for (const auto& m : ms) {
    const auto s = std::string(toyisa::strategy_name(m.strategy));
    char pct[32];
    std::snprintf(pct, sizeof pct, "%.2f", m.overhead_percent);
    out << s << ".sites=" << m.sites << "\n"
        << s << ".added_instructions=" << m.added_instructions << "\n"
        << s << ".original_bytes=" << m.original_bytes << "\n"
        << s << ".code_size_bytes=" << m.code_size_bytes << "\n"
        << s << ".overhead_percent=" << pct << "\n";
  }
  return out.str();
}

std::string commented(const std::string& text) {
  std::istringstream in(text);
  std::string out;
  for (std::string line; std::getline(in, line);) out += "; " + line + "\n";
  return out;
}

int cmd_instrument(const std::string& program, const Overrides& o) {
  const auto p = toyisa::parse_program(toyisa::read_text(program));
  const auto strategy = toyisa::parse_strategy(o.strategy.empty() ? "s1" : o.strategy);
  const toyisa::InstrumentOptions io{!o.no_lib};
  const auto variant = toyisa::instrument(p, strategy, io);
  const auto listing = toyisa::format_program(variant);
  const auto metrics = metrics_text({toyisa::metrics_for(p, strategy, variant)});
  if (o.out.empty()) {
    std::cout << listing << "\n" << commented(metrics);
  } else {
    write_file(o.out, listing);
    std::cout << metrics;
  }
  return 0;
}

int cmd_analyze(const std::string& program, const Overrides& o) {
  const auto p = toyisa::parse_program(toyisa::read_text(program));
  toyisa::AnalyzeOptions ao;
  ao.strategy = toyisa::parse_strategy(o.strategy.empty() ? "s1" : o.strategy);
  if (!o.policies.empty()) {
    const auto pols = load_policies(o.policies);
    ao.policy = pols.front();
    ao.mode = ao.policy.mode;
  }
  if (!o.mode.empty()) ao.mode = parse_policy_mode(o.mode);
  ao.library_code = !o.no_lib;
  const auto variant = toyisa::instrument(p, ao.strategy, {ao.library_code});
  const auto store = toyisa::analyze(variant, ao);
  for (const auto& [addr, block] : store) {
    std::cout << hex32(addr) << ":\n";
    for (const auto& a : block) std::cout << "    " << annot::to_string(a) << "\n";
  }
  if (!o.out.empty()) write_file(o.out, annot::save_store(store));
  return 0;
}

int cmd_run(const std::string& manifest, const Overrides& o) {
  const Scenario s = scenario_from(manifest, o);
  const auto r = run_pipeline(s);
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_file(fs::path(o.out) / "trace.pft", r.exec.stream.trace);
    write_file(fs::path(o.out) / "annotations.tann", annot::save_store(r.prepared.store));
    pft::DecodedTrace decoded{r.entries, r.slots};
    write_file(fs::path(o.out) / "decoded.bin", pft::save_decoded(decoded));
  }
  return emit_report(r.report, o, "report");
}

int cmd_oracle(const std::string& manifest, const Overrides& o) {
  const Scenario s = scenario_from(manifest, o);
  return emit_report(run_oracle(s).report, o, "oracle");
}

int cmd_diff(const std::string& a, const std::string& b) {
  const auto diffs = report::diff(toyisa::read_text(a), toyisa::read_text(b));
  for (const auto& d : diffs) std::cout << d << "\n";
  if (diffs.empty()) std::cout << "equivalent\n";
  return diffs.empty() ? 0 : 1;
}

int cmd_decode_trace(const std::string& path) {
  const auto bytes = toyisa::read_binary(path);
  const auto t = pft::decode_stream(bytes);
  for (auto e : t.entries) {
    const auto slot = pft::entry_slot(e);
    std::cout << hex32(e.word) << " address=" << hex32(pft::entry_address(e)) << " slot=" << slot
              << " context=" << pft::to_string(t.slots[slot]) << "\n";
  }
  for (std::size_t i = 0; i < t.slots.size(); ++i)
    std::cout << "# slot " << i << ": " << pft::to_string(t.slots[i]) << "\n";
  return 0;
}

int cmd_stats(const std::string& program, const Overrides& o) {
  const auto p = toyisa::parse_program(toyisa::read_text(program));
  std::cout << metrics_text(toyisa::all_strategy_metrics(p, {!o.no_lib}));
  return 0;
}

int cmd_demo(const std::string& name, const Overrides& o) {
  const auto r = demo::run(name, !o.no_lib);
  std::cout << demo::summary(r);
  if (o.json) std::cout << report::to_json(r.pipeline.report).dump(2) << "\n";
  else std::cout << report::to_text(r.pipeline.report);
  return r.detected ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Off-core DIFT simulator"};
  app.require_subcommand(1);
  Overrides o;
  std::string arg1, arg2;

  auto strategy_opt = [&](CLI::App* c) {
    c->add_option("--strategy", o.strategy, "Instrumentation strategy")->check(CLI::IsMember({"related", "s1", "s2"}));
  };
  auto mode_opt = [&](CLI::App* c) {
    c->add_option("--mode", o.mode, "Policy mode")->check(CLI::IsMember({"runtime", "compile"}));
  };
  auto policies_opt = [&](CLI::App* c) {
    c->add_option("--policies", o.policies, "Policy files")->delimiter(',');
  };
  auto lib_opt = [&](CLI::App* c) {
    c->add_flag("--no-lib-instrumentation", o.no_lib, "Leave library functions untracked");
  };

  auto* instrument = app.add_subcommand("instrument", "Instrument a program and report its footprint");
  instrument->add_option("program", arg1)->required();
  strategy_opt(instrument);
  lib_opt(instrument);
  instrument->add_option("--out", o.out, "Write the listing here");

  auto* analyze = app.add_subcommand("analyze", "Print the annotations of an instrumented program");
  analyze->add_option("program", arg1)->required();
  strategy_opt(analyze);
  mode_opt(analyze);
  policies_opt(analyze);
  lib_opt(analyze);
  analyze->add_option("--out", o.out, "Write the binary annotation store here");

  auto run_like = [&](CLI::App* c) {
    c->add_option("manifest", arg1)->required();
    strategy_opt(c);
    mode_opt(c);
    policies_opt(c);
    lib_opt(c);
    c->add_option("--quantum", o.quantum, "Scheduler quantum")->check(CLI::PositiveNumber);
    c->add_option("--out", o.out, "Output directory");
    c->add_flag("--json", o.json, "Emit JSON");
  };
  auto* run = app.add_subcommand("run", "Run a manifest through the DIFT pipeline");
  run_like(run);
  auto* oracle = app.add_subcommand("oracle", "Run a manifest under the reference taint oracle");
  run_like(oracle);

  auto* diff = app.add_subcommand("diff", "Compare two reports for tag equivalence");
  diff->add_option("a", arg1)->required();
  diff->add_option("b", arg2)->required();

  auto* decode = app.add_subcommand("decode-trace", "Decode a PFT byte stream");
  decode->add_option("trace", arg1)->required();

  auto* stats = app.add_subcommand("stats", "Instrumentation metrics for every strategy");
  stats->add_option("program", arg1)->required();
  lib_opt(stats);

  auto* demo_cmd = app.add_subcommand("demo-attack", "Run a built-in attack demonstration");
  demo_cmd->add_option("name", arg1)->required()->check(CLI::IsMember({"secret-leak", "library-wrapper"}));
  lib_opt(demo_cmd);
  demo_cmd->add_flag("--json", o.json, "Emit JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*instrument) return cmd_instrument(arg1, o);
    if (*analyze) return cmd_analyze(arg1, o);
    if (*run) return cmd_run(arg1, o);
    if (*oracle) return cmd_oracle(arg1, o);
    if (*diff) return cmd_diff(arg1, arg2);
    if (*decode) return cmd_decode_trace(arg1);
    if (*stats) return cmd_stats(arg1, o);
    if (*demo_cmd) return cmd_demo(arg1, o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
