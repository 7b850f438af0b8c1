// Command-line front end. Talks to the solver only through the C API.
//
//   cloudtrust_cli gne      <scenario> [-o report.json]
//   cloudtrust_cli simulate <scenario> --profile NAME [--seed S] [-o trace.csv]
//   cloudtrust_cli bench    <scenario> [--trials N] [--seed S] [-o bench.csv]
//   cloudtrust_cli validate <scenario>
//
// <scenario> is a JSON file or "builtin:fourservice" / "builtin:vehicles".
// Exit codes: 0 success, 1 runtime error, 2 usage error (including an unknown
// profile or builtin), 3 solver reported failure or assumptions violated.

#include <cloudtrust/cloudtrust.h>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"

namespace {

constexpr int kRuntimeError = 1;
constexpr int kUsageError = 2;
constexpr int kSolverFailure = 3;

struct CtError {
  ct_status code;
  std::string message;
};

void check(ct_status st) {
  if (st != CT_OK) throw CtError{st, ct_last_error()};
}

struct StringDeleter {
  void operator()(char* s) const { ct_string_free(s); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

struct ScenarioDeleter {
  void operator()(ct_scenario* s) const { ct_scenario_free(s); }
};
using ScenarioHandle = std::unique_ptr<ct_scenario, ScenarioDeleter>;

ScenarioHandle open_scenario(const std::string& source) {
  ct_scenario* raw = nullptr;
  const std::string prefix = "builtin:";
  if (source.rfind(prefix, 0) == 0) {
    check(ct_scenario_builtin(source.substr(prefix.size()).c_str(), &raw));
  } else {
    check(ct_scenario_load(source.c_str(), &raw));
  }
  ScenarioHandle s(raw);
  char* log = nullptr;
  check(ct_scenario_defaults_log(s.get(), &log));
  OwnedString owned(log);
  std::string text = owned.get();
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t end = text.find('\n', start);
    std::cerr << "default applied: " << text.substr(start, end - start) << "\n";
    start = end == std::string::npos ? text.size() : end + 1;
  }
  return s;
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CtError{CT_ERR_CONFIG, "cannot write " + path};
  out << text;
  std::cerr << "wrote " << path << "\n";
}

int run_gne(const std::string& scenario, const std::string& out_path) {
  ScenarioHandle s = open_scenario(scenario);
  ct_gne_result* raw = nullptr;
  check(ct_gne_solve(s.get(), &raw));
  std::unique_ptr<ct_gne_result, void (*)(ct_gne_result*)> r(raw, ct_gne_free);
  char* json = nullptr;
  check(ct_gne_to_json(r.get(), &json));
  emit(OwnedString(json).get(), out_path);
  ct_gne_status status{};
  check(ct_gne_result_status(r.get(), &status));
  if (status == CT_GNE_FAILED) {
    std::cerr << "solver reported failure; see the report's message field\n";
    return kSolverFailure;
  }
  return 0;
}

int run_simulate(const std::string& scenario, const std::string& profile, std::uint64_t seed,
                 const std::string& out_path) {
  ScenarioHandle s = open_scenario(scenario);
  ct_trace* raw = nullptr;
  check(ct_simulate(s.get(), profile.c_str(), seed, &raw));
  std::unique_ptr<ct_trace, void (*)(ct_trace*)> t(raw, ct_trace_free);
  char* csv = nullptr;
  check(ct_trace_to_csv(t.get(), &csv));
  emit(OwnedString(csv).get(), out_path);
  return 0;
}

int run_bench(const std::string& scenario, int trials, std::uint64_t seed, const std::string& out_path) {
  ScenarioHandle s = open_scenario(scenario);
  char* csv = nullptr;
  check(ct_bench(s.get(), trials, seed, &csv));
  emit(OwnedString(csv).get(), out_path);
  return 0;
}

int run_validate(const std::string& scenario) {
  ScenarioHandle s = open_scenario(scenario);
  char* report = nullptr;
  int ok = 0;
  check(ct_scenario_validate(s.get(), &report, &ok));
  std::cout << OwnedString(report).get();
  std::cout << (ok ? "assumptions satisfied\n" : "assumptions violated\n");
  return ok ? 0 : kSolverFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trust and takeover equilibria for cloud-enabled control systems"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ct_version()));

  std::string scenario;
  std::string out_path;
  std::string profile;
  std::uint64_t seed = 1;
  int trials = 10;

  auto* gne = app.add_subcommand("gne", "solve for the gestalt equilibrium and write a JSON report");
  gne->add_option("scenario", scenario, "scenario file or builtin:NAME")->required();
  gne->add_option("-o,--out", out_path, "output file (default stdout)");

  auto* sim = app.add_subcommand("simulate", "run one closed-loop episode and write the CSV trace");
  sim->add_option("scenario", scenario, "scenario file or builtin:NAME")->required();
  sim->add_option("--profile", profile, "strategy profile name")->required();
  sim->add_option("--seed", seed, "random seed");
  sim->add_option("-o,--out", out_path, "output file (default stdout)");

  auto* bench = app.add_subcommand("bench", "cost table over every profile, one row per trial");
  bench->add_option("scenario", scenario, "scenario file or builtin:NAME")->required();
  bench->add_option("--trials", trials, "number of trials")->check(CLI::PositiveNumber);
  bench->add_option("--seed", seed, "random seed");
  bench->add_option("-o,--out", out_path, "output file (default stdout)");

  auto* validate = app.add_subcommand("validate", "check the scenario's utility tables and invariants");
  validate->add_option("scenario", scenario, "scenario file or builtin:NAME")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version requests exit 0; every other parse problem is usage.
    return app.exit(e) == 0 ? 0 : kUsageError;
  }

  try {
    if (gne->parsed()) return run_gne(scenario, out_path);
    if (sim->parsed()) return run_simulate(scenario, profile, seed, out_path);
    if (bench->parsed()) return run_bench(scenario, trials, seed, out_path);
    if (validate->parsed()) return run_validate(scenario);
  } catch (const CtError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code == CT_ERR_NOT_FOUND ? kUsageError : kRuntimeError;
  }
  return kRuntimeError;
}
