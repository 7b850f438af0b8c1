#pragma once

// Operations behind the command-line tool: solve a scenario, simulate one
// strategy profile, run the cost benchmark, and check a scenario.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "control.hpp"
#include "gne.hpp"
#include "scenario.hpp"

namespace cloudtrust::harness {

struct PreparedTables {
  signaling::UtilityTables tables;
  std::optional<control::TableEstimate> estimate;  // set when the receiver table was simulated
};

// Builds the utility tables, estimating the receiver table from the control
// model when the scenario asks for it.
PreparedTables prepare_tables(const Scenario& s);

gne::GneProblem make_problem(const Scenario& s, const signaling::UtilityTables& tables);

struct GneRun {
  gne::GneProblem problem;
  gne::GneResult result;
  gne::Verification verification;
  std::optional<control::TableEstimate> estimate;
  std::string scenario_hash;
  std::uint64_t seed = 0;
};

GneRun run_gne(const Scenario& s);

// JSON report; layout documented in docs/gne-report-schema.md.
std::string gne_report_json(const GneRun& run);

// "# scenario=<hash> seed=<seed>"
std::string header_comment(const Scenario& s, std::uint64_t seed);

const control::ControlSetup& require_control(const Scenario& s);

// Runs one episode of the named profile. The FlipIt schedule and the episode
// noise are both derived from `seed`.
control::SimTrace simulate_profile(const Scenario& s, const StrategyProfile& profile,
                                   std::uint64_t seed);

struct BenchTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> J;  // J[trial][column]

  std::vector<double> means() const;
  std::string to_csv(const std::string& header_comment) const;
};

// Every profile on every trial. Trial t uses the same seed for all profiles,
// so columns differ only by strategy.
BenchTable bench(const Scenario& s, int trials, std::uint64_t seed);

struct ValidationReport {
  signaling::AssumptionReport assumptions;
  std::vector<std::string> notes;
  std::size_t capped_episodes = 0;
  bool ok() const noexcept { return assumptions.all_passed(); }
  std::string to_text() const;
};

ValidationReport validate_scenario(const Scenario& s);

}  // namespace cloudtrust::harness
