#pragma once

// Scenario description shared by the CLI, the C API and the tests, plus its
// JSON encoding. The schema is documented in docs/scenario-schema.md.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "control.hpp"
#include "signaling.hpp"

namespace cloudtrust {

enum class ReceiverSource { Additive, Dense, Estimate };

// A named strategy preset for `simulate` and `bench`. Frequencies are FlipIt
// moves per control step; the other vectors are per service.
struct StrategyProfile {
  std::string name;
  std::vector<double> f_A;
  std::vector<double> f_D;
  std::vector<double> attacker_low;
  std::vector<double> defender_low;
  std::vector<double> trust_low;
  std::vector<double> trust_high;

  bool operator==(const StrategyProfile&) const = default;
};

struct MonteCarloSettings {
  int episodes = 100;
  std::uint64_t seed = 1;
  double J_max = 1e9;
  bool operator==(const MonteCarloSettings&) const = default;
};

struct SolverSettings {
  double delta_p = 1e-6;
  int max_rounds = 100;
  double eps_eq = 1e-6;
  int max_iters = 500;
  double off_path_belief = 1.0;
  double min_frequency = 1e-3;
  int max_period = 4;
  double cycle_tol = 1e-4;
  double mixed_tol = 1e-4;
  bool operator==(const SolverSettings&) const = default;
};

struct Scenario {
  std::string name;
  std::size_t services = 0;
  std::vector<double> alpha_A;
  std::vector<double> alpha_D;
  std::vector<double> initial_priors;
  std::optional<signaling::Profile> initial_profile;
  std::vector<signaling::ServiceSenderTables> sender_tables;

  ReceiverSource receiver_source = ReceiverSource::Additive;
  std::vector<signaling::ServiceReceiverPayoff> additive_receiver;
  signaling::ReceiverUtilityTable dense_receiver;

  std::optional<control::ControlSetup> control;
  control::UtilityMap utility_map;
  MonteCarloSettings monte_carlo;
  SolverSettings solver;
  std::vector<StrategyProfile> profiles;

  // Not part of the value: which optional fields were filled by defaults.
  std::vector<std::string> defaults_applied;

  const StrategyProfile* find_profile(const std::string& name) const;
  // Throws ConfigError naming the first offending field.
  void validate() const;
};

bool operator==(const Scenario& a, const Scenario& b);

// Parses and validates a scenario document. `source` names the document in
// diagnostics. Errors carry the offending field and its line.
Scenario parse_scenario(const std::string& text, const std::string& source = "<memory>");
Scenario load_scenario(const std::string& path);

// Canonical JSON encoding; parse_scenario(write_scenario(s)) == s.
std::string write_scenario(const Scenario& s);

// FNV-1a of the canonical encoding, as 16 hex digits.
std::string scenario_hash(const Scenario& s);

Scenario four_service_example();
Scenario vehicle_scenario_default();

}  // namespace cloudtrust
