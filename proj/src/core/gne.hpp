#pragma once

// Cross-layer equilibrium: FlipIt compromise probabilities become signaling
// priors, and the signaling equilibrium values become FlipIt incentives. The
// solver alternates the two until the priors stop moving.

#include <optional>
#include <string>
#include <vector>

#include "flipit.hpp"
#include "signaling.hpp"

namespace cloudtrust::gne {

struct GneProblem {
  std::vector<double> alpha_A;
  std::vector<double> alpha_D;
  signaling::UtilityTables tables;
  std::vector<double> initial_priors;
  std::optional<signaling::Profile> initial_profile;

  signaling::PbneOptions pbne;
  double delta_p = 1e-6;
  int max_rounds = 100;
  int max_period = 4;
  double cycle_tol = 1e-4;
  double mixed_tol = 1e-4;
  double min_frequency = 1e-3;

  std::size_t services() const noexcept { return alpha_A.size(); }
  // Throws ConfigError describing the first inconsistent field.
  void validate() const;
};

enum class GneStatus { Converged, LimitCycleResolved, Failed };

std::string_view to_string(GneStatus s) noexcept;

struct LimitCycle {
  int period = 0;
  std::vector<std::size_t> services;  // indices whose priors keep moving
};

struct MixedResolution {
  std::size_t service = 0;
  double p_diamond = 0.0;
  double q = 1.0;
  double q_lo = 0.0;
  double q_hi = 1.0;
  // Set when the FlipIt response does not depend on q over (0, 1], so any q
  // in the interval is an equally valid report.
  bool interval_flagged = false;
  double flipit_p_A = 0.0;  // FlipIt compromise probability at the reported q
  std::string note;
};

struct GneResult {
  GneStatus status = GneStatus::Failed;
  int rounds = 0;
  std::vector<double> p_A;
  std::vector<double> v_A;
  std::vector<double> v_D;
  std::vector<double> v_AD;
  std::vector<double> p_diamond;
  signaling::SenderStrategy senders;
  signaling::ReceiverStrategy receiver;
  signaling::Belief belief;
  std::vector<signaling::EquilibriumClass> classes;
  std::vector<flipit::FlipItEquilibrium> flipit;
  std::vector<bool> untrusted_and_idle;  // services with v_A = v_D = 0
  std::vector<std::vector<double>> trace;  // priors entering each round, then the final priors
  std::vector<std::vector<signaling::EquilibriumClass>> class_trace;
  std::optional<LimitCycle> cycle;
  std::vector<MixedResolution> mixed;
  std::string message;
};

// Ratio with the convention 0/0 = 0 for services nobody values.
double value_ratio(double v_A, double v_D) noexcept;

std::optional<LimitCycle> detect_limit_cycle(const std::vector<std::vector<double>>& trace,
                                             int max_period = 4, double tol = 1e-4);

// Trust-mix search for a service stuck in a limit cycle. `priors` and
// `receiver` describe the rest of the equilibrium; their entries for `service`
// are ignored.
MixedResolution mixed_gne_search(std::size_t service, const GneProblem& problem,
                                 const std::vector<double>& priors,
                                 const signaling::ReceiverStrategy& receiver);

GneResult solve_gne(const GneProblem& problem);

struct Verification {
  bool passed = false;
  std::vector<double> flipit_residual;   // per service
  std::vector<double> value_residual;    // per service, max of attacker and defender
  double deviation_gain = 0.0;           // signaling profile at the candidate priors
};

Verification verify_gne(const GneResult& candidate, const GneProblem& problem, double tol = 1e-6);

// One application of the composed map on value ratios: FlipIt per service,
// then the selected signaling equilibrium. Several images appear when a prior
// sits exactly at a trust threshold.
std::vector<std::vector<double>> composed_map(const std::vector<double>& v_AD,
                                              const GneProblem& problem);

}  // namespace cloudtrust::gne
