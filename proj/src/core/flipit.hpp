#pragma once

// Per-service FlipIt game with periodic play: each side commits to a renewal
// frequency, control proportions follow from the two frequencies, and the
// equilibrium is available in closed form.

#include <span>
#include <string_view>

namespace cloudtrust::flipit {

struct FlipItParams {
  double v_A = 0.0;      // attacker value of holding the service, per unit time
  double v_D = 0.0;      // defender value, per unit time
  double alpha_A = 1.0;  // attacker cost per move
  double alpha_D = 1.0;  // defender cost per move
};

enum class Regime { AttackerOut, DefenderDominant, AttackerDominant, DefenderOut };

std::string_view to_string(Regime r) noexcept;

struct FlipItEquilibrium {
  double f_A = 0.0;
  double f_D = 0.0;
  double p_A = 0.0;
  double p_D = 1.0;
  double u_A = 0.0;
  double u_D = 0.0;
  Regime regime = Regime::AttackerOut;
};

struct Utilities {
  double attacker = 0.0;
  double defender = 0.0;
};

enum class Role { Attacker, Defender };

struct SolveOptions {
  // Attack frequency used when the defender abandons the service; any
  // positive value yields p_A = 1.
  double min_frequency = 1e-3;
};

// Throws DomainError unless both costs are positive and both values finite, >= 0.
void validate(const FlipItParams& p);

// Long-run share of time the attacker holds the service.
double control_ratio(double f_A, double f_D);

Utilities flipit_utilities(const FlipItParams& p, double f_A, double f_D);

FlipItEquilibrium solve_flipit_ne(const FlipItParams& p, const SolveOptions& opts = {});

// Equilibrium compromise probability as a function of the value ratio v_A / v_D.
double flipit_map(double v_AD, double alpha_A, double alpha_D);

// Best grid frequency for `role` against a fixed opponent frequency. Ties go
// to the smaller frequency.
double best_response_oracle(const FlipItParams& p, Role role, double opponent_freq,
                            std::span<const double> grid);

}  // namespace cloudtrust::flipit
