#include "flipit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "errors.hpp"

namespace cloudtrust::flipit {

namespace {

void require_rate(double f, const char* name) {
  if (std::isnan(f) || f < 0.0) {
    throw DomainError(std::string(name) + " must be a non-negative number");
  }
}

void require_cost(double alpha, const char* name) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw DomainError(std::string(name) + " must be a finite positive cost");
  }
}

FlipItEquilibrium make_equilibrium(const FlipItParams& p, double f_A, double f_D, double p_A,
                                   Regime regime) {
  FlipItEquilibrium eq;
  eq.f_A = f_A;
  eq.f_D = f_D;
  eq.p_A = p_A;
  eq.p_D = 1.0 - p_A;
  eq.regime = regime;
  const Utilities u = flipit_utilities(p, f_A, f_D);
  eq.u_A = u.attacker;
  eq.u_D = u.defender;
  return eq;
}

}  // namespace

std::string_view to_string(Regime r) noexcept {
  switch (r) {
    case Regime::AttackerOut:
      return "attacker-out";
    case Regime::DefenderDominant:
      return "defender-dominant";
    case Regime::AttackerDominant:
      return "attacker-dominant";
    case Regime::DefenderOut:
      return "defender-out";
  }
  return "unknown";
}

void validate(const FlipItParams& p) {
  if (!std::isfinite(p.v_A) || p.v_A < 0.0) throw DomainError("v_A must be finite and >= 0");
  if (!std::isfinite(p.v_D) || p.v_D < 0.0) throw DomainError("v_D must be finite and >= 0");
  require_cost(p.alpha_A, "alpha_A");
  require_cost(p.alpha_D, "alpha_D");
}

double control_ratio(double f_A, double f_D) {
  require_rate(f_A, "f_A");
  require_rate(f_D, "f_D");
  if (std::isinf(f_A) && std::isinf(f_D)) {
    throw DomainError("control_ratio is undefined when both frequencies are infinite");
  }
  if (f_A == 0.0) return 0.0;
  if (f_D >= f_A) return f_A / (2.0 * f_D);
  return 1.0 - f_D / (2.0 * f_A);
}

Utilities flipit_utilities(const FlipItParams& p, double f_A, double f_D) {
  validate(p);
  const double rho = control_ratio(f_A, f_D);
  return {p.v_A * rho - p.alpha_A * f_A, p.v_D * (1.0 - rho) - p.alpha_D * f_D};
}

double flipit_map(double v_AD, double alpha_A, double alpha_D) {
  if (std::isnan(v_AD) || v_AD < 0.0) throw DomainError("value ratio must be >= 0");
  require_cost(alpha_A, "alpha_A");
  require_cost(alpha_D, "alpha_D");
  if (v_AD <= alpha_A / alpha_D) return alpha_D * v_AD / (2.0 * alpha_A);
  return 1.0 - alpha_A / (2.0 * alpha_D * v_AD);
}

FlipItEquilibrium solve_flipit_ne(const FlipItParams& p, const SolveOptions& opts) {
  validate(p);
  if (!(opts.min_frequency > 0.0)) throw DomainError("min_frequency must be positive");

  if (p.v_A == 0.0) return make_equilibrium(p, 0.0, 0.0, 0.0, Regime::AttackerOut);
  if (p.v_D == 0.0) return make_equilibrium(p, opts.min_frequency, 0.0, 1.0, Regime::DefenderOut);

  // First-order conditions of the two utility rates on each branch of the
  // control ratio. p_A goes through flipit_map so the ratio map and the full
  // solve agree bit for bit.
  const double r = p.v_A / p.v_D;
  const double p_A = flipit_map(r, p.alpha_A, p.alpha_D);
  FlipItEquilibrium eq;
  if (r <= p.alpha_A / p.alpha_D) {
    const double f_D = p.v_A / (2.0 * p.alpha_A);
    const double f_A = p.v_A * p.v_A * p.alpha_D / (2.0 * p.alpha_A * p.alpha_A * p.v_D);
    eq = make_equilibrium(p, f_A, f_D, p_A, Regime::DefenderDominant);
  } else {
    const double f_A = p.v_D / (2.0 * p.alpha_D);
    const double f_D = p.v_D * p.v_D * p.alpha_A / (2.0 * p.alpha_D * p.alpha_D * p.v_A);
    eq = make_equilibrium(p, f_A, f_D, p_A, Regime::AttackerDominant);
  }

  // Participation. The weaker side earns exactly zero at the interior
  // solution, so only a clearly negative rate (beyond rounding) counts.
  const double tol = 1e-9 * (1.0 + std::max(p.v_A, p.v_D));
  if (eq.u_A < -tol) return make_equilibrium(p, 0.0, 0.0, 0.0, Regime::AttackerOut);
  if (eq.u_D < -tol) return make_equilibrium(p, opts.min_frequency, 0.0, 1.0, Regime::DefenderOut);
  return eq;
}

double best_response_oracle(const FlipItParams& p, Role role, double opponent_freq,
                            std::span<const double> grid) {
  validate(p);
  require_rate(opponent_freq, "opponent frequency");
  if (grid.empty()) throw DomainError("best_response_oracle needs a non-empty grid");

  double best_f = std::numeric_limits<double>::quiet_NaN();
  double best_u = -std::numeric_limits<double>::infinity();
  for (double f : grid) {
    require_rate(f, "grid frequency");
    const double u = role == Role::Attacker ? flipit_utilities(p, f, opponent_freq).attacker
                                            : flipit_utilities(p, opponent_freq, f).defender;
    if (u > best_u || (u == best_u && f < best_f)) {
      best_u = u;
      best_f = f;
    }
  }
  return best_f;
}

}  // namespace cloudtrust::flipit
