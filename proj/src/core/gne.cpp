#include "gne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "errors.hpp"

namespace cloudtrust::gne {

namespace {

using signaling::EquilibriumClass;
using signaling::PbneResult;
using signaling::Profile;

bool pooled_low_everywhere(const PbneResult& r) {
  for (EquilibriumClass c : r.classes) {
    if (c == EquilibriumClass::H1 || c == EquilibriumClass::H2) return false;
  }
  for (std::size_t i = 0; i < r.senders.services(); ++i) {
    if (r.senders.low_given_attacker[i] != 1.0 || r.senders.low_given_defender[i] != 1.0) {
      return false;
    }
  }
  return true;
}

Profile pooled_low_profile(std::size_t n) {
  return {signaling::SenderStrategy::uniform(n, 1.0, 1.0),
          signaling::ReceiverStrategy::trust_all(n)};
}

// Signaling stage of a round. Best-response iteration runs from the warm
// start; if it settles anywhere other than low-risk pooling (or does not
// settle), it is restarted from the trusting low-risk pool, which is the
// refinement the selection rule prefers.
PbneResult signaling_stage(const std::vector<double>& priors, const GneProblem& pb,
                           const std::optional<Profile>& start) {
  PbneResult r = signaling::solve_pbne(priors, pb.tables, start, pb.pbne);
  if (r.converged && pooled_low_everywhere(r)) return r;
  PbneResult retry =
      signaling::solve_pbne(priors, pb.tables, pooled_low_profile(pb.services()), pb.pbne);
  if (retry.converged || !r.converged) return retry;
  return r;
}

flipit::FlipItEquilibrium flip(const GneProblem& pb, std::size_t i, double v_A, double v_D) {
  return flipit::solve_flipit_ne({v_A, v_D, pb.alpha_A[i], pb.alpha_D[i]}, {pb.min_frequency});
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a[i] - b[i]));
  return d;
}

void fill_thresholds(GneResult& res, const GneProblem& pb) {
  const std::size_t n = pb.services();
  res.p_diamond.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    res.p_diamond[i] = signaling::compromise_threshold(i, pb.tables, {res.p_A, res.receiver.trust_low});
  }
}

void fill_ratios_and_flags(GneResult& res) {
  const std::size_t n = res.v_A.size();
  res.v_AD.resize(n);
  res.untrusted_and_idle.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    res.v_AD[i] = value_ratio(res.v_A[i], res.v_D[i]);
    res.untrusted_and_idle[i] = res.v_A[i] == 0.0 && res.v_D[i] == 0.0;
  }
}

void pin_cycling_services(GneResult& res, const GneProblem& pb) {
  for (std::size_t i : res.cycle->services) {
    const MixedResolution mix = mixed_gne_search(i, pb, res.p_A, res.receiver);
    res.p_A[i] = mix.p_diamond;
    res.senders.low_given_attacker[i] = 1.0;
    res.senders.low_given_defender[i] = 1.0;
    res.receiver.trust_low[i] = mix.q;
    res.receiver.trust_high[i] = 0.0;
    res.v_A[i] = mix.q * pb.tables.senders[i].attacker.low_trust;
    res.v_D[i] = mix.q * pb.tables.senders[i].defender.low_trust;
    res.classes[i] = signaling::classify(1.0, 1.0, mix.q, 0.0, pb.pbne.class_tol);
    res.flipit[i] = flip(pb, i, res.v_A[i], res.v_D[i]);
    res.mixed.push_back(mix);
  }
}

}  // namespace

void GneProblem::validate() const {
  const std::size_t n = services();
  if (n == 0) throw ConfigError("problem has no services");
  if (alpha_D.size() != n) throw ConfigError("alpha_D length differs from alpha_A");
  if (initial_priors.size() != n) throw ConfigError("initial priors length differs from alpha_A");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(alpha_A[i] > 0.0) || !std::isfinite(alpha_A[i])) {
      throw ConfigError("alpha_A[" + std::to_string(i) + "] must be a finite positive cost");
    }
    if (!(alpha_D[i] > 0.0) || !std::isfinite(alpha_D[i])) {
      throw ConfigError("alpha_D[" + std::to_string(i) + "] must be a finite positive cost");
    }
    if (!(initial_priors[i] >= 0.0 && initial_priors[i] <= 1.0)) {
      throw ConfigError("initial prior " + std::to_string(i) + " must lie in [0,1]");
    }
  }
  if (tables.services() != n) throw ConfigError("utility tables cover a different number of services");
  tables.check_shape();
  if (!(delta_p > 0.0) || max_rounds < 1 || max_period < 2 || !(cycle_tol > 0.0) ||
      !(mixed_tol > 0.0) || !(min_frequency > 0.0)) {
    throw ConfigError("solver tolerances must be positive");
  }
}

std::string_view to_string(GneStatus s) noexcept {
  switch (s) {
    case GneStatus::Converged:
      return "converged";
    case GneStatus::LimitCycleResolved:
      return "limit-cycle-resolved";
    case GneStatus::Failed:
      return "failed";
  }
  return "failed";
}

double value_ratio(double v_A, double v_D) noexcept {
  if (v_D == 0.0) return v_A == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return v_A / v_D;
}

std::optional<LimitCycle> detect_limit_cycle(const std::vector<std::vector<double>>& trace,
                                             int max_period, double tol) {
  const std::size_t len = trace.size();
  if (len < 4) return std::nullopt;
  const std::size_t n = trace.front().size();
  for (int period = 2; period <= max_period; ++period) {
    const auto P = static_cast<std::size_t>(period);
    if (len < 2 * P) break;
    bool repeats = true;
    for (std::size_t t = len - P; t < len && repeats; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        if (std::fabs(trace[t][i] - trace[t - P][i]) > tol) {
          repeats = false;
          break;
        }
      }
    }
    if (!repeats) continue;
    LimitCycle cyc{period, {}};
    for (std::size_t i = 0; i < n; ++i) {
      double lo = trace[len - 1][i], hi = lo;
      for (std::size_t t = len - P; t < len; ++t) {
        lo = std::min(lo, trace[t][i]);
        hi = std::max(hi, trace[t][i]);
      }
      if (hi - lo > tol) cyc.services.push_back(i);
    }
    // A window that repeats without moving is convergence, not a cycle.
    if (!cyc.services.empty()) return cyc;
    return std::nullopt;
  }
  return std::nullopt;
}

MixedResolution mixed_gne_search(std::size_t service, const GneProblem& pb,
                                 const std::vector<double>& priors,
                                 const signaling::ReceiverStrategy& receiver) {
  pb.validate();
  if (service >= pb.services()) throw DomainError("service index out of range");
  MixedResolution out;
  out.service = service;
  out.p_diamond = signaling::compromise_threshold(service, pb.tables, {priors, receiver.trust_low});

  const double uA = pb.tables.senders[service].attacker.low_trust;
  const double uD = pb.tables.senders[service].defender.low_trust;
  // Absolute values go through the full solver so participation can react to scale.
  const auto p_of = [&](double q) { return flip(pb, service, q * uA, q * uD).p_A; };

  const double p_full = p_of(1.0);
  if (p_full <= out.p_diamond + pb.mixed_tol) {
    out.q = out.q_lo = out.q_hi = 1.0;
    out.flipit_p_A = p_full;
    out.note = "full trust already keeps compromise at or below the threshold";
    return out;
  }

  double lo_p = p_of(1e-2), hi_p = lo_p;
  for (int j = 1; j <= 100; ++j) {
    const double p = p_of(j / 100.0);
    lo_p = std::min(lo_p, p);
    hi_p = std::max(hi_p, p);
  }
  if (hi_p - lo_p <= 1e-12) {
    out.interval_flagged = true;
    out.q_lo = 0.0;
    out.q_hi = 1.0;
    out.q = 0.5;
    out.flipit_p_A = p_of(out.q);
    out.note =
        "FlipIt compromise depends only on the value ratio, so every q in (0,1] gives the same "
        "response; the receiver is indifferent at the threshold and q is reported at the midpoint";
    return out;
  }

  // p_of(0) = 0 sits below the threshold and p_of(1) above it.
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    const double p = p_of(mid);
    if (std::fabs(p - out.p_diamond) <= pb.mixed_tol) {
      lo = hi = mid;
      break;
    }
    if (p < out.p_diamond) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  out.q = out.q_lo = out.q_hi = lo;
  out.flipit_p_A = p_of(lo);
  if (!(lo > 0.0) || std::fabs(out.flipit_p_A - out.p_diamond) > pb.mixed_tol) {
    throw NumericError("no positive trust mix on service " + std::to_string(service) +
                       " brings FlipIt compromise to the threshold");
  }
  out.note = "trust mix found by bisection";
  return out;
}

GneResult solve_gne(const GneProblem& pb) {
  pb.validate();
  const std::size_t n = pb.services();
  GneResult res;
  std::vector<double> priors = pb.initial_priors;
  res.trace.push_back(priors);
  std::optional<Profile> start = pb.initial_profile;
  PbneResult last;

  for (int round = 1; round <= pb.max_rounds; ++round) {
    last = signaling_stage(priors, pb, start);
    res.rounds = round;
    res.class_trace.push_back(last.classes);
    if (!last.converged) {
      res.status = GneStatus::Failed;
      res.message = "signaling best-response iteration did not settle in round " +
                    std::to_string(round);
      res.p_A = priors;
      break;
    }
    start = Profile{last.senders, last.receiver};

    std::vector<double> next(n);
    res.flipit.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
      res.flipit[i] = flip(pb, i, last.v_A[i], last.v_D[i]);
      next[i] = res.flipit[i].p_A;
    }
    res.trace.push_back(next);
    const double change = sup_diff(next, priors);
    priors = next;

    if (change < pb.delta_p) {
      res.status = GneStatus::Converged;
      break;
    }
    if (auto cyc = detect_limit_cycle(res.trace, pb.max_period, pb.cycle_tol)) {
      res.cycle = cyc;
      res.status = GneStatus::LimitCycleResolved;
      break;
    }
    if (round == pb.max_rounds) {
      res.status = GneStatus::Failed;
      res.message = "no fixed point or limit cycle within " + std::to_string(pb.max_rounds) + " rounds";
    }
  }

  res.senders = last.senders;
  res.receiver = last.receiver;
  res.belief = last.belief;
  res.classes = last.classes;
  res.v_A = last.v_A;
  res.v_D = last.v_D;
  if (res.p_A.empty()) res.p_A = priors;
  if (res.senders.services() != n) {
    fill_ratios_and_flags(res);
    return res;
  }

  if (res.status == GneStatus::LimitCycleResolved) {
    // The services that keep cycling are pinned at their thresholds. The
    // others keep the value they had on the last round. Each threshold depends
    // on the other services' priors and trust, so with several cycling
    // services the pinning is repeated until the thresholds agree.
    try {
      for (int sweep = 0; sweep < 100; ++sweep) {
        const std::vector<double> before = res.p_A;
        res.mixed.clear();
        pin_cycling_services(res, pb);
        if (sup_diff(before, res.p_A) <= 1e-13) break;
      }
      res.belief = signaling::beliefs_for(res.p_A, res.senders, pb.pbne.off_path_attacker_belief);
    } catch (const NumericError& e) {
      res.status = GneStatus::Failed;
      res.message = e.what();
    }
  }

  fill_ratios_and_flags(res);
  fill_thresholds(res, pb);
  if (res.status == GneStatus::Converged) {
    for (std::size_t i = 0; i < n; ++i) {
      if (res.untrusted_and_idle[i]) {
        res.status = GneStatus::Failed;
        res.message = "service " + std::to_string(i) +
                      " is distrusted and unattacked at the fixed point, which cannot be an "
                      "equilibrium of the combined game";
        break;
      }
    }
  }
  return res;
}

Verification verify_gne(const GneResult& c, const GneProblem& pb, double tol) {
  pb.validate();
  const std::size_t n = pb.services();
  Verification v;
  if (c.p_A.size() != n || c.v_A.size() != n || c.v_D.size() != n || c.senders.services() != n ||
      c.receiver.services() != n) {
    v.passed = false;
    v.deviation_gain = std::numeric_limits<double>::infinity();
    return v;
  }
  v.flipit_residual.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    v.flipit_residual[i] = std::fabs(c.p_A[i] - flip(pb, i, c.v_A[i], c.v_D[i]).p_A);
  }

  // The candidate profile must be an equilibrium at its own priors, and
  // best-response iteration started there must reproduce its values.
  const signaling::Belief mu =
      signaling::beliefs_for(c.p_A, c.senders, pb.pbne.off_path_attacker_belief);
  v.deviation_gain =
      signaling::deviation_gains(c.p_A, c.senders, c.receiver, mu, pb.tables).max();
  const PbneResult again =
      signaling::solve_pbne(c.p_A, pb.tables, Profile{c.senders, c.receiver}, pb.pbne);
  v.value_residual.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    v.value_residual[i] =
        std::max(std::fabs(again.v_A[i] - c.v_A[i]), std::fabs(again.v_D[i] - c.v_D[i]));
  }

  v.passed = v.deviation_gain <= pb.pbne.eps_eq && again.converged;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(v.flipit_residual[i] <= tol) || !(v.value_residual[i] <= pb.pbne.eps_eq)) v.passed = false;
  }
  return v;
}

std::vector<std::vector<double>> composed_map(const std::vector<double>& v_AD,
                                              const GneProblem& pb) {
  pb.validate();
  const std::size_t n = pb.services();
  if (v_AD.size() != n) throw DomainError("ratio vector length differs from service count");
  std::vector<double> priors(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double top = pb.tables.senders[i].attacker.low_trust / pb.tables.senders[i].defender.low_trust;
    if (!(v_AD[i] >= 0.0) || v_AD[i] > top * (1.0 + 1e-12)) {
      throw DomainError("ratio for service " + std::to_string(i) + " lies outside [0, " +
                        std::to_string(top) + "]");
    }
    priors[i] = flipit::flipit_map(v_AD[i], pb.alpha_A[i], pb.alpha_D[i]);
  }

  const PbneResult r = signaling_stage(priors, pb, pooled_low_profile(n));
  std::vector<double> image(n);
  for (std::size_t i = 0; i < n; ++i) image[i] = value_ratio(r.v_A[i], r.v_D[i]);
  std::vector<std::vector<double>> out{image};

  // At a threshold prior the receiver may also refuse trust, which sends that
  // ratio to zero.
  for (std::size_t i = 0; i < n; ++i) {
    const double pd = signaling::compromise_threshold(i, pb.tables, {priors, r.receiver.trust_low});
    if (std::fabs(priors[i] - pd) <= 1e-9 && image[i] != 0.0) {
      std::vector<double> alt = image;
      alt[i] = 0.0;
      out.push_back(alt);
    }
  }
  return out;
}

}  // namespace cloudtrust::gne
