#include "signaling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "errors.hpp"

namespace cloudtrust::signaling {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Scale-aware tie test for best responses.
bool strictly_better(double a, double b) {
  return a - b > 1e-12 * (1.0 + std::fabs(a) + std::fabs(b));
}

void require_prob(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError(std::string(what) + " must lie in [0,1]");
}

void check_priors(const std::vector<double>& priors, std::size_t n) {
  if (priors.size() != n) throw DomainError("prior vector length does not match service count");
  for (double p : priors) require_prob(p, "prior");
}

// Probability that service j emits message bit `high` on path.
double message_prob(std::size_t j, bool high, const std::vector<double>& priors,
                    const SenderStrategy& s) {
  const Message m = high ? Message::High : Message::Low;
  return priors[j] * s.prob(j, SenderRole::Attacker, m) +
         (1.0 - priors[j]) * s.prob(j, SenderRole::Defender, m);
}

std::string describe(std::size_t n, Bits theta, Bits m, Bits a) {
  std::string out = "theta=(";
  for (std::size_t i = 0; i < n; ++i) out += bit(theta, i) ? (i ? ",A" : "A") : (i ? ",D" : "D");
  out += ") m=(";
  for (std::size_t i = 0; i < n; ++i) out += bit(m, i) ? (i ? ",H" : "H") : (i ? ",L" : "L");
  out += ") a=(";
  for (std::size_t i = 0; i < n; ++i) out += bit(a, i) ? (i ? ",N" : "N") : (i ? ",T" : "T");
  return out + ")";
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

// Value of one sender's pure message choice against the factored receiver.
double pure_message_value(const SenderPayoff& u, double trust) {
  return trust * u.at(Message::Low, TrustAction::Trust) +
         (1.0 - trust) * u.at(Message::Low, TrustAction::NotTrust);
}

double pure_high_value(const SenderPayoff& u, double trust) {
  return trust * u.at(Message::High, TrustAction::Trust) +
         (1.0 - trust) * u.at(Message::High, TrustAction::NotTrust);
}

double sup_change(const SenderStrategy& a, const SenderStrategy& b, const ReceiverStrategy& ra,
                  const ReceiverStrategy& rb) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.services(); ++i) {
    d = std::max({d, std::fabs(a.low_given_attacker[i] - b.low_given_attacker[i]),
                  std::fabs(a.low_given_defender[i] - b.low_given_defender[i]),
                  std::fabs(ra.trust_low[i] - rb.trust_low[i]),
                  std::fabs(ra.trust_high[i] - rb.trust_high[i])});
  }
  return d;
}

void blend(std::vector<double>& next, const std::vector<double>& cur, double w) {
  for (std::size_t i = 0; i < next.size(); ++i) next[i] = w * next[i] + (1.0 - w) * cur[i];
}

void finish(PbneResult& res, const std::vector<double>& priors, const UtilityTables& tables,
            const PbneOptions& opts) {
  const std::size_t n = tables.services();
  res.classes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    res.classes[i] = classify(res.senders.low_given_attacker[i], res.senders.low_given_defender[i],
                              res.receiver.trust_low[i], res.receiver.trust_high[i],
                              opts.class_tol);
  }
  const SenderValues v = equilibrium_values(res, priors, tables);
  res.v_A = v.v_A;
  res.v_D = v.v_D;
  res.max_deviation_gain =
      deviation_gains(priors, res.senders, res.receiver, res.belief, tables).max();
}

}  // namespace

double SenderPayoff::at(Message m, TrustAction a) const noexcept {
  if (m == Message::Low) return a == TrustAction::Trust ? low_trust : low_distrust;
  return a == TrustAction::Trust ? high_trust : high_distrust;
}

ServiceSenderTables default_sender_tables() {
  ServiceSenderTables t;
  t.attacker = {2.0, 0.0, 6.0, 0.0};
  t.defender = {4.0, 0.0, 3.0, 0.0};
  return t;
}

ReceiverUtilityTable::ReceiverUtilityTable(std::size_t services) : services_(services) {
  if (services == 0 || services > 8) {
    throw DomainError("receiver table supports between 1 and 8 services");
  }
  values_.assign(std::size_t{1} << (3 * services), kNaN);
}

double ReceiverUtilityTable::at(Bits theta, Bits m, Bits a) const {
  const double v = values_[index(theta, m, a)];
  if (std::isnan(v)) {
    throw ConfigError("receiver utility table has no entry for " +
                      describe(services_, theta, m, a));
  }
  return v;
}

void ReceiverUtilityTable::set(Bits theta, Bits m, Bits a, double value) {
  values_[index(theta, m, a)] = value;
}

bool ReceiverUtilityTable::complete() const noexcept {
  return !values_.empty() &&
         std::none_of(values_.begin(), values_.end(), [](double v) { return std::isnan(v); });
}

bool ReceiverUtilityTable::operator==(const ReceiverUtilityTable& o) const {
  if (services_ != o.services_ || values_.size() != o.values_.size()) return false;
  for (std::size_t k = 0; k < values_.size(); ++k) {
    const double x = values_[k], y = o.values_[k];
    if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
  }
  return true;
}

double ServiceReceiverPayoff::at(ServiceType t, Message m, TrustAction a) const noexcept {
  const bool trust = a == TrustAction::Trust;
  if (t == ServiceType::Defender) {
    if (m == Message::Low) return trust ? defender_low_trust : defender_low_distrust;
    return trust ? defender_high_trust : defender_high_distrust;
  }
  if (m == Message::Low) return trust ? attacker_low_trust : attacker_low_distrust;
  return trust ? attacker_high_trust : attacker_high_distrust;
}

ReceiverUtilityTable additive_receiver_table(const std::vector<ServiceReceiverPayoff>& per_service) {
  const std::size_t n = per_service.size();
  ReceiverUtilityTable table(n);
  const Bits count = table.vectors();
  for (Bits theta = 0; theta < count; ++theta) {
    for (Bits m = 0; m < count; ++m) {
      for (Bits a = 0; a < count; ++a) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          sum += per_service[i].at(bit(theta, i) ? ServiceType::Attacker : ServiceType::Defender,
                                   bit(m, i) ? Message::High : Message::Low,
                                   bit(a, i) ? TrustAction::NotTrust : TrustAction::Trust);
        }
        table.set(theta, m, a, sum);
      }
    }
  }
  return table;
}

void UtilityTables::check_shape() const {
  if (senders.empty()) throw ConfigError("utility tables describe no services");
  if (receiver.services() != senders.size()) {
    throw ConfigError("receiver table covers " + std::to_string(receiver.services()) +
                      " services but sender tables cover " + std::to_string(senders.size()));
  }
  if (!receiver.complete()) throw ConfigError("receiver utility table has missing entries");
}

SenderStrategy SenderStrategy::uniform(std::size_t n, double low_A, double low_D) {
  require_prob(low_A, "attacker low-risk probability");
  require_prob(low_D, "defender low-risk probability");
  return {std::vector<double>(n, low_A), std::vector<double>(n, low_D)};
}

double SenderStrategy::prob(std::size_t i, SenderRole role, Message m) const {
  const double low =
      role == SenderRole::Attacker ? low_given_attacker.at(i) : low_given_defender.at(i);
  return m == Message::Low ? low : 1.0 - low;
}

ReceiverStrategy ReceiverStrategy::trust_all(std::size_t n) {
  return {std::vector<double>(n, 1.0), std::vector<double>(n, 1.0)};
}

double ReceiverStrategy::trust_prob(std::size_t i, Message m) const {
  return m == Message::Low ? trust_low.at(i) : trust_high.at(i);
}

double ReceiverStrategy::joint(Bits m, Bits a) const {
  double p = 1.0;
  for (std::size_t i = 0; i < services(); ++i) {
    const double t = bit(m, i) ? trust_high[i] : trust_low[i];
    p *= bit(a, i) ? 1.0 - t : t;
  }
  return p;
}

double Belief::attacker(std::size_t i, Message m) const {
  return m == Message::Low ? attacker_given_low.at(i) : attacker_given_high.at(i);
}

double Belief::joint(Bits theta, Bits m) const {
  double p = 1.0;
  for (std::size_t i = 0; i < services(); ++i) {
    const double a = bit(m, i) ? attacker_given_high[i] : attacker_given_low[i];
    p *= bit(theta, i) ? a : 1.0 - a;
  }
  return p;
}

std::string_view to_string(EquilibriumClass c) noexcept {
  switch (c) {
    case EquilibriumClass::L1:
      return "EQ-L1";
    case EquilibriumClass::L2:
      return "EQ-L2";
    case EquilibriumClass::H1:
      return "EQ-H1";
    case EquilibriumClass::H2:
      return "EQ-H2";
    case EquilibriumClass::Mixed:
      return "mixed";
  }
  return "mixed";
}

std::optional<EquilibriumClass> class_from_string(std::string_view s) noexcept {
  for (auto c : {EquilibriumClass::L1, EquilibriumClass::L2, EquilibriumClass::H1,
                 EquilibriumClass::H2, EquilibriumClass::Mixed}) {
    if (to_string(c) == s) return c;
  }
  return std::nullopt;
}

BeliefEntry update_belief(double prior, double sigma_A, double sigma_D, double off_path_attacker) {
  require_prob(prior, "prior");
  require_prob(sigma_A, "attacker message probability");
  require_prob(sigma_D, "defender message probability");
  require_prob(off_path_attacker, "off-path belief");
  const double num = sigma_A * prior;
  const double den = num + sigma_D * (1.0 - prior);
  if (den > 0.0) {
    const double mu = num / den;
    return {mu, 1.0 - mu};
  }
  return {off_path_attacker, 1.0 - off_path_attacker};
}

Belief beliefs_for(const std::vector<double>& priors, const SenderStrategy& s,
                   double off_path_attacker) {
  const std::size_t n = s.services();
  check_priors(priors, n);
  Belief mu;
  mu.attacker_given_low.resize(n);
  mu.attacker_given_high.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double lA = s.low_given_attacker[i], lD = s.low_given_defender[i];
    mu.attacker_given_low[i] = update_belief(priors[i], lA, lD, off_path_attacker).attacker;
    mu.attacker_given_high[i] =
        update_belief(priors[i], 1.0 - lA, 1.0 - lD, off_path_attacker).attacker;
  }
  return mu;
}

double receiver_expected_utility(const ReceiverStrategy& sigma_R, Bits m, const Belief& mu,
                                 const ReceiverUtilityTable& table) {
  const Bits count = table.vectors();
  double total = 0.0;
  for (Bits theta = 0; theta < count; ++theta) {
    const double w = mu.joint(theta, m);
    if (w == 0.0) continue;
    for (Bits a = 0; a < count; ++a) {
      const double s = sigma_R.joint(m, a);
      if (s == 0.0) continue;
      total += table.at(theta, m, a) * w * s;
    }
  }
  return total;
}

double sender_expected_utility(std::size_t service, SenderRole role,
                               const ReceiverStrategy& sigma_R, const SenderStrategy& senders,
                               const std::vector<double>& /*priors*/, const UtilityTables& tables) {
  // Sender payoffs depend only on the service's own message and action, so
  // the other services' types, messages and actions integrate out.
  const ServiceSenderTables& t = tables.senders.at(service);
  const SenderPayoff& u = role == SenderRole::Attacker ? t.attacker : t.defender;
  const double low = senders.prob(service, role, Message::Low);
  return low * pure_message_value(u, sigma_R.trust_low.at(service)) +
         (1.0 - low) * pure_high_value(u, sigma_R.trust_high.at(service));
}

double trust_gain(std::size_t service, Message m, const std::vector<double>& priors,
                  const SenderStrategy& senders, const ReceiverStrategy& sigma_R, const Belief& mu,
                  const UtilityTables& tables) {
  const std::size_t n = tables.services();
  const Bits count = tables.receiver.vectors();
  const Bits own = Bits{1} << service;
  const bool high = m == Message::High;

  double gain = 0.0;
  for (Bits mv = 0; mv < count; ++mv) {
    if (bit(mv, service) != high) continue;
    double pm = 1.0;
    for (std::size_t j = 0; j < n && pm > 0.0; ++j) {
      if (j != service) pm *= message_prob(j, bit(mv, j), priors, senders);
    }
    if (pm == 0.0) continue;
    for (Bits theta = 0; theta < count; ++theta) {
      const double w = mu.joint(theta, mv);
      if (w == 0.0) continue;
      for (Bits a = 0; a < count; ++a) {
        if (a & own) continue;  // enumerate the other services' actions with a^i = trust
        double pa = 1.0;
        for (std::size_t j = 0; j < n && pa > 0.0; ++j) {
          if (j == service) continue;
          const double t = bit(mv, j) ? sigma_R.trust_high[j] : sigma_R.trust_low[j];
          pa *= bit(a, j) ? 1.0 - t : t;
        }
        if (pa == 0.0) continue;
        gain += pm * w * pa * (tables.receiver.at(theta, mv, a) - tables.receiver.at(theta, mv, a | own));
      }
    }
  }
  return gain;
}

double DeviationGains::max() const noexcept { return std::max({attacker, defender, receiver}); }

DeviationGains deviation_gains(const std::vector<double>& priors, const SenderStrategy& senders,
                               const ReceiverStrategy& sigma_R, const Belief& mu,
                               const UtilityTables& tables) {
  const std::size_t n = tables.services();
  DeviationGains g;
  for (std::size_t i = 0; i < n; ++i) {
    for (SenderRole role : {SenderRole::Attacker, SenderRole::Defender}) {
      const SenderPayoff& u =
          role == SenderRole::Attacker ? tables.senders[i].attacker : tables.senders[i].defender;
      const double now = sender_expected_utility(i, role, sigma_R, senders, priors, tables);
      const double best = std::max(pure_message_value(u, sigma_R.trust_low[i]),
                                   pure_high_value(u, sigma_R.trust_high[i]));
      double& slot = role == SenderRole::Attacker ? g.attacker : g.defender;
      slot = std::max(slot, best - now);
    }
  }
  const Bits count = tables.receiver.vectors();
  for (Bits m = 0; m < count; ++m) {
    const double now = receiver_expected_utility(sigma_R, m, mu, tables.receiver);
    double best = -std::numeric_limits<double>::infinity();
    for (Bits a = 0; a < count; ++a) {
      double v = 0.0;
      for (Bits theta = 0; theta < count; ++theta) {
        const double w = mu.joint(theta, m);
        if (w != 0.0) v += w * tables.receiver.at(theta, m, a);
      }
      best = std::max(best, v);
    }
    g.receiver = std::max(g.receiver, best - now);
  }
  return g;
}

EquilibriumClass classify(double low_A, double low_D, double trust_low, double trust_high,
                          double tol) {
  if (low_A >= 1.0 - tol && low_D >= 1.0 - tol) {
    if (trust_low >= 1.0 - tol) return EquilibriumClass::L1;
    if (trust_low <= tol) return EquilibriumClass::L2;
    return EquilibriumClass::Mixed;
  }
  if (low_A <= tol && low_D <= tol) {
    if (trust_high >= 1.0 - tol) return EquilibriumClass::H1;
    if (trust_high <= tol) return EquilibriumClass::H2;
  }
  return EquilibriumClass::Mixed;
}

PbneResult solve_pbne(const std::vector<double>& priors, const UtilityTables& tables,
                      const std::optional<Profile>& start, const PbneOptions& opts) {
  tables.check_shape();
  const std::size_t n = tables.services();
  check_priors(priors, n);
  if (!(opts.eps_eq > 0.0) || opts.max_iters < 1) throw DomainError("invalid PBNE options");

  SenderStrategy s = start ? start->senders : SenderStrategy::uniform(n, 0.5, 0.5);
  ReceiverStrategy r = start ? start->receiver : ReceiverStrategy::trust_all(n);
  if (s.services() != n || r.services() != n || s.low_given_defender.size() != n ||
      r.trust_high.size() != n) {
    throw DomainError("initial profile does not match service count");
  }

  PbneResult res;
  res.converged = false;
  // Two-back history for oscillation detection.
  SenderStrategy s_prev = s;
  ReceiverStrategy r_prev = r;
  Belief mu;

  for (int it = 1; it <= opts.max_iters; ++it) {
    // Senders best-respond to the current receiver strategy.
    SenderStrategy s_next = s;
    for (std::size_t i = 0; i < n; ++i) {
      const auto pick = [&](const SenderPayoff& u, double current) {
        const double low = pure_message_value(u, r.trust_low[i]);
        const double high = pure_high_value(u, r.trust_high[i]);
        if (strictly_better(low, high)) return 1.0;
        if (strictly_better(high, low)) return 0.0;
        return current;
      };
      s_next.low_given_attacker[i] = pick(tables.senders[i].attacker, s.low_given_attacker[i]);
      s_next.low_given_defender[i] = pick(tables.senders[i].defender, s.low_given_defender[i]);
    }

    // Beliefs follow Bayes' rule on the new sender profile.
    mu = beliefs_for(priors, s_next, opts.off_path_attacker_belief);

    // Receiver best-responds per service and message.
    ReceiverStrategy r_next = r;
    for (std::size_t i = 0; i < n; ++i) {
      for (Message m : {Message::Low, Message::High}) {
        const double g = trust_gain(i, m, priors, s_next, r, mu, tables);
        double& slot = m == Message::Low ? r_next.trust_low[i] : r_next.trust_high[i];
        if (strictly_better(g, 0.0)) {
          slot = 1.0;
        } else if (strictly_better(0.0, g)) {
          slot = 0.0;
        }
      }
    }

    const double back = sup_change(s_next, s_prev, r_next, r_prev);
    const double delta_raw = sup_change(s_next, s, r_next, r);
    if (it > 1 && back < opts.eps_eq && delta_raw >= opts.eps_eq) {
      blend(s_next.low_given_attacker, s.low_given_attacker, opts.damping);
      blend(s_next.low_given_defender, s.low_given_defender, opts.damping);
      blend(r_next.trust_low, r.trust_low, opts.damping);
      blend(r_next.trust_high, r.trust_high, opts.damping);
      mu = beliefs_for(priors, s_next, opts.off_path_attacker_belief);
    }

    const double delta = sup_change(s_next, s, r_next, r);
    res.delta_trace.push_back(delta);
    s_prev = s;
    r_prev = r;
    s = s_next;
    r = r_next;
    res.iterations = it;
    if (delta < opts.eps_eq) {
      res.converged = true;
      break;
    }
  }

  res.senders = s;
  res.receiver = r;
  res.belief = beliefs_for(priors, s, opts.off_path_attacker_belief);
  finish(res, priors, tables, opts);
  return res;
}

PbneResult select_equilibrium(const std::vector<PbneResult>& candidates) {
  if (candidates.empty()) throw InternalError("select_equilibrium called with no candidates");
  const PbneResult* best = nullptr;
  long best_score = -1;
  for (const PbneResult& c : candidates) {
    bool low_only = true;
    long score = 0;
    for (std::size_t i = 0; i < c.classes.size(); ++i) {
      const EquilibriumClass k = c.classes[i];
      if (k == EquilibriumClass::L1) {
        ++score;
      } else if (k == EquilibriumClass::L2) {
      } else if (k == EquilibriumClass::Mixed && c.senders.low_given_attacker[i] == 1.0 &&
                 c.senders.low_given_defender[i] == 1.0) {
        // Partial trust of a pooled low-risk message is still a low-risk equilibrium.
      } else {
        low_only = false;
        break;
      }
    }
    if (low_only && score > best_score) {
      best = &c;
      best_score = score;
    }
  }
  if (best == nullptr) {
    throw InternalError("no candidate pools on low-risk messages for every service");
  }
  return *best;
}

double compromise_threshold(std::size_t service, const UtilityTables& tables,
                            const ThresholdContext& ctx, double tol) {
  tables.check_shape();
  const std::size_t n = tables.services();
  if (service >= n) throw DomainError("service index out of range");
  if (!(tol > 0.0)) throw DomainError("threshold tolerance must be positive");

  std::vector<double> priors = ctx.priors.empty() ? std::vector<double>(n, 0.0) : ctx.priors;
  if (priors.size() != n) throw DomainError("prior vector length does not match service count");
  for (std::size_t j = 0; j < n; ++j) {
    if (j != service) require_prob(priors[j], "other-service prior");
  }
  ReceiverStrategy r = ReceiverStrategy::trust_all(n);
  if (!ctx.trust.empty()) {
    if (ctx.trust.size() != n) throw DomainError("trust vector length does not match services");
    for (double t : ctx.trust) require_prob(t, "trust probability");
    r.trust_low = ctx.trust;
  }
  const SenderStrategy pooled = SenderStrategy::uniform(n, 1.0, 1.0);

  const auto gap = [&](double p) {
    priors[service] = p;
    const Belief mu = beliefs_for(priors, pooled);
    return trust_gain(service, Message::Low, priors, pooled, r, mu, tables);
  };

  const double g0 = gap(0.0);
  if (g0 < 0.0) {
    throw NumericError("trust loses even against a certain defender on service " +
                       std::to_string(service) + "; the indifference point cannot be bracketed");
  }
  if (gap(1.0) >= 0.0) return 1.0;

  double lo = 0.0, hi = 1.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (gap(mid) >= 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

bool AssumptionReport::all_passed() const noexcept {
  return std::all_of(checks.begin(), checks.end(), [](const AssumptionCheck& c) { return c.passed; });
}

AssumptionReport validate_assumptions(const UtilityTables& tables) {
  tables.check_shape();
  const std::size_t n = tables.services();
  AssumptionReport rep;
  AssumptionCheck a1{"A1", true, ""}, a2{"A2", true, ""}, a3{"A3", true, ""}, a4{"A4", true, ""},
      a5{"A5", true, ""};

  for (std::size_t i = 0; i < n && a1.passed; ++i) {
    const auto& t = tables.senders[i];
    const std::pair<const char*, double> entries[] = {
        {"u_A(m_L,a_N)", t.attacker.low_distrust},
        {"u_A(m_H,a_N)", t.attacker.high_distrust},
        {"u_D(m_L,a_N)", t.defender.low_distrust},
        {"u_D(m_H,a_N)", t.defender.high_distrust}};
    for (const auto& [name, v] : entries) {
      if (v != 0.0) {
        a1.passed = false;
        a1.detail = "service " + std::to_string(i) + ": " + name + " = " + fmt(v);
        break;
      }
    }
  }

  for (std::size_t i = 0; i < n && a2.passed; ++i) {
    const auto& t = tables.senders[i];
    const std::pair<const char*, double> chain[] = {{"0", 0.0},
                                                    {"u_A(m_L,a_T)", t.attacker.low_trust},
                                                    {"u_D(m_H,a_T)", t.defender.high_trust},
                                                    {"u_D(m_L,a_T)", t.defender.low_trust},
                                                    {"u_A(m_H,a_T)", t.attacker.high_trust}};
    for (std::size_t k = 0; k + 1 < std::size(chain); ++k) {
      if (!(chain[k].second < chain[k + 1].second)) {
        a2.passed = false;
        a2.detail = "service " + std::to_string(i) + ": " + chain[k].first + " = " +
                    fmt(chain[k].second) + " is not below " + chain[k + 1].first + " = " +
                    fmt(chain[k + 1].second);
        break;
      }
    }
  }

  const Bits count = tables.receiver.vectors();
  const auto fail = [&](AssumptionCheck& c, std::size_t i, Bits theta, Bits m, Bits a,
                        const char* what) {
    c.passed = false;
    c.detail = "service " + std::to_string(i) + " at " + describe(n, theta, m, a) + ": " + what;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const Bits own = Bits{1} << i;
    for (Bits theta = 0; theta < count; ++theta) {
      for (Bits m = 0; m < count; ++m) {
        for (Bits a = 0; a < count; ++a) {
          if (a & own) continue;
          const double trust = tables.receiver.at(theta, m, a);
          const double distrust = tables.receiver.at(theta, m, a | own);
          const bool attacker = bit(theta, i);
          const bool high = bit(m, i);
          if (a3.passed && attacker && high && !(distrust > trust)) {
            fail(a3, i, theta, m, a, "trusting a high-risk attacker is not worse");
          }
          if (a4.passed && !attacker && !high && !(trust > distrust)) {
            fail(a4, i, theta, m, a, "trusting a low-risk defender is not better");
          }
          if (a5.passed && !high) {
            const double trusted_high = tables.receiver.at(theta, m | own, a);
            if (!(trust > trusted_high)) {
              fail(a5, i, theta, m, a, "trusted low-risk message is not preferred to high-risk");
            }
          }
        }
      }
    }
  }
  rep.checks = {a1, a2, a3, a4, a5};
  return rep;
}

std::vector<PbneResult> enumerate_pure_equilibria(const std::vector<double>& priors,
                                                  const UtilityTables& tables,
                                                  const PbneOptions& opts) {
  tables.check_shape();
  const std::size_t n = tables.services();
  if (n > 3) throw DomainError("exhaustive enumeration is limited to at most 3 services");
  check_priors(priors, n);

  // Per-service pure choices whose senders already best-respond locally.
  struct Local {
    double low_A, low_D, q, r, mu_low, mu_high;
  };
  std::vector<std::vector<Local>> options(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = tables.senders[i];
    for (int code = 0; code < 16; ++code) {
      const double lA = (code & 8) ? 0.0 : 1.0;
      const double lD = (code & 4) ? 0.0 : 1.0;
      const double q = (code & 2) ? 0.0 : 1.0;
      const double r = (code & 1) ? 0.0 : 1.0;
      const auto optimal = [&](const SenderPayoff& u, double low) {
        const double vl = pure_message_value(u, q), vh = pure_high_value(u, r);
        return (low == 1.0 ? vh - vl : vl - vh) <= opts.eps_eq;
      };
      if (!optimal(t.attacker, lA) || !optimal(t.defender, lD)) continue;

      const double den_low = lA * priors[i] + lD * (1.0 - priors[i]);
      const double den_high = (1.0 - lA) * priors[i] + (1.0 - lD) * (1.0 - priors[i]);
      std::vector<double> lows, highs;
      if (den_low > 0.0) {
        lows = {update_belief(priors[i], lA, lD).attacker};
      } else {
        lows = {0.0, 1.0};
      }
      if (den_high > 0.0) {
        highs = {update_belief(priors[i], 1.0 - lA, 1.0 - lD).attacker};
      } else {
        highs = {0.0, 1.0};
      }
      for (double ml : lows) {
        for (double mh : highs) options[i].push_back({lA, lD, q, r, ml, mh});
      }
    }
  }

  std::vector<PbneResult> out;
  std::vector<std::size_t> idx(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (options[i].empty()) return out;
  }
  const Bits count = tables.receiver.vectors();
  while (true) {
    PbneResult cand;
    cand.senders.low_given_attacker.resize(n);
    cand.senders.low_given_defender.resize(n);
    cand.receiver.trust_low.resize(n);
    cand.receiver.trust_high.resize(n);
    cand.belief.attacker_given_low.resize(n);
    cand.belief.attacker_given_high.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const Local& o = options[i][idx[i]];
      cand.senders.low_given_attacker[i] = o.low_A;
      cand.senders.low_given_defender[i] = o.low_D;
      cand.receiver.trust_low[i] = o.q;
      cand.receiver.trust_high[i] = o.r;
      cand.belief.attacker_given_low[i] = o.mu_low;
      cand.belief.attacker_given_high[i] = o.mu_high;
    }

    // Sequential rationality of the receiver at every message vector.
    bool ok = true;
    for (Bits m = 0; m < count && ok; ++m) {
      Bits chosen = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if ((bit(m, i) ? cand.receiver.trust_high[i] : cand.receiver.trust_low[i]) == 0.0) {
          chosen |= Bits{1} << i;
        }
      }
      double value_chosen = 0.0;
      std::vector<double> values(count, 0.0);
      for (Bits theta = 0; theta < count; ++theta) {
        const double w = cand.belief.joint(theta, m);
        if (w == 0.0) continue;
        for (Bits a = 0; a < count; ++a) values[a] += w * tables.receiver.at(theta, m, a);
      }
      value_chosen = values[chosen];
      for (Bits a = 0; a < count; ++a) {
        if (values[a] - value_chosen > opts.eps_eq) {
          ok = false;
          break;
        }
      }
    }
    if (ok) {
      cand.converged = true;
      finish(cand, priors, tables, opts);
      out.push_back(std::move(cand));
    }

    std::size_t k = n;
    while (k > 0) {
      --k;
      if (++idx[k] < options[k].size()) break;
      idx[k] = 0;
      if (k == 0) return out;
    }
  }
}

SenderValues equilibrium_values(const PbneResult& result, const std::vector<double>& priors,
                                const UtilityTables& tables) {
  const std::size_t n = tables.services();
  SenderValues v;
  v.v_A.resize(n);
  v.v_D.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    v.v_A[i] = sender_expected_utility(i, SenderRole::Attacker, result.receiver, result.senders,
                                       priors, tables);
    v.v_D[i] = sender_expected_utility(i, SenderRole::Defender, result.receiver, result.senders,
                                       priors, tables);
  }
  return v;
}

}  // namespace cloudtrust::signaling
