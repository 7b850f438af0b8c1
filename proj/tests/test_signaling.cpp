#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "errors.hpp"
#include "random_instances.hpp"
#include "signaling.hpp"

using namespace cloudtrust;
using namespace cloudtrust::signaling;

namespace {

UtilityTables single_service(double uD_low_T, double uA_low_T, double uD_high_T = 0.5,
                             double uA_high_T = -2.0) {
  ServiceReceiverPayoff p;
  p.defender_low_trust = uD_low_T;
  p.attacker_low_trust = uA_low_T;
  p.defender_high_trust = uD_high_T;
  p.attacker_high_trust = uA_high_T;
  return {{default_sender_tables()}, additive_receiver_table({p})};
}

UtilityTables default_tables(std::size_t n) {
  return {std::vector<ServiceSenderTables>(n, default_sender_tables()),
          additive_receiver_table(std::vector<ServiceReceiverPayoff>(n))};
}

// Probability of a whole type vector under independent priors.
double type_prob(const std::vector<double>& priors, Bits theta) {
  double p = 1.0;
  for (std::size_t i = 0; i < priors.size(); ++i) p *= bit(theta, i) ? priors[i] : 1.0 - priors[i];
  return p;
}

double message_prob(const SenderStrategy& s, Bits theta, Bits m) {
  double p = 1.0;
  for (std::size_t i = 0; i < s.services(); ++i) {
    const double low = bit(theta, i) ? s.low_given_attacker[i] : s.low_given_defender[i];
    p *= bit(m, i) ? 1.0 - low : low;
  }
  return p;
}

// Sender utility by the full sum over types, messages and joint actions.
double brute_sender_utility(std::size_t i, SenderRole role, const ReceiverStrategy& r,
                            const SenderStrategy& s, const std::vector<double>& priors,
                            const UtilityTables& t) {
  const std::size_t n = priors.size();
  const Bits count = Bits{1} << n;
  const SenderPayoff& u = role == SenderRole::Attacker ? t.senders[i].attacker : t.senders[i].defender;
  double total = 0.0;
  for (Bits theta = 0; theta < count; ++theta) {
    if (bit(theta, i) != (role == SenderRole::Attacker)) continue;
    double p_theta = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) p_theta *= bit(theta, j) ? priors[j] : 1.0 - priors[j];
    }
    for (Bits m = 0; m < count; ++m) {
      const double pm = message_prob(s, theta, m);
      for (Bits a = 0; a < count; ++a) {
        const Message mi = bit(m, i) ? Message::High : Message::Low;
        const TrustAction ai = bit(a, i) ? TrustAction::NotTrust : TrustAction::Trust;
        total += p_theta * pm * r.joint(m, a) * u.at(mi, ai);
      }
    }
  }
  return total;
}

double brute_receiver_utility(const ReceiverStrategy& r, Bits m, const Belief& mu,
                              const ReceiverUtilityTable& t) {
  double total = 0.0;
  const Bits count = t.vectors();
  for (Bits theta = 0; theta < count; ++theta) {
    double pt = 1.0;
    for (std::size_t i = 0; i < t.services(); ++i) {
      const double a = bit(m, i) ? mu.attacker_given_high[i] : mu.attacker_given_low[i];
      pt *= bit(theta, i) ? a : 1.0 - a;
    }
    for (Bits a = 0; a < count; ++a) total += pt * r.joint(m, a) * t.at(theta, m, a);
  }
  return total;
}

}  // namespace

TEST_CASE("Bayes update of the attacker belief") {
  CHECK(update_belief(0.3, 1, 1).attacker == doctest::Approx(0.3));
  CHECK(update_belief(0.5, 0.5, 1).attacker == doctest::Approx(1.0 / 3.0));
  CHECK(update_belief(0.7, 0, 0).attacker == 1.0);
  CHECK(update_belief(0.7, 0, 0, 0.25).attacker == 0.25);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 1000; ++k) {
    const double p = u(rng), a = u(rng), d = u(rng);
    const BeliefEntry b = update_belief(p, a, d);
    CHECK(b.attacker + b.defender == doctest::Approx(1.0));
    CHECK(b.attacker == doctest::Approx(a * p / (a * p + d * (1 - p))).epsilon(1e-14));
  }
}

TEST_CASE("beliefs for a pooled profile equal the priors, off path defaults to attacker") {
  const Belief mu = beliefs_for({0.1, 0.6}, SenderStrategy::uniform(2, 1, 1));
  CHECK(mu.attacker_given_low[0] == doctest::Approx(0.1));
  CHECK(mu.attacker_given_low[1] == doctest::Approx(0.6));
  CHECK(mu.attacker_given_high[0] == 1.0);
  CHECK(mu.attacker_given_high[1] == 1.0);
}

TEST_CASE("receiver expected utility") {
  const UtilityTables t1 = single_service(1, -1);
  Belief mu{{0.5}, {1.0}};
  CHECK(receiver_expected_utility(ReceiverStrategy::trust_all(1), 0, mu, t1.receiver) ==
        doctest::Approx(0.5 * t1.receiver.at(1, 0, 0) + 0.5 * t1.receiver.at(0, 0, 0)));

  ReceiverUtilityTable c(1);
  for (Bits th = 0; th < 2; ++th) {
    for (Bits m = 0; m < 2; ++m) {
      c.set(th, m, 0, th ? -4.0 : 3.0);
      c.set(th, m, 1, 2.5);
    }
  }
  CHECK(receiver_expected_utility({{0.0}, {0.0}}, 1, mu, c) == 2.5);

  const UtilityTables t2 = default_tables(2);
  const Belief sure_defender{{0.0, 0.0}, {0.0, 0.0}};
  for (Bits m = 0; m < 4; ++m) {
    CHECK(receiver_expected_utility(ReceiverStrategy::trust_all(2), m, sure_defender, t2.receiver) ==
          t2.receiver.at(0, m, 0));
  }

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  const UtilityTables t3 = testing::random_instance(3, rng);
  for (int k = 0; k < 50; ++k) {
    ReceiverStrategy r{{u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)}};
    Belief b{{u(rng), u(rng), u(rng)}, {u(rng), u(rng), u(rng)}};
    const Bits m = static_cast<Bits>(k % 8);
    CHECK(receiver_expected_utility(r, m, b, t3.receiver) ==
          doctest::Approx(brute_receiver_utility(r, m, b, t3.receiver)).epsilon(1e-12));
  }
}

TEST_CASE("receiver table rejects missing entries") {
  ReceiverUtilityTable t(1);
  t.set(0, 0, 0, 1.0);
  CHECK_FALSE(t.complete());
  CHECK_THROWS_AS(t.at(1, 0, 0), ConfigError);
  UtilityTables tables{{default_sender_tables()}, t};
  CHECK_THROWS_AS(tables.check_shape(), ConfigError);
}

TEST_CASE("sender expected utility") {
  const UtilityTables t1 = single_service(1, -1);
  CHECK(sender_expected_utility(0, SenderRole::Attacker, ReceiverStrategy::trust_all(1),
                                SenderStrategy::uniform(1, 1, 1), {0.3}, t1) == 2.0);

  UtilityTables half = t1;
  CHECK(sender_expected_utility(0, SenderRole::Attacker, {{0.5}, {0.0}},
                                SenderStrategy::uniform(1, 1, 1), {0.3}, half) == 1.0);

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 40; ++k) {
    const UtilityTables t = testing::random_instance(2, rng);
    const SenderStrategy s{{u(rng), u(rng)}, {u(rng), u(rng)}};
    const ReceiverStrategy r{{u(rng), u(rng)}, {u(rng), u(rng)}};
    const std::vector<double> priors{u(rng), u(rng)};
    for (std::size_t i = 0; i < 2; ++i) {
      for (SenderRole role : {SenderRole::Attacker, SenderRole::Defender}) {
        const double fast = sender_expected_utility(i, role, r, s, priors, t);
        CHECK(fast == doctest::Approx(brute_sender_utility(i, role, r, s, priors, t)).epsilon(1e-12));
        std::vector<double> other = priors;
        other[1 - i] = u(rng);
        CHECK(sender_expected_utility(i, role, r, s, other, t) == doctest::Approx(fast).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("small prior gives trusted low-risk pooling") {
  const UtilityTables t = single_service(1, -1);
  const PbneResult r = solve_pbne({0.1}, t);
  REQUIRE(r.converged);
  CHECK(r.classes[0] == EquilibriumClass::L1);
  CHECK(r.senders.low_given_attacker[0] == 1.0);
  CHECK(r.senders.low_given_defender[0] == 1.0);
  CHECK(r.receiver.trust_low[0] == 1.0);
  CHECK(r.v_A[0] == 2.0);
  CHECK(r.v_D[0] == 4.0);
  CHECK(r.max_deviation_gain <= 1e-6);
}

TEST_CASE("near-certain attacker gives untrusted low-risk pooling") {
  const UtilityTables t = single_service(1, -10);
  const PbneResult r = solve_pbne({0.95}, t);
  REQUIRE(r.converged);
  CHECK(r.classes[0] == EquilibriumClass::L2);
  CHECK(r.receiver.trust_low[0] == 0.0);
  CHECK(r.v_A[0] == 0.0);
  CHECK(r.v_D[0] == 0.0);
  CHECK(r.max_deviation_gain <= 1e-6);
}

TEST_CASE("mixed initial strategies settle on pooling for every service") {
  const UtilityTables t = default_tables(4);
  Profile start{{{0.2, 0.3, 0.1, 0.4}, {0.9, 0.8, 0.95, 0.97}}, ReceiverStrategy::trust_all(4)};
  const PbneResult r = solve_pbne({0.2, 0.4, 0.6, 0.15}, t, start);
  REQUIRE(r.converged);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(r.senders.low_given_attacker[i] == r.senders.low_given_defender[i]);
  }
  CHECK(r.max_deviation_gain <= 1e-6);
}

TEST_CASE("solver output survives an independent deviation check") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 30; ++k) {
    const std::size_t n = 1 + k % 3;
    const UtilityTables t = testing::random_instance(n, rng);
    std::vector<double> priors(n);
    for (double& p : priors) p = u(rng);
    const PbneResult r = solve_pbne(priors, t);
    if (!r.converged) continue;
    // Receiver: no pure joint action beats the strategy at any on-path message
    // vector. Off the path a factored strategy cannot condition one service's
    // trust on the others' messages, so joint optimality is not expected there.
    for (Bits m = 0; m < t.receiver.vectors(); ++m) {
      double reach = 1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double low = priors[i] * r.senders.low_given_attacker[i] +
                           (1 - priors[i]) * r.senders.low_given_defender[i];
        reach *= bit(m, i) ? 1 - low : low;
      }
      if (reach == 0.0) continue;
      const double cur = brute_receiver_utility(r.receiver, m, r.belief, t.receiver);
      for (Bits a = 0; a < t.receiver.vectors(); ++a) {
        ReceiverStrategy pure{std::vector<double>(n), std::vector<double>(n)};
        for (std::size_t i = 0; i < n; ++i) {
          pure.trust_low[i] = pure.trust_high[i] = bit(a, i) ? 0.0 : 1.0;
        }
        CHECK(brute_receiver_utility(pure, m, r.belief, t.receiver) - cur <= 1e-6);
      }
    }
    // Senders: switching to a pure message never gains.
    for (std::size_t i = 0; i < n; ++i) {
      for (SenderRole role : {SenderRole::Attacker, SenderRole::Defender}) {
        const double cur = brute_sender_utility(i, role, r.receiver, r.senders, priors, t);
        for (double low : {0.0, 1.0}) {
          SenderStrategy dev = r.senders;
          (role == SenderRole::Attacker ? dev.low_given_attacker : dev.low_given_defender)[i] = low;
          CHECK(brute_sender_utility(i, role, r.receiver, dev, priors, t) - cur <= 1e-6);
        }
      }
    }
  }
}

TEST_CASE("classification") {
  CHECK(classify(1, 1, 1, 0) == EquilibriumClass::L1);
  CHECK(classify(1, 1, 0, 0) == EquilibriumClass::L2);
  CHECK(classify(0, 0, 1, 1) == EquilibriumClass::H1);
  CHECK(classify(0, 0, 0, 0) == EquilibriumClass::H2);
  CHECK(classify(1, 0, 1, 0) == EquilibriumClass::Mixed);
  CHECK(classify(1, 1, 0.5, 0) == EquilibriumClass::Mixed);
  for (auto c : {EquilibriumClass::L1, EquilibriumClass::L2, EquilibriumClass::H1, EquilibriumClass::H2,
                 EquilibriumClass::Mixed}) {
    CHECK(class_from_string(to_string(c)) == c);
  }
  CHECK(to_string(EquilibriumClass::L1) == "EQ-L1");
  CHECK_FALSE(class_from_string("EQ-X").has_value());
}

TEST_CASE("selection prefers trusted low-risk pooling") {
  const auto make = [](std::vector<EquilibriumClass> cls, double low) {
    PbneResult r;
    r.classes = cls;
    r.senders = SenderStrategy::uniform(cls.size(), low, low);
    return r;
  };
  using E = EquilibriumClass;
  std::vector<PbneResult> all{make({E::H1}, 0), make({E::L1}, 1), make({E::L2}, 1)};
  CHECK(select_equilibrium(all).classes[0] == E::L1);
  CHECK(select_equilibrium({make({E::H2}, 0), make({E::L2}, 1)}).classes[0] == E::L2);
  CHECK(select_equilibrium({make({E::L1}, 1)}).classes[0] == E::L1);
  CHECK_THROWS_AS(select_equilibrium({}), InternalError);
  CHECK_THROWS_AS(select_equilibrium({make({E::H1}, 0)}), InternalError);
  const auto two = select_equilibrium({make({E::L1, E::L2}, 1), make({E::L1, E::L1}, 1)});
  CHECK(two.classes[1] == E::L1);
}

TEST_CASE("selected class is never high-risk pooling") {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 50; ++k) {
    const std::size_t n = 1 + k % 2;
    const UtilityTables t = testing::random_instance(n, rng);
    std::vector<double> priors(n);
    for (double& p : priors) p = u(rng);
    const auto eqs = enumerate_pure_equilibria(priors, t);
    REQUIRE_FALSE(eqs.empty());
    const PbneResult s = select_equilibrium(eqs);
    for (auto c : s.classes) {
      CHECK(c != EquilibriumClass::H1);
      CHECK(c != EquilibriumClass::H2);
    }
  }
}

TEST_CASE("pure equilibria with positive sender utilities pool") {
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> u(0, 1);
  int checked = 0;
  for (int k = 0; k < 50; ++k) {
    const std::size_t n = 1 + k % 2;
    const UtilityTables t = testing::random_instance(n, rng);
    std::vector<double> priors(n);
    for (double& p : priors) p = u(rng);
    for (const PbneResult& r : enumerate_pure_equilibria(priors, t)) {
      for (std::size_t i = 0; i < n; ++i) {
        if (r.v_A[i] > 0 && r.v_D[i] > 0) {
          CHECK(r.senders.low_given_attacker[i] == r.senders.low_given_defender[i]);
          ++checked;
        }
      }
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("enumeration finds the expected equilibria") {
  const UtilityTables t = single_service(1, -1);
  bool found = false;
  for (const auto& r : enumerate_pure_equilibria({0.1}, t)) {
    if (r.classes[0] == EquilibriumClass::L1) found = true;
  }
  CHECK(found);
  found = false;
  for (const auto& r : enumerate_pure_equilibria({0.0}, t)) {
    if (r.senders.low_given_defender[0] == 1.0 && r.receiver.trust_low[0] == 1.0) found = true;
  }
  CHECK(found);
  CHECK_THROWS_AS(enumerate_pure_equilibria({0.1, 0.1, 0.1, 0.1}, default_tables(4)), DomainError);
}

TEST_CASE("compromise threshold examples") {
  CHECK(compromise_threshold(0, single_service(1, -1), {{0.0}, {}}) == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(compromise_threshold(0, single_service(1, -3), {{0.0}, {}}) == doctest::Approx(0.25).epsilon(1e-8));
  CHECK(compromise_threshold(0, single_service(1, 0.5, 0.2, -1), {{0.0}, {}}) == 1.0);
}

TEST_CASE("receiver is indifferent at the threshold and strict on either side") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0, 0.5);
  for (int k = 0; k < 30; ++k) {
    const std::size_t n = 1 + k % 3;
    const UtilityTables t = testing::random_instance(n, rng);
    std::vector<double> priors(n);
    for (double& p : priors) p = u(rng);
    const std::size_t i = k % n;
    const double pd = compromise_threshold(i, t, {priors, {}});
    if (pd >= 1.0) continue;
    const SenderStrategy pooled = SenderStrategy::uniform(n, 1, 1);
    const auto gain = [&](double p) {
      std::vector<double> pr = priors;
      pr[i] = p;
      return trust_gain(i, Message::Low, pr, pooled, ReceiverStrategy::trust_all(n),
                        beliefs_for(pr, pooled), t);
    };
    CHECK(std::abs(gain(pd)) <= 1e-6);
    if (pd - 0.01 >= 0) CHECK(gain(pd - 0.01) > 0);
    if (pd + 0.01 <= 1) CHECK(gain(pd + 0.01) < 0);
  }
}

TEST_CASE("assumption validation") {
  const UtilityTables good = default_tables(2);
  CHECK(validate_assumptions(good).all_passed());

  UtilityTables bad = good;
  bad.senders[1].attacker.low_trust = 5;
  bad.senders[1].attacker.high_trust = 4;
  const AssumptionReport rep = validate_assumptions(bad);
  CHECK(rep.checks[0].passed);
  CHECK_FALSE(rep.checks[1].passed);
  CHECK(rep.checks[1].detail.find("service 1") != std::string::npos);

  UtilityTables nonzero = good;
  nonzero.senders[0].defender.low_distrust = 0.1;
  CHECK_FALSE(validate_assumptions(nonzero).checks[0].passed);

  UtilityTables a3 = good;
  a3.receiver.set(1, 1, 0, 1.5);  // service 0 attacker sends m_H and is trusted
  CHECK_FALSE(validate_assumptions(a3).checks[2].passed);

  UtilityTables a4 = good;
  a4.receiver.set(0, 0, 0, -5);
  CHECK_FALSE(validate_assumptions(a4).checks[3].passed);
}

TEST_CASE("equilibrium values scale with trust") {
  const UtilityTables t = single_service(1, -1);
  PbneResult r;
  r.senders = SenderStrategy::uniform(1, 1, 1);
  r.classes = {EquilibriumClass::L1};
  r.receiver = {{1.0}, {0.0}};
  SenderValues v = equilibrium_values(r, {0.1}, t);
  CHECK(v.v_A[0] == 2.0);
  CHECK(v.v_D[0] == 4.0);
  r.receiver = {{0.0}, {0.0}};
  v = equilibrium_values(r, {0.1}, t);
  CHECK(v.v_A[0] == 0.0);
  CHECK(v.v_D[0] == 0.0);
  r.receiver = {{0.5}, {0.0}};
  v = equilibrium_values(r, {0.1}, t);
  CHECK(v.v_A[0] == 1.0);
  CHECK(v.v_D[0] == 2.0);
}

TEST_CASE("scaling one service's sender tables keeps the selected classes") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 20; ++k) {
    const std::size_t n = 1 + k % 2;
    UtilityTables t = testing::random_instance(n, rng);
    std::vector<double> priors(n);
    for (double& p : priors) p = u(rng);
    const auto before = select_equilibrium(enumerate_pure_equilibria(priors, t)).classes;
    const double c = 0.1 + 10 * u(rng);
    for (auto* pay : {&t.senders[0].attacker, &t.senders[0].defender}) {
      pay->low_trust *= c;
      pay->high_trust *= c;
    }
    CHECK(select_equilibrium(enumerate_pure_equilibria(priors, t)).classes == before);
  }
}
