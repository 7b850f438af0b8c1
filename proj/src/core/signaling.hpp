#pragma once

// Device/cloud signaling game over N services. Each service is held by an
// attacker or a defender, the holder picks a low- or high-risk message, and
// the device decides per service whether to trust it.
//
// Vectors of types, messages and actions are packed into bitmasks with bit i
// describing service i: a set bit means attacker / high-risk / not-trusted.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cloudtrust::signaling {

enum class ServiceType : std::uint8_t { Attacker, Defender };
enum class Message : std::uint8_t { Low, High };
enum class TrustAction : std::uint8_t { Trust, NotTrust };
enum class SenderRole : std::uint8_t { Attacker, Defender };

using Bits = std::uint32_t;

constexpr bool bit(Bits v, std::size_t i) noexcept { return ((v >> i) & 1u) != 0; }
constexpr Bits with_bit(Bits v, std::size_t i, bool on) noexcept {
  return on ? (v | (Bits{1} << i)) : (v & ~(Bits{1} << i));
}

// Sender payoff for one service, indexed by the service's own message and action.
struct SenderPayoff {
  double low_trust = 0.0;
  double low_distrust = 0.0;
  double high_trust = 0.0;
  double high_distrust = 0.0;

  double at(Message m, TrustAction a) const noexcept;
  bool operator==(const SenderPayoff&) const = default;
};

struct ServiceSenderTables {
  SenderPayoff attacker;
  SenderPayoff defender;
  bool operator==(const ServiceSenderTables&) const = default;
};

// Smallest integer chain satisfying the sender ordering assumption.
ServiceSenderTables default_sender_tables();

// Dense receiver payoff over types x messages x actions. Unset entries are NaN
// and reading one throws ConfigError.
class ReceiverUtilityTable {
 public:
  ReceiverUtilityTable() = default;
  explicit ReceiverUtilityTable(std::size_t services);

  std::size_t services() const noexcept { return services_; }
  std::size_t size() const noexcept { return values_.size(); }
  Bits vectors() const noexcept { return Bits{1} << services_; }

  double at(Bits theta, Bits m, Bits a) const;
  void set(Bits theta, Bits m, Bits a, double value);
  bool complete() const noexcept;

  const std::vector<double>& raw() const noexcept { return values_; }
  std::vector<double>& raw() noexcept { return values_; }

  bool operator==(const ReceiverUtilityTable& o) const;

 private:
  std::size_t index(Bits theta, Bits m, Bits a) const noexcept {
    return (static_cast<std::size_t>(theta) << (2 * services_)) |
           (static_cast<std::size_t>(m) << services_) | a;
  }
  std::size_t services_ = 0;
  std::vector<double> values_;
};

// Per-service receiver payoff for (type, message, action) of that service alone.
struct ServiceReceiverPayoff {
  double defender_low_trust = 1.0;
  double defender_low_distrust = 0.0;
  double defender_high_trust = 0.5;
  double defender_high_distrust = 0.0;
  double attacker_low_trust = -1.0;
  double attacker_low_distrust = 0.0;
  double attacker_high_trust = -2.0;
  double attacker_high_distrust = 0.0;

  double at(ServiceType t, Message m, TrustAction a) const noexcept;
  bool operator==(const ServiceReceiverPayoff&) const = default;
};

// Receiver table that sums independent per-service payoffs.
ReceiverUtilityTable additive_receiver_table(const std::vector<ServiceReceiverPayoff>& per_service);

struct UtilityTables {
  std::vector<ServiceSenderTables> senders;
  ReceiverUtilityTable receiver;

  std::size_t services() const noexcept { return senders.size(); }
  // Throws ConfigError on shape mismatch or a missing receiver entry.
  void check_shape() const;
};

struct SenderStrategy {
  std::vector<double> low_given_attacker;  // sigma_A^i(m_L)
  std::vector<double> low_given_defender;  // sigma_D^i(m_L)

  static SenderStrategy uniform(std::size_t n, double low_A, double low_D);
  std::size_t services() const noexcept { return low_given_attacker.size(); }
  double prob(std::size_t i, SenderRole role, Message m) const;
};

// Factored receiver strategy: per service, the probability of trusting it
// after a low- or high-risk message. The joint strategy is the product.
struct ReceiverStrategy {
  std::vector<double> trust_low;
  std::vector<double> trust_high;

  static ReceiverStrategy trust_all(std::size_t n);
  std::size_t services() const noexcept { return trust_low.size(); }
  double trust_prob(std::size_t i, Message m) const;
  double joint(Bits m, Bits a) const;
};

struct BeliefEntry {
  double attacker = 0.0;
  double defender = 1.0;
};

struct Belief {
  std::vector<double> attacker_given_low;   // mu^i(theta_A | m_L)
  std::vector<double> attacker_given_high;  // mu^i(theta_A | m_H)

  std::size_t services() const noexcept { return attacker_given_low.size(); }
  double attacker(std::size_t i, Message m) const;
  // Product belief over type vectors given a message vector.
  double joint(Bits theta, Bits m) const;
};

enum class EquilibriumClass { L1, L2, H1, H2, Mixed };

std::string_view to_string(EquilibriumClass c) noexcept;
std::optional<EquilibriumClass> class_from_string(std::string_view s) noexcept;

struct PbneResult {
  SenderStrategy senders;
  ReceiverStrategy receiver;
  Belief belief;
  std::vector<EquilibriumClass> classes;
  std::vector<double> v_A;
  std::vector<double> v_D;
  bool converged = true;
  int iterations = 0;
  double max_deviation_gain = 0.0;
  std::vector<double> delta_trace;  // sup-norm strategy change per iteration
};

struct PbneOptions {
  double eps_eq = 1e-6;
  int max_iters = 500;
  double off_path_attacker_belief = 1.0;
  double damping = 0.5;
  double class_tol = 1e-9;
};

BeliefEntry update_belief(double prior, double sigma_A, double sigma_D,
                          double off_path_attacker = 1.0);

// Full belief vector for a sender profile; messages nobody sends get the
// off-path value.
Belief beliefs_for(const std::vector<double>& priors, const SenderStrategy& s,
                   double off_path_attacker = 1.0);

double receiver_expected_utility(const ReceiverStrategy& sigma_R, Bits m, const Belief& mu,
                                 const ReceiverUtilityTable& table);

double sender_expected_utility(std::size_t service, SenderRole role,
                               const ReceiverStrategy& sigma_R, const SenderStrategy& senders,
                               const std::vector<double>& priors, const UtilityTables& tables);

// Expected payoff difference (trust minus not trust) on `service` after
// message `m`, averaging over the other services' on-path messages, all
// types under `mu`, and the other services' trust decisions.
double trust_gain(std::size_t service, Message m, const std::vector<double>& priors,
                  const SenderStrategy& senders, const ReceiverStrategy& sigma_R, const Belief& mu,
                  const UtilityTables& tables);

struct DeviationGains {
  double attacker = 0.0;
  double defender = 0.0;
  double receiver = 0.0;
  double max() const noexcept;
};

// Largest gain any player can get from a unilateral pure deviation. Receiver
// deviations are checked at every message vector.
DeviationGains deviation_gains(const std::vector<double>& priors, const SenderStrategy& senders,
                               const ReceiverStrategy& sigma_R, const Belief& mu,
                               const UtilityTables& tables);

EquilibriumClass classify(double low_A, double low_D, double trust_low, double trust_high,
                          double tol = 1e-9);

struct Profile {
  SenderStrategy senders;
  ReceiverStrategy receiver;
};

PbneResult solve_pbne(const std::vector<double>& priors, const UtilityTables& tables,
                      const std::optional<Profile>& start = std::nullopt,
                      const PbneOptions& opts = {});

PbneResult select_equilibrium(const std::vector<PbneResult>& candidates);

struct ThresholdContext {
  std::vector<double> priors;  // other services' priors; entry `service` is ignored
  std::vector<double> trust;   // other services' trust after m_L; empty means trust all
};

// Prior on `service` at which the device is indifferent between trusting and
// not trusting a pooled low-risk message. Returns 1 if trusting always wins.
double compromise_threshold(std::size_t service, const UtilityTables& tables,
                            const ThresholdContext& ctx, double tol = 1e-9);

struct AssumptionCheck {
  std::string name;
  bool passed = true;
  std::string detail;  // first violating tuple, empty when passed
};

struct AssumptionReport {
  std::vector<AssumptionCheck> checks;
  bool all_passed() const noexcept;
};

AssumptionReport validate_assumptions(const UtilityTables& tables);

// Every pure-strategy PBNE, in a canonical order. Refuses N > 3.
std::vector<PbneResult> enumerate_pure_equilibria(const std::vector<double>& priors,
                                                  const UtilityTables& tables,
                                                  const PbneOptions& opts = {});

struct SenderValues {
  std::vector<double> v_A;
  std::vector<double> v_D;
};

SenderValues equilibrium_values(const PbneResult& result, const std::vector<double>& priors,
                                const UtilityTables& tables);

}  // namespace cloudtrust::signaling
