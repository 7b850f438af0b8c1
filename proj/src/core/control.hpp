#pragma once

// Physical layer: a discrete-time linear plant under finite-horizon LQG
// control. Remote measurement channels may carry injected bias; the device
// classifies each innovation against a gate and zeroes the channels it does
// not trust before the estimator update.

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "signaling.hpp"

namespace cloudtrust::control {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct PlantModel {
  Matrix A;     // n x n
  Matrix B;     // n x q
  Matrix C;     // Ny x n
  Matrix xi;    // process noise covariance
  Matrix zeta;  // sensor noise covariance
  Vector x0;
  Matrix P0;

  Eigen::Index states() const noexcept { return A.rows(); }
  Eigen::Index inputs() const noexcept { return B.cols(); }
  Eigen::Index outputs() const noexcept { return C.rows(); }
  // Throws ConfigError on dimension mismatch or a non-symmetric / indefinite covariance.
  void validate() const;
};

struct CostWeights {
  Matrix F;
  Matrix Q;
  Matrix R;
  int T = 50;
  Vector x_ref;  // regulated set point; empty means the origin

  void validate(const PlantModel& plant) const;
};

// Channel layout and innovation gate. channel_service[c] is the service that
// carries channel c, or -1 for a channel that is always trusted.
struct GateConfig {
  Vector epsilon;
  std::vector<int> channel_service;

  bool is_local(Eigen::Index c) const { return channel_service.at(static_cast<std::size_t>(c)) < 0; }
  std::size_t services() const;
  void validate(const PlantModel& plant) const;
};

struct ChannelBias {
  double attacker_low = 0.0;
  double attacker_high = 0.0;
  double defender_low = 0.0;
  double defender_high = 0.0;
};

struct BiasPolicy {
  std::vector<ChannelBias> channels;  // one entry per measurement channel; local entries unused

  // Defaults relative to the gate: 0.9 eps under m_L, 5 eps (attacker) and
  // 1.5 eps (defender) under m_H.
  static BiasPolicy relative_to(const GateConfig& gate);
  void validate(const GateConfig& gate) const;
};

struct ControlSetup {
  PlantModel plant;
  CostWeights weights;
  GateConfig gate;
  BiasPolicy bias;

  void validate() const;
};

struct LqrSchedule {
  std::vector<Matrix> S;  // S[0..T]
  std::vector<Matrix> K;  // K[0..T-1]
  double max_condition = 1.0;  // worst condition number of B'SB + R
};

struct KalmanSchedule {
  std::vector<Matrix> P;  // P[0..T]
  std::vector<Matrix> L;  // L[0..T-1]
  int regularized_steps = 0;  // steps where the innovation covariance needed a ridge
};

LqrSchedule lqr_gains(const PlantModel& plant, const CostWeights& weights);
KalmanSchedule kalman_gains(const PlantModel& plant, int T);

using signaling::Bits;

// Adds the configured bias to each remote channel. `theta` and `msg` are per
// service bitmasks (set bit = attacker / high-risk).
Vector inject_bias(const Vector& y, Bits theta, Bits msg, const BiasPolicy& policy,
                   const GateConfig& gate);

// Per-channel message classes: false = low risk (|nu| <= eps), true = high risk.
std::vector<bool> classify_innovation(const Vector& nu, const Vector& epsilon);

// Zeroes the channels whose action is "not trust"; local channels always pass.
Vector strategic_filter(const Vector& nu, const std::vector<bool>& trusted,
                        const GateConfig* gate = nullptr);

double cost_to_utility(double J, double v_max, double v_min, double beta);

// Per-step controller identities, one bitmask per step over services.
struct TypeSchedule {
  std::vector<Bits> theta;

  static TypeSchedule constant(int T, Bits theta);
};

// Samples a periodic FlipIt timeline for each service. Frequencies are moves
// per step; each side starts at a uniformly random phase and the most recent
// mover controls the service. The defender holds every service at time 0.
TypeSchedule sample_schedule(const std::vector<double>& f_A, const std::vector<double>& f_D, int T,
                             std::mt19937_64& rng);

struct SimTrace {
  std::vector<Vector> x;       // x[0..T]
  std::vector<Vector> xhat;    // xhat[0..T]
  std::vector<Vector> u;       // u[0..T-1]
  std::vector<Vector> y;       // clean measurements
  std::vector<Vector> ytilde;  // measurements after bias
  std::vector<Vector> nu;
  std::vector<Vector> nubar;
  std::vector<std::vector<bool>> msg;      // per channel, true = high risk
  std::vector<std::vector<bool>> trusted;  // per channel
  std::size_t services = 0;
  std::vector<Bits> theta;                 // per service
  std::vector<Bits> sent;                  // per service message the sender chose
  std::vector<double> J_running;           // after stage cost k
  double J = 0.0;                          // includes the terminal cost

  // Header comment line, column names, one row per step, trailing total.
  std::string to_csv(const std::string& header_comment = "") const;
};

struct Gains {
  LqrSchedule lqr;
  KalmanSchedule kalman;
  // Symmetric square roots used to draw correlated Gaussian noise.
  Matrix xi_root;
  Matrix zeta_root;
  Matrix P0_root;

  static Gains compute(const ControlSetup& setup);
};

// Runs one episode. The sender holding service i (per `schedule`) draws its
// message from `senders`; the device draws its action from `receiver` using the
// message class its gate observed. Throws NumericError with the step index if
// the state stops being finite.
SimTrace simulate_episode(const ControlSetup& setup, const Gains& gains,
                          const signaling::ReceiverStrategy& receiver,
                          const signaling::SenderStrategy& senders, const TypeSchedule& schedule,
                          std::uint64_t seed);

struct UtilityMap {
  double v_max = 1.0;
  double v_min = 0.0;
  double beta = 1e-3;
};

struct TableEstimate {
  signaling::ReceiverUtilityTable table;
  std::vector<double> mean_cost;  // same indexing as the table entries
  std::size_t capped_episodes = 0;
};

// Deterministic 64-bit mixer used to derive per-episode seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

// For every (theta, m, a) over the remote services, averages J over M episodes
// with that configuration held for the whole horizon, then maps the average
// through cost_to_utility. Every configuration reuses the same episode seeds.
TableEstimate estimate_receiver_utility_table(const ControlSetup& setup, const UtilityMap& map,
                                              int episodes, std::uint64_t seed,
                                              double J_max = 1e9);

}  // namespace cloudtrust::control
