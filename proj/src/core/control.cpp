#include "control.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "errors.hpp"

namespace cloudtrust::control {

namespace {

std::string dims(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_shape(const Matrix& m, Eigen::Index r, Eigen::Index c, const char* name) {
  if (m.rows() != r || m.cols() != c) {
    throw ConfigError(std::string(name) + " is " + dims(m) + ", expected " + std::to_string(r) +
                      "x" + std::to_string(c));
  }
}

void require_finite(const Matrix& m, const char* name) {
  if (!m.allFinite()) throw ConfigError(std::string(name) + " has non-finite entries");
}

double scale_of(const Matrix& m) { return 1.0 + m.cwiseAbs().maxCoeff(); }

void require_symmetric(const Matrix& m, const char* name) {
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale_of(m)) {
    throw ConfigError(std::string(name) + " is not symmetric");
  }
}

void require_psd(const Matrix& m, const char* name) {
  require_symmetric(m, name);
  if (m.size() == 0) return;
  const Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-12 * scale_of(m)) {
    throw ConfigError(std::string(name) + " is not positive semidefinite");
  }
}

void require_pd(const Matrix& m, const char* name) {
  require_symmetric(m, name);
  const Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  if (!(es.eigenvalues().minCoeff() > 0.0)) {
    throw ConfigError(std::string(name) + " is not positive definite");
  }
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Symmetric square root of a PSD matrix; tolerates zero eigenvalues.
Matrix psd_root(const Matrix& m) {
  if (m.size() == 0) return m;
  const Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  const Vector lambda = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
}

Vector gaussian(const Matrix& root, std::mt19937_64& rng, std::normal_distribution<double>& n01) {
  Vector z(root.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = n01(rng);
  return root * z;
}

void append_row(std::string& out, const Vector& v) {
  char buf[40];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, ",%.12g", v[i]);
    out += buf;
  }
}

}  // namespace

void PlantModel::validate() const {
  const Eigen::Index n = A.rows();
  if (n == 0) throw ConfigError("A must be non-empty");
  require_shape(A, n, n, "A");
  if (B.rows() != n || B.cols() == 0) throw ConfigError("B is " + dims(B) + ", expected " + std::to_string(n) + " rows");
  if (C.cols() != n || C.rows() == 0) throw ConfigError("C is " + dims(C) + ", expected " + std::to_string(n) + " columns");
  require_shape(xi, n, n, "xi");
  require_shape(zeta, C.rows(), C.rows(), "zeta");
  require_shape(P0, n, n, "P0");
  if (x0.size() != n) throw ConfigError("x0 has length " + std::to_string(x0.size()));
  for (const auto& [m, name] : {std::pair{&A, "A"}, {&B, "B"}, {&C, "C"}, {&xi, "xi"},
                                {&zeta, "zeta"}, {&P0, "P0"}}) {
    require_finite(*m, name);
  }
  if (!x0.allFinite()) throw ConfigError("x0 has non-finite entries");
  require_psd(xi, "xi");
  require_psd(zeta, "zeta");
  require_psd(P0, "P0");
}

void CostWeights::validate(const PlantModel& plant) const {
  const Eigen::Index n = plant.states();
  require_shape(F, n, n, "F");
  require_shape(Q, n, n, "Q");
  require_shape(R, plant.inputs(), plant.inputs(), "R");
  require_pd(F, "F");
  require_pd(Q, "Q");
  require_pd(R, "R");
  if (T < 1) throw ConfigError("horizon T must be a positive integer");
  if (x_ref.size() != 0 && x_ref.size() != n) {
    throw ConfigError("x_ref has length " + std::to_string(x_ref.size()));
  }
}

std::size_t GateConfig::services() const {
  int hi = -1;
  for (int s : channel_service) hi = std::max(hi, s);
  return static_cast<std::size_t>(hi + 1);
}

void GateConfig::validate(const PlantModel& plant) const {
  const auto ny = static_cast<std::size_t>(plant.outputs());
  if (static_cast<std::size_t>(epsilon.size()) != ny) {
    throw ConfigError("epsilon has " + std::to_string(epsilon.size()) + " entries for " +
                      std::to_string(ny) + " channels");
  }
  if (channel_service.size() != ny) {
    throw ConfigError("channel map has " + std::to_string(channel_service.size()) +
                      " entries for " + std::to_string(ny) + " channels");
  }
  for (Eigen::Index c = 0; c < epsilon.size(); ++c) {
    if (!(epsilon[c] > 0.0) || !std::isfinite(epsilon[c])) {
      throw ConfigError("epsilon[" + std::to_string(c) + "] must be a finite positive threshold");
    }
  }
  const std::size_t ns = services();
  if (ns == 0) throw ConfigError("no measurement channel is assigned to a remote service");
  for (std::size_t s = 0; s < ns; ++s) {
    if (std::find(channel_service.begin(), channel_service.end(), static_cast<int>(s)) ==
        channel_service.end()) {
      throw ConfigError("service " + std::to_string(s) + " has no measurement channel");
    }
  }
}

BiasPolicy BiasPolicy::relative_to(const GateConfig& gate) {
  BiasPolicy p;
  p.channels.resize(static_cast<std::size_t>(gate.epsilon.size()));
  for (Eigen::Index c = 0; c < gate.epsilon.size(); ++c) {
    if (gate.is_local(c)) continue;
    const double e = gate.epsilon[c];
    p.channels[static_cast<std::size_t>(c)] = {0.9 * e, 5.0 * e, 0.0, 1.5 * e};
  }
  return p;
}

void BiasPolicy::validate(const GateConfig& gate) const {
  if (channels.size() != static_cast<std::size_t>(gate.epsilon.size())) {
    throw ConfigError("bias policy has " + std::to_string(channels.size()) + " channel entries");
  }
  for (std::size_t c = 0; c < channels.size(); ++c) {
    if (gate.is_local(static_cast<Eigen::Index>(c))) continue;
    const double e = gate.epsilon[static_cast<Eigen::Index>(c)];
    const ChannelBias& b = channels[c];
    const std::string where = "bias for channel " + std::to_string(c);
    if (std::fabs(b.attacker_low) > e || std::fabs(b.defender_low) > e) {
      throw ConfigError(where + ": low-risk bias must stay inside the gate");
    }
    if (!(std::fabs(b.attacker_high) > e) || !(std::fabs(b.defender_high) > e)) {
      throw ConfigError(where + ": high-risk bias must exceed the gate");
    }
  }
}

void ControlSetup::validate() const {
  plant.validate();
  weights.validate(plant);
  gate.validate(plant);
  bias.validate(gate);
}

LqrSchedule lqr_gains(const PlantModel& plant, const CostWeights& weights) {
  const int T = weights.T;
  if (T < 1) throw DomainError("horizon T must be positive");
  LqrSchedule out;
  out.S.resize(static_cast<std::size_t>(T) + 1);
  out.K.resize(static_cast<std::size_t>(T));
  out.S[static_cast<std::size_t>(T)] = weights.F;
  const Matrix& A = plant.A;
  const Matrix& B = plant.B;
  for (int k = T - 1; k >= 0; --k) {
    const Matrix& Sn = out.S[static_cast<std::size_t>(k) + 1];
    const Matrix G = symmetrize(B.transpose() * Sn * B + weights.R);
    const Eigen::SelfAdjointEigenSolver<Matrix> es(G, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0)) throw NumericError("B'SB + R lost positive definiteness", k);
    out.max_condition = std::max(out.max_condition, hi / lo);
    const Matrix K = G.ldlt().solve(B.transpose() * Sn * A);
    // Joseph-style form keeps S symmetric positive definite.
    const Matrix Acl = A - B * K;
    const Matrix S = symmetrize(Acl.transpose() * Sn * Acl + K.transpose() * weights.R * K + weights.Q);
    if (!S.allFinite() || !K.allFinite()) throw NumericError("LQR recursion produced non-finite entries", k);
    out.K[static_cast<std::size_t>(k)] = K;
    out.S[static_cast<std::size_t>(k)] = S;
  }
  return out;
}

KalmanSchedule kalman_gains(const PlantModel& plant, int T) {
  if (T < 1) throw DomainError("horizon T must be positive");
  KalmanSchedule out;
  out.P.resize(static_cast<std::size_t>(T) + 1);
  out.L.resize(static_cast<std::size_t>(T));
  out.P[0] = plant.P0;
  const Matrix& A = plant.A;
  const Matrix& C = plant.C;
  const Eigen::Index ny = C.rows();
  for (int k = 0; k < T; ++k) {
    const Matrix& P = out.P[static_cast<std::size_t>(k)];
    Matrix Sigma = symmetrize(C * P * C.transpose() + plant.zeta);
    Eigen::LLT<Matrix> llt(Sigma);
    if (llt.info() != Eigen::Success) {
      Sigma += 1e-12 * Matrix::Identity(ny, ny);
      llt.compute(Sigma);
      ++out.regularized_steps;
      if (llt.info() != Eigen::Success) {
        throw NumericError("innovation covariance is singular even after regularization", k);
      }
    }
    const Matrix L = llt.solve(C * P).transpose();  // P C' Sigma^{-1}
    const Matrix Pf = symmetrize(P - L * C * P);
    const Matrix Pn = symmetrize(A * Pf * A.transpose() + plant.xi);
    if (!Pn.allFinite() || !L.allFinite()) throw NumericError("Kalman recursion produced non-finite entries", k);
    out.L[static_cast<std::size_t>(k)] = L;
    out.P[static_cast<std::size_t>(k) + 1] = Pn;
  }
  return out;
}

Vector inject_bias(const Vector& y, Bits theta, Bits msg, const BiasPolicy& policy,
                   const GateConfig& gate) {
  if (y.size() != gate.epsilon.size() ||
      policy.channels.size() != static_cast<std::size_t>(y.size())) {
    throw DomainError("measurement, gate and bias policy disagree on channel count");
  }
  Vector out = y;
  for (Eigen::Index c = 0; c < y.size(); ++c) {
    const int s = gate.channel_service[static_cast<std::size_t>(c)];
    if (s < 0) continue;
    const ChannelBias& b = policy.channels[static_cast<std::size_t>(c)];
    const bool attacker = signaling::bit(theta, static_cast<std::size_t>(s));
    const bool high = signaling::bit(msg, static_cast<std::size_t>(s));
    if (attacker) {
      out[c] += high ? b.attacker_high : b.attacker_low;
    } else {
      out[c] += high ? b.defender_high : b.defender_low;
    }
  }
  return out;
}

std::vector<bool> classify_innovation(const Vector& nu, const Vector& epsilon) {
  if (nu.size() != epsilon.size()) throw DomainError("innovation and gate sizes differ");
  std::vector<bool> high(static_cast<std::size_t>(nu.size()));
  for (Eigen::Index c = 0; c < nu.size(); ++c) {
    high[static_cast<std::size_t>(c)] = !(std::fabs(nu[c]) <= epsilon[c]);
  }
  return high;
}

Vector strategic_filter(const Vector& nu, const std::vector<bool>& trusted, const GateConfig* gate) {
  if (trusted.size() != static_cast<std::size_t>(nu.size())) {
    throw DomainError("action vector and innovation sizes differ");
  }
  Vector out = nu;
  for (Eigen::Index c = 0; c < nu.size(); ++c) {
    const bool local = gate != nullptr && gate->is_local(c);
    if (!local && !trusted[static_cast<std::size_t>(c)]) out[c] = 0.0;
  }
  return out;
}

double cost_to_utility(double J, double v_max, double v_min, double beta) {
  if (std::isnan(J) || J < 0.0) throw DomainError("cost J must be >= 0");
  if (!(v_max > v_min)) throw DomainError("v_max must exceed v_min");
  if (!(beta > 0.0)) throw DomainError("beta must be positive");
  return (v_max - v_min) * std::exp(-beta * J) + v_min;
}

TypeSchedule TypeSchedule::constant(int T, Bits theta) {
  return {std::vector<Bits>(static_cast<std::size_t>(std::max(T, 0)), theta)};
}

TypeSchedule sample_schedule(const std::vector<double>& f_A, const std::vector<double>& f_D, int T,
                             std::mt19937_64& rng) {
  if (f_A.size() != f_D.size()) throw DomainError("frequency vectors differ in length");
  if (f_A.size() > 32) throw DomainError("at most 32 services fit a type bitmask");
  for (std::size_t s = 0; s < f_A.size(); ++s) {
    if (!(f_A[s] >= 0.0) || !(f_D[s] >= 0.0) || !std::isfinite(f_A[s]) || !std::isfinite(f_D[s])) {
      throw DomainError("move frequencies must be finite and >= 0");
    }
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Draw both phases for every service so the stream layout is fixed.
  std::vector<double> phase_A(f_A.size()), phase_D(f_A.size());
  for (std::size_t s = 0; s < f_A.size(); ++s) {
    phase_A[s] = unit(rng);
    phase_D[s] = unit(rng);
  }
  const auto last_move = [](double f, double phase01, double t) {
    if (f == 0.0) return -1.0;
    const double period = 1.0 / f;
    const double first = phase01 * period;
    if (t < first) return -1.0;
    return first + std::floor((t - first) / period) * period;
  };

  TypeSchedule out;
  out.theta.assign(static_cast<std::size_t>(std::max(T, 0)), 0);
  for (int k = 0; k < T; ++k) {
    Bits theta = 0;
    for (std::size_t s = 0; s < f_A.size(); ++s) {
      const double a = last_move(f_A[s], phase_A[s], k);
      const double d = last_move(f_D[s], phase_D[s], k);
      if (a >= 0.0 && a > d) theta |= Bits{1} << s;
    }
    out.theta[static_cast<std::size_t>(k)] = theta;
  }
  return out;
}

Gains Gains::compute(const ControlSetup& setup) {
  Gains g;
  g.lqr = lqr_gains(setup.plant, setup.weights);
  g.kalman = kalman_gains(setup.plant, setup.weights.T);
  g.xi_root = psd_root(setup.plant.xi);
  g.zeta_root = psd_root(setup.plant.zeta);
  g.P0_root = psd_root(setup.plant.P0);
  return g;
}

SimTrace simulate_episode(const ControlSetup& setup, const Gains& gains,
                          const signaling::ReceiverStrategy& receiver,
                          const signaling::SenderStrategy& senders, const TypeSchedule& schedule,
                          std::uint64_t seed) {
  const PlantModel& pl = setup.plant;
  const CostWeights& w = setup.weights;
  const GateConfig& gate = setup.gate;
  const int T = w.T;
  const std::size_t ns = gate.services();
  const Eigen::Index ny = pl.outputs();
  if (schedule.theta.size() < static_cast<std::size_t>(T)) {
    throw DomainError("type schedule is shorter than the horizon");
  }
  if (receiver.services() != ns || senders.services() != ns) {
    throw DomainError("strategy profile does not match the remote service count");
  }
  if (gains.lqr.K.size() != static_cast<std::size_t>(T) ||
      gains.kalman.L.size() != static_cast<std::size_t>(T)) {
    throw DomainError("gain schedules do not match the horizon");
  }

  const Vector xref = w.x_ref.size() ? w.x_ref : Vector::Zero(pl.states());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SimTrace tr;
  tr.services = ns;
  tr.x.reserve(static_cast<std::size_t>(T) + 1);
  tr.xhat.reserve(static_cast<std::size_t>(T) + 1);

  Vector x = pl.x0 + gaussian(gains.P0_root, rng, n01);
  Vector xhat = pl.x0;
  tr.x.push_back(x);
  tr.xhat.push_back(xhat);

  double J = 0.0;
  for (int k = 0; k < T; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const Bits theta = schedule.theta[ku];

    // Senders choose their message class.
    Bits sent = 0;
    for (std::size_t s = 0; s < ns; ++s) {
      const auto role = signaling::bit(theta, s) ? signaling::SenderRole::Attacker
                                                  : signaling::SenderRole::Defender;
      const double draw = unit(rng);
      if (draw >= senders.prob(s, role, signaling::Message::Low)) sent |= Bits{1} << s;
    }

    const Vector wk = gaussian(gains.xi_root, rng, n01);
    const Vector vk = gaussian(gains.zeta_root, rng, n01);
    const Vector y = pl.C * x + vk;
    const Vector yt = inject_bias(y, theta, sent, setup.bias, gate);
    const Vector nu = yt - pl.C * xhat;
    const std::vector<bool> msg = classify_innovation(nu, gate.epsilon);

    // A service reads as high risk if any of its channels does.
    Bits service_msg = 0;
    for (Eigen::Index c = 0; c < ny; ++c) {
      const int s = gate.channel_service[static_cast<std::size_t>(c)];
      if (s >= 0 && msg[static_cast<std::size_t>(c)]) service_msg |= Bits{1} << s;
    }
    std::vector<bool> trust_service(ns);
    for (std::size_t s = 0; s < ns; ++s) {
      const auto m = signaling::bit(service_msg, s) ? signaling::Message::High
                                                     : signaling::Message::Low;
      trust_service[s] = unit(rng) < receiver.trust_prob(s, m);
    }
    std::vector<bool> trusted(static_cast<std::size_t>(ny), true);
    for (Eigen::Index c = 0; c < ny; ++c) {
      const int s = gate.channel_service[static_cast<std::size_t>(c)];
      if (s >= 0) trusted[static_cast<std::size_t>(c)] = trust_service[static_cast<std::size_t>(s)];
    }
    const Vector nubar = strategic_filter(nu, trusted, &gate);

    const Vector u = -gains.lqr.K[ku] * (xhat - xref);
    const Vector dx = x - xref;
    J += dx.dot(w.Q * dx) + u.dot(w.R * u);

    x = pl.A * x + pl.B * u + wk;
    xhat = pl.A * xhat + pl.B * u + gains.kalman.L[ku] * nubar;
    if (!x.allFinite() || !xhat.allFinite() || !std::isfinite(J)) {
      throw NumericError("state diverged", k);
    }

    tr.u.push_back(u);
    tr.y.push_back(y);
    tr.ytilde.push_back(yt);
    tr.nu.push_back(nu);
    tr.nubar.push_back(nubar);
    tr.msg.push_back(msg);
    tr.trusted.push_back(std::move(trusted));
    tr.theta.push_back(theta);
    tr.sent.push_back(sent);
    tr.J_running.push_back(J);
    tr.x.push_back(x);
    tr.xhat.push_back(xhat);
  }
  const Vector dT = x - xref;
  J += dT.dot(w.F * dT);
  if (!std::isfinite(J)) throw NumericError("terminal cost is not finite", T);
  tr.J = J;
  return tr;
}

std::string SimTrace::to_csv(const std::string& header_comment) const {
  std::string out;
  if (!header_comment.empty()) out += header_comment + "\n";
  const Eigen::Index n = x.empty() ? 0 : x.front().size();
  const Eigen::Index q = u.empty() ? 0 : u.front().size();
  const Eigen::Index ny = nu.empty() ? 0 : nu.front().size();

  out += "k";
  const auto names = [&out](const char* stem, Eigen::Index count) {
    for (Eigen::Index i = 1; i <= count; ++i) out += std::string(",") + stem + std::to_string(i);
  };
  names("x", n);
  names("xhat", n);
  names("u", q);
  names("nu", ny);
  names("nubar", ny);
  names("msg", ny);
  names("act", ny);
  names("theta", static_cast<Eigen::Index>(services));
  out += ",J_running\n";

  char buf[40];
  for (std::size_t k = 0; k < u.size(); ++k) {
    out += std::to_string(k);
    append_row(out, x[k]);
    append_row(out, xhat[k]);
    append_row(out, u[k]);
    append_row(out, nu[k]);
    append_row(out, nubar[k]);
    for (bool h : msg[k]) out += h ? ",1" : ",0";
    for (bool t : trusted[k]) out += t ? ",1" : ",0";
    for (std::size_t s = 0; s < services; ++s) out += signaling::bit(theta[k], s) ? ",1" : ",0";
    std::snprintf(buf, sizeof buf, ",%.12g\n", J_running[k]);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "# J_total=%.12g\n", J);
  out += buf;
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

TableEstimate estimate_receiver_utility_table(const ControlSetup& setup, const UtilityMap& map,
                                              int episodes, std::uint64_t seed, double J_max) {
  if (episodes < 1) throw DomainError("need at least one episode per table entry");
  if (!(J_max > 0.0)) throw DomainError("J_max must be positive");
  setup.validate();
  const std::size_t ns = setup.gate.services();
  const Gains gains = Gains::compute(setup);
  const int T = setup.weights.T;

  TableEstimate est{signaling::ReceiverUtilityTable(ns), {}, 0};
  est.mean_cost.assign(est.table.size(), 0.0);
  const Bits count = est.table.vectors();

  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) seeds[static_cast<std::size_t>(e)] = splitmix64(seed + static_cast<std::uint64_t>(e));

  for (Bits theta = 0; theta < count; ++theta) {
    const TypeSchedule schedule = TypeSchedule::constant(T, theta);
    for (Bits m = 0; m < count; ++m) {
      // Both sender types play the configured message so it is fixed whoever holds the service.
      signaling::SenderStrategy senders = signaling::SenderStrategy::uniform(ns, 1.0, 1.0);
      for (std::size_t s = 0; s < ns; ++s) {
        const double low = signaling::bit(m, s) ? 0.0 : 1.0;
        senders.low_given_attacker[s] = low;
        senders.low_given_defender[s] = low;
      }
      for (Bits a = 0; a < count; ++a) {
        signaling::ReceiverStrategy receiver = signaling::ReceiverStrategy::trust_all(ns);
        for (std::size_t s = 0; s < ns; ++s) {
          const double t = signaling::bit(a, s) ? 0.0 : 1.0;
          receiver.trust_low[s] = t;
          receiver.trust_high[s] = t;
        }
        double total = 0.0;
        for (std::uint64_t sd : seeds) {
          double J = J_max;
          try {
            J = simulate_episode(setup, gains, receiver, senders, schedule, sd).J;
          } catch (const NumericError&) {
            J = J_max;
          }
          if (!(J < J_max)) {
            J = J_max;
            ++est.capped_episodes;
          }
          total += J;
        }
        const double mean = total / static_cast<double>(episodes);
        const std::size_t idx = (static_cast<std::size_t>(theta) << (2 * ns)) |
                                (static_cast<std::size_t>(m) << ns) | a;
        est.mean_cost[idx] = mean;
        est.table.set(theta, m, a, cost_to_utility(mean, map.v_max, map.v_min, map.beta));
      }
    }
  }
  return est;
}

}  // namespace cloudtrust::control
