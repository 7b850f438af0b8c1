#include "harness.hpp"

#include <cstdio>

#include "errors.hpp"
#include "json.hpp"

namespace cloudtrust::harness {

using nlohmann::json;

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

json classes_json(const std::vector<signaling::EquilibriumClass>& cs) {
  json out = json::array();
  for (auto c : cs) out.push_back(std::string(signaling::to_string(c)));
  return out;
}

}  // namespace

PreparedTables prepare_tables(const Scenario& s) {
  s.validate();
  PreparedTables out;
  out.tables.senders = s.sender_tables;
  switch (s.receiver_source) {
    case ReceiverSource::Additive:
      out.tables.receiver = signaling::additive_receiver_table(s.additive_receiver);
      break;
    case ReceiverSource::Dense:
      out.tables.receiver = s.dense_receiver;
      break;
    case ReceiverSource::Estimate: {
      out.estimate = control::estimate_receiver_utility_table(
          *s.control, s.utility_map, s.monte_carlo.episodes, s.monte_carlo.seed, s.monte_carlo.J_max);
      out.tables.receiver = out.estimate->table;
      break;
    }
  }
  return out;
}

gne::GneProblem make_problem(const Scenario& s, const signaling::UtilityTables& tables) {
  gne::GneProblem pb;
  pb.alpha_A = s.alpha_A;
  pb.alpha_D = s.alpha_D;
  pb.tables = tables;
  pb.initial_priors = s.initial_priors;
  pb.initial_profile = s.initial_profile;
  pb.pbne.eps_eq = s.solver.eps_eq;
  pb.pbne.max_iters = s.solver.max_iters;
  pb.pbne.off_path_attacker_belief = s.solver.off_path_belief;
  pb.delta_p = s.solver.delta_p;
  pb.max_rounds = s.solver.max_rounds;
  pb.max_period = s.solver.max_period;
  pb.cycle_tol = s.solver.cycle_tol;
  pb.mixed_tol = s.solver.mixed_tol;
  pb.min_frequency = s.solver.min_frequency;
  return pb;
}

GneRun run_gne(const Scenario& s) {
  PreparedTables prepared = prepare_tables(s);
  GneRun run;
  run.problem = make_problem(s, prepared.tables);
  run.estimate = std::move(prepared.estimate);
  run.result = gne::solve_gne(run.problem);
  run.verification = gne::verify_gne(run.result, run.problem);
  run.scenario_hash = scenario_hash(s);
  run.seed = s.monte_carlo.seed;
  return run;
}

std::string gne_report_json(const GneRun& run) {
  const gne::GneResult& r = run.result;
  json doc;
  doc["scenario_hash"] = run.scenario_hash;
  doc["seed"] = run.seed;
  doc["status"] = std::string(gne::to_string(r.status));
  doc["rounds"] = r.rounds;
  doc["message"] = r.message;

  json services = json::array();
  for (std::size_t i = 0; i < r.p_A.size(); ++i) {
    json sv;
    sv["index"] = i;
    sv["p_A"] = r.p_A[i];
    if (i < r.v_A.size()) {
      sv["v_A"] = r.v_A[i];
      sv["v_D"] = r.v_D[i];
      sv["v_AD"] = r.v_AD[i];
      sv["untrusted_and_idle"] = static_cast<bool>(r.untrusted_and_idle[i]);
    }
    if (i < r.p_diamond.size()) sv["p_diamond"] = r.p_diamond[i];
    if (i < r.classes.size()) sv["class"] = std::string(signaling::to_string(r.classes[i]));
    if (i < r.receiver.services()) {
      sv["trust_low"] = r.receiver.trust_low[i];
      sv["trust_high"] = r.receiver.trust_high[i];
      sv["attacker_low"] = r.senders.low_given_attacker[i];
      sv["defender_low"] = r.senders.low_given_defender[i];
      sv["belief_attacker_given_low"] = r.belief.attacker_given_low[i];
      sv["belief_attacker_given_high"] = r.belief.attacker_given_high[i];
    }
    if (i < r.flipit.size()) {
      const auto& f = r.flipit[i];
      sv["flipit"] = {{"f_A", f.f_A}, {"f_D", f.f_D}, {"p_A", f.p_A}, {"u_A", f.u_A},
                      {"u_D", f.u_D}, {"regime", std::string(flipit::to_string(f.regime))}};
    }
    services.push_back(sv);
  }
  doc["services"] = services;
  doc["trace"] = r.trace;
  json ct = json::array();
  for (const auto& round : r.class_trace) ct.push_back(classes_json(round));
  doc["class_trace"] = ct;
  if (r.cycle) {
    doc["cycle"] = {{"period", r.cycle->period}, {"services", r.cycle->services}};
  } else {
    doc["cycle"] = nullptr;
  }
  json mixed = json::array();
  for (const auto& m : r.mixed) {
    mixed.push_back({{"service", m.service},
                     {"p_diamond", m.p_diamond},
                     {"q", m.q},
                     {"q_interval", {m.q_lo, m.q_hi}},
                     {"interval_flagged", m.interval_flagged},
                     {"flipit_p_A", m.flipit_p_A},
                     {"note", m.note}});
  }
  doc["mixed"] = mixed;
  doc["verification"] = {{"passed", run.verification.passed},
                         {"flipit_residual", run.verification.flipit_residual},
                         {"value_residual", run.verification.value_residual},
                         {"deviation_gain", run.verification.deviation_gain}};
  if (run.estimate) {
    doc["receiver_table"] = {{"source", "estimate"},
                             {"entries", run.estimate->table.size()},
                             {"capped_episodes", run.estimate->capped_episodes}};
  } else {
    doc["receiver_table"] = {{"source", "scenario"}};
  }
  return doc.dump(2) + "\n";
}

std::string header_comment(const Scenario& s, std::uint64_t seed) {
  return "# scenario=" + scenario_hash(s) + " seed=" + std::to_string(seed);
}

const control::ControlSetup& require_control(const Scenario& s) {
  if (!s.control) throw ConfigError("scenario \"" + s.name + "\" has no control section");
  return *s.control;
}

control::SimTrace simulate_profile(const Scenario& s, const StrategyProfile& p, std::uint64_t seed) {
  const control::ControlSetup& setup = require_control(s);
  const int T = setup.weights.T;
  std::mt19937_64 schedule_rng(control::splitmix64(seed ^ 0x5CEDu));
  const control::TypeSchedule schedule = control::sample_schedule(p.f_A, p.f_D, T, schedule_rng);
  const signaling::SenderStrategy senders{p.attacker_low, p.defender_low};
  const signaling::ReceiverStrategy receiver{p.trust_low, p.trust_high};
  const control::Gains gains = control::Gains::compute(setup);
  return control::simulate_episode(setup, gains, receiver, senders, schedule, control::splitmix64(seed));
}

std::vector<double> BenchTable::means() const {
  std::vector<double> m(columns.size(), 0.0);
  if (J.empty()) return m;
  for (const auto& row : J) {
    for (std::size_t c = 0; c < m.size(); ++c) m[c] += row[c];
  }
  for (double& v : m) v /= static_cast<double>(J.size());
  return m;
}

std::string BenchTable::to_csv(const std::string& header) const {
  std::string out = header.empty() ? "" : header + "\n";
  out += "trial";
  for (const auto& c : columns) out += "," + c;
  out += "\n";
  for (std::size_t t = 0; t < J.size(); ++t) {
    out += std::to_string(t + 1);
    for (double v : J[t]) out += "," + fmt(v);
    out += "\n";
  }
  out += "average";
  for (double v : means()) out += "," + fmt(v);
  out += "\n";
  return out;
}

BenchTable bench(const Scenario& s, int trials, std::uint64_t seed) {
  if (trials < 1) throw DomainError("bench needs at least one trial");
  const control::ControlSetup& setup = require_control(s);
  if (s.profiles.empty()) throw ConfigError("scenario \"" + s.name + "\" defines no profiles");
  const control::Gains gains = control::Gains::compute(setup);
  const int T = setup.weights.T;

  BenchTable table;
  for (const auto& p : s.profiles) table.columns.push_back(p.name);
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t trial_seed = control::splitmix64(seed + static_cast<std::uint64_t>(t));
    std::vector<double> row;
    for (const auto& p : s.profiles) {
      std::mt19937_64 schedule_rng(control::splitmix64(trial_seed ^ 0x5CEDu));
      const auto schedule = control::sample_schedule(p.f_A, p.f_D, T, schedule_rng);
      const signaling::SenderStrategy senders{p.attacker_low, p.defender_low};
      const signaling::ReceiverStrategy receiver{p.trust_low, p.trust_high};
      double J = s.monte_carlo.J_max;
      try {
        J = std::min(control::simulate_episode(setup, gains, receiver, senders, schedule,
                                               control::splitmix64(trial_seed))
                         .J,
                     s.monte_carlo.J_max);
      } catch (const NumericError&) {
        J = s.monte_carlo.J_max;
      }
      row.push_back(J);
    }
    table.J.push_back(std::move(row));
  }
  return table;
}

std::string ValidationReport::to_text() const {
  std::string out;
  for (const auto& c : assumptions.checks) {
    out += c.name + (c.passed ? " pass" : " FAIL");
    if (!c.passed) out += "  " + c.detail;
    out += "\n";
  }
  for (const auto& n : notes) out += "note: " + n + "\n";
  return out;
}

ValidationReport validate_scenario(const Scenario& s) {
  ValidationReport rep;
  const PreparedTables prepared = prepare_tables(s);
  rep.assumptions = signaling::validate_assumptions(prepared.tables);
  if (prepared.estimate) {
    rep.capped_episodes = prepared.estimate->capped_episodes;
    rep.notes.push_back("receiver table estimated from " + std::to_string(s.monte_carlo.episodes) +
                        " episodes per entry; " + std::to_string(prepared.estimate->capped_episodes) +
                        " episodes hit the cost cap");
  }
  for (std::size_t i = 0; i < s.services; ++i) {
    const double pd = signaling::compromise_threshold(i, prepared.tables, {s.initial_priors, {}});
    rep.notes.push_back("service " + std::to_string(i) + " trust threshold " + fmt(pd));
  }
  if (s.control) {
    const control::Gains g = control::Gains::compute(*s.control);
    rep.notes.push_back("LQR worst condition number " + fmt(g.lqr.max_condition));
    if (g.kalman.regularized_steps > 0) {
      rep.notes.push_back("Kalman innovation covariance regularized on " +
                          std::to_string(g.kalman.regularized_steps) + " steps");
    }
  }
  for (const auto& d : s.defaults_applied) rep.notes.push_back("default: " + d);
  return rep;
}

}  // namespace cloudtrust::harness
