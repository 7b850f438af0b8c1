#include "scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "errors.hpp"
#include "json.hpp"

namespace cloudtrust {

using nlohmann::json;
using control::Matrix;
using control::Vector;

namespace {

// ---------------------------------------------------------------------------
// Reading

class Reader {
 public:
  Reader(const std::string& text, std::string source) : text_(text), source_(std::move(source)) {}

  // `locate` is the path whose line is reported; a missing field has no line
  // of its own, so it is reported at its parent.
  [[noreturn]] void fail(const std::string& path, const std::string& what) const { fail_at(path, path, what); }

  [[noreturn]] void fail_at(const std::string& path, const std::string& locate, const std::string& what) const {
    const long line = line_of(locate);
    throw ParseError(source_ + ":" + std::to_string(line) + ": " + path + ": " + what, path, line);
  }

  // Best-effort line of a dotted path: each key is searched for after the
  // position of its parent, which is exact for the documents we write.
  long line_of(const std::string& path) const {
    std::size_t pos = 0;
    std::string key;
    const auto advance = [&] {
      if (key.empty()) return;
      const std::size_t at = text_.find("\"" + key + "\"", pos);
      if (at != std::string::npos) pos = at;
      key.clear();
    };
    bool in_index = false;
    for (char c : path) {
      if (c == '[') {
        advance();
        in_index = true;
      } else if (c == ']') {
        in_index = false;
      } else if (c == '.') {
        advance();
      } else if (!in_index) {
        key += c;
      }
    }
    advance();
    return 1 + static_cast<long>(std::count(text_.begin(), text_.begin() + static_cast<long>(pos), '\n'));
  }

  void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [k, v] : obj.items()) {
      (void)v;
      if (std::none_of(keys.begin(), keys.end(), [&](const char* allowed) { return k == allowed; })) {
        fail(join(path, k), "unknown field");
      }
    }
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }
  static std::string at(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
  }

  const json& required(const json& obj, const std::string& path, const char* key) const {
    if (!obj.contains(key)) fail_at(join(path, key), path, "required field is missing");
    return obj.at(key);
  }

  double number(const json& j, const std::string& path) const {
    if (!j.is_number()) fail(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) fail(path, "expected a finite number");
    return v;
  }

  long integer(const json& j, const std::string& path) const {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<long>();
  }

  std::vector<double> vec(const json& j, const std::string& path, std::size_t len) const {
    if (!j.is_array()) fail(path, "expected an array of numbers");
    if (len != 0 && j.size() != len) {
      fail(path, "expected " + std::to_string(len) + " entries, found " + std::to_string(j.size()));
    }
    std::vector<double> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], at(path, i)));
    return out;
  }

  std::vector<double> probs(const json& j, const std::string& path, std::size_t len) const {
    std::vector<double> out = vec(j, path, len);
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (out[i] < 0.0 || out[i] > 1.0) fail(at(path, i), "probability must lie in [0,1]");
    }
    return out;
  }

  std::vector<double> positive(const json& j, const std::string& path, std::size_t len) const {
    std::vector<double> out = vec(j, path, len);
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (!(out[i] > 0.0)) fail(at(path, i), "must be > 0");
    }
    return out;
  }

  Vector vector(const json& j, const std::string& path) const {
    const std::vector<double> v = vec(j, path, 0);
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  Matrix matrix(const json& j, const std::string& path) const {
    if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
    const std::size_t rows = j.size();
    std::size_t cols = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      if (!j[r].is_array()) fail(at(path, r), "expected a row array");
      if (r == 0) cols = j[r].size();
      if (j[r].size() != cols || cols == 0) fail(at(path, r), "rows must share a non-zero length");
    }
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            number(j[r][c], at(at(path, r), c));
      }
    }
    return m;
  }

 private:
  const std::string& text_;
  std::string source_;
};

// Optional scalar with a logged default.
template <typename T, typename F>
T optional_field(const json& obj, const std::string& path, const char* key, T fallback,
                 std::vector<std::string>& log, F&& read) {
  if (obj.contains(key)) return read(obj.at(key), Reader::join(path, key));
  std::ostringstream os;
  os << Reader::join(path, key) << " defaulted to " << fallback;
  log.push_back(os.str());
  return fallback;
}

signaling::SenderPayoff read_sender_payoff(const Reader& rd, const json& j, const std::string& path) {
  rd.only_keys(j, path, {"low_trust", "low_distrust", "high_trust", "high_distrust"});
  signaling::SenderPayoff p;
  p.low_trust = rd.number(rd.required(j, path, "low_trust"), Reader::join(path, "low_trust"));
  p.low_distrust = rd.number(rd.required(j, path, "low_distrust"), Reader::join(path, "low_distrust"));
  p.high_trust = rd.number(rd.required(j, path, "high_trust"), Reader::join(path, "high_trust"));
  p.high_distrust = rd.number(rd.required(j, path, "high_distrust"), Reader::join(path, "high_distrust"));
  return p;
}

signaling::ServiceReceiverPayoff read_receiver_payoff(const Reader& rd, const json& j,
                                                      const std::string& path) {
  static constexpr const char* kKeys[] = {
      "defender_low_trust",  "defender_low_distrust",  "defender_high_trust",
      "defender_high_distrust", "attacker_low_trust", "attacker_low_distrust",
      "attacker_high_trust", "attacker_high_distrust"};
  rd.only_keys(j, path,
               {kKeys[0], kKeys[1], kKeys[2], kKeys[3], kKeys[4], kKeys[5], kKeys[6], kKeys[7]});
  signaling::ServiceReceiverPayoff p;
  double* slots[] = {&p.defender_low_trust,  &p.defender_low_distrust,  &p.defender_high_trust,
                     &p.defender_high_distrust, &p.attacker_low_trust, &p.attacker_low_distrust,
                     &p.attacker_high_trust, &p.attacker_high_distrust};
  for (std::size_t k = 0; k < 8; ++k) {
    *slots[k] = rd.number(rd.required(j, path, kKeys[k]), Reader::join(path, kKeys[k]));
  }
  return p;
}

control::ControlSetup read_control(const Reader& rd, const json& j, const std::string& path,
                                   std::vector<std::string>& log) {
  rd.only_keys(j, path, {"A", "B", "C", "xi", "zeta", "x0", "P0", "F", "Q", "R", "T", "x_ref",
                         "gate", "bias"});
  control::ControlSetup c;
  const auto mat = [&](const char* key) {
    return rd.matrix(rd.required(j, path, key), Reader::join(path, key));
  };
  c.plant.A = mat("A");
  c.plant.B = mat("B");
  c.plant.C = mat("C");
  c.plant.xi = mat("xi");
  c.plant.zeta = mat("zeta");
  c.plant.x0 = rd.vector(rd.required(j, path, "x0"), Reader::join(path, "x0"));
  c.plant.P0 = mat("P0");
  c.weights.F = mat("F");
  c.weights.Q = mat("Q");
  c.weights.R = mat("R");
  const long T = rd.integer(rd.required(j, path, "T"), Reader::join(path, "T"));
  if (T < 1 || T > 1000000) rd.fail(Reader::join(path, "T"), "horizon must be between 1 and 1e6");
  c.weights.T = static_cast<int>(T);
  if (j.contains("x_ref")) {
    c.weights.x_ref = rd.vector(j.at("x_ref"), Reader::join(path, "x_ref"));
  } else {
    c.weights.x_ref = Vector::Zero(c.plant.A.rows());
    log.push_back(Reader::join(path, "x_ref") + " defaulted to the origin");
  }

  const std::string gpath = Reader::join(path, "gate");
  const json& g = rd.required(j, path, "gate");
  rd.only_keys(g, gpath, {"epsilon", "channel_service"});
  c.gate.epsilon = rd.vector(rd.required(g, gpath, "epsilon"), Reader::join(gpath, "epsilon"));
  const json& cs = rd.required(g, gpath, "channel_service");
  const std::string cspath = Reader::join(gpath, "channel_service");
  if (!cs.is_array()) rd.fail(cspath, "expected an array of integers");
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const long s = rd.integer(cs[i], Reader::at(cspath, i));
    if (s < -1 || s > 7) rd.fail(Reader::at(cspath, i), "service index must be -1 or in [0,7]");
    c.gate.channel_service.push_back(static_cast<int>(s));
  }

  const std::string bpath = Reader::join(path, "bias");
  if (!j.contains("bias") || (j.at("bias").is_string() && j.at("bias") == "relative")) {
    if (!j.contains("bias")) log.push_back(bpath + " defaulted to gate-relative biases");
    c.bias = control::BiasPolicy::relative_to(c.gate);
  } else {
    const json& b = j.at("bias");
    if (!b.is_array()) rd.fail(bpath, "expected \"relative\" or an array of per-channel biases");
    for (std::size_t i = 0; i < b.size(); ++i) {
      const std::string p = Reader::at(bpath, i);
      rd.only_keys(b[i], p, {"attacker_low", "attacker_high", "defender_low", "defender_high"});
      control::ChannelBias cb;
      cb.attacker_low = rd.number(rd.required(b[i], p, "attacker_low"), Reader::join(p, "attacker_low"));
      cb.attacker_high = rd.number(rd.required(b[i], p, "attacker_high"), Reader::join(p, "attacker_high"));
      cb.defender_low = rd.number(rd.required(b[i], p, "defender_low"), Reader::join(p, "defender_low"));
      cb.defender_high = rd.number(rd.required(b[i], p, "defender_high"), Reader::join(p, "defender_high"));
      c.bias.channels.push_back(cb);
    }
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    rd.fail(path, e.what());
  }
  return c;
}

StrategyProfile read_profile(const Reader& rd, const json& j, const std::string& path,
                             std::size_t n) {
  rd.only_keys(j, path, {"name", "f_A", "f_D", "attacker_low", "defender_low", "trust_low",
                         "trust_high"});
  StrategyProfile p;
  const json& name = rd.required(j, path, "name");
  if (!name.is_string() || name.get<std::string>().empty()) {
    rd.fail(Reader::join(path, "name"), "expected a non-empty string");
  }
  p.name = name.get<std::string>();
  p.f_A = rd.vec(rd.required(j, path, "f_A"), Reader::join(path, "f_A"), n);
  p.f_D = rd.vec(rd.required(j, path, "f_D"), Reader::join(path, "f_D"), n);
  for (std::size_t i = 0; i < n; ++i) {
    if (p.f_A[i] < 0.0) rd.fail(Reader::at(Reader::join(path, "f_A"), i), "must be >= 0");
    if (p.f_D[i] < 0.0) rd.fail(Reader::at(Reader::join(path, "f_D"), i), "must be >= 0");
  }
  p.attacker_low = rd.probs(rd.required(j, path, "attacker_low"), Reader::join(path, "attacker_low"), n);
  p.defender_low = rd.probs(rd.required(j, path, "defender_low"), Reader::join(path, "defender_low"), n);
  p.trust_low = rd.probs(rd.required(j, path, "trust_low"), Reader::join(path, "trust_low"), n);
  p.trust_high = rd.probs(rd.required(j, path, "trust_high"), Reader::join(path, "trust_high"), n);
  return p;
}

// ---------------------------------------------------------------------------
// Writing

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json vector_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json sender_json(const signaling::SenderPayoff& p) {
  return {{"low_trust", p.low_trust},
          {"low_distrust", p.low_distrust},
          {"high_trust", p.high_trust},
          {"high_distrust", p.high_distrust}};
}

json receiver_payoff_json(const signaling::ServiceReceiverPayoff& p) {
  return {{"defender_low_trust", p.defender_low_trust},
          {"defender_low_distrust", p.defender_low_distrust},
          {"defender_high_trust", p.defender_high_trust},
          {"defender_high_distrust", p.defender_high_distrust},
          {"attacker_low_trust", p.attacker_low_trust},
          {"attacker_low_distrust", p.attacker_low_distrust},
          {"attacker_high_trust", p.attacker_high_trust},
          {"attacker_high_distrust", p.attacker_high_distrust}};
}

bool same(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

bool same(const Vector& a, const Vector& b) {
  return a.size() == b.size() && (a.size() == 0 || a == b);
}

bool same_setup(const control::ControlSetup& a, const control::ControlSetup& b) {
  const auto& p = a.plant;
  const auto& q = b.plant;
  if (!same(p.A, q.A) || !same(p.B, q.B) || !same(p.C, q.C) || !same(p.xi, q.xi) ||
      !same(p.zeta, q.zeta) || !same(p.x0, q.x0) || !same(p.P0, q.P0)) {
    return false;
  }
  const auto& w = a.weights;
  const auto& v = b.weights;
  if (!same(w.F, v.F) || !same(w.Q, v.Q) || !same(w.R, v.R) || w.T != v.T || !same(w.x_ref, v.x_ref)) {
    return false;
  }
  if (!same(a.gate.epsilon, b.gate.epsilon) || a.gate.channel_service != b.gate.channel_service) {
    return false;
  }
  if (a.bias.channels.size() != b.bias.channels.size()) return false;
  for (std::size_t i = 0; i < a.bias.channels.size(); ++i) {
    const auto& x = a.bias.channels[i];
    const auto& y = b.bias.channels[i];
    if (x.attacker_low != y.attacker_low || x.attacker_high != y.attacker_high ||
        x.defender_low != y.defender_low || x.defender_high != y.defender_high) {
      return false;
    }
  }
  return true;
}

bool same_profile(const std::optional<signaling::Profile>& a,
                  const std::optional<signaling::Profile>& b) {
  if (a.has_value() != b.has_value()) return false;
  if (!a) return true;
  return a->senders.low_given_attacker == b->senders.low_given_attacker &&
         a->senders.low_given_defender == b->senders.low_given_defender &&
         a->receiver.trust_low == b->receiver.trust_low &&
         a->receiver.trust_high == b->receiver.trust_high;
}

const char* source_name(ReceiverSource s) {
  switch (s) {
    case ReceiverSource::Additive:
      return "additive";
    case ReceiverSource::Dense:
      return "dense";
    case ReceiverSource::Estimate:
      return "estimate";
  }
  return "additive";
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

const StrategyProfile* Scenario::find_profile(const std::string& n) const {
  for (const auto& p : profiles) {
    if (p.name == n) return &p;
  }
  return nullptr;
}

void Scenario::validate() const {
  const std::size_t n = services;
  require(n >= 1 && n <= 8, "services must be between 1 and 8");
  require(alpha_A.size() == n, "flipit.alpha_A must have one entry per service");
  require(alpha_D.size() == n, "flipit.alpha_D must have one entry per service");
  for (std::size_t i = 0; i < n; ++i) {
    require(alpha_A[i] > 0.0 && std::isfinite(alpha_A[i]), "flipit.alpha_A entries must be > 0");
    require(alpha_D[i] > 0.0 && std::isfinite(alpha_D[i]), "flipit.alpha_D entries must be > 0");
  }
  require(initial_priors.size() == n, "initial.priors must have one entry per service");
  for (double p : initial_priors) require(p >= 0.0 && p <= 1.0, "initial.priors must lie in [0,1]");
  if (initial_profile) {
    require(initial_profile->senders.services() == n && initial_profile->receiver.services() == n,
            "initial strategies need one entry per service");
  }
  require(sender_tables.size() == n, "sender_tables must have one entry per service");

  switch (receiver_source) {
    case ReceiverSource::Additive:
      require(additive_receiver.size() == n, "receiver.services must have one entry per service");
      break;
    case ReceiverSource::Dense:
      require(dense_receiver.services() == n && dense_receiver.complete(),
              "receiver.values must cover all 8^N entries");
      break;
    case ReceiverSource::Estimate:
      require(control.has_value(), "receiver mode \"estimate\" needs a control section");
      break;
  }
  if (control) {
    control->validate();
    require(control->gate.services() == n,
            "control.gate.channel_service must reference exactly the scenario's services");
  }
  require(utility_map.v_max > utility_map.v_min, "utility_map.v_max must exceed v_min");
  require(utility_map.beta > 0.0, "utility_map.beta must be positive");
  require(monte_carlo.episodes >= 1, "monte_carlo.episodes must be >= 1");
  require(monte_carlo.J_max > 0.0, "monte_carlo.J_max must be positive");
  require(solver.delta_p > 0.0 && solver.eps_eq > 0.0 && solver.cycle_tol > 0.0 &&
              solver.mixed_tol > 0.0 && solver.min_frequency > 0.0,
          "solver tolerances must be positive");
  require(solver.max_rounds >= 1 && solver.max_iters >= 1 && solver.max_period >= 2,
          "solver iteration limits are too small");
  require(solver.off_path_belief >= 0.0 && solver.off_path_belief <= 1.0,
          "solver.off_path_belief must lie in [0,1]");

  std::set<std::string> names;
  for (const auto& p : profiles) {
    require(names.insert(p.name).second, "profiles contain the name \"" + p.name + "\" twice");
    require(p.f_A.size() == n && p.f_D.size() == n && p.attacker_low.size() == n &&
                p.defender_low.size() == n && p.trust_low.size() == n && p.trust_high.size() == n,
            "profiles entry \"" + p.name + "\" needs one value per service in every vector");
  }

  // Explicit tables must satisfy the modelling assumptions up front.
  signaling::UtilityTables t;
  t.senders = sender_tables;
  if (receiver_source == ReceiverSource::Additive) {
    t.receiver = signaling::additive_receiver_table(additive_receiver);
  } else if (receiver_source == ReceiverSource::Dense) {
    t.receiver = dense_receiver;
  }
  if (receiver_source != ReceiverSource::Estimate) {
    for (const auto& c : signaling::validate_assumptions(t).checks) {
      require(c.passed, "receiver and sender_tables violate assumption " + c.name + ": " + c.detail);
    }
  } else {
    // Receiver side is checked once estimated; the sender side can be checked now.
    for (std::size_t i = 0; i < n; ++i) {
      const auto& s = sender_tables[i];
      require(s.attacker.low_distrust == 0.0 && s.attacker.high_distrust == 0.0 &&
                  s.defender.low_distrust == 0.0 && s.defender.high_distrust == 0.0,
              "sender_tables[" + std::to_string(i) + "] must pay zero when not trusted");
      require(0.0 < s.attacker.low_trust && s.attacker.low_trust < s.defender.high_trust &&
                  s.defender.high_trust < s.defender.low_trust &&
                  s.defender.low_trust < s.attacker.high_trust,
              "sender_tables[" + std::to_string(i) + "] violates the payoff ordering");
    }
  }
}

bool operator==(const Scenario& a, const Scenario& b) {
  if (a.name != b.name || a.services != b.services || a.alpha_A != b.alpha_A ||
      a.alpha_D != b.alpha_D || a.initial_priors != b.initial_priors ||
      !same_profile(a.initial_profile, b.initial_profile) || a.sender_tables != b.sender_tables ||
      a.receiver_source != b.receiver_source || a.additive_receiver != b.additive_receiver ||
      !(a.dense_receiver == b.dense_receiver) || a.control.has_value() != b.control.has_value() ||
      a.utility_map.v_max != b.utility_map.v_max || a.utility_map.v_min != b.utility_map.v_min ||
      a.utility_map.beta != b.utility_map.beta || !(a.monte_carlo == b.monte_carlo) ||
      !(a.solver == b.solver) || a.profiles != b.profiles) {
    return false;
  }
  return !a.control || same_setup(*a.control, *b.control);
}

Scenario parse_scenario(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const long line = 1 + static_cast<long>(std::count(text.begin(), text.begin() + static_cast<long>(byte), '\n'));
    throw ParseError(source + ":" + std::to_string(line) + ": malformed JSON: " + e.what(), "", line);
  }

  const Reader rd(text, source);
  rd.only_keys(doc, "", {"name", "services", "flipit", "initial", "sender_tables", "receiver",
                         "control", "utility_map", "monte_carlo", "solver", "profiles"});
  Scenario s;
  std::vector<std::string>& log = s.defaults_applied;

  if (doc.contains("name")) {
    if (!doc["name"].is_string()) rd.fail("name", "expected a string");
    s.name = doc["name"].get<std::string>();
  } else {
    s.name = "scenario";
    log.push_back("name defaulted to \"scenario\"");
  }
  const long n_raw = rd.integer(rd.required(doc, "", "services"), "services");
  if (n_raw < 1 || n_raw > 8) rd.fail("services", "must be between 1 and 8");
  const auto n = static_cast<std::size_t>(n_raw);
  s.services = n;

  const json& fl = rd.required(doc, "", "flipit");
  rd.only_keys(fl, "flipit", {"alpha_A", "alpha_D"});
  s.alpha_A = rd.positive(rd.required(fl, "flipit", "alpha_A"), "flipit.alpha_A", n);
  s.alpha_D = rd.positive(rd.required(fl, "flipit", "alpha_D"), "flipit.alpha_D", n);

  const json& in = rd.required(doc, "", "initial");
  rd.only_keys(in, "initial", {"priors", "attacker_low", "defender_low", "trust_low", "trust_high"});
  s.initial_priors = rd.probs(rd.required(in, "initial", "priors"), "initial.priors", n);
  const bool any_strategy = in.contains("attacker_low") || in.contains("defender_low") ||
                            in.contains("trust_low") || in.contains("trust_high");
  if (any_strategy) {
    signaling::Profile p;
    p.senders.low_given_attacker = rd.probs(rd.required(in, "initial", "attacker_low"), "initial.attacker_low", n);
    p.senders.low_given_defender = rd.probs(rd.required(in, "initial", "defender_low"), "initial.defender_low", n);
    p.receiver.trust_low = rd.probs(rd.required(in, "initial", "trust_low"), "initial.trust_low", n);
    p.receiver.trust_high = rd.probs(rd.required(in, "initial", "trust_high"), "initial.trust_high", n);
    s.initial_profile = p;
  } else {
    log.push_back("initial strategies defaulted to the solver's start (senders 0.5, full trust)");
  }

  if (!doc.contains("sender_tables") ||
      (doc["sender_tables"].is_string() && doc["sender_tables"] == "default")) {
    if (!doc.contains("sender_tables")) log.push_back("sender_tables defaulted to (2, 3, 4, 6)");
    s.sender_tables.assign(n, signaling::default_sender_tables());
  } else {
    const json& st = doc["sender_tables"];
    if (!st.is_array() || st.size() != n) {
      rd.fail("sender_tables", "expected \"default\" or one entry per service");
    }
    for (std::size_t i = 0; i < n; ++i) {
      const std::string p = Reader::at("sender_tables", i);
      rd.only_keys(st[i], p, {"attacker", "defender"});
      signaling::ServiceSenderTables t;
      t.attacker = read_sender_payoff(rd, rd.required(st[i], p, "attacker"), Reader::join(p, "attacker"));
      t.defender = read_sender_payoff(rd, rd.required(st[i], p, "defender"), Reader::join(p, "defender"));
      s.sender_tables.push_back(t);
    }
  }

  const json& rc = rd.required(doc, "", "receiver");
  rd.only_keys(rc, "receiver", {"mode", "services", "values"});
  const json& mode = rd.required(rc, "receiver", "mode");
  if (!mode.is_string()) rd.fail("receiver.mode", "expected a string");
  const std::string m = mode.get<std::string>();
  if (m == "additive") {
    s.receiver_source = ReceiverSource::Additive;
    const json& per = rd.required(rc, "receiver", "services");
    if (!per.is_array() || per.size() != n) rd.fail("receiver.services", "expected one entry per service");
    for (std::size_t i = 0; i < n; ++i) {
      s.additive_receiver.push_back(read_receiver_payoff(rd, per[i], Reader::at("receiver.services", i)));
    }
  } else if (m == "dense") {
    s.receiver_source = ReceiverSource::Dense;
    s.dense_receiver = signaling::ReceiverUtilityTable(n);
    const std::vector<double> v =
        rd.vec(rd.required(rc, "receiver", "values"), "receiver.values", s.dense_receiver.size());
    s.dense_receiver.raw() = v;
  } else if (m == "estimate") {
    s.receiver_source = ReceiverSource::Estimate;
  } else {
    rd.fail("receiver.mode", "expected \"additive\", \"dense\" or \"estimate\"");
  }

  if (doc.contains("control")) s.control = read_control(rd, doc["control"], "control", log);

  const json empty = json::object();
  const json& um = doc.contains("utility_map") ? doc["utility_map"] : empty;
  rd.only_keys(um, "utility_map", {"v_max", "v_min", "beta"});
  const auto num = [&rd](const json& j, const std::string& p) { return rd.number(j, p); };
  const auto intg = [&rd](const json& j, const std::string& p) { return rd.integer(j, p); };
  s.utility_map.v_max = optional_field(um, "utility_map", "v_max", 1.0, log, num);
  s.utility_map.v_min = optional_field(um, "utility_map", "v_min", 0.0, log, num);
  s.utility_map.beta = optional_field(um, "utility_map", "beta", 1e-3, log, num);
  if (!(s.utility_map.v_max > s.utility_map.v_min)) rd.fail("utility_map.v_max", "must exceed v_min");
  if (!(s.utility_map.beta > 0.0)) rd.fail("utility_map.beta", "must be > 0");

  const json& mc = doc.contains("monte_carlo") ? doc["monte_carlo"] : empty;
  rd.only_keys(mc, "monte_carlo", {"episodes", "seed", "J_max"});
  s.monte_carlo.episodes = static_cast<int>(optional_field(mc, "monte_carlo", "episodes", 100L, log, intg));
  if (s.monte_carlo.episodes < 1) rd.fail("monte_carlo.episodes", "must be >= 1");
  if (mc.contains("seed")) {
    if (!mc["seed"].is_number_unsigned() && !(mc["seed"].is_number_integer() && mc["seed"].get<long>() >= 0)) {
      rd.fail("monte_carlo.seed", "expected a non-negative integer");
    }
    s.monte_carlo.seed = mc["seed"].get<std::uint64_t>();
  } else {
    log.push_back("monte_carlo.seed defaulted to 1");
  }
  s.monte_carlo.J_max = optional_field(mc, "monte_carlo", "J_max", 1e9, log, num);
  if (!(s.monte_carlo.J_max > 0.0)) rd.fail("monte_carlo.J_max", "must be > 0");

  const json& so = doc.contains("solver") ? doc["solver"] : empty;
  rd.only_keys(so, "solver", {"delta_p", "max_rounds", "eps_eq", "max_iters", "off_path_belief",
                              "min_frequency", "max_period", "cycle_tol", "mixed_tol"});
  SolverSettings& sv = s.solver;
  sv.delta_p = optional_field(so, "solver", "delta_p", sv.delta_p, log, num);
  sv.max_rounds = static_cast<int>(optional_field(so, "solver", "max_rounds", 100L, log, intg));
  sv.eps_eq = optional_field(so, "solver", "eps_eq", sv.eps_eq, log, num);
  sv.max_iters = static_cast<int>(optional_field(so, "solver", "max_iters", 500L, log, intg));
  sv.off_path_belief = optional_field(so, "solver", "off_path_belief", sv.off_path_belief, log, num);
  sv.min_frequency = optional_field(so, "solver", "min_frequency", sv.min_frequency, log, num);
  sv.max_period = static_cast<int>(optional_field(so, "solver", "max_period", 4L, log, intg));
  sv.cycle_tol = optional_field(so, "solver", "cycle_tol", sv.cycle_tol, log, num);
  sv.mixed_tol = optional_field(so, "solver", "mixed_tol", sv.mixed_tol, log, num);

  if (doc.contains("profiles")) {
    const json& pr = doc["profiles"];
    if (!pr.is_array()) rd.fail("profiles", "expected an array");
    for (std::size_t i = 0; i < pr.size(); ++i) {
      s.profiles.push_back(read_profile(rd, pr[i], Reader::at("profiles", i), n));
    }
  }

  try {
    s.validate();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    // Validation messages start with the field they concern.
    const std::string field = what.substr(0, what.find_first_of(" "));
    rd.fail(field, what);
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open scenario file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

std::string write_scenario(const Scenario& s) {
  json doc;
  doc["name"] = s.name;
  doc["services"] = s.services;
  doc["flipit"] = {{"alpha_A", s.alpha_A}, {"alpha_D", s.alpha_D}};
  json init = {{"priors", s.initial_priors}};
  if (s.initial_profile) {
    init["attacker_low"] = s.initial_profile->senders.low_given_attacker;
    init["defender_low"] = s.initial_profile->senders.low_given_defender;
    init["trust_low"] = s.initial_profile->receiver.trust_low;
    init["trust_high"] = s.initial_profile->receiver.trust_high;
  }
  doc["initial"] = init;
  json st = json::array();
  for (const auto& t : s.sender_tables) {
    st.push_back({{"attacker", sender_json(t.attacker)}, {"defender", sender_json(t.defender)}});
  }
  doc["sender_tables"] = st;

  json rc = {{"mode", source_name(s.receiver_source)}};
  if (s.receiver_source == ReceiverSource::Additive) {
    json per = json::array();
    for (const auto& p : s.additive_receiver) per.push_back(receiver_payoff_json(p));
    rc["services"] = per;
  } else if (s.receiver_source == ReceiverSource::Dense) {
    rc["values"] = s.dense_receiver.raw();
  }
  doc["receiver"] = rc;

  if (s.control) {
    const auto& c = *s.control;
    json cj;
    cj["A"] = matrix_json(c.plant.A);
    cj["B"] = matrix_json(c.plant.B);
    cj["C"] = matrix_json(c.plant.C);
    cj["xi"] = matrix_json(c.plant.xi);
    cj["zeta"] = matrix_json(c.plant.zeta);
    cj["x0"] = vector_json(c.plant.x0);
    cj["P0"] = matrix_json(c.plant.P0);
    cj["F"] = matrix_json(c.weights.F);
    cj["Q"] = matrix_json(c.weights.Q);
    cj["R"] = matrix_json(c.weights.R);
    cj["T"] = c.weights.T;
    cj["x_ref"] = vector_json(c.weights.x_ref);
    cj["gate"] = {{"epsilon", vector_json(c.gate.epsilon)}, {"channel_service", c.gate.channel_service}};
    json bias = json::array();
    for (const auto& b : c.bias.channels) {
      bias.push_back({{"attacker_low", b.attacker_low},
                      {"attacker_high", b.attacker_high},
                      {"defender_low", b.defender_low},
                      {"defender_high", b.defender_high}});
    }
    cj["bias"] = bias;
    doc["control"] = cj;
  }
  doc["utility_map"] = {{"v_max", s.utility_map.v_max}, {"v_min", s.utility_map.v_min},
                        {"beta", s.utility_map.beta}};
  doc["monte_carlo"] = {{"episodes", s.monte_carlo.episodes}, {"seed", s.monte_carlo.seed},
                        {"J_max", s.monte_carlo.J_max}};
  const SolverSettings& sv = s.solver;
  doc["solver"] = {{"delta_p", sv.delta_p},         {"max_rounds", sv.max_rounds},
                   {"eps_eq", sv.eps_eq},           {"max_iters", sv.max_iters},
                   {"off_path_belief", sv.off_path_belief}, {"min_frequency", sv.min_frequency},
                   {"max_period", sv.max_period},   {"cycle_tol", sv.cycle_tol},
                   {"mixed_tol", sv.mixed_tol}};
  json profiles = json::array();
  for (const auto& p : s.profiles) {
    profiles.push_back({{"name", p.name},
                        {"f_A", p.f_A},
                        {"f_D", p.f_D},
                        {"attacker_low", p.attacker_low},
                        {"defender_low", p.defender_low},
                        {"trust_low", p.trust_low},
                        {"trust_high", p.trust_high}});
  }
  doc["profiles"] = profiles;
  return doc.dump(2) + "\n";
}

std::string scenario_hash(const Scenario& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : write_scenario(s)) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Scenario four_service_example() {
  Scenario s;
  s.name = "four-service";
  s.services = 4;
  s.alpha_A = {2.0, 0.8, 10.0, 12.0};
  s.alpha_D = {0.2, 0.1, 0.05, 0.03};
  s.initial_priors = {0.2, 0.4, 0.6, 0.15};
  s.initial_profile = signaling::Profile{{{0.2, 0.3, 0.1, 0.4}, {0.9, 0.8, 0.95, 0.97}},
                                         signaling::ReceiverStrategy::trust_all(4)};
  s.sender_tables.assign(4, signaling::default_sender_tables());
  s.receiver_source = ReceiverSource::Additive;
  // Services 3 and 4 are critical: a trusted attacker costs 99 times what a
  // trusted defender earns, which puts their trust threshold at 0.01.
  for (std::size_t i = 0; i < 4; ++i) {
    const double loss = i < 2 ? 9.0 : 99.0;
    signaling::ServiceReceiverPayoff p;
    p.defender_low_trust = 1.0;
    p.defender_high_trust = 0.5;
    p.attacker_low_trust = -loss;
    p.attacker_high_trust = -2.0 * loss;
    s.additive_receiver.push_back(p);
  }
  return s;
}

Scenario vehicle_scenario_default() {
  Scenario s;
  s.name = "two-vehicles";
  s.services = 2;
  s.alpha_A = {2.0, 2.5};
  s.alpha_D = {0.2, 0.3};
  s.initial_priors = {0.025, 0.03};
  s.sender_tables.assign(2, signaling::default_sender_tables());
  s.receiver_source = ReceiverSource::Estimate;

  control::ControlSetup c;
  Matrix A(4, 4);
  A << 1, 1, 0, 0,  //
      0, 1, 0, 0,   //
      0, 0, 1, 1,   //
      0, 0, 0, 1;
  Matrix B(4, 2);
  B << 0.5, 0,  //
      1, 0,     //
      0, 0.5,   //
      0, 1;
  // Channels: GPS x1, GPS x3, compass x2, compass x4, camera x1, range finder x3.
  Matrix C = Matrix::Zero(6, 4);
  C(0, 0) = 1;
  C(1, 2) = 1;
  C(2, 1) = 1;
  C(3, 3) = 1;
  C(4, 0) = 1;
  C(5, 2) = 1;
  c.plant.A = A;
  c.plant.B = B;
  c.plant.C = C;
  c.plant.xi = 0.01 * Matrix::Identity(4, 4);
  // The local camera and range finder are coarser than GPS; otherwise ignoring
  // GPS would cost almost nothing and the trust threshold collapses.
  Vector zeta(6);
  zeta << 0.04, 0.04, 0.04, 0.04, 1.0, 1.0;
  c.plant.zeta = zeta.asDiagonal();
  c.plant.x0 = Vector::Zero(4);
  c.plant.x0 << 0, 0, 4, 0;
  c.plant.P0 = Matrix::Identity(4, 4);
  c.weights.F = Matrix::Identity(4, 4);
  c.weights.Q = Matrix::Identity(4, 4);
  c.weights.R = Matrix::Identity(2, 2);
  c.weights.T = 50;
  c.weights.x_ref = Vector::Zero(4);
  c.weights.x_ref << 4, 0, 8, 0;
  c.gate.epsilon = Vector::Constant(6, 10.0);
  c.gate.channel_service = {0, 1, -1, -1, -1, -1};
  c.bias = control::BiasPolicy::relative_to(c.gate);
  s.control = c;

  s.utility_map = {1.0, 0.0, 1e-3};
  s.monte_carlo = {100, 1, 1e9};

  const auto profile = [](std::string name, std::vector<double> fA, std::vector<double> fD,
                          double attacker_low, std::vector<double> q, std::vector<double> r) {
    return StrategyProfile{std::move(name), std::move(fA), std::move(fD), {attacker_low, attacker_low},
                           {1.0, 1.0}, std::move(q), std::move(r)};
  };
  s.profiles = {
      profile("ungated-mH", {0.05, 0.05}, {0.1, 0.1}, 0.0, {1, 1}, {1, 1}),
      profile("gated-mH", {0.05, 0.05}, {0.1, 0.1}, 0.0, {1, 1}, {0, 0}),
      profile("trusted-mL", {0.05, 0.05}, {0.1, 0.1}, 1.0, {1, 1}, {0, 0}),
      profile("trusted-frequent-mL", {0.5, 0.5}, {0.1, 0.1}, 1.0, {1, 1}, {0, 0}),
      profile("untrusted-mL", {0.5, 0.5}, {0.1, 0.1}, 1.0, {0, 0}, {0, 0}),
      profile("mixed", {0.05, 0.5}, {0.1, 0.1}, 1.0, {1, 0.5}, {0, 0}),
  };
  return s;
}

}  // namespace cloudtrust
