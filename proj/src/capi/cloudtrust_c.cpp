#include <cloudtrust/cloudtrust.h>

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "errors.hpp"
#include "flipit.hpp"
#include "harness.hpp"
#include "scenario.hpp"

struct ct_scenario {
  cloudtrust::Scenario value;
};

struct ct_gne_result {
  cloudtrust::harness::GneRun run;
};

struct ct_trace {
  cloudtrust::control::SimTrace trace;
  std::string header;
};

namespace {

thread_local std::string last_error;

ct_status fail(ct_status code, const std::string& what) {
  last_error = what;
  return code;
}

// Maps the core exception hierarchy onto status codes. Order matters:
// ParseError and NumericError derive from runtime_error like ConfigError.
template <class F>
ct_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return CT_OK;
  } catch (const cloudtrust::ParseError& e) {
    return fail(CT_ERR_PARSE, e.what());
  } catch (const cloudtrust::NumericError& e) {
    return fail(CT_ERR_NUMERIC, e.what());
  } catch (const cloudtrust::ConfigError& e) {
    return fail(CT_ERR_CONFIG, e.what());
  } catch (const cloudtrust::DomainError& e) {
    return fail(CT_ERR_DOMAIN, e.what());
  } catch (const cloudtrust::InternalError& e) {
    return fail(CT_ERR_INTERNAL, e.what());
  } catch (const std::bad_alloc&) {
    return fail(CT_ERR_OUT_OF_MEMORY, "out of memory");
  } catch (const std::exception& e) {
    return fail(CT_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(CT_ERR_INTERNAL, "unknown exception");
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

#define CT_REQUIRE(ptr) \
  if (!(ptr)) return fail(CT_ERR_NULL_ARGUMENT, #ptr " is null")

extern "C" {

const char* ct_version(void) { return "0.1.0"; }

const char* ct_last_error(void) { return last_error.c_str(); }

void ct_string_free(char* s) { std::free(s); }

ct_status ct_scenario_load(const char* path, ct_scenario** out) {
  CT_REQUIRE(path);
  CT_REQUIRE(out);
  return guarded([&] { *out = new ct_scenario{cloudtrust::load_scenario(path)}; });
}

ct_status ct_scenario_parse(const char* json_text, ct_scenario** out) {
  CT_REQUIRE(json_text);
  CT_REQUIRE(out);
  return guarded([&] { *out = new ct_scenario{cloudtrust::parse_scenario(json_text)}; });
}

ct_status ct_scenario_builtin(const char* name, ct_scenario** out) {
  CT_REQUIRE(name);
  CT_REQUIRE(out);
  const std::string n = name;
  if (n == "fourservice") {
    return guarded([&] { *out = new ct_scenario{cloudtrust::four_service_example()}; });
  }
  if (n == "vehicles") {
    return guarded([&] { *out = new ct_scenario{cloudtrust::vehicle_scenario_default()}; });
  }
  return fail(CT_ERR_NOT_FOUND, "unknown builtin scenario \"" + n + "\" (fourservice, vehicles)");
}

ct_status ct_scenario_to_json(const ct_scenario* s, char** out) {
  CT_REQUIRE(s);
  CT_REQUIRE(out);
  return guarded([&] { *out = copy_string(cloudtrust::write_scenario(s->value)); });
}

ct_status ct_scenario_hash(const ct_scenario* s, char** out) {
  CT_REQUIRE(s);
  CT_REQUIRE(out);
  return guarded([&] { *out = copy_string(cloudtrust::scenario_hash(s->value)); });
}

ct_status ct_scenario_defaults_log(const ct_scenario* s, char** out) {
  CT_REQUIRE(s);
  CT_REQUIRE(out);
  return guarded([&] {
    std::string text;
    for (const auto& d : s->value.defaults_applied) text += d + "\n";
    *out = copy_string(text);
  });
}

ct_status ct_scenario_validate(const ct_scenario* s, char** report, int* ok) {
  CT_REQUIRE(s);
  CT_REQUIRE(report);
  CT_REQUIRE(ok);
  return guarded([&] {
    const auto rep = cloudtrust::harness::validate_scenario(s->value);
    *report = copy_string(rep.to_text());
    *ok = rep.ok() ? 1 : 0;
  });
}

void ct_scenario_free(ct_scenario* s) { delete s; }

ct_status ct_gne_solve(const ct_scenario* s, ct_gne_result** out) {
  CT_REQUIRE(s);
  CT_REQUIRE(out);
  return guarded([&] { *out = new ct_gne_result{cloudtrust::harness::run_gne(s->value)}; });
}

ct_status ct_gne_result_status(const ct_gne_result* r, ct_gne_status* out) {
  CT_REQUIRE(r);
  CT_REQUIRE(out);
  switch (r->run.result.status) {
    case cloudtrust::gne::GneStatus::Converged:
      *out = CT_GNE_CONVERGED;
      break;
    case cloudtrust::gne::GneStatus::LimitCycleResolved:
      *out = CT_GNE_LIMIT_CYCLE_RESOLVED;
      break;
    case cloudtrust::gne::GneStatus::Failed:
      *out = CT_GNE_FAILED;
      break;
  }
  return CT_OK;
}

ct_status ct_gne_result_compromise(const ct_gne_result* r, size_t service, double* p_A) {
  CT_REQUIRE(r);
  CT_REQUIRE(p_A);
  const auto& p = r->run.result.p_A;
  if (service >= p.size()) {
    return fail(CT_ERR_DOMAIN, "service index " + std::to_string(service) + " out of range");
  }
  *p_A = p[service];
  return CT_OK;
}

ct_status ct_gne_to_json(const ct_gne_result* r, char** out) {
  CT_REQUIRE(r);
  CT_REQUIRE(out);
  return guarded([&] { *out = copy_string(cloudtrust::harness::gne_report_json(r->run)); });
}

void ct_gne_free(ct_gne_result* r) { delete r; }

ct_status ct_simulate(const ct_scenario* s, const char* profile, uint64_t seed, ct_trace** out) {
  CT_REQUIRE(s);
  CT_REQUIRE(profile);
  CT_REQUIRE(out);
  const cloudtrust::StrategyProfile* p = s->value.find_profile(profile);
  if (!p) {
    std::string names;
    for (const auto& q : s->value.profiles) names += (names.empty() ? "" : ", ") + q.name;
    return fail(CT_ERR_NOT_FOUND,
                std::string("unknown profile \"") + profile + "\" (available: " + names + ")");
  }
  return guarded([&] {
    *out = new ct_trace{cloudtrust::harness::simulate_profile(s->value, *p, seed),
                        cloudtrust::harness::header_comment(s->value, seed) + " profile=" + p->name};
  });
}

ct_status ct_trace_to_csv(const ct_trace* t, char** out) {
  CT_REQUIRE(t);
  CT_REQUIRE(out);
  return guarded([&] { *out = copy_string(t->trace.to_csv(t->header)); });
}

ct_status ct_trace_cost(const ct_trace* t, double* J) {
  CT_REQUIRE(t);
  CT_REQUIRE(J);
  *J = t->trace.J;
  return CT_OK;
}

void ct_trace_free(ct_trace* t) { delete t; }

ct_status ct_bench(const ct_scenario* s, int trials, uint64_t seed, char** csv) {
  CT_REQUIRE(s);
  CT_REQUIRE(csv);
  return guarded([&] {
    const auto table = cloudtrust::harness::bench(s->value, trials, seed);
    *csv = copy_string(table.to_csv(cloudtrust::harness::header_comment(s->value, seed) +
                                    " trials=" + std::to_string(trials)));
  });
}

ct_status ct_flipit_control_ratio(double f_A, double f_D, double* out) {
  CT_REQUIRE(out);
  return guarded([&] { *out = cloudtrust::flipit::control_ratio(f_A, f_D); });
}

ct_status ct_flipit_solve(double v_A, double v_D, double alpha_A, double alpha_D,
                          ct_flipit_equilibrium* out) {
  CT_REQUIRE(out);
  return guarded([&] {
    const auto eq = cloudtrust::flipit::solve_flipit_ne({v_A, v_D, alpha_A, alpha_D});
    *out = ct_flipit_equilibrium{eq.f_A, eq.f_D, eq.p_A, eq.u_A, eq.u_D};
  });
}

ct_status ct_flipit_map(double v_AD, double alpha_A, double alpha_D, double* p_A) {
  CT_REQUIRE(p_A);
  return guarded([&] { *p_A = cloudtrust::flipit::flipit_map(v_AD, alpha_A, alpha_D); });
}

}  // extern "C"
