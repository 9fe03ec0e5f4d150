#include "surfns/surfns.h"

#include "surfns/cli_io.hpp"

#include <cstdlib>
#include <cstring>
#include <new>
#include <sstream>

struct surfns_config {
  surfns::RunConfig config;
};

struct surfns_sim {
  surfns::RunConfig config;
  surfns::TimeStepper stepper;
  surfns::SimulationState state;
  long total = 0;
};

namespace {

using namespace surfns;

thread_local std::string last_error;

surfns_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::argument: return SURFNS_ERR_ARGUMENT;
    case ErrorKind::structural: return SURFNS_ERR_STRUCTURAL;
    case ErrorKind::degenerate_element: return SURFNS_ERR_DEGENERATE_ELEMENT;
    case ErrorKind::singular_mass: return SURFNS_ERR_SINGULAR_MASS;
    case ErrorKind::solver_setup: return SURFNS_ERR_SOLVER_SETUP;
    case ErrorKind::iterative_failure: return SURFNS_ERR_ITERATIVE_FAILURE;
    case ErrorKind::singular_matrix: return SURFNS_ERR_SINGULAR_MATRIX;
    case ErrorKind::size_cap: return SURFNS_ERR_SIZE_CAP;
    case ErrorKind::usage: return SURFNS_ERR_USAGE;
    case ErrorKind::parse: return SURFNS_ERR_PARSE;
    case ErrorKind::validation: return SURFNS_ERR_VALIDATION;
    case ErrorKind::io: return SURFNS_ERR_IO;
  }
  return SURFNS_ERR_INTERNAL;
}

template <class F>
surfns_status guarded(F&& body) {
  last_error.clear();
  try {
    body();
    return SURFNS_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  return SURFNS_ERR_INTERNAL;
}

void require_ptr(const void* p, const char* what) {
  require(p != nullptr, ErrorKind::argument, std::string(what) + " is NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

surfns_diagnostics to_c(const Diagnostics& d) {
  return {d.step,         d.t,          d.area,           d.volume,
          d.kinetic,      d.bending,    d.total,          d.div_residual,
          d.solver_iters, d.solver_seconds, d.certificate};
}

TimeStepper::StepCallback wrap(surfns_step_callback cb, void* user) {
  if (!cb) return {};
  return [cb, user](const SimulationState& s) {
    if (s.history.empty()) return;
    const surfns_diagnostics d = to_c(s.history.back());
    cb(&d, user);
  };
}

void copy_vector(const Vector& v, double* out, std::size_t capacity) {
  require_ptr(out, "output buffer");
  require(capacity >= static_cast<std::size_t>(v.size()), ErrorKind::argument,
          "output buffer holds " + std::to_string(capacity) + " doubles, need " +
              std::to_string(v.size()));
  std::memcpy(out, v.data(), sizeof(double) * v.size());
}

}  // namespace

extern "C" {

const char* surfns_version(void) { return "0.1.0"; }

const char* surfns_status_name(surfns_status status) {
  switch (status) {
    case SURFNS_OK: return "ok";
    case SURFNS_ERR_ARGUMENT: return "argument";
    case SURFNS_ERR_STRUCTURAL: return "structural";
    case SURFNS_ERR_DEGENERATE_ELEMENT: return "degenerate_element";
    case SURFNS_ERR_SINGULAR_MASS: return "singular_mass";
    case SURFNS_ERR_SOLVER_SETUP: return "solver_setup";
    case SURFNS_ERR_ITERATIVE_FAILURE: return "iterative_failure";
    case SURFNS_ERR_SINGULAR_MATRIX: return "singular_matrix";
    case SURFNS_ERR_SIZE_CAP: return "size_cap";
    case SURFNS_ERR_USAGE: return "usage";
    case SURFNS_ERR_PARSE: return "parse";
    case SURFNS_ERR_VALIDATION: return "validation";
    case SURFNS_ERR_IO: return "io";
    case SURFNS_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* surfns_last_error(void) { return last_error.c_str(); }

int surfns_exit_code(surfns_status status) {
  switch (status) {
    case SURFNS_OK: return 0;
    case SURFNS_ERR_USAGE:
    case SURFNS_ERR_PARSE:
    case SURFNS_ERR_VALIDATION: return 2;
    default: return 1;
  }
}

void surfns_string_free(char* s) { std::free(s); }

surfns_status surfns_config_default(surfns_config** out) {
  return guarded([&] {
    require_ptr(out, "out");
    *out = new surfns_config{};
  });
}

surfns_status surfns_config_parse(const char* text, surfns_config** out) {
  return guarded([&] {
    require_ptr(text, "text");
    require_ptr(out, "out");
    *out = nullptr;
    *out = new surfns_config{parse_config(text)};
  });
}

surfns_status surfns_config_load(const char* path, surfns_config** out) {
  return guarded([&] {
    require_ptr(path, "path");
    require_ptr(out, "out");
    *out = nullptr;
    *out = new surfns_config{load_config(path)};
  });
}

surfns_status surfns_config_serialize(const surfns_config* config, char** out) {
  return guarded([&] {
    require_ptr(config, "config");
    require_ptr(out, "out");
    *out = dup_string(serialize_config(config->config));
  });
}

surfns_status surfns_config_set_output(surfns_config* config, const char* directory) {
  return guarded([&] {
    require_ptr(config, "config");
    require_ptr(directory, "directory");
    RunConfig c = config->config;
    c.output.directory = directory;
    c.validate();
    config->config = std::move(c);
  });
}

void surfns_config_free(surfns_config* config) { delete config; }

surfns_status surfns_sim_create(const surfns_config* config, surfns_sim** out) {
  return guarded([&] {
    require_ptr(config, "config");
    require_ptr(out, "out");
    *out = nullptr;
    const RunConfig& c = config->config;
    c.validate();
    const SchemeParams params = scheme_params(c);
    TimeStepper stepper(params, stepper_options(c));
    SimulationState state = stepper.initialize(build_mesh(c.mesh), initial_velocity(c));
    const long total = step_count(params);
    *out = new surfns_sim{c, std::move(stepper), std::move(state), total};
  });
}

surfns_status surfns_sim_resume(const surfns_config* config, const char* state_path,
                                surfns_sim** out) {
  return guarded([&] {
    require_ptr(config, "config");
    require_ptr(state_path, "state_path");
    require_ptr(out, "out");
    *out = nullptr;
    const RunConfig& c = config->config;
    c.validate();
    const SchemeParams params = scheme_params(c);
    SimulationState state = load_state(state_path);
    require(state.tau == params.tau, ErrorKind::validation,
            "time.tau: differs from the resumed state's tau");
    const long total = step_count(params);
    require(state.step <= total, ErrorKind::validation,
            "time.final_time: the resumed state is already past it");
    *out = new surfns_sim{c, TimeStepper(params, stepper_options(c)), std::move(state), total};
  });
}

surfns_status surfns_sim_step(surfns_sim* sim) {
  return guarded([&] {
    require_ptr(sim, "sim");
    sim->stepper.step(sim->state);
  });
}

surfns_status surfns_sim_run(surfns_sim* sim, surfns_step_callback cb, void* user) {
  return guarded([&] {
    require_ptr(sim, "sim");
    sim->stepper.run(sim->state, wrap(cb, user));
  });
}

surfns_status surfns_sim_total_steps(const surfns_sim* sim, long* out) {
  return guarded([&] {
    require_ptr(sim, "sim");
    require_ptr(out, "out");
    *out = sim->total;
  });
}

surfns_status surfns_sim_diagnostics(const surfns_sim* sim, surfns_diagnostics* out) {
  return guarded([&] {
    require_ptr(sim, "sim");
    require_ptr(out, "out");
    require(!sim->state.history.empty(), ErrorKind::usage, "no diagnostics recorded");
    *out = to_c(sim->state.history.back());
  });
}

surfns_status surfns_sim_node_count(const surfns_sim* sim, size_t* out) {
  return guarded([&] {
    require_ptr(sim, "sim");
    require_ptr(out, "out");
    *out = static_cast<size_t>(sim->state.mesh.num_nodes());
  });
}

surfns_status surfns_sim_nodes(const surfns_sim* sim, double* xyz, size_t capacity) {
  return guarded([&] {
    require_ptr(sim, "sim");
    copy_vector(NodeField::coordinates(sim->state.mesh).coeffs, xyz, capacity);
  });
}

surfns_status surfns_sim_velocity(const surfns_sim* sim, double* uvw, size_t capacity) {
  return guarded([&] {
    require_ptr(sim, "sim");
    copy_vector(sim->state.U.coeffs, uvw, capacity);
  });
}

surfns_status surfns_sim_write_vtk(const surfns_sim* sim, const char* path) {
  return guarded([&] {
    require_ptr(sim, "sim");
    require_ptr(path, "path");
    write_vtk(sim->state, std::filesystem::path(path));
  });
}

surfns_status surfns_sim_write_csv(const surfns_sim* sim, const char* path) {
  return guarded([&] {
    require_ptr(sim, "sim");
    require_ptr(path, "path");
    write_diagnostics_csv(sim->state.history, std::filesystem::path(path));
  });
}

surfns_status surfns_sim_save_state(const surfns_sim* sim, const char* path) {
  return guarded([&] {
    require_ptr(sim, "sim");
    require_ptr(path, "path");
    save_state(sim->state, path);
  });
}

void surfns_sim_free(surfns_sim* sim) { delete sim; }

surfns_status surfns_run(const surfns_config* config, const char* resume_path,
                         surfns_step_callback cb, void* user, surfns_run_summary* summary) {
  return guarded([&] {
    require_ptr(config, "config");
    const RunSummary s = run_simulation(
        config->config, resume_path ? std::filesystem::path(resume_path) : std::filesystem::path(),
        wrap(cb, user));
    if (summary) *summary = {s.steps, s.final_time, s.snapshots, to_c(s.last)};
  });
}

void surfns_converge_default_options(surfns_converge_options* o) {
  if (!o) return;
  static const int levels[] = {2, 3, 4};
  const ConvergenceSettings d;
  *o = {levels, 3, d.final_time, d.tau_power, "sine", d.stepper.solver.restart,
        d.stepper.solver.max_iter, d.stepper.solver.tol};
}

surfns_status surfns_converge(const surfns_converge_options* o, surfns_converge_callback cb,
                              void* user, char** csv, int* failed_rows) {
  return guarded([&] {
    require_ptr(o, "options");
    require(o->num_levels == 0 || o->levels != nullptr, ErrorKind::argument, "levels is NULL");
    ConvergenceSettings s;
    s.levels.assign(o->levels, o->levels + o->num_levels);
    require(s.levels.size() >= 2, ErrorKind::usage, "need at least two levels");
    for (std::size_t i = 0; i < s.levels.size(); ++i)
      require(s.levels[i] >= 0 && s.levels[i] <= 8 && (i == 0 || s.levels[i] > s.levels[i - 1]),
              ErrorKind::usage, "levels must be increasing and lie in [0, 8]");
    s.final_time = o->final_time;
    s.tau_power = o->tau_power;
    s.stepper.solver.restart = o->restart;
    s.stepper.solver.max_iter = o->max_iter;
    s.stepper.solver.tol = o->tol;
    require(s.final_time > 0.0, ErrorKind::usage, "final time must be positive");
    require(s.tau_power > 0.0, ErrorKind::usage, "tau power must be positive");
    s.stepper.solver.validate();
    const RadialProfile profile = RadialProfile::parse(o->profile ? o->profile : "sine");
    if (cb)
      s.on_run = [cb, user](const ManufacturedRun& r) {
        const surfns_converge_row row{r.level,       r.triangles,       r.h0,
                                      r.tau,         r.err_surface,     r.err_pressure_raw,
                                      r.err_pressure_shifted, r.status == "ok"};
        cb(&row, user);
      };
    const ConvergenceTable table = convergence_experiment(s, profile);
    int failed = 0;
    for (const auto& r : table.rows) failed += r.run.status != "ok";
    if (failed_rows) *failed_rows = failed;
    if (csv) {
      std::ostringstream out;
      table.write_csv(out);
      *csv = dup_string(out.str());
    }
  });
}

surfns_status surfns_verify(surfns_check_callback cb, void* user, int* failures) {
  return guarded([&] {
    int failed = 0;
    for (const auto& r : run_verification_suite()) {
      failed += !r.passed;
      if (cb) cb(r.name.c_str(), r.passed ? 1 : 0, r.detail.c_str(), user);
    }
    if (failures) *failures = failed;
  });
}

}  // extern "C"
