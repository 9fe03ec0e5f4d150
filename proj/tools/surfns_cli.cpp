// Command-line front end. Talks to the library only through surfns.h.
#include "surfns/surfns.h"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

int report(surfns_status status) {
  if (status != SURFNS_OK)
    std::cerr << "ERROR: " << surfns_status_name(status) << ": " << surfns_last_error() << '\n';
  return surfns_exit_code(status);
}

struct Progress {
  bool quiet = false;
  long every = 1;
};

void print_step(const surfns_diagnostics* d, void* user) {
  const auto* p = static_cast<const Progress*>(user);
  if (p->quiet || d->step % p->every != 0) return;
  std::fprintf(stderr, "step %ld  t=%.6g  area=%.10g  volume=%.10g  E=%.10g  iters=%d\n", d->step,
               d->t, d->area, d->volume, d->total, d->solver_iters);
}

int cmd_run(const std::string& config_path, const std::string& output, const std::string& resume,
            bool quiet, long every) {
  surfns_config* config = nullptr;
  if (int rc = report(surfns_config_load(config_path.c_str(), &config))) return rc;
  int rc = 0;
  if (!output.empty()) rc = report(surfns_config_set_output(config, output.c_str()));
  if (rc == 0) {
    Progress progress{quiet, every < 1 ? 1 : every};
    surfns_run_summary summary{};
    rc = report(surfns_run(config, resume.empty() ? nullptr : resume.c_str(), print_step,
                           &progress, &summary));
    if (rc == 0)
      std::printf("steps=%ld t=%.17g area=%.17g volume=%.17g E_total=%.17g snapshots=%d\n",
                  summary.steps, summary.final_time, summary.last.area, summary.last.volume,
                  summary.last.total, summary.snapshots);
  }
  surfns_config_free(config);
  return rc;
}

void print_row(const surfns_converge_row* r, void*) {
  std::fprintf(stderr, "level %d  J=%d  h0=%.6g  tau=%.4g  err_surface=%.6e  %s\n", r->level,
               r->triangles, r->h0, r->tau, r->err_surface, r->ok ? "ok" : "FAILED");
}

int cmd_converge(const std::vector<int>& levels, double final_time, double tau_power,
                 const std::string& profile, int restart, int max_iter, const std::string& out) {
  surfns_converge_options o;
  surfns_converge_default_options(&o);
  o.levels = levels.data();
  o.num_levels = levels.size();
  o.final_time = final_time;
  o.tau_power = tau_power;
  o.profile = profile.c_str();
  if (restart > 0) o.restart = restart;
  if (max_iter > 0) o.max_iter = max_iter;
  char* csv = nullptr;
  int failed = 0;
  if (int rc = report(surfns_converge(&o, print_row, nullptr, &csv, &failed))) return rc;
  int rc = 0;
  if (out.empty()) {
    std::fputs(csv, stdout);
  } else {
    std::ofstream f(out);
    f << csv;
    if (!f) {
      std::cerr << "ERROR: io: cannot write " << out << '\n';
      rc = 1;
    }
  }
  surfns_string_free(csv);
  if (rc == 0 && failed > 0) {
    std::cerr << "ERROR: " << failed << " convergence run(s) failed\n";
    rc = 1;
  }
  return rc;
}

void print_check(const char* name, int passed, const char* detail, void*) {
  std::printf("%s %s: %s\n", passed ? "PASS" : "FAIL", name, detail);
}

int cmd_verify() {
  int failures = 0;
  if (int rc = report(surfns_verify(print_check, nullptr, &failures))) return rc;
  if (failures > 0) {
    std::cerr << "ERROR: " << failures << " check(s) failed\n";
    return 1;
  }
  return 0;
}

int cmd_config(const std::string& path) {
  surfns_config* config = nullptr;
  const surfns_status st =
      path.empty() ? surfns_config_default(&config) : surfns_config_load(path.c_str(), &config);
  if (int rc = report(st)) return rc;
  char* text = nullptr;
  int rc = report(surfns_config_serialize(config, &text));
  if (rc == 0) std::fputs(text, stdout);
  surfns_string_free(text);
  surfns_config_free(config);
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incompressible fluid surfaces with bending energy"};
  app.set_version_flag("--version", surfns_version());
  app.require_subcommand(1);

  std::string config_path, output, resume;
  bool quiet = false;
  long every = 1;
  auto* run = app.add_subcommand("run", "Run a simulation from a configuration file");
  run->add_option("config", config_path, "Configuration file")->required();
  run->add_option("-o,--output", output, "Output directory (overrides [output] directory)");
  run->add_option("--resume", resume, "Continue from a saved state.json");
  run->add_flag("-q,--quiet", quiet, "No per-step progress");
  run->add_option("--every", every, "Progress line every N steps")->check(CLI::PositiveNumber);

  std::vector<int> levels{2, 3, 4};
  double final_time = 1.0, tau_power = 3.0;
  std::string profile = "sine", csv_out;
  int restart = 0, max_iter = 0;
  auto* conv = app.add_subcommand("converge", "Manufactured-sphere convergence table (CSV)");
  conv->add_option("--levels", levels, "Refinement levels, increasing")->delimiter(',');
  conv->add_option("--T", final_time, "Final time");
  conv->add_option("--tau-power", tau_power, "tau = T / ceil(T / h0^p)");
  conv->add_option("--profile", profile, "Radius law: sine, sine:<a>:<w>, constant[:<r0>]");
  conv->add_option("--restart", restart, "GMRES restart length");
  conv->add_option("--max-iter", max_iter, "GMRES iteration cap");
  conv->add_option("--out", csv_out, "Write the CSV here instead of stdout");

  auto* verify = app.add_subcommand("verify", "Operator identities and solver cross-checks");

  std::string show_path;
  auto* config = app.add_subcommand("config", "Print a configuration in canonical form");
  config->add_option("file", show_path, "Configuration file; defaults when omitted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERROR: " << e.what() << '\n';
    return 2;
  }

  if (run->parsed()) return cmd_run(config_path, output, resume, quiet, every);
  if (conv->parsed())
    return cmd_converge(levels, final_time, tau_power, profile, restart, max_iter, csv_out);
  if (verify->parsed()) return cmd_verify();
  if (config->parsed()) return cmd_config(show_path);
  return 2;
}
