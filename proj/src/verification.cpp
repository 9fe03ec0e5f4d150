#include "surfns/verification.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

namespace surfns {

namespace {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

double parse_number(const std::string& s, const std::string& context) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size(), ErrorKind::argument,
          "invalid number '" + s + "' in " + context);
  return v;
}

}  // namespace

RadialProfile RadialProfile::sine(double amplitude, double frequency) {
  RadialProfile p;
  p.name = "sine";
  p.r = [=](double t) { return 1.0 + amplitude * std::sin(frequency * t); };
  p.dr = [=](double t) { return amplitude * frequency * std::cos(frequency * t); };
  p.ddr = [=](double t) { return -amplitude * frequency * frequency * std::sin(frequency * t); };
  return p;
}

RadialProfile RadialProfile::constant(double r0) {
  require(r0 > 0.0, ErrorKind::argument, "constant profile needs r0 > 0");
  RadialProfile p;
  p.name = "constant";
  p.r = [=](double) { return r0; };
  p.dr = [](double) { return 0.0; };
  p.ddr = [](double) { return 0.0; };
  return p;
}

RadialProfile RadialProfile::parse(const std::string& spec) {
  const auto parts = split(spec, ':');
  require(!parts.empty(), ErrorKind::argument, "empty profile");
  if (parts[0] == "sine") {
    if (parts.size() == 1) return sine();
    require(parts.size() == 3, ErrorKind::argument,
            "profile 'sine' takes sine or sine:<amplitude>:<frequency>");
    return sine(parse_number(parts[1], "profile"), parse_number(parts[2], "profile"));
  }
  if (parts[0] == "constant") {
    if (parts.size() == 1) return constant();
    require(parts.size() == 2, ErrorKind::argument, "profile 'constant' takes constant[:<r0>]");
    return constant(parse_number(parts[1], "profile"));
  }
  fail(ErrorKind::argument, "unknown profile '" + spec + "'");
}

void RadialProfile::validate(double final_time, int samples) const {
  for (int i = 0; i <= samples; ++i) {
    const double t = final_time * i / samples;
    require(r(t) > 0.0, ErrorKind::argument, "radius profile is not positive on [0, T]");
  }
}

ExactSphereSolution exact_sphere(double t, const RadialProfile& profile,
                                 const SchemeParams& params) {
  ExactSphereSolution e;
  e.t = t;
  e.radius = profile.r(t);
  e.dr = profile.dr(t);
  e.ddr = profile.ddr(t);
  e.divergence = 2.0 * e.dr / e.radius;
  // First variation of 1/2 int kappa^2 on a sphere: 4/r^3 - (2/r)^3 / 2.
  e.f_gamma = 4.0 / std::pow(e.radius, 3) - 0.5 * std::pow(2.0 / e.radius, 3);
  e.pressure = 0.5 * params.rho * e.ddr * e.radius + 2.0 * params.mu * e.dr / e.radius -
               0.5 * params.alpha * e.f_gamma * e.radius;
  e.pressure_shift = 0.5 * params.theta * params.rho * e.dr * e.dr;
  return e;
}

const char* to_string(PressureShift mode) noexcept {
  return mode == PressureShift::none ? "raw" : "theta_shift";
}

double surface_error(const SurfaceMesh& mesh, double radius) {
  double err = 0.0;
  for (const auto& q : mesh.nodes()) err = std::max(err, std::abs(q.norm() - radius));
  return err;
}

double surface_error_linf(const std::vector<TrajectoryFrame>& trajectory,
                          const RadialProfile& profile) {
  double err = 0.0;
  for (const auto& f : trajectory) {
    const double r = profile.r(f.t);
    for (const auto& q : f.nodes) err = std::max(err, std::abs(q.norm() - r));
  }
  return err;
}

double pressure_error_l2(const SimulationState& state, const ExactSphereSolution& exact,
                         PressureShift mode, int degree) {
  require(state.P.space == SpaceTag::p1_scalar && state.P.matches(state.mesh),
          ErrorKind::structural, "pressure_error_l2: P must be a P1 field on the mesh");
  const double p = mode == PressureShift::none ? exact.pressure : exact.pressure_shifted();
  const Vector e = state.P.coeffs.array() - p;
  const SparseMatrix m = assemble_mass(state.mesh, SpaceTag::p1_scalar, degree);
  return std::sqrt(std::max(0.0, e.dot(m * e)));
}

std::vector<double> eoc(const std::vector<double>& errors, const std::vector<double>& hs) {
  require(errors.size() == hs.size() && errors.size() >= 2, ErrorKind::argument,
          "eoc needs two equally long sequences of length >= 2");
  for (std::size_t i = 0; i < errors.size(); ++i)
    require(errors[i] > 0.0 && hs[i] > 0.0, ErrorKind::argument,
            "eoc needs positive errors and mesh sizes");
  std::vector<double> out;
  for (std::size_t i = 1; i < errors.size(); ++i)
    out.push_back(std::log(errors[i - 1] / errors[i]) / std::log(hs[i - 1] / hs[i]));
  return out;
}

SchemeParams manufactured_params(const RadialProfile& profile, double final_time, double tau,
                                 double rho, double mu, double alpha, int theta) {
  SchemeParams p;
  p.rho = rho;
  p.mu = mu;
  p.alpha = alpha;
  p.theta = theta;
  p.tau = tau;
  p.final_time = final_time;
  p.manufactured = true;
  const auto r = profile.r;
  const auto dr = profile.dr;
  p.divergence = [r, dr](double t) { return 2.0 * dr(t) / r(t); };
  return p;
}

ManufacturedRun run_manufactured(int level, const SchemeParams& params,
                                 const RadialProfile& profile, const StepperOptions& options) {
  require(params.manufactured, ErrorKind::usage, "run_manufactured needs manufactured params");
  profile.validate(params.final_time);
  ManufacturedRun out;
  out.level = level;
  out.tau = params.tau;
  const auto mesh = build_sphere(level, profile.r(0.0));
  out.triangles = mesh.num_triangles();
  out.h0 = mesh_size(mesh);
  try {
    out.steps = step_count(params);
    TimeStepper stepper(params, options);
    const double dr0 = profile.dr(0.0);
    SimulationState state =
        stepper.initialize(mesh, [dr0](const Vec3& z) { return Vec3(dr0 * z.normalized()); });
    double err = 0.0;
    stepper.run(state, [&](const SimulationState& s) {
      if (s.step > 0) err = std::max(err, surface_error(s.mesh, profile.r(s.time())));
    });
    out.err_surface = err;
    const auto exact = exact_sphere(state.time(), profile, params);
    out.err_pressure_raw = pressure_error_l2(state, exact, PressureShift::none);
    out.err_pressure_shifted = pressure_error_l2(state, exact, PressureShift::theta_shift);
  } catch (const Error& e) {
    out.status = std::string("failed: ") + to_string(e.kind()) + ": " + e.what();
  }
  return out;
}

double coupled_time_step(double h, double final_time, double power) {
  require(h > 0.0 && final_time > 0.0, ErrorKind::argument, "coupled_time_step: bad input");
  const double steps = std::ceil(final_time / std::pow(h, power) - 1e-9);
  return final_time / std::max(1.0, steps);
}

ConvergenceTable convergence_experiment(const ConvergenceSettings& settings,
                                        const RadialProfile& profile) {
  require(settings.levels.size() >= 2, ErrorKind::argument,
          "convergence experiment needs at least two levels");
  for (std::size_t i = 1; i < settings.levels.size(); ++i)
    require(settings.levels[i] > settings.levels[i - 1], ErrorKind::argument,
            "levels must be increasing");
  ConvergenceTable table;
  for (int level : settings.levels) {
    const double h = mesh_size(build_sphere(level, profile.r(0.0)));
    const double tau = coupled_time_step(h, settings.final_time, settings.tau_power);
    const SchemeParams params = manufactured_params(profile, settings.final_time, tau, settings.rho,
                                                    settings.mu, settings.alpha, settings.theta);
    ConvergenceRow row;
    row.run = run_manufactured(level, params, profile, settings.stepper);
    if (settings.on_run) settings.on_run(row.run);
    table.rows.push_back(row);
  }

  auto pair_eoc = [](double e0, double e1, double h0, double h1) -> std::optional<double> {
    if (!(e0 > 0.0 && e1 > 0.0)) return std::nullopt;
    return std::log(e0 / e1) / std::log(h0 / h1);
  };
  // Pick the pressure interpretation by its finest-pair EOC.
  const auto& rows = table.rows;
  std::optional<double> raw, shifted;
  for (std::size_t i = rows.size() - 1; i >= 1; --i) {
    const auto& a = rows[i - 1].run;
    const auto& b = rows[i].run;
    if (a.status == "ok" && b.status == "ok") {
      raw = pair_eoc(a.err_pressure_raw, b.err_pressure_raw, a.h0, b.h0);
      shifted = pair_eoc(a.err_pressure_shifted, b.err_pressure_shifted, a.h0, b.h0);
      break;
    }
  }
  if (raw && shifted && std::abs(*shifted - 3.0) < std::abs(*raw - 3.0))
    table.pressure_mode = PressureShift::theta_shift;
  else if (!raw && shifted)
    table.pressure_mode = PressureShift::theta_shift;

  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    const auto& a = table.rows[i - 1].run;
    auto& row = table.rows[i];
    if (a.status != "ok" || row.run.status != "ok") continue;
    row.eoc_surface = pair_eoc(a.err_surface, row.run.err_surface, a.h0, row.run.h0);
    const bool shift = table.pressure_mode == PressureShift::theta_shift;
    row.eoc_pressure = pair_eoc(shift ? a.err_pressure_shifted : a.err_pressure_raw,
                                shift ? row.run.err_pressure_shifted : row.run.err_pressure_raw,
                                a.h0, row.run.h0);
  }
  return table;
}

void ConvergenceTable::write_csv(std::ostream& out) const {
  out << "level,J,h0,tau,err_surface,eoc_surface,err_pressure_raw,err_pressure_shifted,"
         "eoc_pressure,pressure_mode,status\n";
  const auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : ""; };
  for (const auto& row : rows) {
    const auto& r = row.run;
    std::string status = r.status;
    for (char& c : status)
      if (c == '"') c = '\'';
    out << r.level << ',' << r.triangles << ',' << format_double(r.h0) << ','
        << format_double(r.tau) << ',' << format_double(r.err_surface) << ','
        << opt(row.eoc_surface) << ',' << format_double(r.err_pressure_raw) << ','
        << format_double(r.err_pressure_shifted) << ',' << opt(row.eoc_pressure) << ','
        << to_string(pressure_mode) << ",\"" << status << "\"\n";
  }
}

}  // namespace surfns
