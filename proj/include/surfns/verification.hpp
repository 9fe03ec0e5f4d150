#pragma once

#include "surfns/timestepper.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace surfns {

/// Radius law r(t) of a sphere centred at the origin, with derivatives.
struct RadialProfile {
  std::string name;
  std::function<double(double)> r, dr, ddr;

  /// 1 + a sin(w t); default a = 1/2, w = 2 pi.
  static RadialProfile sine(double amplitude = 0.5, double frequency = 2.0 * 3.141592653589793);
  /// r(t) = r0.
  static RadialProfile constant(double r0 = 1.0);
  /// "sine", "sine:<amplitude>:<frequency>" or "constant[:<r0>]".
  static RadialProfile parse(const std::string& spec);

  /// Throws ErrorKind::argument if r <= 0 at any of `samples` points of [0, T].
  void validate(double final_time, int samples = 1000) const;
};

struct ExactSphereSolution {
  double t = 0.0;
  double radius = 0.0;
  double dr = 0.0;
  double ddr = 0.0;
  double divergence = 0.0;  // b(t) = 2 r'/r
  double f_gamma = 0.0;     // bending force density, 0 on spheres
  double pressure = 0.0;    // without the convective shift
  double pressure_shift = 0.0;  // theta rho r'^2 / 2

  double pressure_shifted() const { return pressure + pressure_shift; }
  Vec3 velocity(const Vec3& z) const { return dr * z.normalized(); }
};

ExactSphereSolution exact_sphere(double t, const RadialProfile& profile,
                                 const SchemeParams& params);

enum class PressureShift { none, theta_shift };
const char* to_string(PressureShift mode) noexcept;

/// max over nodes of | |q_k| - r |.
double surface_error(const SurfaceMesh& mesh, double radius);

struct TrajectoryFrame {
  double t = 0.0;
  std::vector<Vec3> nodes;
};

/// max over frames and nodes of | |q_k^m| - r(t_m) |.
double surface_error_linf(const std::vector<TrajectoryFrame>& trajectory,
                          const RadialProfile& profile);

/// L2 norm over the state's surface of P minus the constant exact pressure.
double pressure_error_l2(const SimulationState& state, const ExactSphereSolution& exact,
                         PressureShift mode, int degree = kDefaultQuadratureDegree);

/// eoc_i = ln(e_{i-1}/e_i) / ln(h_{i-1}/h_i); result has size n-1.
std::vector<double> eoc(const std::vector<double>& errors, const std::vector<double>& hs);

/// Scheme parameters of the manufactured expanding/shrinking sphere.
SchemeParams manufactured_params(const RadialProfile& profile, double final_time,
                                 double tau, double rho = 1.0, double mu = 1.0,
                                 double alpha = 1.0, int theta = 1);

struct ManufacturedRun {
  int level = 0;
  int triangles = 0;
  double h0 = 0.0;
  double tau = 0.0;
  long steps = 0;
  double err_surface = 0.0;
  double err_pressure_raw = 0.0;
  double err_pressure_shifted = 0.0;
  std::string status = "ok";
};

/// One manufactured run on build_sphere(level, r(0)).
ManufacturedRun run_manufactured(int level, const SchemeParams& params,
                                 const RadialProfile& profile,
                                 const StepperOptions& options = {});

struct ConvergenceRow {
  ManufacturedRun run;
  std::optional<double> eoc_surface;
  std::optional<double> eoc_pressure;
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  /// Interpretation used for the pressure EOC column: the one whose
  /// finest-pair EOC is closest to 3.
  PressureShift pressure_mode = PressureShift::none;

  void write_csv(std::ostream& out) const;
};

struct ConvergenceSettings {
  std::vector<int> levels{2, 3, 4};
  double final_time = 1.0;
  double rho = 1.0, mu = 1.0, alpha = 1.0;
  int theta = 1;
  /// tau = T / ceil(T / h0^p).
  double tau_power = 3.0;
  /// The preconditioned spectrum spreads roughly like 1/h^2 at tau ~ h^3, so
  /// short restarts stagnate on the coarse levels; keep the whole basis.
  StepperOptions stepper = long_restart_stepper();
  static StepperOptions long_restart_stepper() {
    StepperOptions o;
    o.solver.restart = 500;
    o.solver.max_iter = 5000;
    return o;
  }
  std::function<void(const ManufacturedRun&)> on_run;
};

/// tau = T / ceil(T / h^p).
double coupled_time_step(double h, double final_time, double power = 3.0);

ConvergenceTable convergence_experiment(const ConvergenceSettings& settings,
                                        const RadialProfile& profile);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Self-contained operator-identity and solver cross-check suite.
std::vector<CheckResult> run_verification_suite();

}  // namespace surfns
