#pragma once

#include "surfns/verification.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace surfns {

enum class MeshKind { sphere, torus, capsule };
/// killing_z: scale * (-z2, z1, 0); radial: scale * z/|z|;
/// step_x: value where z1 >= 0, zero elsewhere.
enum class InitialVelocity { zero, constant, killing_z, radial, step_x };

struct MeshConfig {
  MeshKind kind = MeshKind::sphere;
  int level = 2;
  double radius = 1.0;        // sphere radius, capsule cap radius
  double major_radius = 2.0;  // torus
  double minor_radius = 1.0;  // torus
  double half_length = 1.0;   // capsule cylinder half length

  bool operator==(const MeshConfig&) const = default;
};

struct PhysicsConfig {
  double rho = 1.0;
  double mu = 1.0;
  double alpha = 1.0;
  int theta = 1;
  /// Constant body force; (0, 0, 0) is written as "zero".
  Vec3 gravity = Vec3::Zero();

  bool operator==(const PhysicsConfig&) const = default;
};

struct TimeConfig {
  double tau = 1e-3;
  double final_time = 1.0;

  bool operator==(const TimeConfig&) const = default;
};

struct InitialConfig {
  InitialVelocity velocity = InitialVelocity::zero;
  Vec3 value = Vec3::Zero();  // for constant and step_x
  double scale = 1.0;         // for killing_z and radial

  bool operator==(const InitialConfig&) const = default;
};

struct SolverConfig {
  SolveMethod method = SolveMethod::schur_krylov;
  SolverOptions options;
  double certificate_tol = 1e-9;
  int quadrature_degree = kDefaultQuadratureDegree;

  bool operator==(const SolverConfig& o) const;
};

struct ManufacturedConfig {
  bool enabled = false;
  std::string profile = "sine";

  bool operator==(const ManufacturedConfig&) const = default;
};

struct OutputConfig {
  std::string directory = "out";
  int stride = 100;
  bool csv = true;
  bool vtk = true;
  bool state = false;

  bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
  MeshConfig mesh;
  PhysicsConfig physics;
  TimeConfig time;
  InitialConfig initial;
  SolverConfig solver;
  ManufacturedConfig manufactured;
  OutputConfig output;

  bool operator==(const RunConfig&) const = default;

  /// Throws ErrorKind::validation naming the offending key.
  void validate() const;
};

/// Parses the INI-style configuration grammar documented in the README.
/// Syntax errors throw ErrorKind::parse with "line L, column C"; unknown or
/// repeated keys and invalid values throw ErrorKind::validation.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// Canonical text form; parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& config);

SurfaceMesh build_mesh(const MeshConfig& mesh);
SchemeParams scheme_params(const RunConfig& config);
StepperOptions stepper_options(const RunConfig& config);
std::function<Vec3(const Vec3&)> initial_velocity(const RunConfig& config);

/// Shortest decimal that reads back to the same double.
std::string format_double(double v);

/// Legacy ASCII VTK unstructured grid of quadratic triangles (cell type 22).
/// Point data: U, P (midnodes edge-averaged, marked by P_averaged = 1),
/// kappa, F.
void write_vtk(const SimulationState& state, std::ostream& out);
void write_vtk(const SimulationState& state, const std::filesystem::path& path);

inline constexpr const char* kDiagnosticsHeader =
    "step,t,area,volume,E_kin,E_bend,E_total,div_residual,solver_iters,solver_seconds";
void write_diagnostics_csv(const std::vector<Diagnostics>& history, std::ostream& out);
void write_diagnostics_csv(const std::vector<Diagnostics>& history,
                           const std::filesystem::path& path);

/// Full state as JSON, including mesh connectivity and history.
std::string state_to_json(const SimulationState& state);
SimulationState state_from_json(const std::string& text);
void save_state(const SimulationState& state, const std::filesystem::path& path);
SimulationState load_state(const std::filesystem::path& path);

struct RunSummary {
  long steps = 0;
  double final_time = 0.0;
  int snapshots = 0;
  Diagnostics last;
};

/// Runs a configured simulation and writes diagnostics.csv, snapshot_<step>.vtk
/// every `stride` steps (and at the end) and state.json into the output
/// directory. A non-empty `resume` continues from a saved state.
RunSummary run_simulation(const RunConfig& config, const std::filesystem::path& resume = {},
                          const TimeStepper::StepCallback& on_step = {});

}  // namespace surfns
