#pragma once

#include "surfns/saddle_solver.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace surfns {

struct Diagnostics {
  long step = 0;
  double t = 0.0;
  double area = 0.0;
  double volume = 0.0;
  double kinetic = 0.0;  // 1/2 rho <U, U>
  double bending = 0.0;  // 1/2 <kappa, kappa>
  double total = 0.0;    // kinetic + alpha * bending
  double div_residual = 0.0;
  int solver_iters = 0;
  double solver_seconds = 0.0;
  /// Largest relative block-row residual of the step; 0 for the initial state.
  double certificate = 0.0;
};

struct StepperOptions {
  SolveMethod method = SolveMethod::schur_krylov;
  SolverOptions solver;
  int quadrature_degree = kDefaultQuadratureDegree;
  /// Steps whose a-posteriori residual exceeds this are rejected.
  double certificate_tol = 1e-9;
};

struct SimulationState {
  long step = 0;
  double tau = 0.0;
  SurfaceMesh mesh;
  NodeField U, P, kappa, F;
  std::vector<Diagnostics> history;

  /// t = m tau from integer step arithmetic.
  double time() const { return static_cast<double>(step) * tau; }
};

/// Energies paired on `pairing_surface` (the pre-update surface of the step
/// that produced the fields), area and volume on state.mesh.
Diagnostics compute_diagnostics(const SimulationState& state, const SurfaceMesh& pairing_surface,
                                const SchemeParams& params,
                                int degree = kDefaultQuadratureDegree);
Diagnostics compute_diagnostics(const SimulationState& state, const SchemeParams& params,
                                int degree = kDefaultQuadratureDegree);

/// Number of steps M = T / tau. Throws ErrorKind::argument unless integral.
long step_count(const SchemeParams& params);

class TimeStepper {
 public:
  using StepCallback = std::function<void(const SimulationState&)>;

  TimeStepper(SchemeParams params, StepperOptions options = {});

  /// U0 interpolated, kappa0 = -M^-1 A X0, P0 = F0 = 0.
  SimulationState initialize(const SurfaceMesh& mesh,
                             const std::function<Vec3(const Vec3&)>& u0) const;

  /// Advances one step. On any error the state is left untouched.
  void step(SimulationState& state);

  /// Steps until step_count(params) is reached; `on_step` runs after every
  /// accepted step (and once for the initial state if it has no history).
  void run(SimulationState& state, const StepCallback& on_step = {});

  const SchemeParams& params() const { return params_; }
  const StepperOptions& options() const { return options_; }

 private:
  SchemeParams params_;
  StepperOptions options_;
  SaddleSolver solver_;
};

}  // namespace surfns
