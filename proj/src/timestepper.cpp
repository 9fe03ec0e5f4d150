#include "surfns/timestepper.hpp"

#include <cmath>

namespace surfns {

namespace {

Diagnostics diagnostics_with_mass(const SimulationState& state, const SparseMatrix& pairing_mass,
                                  const SchemeParams& params, int degree) {
  Diagnostics d;
  d.step = state.step;
  d.t = state.time();
  d.area = surface_area(state.mesh, degree);
  d.volume = enclosed_volume(state.mesh, degree);
  d.kinetic = 0.5 * params.rho * state.U.coeffs.dot(pairing_mass * state.U.coeffs);
  d.bending = 0.5 * state.kappa.coeffs.dot(pairing_mass * state.kappa.coeffs);
  d.total = d.kinetic + params.alpha * d.bending;
  return d;
}

}  // namespace

Diagnostics compute_diagnostics(const SimulationState& state, const SurfaceMesh& pairing_surface,
                                const SchemeParams& params, int degree) {
  require(pairing_surface.same_connectivity(state.mesh), ErrorKind::structural,
          "compute_diagnostics: pairing surface has different connectivity");
  return diagnostics_with_mass(state, assemble_mass(pairing_surface, SpaceTag::p2_vector3, degree),
                               params, degree);
}

Diagnostics compute_diagnostics(const SimulationState& state, const SchemeParams& params,
                                int degree) {
  return compute_diagnostics(state, state.mesh, params, degree);
}

long step_count(const SchemeParams& params) {
  params.validate();
  const double ratio = params.final_time / params.tau;
  const double rounded = std::round(ratio);
  require(rounded >= 1.0 && std::abs(ratio - rounded) <= 1e-9 * rounded, ErrorKind::argument,
          "T / tau must be a positive integer");
  return static_cast<long>(rounded);
}

TimeStepper::TimeStepper(SchemeParams params, StepperOptions options)
    : params_(std::move(params)), options_(options), solver_(options.solver) {
  params_.validate();
  options_.solver.validate();
  if (params_.rho == 0.0)
    require(options_.method == SolveMethod::full_direct && options_.solver.experimental_rho_zero,
            ErrorKind::argument,
            "rho = 0 is only supported by the direct solver with the experimental flag");
}

SimulationState TimeStepper::initialize(const SurfaceMesh& mesh,
                                        const std::function<Vec3(const Vec3&)>& u0) const {
  const int degree = options_.quadrature_degree;
  SimulationState s{0, params_.tau, mesh, {}, {}, {}, {}, {}};
  s.U = u0 ? interpolate(mesh, u0) : NodeField::zeros(mesh, SpaceTag::p2_vector3);
  s.P = NodeField::zeros(mesh, SpaceTag::p1_scalar);
  s.F = NodeField::zeros(mesh, SpaceTag::p2_vector3);
  const SparseMatrix m = assemble_mass(mesh, SpaceTag::p2_vector3, degree);
  const MassSolver mass(m);
  s.kappa.space = SpaceTag::p2_vector3;
  s.kappa.coeffs = mass.solve(-(assemble_stiffness(mesh, degree) * NodeField::coordinates(mesh).coeffs));

  Diagnostics d = diagnostics_with_mass(s, m, params_, degree);
  const SparseMatrix c = assemble_pressure_coupling(mesh, degree);
  Vector div = c.transpose() * s.U.coeffs;
  if (params_.manufactured)
    div += assemble_divergence_source(mesh, params_, params_.divergence(0.0), degree);
  d.div_residual = div.norm();
  s.history.push_back(d);
  return s;
}

void TimeStepper::step(SimulationState& state) {
  const int degree = options_.quadrature_degree;
  require(state.U.matches(state.mesh) && state.kappa.matches(state.mesh), ErrorKind::structural,
          "step: fields not attached to the current mesh");
  require(state.tau == params_.tau, ErrorKind::argument, "step: state tau differs from params");
  const double t = state.time();

  // U^m and kappa^m move to the current surface by coefficient identity.
  const BlockSaddleSystem sys = assemble_system(state.mesh, state.U, state.kappa, params_, t, degree);
  const MassSolver mass(sys.M);

  Vector u, p, kappa, dx, f;
  SaddleSolveReport report;
  if (options_.method == SolveMethod::schur_krylov) {
    SaddleSolution sol = solver_.solve(sys, mass);
    GeometryUpdate g = recover_geometry(sol.U, sys, mass);
    u = std::move(sol.U);
    p = std::move(sol.P);
    kappa = std::move(g.kappa);
    dx = std::move(g.dX);
    f = std::move(g.F);
    report = sol.report;
  } else {
    FullSolution sol = solve_full_direct(sys, options_.solver);
    u = std::move(sol.U);
    p = std::move(sol.P);
    kappa = std::move(sol.kappa);
    dx = std::move(sol.dX);
    f = std::move(sol.F);
    report = sol.report;
  }
  const ResidualCertificate cert = residual_certificate(sys, u, p, kappa, dx, f);
  require(cert.max_relative() <= options_.certificate_tol, ErrorKind::iterative_failure,
          "step " + std::to_string(state.step + 1) + ": residual certificate " +
              std::to_string(cert.max_relative()) + " exceeds tolerance");

  NodeField x_new;
  x_new.space = SpaceTag::p2_vector3;
  x_new.coeffs = sys.X + dx;
  SurfaceMesh mesh = update_geometry(state.mesh, x_new, degree);

  SimulationState next{state.step + 1, state.tau, std::move(mesh), {}, {}, {}, {}, {}};
  next.U = {SpaceTag::p2_vector3, std::move(u)};
  next.P = {SpaceTag::p1_scalar, std::move(p)};
  next.kappa = {SpaceTag::p2_vector3, std::move(kappa)};
  next.F = {SpaceTag::p2_vector3, std::move(f)};

  Diagnostics d = diagnostics_with_mass(next, sys.M, params_, degree);
  d.div_residual = cert.divergence;
  d.solver_iters = report.iterations;
  d.solver_seconds = report.seconds;
  d.certificate = cert.max_relative();

  state.history.reserve(state.history.size() + 1);
  next.history = std::move(state.history);
  next.history.push_back(d);
  state = std::move(next);
}

void TimeStepper::run(SimulationState& state, const StepCallback& on_step) {
  const long total = step_count(params_);
  require(state.step <= total, ErrorKind::argument, "run: state is already past T");
  if (on_step && state.step == 0 && state.history.size() == 1) on_step(state);
  while (state.step < total) {
    step(state);
    if (on_step) on_step(state);
  }
}

}  // namespace surfns
