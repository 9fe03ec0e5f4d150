#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "surfns/timestepper.hpp"

#include <cmath>
#include <numbers>

using namespace surfns;
using std::numbers::pi;

namespace {

Vec3 swirl(const Vec3& z) { return Vec3(-z.y() + 0.2 * z.z(), z.x(), 0.1 * z.x() * z.y()); }

double max_node_distance(const SurfaceMesh& a, const SurfaceMesh& b, const Vec3& shift) {
  double d = 0.0;
  for (int k = 0; k < a.num_nodes(); ++k) d = std::max(d, (a.node(k) + shift - b.node(k)).norm());
  return d;
}

}  // namespace

TEST_CASE("initial state") {
  const auto mesh = build_sphere(2, 1.0);
  SchemeParams p;
  TimeStepper stepper(p);
  const SimulationState s = stepper.initialize(mesh, {});
  CHECK(s.step == 0);
  CHECK(s.time() == 0.0);
  REQUIRE(s.history.size() == 1);
  const Diagnostics& d = s.history[0];
  CHECK(d.kinetic == 0.0);
  CHECK(s.P.coeffs.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(s.F.coeffs.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(d.area == doctest::Approx(surface_area(mesh)).epsilon(1e-14));
  CHECK(std::abs(d.area - 4 * pi) < 2e-2);
  CHECK(std::abs(d.volume - 4 * pi / 3) < 1e-2);
  CHECK(std::abs(d.bending - 8 * pi) < 0.1);
  CHECK(d.total == d.kinetic + p.alpha * d.bending);

  // kappa^0 . nu -> -2 at the nodes.
  std::vector<double> err, hs;
  for (int level = 2; level <= 3; ++level) {
    const auto m = build_sphere(level, 1.0);
    const SimulationState sl = stepper.initialize(m, {});
    double worst = 0.0;
    for (int k = 0; k < m.num_nodes(); ++k)
      worst = std::max(worst, std::abs(sl.kappa.node_vector(k).dot(m.node(k).normalized()) + 2.0));
    err.push_back(worst);
    hs.push_back(mesh_size(m));
  }
  CHECK(std::log(err[0] / err[1]) / std::log(hs[0] / hs[1]) >= 1.8);
}

TEST_CASE("bending energy of kappa^0 is radius independent") {
  for (double r : {0.3, 1.0, 4.0}) {
    TimeStepper stepper(SchemeParams{});
    const SimulationState s = stepper.initialize(build_sphere(3, r), {});
    CHECK(std::abs(s.history[0].bending - 8 * pi) < 1e-2);
  }
}

TEST_CASE("translating sphere moves rigidly") {
  SchemeParams p;
  p.alpha = 0.0;
  p.tau = 0.05;
  p.final_time = 0.5;
  const Vec3 b0(1.0, 0.0, 0.0);
  const auto mesh = build_sphere(2, 1.0);
  TimeStepper stepper(p);
  SimulationState s = stepper.initialize(mesh, [&](const Vec3&) { return b0; });
  stepper.step(s);
  CHECK(max_node_distance(mesh, s.mesh, p.tau * b0) <= 1e-12);
  stepper.run(s);
  CHECK(s.step == 10);
  CHECK(max_node_distance(mesh, s.mesh, s.time() * b0) <= 1e-9);
  for (int k = 0; k < mesh.num_nodes(); ++k) CHECK((s.U.node_vector(k) - b0).norm() <= 1e-10);
  CHECK(s.P.coeffs.lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("zero data is a fixed point") {
  SchemeParams p;
  p.alpha = 0.0;
  p.tau = 0.1;
  const auto mesh = build_torus(0, 2.0, 1.0);
  TimeStepper stepper(p);
  SimulationState s = stepper.initialize(mesh, {});
  stepper.step(s);
  CHECK(s.U.coeffs.lpNorm<Eigen::Infinity>() <= 1e-10);
  CHECK(max_node_distance(mesh, s.mesh, Vec3::Zero()) <= 1e-11);
}

TEST_CASE("manufactured mode: first step meets the prescribed divergence") {
  SchemeParams p;
  p.tau = 1e-2;
  p.manufactured = true;
  p.divergence = [](double t) { return 2.0 * pi * std::cos(2 * pi * t) / (1.0 + 0.5 * std::sin(2 * pi * t)); };
  const auto mesh = build_sphere(2, 1.0);
  TimeStepper stepper(p);
  SimulationState s = stepper.initialize(mesh, [](const Vec3& z) { return Vec3(pi * z.normalized()); });
  const SimulationState before = s;
  stepper.step(s);
  const Vector src = assemble_divergence_source(before.mesh, p, 2.0 * pi);
  const Vector ct_u = assemble_pressure_coupling(before.mesh).transpose() * s.U.coeffs;
  CHECK((ct_u + src).norm() <= 10.0 * 1e-10 * s.U.coeffs.norm());
  CHECK(s.history.back().div_residual <= 10.0 * 1e-10 * s.U.coeffs.norm());
}

TEST_CASE("run bookkeeping and residual certificates") {
  SchemeParams p;
  p.tau = 0.01;
  p.final_time = 0.05;
  const auto mesh = build_capsule(0, 1.0, 0.5);
  TimeStepper stepper(p);
  SimulationState s = stepper.initialize(mesh, swirl);
  int calls = 0;
  stepper.run(s, [&](const SimulationState& st) {
    CHECK(st.step == calls);
    CHECK(st.history.size() == static_cast<std::size_t>(calls + 1));
    ++calls;
  });
  CHECK(calls == 6);
  CHECK(s.step == 5);
  CHECK(s.time() == 5 * 0.01);
  for (std::size_t i = 1; i < s.history.size(); ++i) {
    const Diagnostics& d = s.history[i];
    CHECK(d.step == static_cast<long>(i));
    CHECK(d.certificate <= 1e-9);
    CHECK(d.solver_iters > 0);
    CHECK(d.total == doctest::Approx(d.kinetic + p.alpha * d.bending).epsilon(1e-15));
    CHECK(std::isfinite(d.area));
    CHECK(d.area > 0.0);
  }
  // Already at T: a second run is a no-op.
  stepper.run(s);
  CHECK(s.step == 5);
}

TEST_CASE("step count must be integral") {
  SchemeParams p;
  p.tau = 0.3;
  p.final_time = 1.0;
  CHECK_THROWS_AS(step_count(p), Error);
  p.tau = 0.25;
  CHECK(step_count(p) == 4);
  p.tau = 1e-3;
  CHECK(step_count(p) == 1000);
}

TEST_CASE("diagnostics pair new fields with the old surface") {
  SchemeParams p;
  p.tau = 0.02;
  const auto mesh = build_capsule(0, 1.0, 0.5);
  TimeStepper stepper(p);
  SimulationState s = stepper.initialize(mesh, swirl);
  const SurfaceMesh old = s.mesh;
  stepper.step(s);
  const Diagnostics recomputed = compute_diagnostics(s, old, p);
  CHECK(recomputed.kinetic == doctest::Approx(s.history.back().kinetic).epsilon(1e-13));
  CHECK(recomputed.bending == doctest::Approx(s.history.back().bending).epsilon(1e-13));
  CHECK(recomputed.area == doctest::Approx(surface_area(s.mesh)).epsilon(1e-14));

  SimulationState still = s;
  still.U.coeffs.setZero();
  still.kappa.coeffs.setZero();
  const Diagnostics z = compute_diagnostics(still, p);
  CHECK(z.kinetic == 0.0);
  CHECK(z.bending == 0.0);
}

TEST_CASE("frame indifference under translation") {
  SchemeParams p;
  p.tau = 0.01;
  p.final_time = 0.03;
  const auto mesh = build_capsule(0, 1.0, 0.5);
  const Vec3 shift(10.0, -3.0, 2.5);
  std::vector<Vec3> moved = mesh.nodes();
  for (auto& q : moved) q += shift;
  const auto mesh_moved = mesh.with_nodes(moved);

  TimeStepper a(p), b(p);
  SimulationState sa = a.initialize(mesh, swirl);
  SimulationState sb = b.initialize(mesh_moved, [&](const Vec3& z) { return swirl(z - shift); });
  a.run(sa);
  b.run(sb);
  CHECK(max_node_distance(sa.mesh, sb.mesh, shift) <= 1e-9);
  CHECK((sa.U.coeffs - sb.U.coeffs).lpNorm<Eigen::Infinity>() <= 1e-9);
}

TEST_CASE("restart from a copied state is bit-identical") {
  SchemeParams p;
  p.tau = 0.01;
  p.final_time = 0.04;
  const auto mesh = build_capsule(0, 1.0, 0.5);
  TimeStepper a(p);
  SimulationState s = a.initialize(mesh, swirl);
  a.step(s);
  a.step(s);
  SimulationState resumed = s;
  a.step(s);
  TimeStepper b(p);
  b.step(resumed);
  CHECK(s.mesh.nodes() == resumed.mesh.nodes());
  CHECK(s.U.coeffs == resumed.U.coeffs);
  CHECK(s.P.coeffs == resumed.P.coeffs);
  CHECK(s.kappa.coeffs == resumed.kappa.coeffs);
  CHECK(s.F.coeffs == resumed.F.coeffs);
}

TEST_CASE("theta has no effect without inertia") {
  const auto mesh = build_capsule(0, 1.0, 0.5);
  const NodeField u = interpolate(mesh, swirl);
  const auto zero = NodeField::zeros(mesh, SpaceTag::p2_vector3);
  SchemeParams p0, p1;
  p0.rho = p1.rho = 0.0;
  p0.theta = 0;
  p1.theta = 1;
  const BlockSaddleSystem a = assemble_system(mesh, u, zero, p0, 0.0);
  const BlockSaddleSystem b = assemble_system(mesh, u, zero, p1, 0.0);
  CHECK(a.rhs_momentum == b.rhs_momentum);
  CHECK(Eigen::MatrixXd(a.B) == Eigen::MatrixXd(b.B));
  // And with inertia it does matter.
  p0.rho = p1.rho = 1.0;
  CHECK(assemble_system(mesh, u, zero, p0, 0.0).rhs_momentum !=
        assemble_system(mesh, u, zero, p1, 0.0).rhs_momentum);
}

TEST_CASE("rho = 0 needs the experimental direct path") {
  SchemeParams p;
  p.rho = 0.0;
  CHECK_THROWS_AS(TimeStepper{p}, Error);
  StepperOptions o;
  o.method = SolveMethod::full_direct;
  CHECK_THROWS_AS((TimeStepper{p, o}), Error);
  o.solver.experimental_rho_zero = true;
  TimeStepper stepper(p, o);
  // Translations are in the kernel without inertia, so the step is rejected.
  SimulationState s = stepper.initialize(build_sphere(0, 1.0), {});
  try {
    stepper.step(s);
    FAIL("expected singular matrix");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::singular_matrix);
  }
  CHECK(s.step == 0);
}

TEST_CASE("a failed step leaves the state untouched") {
  SchemeParams p;
  p.tau = 0.2;
  p.final_time = 1.0;
  StepperOptions o;
  o.solver.restart = 1;
  o.solver.max_iter = 1;
  const auto mesh = build_sphere(2, 1.0);
  TimeStepper stepper(p, o);
  SimulationState s = stepper.initialize(mesh, swirl);
  const SimulationState before = s;
  CHECK_THROWS_AS(stepper.step(s), IterativeFailure);
  CHECK(s.step == before.step);
  CHECK(s.mesh.nodes() == before.mesh.nodes());
  CHECK(s.U.coeffs == before.U.coeffs);
  CHECK(s.history.size() == before.history.size());
}

TEST_CASE("direct and Krylov steppers agree") {
  SchemeParams p;
  p.tau = 0.01;
  p.final_time = 0.03;
  const auto mesh = build_sphere(1, 1.0);
  StepperOptions direct;
  direct.method = SolveMethod::full_direct;
  TimeStepper a(p), b(p, direct);
  SimulationState sa = a.initialize(mesh, swirl);
  SimulationState sb = b.initialize(mesh, swirl);
  a.run(sa);
  b.run(sb);
  CHECK(max_node_distance(sa.mesh, sb.mesh, Vec3::Zero()) <= 1e-10);
  CHECK((sa.U.coeffs - sb.U.coeffs).norm() <= 1e-8 * sb.U.coeffs.norm());
}
