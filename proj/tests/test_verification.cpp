#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "surfns/verification.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace surfns;
using std::numbers::pi;

TEST_CASE("default profile and its derivatives") {
  const RadialProfile p = RadialProfile::sine();
  CHECK(p.name == "sine");
  CHECK(p.r(0.0) == 1.0);
  CHECK(p.dr(0.0) == doctest::Approx(pi).epsilon(1e-15));
  CHECK(p.r(0.25) == doctest::Approx(1.5).epsilon(1e-15));
  // Central differences at 10 sample times.
  for (int i = 0; i < 10; ++i) {
    const double t = 0.05 + 0.1 * i;
    const double e = 1e-5;
    const double dr_fd = (p.r(t + e) - p.r(t - e)) / (2 * e);
    const double ddr_fd = (p.dr(t + e) - p.dr(t - e)) / (2 * e);
    CHECK(std::abs(dr_fd - p.dr(t)) <= 1e-6 * std::max(1.0, std::abs(p.dr(t))));
    CHECK(std::abs(ddr_fd - p.ddr(t)) <= 1e-6 * std::max(1.0, std::abs(p.ddr(t))));
  }
}

TEST_CASE("profile parsing and validation") {
  const RadialProfile s = RadialProfile::parse("sine:0.25:3");
  CHECK(s.r(0.5) == doctest::Approx(1.0 + 0.25 * std::sin(1.5)));
  const RadialProfile c = RadialProfile::parse("constant:2");
  CHECK(c.r(0.7) == 2.0);
  CHECK(c.dr(0.7) == 0.0);
  CHECK(RadialProfile::parse("constant").r(0.0) == 1.0);
  CHECK_THROWS_AS(RadialProfile::parse("cosine"), Error);
  CHECK_THROWS_AS(RadialProfile::parse("sine:1"), Error);
  CHECK_THROWS_AS(RadialProfile::parse("sine:a:b"), Error);
  CHECK_THROWS_AS(RadialProfile::parse("constant:-1"), Error);
  CHECK_NOTHROW(RadialProfile::sine().validate(1.0));
  CHECK_THROWS_AS(RadialProfile::sine(1.5, 2 * pi).validate(1.0), Error);
}

TEST_CASE("exact sphere solution") {
  SchemeParams params;
  const RadialProfile p = RadialProfile::sine();
  const ExactSphereSolution e0 = exact_sphere(0.0, p, params);
  CHECK(e0.radius == 1.0);
  CHECK(e0.pressure == doctest::Approx(2 * pi).epsilon(1e-14));
  CHECK(e0.divergence == doctest::Approx(2 * pi).epsilon(1e-14));
  CHECK(e0.pressure_shift == doctest::Approx(0.5 * pi * pi).epsilon(1e-14));
  CHECK(e0.pressure_shifted() == doctest::Approx(2 * pi + 0.5 * pi * pi).epsilon(1e-14));
  CHECK((e0.velocity(Vec3(0, 0, 2)) - Vec3(0, 0, pi)).norm() < 1e-14);

  const ExactSphereSolution e1 = exact_sphere(0.25, p, params);
  CHECK(e1.radius == doctest::Approx(1.5));
  CHECK(std::abs(e1.dr) < 1e-14);
  CHECK(e1.ddr == doctest::Approx(-2 * pi * pi).epsilon(1e-14));
  CHECK(e1.pressure == doctest::Approx(-1.5 * pi * pi).epsilon(1e-14));
  CHECK(e1.pressure == doctest::Approx(-14.804406601634037).epsilon(1e-14));
  CHECK(std::abs(e1.divergence) < 1e-14);
  CHECK(e1.velocity(Vec3(1, 2, 3)).norm() < 1e-13);

  for (double t : {0.0, 0.1, 0.33, 0.8}) CHECK(std::abs(exact_sphere(t, p, params).f_gamma) < 1e-14);

  // Parameter dependence: with rho = 0 only the viscous part remains.
  SchemeParams visc;
  visc.rho = 0.0;
  visc.mu = 3.0;
  CHECK(exact_sphere(0.0, p, visc).pressure == doctest::Approx(6.0 * pi));
  CHECK(exact_sphere(0.0, p, visc).pressure_shift == 0.0);
}

TEST_CASE("surface error") {
  const RadialProfile p = RadialProfile::sine();
  std::vector<TrajectoryFrame> traj;
  for (double t : {0.0, 0.1, 0.2}) traj.push_back({t, build_sphere(2, p.r(t)).nodes()});
  CHECK(surface_error_linf(traj, p) < 1e-14);
  traj[1].nodes[17] *= 1.0 + 0.01 / p.r(0.1);
  CHECK(surface_error_linf(traj, p) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(surface_error(build_sphere(1, 2.0), 2.0) < 1e-15);
  CHECK(surface_error(build_sphere(1, 2.0), 1.5) == doctest::Approx(0.5));
}

TEST_CASE("pressure error") {
  const auto mesh = build_sphere(2, 1.0);
  SchemeParams params;
  const ExactSphereSolution e = exact_sphere(0.0, RadialProfile::sine(), params);
  SimulationState s{0, 0.1, mesh, {}, {}, {}, {}, {}};
  s.P = {SpaceTag::p1_scalar, Vector::Constant(mesh.num_vertices(), e.pressure)};
  CHECK(pressure_error_l2(s, e, PressureShift::none) == 0.0);
  CHECK(pressure_error_l2(s, e, PressureShift::theta_shift) ==
        doctest::Approx(e.pressure_shift * std::sqrt(surface_area(mesh))).epsilon(1e-12));
  s.P.coeffs.array() += 0.3;
  CHECK(pressure_error_l2(s, e, PressureShift::none) ==
        doctest::Approx(0.3 * std::sqrt(surface_area(mesh))).epsilon(1e-12));
  s.P = NodeField::zeros(mesh, SpaceTag::p2_scalar);
  CHECK_THROWS_AS(pressure_error_l2(s, e, PressureShift::none), Error);
}

TEST_CASE("EOC from the published table") {
  const auto a = eoc({2.3137e-01, 7.0352e-02}, {4.0994e-01, 2.7688e-01});
  REQUIRE(a.size() == 1);
  CHECK(a[0] == doctest::Approx(3.0337).epsilon(1e-4));
  const auto b = eoc({1.0503e-03, 4.4005e-04}, {7.0041e-02, 5.2416e-02});
  CHECK(b[0] == doctest::Approx(3.0012).epsilon(1e-4));
  CHECK(eoc({1.0, 0.5, 0.25}, {0.4, 0.2, 0.1}) == std::vector<double>{1.0, 1.0});
  // Invariant under common scaling.
  const auto s = eoc({7.0 * 2.3137e-01, 7.0 * 7.0352e-02}, {0.1 * 4.0994e-01, 0.1 * 2.7688e-01});
  CHECK(s[0] == doctest::Approx(a[0]).epsilon(1e-12));
  CHECK_THROWS_AS(eoc({1.0, 0.0}, {1.0, 0.5}), Error);
  CHECK_THROWS_AS(eoc({1.0, 0.5}, {1.0, -0.5}), Error);
  CHECK_THROWS_AS(eoc({1.0}, {1.0}), Error);
  CHECK_THROWS_AS(eoc({1.0, 0.5}, {1.0}), Error);
}

TEST_CASE("coupled time step") {
  CHECK(coupled_time_step(0.5, 1.0) == 1.0 / 8.0);
  CHECK(coupled_time_step(0.3015, 1.0) == 1.0 / 37.0);
  CHECK(coupled_time_step(2.0, 1.0) == 1.0);
  const double tau = coupled_time_step(0.1525, 1.0);
  CHECK(tau <= std::pow(0.1525, 3));
  CHECK(std::abs(1.0 / tau - std::round(1.0 / tau)) < 1e-9);
}

TEST_CASE("interpolated exact fields satisfy the momentum balance in the limit") {
  // Residual of the momentum row in the dual H1 norm, tau = h^3 / 100. Only
  // the theta-shifted pressure is consistent with the theta = 1 scheme.
  const RadialProfile prof = RadialProfile::sine();
  const double t = 0.1;
  std::vector<double> shifted, raw, hs;
  for (int level = 1; level <= 3; ++level) {
    const auto mesh = build_sphere(level, prof.r(t));
    const double h = mesh_size(mesh);
    const double tau = 1e-2 * h * h * h;
    const SchemeParams p = manufactured_params(prof, 1.0, tau);
    const ExactSphereSolution now = exact_sphere(t, prof, p);
    const ExactSphereSolution next = exact_sphere(t + tau, prof, p);
    const NodeField um = interpolate(mesh, [&](const Vec3& z) { return now.velocity(z); });
    const NodeField up = interpolate(mesh, [&](const Vec3& z) { return next.velocity(z); });
    const SparseMatrix b = assemble_velocity_block(mesh, p.rho, tau, p.mu);
    const SparseMatrix c = assemble_pressure_coupling(mesh);
    const Vector rhs = assemble_momentum_rhs(mesh, um, nullptr, p.rho, tau, p.theta);
    Eigen::SimplicialLDLT<SparseMatrix> h1(
        SparseMatrix(assemble_stiffness(mesh) + assemble_mass(mesh, SpaceTag::p2_vector3)));
    const auto residual = [&](double pressure) {
      const Vector r = b * up.coeffs + c * Vector::Constant(mesh.num_vertices(), pressure) - rhs;
      return std::sqrt(r.dot(h1.solve(r)));
    };
    shifted.push_back(residual(next.pressure_shifted()));
    raw.push_back(residual(next.pressure));
    hs.push_back(h);
  }
  const auto rates = eoc(shifted, hs);
  CHECK(rates.back() >= 2.0);
  CHECK(raw.back() > 10.0 * shifted.back());
}

TEST_CASE("manufactured run bookkeeping") {
  const RadialProfile prof = RadialProfile::sine();
  const SchemeParams p = manufactured_params(prof, 0.1, 0.02);
  const ManufacturedRun run = run_manufactured(1, p, prof);
  CHECK(run.status == "ok");
  CHECK(run.level == 1);
  CHECK(run.triangles == 32);
  CHECK(run.steps == 5);
  CHECK(run.tau == 0.02);
  CHECK(run.h0 == doctest::Approx(mesh_size(build_sphere(1, 1.0))));
  CHECK(run.err_surface > 0.0);
  CHECK(std::isfinite(run.err_pressure_raw));
  CHECK(std::isfinite(run.err_pressure_shifted));

  SchemeParams plain = p;
  plain.manufactured = false;
  CHECK_THROWS_AS(run_manufactured(1, plain, prof), Error);
}

TEST_CASE("convergence experiment marks failed rows and continues") {
  ConvergenceSettings s;
  s.levels = {0, 1};
  s.final_time = 0.05;
  s.tau_power = 4.0;
  int seen = 0;
  s.on_run = [&](const ManufacturedRun&) { ++seen; };
  const ConvergenceTable ok = convergence_experiment(s, RadialProfile::sine());
  CHECK(seen == 2);
  REQUIRE(ok.rows.size() == 2);
  CHECK(ok.rows[0].run.status == "ok");
  CHECK(ok.rows[1].run.status == "ok");
  CHECK_FALSE(ok.rows[0].eoc_surface.has_value());
  CHECK(ok.rows[1].eoc_surface.has_value());
  CHECK(ok.rows[1].eoc_pressure.has_value());

  std::ostringstream csv;
  ok.write_csv(csv);
  std::istringstream lines(csv.str());
  std::string header, row0, row1, extra;
  std::getline(lines, header);
  CHECK(header ==
        "level,J,h0,tau,err_surface,eoc_surface,err_pressure_raw,err_pressure_shifted,"
        "eoc_pressure,pressure_mode,status");
  std::getline(lines, row0);
  std::getline(lines, row1);
  CHECK(row0.rfind("0,8,", 0) == 0);
  CHECK(row1.rfind("1,32,", 0) == 0);
  CHECK_FALSE(std::getline(lines, extra));
  // Round-trip formatting of the numeric fields.
  const std::string h0 = row1.substr(5, row1.find(',', 5) - 5);
  CHECK(std::stod(h0) == ok.rows[1].run.h0);

  s.stepper.solver.restart = 1;
  s.stepper.solver.max_iter = 1;
  const ConvergenceTable bad = convergence_experiment(s, RadialProfile::sine());
  REQUIRE(bad.rows.size() == 2);
  for (const auto& r : bad.rows) {
    CHECK(r.run.status.rfind("failed: iterative_failure", 0) == 0);
    CHECK_FALSE(r.eoc_surface.has_value());
  }

  s.levels = {1, 1};
  CHECK_THROWS_AS(convergence_experiment(s, RadialProfile::sine()), Error);
  s.levels = {1};
  CHECK_THROWS_AS(convergence_experiment(s, RadialProfile::sine()), Error);
}

TEST_CASE("verification suite passes") {
  for (const CheckResult& r : run_verification_suite()) {
    INFO(r.name << ": " << r.detail);
    CHECK(r.passed);
  }
}
