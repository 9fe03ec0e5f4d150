#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "surfns/assembly.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <numbers>
#include <random>

using namespace surfns;
using std::numbers::pi;

namespace {

NodeField discrete_curvature(const SurfaceMesh& mesh) {
  const SparseMatrix m = assemble_mass(mesh, SpaceTag::p2_vector3);
  const SparseMatrix a = assemble_stiffness(mesh);
  Eigen::SimplicialLDLT<SparseMatrix> solver(m);
  NodeField k;
  k.space = SpaceTag::p2_vector3;
  k.coeffs = solver.solve(-(a * NodeField::coordinates(mesh).coeffs));
  return k;
}

// 1-D oracle for 1/2 int kappa^2 over the torus, by the periodic trapezoid rule
// in the tube angle.
double torus_bending_oracle(double big_r, double r) {
  const int n = 4000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double th = 2 * pi * i / n;
    const double k = 1.0 / r + std::cos(th) / (big_r + r * std::cos(th));
    sum += k * k * (big_r + r * std::cos(th)) * r;
  }
  return 0.5 * 2 * pi * sum * (2 * pi / n);
}

double rate(double e0, double e1, double h0, double h1) {
  return std::log(e0 / e1) / std::log(h0 / h1);
}

Mat3 rotation() {
  return Eigen::AngleAxisd(0.7, Vec3(1, 2, -0.5).normalized()).toRotationMatrix();
}

}  // namespace

TEST_CASE("frame invariants on a curved mesh") {
  const auto mesh = build_torus(0, 2.0, 1.0);
  const auto frames = element_frames(mesh, quadrature_rule(17));
  double worst = 0.0;
  for (const auto& ef : frames) {
    for (const auto& fp : ef.points) {
      worst = std::max(worst, std::abs(fp.normal.norm() - 1.0));
      worst = std::max(worst, (fp.projection * fp.projection - fp.projection).cwiseAbs().maxCoeff());
      worst = std::max(worst, (fp.projection - fp.projection.transpose()).cwiseAbs().maxCoeff());
      worst = std::max(worst, (fp.projection * fp.normal).norm());
      worst = std::max(worst, std::abs(fp.projection.trace() - 2.0));
      for (const auto& g : fp.grad) worst = std::max(worst, (fp.projection * g - g).norm());
      CHECK(fp.area_element > 0.0);
    }
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("flat triangle frames") {
  FlatComplex c;
  c.points = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  c.triangles = {{0, 1, 2}};
  const auto mesh = make_p2_mesh(c, 0, [](const Vec3& p) { return p; });
  const auto frames = element_frames(mesh, quadrature_rule(5));
  for (const auto& fp : frames[0].points) {
    CHECK((fp.normal - Vec3(0, 0, 1)).norm() < 1e-15);
    CHECK((fp.projection - Vec3(1, 1, 0).asDiagonal().toDenseMatrix()).norm() < 1e-15);
  }
  // P1 mass of the unit right triangle.
  const SparseMatrix m = assemble_mass(mesh, SpaceTag::p1_scalar);
  Eigen::Matrix3d expected;
  expected << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  expected *= 0.5 / 12.0;
  CHECK((Eigen::MatrixXd(m) - expected).norm() < 1e-15);
}

TEST_CASE("identity and linear fields") {
  const auto mesh = build_sphere(1, 1.3);
  const auto frames = element_frames(mesh, quadrature_rule(17));
  const auto id = NodeField::coordinates(mesh);
  const Vec3 a(0.3, -1.0, 2.0);
  const auto lin = interpolate(mesh, SpaceTag::p2_scalar, [&](const Vec3& z) { return a.dot(z); });
  const auto one = interpolate(mesh, SpaceTag::p2_scalar, [](const Vec3&) { return 4.0; });
  const auto vals = eval_with_surface_gradient(id, mesh, frames);
  const auto lvals = eval_scalar_with_surface_gradient(lin, mesh, frames);
  const auto cvals = eval_scalar_with_surface_gradient(one, mesh, frames);
  double worst = 0.0;
  for (std::size_t j = 0; j < frames.size(); ++j) {
    for (std::size_t q = 0; q < frames[j].points.size(); ++q) {
      const auto& fp = frames[j].points[q];
      worst = std::max(worst, (vals[j][q].jacobian - fp.projection).cwiseAbs().maxCoeff());
      worst = std::max(worst, std::abs(vals[j][q].divergence - 2.0));
      worst = std::max(worst, (lvals[j][q].gradient - fp.projection * a).norm());
      worst = std::max(worst, cvals[j][q].gradient.norm());
    }
  }
  CHECK(worst < 1e-12);
  NodeField wrong = NodeField::zeros(build_sphere(2, 1.0), SpaceTag::p2_vector3);
  CHECK_THROWS_AS(eval_with_surface_gradient(wrong, mesh, frames), Error);
}

TEST_CASE("deformation tensor") {
  CHECK(deformation_tensor(Mat3::Zero(), Mat3::Identity()).norm() == 0.0);
  const auto mesh = build_sphere(2, 1.0);
  const auto frames = element_frames(mesh, quadrature_rule(17));
  const auto killing = interpolate(mesh, [](const Vec3& z) { return Vec3(-z.y(), z.x(), 0.0); });
  const auto kv = eval_with_surface_gradient(killing, mesh, frames);
  double worst = 0.0;
  for (std::size_t j = 0; j < frames.size(); ++j)
    for (std::size_t q = 0; q < frames[j].points.size(); ++q) {
      const Mat3 d = deformation_tensor(kv[j][q].jacobian, frames[j].points[q].projection);
      worst = std::max(worst, d.cwiseAbs().maxCoeff());
      CHECK((d - d.transpose()).norm() < 1e-14);
    }
  CHECK(worst < 1e-12);

  // Normal field u = 0.5 nu: D -> (0.5 / r) P, the sphere Weingarten map.
  double prev_err = 0.0, prev_h = 0.0;
  for (int level = 1; level <= 3; ++level) {
    const auto m = build_sphere(level, 1.0);
    const auto fr = element_frames(m, quadrature_rule(17));
    const auto u = interpolate(m, [](const Vec3& z) { Vec3 n = z.normalized(); return Vec3(0.5 * n); });
    const auto uv = eval_with_surface_gradient(u, m, fr);
    double err = 0.0;
    for (std::size_t j = 0; j < fr.size(); ++j)
      for (std::size_t q = 0; q < fr[j].points.size(); ++q) {
        const auto& fp = fr[j].points[q];
        const Vec3 nu = fp.position.normalized();
        const Mat3 pe = Mat3::Identity() - nu * nu.transpose();
        err = std::max(err, (deformation_tensor(uv[j][q].jacobian, fp.projection) - 0.5 * pe).norm());
      }
    const double h = mesh_size(m);
    if (level > 1) CHECK(rate(prev_err, err, prev_h, h) > 1.0);
    prev_err = err;
    prev_h = h;
  }
  CHECK(prev_err < 2e-2);
}

TEST_CASE("normals converge to the analytic normal") {
  double prev_err = 0.0, prev_h = 0.0;
  for (int level = 1; level <= 3; ++level) {
    const auto m = build_sphere(level, 1.0);
    double err = 0.0;
    for (const auto& ef : element_frames(m, quadrature_rule(17)))
      for (const auto& fp : ef.points) err = std::max(err, (fp.normal - fp.position.normalized()).norm());
    const double h = mesh_size(m);
    if (level > 1) CHECK(rate(prev_err, err, prev_h, h) >= 1.8);
    prev_err = err;
    prev_h = h;
  }
}

TEST_CASE("frames are equivariant under rigid motions") {
  const auto mesh = build_torus(0, 2.0, 1.0);
  const Mat3 rot = rotation();
  const Vec3 shift(0.5, -1.0, 3.0);
  auto nodes = mesh.nodes();
  for (auto& p : nodes) p = rot * p + shift;
  const auto moved = mesh.with_nodes(nodes);
  const auto f0 = element_frames(mesh, quadrature_rule(17));
  const auto f1 = element_frames(moved, quadrature_rule(17));
  double worst = 0.0;
  for (std::size_t j = 0; j < f0.size(); ++j)
    for (std::size_t q = 0; q < f0[j].points.size(); ++q) {
      const auto& a = f0[j].points[q];
      const auto& b = f1[j].points[q];
      worst = std::max(worst, (rot * a.normal - b.normal).norm());
      worst = std::max(worst, (rot * a.projection * rot.transpose() - b.projection).norm());
      worst = std::max(worst, std::abs(a.weight - b.weight) / a.weight);
      for (int k = 0; k < 6; ++k) worst = std::max(worst, (rot * a.grad[k] - b.grad[k]).norm());
    }
  CHECK(worst < 1e-12);
}

TEST_CASE("area and volume converge with order at least 3") {
  struct Probe {
    std::function<SurfaceMesh(int)> build;
    double area, volume;
  };
  const Probe probes[] = {
      {[](int l) { return build_sphere(l, 1.0); }, 4 * pi, 4 * pi / 3},
      {[](int l) { return build_torus(l, 2.0, 1.0); }, 8 * pi * pi, 4 * pi * pi},
  };
  for (const auto& p : probes) {
    double ea0 = 0, ev0 = 0, h0 = 0;
    for (int level = 1; level <= 3; ++level) {
      const auto m = p.build(level);
      const double ea = std::abs(surface_area(m) - p.area);
      const double ev = std::abs(enclosed_volume(m) - p.volume);
      const double h = mesh_size(m);
      if (level > 1) {
        CHECK(rate(ea0, ea, h0, h) >= 3.0);
        CHECK(rate(ev0, ev, h0, h) >= 3.0);
      }
      ea0 = ea;
      ev0 = ev;
      h0 = h;
    }
  }
}

TEST_CASE("bending energies of the discrete curvature") {
  for (double r : {0.5, 1.0, 3.0}) {
    const auto m = build_sphere(3, r);
    CHECK(bending_energy(m, discrete_curvature(m)) == doctest::Approx(8 * pi).epsilon(1e-3));
  }
  const auto zero = NodeField::zeros(build_sphere(1, 1.0), SpaceTag::p2_vector3);
  CHECK(bending_energy(build_sphere(1, 1.0), zero) == 0.0);

  const double oracle = torus_bending_oracle(2.0, 1.0);
  CHECK(oracle == doctest::Approx(8 * pi * pi / std::sqrt(3.0)).epsilon(1e-12));
  const auto t = build_torus(2, 2.0, 1.0);
  CHECK(bending_energy(t, discrete_curvature(t)) == doctest::Approx(oracle).epsilon(1e-3));
}

TEST_CASE("curvature vector of a sphere points inward with magnitude 2/r") {
  // L2 error converges at order 2; the nodal maximum lags slightly at the
  // valence-4 vertices of the octahedron family.
  double prev_max = 0.0, prev_l2 = 0.0, prev_h = 0.0;
  for (int level = 1; level <= 3; ++level) {
    const auto m = build_sphere(level, 1.0);
    const auto k = discrete_curvature(m);
    double err = 0.0;
    for (int n = 0; n < m.num_nodes(); ++n)
      err = std::max(err, std::abs(k.node_vector(n).dot(m.node(n).normalized()) + 2.0));
    const auto exact = interpolate(m, [](const Vec3& z) { return Vec3(-2.0 * z.normalized()); });
    const Vector d = k.coeffs - exact.coeffs;
    const double l2 = std::sqrt(d.dot(assemble_mass(m, SpaceTag::p2_vector3) * d));
    const double h = mesh_size(m);
    if (level > 1) {
      CHECK(rate(prev_max, err, prev_h, h) >= 1.8);
      CHECK(rate(prev_l2, l2, prev_h, h) >= 1.95);
    }
    prev_max = err;
    prev_l2 = l2;
    prev_h = h;
  }
}

TEST_CASE("analytic surfaces") {
  const auto s = AnalyticSurface::sphere(2.0);
  const Vec3 p(0.0, 2.0, 0.0);
  CHECK(s.mean_curvature(p) == doctest::Approx(-1.0));
  CHECK(s.gauss_curvature(p) == doctest::Approx(0.25));
  const auto t = AnalyticSurface::torus(2.0, 1.0);
  const Vec3 outer(3.0, 0.0, 0.0), inner(1.0, 0.0, 0.0);
  CHECK(t.mean_curvature(outer) == doctest::Approx(-(1.0 + 1.0 / 3.0)));
  CHECK(t.gauss_curvature(outer) == doctest::Approx(1.0 / 3.0));
  CHECK(t.gauss_curvature(inner) == doctest::Approx(-1.0));
  CHECK((t.normal(outer) - Vec3(1, 0, 0)).norm() < 1e-15);
  CHECK((t.normal(inner) - Vec3(-1, 0, 0)).norm() < 1e-15);
  // Gauss-relation identity holds exactly for the analytic data.
  for (const Vec3& q : {Vec3(2.5, 0.3, 0.8), Vec3(-1.2, 0.7, -0.4)}) {
    const Vec3 z = t.closest_point(q);
    const Vec3 n = t.normal(z);
    const Mat3 pr = Mat3::Identity() - n * n.transpose();
    const Mat3 w = t.shape_operator(z);
    CHECK((t.mean_curvature(z) * w + w * w + t.gauss_curvature(z) * pr).norm() < 1e-13);
    CHECK(w.trace() == doctest::Approx(-t.mean_curvature(z)));
  }
  // Finite-difference check of the curvature gradient along the surface.
  const Vec3 z = t.closest_point(Vec3(2.2, 0.4, 0.7));
  const Vec3 dir = (Mat3::Identity() - t.normal(z) * t.normal(z).transpose()) * Vec3(0.3, -0.2, 0.9);
  const double eps = 1e-6;
  const double fd = (t.mean_curvature(t.closest_point(z + eps * dir)) -
                     t.mean_curvature(t.closest_point(z - eps * dir))) / (2 * eps);
  CHECK(fd == doctest::Approx(t.mean_curvature_gradient(z).dot(dir)).epsilon(1e-6));
}

TEST_CASE("identity residuals vanish under refinement") {
  // Sphere: the interpolated normal is id/r, so the Gauss relation holds to
  // round-off on every level.
  for (int level = 0; level <= 2; ++level)
    CHECK(identity_residuals(build_sphere(level, 1.0), AnalyticSurface::sphere(1.0)).gauss_relation <
          1e-13);
  double s0 = 0, g0 = 0, l0 = 0, h0 = 0, hs0 = 0;
  for (int level = 1; level <= 2; ++level) {
    const auto sm = build_sphere(level + 1, 1.0);
    const auto tm = build_torus(level, 2.0, 1.0);
    const auto rs = identity_residuals(sm, AnalyticSurface::sphere(1.0));
    const auto rt = identity_residuals(tm, AnalyticSurface::torus(2.0, 1.0));
    const double h = mesh_size(tm), hs = mesh_size(sm);
    if (level > 1) {
      CHECK(rate(s0, rs.normal_laplacian, hs0, hs) >= 1.0);
      CHECK(rate(g0, rt.gauss_relation, h0, h) >= 1.0);
      CHECK(rate(l0, rt.normal_laplacian, h0, h) >= 1.0);
    }
    s0 = rs.normal_laplacian;
    g0 = rt.gauss_relation;
    l0 = rt.normal_laplacian;
    h0 = h;
    hs0 = hs;
  }
}

TEST_CASE("integrals are invariant under element permutation") {
  const auto mesh = build_sphere(2, 1.0);
  auto conn = std::make_shared<Connectivity>(*mesh.connectivity());
  std::mt19937 rng(7);
  std::shuffle(conn->triangles.begin(), conn->triangles.end(), rng);
  const SurfaceMesh shuffled(conn, mesh.nodes(), mesh.level());
  CHECK(surface_area(shuffled) == doctest::Approx(surface_area(mesh)).epsilon(1e-12));
  CHECK(enclosed_volume(shuffled) == doctest::Approx(enclosed_volume(mesh)).epsilon(1e-12));
  const auto k = discrete_curvature(mesh);
  CHECK(bending_energy(shuffled, k) == doctest::Approx(bending_energy(mesh, k)).epsilon(1e-12));
}
