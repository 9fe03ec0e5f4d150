#include "surfns/assembly.hpp"

#include <cmath>

namespace surfns {

void SchemeParams::validate() const {
  require(rho >= 0.0, ErrorKind::argument, "rho must be >= 0");
  require(mu >= 0.0, ErrorKind::argument, "mu must be >= 0");
  require(alpha >= 0.0, ErrorKind::argument, "alpha must be >= 0");
  require(theta == 0 || theta == 1, ErrorKind::argument, "theta must be 0 or 1");
  require(tau > 0.0, ErrorKind::argument, "tau must be > 0");
  require(final_time > 0.0, ErrorKind::argument, "final time must be > 0");
  require(!manufactured || static_cast<bool>(divergence), ErrorKind::argument,
          "manufactured mode needs a divergence profile b(t)");
}

namespace {

SparseMatrix from_triplets(int rows, int cols, const std::vector<Triplet>& t) {
  SparseMatrix m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

/// S (K x K) -> S kron I3 with interleaved components.
SparseMatrix expand_vector(const SparseMatrix& s) {
  std::vector<Triplet> t;
  t.reserve(3 * s.nonZeros());
  for (int c = 0; c < s.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(s, c); it; ++it)
      for (int i = 0; i < 3; ++i)
        t.emplace_back(3 * static_cast<int>(it.row()) + i, 3 * c + i, it.value());
  return from_triplets(3 * static_cast<int>(s.rows()), 3 * static_cast<int>(s.cols()), t);
}

// Element kernels. Each adds the contribution of one quadrature point.

void add_scalar_mass(const FramePoint& fp, const std::array<int, 6>& tri,
                     std::vector<Triplet>& t) {
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b)
      t.emplace_back(tri[a], tri[b], fp.weight * fp.phi[a] * fp.phi[b]);
}

void add_scalar_stiffness(const FramePoint& fp, const std::array<int, 6>& tri,
                          std::vector<Triplet>& t) {
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b)
      t.emplace_back(tri[a], tri[b], fp.weight * fp.grad[a].dot(fp.grad[b]));
}

// <D(chi_a e_i), D(chi_b e_j)> = 1/2 [P_ij (g_a . g_b) + g_b[i] g_a[j]]
void add_viscous(const FramePoint& fp, const std::array<int, 6>& tri,
                 std::vector<Triplet>& t) {
  const Mat3& p = fp.projection;
  for (int a = 0; a < 6; ++a) {
    for (int b = 0; b < 6; ++b) {
      const double gg = fp.grad[a].dot(fp.grad[b]);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          t.emplace_back(3 * tri[a] + i, 3 * tri[b] + j,
                         0.5 * fp.weight * (p(i, j) * gg + fp.grad[b][i] * fp.grad[a][j]));
    }
  }
}

void add_pressure_coupling(const FramePoint& fp, const std::array<int, 6>& tri,
                           std::vector<Triplet>& t) {
  for (int a = 0; a < 6; ++a)
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 3; ++i)
        t.emplace_back(3 * tri[a] + i, tri[c], -fp.weight * fp.psi[c] * fp.grad[a][i]);
}

void add_convective(const FramePoint& fp, const std::array<int, 6>& tri,
                    const NodeField& u, Vector& n) {
  const VectorPointValue v = eval_vector(u, tri, fp);
  for (int a = 0; a < 6; ++a)
    n.segment<3>(3 * tri[a]) += (fp.weight * v.divergence * fp.phi[a]) * v.value;
}

void add_curvature_explicit(const FramePoint& fp, const std::array<int, 6>& tri,
                            const NodeField& kappa, Vector& e) {
  const VectorPointValue k = eval_vector(kappa, tri, fp);
  const double scalar = k.divergence + 0.5 * k.value.squaredNorm();
  const Mat3 sym = fp.projection * (k.jacobian + k.jacobian.transpose());
  for (int a = 0; a < 6; ++a)
    e.segment<3>(3 * tri[a]) += fp.weight * (scalar * fp.grad[a] - sym * fp.grad[a]);
}

void add_divergence_source(const FramePoint& fp, const std::array<int, 6>& tri,
                           double b_value, Vector& s) {
  for (int c = 0; c < 3; ++c) s[tri[c]] += fp.weight * b_value * fp.psi[c];
}

template <class F>
void for_each_point(const SurfaceMesh& mesh, int degree, F&& f) {
  FrameBuilder builder(degree);
  ElementFrame frame;
  for (int j = 0; j < mesh.num_triangles(); ++j) {
    builder.compute(mesh, j, frame);
    const auto& tri = mesh.triangle(j);
    for (const auto& fp : frame.points) f(fp, tri);
  }
}

}  // namespace

SparseMatrix assemble_mass(const SurfaceMesh& mesh, SpaceTag space, int degree) {
  std::vector<Triplet> t;
  if (space == SpaceTag::p1_scalar) {
    for_each_point(mesh, degree, [&](const FramePoint& fp, const std::array<int, 6>& tri) {
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          t.emplace_back(tri[a], tri[b], fp.weight * fp.psi[a] * fp.psi[b]);
    });
    return from_triplets(mesh.num_vertices(), mesh.num_vertices(), t);
  }
  for_each_point(mesh, degree, [&](const FramePoint& fp, const std::array<int, 6>& tri) {
    add_scalar_mass(fp, tri, t);
  });
  SparseMatrix s = from_triplets(mesh.num_nodes(), mesh.num_nodes(), t);
  return space == SpaceTag::p2_vector3 ? expand_vector(s) : s;
}

SparseMatrix assemble_scalar_stiffness(const SurfaceMesh& mesh, int degree) {
  std::vector<Triplet> t;
  for_each_point(mesh, degree, [&](const FramePoint& fp, const std::array<int, 6>& tri) {
    add_scalar_stiffness(fp, tri, t);
  });
  return from_triplets(mesh.num_nodes(), mesh.num_nodes(), t);
}

SparseMatrix assemble_stiffness(const SurfaceMesh& mesh, int degree) {
  return expand_vector(assemble_scalar_stiffness(mesh, degree));
}

SparseMatrix assemble_viscous(const SurfaceMesh& mesh, int degree) {
  std::vector<Triplet> t;
  for_each_point(mesh, degree, [&](const FramePoint& fp, const std::array<int, 6>& tri) {
    add_viscous(fp, tri, t);
  });
  return from_triplets(3 * mesh.num_nodes(), 3 * mesh.num_nodes(), t);
}

SparseMatrix assemble_velocity_block(const SurfaceMesh& mesh, double rho, double tau,
                                     double mu, int degree) {
  require(rho >= 0.0 && mu >= 0.0, ErrorKind::argument,
          "assemble_velocity_block: rho and mu must be >= 0");
  require(tau > 0.0, ErrorKind::argument, "assemble_velocity_block: tau must be > 0");
  const SparseMatrix m = assemble_mass(mesh, SpaceTag::p2_vector3, degree);
  if (mu == 0.0) return SparseMatrix((rho / tau) * m);
  return SparseMatrix((rho / tau) * m + (2.0 * mu) * assemble_viscous(mesh, degree));
}

SparseMatrix assemble_pressure_coupling(const SurfaceMesh& mesh, int degree) {
  std::vector<Triplet> t;
  for_each_point(mesh, degree, [&](const FramePoint& fp, const std::array<int, 6>& tri) {
    add_pressure_coupling(fp, tri, t);
  });
  return from_triplets(3 * mesh.num_nodes(), mesh.num_vertices(), t);
}

Vector assemble_momentum_rhs(const SurfaceMesh& mesh, const NodeField& u_prev,
                             const NodeField* forcing, double rho, double tau, int theta,
                             int degree) {
  require_attached(u_prev, mesh, "assemble_momentum_rhs");
  require(u_prev.space == SpaceTag::p2_vector3, ErrorKind::structural,
          "assemble_momentum_rhs: U must be a P2 vector field");
  const SparseMatrix m = assemble_mass(mesh, SpaceTag::p2_vector3, degree);
  Vector b = (rho / tau) * (m * u_prev.coeffs);
  if (forcing != nullptr) {
    require_attached(*forcing, mesh, "assemble_momentum_rhs (forcing)");
    b += m * forcing->coeffs;
  }
  if (theta != 0 && rho != 0.0) {
    Vector n = Vector::Zero(b.size());
    for_each_point(mesh, degree, [&](const FramePoint& fp, const std::array<int, 6>& tri) {
      add_convective(fp, tri, u_prev, n);
    });
    b -= (0.5 * theta * rho) * n;
  }
  return b;
}

Vector assemble_curvature_explicit(const SurfaceMesh& mesh, const NodeField& kappa,
                                   int degree) {
  require_attached(kappa, mesh, "assemble_curvature_explicit");
  require(kappa.space == SpaceTag::p2_vector3, ErrorKind::structural,
          "assemble_curvature_explicit: kappa must be a P2 vector field");
  Vector e = Vector::Zero(3 * mesh.num_nodes());
  for_each_point(mesh, degree, [&](const FramePoint& fp, const std::array<int, 6>& tri) {
    add_curvature_explicit(fp, tri, kappa, e);
  });
  return e;
}

Vector assemble_divergence_source(const SurfaceMesh& mesh, const SchemeParams& params,
                                  double b_value, int degree) {
  require(params.manufactured, ErrorKind::usage,
          "assemble_divergence_source: only available in manufactured mode");
  Vector s = Vector::Zero(mesh.num_vertices());
  for_each_point(mesh, degree, [&](const FramePoint& fp, const std::array<int, 6>& tri) {
    add_divergence_source(fp, tri, b_value, s);
  });
  return s;
}

BlockSaddleSystem assemble_system(const SurfaceMesh& mesh, const NodeField& u_prev,
                                  const NodeField& kappa_prev, const SchemeParams& params,
                                  double t, int degree) {
  params.validate();
  require_attached(u_prev, mesh, "assemble_system (U)");
  require_attached(kappa_prev, mesh, "assemble_system (kappa)");
  require(u_prev.space == SpaceTag::p2_vector3 && kappa_prev.space == SpaceTag::p2_vector3,
          ErrorKind::structural, "assemble_system: U and kappa must be P2 vector fields");
  const int k = mesh.num_nodes();
  const int kp = mesh.num_vertices();
  const double b_value = params.manufactured ? params.divergence(t) : 0.0;
  const bool convective = params.theta != 0 && params.rho != 0.0;

  std::vector<Triplet> mass_t, stiff_t, visc_t, coup_t;
  const std::size_t nq = quadrature_rule(degree).size();
  mass_t.reserve(36 * nq * mesh.num_triangles() / 4);
  stiff_t.reserve(36 * nq * mesh.num_triangles() / 4);
  Vector n = Vector::Zero(3 * k);
  Vector e = Vector::Zero(3 * k);
  Vector s = Vector::Zero(kp);

  // Element-local accumulation keeps the triplet count at one entry per
  // local matrix entry instead of one per quadrature point.
  FrameBuilder builder(degree);
  ElementFrame frame;
  Eigen::Matrix<double, 6, 6> lm, la;
  Eigen::Matrix<double, 18, 18> ld;
  Eigen::Matrix<double, 18, 3> lc;
  for (int j = 0; j < mesh.num_triangles(); ++j) {
    builder.compute(mesh, j, frame);
    const auto& tri = mesh.triangle(j);
    lm.setZero();
    la.setZero();
    ld.setZero();
    lc.setZero();
    for (const auto& fp : frame.points) {
      const Mat3& p = fp.projection;
      for (int a = 0; a < 6; ++a) {
        for (int b = 0; b < 6; ++b) {
          const double gg = fp.grad[a].dot(fp.grad[b]);
          lm(a, b) += fp.weight * fp.phi[a] * fp.phi[b];
          la(a, b) += fp.weight * gg;
          for (int i = 0; i < 3; ++i)
            for (int jj = 0; jj < 3; ++jj)
              ld(3 * a + i, 3 * b + jj) +=
                  0.5 * fp.weight * (p(i, jj) * gg + fp.grad[b][i] * fp.grad[a][jj]);
        }
        for (int c = 0; c < 3; ++c)
          lc.block<3, 1>(3 * a, c) -= (fp.weight * fp.psi[c]) * fp.grad[a];
      }
      if (convective) add_convective(fp, tri, u_prev, n);
      add_curvature_explicit(fp, tri, kappa_prev, e);
      if (params.manufactured) add_divergence_source(fp, tri, b_value, s);
    }
    for (int a = 0; a < 6; ++a) {
      for (int b = 0; b < 6; ++b) {
        mass_t.emplace_back(tri[a], tri[b], lm(a, b));
        stiff_t.emplace_back(tri[a], tri[b], la(a, b));
        for (int i = 0; i < 3; ++i)
          for (int jj = 0; jj < 3; ++jj)
            visc_t.emplace_back(3 * tri[a] + i, 3 * tri[b] + jj, ld(3 * a + i, 3 * b + jj));
      }
      for (int c = 0; c < 3; ++c)
        for (int i = 0; i < 3; ++i)
          coup_t.emplace_back(3 * tri[a] + i, tri[c], lc(3 * a + i, c));
    }
  }

  BlockSaddleSystem sys;
  sys.rho = params.rho;
  sys.mu = params.mu;
  sys.alpha = params.alpha;
  sys.tau = params.tau;
  sys.theta = params.theta;
  sys.M = expand_vector(from_triplets(k, k, mass_t));
  sys.A = expand_vector(from_triplets(k, k, stiff_t));
  const SparseMatrix d = from_triplets(3 * k, 3 * k, visc_t);
  sys.B = (params.rho / params.tau) * sys.M + (2.0 * params.mu) * d;
  sys.C = from_triplets(3 * k, kp, coup_t);
  sys.X = NodeField::coordinates(mesh).coeffs;

  sys.rhs_momentum = (params.rho / params.tau) * (sys.M * u_prev.coeffs);
  if (params.forcing) {
    const NodeField g = interpolate(
        mesh, [&](const Vec3& z) -> Vec3 { return params.forcing(z, t); });
    sys.rhs_momentum += sys.M * g.coeffs;
  }
  if (convective) sys.rhs_momentum -= (0.5 * params.theta * params.rho) * n;
  sys.rhs_curvature_explicit = std::move(e);
  sys.divergence_source = std::move(s);
  return sys;
}

}  // namespace surfns
