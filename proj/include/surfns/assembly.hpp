#pragma once

#include "surfns/surface_calculus.hpp"

#include <functional>
#include <optional>

namespace surfns {

/// Physical and discretisation parameters of the scheme.
struct SchemeParams {
  double rho = 1.0;    // density
  double mu = 1.0;     // shear viscosity
  double alpha = 1.0;  // bending coefficient
  int theta = 1;       // convective stabilisation switch, 0 or 1
  double tau = 1e-3;
  double final_time = 1.0;
  /// Body force g(z, t); empty means g = 0.
  std::function<Vec3(const Vec3&, double)> forcing;
  /// Replaces the incompressibility right-hand side with a prescribed,
  /// spatially constant divergence b(t).
  bool manufactured = false;
  std::function<double(double)> divergence;

  void validate() const;
};

/// Blocks of the per-step linear system in the unknowns
/// (U, P, kappa, dX, F), all on the current surface.
struct BlockSaddleSystem {
  SparseMatrix M;   // vector P2 mass, 3K x 3K
  SparseMatrix A;   // vector P2 stiffness
  SparseMatrix B;   // (rho/tau) M + 2 mu D
  SparseMatrix C;   // C_{(k,i),l} = -<psi_l, div_s(chi_k e_i)>, 3K x K_p
  Vector rhs_momentum;          // b
  Vector rhs_curvature_explicit;  // explicit part of the force equation
  Vector divergence_source;     // <b(t), psi_l>; zero unless manufactured
  Vector X;                     // current node coordinates (interleaved)
  double rho = 0.0, mu = 0.0, alpha = 0.0, tau = 0.0;
  int theta = 1;

  /// Mass matrix pairing F with velocity test functions; identical to M.
  const SparseMatrix& mass_fu() const { return M; }
  /// Right-hand side of the divergence row: C^T U = -divergence_source.
  Vector divergence_rhs() const { return -divergence_source; }

  int velocity_dofs() const { return static_cast<int>(M.rows()); }
  int pressure_dofs() const { return static_cast<int>(C.cols()); }
};

/// Scalar (P1 or P2) mass, or the block-diagonal vector P2 mass.
SparseMatrix assemble_mass(const SurfaceMesh& mesh, SpaceTag space,
                           int degree = kDefaultQuadratureDegree);
SparseMatrix assemble_scalar_stiffness(const SurfaceMesh& mesh,
                                       int degree = kDefaultQuadratureDegree);
/// Vector P2 stiffness A.
SparseMatrix assemble_stiffness(const SurfaceMesh& mesh,
                                int degree = kDefaultQuadratureDegree);
/// D_{(k,i),(l,j)} = <D_s(chi_k e_i), D_s(chi_l e_j)>.
SparseMatrix assemble_viscous(const SurfaceMesh& mesh,
                              int degree = kDefaultQuadratureDegree);
SparseMatrix assemble_velocity_block(const SurfaceMesh& mesh, double rho, double tau,
                                     double mu, int degree = kDefaultQuadratureDegree);
SparseMatrix assemble_pressure_coupling(const SurfaceMesh& mesh,
                                        int degree = kDefaultQuadratureDegree);

/// b = (rho/tau) M U + M g_I - (theta rho / 2) N(U), with
/// N(U)_{(k,i)} = <div_s U, U_i chi_k>. `forcing` may be null.
Vector assemble_momentum_rhs(const SurfaceMesh& mesh, const NodeField& u_prev,
                             const NodeField* forcing, double rho, double tau,
                             int theta, int degree = kDefaultQuadratureDegree);

/// Explicit curvature terms with test function chi_k e_i:
/// <div kappa, div chi> + 1/2 <|kappa|^2 grad id, grad chi>
///   - 2 <(grad kappa)^T, D(chi) (grad id)^T>.
Vector assemble_curvature_explicit(const SurfaceMesh& mesh, const NodeField& kappa,
                                   int degree = kDefaultQuadratureDegree);

/// <b_value, psi_l>. Throws ErrorKind::usage unless params.manufactured.
Vector assemble_divergence_source(const SurfaceMesh& mesh, const SchemeParams& params,
                                  double b_value, int degree = kDefaultQuadratureDegree);

/// One element sweep producing every block for the step at time t on `mesh`.
BlockSaddleSystem assemble_system(const SurfaceMesh& mesh, const NodeField& u_prev,
                                  const NodeField& kappa_prev, const SchemeParams& params,
                                  double t, int degree = kDefaultQuadratureDegree);

}  // namespace surfns
