#pragma once

#include "surfns/assembly.hpp"

#include <Eigen/SparseCholesky>

#include <memory>

namespace surfns {

enum class PreconditionerKind {
  /// Sparse LU of [[B, C], [C^T, 0]].
  alpha_zero,
  /// Same, with tau A diag(M)^-1 A added to B; fewer iterations when the
  /// bending term dominates, at a denser factorization.
  lumped_bending,
};
const char* to_string(PreconditionerKind kind) noexcept;

struct SolverOptions {
  double tol = 1e-10;
  PreconditionerKind preconditioner = PreconditionerKind::alpha_zero;
  int restart = 50;
  int max_iter = 500;
  /// Admit rho = 0 in solve_full_direct.
  bool experimental_rho_zero = false;
  /// Upper bound on the unknown count of the monolithic direct solve.
  int direct_size_cap = 250000;
  /// Dense rank check is only attempted up to this many unknowns.
  int rank_check_cap = 4000;

  void validate() const;
};

enum class SolveMethod { schur_krylov, full_direct };
const char* to_string(SolveMethod method) noexcept;

struct SaddleSolveReport {
  int iterations = 0;
  double relative_residual = 0.0;
  double seconds = 0.0;
  SolveMethod method = SolveMethod::schur_krylov;
};

class IterativeFailure : public Error {
 public:
  IterativeFailure(const std::string& what, const SaddleSolveReport& report)
      : Error(ErrorKind::iterative_failure, what), report_(report) {}
  const SaddleSolveReport& report() const { return report_; }

 private:
  SaddleSolveReport report_;
};

/// Factorization of the SPD vector mass matrix.
class MassSolver {
 public:
  /// Throws ErrorKind::singular_mass if M is not numerically SPD.
  explicit MassSolver(const SparseMatrix& m);
  Vector solve(const Vector& v) const;
  int size() const { return size_; }

 private:
  Eigen::SimplicialLLT<SparseMatrix> llt_;
  int size_ = 0;
};

MassSolver factorize_spd(const SparseMatrix& m);

/// (B + alpha T) v with T = tau A M^-1 A, applied matrix-free.
Vector apply_schur_velocity_operator(const Vector& v, const BlockSaddleSystem& system,
                                     const MassSolver& mass);

struct SaddleSolution {
  Vector U;
  Vector P;
  SaddleSolveReport report;
};

struct GeometryUpdate {
  Vector kappa;
  Vector dX;
  Vector F;
};

struct FullSolution {
  Vector U, P, kappa, dX, F;
  SaddleSolveReport report;
};

/// Velocity-pressure solver for the Schur-reduced system. Restarted GMRES,
/// right-preconditioned by a sparse LU of the alpha = 0 saddle matrix. The
/// symbolic analysis is kept between calls while the sparsity pattern is
/// unchanged, so one instance should serve a whole run. It carries no other
/// state: a fresh instance gives bit-identical results.
class SaddleSolver {
 public:
  explicit SaddleSolver(SolverOptions options = {});
  ~SaddleSolver();
  SaddleSolver(SaddleSolver&&) noexcept;
  SaddleSolver& operator=(SaddleSolver&&) noexcept;

  SaddleSolution solve(const BlockSaddleSystem& system, const MassSolver& mass);
  const SolverOptions& options() const { return options_; }

 private:
  struct Preconditioner;
  SolverOptions options_;
  std::unique_ptr<Preconditioner> precond_;
};

SaddleSolution solve_saddle(const BlockSaddleSystem& system, const MassSolver& mass,
                            const SolverOptions& options = {});

/// kappa, dX and F from U by three mass solves.
GeometryUpdate recover_geometry(const Vector& U, const BlockSaddleSystem& system,
                                const MassSolver& mass);

/// The full five-block system, unknowns ordered (U, P, kappa, dX, F).
SparseMatrix full_system_matrix(const BlockSaddleSystem& system);
Vector full_system_rhs(const BlockSaddleSystem& system);

/// Numerical rank deficiency of the full system by dense SVD. Throws
/// ErrorKind::size_cap above options.rank_check_cap unknowns.
int full_system_rank_deficiency(const BlockSaddleSystem& system,
                                const SolverOptions& options = {});

/// Monolithic sparse LU of the five-block system.
FullSolution solve_full_direct(const BlockSaddleSystem& system,
                               const SolverOptions& options = {});

/// Relative residual of each block row of the full system.
struct ResidualCertificate {
  double momentum = 0.0;
  double divergence = 0.0;  // absolute |C^T U + source|
  double position = 0.0;
  double curvature = 0.0;
  double force = 0.0;

  double max_relative() const;
};

ResidualCertificate residual_certificate(const BlockSaddleSystem& system, const Vector& U,
                                         const Vector& P, const Vector& kappa,
                                         const Vector& dX, const Vector& F);

}  // namespace surfns
