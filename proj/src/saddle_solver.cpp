#include "surfns/saddle_solver.hpp"

#include <Eigen/SVD>
#include <Eigen/UmfPackSupport>

#include <chrono>
#include <cmath>

namespace surfns {

void SolverOptions::validate() const {
  require(tol > 0.0, ErrorKind::argument, "solver tol must be > 0");
  require(restart >= 1, ErrorKind::argument, "solver restart must be >= 1");
  require(max_iter >= 1, ErrorKind::argument, "solver max_iter must be >= 1");
  require(direct_size_cap >= 1, ErrorKind::argument, "direct_size_cap must be >= 1");
}

const char* to_string(PreconditionerKind kind) noexcept {
  return kind == PreconditionerKind::alpha_zero ? "alpha_zero" : "lumped_bending";
}

const char* to_string(SolveMethod method) noexcept {
  return method == SolveMethod::schur_krylov ? "schur_krylov" : "full_direct";
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void append_block(std::vector<Triplet>& t, const SparseMatrix& m, int row0, int col0,
                  double scale) {
  for (int c = 0; c < m.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(m, c); it; ++it)
      t.emplace_back(row0 + static_cast<int>(it.row()), col0 + c, scale * it.value());
}

void append_transpose(std::vector<Triplet>& t, const SparseMatrix& m, int row0, int col0) {
  for (int c = 0; c < m.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(m, c); it; ++it)
      t.emplace_back(row0 + c, col0 + static_cast<int>(it.row()), it.value());
}

SparseMatrix preconditioner_matrix(const BlockSaddleSystem& s, PreconditionerKind kind) {
  const int n = s.velocity_dofs();
  const int np = s.pressure_dofs();
  std::vector<Triplet> t;
  t.reserve(s.B.nonZeros() + 2 * s.C.nonZeros());
  append_block(t, s.B, 0, 0, 1.0);
  if (kind == PreconditionerKind::lumped_bending && s.alpha != 0.0) {
    // tau A D^-1 A with D = diag(M), spectrally equivalent to T.
    const Vector dinv = s.M.diagonal().cwiseInverse();
    const SparseMatrix t_approx = (s.alpha * s.tau) * (s.A * dinv.asDiagonal() * s.A);
    append_block(t, t_approx, 0, 0, 1.0);
  }
  append_block(t, s.C, 0, n, 1.0);
  append_transpose(t, s.C, n, 0);
  SparseMatrix k(n + np, n + np);
  k.setFromTriplets(t.begin(), t.end());
  return k;
}

/// c = e - A M^-1 A X.
Vector schur_rhs_correction(const BlockSaddleSystem& s, const MassSolver& mass) {
  return s.rhs_curvature_explicit - s.A * mass.solve(s.A * s.X);
}

}  // namespace

MassSolver::MassSolver(const SparseMatrix& m) : size_(static_cast<int>(m.rows())) {
  require(m.rows() == m.cols(), ErrorKind::structural, "mass matrix must be square");
  llt_.compute(m);
  require(llt_.info() == Eigen::Success, ErrorKind::singular_mass,
          "mass matrix factorization failed (mesh may be degenerate)");
  const Vector d = Eigen::SparseMatrix<double>(llt_.matrixL()).diagonal();
  require(d.size() == 0 || (d.minCoeff() > 0.0 && std::isfinite(d.maxCoeff())),
          ErrorKind::singular_mass, "mass matrix is not positive definite");
}

Vector MassSolver::solve(const Vector& v) const {
  require(v.size() == size_, ErrorKind::structural, "MassSolver::solve: size mismatch");
  return llt_.solve(v);
}

MassSolver factorize_spd(const SparseMatrix& m) { return MassSolver(m); }

Vector apply_schur_velocity_operator(const Vector& v, const BlockSaddleSystem& s,
                                     const MassSolver& mass) {
  require(v.size() == s.velocity_dofs(), ErrorKind::structural,
          "apply_schur_velocity_operator: size mismatch");
  Vector out = s.B * v;
  if (s.alpha != 0.0) out += (s.alpha * s.tau) * (s.A * mass.solve(s.A * v));
  return out;
}

struct SaddleSolver::Preconditioner {
  std::unique_ptr<Eigen::UmfPackLU<SparseMatrix>> lu;
  bool analyzed = false;
  Eigen::Index rows = -1;
  Eigen::Index nnz = -1;
  std::vector<int> outer;
  std::vector<int> inner;

  bool same_pattern(const SparseMatrix& k) const {
    if (!analyzed || k.rows() != rows || k.nonZeros() != nnz) return false;
    return std::equal(outer.begin(), outer.end(), k.outerIndexPtr()) &&
           std::equal(inner.begin(), inner.end(), k.innerIndexPtr());
  }

  void factorize(SparseMatrix k) {
    k.makeCompressed();
    if (!same_pattern(k)) {
      lu = std::make_unique<Eigen::UmfPackLU<SparseMatrix>>();
      // GMRES corrects the preconditioner anyway; refinement steps only cost.
      lu->umfpackControl()(UMFPACK_IRSTEP) = 0;
      lu->analyzePattern(k);
      analyzed = true;
      rows = k.rows();
      nnz = k.nonZeros();
      outer.assign(k.outerIndexPtr(), k.outerIndexPtr() + k.outerSize() + 1);
      inner.assign(k.innerIndexPtr(), k.innerIndexPtr() + k.nonZeros());
    }
    lu->factorize(k);
    require(lu->info() == Eigen::Success, ErrorKind::solver_setup,
            "preconditioner factorization failed (singular alpha = 0 saddle matrix)");
  }
};

SaddleSolver::SaddleSolver(SolverOptions options)
    : options_(options), precond_(std::make_unique<Preconditioner>()) {
  options_.validate();
}
SaddleSolver::~SaddleSolver() = default;
SaddleSolver::SaddleSolver(SaddleSolver&&) noexcept = default;
SaddleSolver& SaddleSolver::operator=(SaddleSolver&&) noexcept = default;

SaddleSolution SaddleSolver::solve(const BlockSaddleSystem& s, const MassSolver& mass) {
  const auto t0 = Clock::now();
  require(s.rho > 0.0, ErrorKind::argument,
          "solve_saddle requires rho > 0; use the direct solver for rho = 0");
  const int n = s.velocity_dofs();
  const int np = s.pressure_dofs();
  const int dim = n + np;

  Vector rhs(dim);
  rhs.head(n) = s.rhs_momentum;
  if (s.alpha != 0.0) rhs.head(n) += s.alpha * schur_rhs_correction(s, mass);
  rhs.tail(np) = s.divergence_rhs();

  SaddleSolution out;
  out.report.method = SolveMethod::schur_krylov;
  const double rhs_norm = rhs.norm();
  if (rhs_norm == 0.0) {
    out.U = Vector::Zero(n);
    out.P = Vector::Zero(np);
    out.report.seconds = seconds_since(t0);
    return out;
  }

  precond_->factorize(preconditioner_matrix(s, options_.preconditioner));
  auto& lu = *precond_->lu;

  const auto apply = [&](const Vector& x) {
    Vector y(dim);
    y.head(n) = apply_schur_velocity_operator(x.head(n), s, mass) + s.C * x.tail(np);
    y.tail(np) = s.C.transpose() * x.head(n);
    return y;
  };
  const auto precondition = [&](const Vector& v) -> Vector { return lu.solve(v); };
  // Both the overall residual and the divergence row must meet the tolerance;
  // the latter relative to |U|, which can be much smaller than |rhs|.
  const auto converged = [&](const Vector& x, const Vector& r) {
    const double div = r.tail(np).norm();
    return r.norm() <= options_.tol * rhs_norm &&
           div <= options_.tol * std::max(x.head(n).norm(), 1e-300);
  };

  Vector x = precondition(rhs);
  Vector r = rhs - apply(x);
  int iterations = 0;
  const int m = options_.restart;
  Eigen::MatrixXd v(dim, m + 1);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m + 1, m);
  Vector cs(m), sn(m), g(m + 1);
  // Stop targets for the inner loop are tightened when the true residual
  // misses them, so a restart is not wasted on the same criterion.
  double inner_target = options_.tol * rhs_norm;

  while (!converged(x, r)) {
    if (iterations >= options_.max_iter) break;
    const double beta = r.norm();
    if (beta == 0.0) break;
    v.col(0) = r / beta;
    g.setZero();
    g[0] = beta;
    h.setZero();
    int k = 0;
    for (; k < m && iterations < options_.max_iter; ++k) {
      ++iterations;
      Vector w = apply(precondition(v.col(k)));
      for (int i = 0; i <= k; ++i) {
        h(i, k) = w.dot(v.col(i));
        w -= h(i, k) * v.col(i);
      }
      h(k + 1, k) = w.norm();
      const bool breakdown = !(h(k + 1, k) > 0.0);
      if (!breakdown) v.col(k + 1) = w / h(k + 1, k);
      for (int i = 0; i < k; ++i) {
        const double tmp = cs[i] * h(i, k) + sn[i] * h(i + 1, k);
        h(i + 1, k) = -sn[i] * h(i, k) + cs[i] * h(i + 1, k);
        h(i, k) = tmp;
      }
      const double denom = std::hypot(h(k, k), h(k + 1, k));
      cs[k] = h(k, k) / denom;
      sn[k] = h(k + 1, k) / denom;
      h(k, k) = denom;
      h(k + 1, k) = 0.0;
      g[k + 1] = -sn[k] * g[k];
      g[k] = cs[k] * g[k];
      if (std::abs(g[k + 1]) <= inner_target || breakdown) {
        ++k;
        break;
      }
    }
    const Vector y = h.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    x += precondition(v.leftCols(k) * y);
    r = rhs - apply(x);
    if (!converged(x, r)) inner_target *= 0.1;
  }

  out.report.iterations = iterations;
  out.report.relative_residual = r.norm() / rhs_norm;
  out.report.seconds = seconds_since(t0);
  if (!converged(x, r))
    throw IterativeFailure("GMRES did not converge in " + std::to_string(iterations) +
                               " iterations (relative residual " +
                               std::to_string(out.report.relative_residual) + ")",
                           out.report);
  out.U = x.head(n);
  out.P = x.tail(np);
  return out;
}

SaddleSolution solve_saddle(const BlockSaddleSystem& system, const MassSolver& mass,
                            const SolverOptions& options) {
  SaddleSolver solver(options);
  return solver.solve(system, mass);
}

GeometryUpdate recover_geometry(const Vector& U, const BlockSaddleSystem& s,
                                const MassSolver& mass) {
  require(U.size() == s.velocity_dofs(), ErrorKind::structural,
          "recover_geometry: size mismatch");
  GeometryUpdate g;
  g.dX = s.tau * mass.solve(s.mass_fu().transpose() * U);
  g.kappa = mass.solve(-(s.A * (s.X + g.dX)));
  g.F = mass.solve(s.A * g.kappa + s.rhs_curvature_explicit);
  return g;
}

SparseMatrix full_system_matrix(const BlockSaddleSystem& s) {
  const int n = s.velocity_dofs();
  const int np = s.pressure_dofs();
  const int iu = 0, ip = n, ik = n + np, ix = 2 * n + np, iff = 3 * n + np;
  const int dim = 4 * n + np;
  std::vector<Triplet> t;
  t.reserve(s.B.nonZeros() + 2 * s.C.nonZeros() + 6 * s.M.nonZeros() + 2 * s.A.nonZeros());
  // momentum: B U + C P - alpha M_FU F = b
  append_block(t, s.B, iu, iu, 1.0);
  append_block(t, s.C, iu, ip, 1.0);
  if (s.alpha != 0.0) append_block(t, s.mass_fu(), iu, iff, -s.alpha);
  // divergence: C^T U = -source
  append_transpose(t, s.C, ip, iu);
  // position: M_FU^T U - M dX / tau = 0
  append_transpose(t, s.mass_fu(), ik, iu);
  append_block(t, s.M, ik, ix, -1.0 / s.tau);
  // curvature: M kappa + A dX = -A X
  append_block(t, s.M, ix, ik, 1.0);
  append_block(t, s.A, ix, ix, 1.0);
  // force: -A kappa + M F = e
  append_block(t, s.A, iff, ik, -1.0);
  append_block(t, s.M, iff, iff, 1.0);
  SparseMatrix k(dim, dim);
  k.setFromTriplets(t.begin(), t.end());
  return k;
}

Vector full_system_rhs(const BlockSaddleSystem& s) {
  const int n = s.velocity_dofs();
  const int np = s.pressure_dofs();
  Vector r = Vector::Zero(4 * n + np);
  r.segment(0, n) = s.rhs_momentum;
  r.segment(n, np) = s.divergence_rhs();
  r.segment(2 * n + np, n) = -(s.A * s.X);
  r.segment(3 * n + np, n) = s.rhs_curvature_explicit;
  return r;
}

int full_system_rank_deficiency(const BlockSaddleSystem& s, const SolverOptions& options) {
  const SparseMatrix k = full_system_matrix(s);
  require(k.rows() <= options.rank_check_cap, ErrorKind::size_cap,
          "rank check limited to " + std::to_string(options.rank_check_cap) + " unknowns");
  // Row/column equilibration so that the blocks of different physical scale
  // do not masquerade as rank loss.
  Eigen::MatrixXd d(k);
  Vector rs = d.rowwise().lpNorm<Eigen::Infinity>();
  for (Eigen::Index i = 0; i < rs.size(); ++i)
    if (rs[i] > 0) d.row(i) /= rs[i];
  Vector cs = d.colwise().lpNorm<Eigen::Infinity>();
  for (Eigen::Index j = 0; j < cs.size(); ++j)
    if (cs[j] > 0) d.col(j) /= cs[j];
  Eigen::BDCSVD<Eigen::MatrixXd> svd(d);
  const Vector sv = svd.singularValues();
  const double threshold = 1e-10 * sv[0];
  int deficiency = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] <= threshold) ++deficiency;
  return deficiency;
}

FullSolution solve_full_direct(const BlockSaddleSystem& s, const SolverOptions& options) {
  const auto t0 = Clock::now();
  options.validate();
  require(s.rho > 0.0 || options.experimental_rho_zero, ErrorKind::argument,
          "rho = 0 requires the experimental flag of the direct solver");
  const int n = s.velocity_dofs();
  const int np = s.pressure_dofs();
  const int dim = 4 * n + np;
  require(dim <= options.direct_size_cap, ErrorKind::size_cap,
          "full system has " + std::to_string(dim) + " unknowns, cap is " +
              std::to_string(options.direct_size_cap));
  if (s.rho == 0.0 && dim <= options.rank_check_cap) {
    const int deficiency = full_system_rank_deficiency(s, options);
    if (deficiency > 0)
      fail(ErrorKind::singular_matrix,
           "full system is singular: rank deficiency " + std::to_string(deficiency));
  }
  SparseMatrix k = full_system_matrix(s);
  k.makeCompressed();
  const Vector rhs = full_system_rhs(s);
  Eigen::UmfPackLU<SparseMatrix> lu;
  lu.compute(k);
  require(lu.info() == Eigen::Success, ErrorKind::singular_matrix,
          "full system factorization failed");
  const Vector x = lu.solve(rhs);
  const double rhs_norm = rhs.norm();
  const double res = rhs_norm > 0 ? (k * x - rhs).norm() / rhs_norm : (k * x).norm();
  require(std::isfinite(res) && res <= 1e-9, ErrorKind::singular_matrix,
          "full system solve is inaccurate (relative residual " + std::to_string(res) + ")");

  FullSolution out;
  out.U = x.segment(0, n);
  out.P = x.segment(n, np);
  out.kappa = x.segment(n + np, n);
  out.dX = x.segment(2 * n + np, n);
  out.F = x.segment(3 * n + np, n);
  out.report.method = SolveMethod::full_direct;
  out.report.iterations = 1;
  out.report.relative_residual = res;
  out.report.seconds = seconds_since(t0);
  return out;
}

double ResidualCertificate::max_relative() const {
  return std::max({momentum, position, curvature, force});
}

ResidualCertificate residual_certificate(const BlockSaddleSystem& s, const Vector& U,
                                         const Vector& P, const Vector& kappa,
                                         const Vector& dX, const Vector& F) {
  const auto rel = [](const Vector& r, double scale) {
    return scale > 0.0 ? r.norm() / scale : r.norm();
  };
  ResidualCertificate c;
  const Vector bu = s.B * U, cp = s.C * P, mf = s.alpha * (s.mass_fu() * F);
  c.momentum = rel(bu + cp - mf - s.rhs_momentum,
                   std::max({bu.norm(), cp.norm(), mf.norm(), s.rhs_momentum.norm()}));
  c.divergence = (s.C.transpose() * U - s.divergence_rhs()).norm();
  const Vector mu = s.mass_fu().transpose() * U, mx = s.M * dX / s.tau;
  c.position = rel(mu - mx, std::max(mu.norm(), mx.norm()));
  const Vector mk = s.M * kappa, ax = s.A * (s.X + dX);
  c.curvature = rel(mk + ax, std::max(mk.norm(), ax.norm()));
  const Vector ak = s.A * kappa, mff = s.M * F;
  c.force = rel(mff - ak - s.rhs_curvature_explicit,
                std::max({ak.norm(), mff.norm(), s.rhs_curvature_explicit.norm()}));
  return c;
}

}  // namespace surfns
