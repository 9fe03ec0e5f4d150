#include "surfns/surface_calculus.hpp"

#include "surfns/assembly.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <sstream>

namespace surfns {

FrameBuilder::FrameBuilder(const QuadratureRule& rule) : rule_(&rule) {
  phi_.reserve(rule.size());
  dphi_.reserve(rule.size());
  psi_.reserve(rule.size());
  for (const Vec2& p : rule.points) {
    phi_.push_back(reference::p2_values(p));
    dphi_.push_back(reference::p2_gradients(p));
    psi_.push_back(reference::barycentric(p));
  }
}

void FrameBuilder::compute(const SurfaceMesh& mesh, int element,
                           ElementFrame& out) const {
  const auto& tri = mesh.triangle(element);
  std::array<Vec3, 6> x;
  for (int a = 0; a < 6; ++a) x[a] = mesh.node(tri[a]);
  out.element = element;
  out.points.resize(rule_->size());
  for (std::size_t q = 0; q < rule_->size(); ++q) {
    FramePoint& fp = out.points[q];
    fp.position.setZero();
    fp.jacobian.setZero();
    for (int a = 0; a < 6; ++a) {
      fp.position += phi_[q][a] * x[a];
      fp.jacobian.col(0) += dphi_[q][a].x() * x[a];
      fp.jacobian.col(1) += dphi_[q][a].y() * x[a];
    }
    fp.metric = fp.jacobian.transpose() * fp.jacobian;
    const double det = fp.metric.determinant();
    const Vec3 cross = fp.jacobian.col(0).cross(fp.jacobian.col(1));
    if (!(det > 0.0)) {
      std::ostringstream os;
      os << "element " << element << ": nonpositive area element at quadrature point "
         << q;
      fail(ErrorKind::degenerate_element, os.str());
    }
    fp.area_element = std::sqrt(det);
    fp.weight = rule_->weights[q] * fp.area_element;
    fp.normal = cross / cross.norm();
    fp.projection = Mat3::Identity() - fp.normal * fp.normal.transpose();
    const Eigen::Matrix2d ginv = fp.metric.inverse();
    const Eigen::Matrix<double, 3, 2> jg = fp.jacobian * ginv;
    for (int a = 0; a < 6; ++a) {
      fp.phi[a] = phi_[q][a];
      fp.grad[a] = jg * dphi_[q][a];
    }
    fp.psi = psi_[q];
  }
}

std::vector<ElementFrame> element_frames(const SurfaceMesh& mesh,
                                         const NodeField& geometry,
                                         const QuadratureRule& rule) {
  require(geometry.space == SpaceTag::p2_vector3, ErrorKind::structural,
          "element_frames: geometry must be a P2 vector field");
  require_attached(geometry, mesh, "element_frames");
  std::vector<Vec3> nodes(mesh.num_nodes());
  for (int k = 0; k < mesh.num_nodes(); ++k) nodes[k] = geometry.node_vector(k);
  return element_frames(mesh.with_nodes(std::move(nodes)), rule);
}

std::vector<ElementFrame> element_frames(const SurfaceMesh& mesh,
                                         const QuadratureRule& rule) {
  FrameBuilder builder(rule);
  std::vector<ElementFrame> frames(mesh.num_triangles());
  for (int j = 0; j < mesh.num_triangles(); ++j) builder.compute(mesh, j, frames[j]);
  return frames;
}

ScalarPointValue eval_scalar(const NodeField& field, const std::array<int, 6>& tri,
                             const FramePoint& fp) {
  ScalarPointValue out;
  if (field.space == SpaceTag::p1_scalar) {
    // Corner values combined with the barycentric basis; its surface gradient
    // follows from grad(lambda_i) = grad(phi_i) + (grad of the adjacent
    // midnode functions) / 2.
    for (int i = 0; i < 3; ++i) {
      const double c = field.coeffs[tri[i]];
      out.value += c * fp.psi[i];
      const Vec3 g = fp.grad[i] + 0.5 * (fp.grad[3 + (i + 1) % 3] + fp.grad[3 + (i + 2) % 3]);
      out.gradient += c * g;
    }
    return out;
  }
  require(field.space == SpaceTag::p2_scalar, ErrorKind::structural,
          "eval_scalar: vector field given");
  for (int a = 0; a < 6; ++a) {
    const double c = field.coeffs[tri[a]];
    out.value += c * fp.phi[a];
    out.gradient += c * fp.grad[a];
  }
  return out;
}

VectorPointValue eval_vector(const NodeField& field, const std::array<int, 6>& tri,
                             const FramePoint& fp) {
  require(field.space == SpaceTag::p2_vector3, ErrorKind::structural,
          "eval_vector: scalar field given");
  VectorPointValue out;
  for (int a = 0; a < 6; ++a) {
    const Vec3 c = field.node_vector(tri[a]);
    out.value += fp.phi[a] * c;
    out.jacobian.noalias() += c * fp.grad[a].transpose();
  }
  out.divergence = out.jacobian.trace();
  return out;
}

std::vector<std::vector<VectorPointValue>> eval_with_surface_gradient(
    const NodeField& field, const SurfaceMesh& mesh,
    const std::vector<ElementFrame>& frames) {
  require_attached(field, mesh, "eval_with_surface_gradient");
  require(static_cast<int>(frames.size()) == mesh.num_triangles(),
          ErrorKind::structural, "eval_with_surface_gradient: frame table size mismatch");
  std::vector<std::vector<VectorPointValue>> out(frames.size());
  for (std::size_t j = 0; j < frames.size(); ++j) {
    const auto& tri = mesh.triangle(static_cast<int>(j));
    out[j].reserve(frames[j].points.size());
    for (const auto& fp : frames[j].points) out[j].push_back(eval_vector(field, tri, fp));
  }
  return out;
}

std::vector<std::vector<ScalarPointValue>> eval_scalar_with_surface_gradient(
    const NodeField& field, const SurfaceMesh& mesh,
    const std::vector<ElementFrame>& frames) {
  require_attached(field, mesh, "eval_scalar_with_surface_gradient");
  require(static_cast<int>(frames.size()) == mesh.num_triangles(),
          ErrorKind::structural, "eval_scalar_with_surface_gradient: frame table size mismatch");
  std::vector<std::vector<ScalarPointValue>> out(frames.size());
  for (std::size_t j = 0; j < frames.size(); ++j) {
    const auto& tri = mesh.triangle(static_cast<int>(j));
    out[j].reserve(frames[j].points.size());
    for (const auto& fp : frames[j].points) out[j].push_back(eval_scalar(field, tri, fp));
  }
  return out;
}

double integrate(const std::vector<std::vector<double>>& values,
                 const std::vector<ElementFrame>& frames) {
  require(values.size() == frames.size(), ErrorKind::structural,
          "integrate: value table does not match frames");
  double total = 0.0;
  for (std::size_t j = 0; j < frames.size(); ++j) {
    require(values[j].size() == frames[j].points.size(), ErrorKind::structural,
            "integrate: value table does not match frames");
    double local = 0.0;
    for (std::size_t q = 0; q < values[j].size(); ++q)
      local += frames[j].points[q].weight * values[j][q];
    total += local;
  }
  return total;
}

namespace {

template <class F>
double integrate_over(const SurfaceMesh& mesh, int degree, F&& integrand) {
  FrameBuilder builder(degree);
  ElementFrame frame;
  double total = 0.0;
  for (int j = 0; j < mesh.num_triangles(); ++j) {
    builder.compute(mesh, j, frame);
    double local = 0.0;
    for (const auto& fp : frame.points) local += fp.weight * integrand(j, fp);
    total += local;
  }
  return total;
}

}  // namespace

double surface_area(const SurfaceMesh& mesh, int degree) {
  return integrate_over(mesh, degree, [](int, const FramePoint&) { return 1.0; });
}

double enclosed_volume(const SurfaceMesh& mesh, int degree) {
  return integrate_over(mesh, degree, [](int, const FramePoint& fp) {
           return fp.position.dot(fp.normal);
         }) /
         3.0;
}

double bending_energy(const SurfaceMesh& mesh, const NodeField& kappa, int degree) {
  require_attached(kappa, mesh, "bending_energy");
  require(kappa.space == SpaceTag::p2_vector3, ErrorKind::structural,
          "bending_energy: kappa must be a P2 vector field");
  return 0.5 * integrate_over(mesh, degree, [&](int j, const FramePoint& fp) {
           Vec3 k = Vec3::Zero();
           const auto& tri = mesh.triangle(j);
           for (int a = 0; a < 6; ++a) k += fp.phi[a] * kappa.node_vector(tri[a]);
           return k.squaredNorm();
         });
}

AnalyticSurface AnalyticSurface::sphere(double radius) {
  require(radius > 0.0, ErrorKind::argument, "AnalyticSurface::sphere: radius must be > 0");
  return AnalyticSurface(Kind::sphere, radius, 0.0);
}

AnalyticSurface AnalyticSurface::torus(double major_radius, double minor_radius) {
  require(minor_radius > 0.0 && major_radius > minor_radius, ErrorKind::argument,
          "AnalyticSurface::torus: need R > r > 0");
  return AnalyticSurface(Kind::torus, major_radius, minor_radius);
}

void AnalyticSurface::torus_angles(const Vec3& p, double& phi, double& theta) const {
  phi = std::atan2(p.y(), p.x());
  const double rho = std::hypot(p.x(), p.y());
  theta = std::atan2(p.z(), rho - a_);
}

Vec3 AnalyticSurface::closest_point(const Vec3& p) const {
  if (kind_ == Kind::sphere) return a_ * p.normalized();
  double phi, theta;
  torus_angles(p, phi, theta);
  const double w = a_ + b_ * std::cos(theta);
  return Vec3(w * std::cos(phi), w * std::sin(phi), b_ * std::sin(theta));
}

Vec3 AnalyticSurface::normal(const Vec3& p) const {
  if (kind_ == Kind::sphere) return p.normalized();
  double phi, theta;
  torus_angles(p, phi, theta);
  return Vec3(std::cos(theta) * std::cos(phi), std::cos(theta) * std::sin(phi),
              std::sin(theta));
}

Mat3 AnalyticSurface::shape_operator(const Vec3& p) const {
  if (kind_ == Kind::sphere) {
    const Vec3 n = p.normalized();
    return (Mat3::Identity() - n * n.transpose()) / a_;
  }
  double phi, theta;
  torus_angles(p, phi, theta);
  const Vec3 e_theta(-std::sin(theta) * std::cos(phi), -std::sin(theta) * std::sin(phi),
                     std::cos(theta));
  const Vec3 e_phi(-std::sin(phi), std::cos(phi), 0.0);
  const double k_parallel = std::cos(theta) / (a_ + b_ * std::cos(theta));
  return e_theta * e_theta.transpose() / b_ + k_parallel * e_phi * e_phi.transpose();
}

double AnalyticSurface::mean_curvature(const Vec3& p) const {
  if (kind_ == Kind::sphere) return -2.0 / a_;
  double phi, theta;
  torus_angles(p, phi, theta);
  return -(1.0 / b_ + std::cos(theta) / (a_ + b_ * std::cos(theta)));
}

double AnalyticSurface::gauss_curvature(const Vec3& p) const {
  if (kind_ == Kind::sphere) return 1.0 / (a_ * a_);
  double phi, theta;
  torus_angles(p, phi, theta);
  return std::cos(theta) / (b_ * (a_ + b_ * std::cos(theta)));
}

Vec3 AnalyticSurface::mean_curvature_gradient(const Vec3& p) const {
  if (kind_ == Kind::sphere) return Vec3::Zero();
  double phi, theta;
  torus_angles(p, phi, theta);
  const double w = a_ + b_ * std::cos(theta);
  const double dk = a_ * std::sin(theta) / (w * w);
  const Vec3 e_theta(-std::sin(theta) * std::cos(phi), -std::sin(theta) * std::sin(phi),
                     std::cos(theta));
  return dk / b_ * e_theta;
}

IdentityResiduals identity_residuals(const SurfaceMesh& mesh,
                                     const AnalyticSurface& surface, int degree) {
  const NodeField nu_h =
      interpolate(mesh, [&](const Vec3& p) -> Vec3 { return surface.normal(p); });
  FrameBuilder builder(degree);
  ElementFrame frame;
  IdentityResiduals out;
  const int n = mesh.num_nodes();
  Eigen::MatrixXd residual = Eigen::MatrixXd::Zero(n, 3);
  for (int j = 0; j < mesh.num_triangles(); ++j) {
    builder.compute(mesh, j, frame);
    const auto& tri = mesh.triangle(j);
    for (const auto& fp : frame.points) {
      const VectorPointValue nu = eval_vector(nu_h, tri, fp);
      const Vec3 y = surface.closest_point(fp.position);
      const double kappa = surface.mean_curvature(y);
      const double gauss = surface.gauss_curvature(y);
      const Mat3& g = nu.jacobian;
      const Mat3 rel = kappa * g + g * g + gauss * fp.projection;
      out.gauss_relation = std::max(out.gauss_relation, rel.norm());
      const Mat3 s = surface.shape_operator(y);
      const Vec3 f = -surface.mean_curvature_gradient(y) -
                     s.squaredNorm() * surface.normal(y);
      for (int a = 0; a < 6; ++a) {
        const Vec3 r = fp.weight * (g * fp.grad[a] + fp.phi[a] * f);
        residual.row(tri[a]) += r.transpose();
      }
    }
  }
  const SparseMatrix h1 = assemble_mass(mesh, SpaceTag::p2_scalar, degree) +
                          assemble_scalar_stiffness(mesh, degree);
  Eigen::SimplicialLDLT<SparseMatrix> solver(h1);
  require(solver.info() == Eigen::Success, ErrorKind::singular_mass,
          "identity_residuals: H1 Gram matrix factorization failed");
  const Eigen::MatrixXd z = solver.solve(residual);
  out.normal_laplacian = std::sqrt(std::max(0.0, (residual.transpose() * z).trace()));
  return out;
}

}  // namespace surfns
