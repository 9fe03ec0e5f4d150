#pragma once

#include "surfns/quadrature.hpp"
#include "surfns/surface_mesh.hpp"

#include <array>
#include <vector>

namespace surfns {

/// Geometric data of one curved element at one quadrature point.
struct FramePoint {
  Vec3 position;
  Eigen::Matrix<double, 3, 2> jacobian;
  Eigen::Matrix2d metric;
  double area_element = 0.0;  // sqrt(det metric)
  double weight = 0.0;        // quadrature weight * area element
  Vec3 normal;
  Mat3 projection;
  std::array<double, 6> phi;  // P2 basis values
  std::array<Vec3, 6> grad;   // surface gradients of the P2 basis
  std::array<double, 3> psi;  // P1 basis values (corner nodes)
};

struct ElementFrame {
  int element = -1;
  std::vector<FramePoint> points;
};

/// Evaluates element frames for a fixed rule; reference tables are computed
/// once per builder.
class FrameBuilder {
 public:
  explicit FrameBuilder(const QuadratureRule& rule);
  explicit FrameBuilder(int degree = kDefaultQuadratureDegree)
      : FrameBuilder(quadrature_rule(degree)) {}

  /// Fills `out` for element j of the mesh (node coordinates as geometry).
  /// Throws ErrorKind::degenerate_element on a nonpositive area element.
  void compute(const SurfaceMesh& mesh, int element, ElementFrame& out) const;

  const QuadratureRule& rule() const { return *rule_; }

 private:
  const QuadratureRule* rule_;
  std::vector<std::array<double, 6>> phi_;
  std::vector<std::array<Vec2, 6>> dphi_;
  std::vector<std::array<double, 3>> psi_;
};

/// Frames for every element; geometry supplies the node coordinates.
std::vector<ElementFrame> element_frames(const SurfaceMesh& mesh,
                                         const NodeField& geometry,
                                         const QuadratureRule& rule);
std::vector<ElementFrame> element_frames(const SurfaceMesh& mesh,
                                         const QuadratureRule& rule);

struct ScalarPointValue {
  double value = 0.0;
  Vec3 gradient = Vec3::Zero();
};

/// Vector field value with surface Jacobian (grad_s u)_{ij} = d_{s_j} u_i.
struct VectorPointValue {
  Vec3 value = Vec3::Zero();
  Mat3 jacobian = Mat3::Zero();
  double divergence = 0.0;
};

ScalarPointValue eval_scalar(const NodeField& field, const std::array<int, 6>& tri,
                             const FramePoint& fp);
VectorPointValue eval_vector(const NodeField& field, const std::array<int, 6>& tri,
                             const FramePoint& fp);

/// Per-element, per-point evaluation over a frame table.
std::vector<std::vector<VectorPointValue>> eval_with_surface_gradient(
    const NodeField& field, const SurfaceMesh& mesh,
    const std::vector<ElementFrame>& frames);
std::vector<std::vector<ScalarPointValue>> eval_scalar_with_surface_gradient(
    const NodeField& field, const SurfaceMesh& mesh,
    const std::vector<ElementFrame>& frames);

/// D = P (G + G^T) P / 2.
inline Mat3 deformation_tensor(const Mat3& surface_jacobian, const Mat3& projection) {
  return 0.5 * projection * (surface_jacobian + surface_jacobian.transpose()) *
         projection;
}

/// Sum over elements and points of weight * value. Elements are summed in
/// index order.
double integrate(const std::vector<std::vector<double>>& values,
                 const std::vector<ElementFrame>& frames);

double surface_area(const SurfaceMesh& mesh, int degree = kDefaultQuadratureDegree);
/// (1/3) * integral of id . nu.
double enclosed_volume(const SurfaceMesh& mesh, int degree = kDefaultQuadratureDegree);
/// (1/2) * integral of |kappa|^2.
double bending_energy(const SurfaceMesh& mesh, const NodeField& kappa,
                      int degree = kDefaultQuadratureDegree);

/// Closed-form geometry of a sphere (centre 0) or an axisymmetric torus about
/// the z axis. Mean curvature is the sum of principal curvatures with the sign
/// convention that it is negative for convex bodies under the outward normal.
class AnalyticSurface {
 public:
  static AnalyticSurface sphere(double radius);
  static AnalyticSurface torus(double major_radius, double minor_radius);

  Vec3 closest_point(const Vec3& p) const;
  Vec3 normal(const Vec3& p) const;
  /// Weingarten map grad_s nu (symmetric, tangential).
  Mat3 shape_operator(const Vec3& p) const;
  double mean_curvature(const Vec3& p) const;
  double gauss_curvature(const Vec3& p) const;
  Vec3 mean_curvature_gradient(const Vec3& p) const;

  bool is_sphere() const { return kind_ == Kind::sphere; }

 private:
  enum class Kind { sphere, torus };
  AnalyticSurface(Kind kind, double a, double b) : kind_(kind), a_(a), b_(b) {}
  // Torus angles of the closest point.
  void torus_angles(const Vec3& p, double& phi, double& theta) const;

  Kind kind_;
  double a_;  // sphere radius, torus major radius
  double b_;  // torus minor radius
};

struct IdentityResiduals {
  /// max over quadrature points of |kappa grad_s nu_h + (grad_s nu_h)^2 + K P_h|_F
  double gauss_relation = 0.0;
  /// dual H^1 norm of the weak residual of
  /// Delta_s nu = -grad_s kappa - |grad_s nu|^2 nu, tested against P2 vectors
  double normal_laplacian = 0.0;
};

/// nu_h is the P2 interpolant of the analytic normal; analytic kappa, K and
/// grad_s kappa are sampled at the closest points of the quadrature points.
IdentityResiduals identity_residuals(const SurfaceMesh& mesh,
                                     const AnalyticSurface& surface,
                                     int degree = kDefaultQuadratureDegree);

}  // namespace surfns
