#pragma once

#include "surfns/common.hpp"

#include <array>
#include <vector>

namespace surfns {

/// Quadrature on the reference triangle with vertices (0,0), (1,0), (0,1).
struct QuadratureRule {
  std::vector<Vec2> points;
  std::vector<double> weights;
  int exactness_degree = 0;

  std::size_t size() const { return weights.size(); }
};

inline constexpr int kDefaultQuadratureDegree = 17;
inline constexpr int kMaxQuadratureDegree = 20;

/// Collapsed-coordinate rule: Gauss-Jacobi(1,0) in the collapsed direction
/// tensorized with Gauss-Legendre, ceil((degree+1)/2) points each way.
/// Rules are cached; the returned reference stays valid for the process.
const QuadratureRule& quadrature_rule(int degree);

/// Gauss-Jacobi nodes/weights on [-1,1] for weight (1-t)^a (1+t)^b
/// (Golub-Welsch followed by Newton polishing).
void gauss_jacobi(int n, double a, double b, std::vector<double>& nodes,
                  std::vector<double>& weights);

// Lagrange bases on the reference triangle. P2 node order: three corners,
// then the midnode opposite corner i, i.e. on edge (i+1, i+2) mod 3.
namespace reference {

inline std::array<double, 3> barycentric(const Vec2& p) {
  return {1.0 - p.x() - p.y(), p.x(), p.y()};
}

inline const std::array<Vec2, 3>& barycentric_gradients() {
  static const std::array<Vec2, 3> g{Vec2(-1.0, -1.0), Vec2(1.0, 0.0),
                                     Vec2(0.0, 1.0)};
  return g;
}

inline std::array<double, 6> p2_values(const Vec2& p) {
  const auto l = barycentric(p);
  return {l[0] * (2.0 * l[0] - 1.0), l[1] * (2.0 * l[1] - 1.0),
          l[2] * (2.0 * l[2] - 1.0), 4.0 * l[1] * l[2],
          4.0 * l[2] * l[0],         4.0 * l[0] * l[1]};
}

inline std::array<Vec2, 6> p2_gradients(const Vec2& p) {
  const auto l = barycentric(p);
  const auto& d = barycentric_gradients();
  return {(4.0 * l[0] - 1.0) * d[0],
          (4.0 * l[1] - 1.0) * d[1],
          (4.0 * l[2] - 1.0) * d[2],
          4.0 * (l[1] * d[2] + l[2] * d[1]),
          4.0 * (l[2] * d[0] + l[0] * d[2]),
          4.0 * (l[0] * d[1] + l[1] * d[0])};
}

inline std::array<Vec2, 6> p2_nodes() {
  return {Vec2(0.0, 0.0), Vec2(1.0, 0.0), Vec2(0.0, 1.0),
          Vec2(0.5, 0.5), Vec2(0.0, 0.5), Vec2(0.5, 0.0)};
}

}  // namespace reference

}  // namespace surfns
