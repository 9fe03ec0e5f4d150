#pragma once

#include "surfns/common.hpp"

#include <array>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace surfns {

/// Triangle connectivity of a curved P2 surface. Node ordering per triangle:
/// corners 0, 1, 2, then midnode i on the edge opposite corner i.
/// Corner (vertex) nodes occupy global indices [0, num_vertices); the P1
/// pressure space indexes them directly.
struct Connectivity {
  std::vector<std::array<int, 6>> triangles;
  int num_vertices = 0;
  int num_nodes = 0;

  bool operator==(const Connectivity&) const = default;
};

enum class SpaceTag { p2_scalar, p2_vector3, p1_scalar };

const char* to_string(SpaceTag tag) noexcept;

class SurfaceMesh {
 public:
  SurfaceMesh(std::shared_ptr<const Connectivity> connectivity,
              std::vector<Vec3> nodes, int level);

  const std::vector<Vec3>& nodes() const { return nodes_; }
  const Vec3& node(int k) const { return nodes_[k]; }
  std::span<const std::array<int, 6>> triangles() const {
    return connectivity_->triangles;
  }
  const std::array<int, 6>& triangle(int j) const {
    return connectivity_->triangles[j];
  }
  const std::shared_ptr<const Connectivity>& connectivity() const {
    return connectivity_;
  }

  int num_nodes() const { return connectivity_->num_nodes; }
  int num_vertices() const { return connectivity_->num_vertices; }
  int num_triangles() const {
    return static_cast<int>(connectivity_->triangles.size());
  }
  int level() const { return level_; }

  /// Number of coefficients of a field in the given space on this mesh.
  int dofs(SpaceTag tag) const;

  bool same_connectivity(const SurfaceMesh& other) const {
    return connectivity_ == other.connectivity_ ||
           *connectivity_ == *other.connectivity_;
  }

  /// Same connectivity, new coordinates, no validity check.
  SurfaceMesh with_nodes(std::vector<Vec3> nodes) const;

 private:
  std::shared_ptr<const Connectivity> connectivity_;
  std::vector<Vec3> nodes_;
  int level_ = 0;
};

/// Coefficients of a Lagrange finite element function. Vector fields are
/// stored interleaved: component i of node k lives at 3k + i.
struct NodeField {
  SpaceTag space = SpaceTag::p2_scalar;
  Vector coeffs;

  static NodeField zeros(const SurfaceMesh& mesh, SpaceTag space);
  static NodeField coordinates(const SurfaceMesh& mesh);

  Vec3 node_vector(int k) const { return coeffs.segment<3>(3 * k); }
  bool matches(const SurfaceMesh& mesh) const {
    return coeffs.size() == mesh.dofs(space);
  }
};

void require_attached(const NodeField& field, const SurfaceMesh& mesh,
                      const char* what);

NodeField interpolate(const SurfaceMesh& mesh, SpaceTag space,
                      const std::function<double(const Vec3&)>& f);
NodeField interpolate(const SurfaceMesh& mesh,
                      const std::function<Vec3(const Vec3&)>& f);

/// Coefficient transfer between two surfaces sharing connectivity.
class PushforwardMap {
 public:
  PushforwardMap(const SurfaceMesh& source, const SurfaceMesh& target);

  NodeField apply(const NodeField& field) const;
  PushforwardMap inverse() const { return PushforwardMap(*target_, *source_); }

 private:
  const SurfaceMesh* source_;
  const SurfaceMesh* target_;
};

NodeField pushforward(const PushforwardMap& map, const NodeField& field);

/// New surface with node coordinates taken from X_new. Throws
/// ErrorKind::degenerate_element if any area element at the quadrature
/// points of the given degree is not positive.
SurfaceMesh update_geometry(const SurfaceMesh& mesh, const NodeField& x_new,
                            int quadrature_degree = 17);

/// Smallest area element over all quadrature points of the given degree.
double min_area_element(const SurfaceMesh& mesh, int quadrature_degree);

/// Longest corner-to-corner chord over all triangles.
double mesh_size(const SurfaceMesh& mesh);

// Generated primitives. Base sizes: sphere 8 (octahedron), torus 144
// (12 x 6 parameter grid), capsule 16 (elongated octahedron); each level
// quadrisects, so J = J_base * 4^level.
inline constexpr int kSphereBaseTriangles = 8;
inline constexpr int kTorusBaseTriangles = 144;
inline constexpr int kCapsuleBaseTriangles = 16;

SurfaceMesh build_sphere(int level, double radius);
SurfaceMesh build_torus(int level, double major_radius, double minor_radius);
/// Cylinder of length 2*half_length along the x axis, capped by hemispheres.
SurfaceMesh build_capsule(int level, double half_length, double radius);

/// Flat triangle complex (corner nodes only), used for refinement.
struct FlatComplex {
  std::vector<Vec3> points;
  std::vector<std::array<int, 3>> triangles;
};

/// Uniform quadrisection. Old points keep their indices; edge midpoints are
/// appended in order of first appearance.
FlatComplex refine(const FlatComplex& complex);

/// Adds P2 edge midnodes (placed by `place`, applied to the chord midpoint)
/// and returns the curved mesh.
SurfaceMesh make_p2_mesh(const FlatComplex& complex, int level,
                         const std::function<Vec3(const Vec3&)>& place);

struct TopologyReport {
  bool edge_manifold = false;      // every edge in exactly two triangles
  bool consistent_midnodes = false;
  bool consistent_orientation = false;
  int vertices = 0;
  int edges = 0;
  int faces = 0;
  int euler_characteristic() const { return vertices - edges + faces; }
};

TopologyReport check_topology(const SurfaceMesh& mesh);

}  // namespace surfns
