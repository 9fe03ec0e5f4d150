#include "surfns/surface_mesh.hpp"

#include "surfns/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

namespace surfns {

const char* to_string(SpaceTag tag) noexcept {
  switch (tag) {
    case SpaceTag::p2_scalar: return "P2_scalar";
    case SpaceTag::p2_vector3: return "P2_vector3";
    case SpaceTag::p1_scalar: return "P1_scalar";
  }
  return "unknown";
}

SurfaceMesh::SurfaceMesh(std::shared_ptr<const Connectivity> connectivity,
                         std::vector<Vec3> nodes, int level)
    : connectivity_(std::move(connectivity)), nodes_(std::move(nodes)),
      level_(level) {
  require(connectivity_ != nullptr, ErrorKind::structural,
          "SurfaceMesh: null connectivity");
  require(static_cast<int>(nodes_.size()) == connectivity_->num_nodes,
          ErrorKind::structural, "SurfaceMesh: node count does not match connectivity");
}

int SurfaceMesh::dofs(SpaceTag tag) const {
  switch (tag) {
    case SpaceTag::p2_scalar: return num_nodes();
    case SpaceTag::p2_vector3: return 3 * num_nodes();
    case SpaceTag::p1_scalar: return num_vertices();
  }
  return 0;
}

SurfaceMesh SurfaceMesh::with_nodes(std::vector<Vec3> nodes) const {
  return SurfaceMesh(connectivity_, std::move(nodes), level_);
}

NodeField NodeField::zeros(const SurfaceMesh& mesh, SpaceTag space) {
  return NodeField{space, Vector::Zero(mesh.dofs(space))};
}

NodeField NodeField::coordinates(const SurfaceMesh& mesh) {
  NodeField x = zeros(mesh, SpaceTag::p2_vector3);
  for (int k = 0; k < mesh.num_nodes(); ++k) x.coeffs.segment<3>(3 * k) = mesh.node(k);
  return x;
}

void require_attached(const NodeField& field, const SurfaceMesh& mesh,
                      const char* what) {
  if (!field.matches(mesh)) {
    std::ostringstream os;
    os << what << ": field of space " << to_string(field.space) << " has "
       << field.coeffs.size() << " coefficients, mesh expects "
       << mesh.dofs(field.space);
    fail(ErrorKind::structural, os.str());
  }
}

NodeField interpolate(const SurfaceMesh& mesh, SpaceTag space,
                      const std::function<double(const Vec3&)>& f) {
  require(space != SpaceTag::p2_vector3, ErrorKind::argument,
          "interpolate: scalar function given for a vector space");
  NodeField out = NodeField::zeros(mesh, space);
  const int n = mesh.dofs(space);
  for (int k = 0; k < n; ++k) out.coeffs[k] = f(mesh.node(k));
  return out;
}

NodeField interpolate(const SurfaceMesh& mesh,
                      const std::function<Vec3(const Vec3&)>& f) {
  NodeField out = NodeField::zeros(mesh, SpaceTag::p2_vector3);
  for (int k = 0; k < mesh.num_nodes(); ++k)
    out.coeffs.segment<3>(3 * k) = f(mesh.node(k));
  return out;
}

PushforwardMap::PushforwardMap(const SurfaceMesh& source, const SurfaceMesh& target)
    : source_(&source), target_(&target) {
  require(source.same_connectivity(target), ErrorKind::structural,
          "pushforward: source and target meshes differ in connectivity");
}

NodeField PushforwardMap::apply(const NodeField& field) const {
  require_attached(field, *source_, "pushforward");
  return field;
}

NodeField pushforward(const PushforwardMap& map, const NodeField& field) {
  return map.apply(field);
}

double min_area_element(const SurfaceMesh& mesh, int quadrature_degree) {
  const QuadratureRule& rule = quadrature_rule(quadrature_degree);
  std::vector<std::array<Vec2, 6>> grads;
  grads.reserve(rule.size());
  for (const Vec2& p : rule.points) grads.push_back(reference::p2_gradients(p));
  double min_value = std::numeric_limits<double>::infinity();
  for (const auto& tri : mesh.triangles()) {
    for (const auto& g : grads) {
      Vec3 d1 = Vec3::Zero(), d2 = Vec3::Zero();
      for (int a = 0; a < 6; ++a) {
        d1 += g[a].x() * mesh.node(tri[a]);
        d2 += g[a].y() * mesh.node(tri[a]);
      }
      // Signed against the corner-triangle normal so folded charts show up.
      const Vec3 n = d1.cross(d2);
      const Vec3 flat = (mesh.node(tri[1]) - mesh.node(tri[0]))
                            .cross(mesh.node(tri[2]) - mesh.node(tri[0]));
      const double s = n.dot(flat) >= 0.0 ? n.norm() : -n.norm();
      min_value = std::min(min_value, s);
    }
  }
  return min_value;
}

SurfaceMesh update_geometry(const SurfaceMesh& mesh, const NodeField& x_new,
                            int quadrature_degree) {
  require(x_new.space == SpaceTag::p2_vector3, ErrorKind::structural,
          "update_geometry: X_new must be a P2 vector field");
  require_attached(x_new, mesh, "update_geometry");
  std::vector<Vec3> nodes(mesh.num_nodes());
  for (int k = 0; k < mesh.num_nodes(); ++k) nodes[k] = x_new.node_vector(k);
  for (const Vec3& p : nodes)
    require(p.allFinite(), ErrorKind::degenerate_element,
            "update_geometry: non-finite node coordinate");
  SurfaceMesh out = mesh.with_nodes(std::move(nodes));
  const double amin = min_area_element(out, quadrature_degree);
  if (!(amin > 0.0)) {
    std::ostringstream os;
    os << "update_geometry: nonpositive area element " << amin
       << " (mesh breakdown)";
    fail(ErrorKind::degenerate_element, os.str());
  }
  return out;
}

double mesh_size(const SurfaceMesh& mesh) {
  double h = 0.0;
  for (const auto& tri : mesh.triangles()) {
    for (int i = 0; i < 3; ++i) {
      h = std::max(h, (mesh.node(tri[i]) - mesh.node(tri[(i + 1) % 3])).norm());
    }
  }
  return h;
}

namespace {

using EdgeKey = std::pair<int, int>;

EdgeKey edge_key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

void orient_outward(FlatComplex& c, const std::function<Vec3(const Vec3&)>& outward) {
  for (auto& t : c.triangles) {
    const Vec3& a = c.points[t[0]];
    const Vec3& b = c.points[t[1]];
    const Vec3& d = c.points[t[2]];
    const Vec3 centroid = (a + b + d) / 3.0;
    if ((b - a).cross(d - a).dot(outward(centroid)) < 0.0) std::swap(t[1], t[2]);
  }
}

SurfaceMesh build_refined(FlatComplex base, int level,
                          const std::function<Vec3(const Vec3&)>& project) {
  for (auto& p : base.points) p = project(p);
  for (int l = 0; l < level; ++l) {
    base = refine(base);
    for (auto& p : base.points) p = project(p);
  }
  return make_p2_mesh(base, level, project);
}

}  // namespace

FlatComplex refine(const FlatComplex& complex) {
  FlatComplex out;
  out.points = complex.points;
  std::map<EdgeKey, int> mid;
  auto midpoint = [&](int a, int b) {
    auto [it, inserted] = mid.try_emplace(edge_key(a, b), 0);
    if (inserted) {
      it->second = static_cast<int>(out.points.size());
      out.points.push_back(0.5 * (complex.points[a] + complex.points[b]));
    }
    return it->second;
  };
  out.triangles.reserve(4 * complex.triangles.size());
  for (const auto& t : complex.triangles) {
    const int m01 = midpoint(t[0], t[1]);
    const int m12 = midpoint(t[1], t[2]);
    const int m20 = midpoint(t[2], t[0]);
    out.triangles.push_back({t[0], m01, m20});
    out.triangles.push_back({m01, t[1], m12});
    out.triangles.push_back({m20, m12, t[2]});
    out.triangles.push_back({m01, m12, m20});
  }
  return out;
}

SurfaceMesh make_p2_mesh(const FlatComplex& complex, int level,
                         const std::function<Vec3(const Vec3&)>& place) {
  auto conn = std::make_shared<Connectivity>();
  conn->num_vertices = static_cast<int>(complex.points.size());
  std::vector<Vec3> nodes = complex.points;
  std::map<EdgeKey, int> edge_node;
  conn->triangles.reserve(complex.triangles.size());
  for (const auto& t : complex.triangles) {
    std::array<int, 6> tri{t[0], t[1], t[2], 0, 0, 0};
    for (int i = 0; i < 3; ++i) {
      const int a = t[(i + 1) % 3];
      const int b = t[(i + 2) % 3];
      auto [it, inserted] = edge_node.try_emplace(edge_key(a, b), 0);
      if (inserted) {
        it->second = static_cast<int>(nodes.size());
        nodes.push_back(place(0.5 * (complex.points[a] + complex.points[b])));
      }
      tri[3 + i] = it->second;
    }
    conn->triangles.push_back(tri);
  }
  conn->num_nodes = static_cast<int>(nodes.size());
  return SurfaceMesh(std::move(conn), std::move(nodes), level);
}

SurfaceMesh build_sphere(int level, double radius) {
  require(level >= 0, ErrorKind::argument, "build_sphere: level must be >= 0");
  require(radius > 0.0, ErrorKind::argument, "build_sphere: radius must be > 0");
  FlatComplex base;
  base.points = {Vec3(1, 0, 0),  Vec3(0, 1, 0),  Vec3(-1, 0, 0),
                 Vec3(0, -1, 0), Vec3(0, 0, 1),  Vec3(0, 0, -1)};
  base.triangles = {{0, 1, 4}, {1, 2, 4}, {2, 3, 4}, {3, 0, 4},
                    {1, 0, 5}, {2, 1, 5}, {3, 2, 5}, {0, 3, 5}};
  auto project = [radius](const Vec3& p) -> Vec3 { return radius * p.normalized(); };
  return build_refined(std::move(base), level, project);
}

SurfaceMesh build_torus(int level, double major_radius, double minor_radius) {
  require(level >= 0, ErrorKind::argument, "build_torus: level must be >= 0");
  require(minor_radius > 0.0 && major_radius > minor_radius, ErrorKind::argument,
          "build_torus: need R > r > 0");
  const double big_r = major_radius;
  const double small_r = minor_radius;
  const int n_phi = 12 << level;
  const int n_theta = 6 << level;
  FlatComplex grid;
  grid.points.reserve(n_phi * n_theta);
  const double two_pi = 2.0 * std::numbers::pi;
  for (int i = 0; i < n_phi; ++i) {
    const double phi = two_pi * i / n_phi;
    for (int j = 0; j < n_theta; ++j) {
      const double theta = two_pi * j / n_theta;
      const double w = big_r + small_r * std::cos(theta);
      grid.points.emplace_back(w * std::cos(phi), w * std::sin(phi),
                               small_r * std::sin(theta));
    }
  }
  auto id = [n_theta, n_phi](int i, int j) {
    return ((i + n_phi) % n_phi) * n_theta + (j + n_theta) % n_theta;
  };
  grid.triangles.reserve(2 * n_phi * n_theta);
  for (int i = 0; i < n_phi; ++i) {
    for (int j = 0; j < n_theta; ++j) {
      grid.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      grid.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  auto center = [big_r](const Vec3& p) -> Vec3 {
    const double rho = std::hypot(p.x(), p.y());
    return Vec3(big_r * p.x() / rho, big_r * p.y() / rho, 0.0);
  };
  auto project = [center, small_r](const Vec3& p) -> Vec3 {
    const Vec3 c = center(p);
    return c + small_r * (p - c).normalized();
  };
  orient_outward(grid, [center](const Vec3& p) -> Vec3 { return p - center(p); });
  return make_p2_mesh(grid, level, project);
}

SurfaceMesh build_capsule(int level, double half_length, double radius) {
  require(level >= 0, ErrorKind::argument, "build_capsule: level must be >= 0");
  require(radius > 0.0, ErrorKind::argument, "build_capsule: radius must be > 0");
  require(half_length >= 0.0, ErrorKind::argument,
          "build_capsule: half_length must be >= 0");
  if (half_length == 0.0) return build_sphere(level, radius);
  const double len = half_length;
  FlatComplex base;
  // 0, 1: poles on the x axis; 2..5: ring at x = -L; 6..9: ring at x = +L.
  base.points.emplace_back(-(len + radius), 0.0, 0.0);
  base.points.emplace_back(len + radius, 0.0, 0.0);
  for (double x : {-len, len}) {
    base.points.emplace_back(x, radius, 0.0);
    base.points.emplace_back(x, 0.0, radius);
    base.points.emplace_back(x, -radius, 0.0);
    base.points.emplace_back(x, 0.0, -radius);
  }
  for (int j = 0; j < 4; ++j) {
    const int jn = (j + 1) % 4;
    base.triangles.push_back({0, 2 + jn, 2 + j});
    base.triangles.push_back({1, 6 + j, 6 + jn});
    base.triangles.push_back({2 + j, 2 + jn, 6 + jn});
    base.triangles.push_back({2 + j, 6 + jn, 6 + j});
  }
  auto axis_point = [len](const Vec3& p) -> Vec3 {
    return Vec3(std::clamp(p.x(), -len, len), 0.0, 0.0);
  };
  auto project = [axis_point, radius](const Vec3& p) -> Vec3 {
    const Vec3 c = axis_point(p);
    return c + radius * (p - c).normalized();
  };
  orient_outward(base, [axis_point](const Vec3& p) -> Vec3 { return p - axis_point(p); });
  return build_refined(std::move(base), level, project);
}

TopologyReport check_topology(const SurfaceMesh& mesh) {
  TopologyReport report;
  struct EdgeUse {
    int count = 0;
    int midnode = -1;
    bool midnode_ok = true;
    int forward = 0;  // uses as (a,b) with a < b
  };
  std::map<EdgeKey, EdgeUse> edges;
  for (const auto& tri : mesh.triangles()) {
    for (int i = 0; i < 3; ++i) {
      const int a = tri[(i + 1) % 3];
      const int b = tri[(i + 2) % 3];
      EdgeUse& e = edges[edge_key(a, b)];
      ++e.count;
      if (a < b) ++e.forward;
      if (e.midnode < 0) e.midnode = tri[3 + i];
      else if (e.midnode != tri[3 + i]) e.midnode_ok = false;
    }
  }
  report.edge_manifold = true;
  report.consistent_midnodes = true;
  report.consistent_orientation = true;
  for (const auto& [key, e] : edges) {
    if (e.count != 2) report.edge_manifold = false;
    if (!e.midnode_ok) report.consistent_midnodes = false;
    if (e.forward != 1) report.consistent_orientation = false;
  }
  report.vertices = mesh.num_vertices();
  report.edges = static_cast<int>(edges.size());
  report.faces = mesh.num_triangles();
  if (mesh.num_nodes() != report.vertices + report.edges)
    report.consistent_midnodes = false;
  return report;
}

}  // namespace surfns
