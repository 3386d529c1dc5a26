#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "masfm/camera.hpp"

namespace masfm {

struct TriangleMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<Eigen::Vector3i> triangles;
  std::vector<Eigen::Vector3d> normals;  // unit, per triangle

  void compute_normals();
  double triangle_area(int index) const;
  // Longest diagonal of the axis-aligned bounding box.
  double diameter() const;
  Eigen::Vector3d centroid() const;
};

struct RayHit {
  Eigen::Vector3d point;
  int triangle = -1;
  double distance = 0.0;
};

// Nearest intersection with distance > 1e-9 (Moller-Trumbore over all
// triangles). Absence of a hit is a valid result.
std::optional<RayHit> intersect_ray_mesh(const TriangleMesh& mesh, const Ray& ray);

// Single triangle intersection; returns the ray parameter t when hit.
std::optional<double> intersect_ray_triangle(const Eigen::Vector3d& origin,
                                             const Eigen::Vector3d& direction,
                                             const Eigen::Vector3d& v0, const Eigen::Vector3d& v1,
                                             const Eigen::Vector3d& v2);

// Distance from a point to the closest triangle (brute force).
double distance_to_mesh(const TriangleMesh& mesh, const Eigen::Vector3d& point);

Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& point, const Eigen::Vector3d& v0,
                                          const Eigen::Vector3d& v1, const Eigen::Vector3d& v2);

// OBJ subset: `v x y z` and triangular `f i j k` (1-based). Anything else
// is skipped; skipped directives are reported through warnings.
TriangleMesh load_obj(const std::string& path, std::vector<std::string>* warnings = nullptr);
void save_obj(const TriangleMesh& mesh, const std::string& path);

}  // namespace masfm
