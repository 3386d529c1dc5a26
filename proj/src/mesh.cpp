#include "masfm/mesh.hpp"

#include <cctype>
#include <limits>
#include <fstream>
#include <sstream>

#include "masfm/error.hpp"

namespace masfm {

namespace {
constexpr double kMinHitDistance = 1e-9;
}

void TriangleMesh::compute_normals() {
  normals.resize(triangles.size());
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    const Eigen::Vector3d& a = vertices[triangles[i][0]];
    const Eigen::Vector3d& b = vertices[triangles[i][1]];
    const Eigen::Vector3d& c = vertices[triangles[i][2]];
    normals[i] = (b - a).cross(c - a).normalized();
  }
}

double TriangleMesh::triangle_area(int index) const {
  const Eigen::Vector3d& a = vertices[triangles[index][0]];
  const Eigen::Vector3d& b = vertices[triangles[index][1]];
  const Eigen::Vector3d& c = vertices[triangles[index][2]];
  return 0.5 * (b - a).cross(c - a).norm();
}

double TriangleMesh::diameter() const {
  if (vertices.empty()) return 0.0;
  Eigen::Vector3d lo = vertices.front(), hi = vertices.front();
  for (const auto& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (hi - lo).norm();
}

Eigen::Vector3d TriangleMesh::centroid() const {
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  if (vertices.empty()) return sum;
  for (const auto& v : vertices) sum += v;
  return sum / static_cast<double>(vertices.size());
}

std::optional<double> intersect_ray_triangle(const Eigen::Vector3d& origin,
                                             const Eigen::Vector3d& direction,
                                             const Eigen::Vector3d& v0, const Eigen::Vector3d& v1,
                                             const Eigen::Vector3d& v2) {
  constexpr double kEpsilon = 1e-12;
  const Eigen::Vector3d edge1 = v1 - v0;
  const Eigen::Vector3d edge2 = v2 - v0;
  const Eigen::Vector3d pvec = direction.cross(edge2);
  const double det = edge1.dot(pvec);
  if (std::abs(det) < kEpsilon) return std::nullopt;
  const double inv_det = 1.0 / det;
  const Eigen::Vector3d tvec = origin - v0;
  const double u = tvec.dot(pvec) * inv_det;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Eigen::Vector3d qvec = tvec.cross(edge1);
  const double v = direction.dot(qvec) * inv_det;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = edge2.dot(qvec) * inv_det;
  if (t <= kMinHitDistance) return std::nullopt;
  return t;
}

std::optional<RayHit> intersect_ray_mesh(const TriangleMesh& mesh, const Ray& ray) {
  std::optional<RayHit> best;
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto t = intersect_ray_triangle(ray.origin, ray.direction,
                                          mesh.vertices[mesh.triangles[i][0]],
                                          mesh.vertices[mesh.triangles[i][1]],
                                          mesh.vertices[mesh.triangles[i][2]]);
    if (t && (!best || *t < best->distance)) {
      best = RayHit{ray.at(*t), static_cast<int>(i), *t};
    }
  }
  return best;
}

Eigen::Vector3d closest_point_on_triangle(const Eigen::Vector3d& point, const Eigen::Vector3d& v0,
                                          const Eigen::Vector3d& v1, const Eigen::Vector3d& v2) {
  // Ericson's region-based closest point.
  const Eigen::Vector3d ab = v1 - v0;
  const Eigen::Vector3d ac = v2 - v0;
  const Eigen::Vector3d ap = point - v0;

  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return v0;

  const Eigen::Vector3d bp = point - v1;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return v1;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return v0 + v * ab;
  }

  const Eigen::Vector3d cp = point - v2;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return v2;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return v0 + w * ac;
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return v1 + w * (v2 - v1);
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return v0 + v * ab + w * ac;
}

double distance_to_mesh(const TriangleMesh& mesh, const Eigen::Vector3d& point) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& tri : mesh.triangles) {
    const Eigen::Vector3d closest = closest_point_on_triangle(
        point, mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]);
    best = std::min(best, (point - closest).norm());
  }
  return best;
}

TriangleMesh load_obj(const std::string& path, std::vector<std::string>* warnings) {
  std::ifstream file(path);
  if (!file) {
    throw Error(ErrorCode::IoError, "cannot open mesh file " + path);
  }
  TriangleMesh mesh;
  std::string line;
  int line_number = 0;
  while (std::getline(file, line)) {
    ++line_number;
    std::istringstream stream(line);
    std::string tag;
    if (!(stream >> tag) || tag.empty() || tag[0] == '#') continue;
    if (tag == "v") {
      Eigen::Vector3d v;
      if (!(stream >> v.x() >> v.y() >> v.z())) {
        throw Error(ErrorCode::IoError, "malformed vertex at line " + std::to_string(line_number));
      }
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::string a, b, c, extra;
      if (!(stream >> a >> b >> c) || (stream >> extra)) {
        if (warnings) {
          warnings->push_back("skipping non-triangular face at line " + std::to_string(line_number));
        }
        continue;
      }
      Eigen::Vector3i tri;
      bool ok = true;
      const std::string* tokens[3] = {&a, &b, &c};
      for (int k = 0; k < 3; ++k) {
        // Accept plain indices and the `i/..` forms by reading the lead integer.
        try {
          tri[k] = std::stoi(*tokens[k]) - 1;
        } catch (const std::exception&) {
          ok = false;
          break;
        }
        if (tri[k] < 0 || tri[k] >= static_cast<int>(mesh.vertices.size())) ok = false;
      }
      if (!ok) {
        if (warnings) {
          warnings->push_back("skipping unparseable face at line " + std::to_string(line_number));
        }
        continue;
      }
      mesh.triangles.push_back(tri);
    } else if (warnings) {
      warnings->push_back("ignoring '" + tag + "' directive at line " + std::to_string(line_number));
    }
  }
  // Degenerate triangles are dropped rather than kept with junk normals.
  TriangleMesh filtered;
  filtered.vertices = mesh.vertices;
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const Eigen::Vector3d& a = mesh.vertices[mesh.triangles[i][0]];
    const Eigen::Vector3d& b = mesh.vertices[mesh.triangles[i][1]];
    const Eigen::Vector3d& c = mesh.vertices[mesh.triangles[i][2]];
    if (0.5 * (b - a).cross(c - a).norm() > 1e-12) {
      filtered.triangles.push_back(mesh.triangles[i]);
    } else if (warnings) {
      warnings->push_back("dropping degenerate triangle " + std::to_string(i));
    }
  }
  filtered.compute_normals();
  return filtered;
}

void save_obj(const TriangleMesh& mesh, const std::string& path) {
  std::ofstream file(path);
  if (!file) {
    throw Error(ErrorCode::IoError, "cannot write mesh file " + path);
  }
  char buffer[256];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buffer, sizeof(buffer), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
    file << buffer;
  }
  for (const auto& t : mesh.triangles) {
    file << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
  }
}

}  // namespace masfm
