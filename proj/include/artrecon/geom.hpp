#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace artrecon {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kRotationTolerance = 1e-9;
inline constexpr double kDegenerateHalfLength = 1e-6;
inline constexpr double kDegenerateEigenvalue = 1e-12;

/// Squared Euclidean distance, evaluated as ((dx*dx + dy*dy) + dz*dz).
/// All nearest-neighbour code goes through this so that results are
/// reproducible to the bit.
inline double squared_distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x() - b.x();
  const double dy = a.y() - b.y();
  const double dz = a.z() - b.z();
  return dx * dx + dy * dy + dz * dz;
}

bool is_rotation(const Mat3& m, double tolerance = kRotationTolerance);

/// Rotation by `angle` radians about the unit vector `axis`.
Mat3 axis_angle(const Vec3& axis, double angle);
Mat3 rot_z(double angle);

/// Nearest proper rotation (Frobenius sense) to an approximately orthonormal matrix.
Mat3 nearest_rotation(const Mat3& m);

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform translate(const Vec3& t) { return {Mat3::Identity(), t}; }
  /// Rotation about the line through `pivot` with direction `axis`.
  static RigidTransform rotate_about_line(const Vec3& pivot, const Vec3& axis, double angle);

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 apply_direction(const Vec3& d) const { return rotation * d; }
  RigidTransform inverse() const;

  /// (this * other).apply(p) == this->apply(other.apply(p))
  RigidTransform operator*(const RigidTransform& other) const;
};

struct PointCloud {
  std::vector<Vec3> points;
  /// Empty, or one part index per point (-1 = background).
  std::vector<int> labels;

  bool has_labels() const { return !labels.empty(); }
  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

using Face = std::array<int, 3>;

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;

  bool empty() const { return faces.empty(); }
  /// Number of undirected edges not shared by exactly two faces.
  std::size_t open_edge_count() const;
  bool is_watertight() const { return !faces.empty() && open_edge_count() == 0; }
  double surface_area() const;
  /// Signed volume by the divergence theorem; positive for outward-facing triangles.
  double signed_volume() const;
  /// Throws IndexOutOfRange when a face references a missing vertex.
  void validate() const;
};

/// Appends `b` to `a`, reindexing b's faces.
void append_mesh(TriMesh& a, const TriMesh& b);
TriMesh transform_mesh(const RigidTransform& t, const TriMesh& mesh);

/// Oriented bounding box. Columns of `rotation` are the box axes.
class Obb {
 public:
  Obb() = default;
  /// Validates the rotation (throws InvalidArgument) and clamps each
  /// half-length to at least kDegenerateHalfLength.
  Obb(const Vec3& center, const Mat3& rotation, const Vec3& half_lengths, bool degenerate = false);

  /// Accepts a rotation that is only approximately orthonormal (for example
  /// one read back from 4-decimal text) by projecting it onto SO(3).
  static Obb from_approximate(const Vec3& center, const Mat3& rotation, const Vec3& half_lengths);

  const Vec3& center() const { return center_; }
  const Mat3& rotation() const { return rotation_; }
  const Vec3& half_lengths() const { return half_lengths_; }
  Vec3 axis(int i) const { return rotation_.col(i); }
  bool degenerate() const { return degenerate_; }

  bool contains(const Vec3& p, double inflate = 0.0) const;
  double volume() const { return 8.0 * half_lengths_.prod(); }
  std::array<Vec3, 8> corners() const;
  Obb transformed(const RigidTransform& t) const;

 private:
  Vec3 center_ = Vec3::Zero();
  Mat3 rotation_ = Mat3::Identity();
  Vec3 half_lengths_ = Vec3::Constant(kDegenerateHalfLength);
  bool degenerate_ = false;
};

/// Closed 12-triangle mesh of the box surface, outward facing. Vertex i is
/// corners()[i].
TriMesh box_mesh(const Obb& box);

/// PCA box fit. Axes follow descending covariance eigenvalue, each axis is
/// signed so its largest-magnitude component is positive, and the third
/// axis is the cross product of the first two. Collinear or coincident
/// input yields a box flagged degenerate. Throws EmptyInput on no points.
Obb fit_obb(std::span<const Vec3> points);
inline Obb fit_obb(const PointCloud& pc) { return fit_obb(pc.points); }

/// Area-uniform surface samples, deterministic in `seed`.
PointCloud sample_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed);

/// Symmetric Chamfer distance: mean squared nearest-neighbour distance a->b
/// plus b->a, times 1000. Exact (k-d tree) nearest neighbours.
double chamfer(std::span<const Vec3> a, std::span<const Vec3> b);
inline double chamfer(const PointCloud& a, const PointCloud& b) { return chamfer(a.points, b.points); }

/// Mean over `queries` of the squared distance to the nearest point of `targets`.
double mean_squared_nn_distance(std::span<const Vec3> queries, std::span<const Vec3> targets);

inline constexpr double kChamferScale = 1000.0;
inline constexpr const char* kChamferConvention = "sum_of_mean_squared_nn_x1000";

PointCloud transform_points(const RigidTransform& t, const PointCloud& pc);

}  // namespace artrecon
