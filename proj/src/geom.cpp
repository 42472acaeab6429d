#include "artrecon/geom.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "artrecon/error.hpp"
#include "artrecon/kdtree.hpp"
#include "artrecon/rng.hpp"

namespace artrecon {

bool is_rotation(const Mat3& m, double tolerance) {
  if (!m.allFinite()) return false;
  const double orth = (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
  return orth <= tolerance && std::abs(m.determinant() - 1.0) <= tolerance;
}

Mat3 axis_angle(const Vec3& axis, double angle) { return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix(); }

Mat3 rot_z(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 r;
  r << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return r;
}

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) *= -1.0;
  return u * v.transpose();
}

RigidTransform RigidTransform::rotate_about_line(const Vec3& pivot, const Vec3& axis, double angle) {
  const Mat3 r = axis_angle(axis, angle);
  return {r, pivot - r * pivot};
}

RigidTransform RigidTransform::inverse() const {
  const Mat3 rt = rotation.transpose();
  return {rt, -(rt * translation)};
}

RigidTransform RigidTransform::operator*(const RigidTransform& other) const {
  return {rotation * other.rotation, rotation * other.translation + translation};
}

std::size_t TriMesh::open_edge_count() const {
  std::map<std::pair<int, int>, int> uses;
  for (const Face& f : faces) {
    for (int k = 0; k < 3; ++k) {
      int a = f[k];
      int b = f[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      ++uses[{a, b}];
    }
  }
  std::size_t open = 0;
  for (const auto& [edge, count] : uses) {
    if (count != 2) ++open;
  }
  return open;
}

double TriMesh::surface_area() const {
  double area = 0.0;
  for (const Face& f : faces) {
    area += 0.5 * (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]).norm();
  }
  return area;
}

double TriMesh::signed_volume() const {
  double volume = 0.0;
  for (const Face& f : faces) volume += vertices[f[0]].dot(vertices[f[1]].cross(vertices[f[2]])) / 6.0;
  return volume;
}

void TriMesh::validate() const {
  const auto n = static_cast<int>(vertices.size());
  for (const Face& f : faces) {
    for (int idx : f) {
      if (idx < 0 || idx >= n) {
        throw Error(ErrorCode::IndexOutOfRange,
                    "face index " + std::to_string(idx) + " outside " + std::to_string(n) + " vertices");
      }
    }
  }
}

void append_mesh(TriMesh& a, const TriMesh& b) {
  const auto offset = static_cast<int>(a.vertices.size());
  a.vertices.insert(a.vertices.end(), b.vertices.begin(), b.vertices.end());
  a.faces.reserve(a.faces.size() + b.faces.size());
  for (const Face& f : b.faces) a.faces.push_back({f[0] + offset, f[1] + offset, f[2] + offset});
}

TriMesh transform_mesh(const RigidTransform& t, const TriMesh& mesh) {
  TriMesh out = mesh;
  for (Vec3& v : out.vertices) v = t.apply(v);
  return out;
}

Obb::Obb(const Vec3& center, const Mat3& rotation, const Vec3& half_lengths, bool degenerate)
    : center_(center), rotation_(rotation), half_lengths_(half_lengths), degenerate_(degenerate) {
  if (!center.allFinite() || !half_lengths.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite box");
  if (!is_rotation(rotation)) throw Error(ErrorCode::InvalidArgument, "box rotation is not a proper rotation");
  half_lengths_ = half_lengths_.cwiseMax(kDegenerateHalfLength);
}

Obb Obb::from_approximate(const Vec3& center, const Mat3& rotation, const Vec3& half_lengths) {
  return Obb(center, nearest_rotation(rotation), half_lengths);
}

bool Obb::contains(const Vec3& p, double inflate) const {
  const Vec3 local = rotation_.transpose() * (p - center_);
  return (local.cwiseAbs().array() <= half_lengths_.array() + inflate).all();
}

std::array<Vec3, 8> Obb::corners() const {
  std::array<Vec3, 8> out;
  for (int i = 0; i < 8; ++i) {
    const Vec3 s((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
    out[i] = center_ + rotation_ * s.cwiseProduct(half_lengths_);
  }
  return out;
}

TriMesh box_mesh(const Obb& box) {
  static constexpr std::array<std::array<int, 4>, 6> kQuads{{
      {0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6},
  }};
  TriMesh mesh;
  const auto corners = box.corners();
  mesh.vertices.assign(corners.begin(), corners.end());
  for (const auto& q : kQuads) {
    mesh.faces.push_back({q[0], q[1], q[2]});
    mesh.faces.push_back({q[0], q[2], q[3]});
  }
  return mesh;
}

Obb Obb::transformed(const RigidTransform& t) const {
  return Obb(t.apply(center_), nearest_rotation(t.rotation * rotation_), half_lengths_, degenerate_);
}

namespace {

void canonical_sign(Eigen::Ref<Vec3> axis) {
  int largest = 0;
  axis.cwiseAbs().maxCoeff(&largest);
  if (axis[largest] < 0.0) axis = -axis;
}

}  // namespace

Obb fit_obb(std::span<const Vec3> points) {
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "fit_obb on empty point set");
  const auto n = static_cast<double>(points.size());
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : points) mean += p;
  mean /= n;
  Mat3 cov = Mat3::Zero();
  for (const Vec3& p : points) {
    const Vec3 d = p - mean;
    cov += d * d.transpose();
  }
  cov /= n;

  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  const Vec3 eigenvalues = solver.eigenvalues();  // ascending
  const Mat3 vectors = solver.eigenvectors();
  Mat3 axes;
  for (int i = 0; i < 3; ++i) axes.col(i) = vectors.col(2 - i).normalized();
  canonical_sign(axes.col(0));
  canonical_sign(axes.col(1));
  axes.col(1) = (axes.col(1) - axes.col(1).dot(axes.col(0)) * axes.col(0)).normalized();
  axes.col(2) = axes.col(0).cross(axes.col(1));

  int tiny = 0;
  for (int i = 0; i < 3; ++i) {
    if (eigenvalues[i] < kDegenerateEigenvalue) ++tiny;
  }

  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Vec3& p : points) {
    const Vec3 local = axes.transpose() * (p - mean);
    lo = lo.cwiseMin(local);
    hi = hi.cwiseMax(local);
  }
  const Vec3 mid = 0.5 * (lo + hi);
  return Obb(mean + axes * mid, axes, 0.5 * (hi - lo), tiny >= 2);
}

PointCloud sample_surface(const TriMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (mesh.faces.empty()) throw Error(ErrorCode::EmptyInput, "sample_surface on mesh without faces");
  mesh.validate();
  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    const Face& f = mesh.faces[i];
    total += 0.5 * (mesh.vertices[f[1]] - mesh.vertices[f[0]]).cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]).norm();
    cumulative[i] = total;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::DegenerateGeometry, "mesh has zero surface area");

  Rng rng(seed);
  PointCloud out;
  out.points.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double target = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    if (it == cumulative.end()) --it;
    const Face& f = mesh.faces[static_cast<std::size_t>(it - cumulative.begin())];
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    out.points.push_back((1.0 - r1) * mesh.vertices[f[0]] + r1 * (1.0 - r2) * mesh.vertices[f[1]] +
                         r1 * r2 * mesh.vertices[f[2]]);
  }
  return out;
}

double mean_squared_nn_distance(std::span<const Vec3> queries, std::span<const Vec3> targets) {
  if (queries.empty() || targets.empty()) throw Error(ErrorCode::EmptyInput, "nearest-neighbour on empty cloud");
  const KdTree tree(targets);
  double sum = 0.0;
  for (const Vec3& q : queries) sum += tree.nearest(q).squared_distance;
  return sum / static_cast<double>(queries.size());
}

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyInput, "chamfer on empty cloud");
  return (mean_squared_nn_distance(a, b) + mean_squared_nn_distance(b, a)) * kChamferScale;
}

PointCloud transform_points(const RigidTransform& t, const PointCloud& pc) {
  PointCloud out = pc;
  for (Vec3& p : out.points) p = t.apply(p);
  return out;
}

}  // namespace artrecon
