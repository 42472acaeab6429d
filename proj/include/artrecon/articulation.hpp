#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "artrecon/geom.hpp"

namespace artrecon {

enum class JointType { Prismatic, Revolute };

std::string_view to_string(JointType type);
JointType joint_type_from_string(std::string_view text);

/// Absolute joint. `axis` is a unit vector in the parent frame; `pivot` is a
/// point on the rotation line and exists only for revolute joints. `state`
/// is a translation (prismatic) or angle in radians (revolute).
struct Joint {
  JointType type = JointType::Revolute;
  Vec3 axis = Vec3::UnitZ();
  std::optional<Vec3> pivot;
  int parent = 0;
  int child = 1;
  double state = 0.0;
};

using EdgeSigns = std::array<int, 2>;

/// Joint expressed against the child part's box: axis = sign * column
/// `axis_idx` of the box rotation, pivot = the box edge parallel to that
/// axis selected by `edge_signs` along the two remaining axes in cyclic
/// order (axis_idx+1, axis_idx+2).
struct RelativeJoint {
  JointType type = JointType::Revolute;
  int parent = 0;
  int child = 1;
  int axis_idx = 0;
  int axis_sign = 1;
  std::optional<EdgeSigns> edge_signs;

  bool operator==(const RelativeJoint&) const = default;
};

struct Part {
  std::string name;
  std::optional<TriMesh> mesh;
  std::optional<PointCloud> cloud;
  Obb obb;
};

struct ArticulatedObject {
  std::vector<Part> parts;
  std::vector<Joint> joints;
  int root = 0;
};

Vec3 resolve_axis(const Obb& obb, int axis_idx, int axis_sign);
/// Midpoint of the selected box edge.
Vec3 resolve_edge(const Obb& obb, int axis_idx, const EdgeSigns& edge_signs);

/// Nearest OBB-relative encoding. Ties go to the lowest axis index, then
/// to the first of (+1,+1), (+1,-1), (-1,+1), (-1,-1).
RelativeJoint quantize_joint(const Joint& joint, const Obb& child_obb);
Joint dequantize_joint(const RelativeJoint& joint, const Obb& child_obb);

/// Distance from `point` to the infinite line through `origin` along unit `direction`.
double point_line_distance(const Vec3& point, const Vec3& origin, const Vec3& direction);

/// Motion of the child relative to the parent for the given state.
RigidTransform joint_motion(const Joint& joint, double state);

/// Per-part transform; the root is the identity and each child is its
/// parent's transform composed with its joint motion.
std::vector<RigidTransform> forward_kinematics(const ArticulatedObject& object, std::span<const double> states);

enum class TreeIssue { IndexOutOfRange, SelfLoop, MultipleParents, RootHasParent, CycleDetected, OrphanPart };

std::string_view to_string(TreeIssue issue);

struct TreeDiagnostic {
  TreeIssue issue;
  int part = -1;
  int joint = -1;
  std::string message;
};

std::vector<TreeDiagnostic> validate_tree(const ArticulatedObject& object);

/// Throws CycleDetected or IndexOutOfRange for the first diagnostic, if any.
void require_tree(const ArticulatedObject& object);

/// Joints in an order where every parent is placed before its children.
std::vector<int> topological_joint_order(const ArticulatedObject& object);

}  // namespace artrecon
