#include "artrecon/articulation.hpp"

#include <cmath>
#include <limits>

#include "artrecon/error.hpp"

namespace artrecon {

std::string_view to_string(JointType type) { return type == JointType::Prismatic ? "prismatic" : "revolute"; }

JointType joint_type_from_string(std::string_view text) {
  if (text == "prismatic") return JointType::Prismatic;
  if (text == "revolute") return JointType::Revolute;
  throw Error(ErrorCode::InvalidArgument, "unknown joint type '" + std::string(text) + "'");
}

namespace {

void check_axis_index(int axis_idx) {
  if (axis_idx < 0 || axis_idx > 2) {
    throw Error(ErrorCode::InvalidAxisIndex, "axis index " + std::to_string(axis_idx) + " not in {0,1,2}");
  }
}

void check_sign(int sign, const char* what) {
  if (sign != 1 && sign != -1) throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be +1 or -1");
}

constexpr std::array<EdgeSigns, 4> kEdgeOrder{{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};
constexpr double kQuantizeTieWindow = 1e-6;

}  // namespace

Vec3 resolve_axis(const Obb& obb, int axis_idx, int axis_sign) {
  check_axis_index(axis_idx);
  check_sign(axis_sign, "axis sign");
  return static_cast<double>(axis_sign) * obb.axis(axis_idx);
}

Vec3 resolve_edge(const Obb& obb, int axis_idx, const EdgeSigns& edge_signs) {
  check_axis_index(axis_idx);
  check_sign(edge_signs[0], "edge sign");
  check_sign(edge_signs[1], "edge sign");
  const int j = (axis_idx + 1) % 3;
  const int k = (axis_idx + 2) % 3;
  const Vec3& h = obb.half_lengths();
  return obb.center() + (edge_signs[0] * h[j]) * obb.axis(j) + (edge_signs[1] * h[k]) * obb.axis(k);
}

double point_line_distance(const Vec3& point, const Vec3& origin, const Vec3& direction) {
  return (point - origin).cross(direction).norm();
}

RelativeJoint quantize_joint(const Joint& joint, const Obb& child_obb) {
  if (joint.type == JointType::Revolute && !joint.pivot) {
    throw Error(ErrorCode::MissingPivot, "revolute joint without pivot");
  }
  std::array<double, 3> dots{};
  int best = 0;
  for (int i = 0; i < 3; ++i) {
    dots[i] = joint.axis.dot(child_obb.axis(i));
    if (std::abs(dots[i]) > std::abs(dots[best])) best = i;
  }
  if (child_obb.degenerate()) {
    for (int i = 0; i < 3; ++i) {
      if (i != best && std::abs(std::abs(dots[i]) - std::abs(dots[best])) <= kQuantizeTieWindow) {
        throw Error(ErrorCode::DegenerateGeometry, "joint axis is equidistant to two axes of a degenerate box");
      }
    }
  }

  RelativeJoint out;
  out.type = joint.type;
  out.parent = joint.parent;
  out.child = joint.child;
  out.axis_idx = best;
  out.axis_sign = dots[best] < 0.0 ? -1 : 1;
  if (joint.type == JointType::Revolute) {
    const Vec3 direction = joint.axis.normalized();
    double best_distance = std::numeric_limits<double>::infinity();
    for (const EdgeSigns& signs : kEdgeOrder) {
      const double d = point_line_distance(resolve_edge(child_obb, best, signs), *joint.pivot, direction);
      if (d < best_distance) {
        best_distance = d;
        out.edge_signs = signs;
      }
    }
  }
  return out;
}

Joint dequantize_joint(const RelativeJoint& rj, const Obb& child_obb) {
  Joint j;
  j.type = rj.type;
  j.parent = rj.parent;
  j.child = rj.child;
  j.axis = resolve_axis(child_obb, rj.axis_idx, rj.axis_sign);
  if (rj.type == JointType::Revolute) {
    if (!rj.edge_signs) throw Error(ErrorCode::MissingPivot, "revolute joint without edge selection");
    j.pivot = resolve_edge(child_obb, rj.axis_idx, *rj.edge_signs);
  }
  return j;
}

RigidTransform joint_motion(const Joint& joint, double state) {
  if (joint.type == JointType::Prismatic) return RigidTransform::translate(state * joint.axis);
  if (!joint.pivot) throw Error(ErrorCode::MissingPivot, "revolute joint without pivot");
  return RigidTransform::rotate_about_line(*joint.pivot, joint.axis, state);
}

std::string_view to_string(TreeIssue issue) {
  switch (issue) {
    case TreeIssue::IndexOutOfRange: return "IndexOutOfRange";
    case TreeIssue::SelfLoop: return "SelfLoop";
    case TreeIssue::MultipleParents: return "MultipleParents";
    case TreeIssue::RootHasParent: return "RootHasParent";
    case TreeIssue::CycleDetected: return "CycleDetected";
    case TreeIssue::OrphanPart: return "OrphanPart";
  }
  return "Unknown";
}

std::vector<TreeDiagnostic> validate_tree(const ArticulatedObject& object) {
  std::vector<TreeDiagnostic> out;
  const auto n = static_cast<int>(object.parts.size());
  if (object.root < 0 || object.root >= n) {
    out.push_back({TreeIssue::IndexOutOfRange, object.root, -1, "root index out of range"});
    return out;
  }
  std::vector<std::vector<int>> children(n);
  std::vector<int> parent_joint(n, -1);
  for (int j = 0; j < static_cast<int>(object.joints.size()); ++j) {
    const Joint& joint = object.joints[j];
    if (joint.parent < 0 || joint.parent >= n || joint.child < 0 || joint.child >= n) {
      out.push_back({TreeIssue::IndexOutOfRange, -1, j,
                     "joint " + std::to_string(j) + " references part outside [0," + std::to_string(n) + ")"});
      continue;
    }
    if (joint.parent == joint.child) {
      out.push_back({TreeIssue::SelfLoop, joint.child, j, "joint " + std::to_string(j) + " connects a part to itself"});
      continue;
    }
    if (joint.child == object.root) {
      out.push_back({TreeIssue::RootHasParent, joint.child, j, "root part is the child of joint " + std::to_string(j)});
    }
    if (parent_joint[joint.child] >= 0) {
      out.push_back({TreeIssue::MultipleParents, joint.child, j,
                     "part " + std::to_string(joint.child) + " has more than one parent joint"});
    } else {
      parent_joint[joint.child] = j;
    }
    children[joint.parent].push_back(joint.child);
  }

  // Cycle search over every parent->child edge (iterative colouring DFS).
  std::vector<int> colour(n, 0);
  bool cycle = false;
  for (int start = 0; start < n && !cycle; ++start) {
    if (colour[start] != 0) continue;
    std::vector<std::pair<int, std::size_t>> stack{{start, 0}};
    colour[start] = 1;
    while (!stack.empty() && !cycle) {
      auto& [node, next] = stack.back();
      if (next < children[node].size()) {
        const int c = children[node][next++];
        if (colour[c] == 1) {
          cycle = true;
          out.push_back({TreeIssue::CycleDetected, c, -1, "cycle through part " + std::to_string(c)});
        } else if (colour[c] == 0) {
          colour[c] = 1;
          stack.emplace_back(c, 0);
        }
      } else {
        colour[node] = 2;
        stack.pop_back();
      }
    }
  }

  std::vector<bool> reached(n, false);
  std::vector<int> frontier{object.root};
  reached[object.root] = true;
  while (!frontier.empty()) {
    const int p = frontier.back();
    frontier.pop_back();
    for (int c : children[p]) {
      if (!reached[c]) {
        reached[c] = true;
        frontier.push_back(c);
      }
    }
  }
  for (int p = 0; p < n; ++p) {
    if (!reached[p]) out.push_back({TreeIssue::OrphanPart, p, -1, "part " + std::to_string(p) + " unreachable from root"});
  }
  return out;
}

void require_tree(const ArticulatedObject& object) {
  const auto diagnostics = validate_tree(object);
  if (diagnostics.empty()) return;
  const TreeDiagnostic& d = diagnostics.front();
  if (d.issue == TreeIssue::IndexOutOfRange) throw Error(ErrorCode::IndexOutOfRange, d.message);
  throw Error(ErrorCode::CycleDetected, std::string(to_string(d.issue)) + ": " + d.message);
}

std::vector<int> topological_joint_order(const ArticulatedObject& object) {
  require_tree(object);
  const auto n = static_cast<int>(object.parts.size());
  std::vector<std::vector<int>> child_joints(n);
  for (int j = 0; j < static_cast<int>(object.joints.size()); ++j) child_joints[object.joints[j].parent].push_back(j);
  std::vector<int> order;
  std::vector<int> frontier{object.root};
  for (std::size_t head = 0; head < frontier.size(); ++head) {
    for (int j : child_joints[frontier[head]]) {
      order.push_back(j);
      frontier.push_back(object.joints[j].child);
    }
  }
  return order;
}

std::vector<RigidTransform> forward_kinematics(const ArticulatedObject& object, std::span<const double> states) {
  if (states.size() != object.joints.size()) {
    throw Error(ErrorCode::StateLengthMismatch, "expected " + std::to_string(object.joints.size()) + " states, got " +
                                                    std::to_string(states.size()));
  }
  std::vector<RigidTransform> transforms(object.parts.size());
  for (int j : topological_joint_order(object)) {
    const Joint& joint = object.joints[j];
    transforms[joint.child] = transforms[joint.parent] * joint_motion(joint, states[j]);
  }
  return transforms;
}

}  // namespace artrecon
