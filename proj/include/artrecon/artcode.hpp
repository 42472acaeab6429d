#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "artrecon/articulation.hpp"
#include "artrecon/geom.hpp"

namespace artrecon {

/// Joint line formats. EdgeAxis selects a box axis and box edge; the two
/// numeric forms exist so regression-style outputs can be parsed and scored.
enum class Dialect { EdgeAxis, AbsoluteNumeric, RelativeToCenter };

std::string_view to_string(Dialect dialect);
Dialect dialect_from_string(std::string_view text);

/// A `bbox_<index> = OBB(...)` line, values as written.
struct BoxEntry {
  Vec3 center = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  Vec3 half = Vec3::Ones();

  bool operator==(const BoxEntry&) const = default;

  static BoxEntry from_obb(const Obb& obb) { return {obb.center(), obb.rotation(), obb.half_lengths()}; }
  Obb to_obb() const { return Obb::from_approximate(center, rotation, half); }
};

/// `axis=[x, y, z], pos=[x, y, z]`
struct AbsoluteJoint {
  JointType type = JointType::Revolute;
  int parent = 0;
  int child = 1;
  Vec3 axis = Vec3::UnitZ();
  std::optional<Vec3> position;

  bool operator==(const AbsoluteJoint&) const = default;
};

/// `axis=Axis(...), offset=[a, b]`: pivot = center + a*r_j + b*r_k with
/// (j, k) the two remaining axes in cyclic order.
struct CenterOffsetJoint {
  JointType type = JointType::Revolute;
  int parent = 0;
  int child = 1;
  int axis_idx = 0;
  int axis_sign = 1;
  std::optional<std::array<double, 2>> offset;

  bool operator==(const CenterOffsetJoint&) const = default;
};

using JointLine = std::variant<RelativeJoint, AbsoluteJoint, CenterOffsetJoint>;

Dialect dialect_of(const JointLine& line);
int parent_of(const JointLine& line);
int child_of(const JointLine& line);
JointType type_of(const JointLine& line);

inline constexpr const char* kArtCodeVersion = "artcode/1";

struct ArtCodeDocument {
  Dialect dialect = Dialect::EdgeAxis;
  std::vector<BoxEntry> boxes;
  std::vector<JointLine> joints;
  std::string format_version = kArtCodeVersion;

  bool operator==(const ArtCodeDocument&) const = default;
};

/// Box lines followed by the literal line `joints = [`.
std::string emit_prompt(std::span<const Obb> boxes);
std::string emit_prompt(std::span<const BoxEntry> boxes);

/// `joints = [`, one line per joint, then `]`. Every line must belong to `dialect`.
std::string emit_joints(std::span<const JointLine> joints, Dialect dialect);
std::string emit_joints(std::span<const RelativeJoint> joints);
/// The joint block without its `joints = [` header, so that
/// emit_prompt(...) + emit_completion(...) is a whole document.
std::string emit_completion(std::span<const RelativeJoint> joints);

/// Box lines followed by the joint block.
std::string emit_document(const ArtCodeDocument& doc);

/// Tolerant parse of model output: code fences and prose before the first
/// `bbox_`/`joints`/`Joint(` line are dropped, anything after the closing
/// `]` is ignored, and whitespace is free. Joint-only text may omit the
/// `joints = [` header. When the text has no box lines, `boxes` (if given)
/// is used to resolve part indices.
ArtCodeDocument parse_artcode(std::string_view text, Dialect dialect = Dialect::EdgeAxis,
                              std::span<const BoxEntry> boxes = {});

/// Absolute joint for one line, resolved against its child box.
Joint resolve_joint(const JointLine& line, const Obb& child_box);

struct Execution {
  ArticulatedObject object;
  std::vector<RigidTransform> transforms;
};

/// Builds the object from the document's boxes and runs forward kinematics.
/// Empty `states` means all zeros.
Execution execute(const ArtCodeDocument& doc, std::span<const double> states = {});
/// Same, resolving joints against full-precision boxes instead of the
/// document's box table.
Execution execute(const ArtCodeDocument& doc, std::span<const Obb> boxes, std::span<const double> states);

struct MjcfOptions {
  std::string model_name = "object";
  /// When set, part i is drawn with mesh file `mesh_dir/<part name>.obj`
  /// (vertices given in the object frame); otherwise with a box geom.
  std::optional<std::string> mesh_dir;
};

/// MJCF with bodies nested along the kinematic tree. Each body frame sits at
/// its part's box center, so joint `pos` is the pivot relative to that center.
std::string export_mjcf(const ArticulatedObject& object, std::span<const double> states, const MjcfOptions& options = {});
std::string export_mjcf(const ArtCodeDocument& doc, std::span<const double> states, const MjcfOptions& options = {});

}  // namespace artrecon
