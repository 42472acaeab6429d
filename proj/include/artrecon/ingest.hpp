#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "artrecon/articulation.hpp"

namespace artrecon {

enum class UrdfJointType { Revolute, Prismatic, Fixed, Continuous };

struct UrdfMesh {
  std::string filename;
  /// Mesh frame relative to the link frame.
  RigidTransform origin;
  Vec3 scale = Vec3::Ones();
};

struct UrdfLink {
  std::string name;
  std::vector<UrdfMesh> meshes;
};

struct UrdfLimit {
  double lower = 0.0;
  double upper = 0.0;
};

struct UrdfJoint {
  std::string name;
  UrdfJointType type = UrdfJointType::Fixed;
  std::string parent;
  std::string child;
  /// Child link frame relative to the parent link frame at zero state.
  RigidTransform origin;
  /// In the joint (child link) frame.
  Vec3 axis = Vec3::UnitX();
  std::optional<UrdfLimit> limit;
};

struct UrdfModel {
  std::string name;
  std::vector<UrdfLink> links;
  std::vector<UrdfJoint> joints;
  std::string root;
  /// Elements outside the supported subset that were skipped.
  std::vector<std::string> warnings;
};

/// Reads links (visual meshes, or collision meshes when a link has no
/// visual) and joints. Continuous joints keep their type and have no limit.
/// Throws SyntaxError for malformed XML, UnsupportedJoint for planar,
/// floating or ball joints, UnresolvedLink for dangling references or a
/// missing/ambiguous root.
UrdfModel parse_urdf(std::string_view xml);
/// Rotation for URDF fixed-axis roll, pitch, yaw: Rz(y) * Ry(p) * Rx(r).
Mat3 rpy_to_matrix(const Vec3& rpy);

/// Closed joint interval. Continuous joints and joints without limits have none.
struct JointRange {
  double lower = 0.0;
  double upper = 0.0;
  bool operator==(const JointRange&) const = default;
};

/// Rest-pose object with joint ranges and an observation pose.
struct ObjectBundle {
  std::string id;
  /// Parts in world coordinates at zero joint state; absolute joints.
  ArticulatedObject rest;
  /// Per joint; nullopt means "use the default range".
  std::vector<std::optional<JointRange>> ranges;
  /// Joint states of the observed configuration; empty means rest.
  std::vector<double> pose_states;

  /// The observed configuration (see apply_pose).
  ArticulatedObject posed() const;
};

using MeshLoader = std::function<TriMesh(const std::string& filename)>;

/// Loads meshes relative to `base_dir`; throws MissingMesh naming the file.
MeshLoader directory_mesh_loader(std::filesystem::path base_dir);

/// One part per movable link plus the root; links attached by fixed joints
/// are merged into their parent's part. Meshes are placed in world
/// coordinates at zero state. Throws MissingMesh when a file cannot be
/// loaded or a part ends up with no geometry.
std::vector<Part> group_part_meshes(const UrdfModel& model, const MeshLoader& loader);

/// Parts from group_part_meshes plus absolute joints and URDF limits.
ObjectBundle urdf_to_bundle(const UrdfModel& model, const MeshLoader& loader, std::string id);

inline constexpr double kDefaultRevoluteUpper = 1.5707963267948966;
inline constexpr double kDefaultPrismaticDepthFraction = 0.4;

/// Revolute [0, pi/2]; prismatic [0, 0.4 * depth], where depth is the full
/// extent of the child's rest box along the box axis closest to the joint axis.
JointRange default_range(const Joint& joint, const Obb& child_rest_box);
JointRange effective_range(const ObjectBundle& bundle, std::size_t joint);

/// "Partially open": a state uniformly inside [lo_fraction, hi_fraction] of the range.
struct PoseSampler {
  double lo_fraction = 0.25;
  double hi_fraction = 0.75;
};

std::vector<double> sample_joint_states(const ObjectBundle& bundle, const PoseSampler& sampler, std::uint64_t seed);

/// Moves every part by forward kinematics, refits its box, and carries each
/// joint line along with its parent part. Joint states of the result are 0.
ArticulatedObject apply_pose(const ArticulatedObject& rest, std::span<const double> states);

/// Samples states and applies them. `states_out` receives the states.
ArticulatedObject pose_object(const ObjectBundle& bundle, const PoseSampler& sampler, std::uint64_t seed,
                              std::vector<double>* states_out = nullptr);

/// Rigid motion of the whole object: meshes, clouds and joints move, boxes are refit.
ArticulatedObject transform_object(const ArticulatedObject& object, const RigidTransform& t);

struct DatasetSample {
  std::string prompt;
  std::string completion;
  std::string object_id;
  int pose_index = 0;
  int rotation_index = 0;
  std::uint64_t state_seed = 0;
  double z_rotation = 0.0;
};

struct SkippedSample {
  std::string object_id;
  int pose_index = 0;
  int rotation_index = 0;
  std::string reason;
};

struct Dataset {
  std::vector<DatasetSample> samples;
  std::vector<SkippedSample> skipped;
};

/// For each object, n_poses posed variants times n_rotations random
/// rotations about z; the prompt lists the boxes and the completion the
/// quantized joints.
/// Objects are processed on up to `jobs` threads; output order does not
/// depend on it.
Dataset make_dataset(std::span<const ObjectBundle> objects, int n_rotations = 5, int n_poses = 5, std::uint64_t seed = 0,
                     const PoseSampler& sampler = {}, int jobs = 1);
/// One JSON object per line: {"prompt", "completion", "meta"}.
std::string format_jsonl(const std::vector<DatasetSample>& samples);

/// `<dir>/object.json` plus `<dir>/parts/<name>.obj` for parts with meshes.
void write_bundle(const std::filesystem::path& dir, const ObjectBundle& bundle);
ObjectBundle read_bundle(const std::filesystem::path& dir);

}  // namespace artrecon
