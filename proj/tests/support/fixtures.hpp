#pragma once

// Synthetic objects, URDF fixtures and a ray-cast renderer shared by the
// tests and the acceptance binary.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "artrecon/articulation.hpp"
#include "artrecon/fusion.hpp"
#include "artrecon/ingest.hpp"

namespace artrecon::fixtures {

/// Axis-aligned box in world coordinates at rest.
struct Cuboid {
  std::string name;
  Vec3 center = Vec3::Zero();
  Vec3 half = Vec3::Ones();
};

struct CuboidJoint {
  JointType type = JointType::Revolute;
  int parent = 0;
  int child = 1;
  Vec3 axis = Vec3::UnitZ();
  /// Point on the hinge line (revolute only).
  Vec3 pivot = Vec3::Zero();
  double lower = 0.0;
  double upper = 0.0;
};

/// Part 0 is the body. `extras[i]` are boxes merged into part i by fixed
/// joints in the URDF.
struct CuboidObject {
  std::string id;
  std::vector<Cuboid> parts;
  std::vector<std::vector<Cuboid>> extras;
  std::vector<CuboidJoint> joints;
};

/// Body with one door hinged on its left front edge.
CuboidObject two_part_cabinet();
/// Body with a grid of doors (vertical or horizontal hinges on box edges)
/// and drawers (sliding along a box axis). Every box has three distinct
/// half-lengths so its fitted axes are unique. `n_parts` in [2, 10].
CuboidObject random_cuboid_object(std::uint64_t seed, int n_parts, std::string id);

/// Expected rest object: one box mesh per part (extras appended).
ArticulatedObject to_articulated(const CuboidObject& object);
ObjectBundle to_bundle(const CuboidObject& object);

/// Writes `dir/mobility.urdf` and `dir/textured_objs/*.obj`. Link frames
/// sit on the joint lines with a rotation from `link_rpy_seed` (0 = none),
/// so mesh vertices and axes are stored in rotated local frames.
void write_urdf_fixture(const std::filesystem::path& dir, const CuboidObject& object, std::uint64_t link_rpy_seed = 0);

struct RenderOptions {
  int width = 128;
  int height = 96;
  double fov_deg = 50.0;
  int views = 4;
  /// Camera distance as a multiple of the bounding-sphere radius.
  double distance_factor = 2.6;
  double elevation_deg = 25.0;
  /// Azimuths spread over this arc centred on the -y (front) direction.
  double arc_deg = 120.0;
};

struct RenderedView {
  CameraView view;
  /// Part hit at each pixel, -1 for background; row-major.
  std::vector<int> part_ids;
};

/// Ray-cast depth and one mask per visible part (confidence decreasing
/// slightly with part index).
std::vector<RenderedView> render_views(const ArticulatedObject& object, const RenderOptions& options = {});
/// Point map from the exact ray hits with the same masks.
PointMap to_point_map(const RenderedView& rendered);

/// Look-at camera: +z towards `target`, +y image-down.
RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

void write_views(const std::filesystem::path& dir, const std::vector<RenderedView>& views);

/// Nearest ray hit of the triangles, or a negative value.
double ray_mesh_hit(const TriMesh& mesh, const Vec3& origin, const Vec3& dir);

}  // namespace artrecon::fixtures
