#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "artrecon/geom.hpp"

namespace artrecon {

/// Binary mask with ranking scores. Bits are row-major, top row first.
struct ScoredMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;
  double confidence = 1.0;
  double stability = 1.0;

  bool at(int u, int v) const { return bits[static_cast<std::size_t>(v) * width + u] != 0; }
  double score() const { return confidence * stability; }
  std::size_t area() const;
};

double mask_iou(const ScoredMask& a, const ScoredMask& b);

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
};

/// Pinhole view. The camera looks down +z with the image origin top-left,
/// u = fx*x/z + cx, v = fy*y/z + cy. Pixel (i, j) sits at (u, v) = (i, j).
/// Depth is z in the camera frame, 0 where invalid, stored row-major.
struct CameraView {
  Intrinsics intrinsics;
  RigidTransform world_to_cam;
  std::vector<float> depth;
  std::vector<ScoredMask> masks;

  float depth_at(int u, int v) const { return depth[static_cast<std::size_t>(v) * intrinsics.width + u]; }
  /// Throws InvalidArgument when sizes disagree or values are out of range.
  void validate() const;
};

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
  bool in_frame = false;
};

inline constexpr double kMinProjectionDepth = 1e-9;

/// Throws BehindCamera when the camera-frame z is not above 1e-9.
/// in_frame is false (the OutOfFrame flag) outside [0,w) x [0,h).
Projection project(const Vec3& point, const CameraView& view);
Vec3 unproject(const CameraView& view, double u, double v, double depth);
/// Every valid-depth pixel lifted to world coordinates, row-major order.
PointCloud backproject(const CameraView& view);

/// Sorts by confidence * stability (descending, stable) and greedily keeps
/// masks whose IoU with every kept mask is at most `iou_threshold`.
std::vector<ScoredMask> rank_and_nms(std::vector<ScoredMask> masks, double iou_threshold = 0.7);

/// Dense per-pixel world points from an external stereo model, already
/// aligned across views.
struct PointMap {
  int width = 0;
  int height = 0;
  std::vector<Vec3> points;
  std::vector<std::uint8_t> valid;
  std::vector<ScoredMask> masks;

  bool is_valid(int u, int v) const { return valid[static_cast<std::size_t>(v) * width + u] != 0; }
  const Vec3& at(int u, int v) const { return points[static_cast<std::size_t>(v) * width + u]; }
  void validate() const;
};

struct PointMapSet {
  std::vector<PointMap> views;
};

struct FusionOptions {
  double iou_threshold = 0.7;
  /// Masks in different views with at least this IoU over mutually visible
  /// points are the same part.
  double group_overlap = 0.5;
  /// A point counts as visible in a camera view when its depth agrees with
  /// the depth map there within this distance.
  double depth_tolerance = 0.02;
  /// A point is located in a point-map view when a valid pixel's point lies
  /// within this distance.
  double dist_threshold = 0.02;
};

/// Back-projects every view, groups masks across views and labels each
/// point by a confidence-weighted vote over the views that see it. Ties go
/// to the group of the point's own view; points with no vote get -1.
/// n_seeds > 0 keeps a seeded random subset of that many points.
PointCloud fuse_labels(const std::vector<CameraView>& views, std::size_t n_seeds, std::uint64_t seed,
                       const FusionOptions& options = {});
PointCloud fuse_labels(const PointMapSet& maps, std::size_t n_seeds, std::uint64_t seed, const FusionOptions& options = {});

struct Pixel {
  int u = 0;
  int v = 0;
  bool operator==(const Pixel&) const = default;
};

/// For each prompt pixel on view 0, the nearest valid pixel of every view
/// (by 3-D distance), or nullopt when farther than `dist_threshold`.
/// Result is indexed [prompt][view]. Throws InvalidPrompt for a prompt
/// without a valid 3-D point.
std::vector<std::vector<std::optional<Pixel>>> match_prompts_pointmap(const PointMapSet& maps,
                                                                      const std::vector<Pixel>& prompts,
                                                                      double dist_threshold);

// File formats.

/// `{fx, fy, cx, cy, width, height, world_to_cam: [16 row-major]}`
Intrinsics parse_camera_json(std::string_view text, RigidTransform& world_to_cam);
std::string format_camera_json(const Intrinsics& intrinsics, const RigidTransform& world_to_cam);

/// Single-channel PFM ("Pf"); rows are returned top row first.
std::vector<float> read_pfm(const std::filesystem::path& path, int& width, int& height);
void write_pfm(const std::filesystem::path& path, const std::vector<float>& values, int width, int height);

/// 8-bit grey PNG, nonzero = in mask, plus a `{confidence, stability}` sidecar
/// next to it with the extension replaced by `.json`.
ScoredMask read_mask(const std::filesystem::path& png_path);
void write_mask(const std::filesystem::path& png_path, const ScoredMask& mask);

/// `APM1` little-endian: magic, u32 width, u32 height, width*height*3 f32
/// points, width*height u8 validity.
PointMap read_point_map(const std::filesystem::path& path);
void write_point_map(const std::filesystem::path& path, const PointMap& map);

/// Loads `<dir>/camera.json`, `<dir>/depth.pfm` and `<dir>/masks/mask_<k>.png`.
CameraView read_camera_view(const std::filesystem::path& dir);
void write_camera_view(const std::filesystem::path& dir, const CameraView& view);
/// Loads `<dir>/pointmap.apm` and its masks.
PointMap read_point_map_view(const std::filesystem::path& dir);

}  // namespace artrecon
