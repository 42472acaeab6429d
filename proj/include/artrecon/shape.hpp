#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "artrecon/geom.hpp"

namespace artrecon {

inline constexpr int kDefaultGridResolution = 96;
inline constexpr double kDefaultPadding = 1.2;
inline constexpr std::size_t kCompletionPointCount = 2048;

/// Maps grid coordinates g in [0,1]^3 to world: rotation * (scale .* g) + translation.
struct GridFrame {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  Vec3 scale = Vec3::Ones();

  Vec3 to_world(const Vec3& g) const { return rotation * scale.cwiseProduct(g) + translation; }
  Vec3 to_grid(const Vec3& w) const { return (rotation.transpose() * (w - translation)).cwiseQuotient(scale); }

  /// Frame spanning an axis-aligned box [lo, hi].
  static GridFrame axis_aligned(const Vec3& lo, const Vec3& hi) { return {Mat3::Identity(), lo, hi - lo}; }

  bool operator==(const GridFrame&) const = default;
};

struct GridSpec {
  std::array<int, 3> resolution{kDefaultGridResolution, kDefaultGridResolution, kDefaultGridResolution};
  GridFrame frame;
};

/// Scalar field sampled on nodes. Node (i,j,k) sits at grid coordinate
/// (i/(nx-1), j/(ny-1), k/(nz-1)), so the nodes span the frame edge to edge.
/// Values are stored x-fastest.
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  /// Throws InvalidArgument if a resolution is below 8 or the value count or
  /// range is wrong.
  OccupancyGrid(const GridSpec& spec, std::vector<float> values);
  static OccupancyGrid zeros(const GridSpec& spec);

  const std::array<int, 3>& resolution() const { return spec_.resolution; }
  const GridFrame& frame() const { return spec_.frame; }
  const GridSpec& spec() const { return spec_; }
  const std::vector<float>& values() const { return values_; }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(spec_.resolution[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(spec_.resolution[1]) * static_cast<std::size_t>(k));
  }
  float at(int i, int j, int k) const { return values_[index(i, j, k)]; }
  void set(int i, int j, int k, float v) { values_[index(i, j, k)] = v; }

  Vec3 node_grid(int i, int j, int k) const;
  Vec3 node_world(int i, int j, int k) const { return spec_.frame.to_world(node_grid(i, j, k)); }
  /// Value of the node nearest to `world`, or 0 outside the frame.
  float nearest_value(const Vec3& world) const;

  bool operator==(const OccupancyGrid& other) const {
    return spec_.resolution == other.spec_.resolution && spec_.frame == other.spec_.frame && values_ == other.values_;
  }

 private:
  GridSpec spec_;
  std::vector<float> values_;
};

/// Generalized winding number of a closed triangle mesh at `p`.
double winding_number(const TriMesh& mesh, const Vec3& p);

/// Binary occupancy labels by winding number (threshold 0.5). Within 0.1 of
/// the threshold the label is the majority of three axis-parallel ray-parity
/// tests. Throws NotWatertight with the open-edge count.
OccupancyGrid occupancy_from_mesh(const TriMesh& mesh, const GridSpec& spec);

/// Frame of the partial box fit to `cloud`, inflated by `padding`.
GridFrame normalize_frame(const PointCloud& cloud, double padding = kDefaultPadding);
GridFrame frame_from_obb(const Obb& box, double padding);

struct QuerySample {
  Vec3 point;
  float label = 0.0f;
};

/// floor(occupied_fraction * n) queries start at occupied nodes and are
/// shifted by Gaussian noise of standard deviation `surface_jitter` (world
/// units); their label is re-read at the shifted point. The rest are drawn
/// uniformly inside free cells.
std::vector<QuerySample> sample_training_queries(const OccupancyGrid& grid, std::size_t n, double occupied_fraction,
                                                 double surface_jitter, std::uint64_t seed);

/// Iso-surface with linear edge interpolation, vertices in world
/// coordinates, triangles facing away from the region above `iso`.
/// Throws NoSurface when the field never crosses `iso`.
TriMesh marching_cubes(const OccupancyGrid& grid, double iso = 0.5);

struct CompletionRequest {
  /// Exactly kCompletionPointCount points, in grid coordinates.
  std::vector<Vec3> points;
  Obb partial_box;
  GridSpec grid;
};

/// Fits the partial box, builds the padded frame and resamples the cloud to
/// 2048 points (random subset, or all points plus draws with replacement).
CompletionRequest make_completion_request(const PointCloud& cloud, std::uint64_t seed, int resolution = kDefaultGridResolution,
                                          double padding = kDefaultPadding);

class Completer {
 public:
  virtual ~Completer() = default;
  virtual OccupancyGrid complete(const CompletionRequest& request) const = 0;
};

/// Voxelizes the input points, marking every node within `dilation_cells`
/// node spacings of a point.
class IdentityCompleter : public Completer {
 public:
  explicit IdentityCompleter(double dilation_cells = 2.0) : dilation_cells_(dilation_cells) {}
  OccupancyGrid complete(const CompletionRequest& request) const override;

 private:
  double dilation_cells_;
};

/// Reads a grid produced by an outside model from a file.
class ExternalCompleter : public Completer {
 public:
  explicit ExternalCompleter(std::filesystem::path path) : path_(std::move(path)) {}
  OccupancyGrid complete(const CompletionRequest& request) const override;

 private:
  std::filesystem::path path_;
};

OccupancyGrid complete(const CompletionRequest& request, const Completer& completer);

/// `AOG1` little-endian: magic, 3 x u32 resolution, 15 x f64 frame
/// (row-major rotation, translation, scale), then f32 values x-fastest.
std::string encode_grid(const OccupancyGrid& grid);
OccupancyGrid decode_grid(std::string_view bytes);
void write_grid(const std::filesystem::path& path, const OccupancyGrid& grid);
OccupancyGrid read_grid(const std::filesystem::path& path);

}  // namespace artrecon
