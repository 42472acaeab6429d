#include "artrecon/shape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <unordered_map>

#include "artrecon/error.hpp"
#include "artrecon/mesh_io.hpp"
#include "artrecon/rng.hpp"

namespace artrecon {

OccupancyGrid::OccupancyGrid(const GridSpec& spec, std::vector<float> values) : spec_(spec), values_(std::move(values)) {
  std::size_t count = 1;
  for (int r : spec_.resolution) {
    if (r < 8) throw Error(ErrorCode::InvalidArgument, "grid resolution must be at least 8 per axis");
    count *= static_cast<std::size_t>(r);
  }
  if (values_.size() != count) throw Error(ErrorCode::InvalidArgument, "grid value count does not match resolution");
  for (float v : values_) {
    if (!(v >= 0.0f && v <= 1.0f)) throw Error(ErrorCode::InvalidArgument, "grid value outside [0,1]");
  }
  if ((spec_.frame.scale.array() <= 0.0).any()) throw Error(ErrorCode::InvalidArgument, "grid scale must be positive");
}

OccupancyGrid OccupancyGrid::zeros(const GridSpec& spec) {
  std::size_t count = 1;
  for (int r : spec.resolution) count *= static_cast<std::size_t>(std::max(r, 0));
  return OccupancyGrid(spec, std::vector<float>(count, 0.0f));
}

Vec3 OccupancyGrid::node_grid(int i, int j, int k) const {
  const auto& r = spec_.resolution;
  return {static_cast<double>(i) / (r[0] - 1), static_cast<double>(j) / (r[1] - 1), static_cast<double>(k) / (r[2] - 1)};
}

float OccupancyGrid::nearest_value(const Vec3& world) const {
  const Vec3 g = spec_.frame.to_grid(world);
  std::array<int, 3> n{};
  for (int a = 0; a < 3; ++a) {
    const double x = g[a] * (spec_.resolution[a] - 1);
    if (!(x > -0.5 && x < spec_.resolution[a] - 0.5)) return 0.0f;
    n[a] = static_cast<int>(std::lround(x));
  }
  return at(n[0], n[1], n[2]);
}

// ---------------------------------------------------------------------------
// Winding number and ray parity

double winding_number(const TriMesh& mesh, const Vec3& p) {
  double total = 0.0;
  for (const Face& f : mesh.faces) {
    const Vec3 a = mesh.vertices[f[0]] - p;
    const Vec3 b = mesh.vertices[f[1]] - p;
    const Vec3 c = mesh.vertices[f[2]] - p;
    const double la = a.norm();
    const double lb = b.norm();
    const double lc = c.norm();
    const double numerator = a.dot(b.cross(c));
    const double denominator = la * lb * lc + a.dot(b) * lc + a.dot(c) * lb + b.dot(c) * la;
    total += 2.0 * std::atan2(numerator, denominator);
  }
  return total / (4.0 * std::numbers::pi);
}

namespace {

// Moller-Trumbore, counting hits with t > 0.
int ray_crossings(const TriMesh& mesh, const Vec3& origin, const Vec3& dir) {
  int hits = 0;
  for (const Face& f : mesh.faces) {
    const Vec3& v0 = mesh.vertices[f[0]];
    const Vec3 e1 = mesh.vertices[f[1]] - v0;
    const Vec3 e2 = mesh.vertices[f[2]] - v0;
    const Vec3 pv = dir.cross(e2);
    const double det = e1.dot(pv);
    if (std::abs(det) < 1e-15) continue;
    const double inv = 1.0 / det;
    const Vec3 tv = origin - v0;
    const double u = tv.dot(pv) * inv;
    if (u < 0.0 || u > 1.0) continue;
    const Vec3 qv = tv.cross(e1);
    const double v = dir.dot(qv) * inv;
    if (v < 0.0 || u + v > 1.0) continue;
    if (e2.dot(qv) * inv > 0.0) ++hits;
  }
  return hits;
}

}  // namespace

OccupancyGrid occupancy_from_mesh(const TriMesh& mesh, const GridSpec& spec) {
  mesh.validate();
  if (mesh.faces.empty()) throw Error(ErrorCode::NotWatertight, "mesh has no faces");
  const std::size_t open = mesh.open_edge_count();
  if (open > 0) throw Error(ErrorCode::NotWatertight, std::to_string(open) + " open edges");

  const double orientation = mesh.signed_volume() < 0.0 ? -1.0 : 1.0;
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Vec3& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }

  OccupancyGrid grid = OccupancyGrid::zeros(spec);
  const auto& r = spec.resolution;
  for (int k = 0; k < r[2]; ++k) {
    for (int j = 0; j < r[1]; ++j) {
      for (int i = 0; i < r[0]; ++i) {
        const Vec3 p = grid.node_world(i, j, k);
        // A closed surface has winding number zero outside its bounding box.
        if ((p.array() < lo.array()).any() || (p.array() > hi.array()).any()) continue;
        const double w = orientation * winding_number(mesh, p);
        bool inside = w > 0.5;
        if (std::abs(w - 0.5) < 0.1) {
          int votes = 0;
          for (int a = 0; a < 3; ++a) votes += ray_crossings(mesh, p, Vec3::Unit(a)) % 2;
          inside = votes >= 2;
        }
        if (inside) grid.set(i, j, k, 1.0f);
      }
    }
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Frames and query sampling

GridFrame frame_from_obb(const Obb& box, double padding) {
  if (!(padding > 0.0)) throw Error(ErrorCode::InvalidArgument, "padding must be positive");
  const Vec3 half = padding * box.half_lengths();
  return {box.rotation(), box.center() - box.rotation() * half, 2.0 * half};
}

GridFrame normalize_frame(const PointCloud& cloud, double padding) { return frame_from_obb(fit_obb(cloud), padding); }

std::vector<QuerySample> sample_training_queries(const OccupancyGrid& grid, std::size_t n, double occupied_fraction,
                                                 double surface_jitter, std::uint64_t seed) {
  if (occupied_fraction < 0.0 || occupied_fraction > 1.0) throw Error(ErrorCode::InvalidArgument, "occupied fraction outside [0,1]");
  std::vector<std::size_t> occupied;
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < grid.values().size(); ++i) (grid.values()[i] >= 0.5f ? occupied : free).push_back(i);
  const auto n_occupied = static_cast<std::size_t>(std::floor(occupied_fraction * static_cast<double>(n)));
  const std::size_t n_free = n - n_occupied;
  if (n_occupied > 0 && occupied.empty()) throw Error(ErrorCode::EmptyInput, "grid has no occupied cells");
  if (n_free > 0 && free.empty()) throw Error(ErrorCode::EmptyInput, "grid has no free cells");

  const auto& r = grid.resolution();
  auto node_of = [&](std::size_t flat) {
    const int i = static_cast<int>(flat % r[0]);
    const int j = static_cast<int>((flat / r[0]) % r[1]);
    const int k = static_cast<int>(flat / (static_cast<std::size_t>(r[0]) * r[1]));
    return std::array<int, 3>{i, j, k};
  };
  const Vec3 spacing(1.0 / (r[0] - 1), 1.0 / (r[1] - 1), 1.0 / (r[2] - 1));

  Rng rng(seed);
  std::vector<QuerySample> out;
  out.reserve(n);
  for (std::size_t q = 0; q < n_occupied; ++q) {
    const auto [i, j, k] = node_of(occupied[rng.index(occupied.size())]);
    const Vec3 shift(rng.normal(), rng.normal(), rng.normal());
    const Vec3 p = grid.node_world(i, j, k) + surface_jitter * shift;
    out.push_back({p, grid.nearest_value(p)});
  }
  for (std::size_t q = 0; q < n_free; ++q) {
    const auto [i, j, k] = node_of(free[rng.index(free.size())]);
    const Vec3 offset(rng.uniform(-0.499, 0.499), rng.uniform(-0.499, 0.499), rng.uniform(-0.499, 0.499));
    const Vec3 g = grid.node_grid(i, j, k) + offset.cwiseProduct(spacing);
    out.push_back({grid.frame().to_world(g.cwiseMax(0.0).cwiseMin(1.0)), grid.at(i, j, k)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Marching cubes
//
// The polygon table is derived at start-up. On each cube face the crossing
// points are joined entry -> next exit in the face's counter-clockwise
// order (seen from outside the cube), which always separates diagonal
// inside corners. Both cubes sharing a face derive the same segments, so the
// surface is closed, and the segments chain into loops that are fanned into
// outward-facing triangles.

namespace {

constexpr std::array<std::array<int, 2>, 12> kEdgeCorners{{
    {0, 1}, {2, 3}, {4, 5}, {6, 7},  // along x
    {0, 2}, {1, 3}, {4, 6}, {5, 7},  // along y
    {0, 4}, {1, 5}, {2, 6}, {3, 7},  // along z
}};

// Corner cycles, counter-clockwise seen from outside; corner = x + 2y + 4z.
constexpr std::array<std::array<int, 4>, 6> kFaceCycles{{
    {0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4}, {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6},
}};

int edge_between(int a, int b) {
  if (a > b) std::swap(a, b);
  for (int e = 0; e < 12; ++e) {
    if (kEdgeCorners[e][0] == a && kEdgeCorners[e][1] == b) return e;
  }
  return -1;
}

bool share_face(int e1, int e2) {
  for (const auto& cycle : kFaceCycles) {
    auto on_face = [&](int e) {
      const auto has = [&](int c) { return std::find(cycle.begin(), cycle.end(), c) != cycle.end(); };
      return has(kEdgeCorners[e][0]) && has(kEdgeCorners[e][1]);
    };
    if (on_face(e1) && on_face(e2)) return true;
  }
  return false;
}

// A loop is either fanned from a start crossing, or (fan_start < 0) around
// an extra centre vertex. A fan diagonal between two crossings on the same
// cube face would put a triangle in that face, where the neighbouring cube
// may emit the same triangle, so such starts are rejected.
struct Loop {
  std::vector<int> edges;
  int fan_start = -1;
};

using LoopTable = std::array<std::vector<Loop>, 256>;

LoopTable build_table() {
  LoopTable table;
  for (int config = 0; config < 256; ++config) {
    auto inside = [&](int corner) { return ((config >> corner) & 1) != 0; };
    std::array<int, 12> next{};
    next.fill(-1);
    for (const auto& cycle : kFaceCycles) {
      std::vector<std::pair<int, bool>> crossings;  // (edge, is_entry)
      for (int s = 0; s < 4; ++s) {
        const int a = cycle[s];
        const int b = cycle[(s + 1) % 4];
        if (inside(a) != inside(b)) crossings.emplace_back(edge_between(a, b), inside(b));
      }
      for (std::size_t c = 0; c < crossings.size(); ++c) {
        if (!crossings[c].second) continue;
        for (std::size_t d = 1; d < crossings.size(); ++d) {
          const auto& candidate = crossings[(c + d) % crossings.size()];
          if (!candidate.second) {
            next[crossings[c].first] = candidate.first;
            break;
          }
        }
      }
    }
    std::array<bool, 12> used{};
    for (int start = 0; start < 12; ++start) {
      if (next[start] < 0 || used[start]) continue;
      Loop loop;
      for (int e = start; !used[e]; e = next[e]) {
        used[e] = true;
        loop.edges.push_back(e);
      }
      const int n = static_cast<int>(loop.edges.size());
      for (int s = 0; s < n && loop.fan_start < 0; ++s) {
        bool clean = true;
        for (int t = 2; t + 1 < n && clean; ++t) clean = !share_face(loop.edges[s], loop.edges[(s + t) % n]);
        if (clean) loop.fan_start = s;
      }
      table[config].push_back(std::move(loop));
    }
  }
  return table;
}

const LoopTable& loop_table() {
  static const LoopTable table = build_table();
  return table;
}

}  // namespace

TriMesh marching_cubes(const OccupancyGrid& grid, double iso) {
  const auto& r = grid.resolution();
  const LoopTable& table = loop_table();
  TriMesh mesh;
  std::unordered_map<std::uint64_t, int> vertex_of_edge;

  auto edge_vertex = [&](int i, int j, int k, int axis) {
    const std::uint64_t key = static_cast<std::uint64_t>(grid.index(i, j, k)) * 3 + static_cast<std::uint64_t>(axis);
    auto [it, inserted] = vertex_of_edge.try_emplace(key, static_cast<int>(mesh.vertices.size()));
    if (inserted) {
      std::array<int, 3> other{i, j, k};
      ++other[axis];
      const double v0 = grid.at(i, j, k);
      const double v1 = grid.at(other[0], other[1], other[2]);
      const double t = (iso - v0) / (v1 - v0);
      Vec3 g = grid.node_grid(i, j, k);
      g[axis] += t / (r[axis] - 1);
      mesh.vertices.push_back(grid.frame().to_world(g));
    }
    return it->second;
  };

  for (int k = 0; k + 1 < r[2]; ++k) {
    for (int j = 0; j + 1 < r[1]; ++j) {
      for (int i = 0; i + 1 < r[0]; ++i) {
        int config = 0;
        for (int c = 0; c < 8; ++c) {
          if (grid.at(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)) > iso) config |= 1 << c;
        }
        if (config == 0 || config == 255) continue;
        for (const Loop& loop : table[config]) {
          std::vector<int> ids;
          for (int e : loop.edges) {
            const int c0 = kEdgeCorners[e][0];
            ids.push_back(edge_vertex(i + (c0 & 1), j + ((c0 >> 1) & 1), k + ((c0 >> 2) & 1), e / 4));
          }
          const int n = static_cast<int>(ids.size());
          if (loop.fan_start >= 0) {
            const int s = loop.fan_start;
            for (int t = 1; t + 1 < n; ++t) mesh.faces.push_back({ids[s], ids[(s + t) % n], ids[(s + t + 1) % n]});
          } else {
            Vec3 centre = Vec3::Zero();
            for (int id : ids) centre += mesh.vertices[id];
            const int c = static_cast<int>(mesh.vertices.size());
            mesh.vertices.push_back(centre / n);
            for (int t = 0; t < n; ++t) mesh.faces.push_back({c, ids[t], ids[(t + 1) % n]});
          }
        }
      }
    }
  }
  if (mesh.faces.empty()) throw Error(ErrorCode::NoSurface, "field never crosses iso level " + std::to_string(iso));
  return mesh;
}

// ---------------------------------------------------------------------------
// Completion

CompletionRequest make_completion_request(const PointCloud& cloud, std::uint64_t seed, int resolution, double padding) {
  if (cloud.empty()) throw Error(ErrorCode::EmptyInput, "completion request from empty cloud");
  CompletionRequest req;
  req.partial_box = fit_obb(cloud);
  req.grid.resolution = {resolution, resolution, resolution};
  req.grid.frame = frame_from_obb(req.partial_box, padding);

  Rng rng(seed);
  std::vector<Vec3> chosen;
  chosen.reserve(kCompletionPointCount);
  if (cloud.size() >= kCompletionPointCount) {
    // Partial Fisher-Yates: a uniform subset without replacement.
    std::vector<std::size_t> idx(cloud.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < kCompletionPointCount; ++i) {
      std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
      chosen.push_back(cloud.points[idx[i]]);
    }
  } else {
    chosen = cloud.points;
    while (chosen.size() < kCompletionPointCount) chosen.push_back(cloud.points[rng.index(cloud.size())]);
  }
  for (Vec3& p : chosen) p = req.grid.frame.to_grid(p);
  req.points = std::move(chosen);
  return req;
}

OccupancyGrid IdentityCompleter::complete(const CompletionRequest& request) const {
  OccupancyGrid grid = OccupancyGrid::zeros(request.grid);
  const auto& r = grid.resolution();
  const double radius = dilation_cells_;
  const int reach = static_cast<int>(std::ceil(radius));
  for (const Vec3& p : request.points) {
    const Vec3 node(p.x() * (r[0] - 1), p.y() * (r[1] - 1), p.z() * (r[2] - 1));
    std::array<int, 3> lo{}, hi{};
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::max(0, static_cast<int>(std::floor(node[a])) - reach);
      hi[a] = std::min(r[a] - 1, static_cast<int>(std::ceil(node[a])) + reach);
    }
    for (int k = lo[2]; k <= hi[2]; ++k) {
      for (int j = lo[1]; j <= hi[1]; ++j) {
        for (int i = lo[0]; i <= hi[0]; ++i) {
          if ((Vec3(i, j, k) - node).squaredNorm() <= radius * radius) grid.set(i, j, k, 1.0f);
        }
      }
    }
  }
  return grid;
}

OccupancyGrid ExternalCompleter::complete(const CompletionRequest&) const { return read_grid(path_); }

OccupancyGrid complete(const CompletionRequest& request, const Completer& completer) {
  if (request.points.size() != kCompletionPointCount) {
    throw Error(ErrorCode::InvalidArgument, "completion request must hold " + std::to_string(kCompletionPointCount) + " points");
  }
  return completer.complete(request);
}

// ---------------------------------------------------------------------------
// Grid files

namespace {

template <typename T>
void put(std::string& out, T value) {
  out.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T take(std::string_view bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw Error(ErrorCode::ExternalFormatError, "grid file truncated");
  T value;
  std::memcpy(&value, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

}  // namespace

std::string encode_grid(const OccupancyGrid& grid) {
  std::string out = "AOG1";
  for (int r : grid.resolution()) put<std::uint32_t>(out, static_cast<std::uint32_t>(r));
  const GridFrame& f = grid.frame();
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) put<double>(out, f.rotation(row, col));
  }
  for (int a = 0; a < 3; ++a) put<double>(out, f.translation[a]);
  for (int a = 0; a < 3; ++a) put<double>(out, f.scale[a]);
  out.append(reinterpret_cast<const char*>(grid.values().data()), grid.values().size() * sizeof(float));
  return out;
}

OccupancyGrid decode_grid(std::string_view bytes) {
  if (bytes.substr(0, 4) != "AOG1") throw Error(ErrorCode::ExternalFormatError, "bad grid magic");
  std::size_t pos = 4;
  GridSpec spec;
  std::size_t count = 1;
  for (int a = 0; a < 3; ++a) {
    const auto r = take<std::uint32_t>(bytes, pos);
    if (r < 8 || r > 4096) throw Error(ErrorCode::ExternalFormatError, "grid resolution out of range");
    spec.resolution[a] = static_cast<int>(r);
    count *= r;
  }
  for (int row = 0; row < 3; ++row) {
    for (int col = 0; col < 3; ++col) spec.frame.rotation(row, col) = take<double>(bytes, pos);
  }
  for (int a = 0; a < 3; ++a) spec.frame.translation[a] = take<double>(bytes, pos);
  for (int a = 0; a < 3; ++a) spec.frame.scale[a] = take<double>(bytes, pos);
  if (bytes.size() - pos != count * sizeof(float)) throw Error(ErrorCode::ExternalFormatError, "grid value block has wrong size");
  std::vector<float> values(count);
  std::memcpy(values.data(), bytes.data() + pos, count * sizeof(float));
  try {
    return OccupancyGrid(spec, std::move(values));
  } catch (const Error& e) {
    throw Error(ErrorCode::ExternalFormatError, e.what());
  }
}

void write_grid(const std::filesystem::path& path, const OccupancyGrid& grid) { write_text_file(path, encode_grid(grid)); }

OccupancyGrid read_grid(const std::filesystem::path& path) {
  std::string bytes;
  try {
    bytes = read_text_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::ExternalFormatError, e.what());
  }
  return decode_grid(bytes);
}

}  // namespace artrecon
