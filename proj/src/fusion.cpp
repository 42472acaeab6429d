#include "artrecon/fusion.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>

#include "artrecon/error.hpp"
#include "artrecon/kdtree.hpp"
#include "artrecon/mesh_io.hpp"
#include "artrecon/rng.hpp"

namespace artrecon {

using nlohmann::json;

std::size_t ScoredMask::area() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

double mask_iou(const ScoredMask& a, const ScoredMask& b) {
  if (a.width != b.width || a.height != b.height) throw Error(ErrorCode::InvalidArgument, "mask sizes differ");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    const bool x = a.bits[i] != 0;
    const bool y = b.bits[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

void validate_mask(const ScoredMask& m, int width, int height) {
  if (m.width != width || m.height != height) throw Error(ErrorCode::InvalidArgument, "mask size does not match view");
  if (m.bits.size() != static_cast<std::size_t>(width) * height) throw Error(ErrorCode::InvalidArgument, "mask bitmap has wrong size");
  if (!(m.confidence >= 0.0 && m.confidence <= 1.0) || !(m.stability >= 0.0 && m.stability <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "mask scores must lie in [0,1]");
  }
}

}  // namespace

void CameraView::validate() const {
  const auto& k = intrinsics;
  if (!(k.fx > 0.0) || !(k.fy > 0.0)) throw Error(ErrorCode::InvalidArgument, "focal lengths must be positive");
  if (k.width <= 0 || k.height <= 0) throw Error(ErrorCode::InvalidArgument, "image size must be positive");
  if (depth.size() != static_cast<std::size_t>(k.width) * k.height) throw Error(ErrorCode::InvalidArgument, "depth map has wrong size");
  for (float d : depth) {
    if (!(d >= 0.0f) || !std::isfinite(d)) throw Error(ErrorCode::InvalidArgument, "depth must be finite and non-negative");
  }
  if (!is_rotation(world_to_cam.rotation)) throw Error(ErrorCode::InvalidArgument, "extrinsic rotation is not a rotation");
  for (const auto& m : masks) validate_mask(m, k.width, k.height);
}

void PointMap::validate() const {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  if (width <= 0 || height <= 0 || points.size() != n || valid.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "point map arrays do not match its size");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (valid[i] && !points[i].allFinite()) throw Error(ErrorCode::InvalidArgument, "valid point-map entry is not finite");
  }
  for (const auto& m : masks) validate_mask(m, width, height);
}

Projection project(const Vec3& point, const CameraView& view) {
  const Vec3 c = view.world_to_cam.apply(point);
  if (!(c.z() > kMinProjectionDepth)) throw Error(ErrorCode::BehindCamera, "point has camera depth " + std::to_string(c.z()));
  const auto& k = view.intrinsics;
  Projection p;
  p.u = k.fx * c.x() / c.z() + k.cx;
  p.v = k.fy * c.y() / c.z() + k.cy;
  p.depth = c.z();
  p.in_frame = p.u >= 0.0 && p.u < k.width && p.v >= 0.0 && p.v < k.height;
  return p;
}

Vec3 unproject(const CameraView& view, double u, double v, double depth) {
  const auto& k = view.intrinsics;
  const Vec3 c((u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth);
  return view.world_to_cam.inverse().apply(c);
}

PointCloud backproject(const CameraView& view) {
  const RigidTransform cam_to_world = view.world_to_cam.inverse();
  const auto& k = view.intrinsics;
  PointCloud out;
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const double d = view.depth_at(u, v);
      if (d <= 0.0) continue;
      out.points.push_back(cam_to_world.apply(Vec3((u - k.cx) / k.fx * d, (v - k.cy) / k.fy * d, d)));
    }
  }
  return out;
}

std::vector<ScoredMask> rank_and_nms(std::vector<ScoredMask> masks, double iou_threshold) {
  std::stable_sort(masks.begin(), masks.end(), [](const ScoredMask& a, const ScoredMask& b) { return a.score() > b.score(); });
  std::vector<ScoredMask> kept;
  for (auto& m : masks) {
    const bool overlaps = std::any_of(kept.begin(), kept.end(), [&](const ScoredMask& k) { return mask_iou(m, k) > iou_threshold; });
    if (!overlaps) kept.push_back(std::move(m));
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Fusion

namespace {

// One view reduced to what fusion needs: its own points, the ranked masks,
// the mask owning each pixel, and a way to find the pixel seeing a point.
struct FusionView {
  int width = 0;
  std::vector<Vec3> points;
  std::vector<ScoredMask> masks;
  std::vector<int> pixel_mask;
  std::function<std::optional<int>(const Vec3&)> locate;
};

void assign_masks(FusionView& fv, const std::vector<ScoredMask>& masks, int width, int height, double iou_threshold) {
  fv.width = width;
  fv.masks = rank_and_nms(masks, iou_threshold);
  fv.pixel_mask.assign(static_cast<std::size_t>(width) * height, -1);
  // Later (lower-ranked) masks never overwrite earlier ones.
  for (int m = static_cast<int>(fv.masks.size()) - 1; m >= 0; --m) {
    const auto& bits = fv.masks[m].bits;
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i]) fv.pixel_mask[i] = m;
    }
  }
}

constexpr int kNotVisible = -2;
constexpr int kNoMask = -1;

PointCloud fuse(const std::vector<FusionView>& views, std::size_t n_seeds, std::uint64_t seed, const FusionOptions& options) {
  std::vector<Vec3> points;
  std::vector<int> source;
  for (std::size_t v = 0; v < views.size(); ++v) {
    points.insert(points.end(), views[v].points.begin(), views[v].points.end());
    source.insert(source.end(), views[v].points.size(), static_cast<int>(v));
  }
  if (points.empty()) throw Error(ErrorCode::EmptyInput, "no valid depth in any view");

  const std::size_t n = points.size();
  const std::size_t nv = views.size();
  std::vector<int> obs(n * nv, kNotVisible);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t v = 0; v < nv; ++v) {
      if (const auto pixel = views[v].locate(points[p])) obs[p * nv + v] = views[v].pixel_mask[*pixel];
    }
  }

  // Pairwise IoU of masks across views, over points both views see.
  using MaskId = std::pair<int, int>;
  std::map<std::pair<MaskId, MaskId>, double> iou;
  for (std::size_t a = 0; a < nv; ++a) {
    for (std::size_t b = a + 1; b < nv; ++b) {
      const std::size_t ma = views[a].masks.size();
      const std::size_t mb = views[b].masks.size();
      std::vector<std::size_t> both(ma * mb, 0), in_a(ma, 0), in_b(mb, 0);
      for (std::size_t p = 0; p < n; ++p) {
        const int oa = obs[p * nv + a];
        const int ob = obs[p * nv + b];
        if (oa == kNotVisible || ob == kNotVisible) continue;
        if (oa >= 0) ++in_a[oa];
        if (ob >= 0) ++in_b[ob];
        if (oa >= 0 && ob >= 0) ++both[oa * mb + ob];
      }
      for (std::size_t i = 0; i < ma; ++i) {
        for (std::size_t j = 0; j < mb; ++j) {
          const std::size_t inter = both[i * mb + j];
          const std::size_t uni = in_a[i] + in_b[j] - inter;
          const double value = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
          const MaskId x{static_cast<int>(a), static_cast<int>(i)};
          const MaskId y{static_cast<int>(b), static_cast<int>(j)};
          iou[{x, y}] = value;
          iou[{y, x}] = value;
        }
      }
    }
  }

  // Greedy grouping, strongest masks first; a group holds one mask per view.
  std::vector<MaskId> order;
  for (std::size_t v = 0; v < nv; ++v) {
    for (std::size_t m = 0; m < views[v].masks.size(); ++m) order.emplace_back(static_cast<int>(v), static_cast<int>(m));
  }
  std::stable_sort(order.begin(), order.end(), [&](const MaskId& x, const MaskId& y) {
    const auto& mx = views[x.first].masks[x.second];
    const auto& my = views[y.first].masks[y.second];
    if (mx.score() != my.score()) return mx.score() > my.score();
    return mx.area() > my.area();
  });
  std::vector<std::vector<MaskId>> groups;
  std::map<MaskId, int> group_of;
  for (const MaskId& id : order) {
    int best = -1;
    double best_iou = options.group_overlap;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      double value = -1.0;
      bool clash = false;
      for (const MaskId& member : groups[g]) {
        if (member.first == id.first) clash = true;
        else value = std::max(value, iou.at({id, member}));
      }
      if (!clash && value >= best_iou && (best < 0 || value > best_iou)) {
        best = static_cast<int>(g);
        best_iou = value;
      }
    }
    if (best < 0) {
      best = static_cast<int>(groups.size());
      groups.emplace_back();
    }
    groups[best].push_back(id);
    group_of[id] = best;
  }

  // Confidence-weighted vote per point.
  std::vector<int> label(n, -1);
  std::vector<double> votes(groups.size(), 0.0);
  for (std::size_t p = 0; p < n; ++p) {
    std::fill(votes.begin(), votes.end(), 0.0);
    bool any = false;
    for (std::size_t v = 0; v < nv; ++v) {
      const int m = obs[p * nv + v];
      if (m < 0) continue;
      votes[group_of.at({static_cast<int>(v), m})] += views[v].masks[m].confidence;
      any = true;
    }
    if (!any) continue;
    const double top = *std::max_element(votes.begin(), votes.end());
    int chosen = -1;
    const int own = obs[p * nv + source[p]];
    if (own >= 0) {
      const int g = group_of.at({source[p], own});
      if (votes[g] == top) chosen = g;
    }
    if (chosen < 0) chosen = static_cast<int>(std::find(votes.begin(), votes.end(), top) - votes.begin());
    label[p] = chosen;
  }

  // Compact group ids in creation order.
  std::vector<int> used(groups.size(), 0);
  for (int l : label) {
    if (l >= 0) used[l] = 1;
  }
  std::vector<int> remap(groups.size(), -1);
  int next = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (used[g]) remap[g] = next++;
  }

  std::vector<std::size_t> keep(n);
  std::iota(keep.begin(), keep.end(), 0);
  if (n_seeds > 0 && n_seeds < n) {
    Rng rng(seed);
    for (std::size_t i = 0; i < n_seeds; ++i) std::swap(keep[i], keep[i + rng.index(n - i)]);
    keep.resize(n_seeds);
    std::sort(keep.begin(), keep.end());
  }
  PointCloud out;
  out.points.reserve(keep.size());
  out.labels.reserve(keep.size());
  for (std::size_t p : keep) {
    out.points.push_back(points[p]);
    out.labels.push_back(label[p] < 0 ? -1 : remap[label[p]]);
  }
  return out;
}

}  // namespace

PointCloud fuse_labels(const std::vector<CameraView>& views, std::size_t n_seeds, std::uint64_t seed, const FusionOptions& options) {
  if (views.empty()) throw Error(ErrorCode::EmptyInput, "no views");
  std::vector<FusionView> fvs(views.size());
  for (std::size_t i = 0; i < views.size(); ++i) {
    const CameraView& view = views[i];
    view.validate();
    FusionView& fv = fvs[i];
    const int w = view.intrinsics.width;
    const int h = view.intrinsics.height;
    fv.points = backproject(view).points;
    assign_masks(fv, view.masks, w, h, options.iou_threshold);
    const double tolerance = options.depth_tolerance;
    fv.locate = [&view, w, h, tolerance](const Vec3& p) -> std::optional<int> {
      const Vec3 c = view.world_to_cam.apply(p);
      if (!(c.z() > kMinProjectionDepth)) return std::nullopt;
      const Projection pr = project(p, view);
      if (!pr.in_frame) return std::nullopt;
      const int u = std::min(static_cast<int>(std::lround(pr.u)), w - 1);
      const int v = std::min(static_cast<int>(std::lround(pr.v)), h - 1);
      const double d = view.depth_at(u, v);
      if (d <= 0.0 || std::abs(d - pr.depth) > tolerance) return std::nullopt;
      return v * w + u;
    };
  }
  return fuse(fvs, n_seeds, seed, options);
}

PointCloud fuse_labels(const PointMapSet& maps, std::size_t n_seeds, std::uint64_t seed, const FusionOptions& options) {
  if (maps.views.empty()) throw Error(ErrorCode::EmptyInput, "no views");
  std::vector<FusionView> fvs(maps.views.size());
  std::vector<std::vector<int>> pixel_of(maps.views.size());
  std::vector<std::unique_ptr<KdTree>> trees(maps.views.size());
  for (std::size_t i = 0; i < maps.views.size(); ++i) {
    const PointMap& map = maps.views[i];
    map.validate();
    FusionView& fv = fvs[i];
    for (int v = 0; v < map.height; ++v) {
      for (int u = 0; u < map.width; ++u) {
        if (!map.is_valid(u, v)) continue;
        fv.points.push_back(map.at(u, v));
        pixel_of[i].push_back(v * map.width + u);
      }
    }
    assign_masks(fv, map.masks, map.width, map.height, options.iou_threshold);
    if (fv.points.empty()) {
      fv.locate = [](const Vec3&) -> std::optional<int> { return std::nullopt; };
      continue;
    }
    trees[i] = std::make_unique<KdTree>(fv.points);
    const KdTree* tree = trees[i].get();
    const std::vector<int>* pixels = &pixel_of[i];
    const double limit = options.dist_threshold * options.dist_threshold;
    fv.locate = [tree, pixels, limit](const Vec3& p) -> std::optional<int> {
      const auto hit = tree->nearest(p);
      if (hit.squared_distance > limit) return std::nullopt;
      return (*pixels)[hit.index];
    };
  }
  return fuse(fvs, n_seeds, seed, options);
}

std::vector<std::vector<std::optional<Pixel>>> match_prompts_pointmap(const PointMapSet& maps, const std::vector<Pixel>& prompts,
                                                                      double dist_threshold) {
  if (maps.views.empty()) throw Error(ErrorCode::EmptyInput, "no point maps");
  std::vector<std::unique_ptr<KdTree>> trees;
  std::vector<std::vector<Pixel>> pixels(maps.views.size());
  for (std::size_t i = 0; i < maps.views.size(); ++i) {
    const PointMap& map = maps.views[i];
    map.validate();
    std::vector<Vec3> pts;
    for (int v = 0; v < map.height; ++v) {
      for (int u = 0; u < map.width; ++u) {
        if (!map.is_valid(u, v)) continue;
        pts.push_back(map.at(u, v));
        pixels[i].push_back({u, v});
      }
    }
    trees.push_back(pts.empty() ? nullptr : std::make_unique<KdTree>(pts));
  }
  const PointMap& first = maps.views[0];
  std::vector<std::vector<std::optional<Pixel>>> out;
  for (const Pixel& prompt : prompts) {
    if (prompt.u < 0 || prompt.v < 0 || prompt.u >= first.width || prompt.v >= first.height || !first.is_valid(prompt.u, prompt.v)) {
      throw Error(ErrorCode::InvalidPrompt,
                  "prompt (" + std::to_string(prompt.u) + ", " + std::to_string(prompt.v) + ") has no valid 3-D point");
    }
    const Vec3& p = first.at(prompt.u, prompt.v);
    std::vector<std::optional<Pixel>> row;
    for (std::size_t i = 0; i < maps.views.size(); ++i) {
      if (!trees[i]) {
        row.emplace_back();
        continue;
      }
      const auto hit = trees[i]->nearest(p);
      if (std::sqrt(hit.squared_distance) > dist_threshold) row.emplace_back();
      else row.emplace_back(pixels[i][hit.index]);
    }
    out.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

Intrinsics parse_camera_json(std::string_view text, RigidTransform& world_to_cam) {
  try {
    const json j = json::parse(text);
    Intrinsics k;
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.cx = j.at("cx").get<double>();
    k.cy = j.at("cy").get<double>();
    k.width = j.at("width").get<int>();
    k.height = j.at("height").get<int>();
    const auto m = j.at("world_to_cam").get<std::vector<double>>();
    if (m.size() != 16) throw Error(ErrorCode::ExternalFormatError, "world_to_cam must hold 16 values");
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) world_to_cam.rotation(r, c) = m[4 * r + c];
      world_to_cam.translation[r] = m[4 * r + 3];
    }
    if (m[12] != 0.0 || m[13] != 0.0 || m[14] != 0.0 || m[15] != 1.0) {
      throw Error(ErrorCode::ExternalFormatError, "world_to_cam bottom row must be 0 0 0 1");
    }
    return k;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ExternalFormatError, std::string("camera json: ") + e.what());
  }
}

std::string format_camera_json(const Intrinsics& k, const RigidTransform& t) {
  json j;
  j["fx"] = k.fx;
  j["fy"] = k.fy;
  j["cx"] = k.cx;
  j["cy"] = k.cy;
  j["width"] = k.width;
  j["height"] = k.height;
  std::vector<double> m(16, 0.0);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m[4 * r + c] = t.rotation(r, c);
    m[4 * r + 3] = t.translation[r];
  }
  m[15] = 1.0;
  j["world_to_cam"] = m;
  return j.dump(2) + "\n";
}

std::vector<float> read_pfm(const std::filesystem::path& path, int& width, int& height) {
  const std::string bytes = read_text_file(path);
  std::istringstream header(bytes);
  std::string magic;
  double scale = 0.0;
  header >> magic >> width >> height >> scale;
  if (!header || magic != "Pf") throw Error(ErrorCode::ExternalFormatError, path.string() + ": not a single-channel PFM");
  if (width <= 0 || height <= 0) throw Error(ErrorCode::ExternalFormatError, path.string() + ": bad PFM size");
  const auto data_start = static_cast<std::size_t>(header.tellg()) + 1;  // one whitespace byte ends the header
  const std::size_t count = static_cast<std::size_t>(width) * height;
  if (bytes.size() < data_start + count * 4) throw Error(ErrorCode::ExternalFormatError, path.string() + ": PFM data truncated");
  const bool little = scale < 0.0;
  std::vector<float> out(count);
  for (int row = 0; row < height; ++row) {
    // PFM stores the bottom row first.
    const std::size_t dst = static_cast<std::size_t>(height - 1 - row) * width;
    for (int col = 0; col < width; ++col) {
      unsigned char b[4];
      std::memcpy(b, bytes.data() + data_start + (static_cast<std::size_t>(row) * width + col) * 4, 4);
      if (!little) std::swap(b[0], b[3]), std::swap(b[1], b[2]);
      std::memcpy(&out[dst + col], b, 4);
    }
  }
  return out;
}

void write_pfm(const std::filesystem::path& path, const std::vector<float>& values, int width, int height) {
  if (values.size() != static_cast<std::size_t>(width) * height) throw Error(ErrorCode::InvalidArgument, "PFM size mismatch");
  std::string out = "Pf\n" + std::to_string(width) + " " + std::to_string(height) + "\n-1\n";
  for (int row = height - 1; row >= 0; --row) {
    out.append(reinterpret_cast<const char*>(values.data() + static_cast<std::size_t>(row) * width), static_cast<std::size_t>(width) * 4);
  }
  write_text_file(path, out);
}

namespace {

std::filesystem::path sidecar_path(const std::filesystem::path& png_path) {
  std::filesystem::path p = png_path;
  p.replace_extension(".json");
  return p;
}

}  // namespace

ScoredMask read_mask(const std::filesystem::path& png_path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, png_path.string().c_str())) {
    throw Error(std::filesystem::exists(png_path) ? ErrorCode::ExternalFormatError : ErrorCode::IoError,
                png_path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  ScoredMask mask;
  mask.width = static_cast<int>(image.width);
  mask.height = static_cast<int>(image.height);
  mask.bits.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, mask.bits.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorCode::ExternalFormatError, png_path.string() + ": " + image.message);
  }
  for (auto& b : mask.bits) b = b != 0 ? 1 : 0;

  const auto side = sidecar_path(png_path);
  try {
    const json j = json::parse(read_text_file(side));
    mask.confidence = j.at("confidence").get<double>();
    mask.stability = j.at("stability").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ExternalFormatError, side.string() + ": " + e.what());
  }
  return mask;
}

void write_mask(const std::filesystem::path& png_path, const ScoredMask& mask) {
  if (!png_path.parent_path().empty()) std::filesystem::create_directories(png_path.parent_path());
  std::vector<std::uint8_t> grey(mask.bits.size());
  for (std::size_t i = 0; i < grey.size(); ++i) grey[i] = mask.bits[i] ? 255 : 0;
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(mask.width);
  image.height = static_cast<png_uint_32>(mask.height);
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, png_path.string().c_str(), 0, grey.data(), 0, nullptr)) {
    throw Error(ErrorCode::IoError, png_path.string() + ": " + image.message);
  }
  json j;
  j["confidence"] = mask.confidence;
  j["stability"] = mask.stability;
  write_text_file(sidecar_path(png_path), j.dump() + "\n");
}

PointMap read_point_map(const std::filesystem::path& path) {
  const std::string bytes = read_text_file(path);
  if (bytes.size() < 12 || bytes.compare(0, 4, "APM1") != 0) throw Error(ErrorCode::ExternalFormatError, path.string() + ": bad point-map magic");
  std::uint32_t w = 0;
  std::uint32_t h = 0;
  std::memcpy(&w, bytes.data() + 4, 4);
  std::memcpy(&h, bytes.data() + 8, 4);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (w == 0 || h == 0 || bytes.size() != 12 + n * 13) throw Error(ErrorCode::ExternalFormatError, path.string() + ": point-map size mismatch");
  PointMap map;
  map.width = static_cast<int>(w);
  map.height = static_cast<int>(h);
  map.points.resize(n);
  std::vector<float> raw(n * 3);
  std::memcpy(raw.data(), bytes.data() + 12, n * 12);
  for (std::size_t i = 0; i < n; ++i) map.points[i] = Vec3(raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]);
  map.valid.assign(bytes.begin() + static_cast<std::ptrdiff_t>(12 + n * 12), bytes.end());
  for (std::size_t i = 0; i < n; ++i) {
    if (map.valid[i] && !map.points[i].allFinite()) throw Error(ErrorCode::ExternalFormatError, path.string() + ": non-finite valid point");
  }
  return map;
}

void write_point_map(const std::filesystem::path& path, const PointMap& map) {
  std::string out = "APM1";
  const auto w = static_cast<std::uint32_t>(map.width);
  const auto h = static_cast<std::uint32_t>(map.height);
  out.append(reinterpret_cast<const char*>(&w), 4);
  out.append(reinterpret_cast<const char*>(&h), 4);
  for (const Vec3& p : map.points) {
    const float f[3] = {static_cast<float>(p.x()), static_cast<float>(p.y()), static_cast<float>(p.z())};
    out.append(reinterpret_cast<const char*>(f), 12);
  }
  out.append(reinterpret_cast<const char*>(map.valid.data()), map.valid.size());
  write_text_file(path, out);
}

namespace {

std::vector<ScoredMask> read_masks(const std::filesystem::path& dir) {
  std::vector<ScoredMask> masks;
  for (int k = 0;; ++k) {
    const auto p = dir / "masks" / ("mask_" + std::to_string(k) + ".png");
    if (!std::filesystem::exists(p)) break;
    masks.push_back(read_mask(p));
  }
  return masks;
}

}  // namespace

CameraView read_camera_view(const std::filesystem::path& dir) {
  CameraView view;
  view.intrinsics = parse_camera_json(read_text_file(dir / "camera.json"), view.world_to_cam);
  int w = 0;
  int h = 0;
  view.depth = read_pfm(dir / "depth.pfm", w, h);
  if (w != view.intrinsics.width || h != view.intrinsics.height) {
    throw Error(ErrorCode::ExternalFormatError, (dir / "depth.pfm").string() + ": size differs from camera.json");
  }
  view.masks = read_masks(dir);
  view.validate();
  return view;
}

void write_camera_view(const std::filesystem::path& dir, const CameraView& view) {
  write_text_file(dir / "camera.json", format_camera_json(view.intrinsics, view.world_to_cam));
  write_pfm(dir / "depth.pfm", view.depth, view.intrinsics.width, view.intrinsics.height);
  for (std::size_t k = 0; k < view.masks.size(); ++k) write_mask(dir / "masks" / ("mask_" + std::to_string(k) + ".png"), view.masks[k]);
}

PointMap read_point_map_view(const std::filesystem::path& dir) {
  PointMap map = read_point_map(dir / "pointmap.apm");
  map.masks = read_masks(dir);
  map.validate();
  return map;
}

}  // namespace artrecon
