#include "fixtures.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "artrecon/error.hpp"
#include "artrecon/mesh_io.hpp"
#include "artrecon/numfmt.hpp"
#include "artrecon/rng.hpp"

namespace artrecon::fixtures {

namespace fs = std::filesystem;

namespace {

// Nudges half-lengths apart so PCA axes are well defined.
Vec3 distinct(Vec3 h) {
  for (int pass = 0; pass < 3; ++pass) {
    for (int a = 0; a < 3; ++a) {
      for (int b = a + 1; b < 3; ++b) {
        if (std::abs(h[a] - h[b]) < 0.1 * std::max(h[a], h[b])) h[b] *= 0.8;
      }
    }
  }
  return h;
}

Obb aabb(const Cuboid& c) { return Obb(c.center, Mat3::Identity(), c.half); }

TriMesh part_mesh(const CuboidObject& object, std::size_t i) {
  TriMesh mesh = box_mesh(aabb(object.parts[i]));
  if (i < object.extras.size()) {
    for (const Cuboid& e : object.extras[i]) append_mesh(mesh, box_mesh(aabb(e)));
  }
  return mesh;
}

}  // namespace

CuboidObject two_part_cabinet() {
  CuboidObject o;
  o.id = "cabinet";
  o.parts.push_back({"body", {0.0, 0.0, 0.5}, {0.4, 0.25, 0.5}});
  o.parts.push_back({"door", {0.0, -0.26, 0.5}, {0.38, 0.01, 0.47}});
  o.joints.push_back({JointType::Revolute, 0, 1, -Vec3::UnitZ(), {-0.38, -0.27, 0.5}, 0.0, kDefaultRevoluteUpper});
  return o;
}

CuboidObject random_cuboid_object(std::uint64_t seed, int n_parts, std::string id) {
  if (n_parts < 2 || n_parts > 10) throw Error(ErrorCode::InvalidArgument, "fixture part count must be in [2, 10]");
  Rng rng(seed);
  CuboidObject o;
  o.id = std::move(id);
  const Vec3 body_half = distinct({rng.uniform(0.4, 0.6), rng.uniform(0.22, 0.3), rng.uniform(0.45, 0.7)});
  const double width = 2.0 * body_half.x();
  const double depth = 2.0 * body_half.y();
  const double height = 2.0 * body_half.z();
  o.parts.push_back({"body", {0.0, 0.0, body_half.z()}, body_half});
  o.extras.resize(static_cast<std::size_t>(n_parts));
  if (rng.uniform() < 0.3) {
    o.extras[0].push_back({"top", {0.0, 0.0, height + 0.01}, {body_half.x() + 0.02, body_half.y() + 0.02, 0.01}});
  }

  const int children = n_parts - 1;
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(children))));
  const int rows = (children + cols - 1) / cols;
  const double cell_w = width / cols;
  const double cell_h = height / rows;
  const double front = -body_half.y();
  for (int k = 0; k < children; ++k) {
    const double cx = -body_half.x() + (k % cols + 0.5) * cell_w;
    const double cz = (k / cols + 0.5) * cell_h;
    const int child = k + 1;
    const double kind = rng.uniform();
    if (kind < 0.55) {
      const double t = 0.01;
      Vec3 half(0.46 * cell_w, t, 0.46 * cell_h);
      if (std::abs(half.x() - half.z()) < 0.1 * std::max(half.x(), half.z())) half.z() *= 0.8;
      const Vec3 center(cx, front - t, cz);
      o.parts.push_back({"door_" + std::to_string(child), center, half});
      const double y_edge = front - 2.0 * t;
      CuboidJoint j{JointType::Revolute, 0, child, Vec3::UnitZ(), Vec3::Zero(), 0.0, kDefaultRevoluteUpper};
      const double hinge = rng.uniform();
      if (hinge < 0.4) {
        j.axis = -Vec3::UnitZ();
        j.pivot = {cx - half.x(), y_edge, cz};
      } else if (hinge < 0.8) {
        j.axis = Vec3::UnitZ();
        j.pivot = {cx + half.x(), y_edge, cz};
      } else {
        j.axis = Vec3::UnitX();
        j.pivot = {cx, y_edge, cz - half.z()};
      }
      o.joints.push_back(j);
    } else {
      const Vec3 half = distinct({0.44 * cell_w, 0.4 * depth, 0.42 * cell_h});
      const Vec3 center(cx, front - 0.02 + half.y(), cz);
      o.parts.push_back({"drawer_" + std::to_string(child), center, half});
      o.joints.push_back({JointType::Prismatic, 0, child, -Vec3::UnitY(), Vec3::Zero(), 0.0, 1.6 * half.y()});
    }
  }
  return o;
}

ArticulatedObject to_articulated(const CuboidObject& object) {
  ArticulatedObject a;
  for (std::size_t i = 0; i < object.parts.size(); ++i) {
    TriMesh mesh = part_mesh(object, i);
    const Obb box = fit_obb(mesh.vertices);
    a.parts.push_back(Part{object.parts[i].name, std::move(mesh), std::nullopt, box});
  }
  for (const CuboidJoint& cj : object.joints) {
    Joint j;
    j.type = cj.type;
    j.parent = cj.parent;
    j.child = cj.child;
    j.axis = cj.axis;
    if (cj.type == JointType::Revolute) j.pivot = cj.pivot;
    a.joints.push_back(j);
  }
  return a;
}

ObjectBundle to_bundle(const CuboidObject& object) {
  ObjectBundle b;
  b.id = object.id;
  b.rest = to_articulated(object);
  for (const CuboidJoint& cj : object.joints) b.ranges.emplace_back(JointRange{cj.lower, cj.upper});
  return b;
}

namespace {

std::string triple(const Vec3& v) { return format_real(v.x()) + " " + format_real(v.y()) + " " + format_real(v.z()); }

TriMesh to_local(const TriMesh& world, const Mat3& r, const Vec3& origin, const Vec3& visual_offset) {
  TriMesh local = world;
  for (Vec3& v : local.vertices) v = r.transpose() * (v - origin) - visual_offset;
  return local;
}

}  // namespace

void write_urdf_fixture(const fs::path& dir, const CuboidObject& object, std::uint64_t link_rpy_seed) {
  Rng rng(link_rpy_seed);
  std::ostringstream xml;
  xml << "<?xml version=\"1.0\"?>\n<robot name=\"" << object.id << "\">\n";
  auto link = [&](const std::string& name, const std::string& mesh_file, const Vec3& visual_offset) {
    xml << "  <link name=\"" << name << "\">\n    <visual>\n      <origin xyz=\"" << triple(visual_offset)
        << "\" rpy=\"0 0 0\"/>\n      <geometry>\n        <mesh filename=\"" << mesh_file
        << "\"/>\n      </geometry>\n    </visual>\n  </link>\n";
  };
  auto write_mesh = [&](const std::string& stem, const TriMesh& mesh) {
    const std::string rel = "textured_objs/" + stem + ".obj";
    write_obj(dir / rel, mesh);
    return rel;
  };

  const std::string root = object.parts[0].name;
  link(root, write_mesh(root, box_mesh(aabb(object.parts[0]))), Vec3::Zero());
  std::string joints_xml;
  int extra_count = 0;
  auto add_extras = [&](std::size_t part, const std::string& parent_link, const Mat3& parent_r, const Vec3& parent_o) {
    if (part >= object.extras.size()) return;
    for (const Cuboid& e : object.extras[part]) {
      const std::string name = "fixed_" + std::to_string(extra_count++);
      const TriMesh local = to_local(box_mesh(aabb(e)), parent_r, e.center, Vec3::Zero());
      link(name, write_mesh(name, local), Vec3::Zero());
      const Vec3 xyz = parent_r.transpose() * (e.center - parent_o);
      joints_xml += "  <joint name=\"" + name + "_joint\" type=\"fixed\">\n    <parent link=\"" + parent_link +
                    "\"/>\n    <child link=\"" + name + "\"/>\n    <origin xyz=\"" + triple(xyz) + "\" rpy=\"0 0 0\"/>\n  </joint>\n";
    }
  };
  add_extras(0, root, Mat3::Identity(), Vec3::Zero());

  for (const CuboidJoint& j : object.joints) {
    if (j.parent != 0) throw Error(ErrorCode::InvalidArgument, "URDF fixtures support body-mounted joints only");
    const Cuboid& c = object.parts[j.child];
    Vec3 rpy = Vec3::Zero();
    if (link_rpy_seed != 0) rpy = {rng.uniform(-3.0, 3.0), rng.uniform(-1.5, 1.5), rng.uniform(-3.0, 3.0)};
    const Mat3 r = rpy_to_matrix(rpy);
    const Vec3 origin = j.type == JointType::Revolute ? j.pivot : c.center;
    const Vec3 visual_offset = link_rpy_seed != 0 ? Vec3(0.01, -0.02, 0.03) : Vec3::Zero();
    const TriMesh local = to_local(box_mesh(aabb(c)), r, origin, visual_offset);
    link(c.name, write_mesh(c.name, local), visual_offset);
    add_extras(static_cast<std::size_t>(j.child), c.name, r, origin);
    const char* type = j.type == JointType::Revolute ? "revolute" : "prismatic";
    joints_xml += "  <joint name=\"" + c.name + "_joint\" type=\"" + type + "\">\n    <parent link=\"" + root + "\"/>\n    <child link=\"" +
                  c.name + "\"/>\n    <origin xyz=\"" + triple(origin) + "\" rpy=\"" + triple(rpy) +
                  "\"/>\n    <axis xyz=\"" + triple(r.transpose() * j.axis) + "\"/>\n    <limit lower=\"" +
                  format_real(j.lower) + "\" upper=\"" + format_real(j.upper) + "\" effort=\"10\" velocity=\"1\"/>\n  </joint>\n";
  }
  xml << joints_xml << "</robot>\n";
  write_text_file(dir / "mobility.urdf", xml.str());
}

RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 f = (target - eye).normalized();
  const Vec3 r = f.cross(up).normalized();
  const Vec3 d = f.cross(r);
  Mat3 rot;
  rot.row(0) = r.transpose();
  rot.row(1) = d.transpose();
  rot.row(2) = f.transpose();
  return {rot, -(rot * eye)};
}

double ray_mesh_hit(const TriMesh& mesh, const Vec3& origin, const Vec3& dir) {
  double best = -1.0;
  for (const Face& f : mesh.faces) {
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3 e1 = mesh.vertices[f[1]] - a;
    const Vec3 e2 = mesh.vertices[f[2]] - a;
    const Vec3 p = dir.cross(e2);
    const double det = e1.dot(p);
    if (std::abs(det) < 1e-14) continue;
    const double inv = 1.0 / det;
    const Vec3 s = origin - a;
    const double u = s.dot(p) * inv;
    if (u < 0.0 || u > 1.0) continue;
    const Vec3 q = s.cross(e1);
    const double v = dir.dot(q) * inv;
    if (v < 0.0 || u + v > 1.0) continue;
    const double t = e2.dot(q) * inv;
    if (t > 1e-9 && (best < 0.0 || t < best)) best = t;
  }
  return best;
}

namespace {

bool ray_hits_box(const Vec3& lo, const Vec3& hi, const Vec3& origin, const Vec3& dir) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dir[a]) < 1e-15) {
      if (origin[a] < lo[a] || origin[a] > hi[a]) return false;
      continue;
    }
    double ta = (lo[a] - origin[a]) / dir[a];
    double tb = (hi[a] - origin[a]) / dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

}  // namespace

std::vector<RenderedView> render_views(const ArticulatedObject& object, const RenderOptions& options) {
  std::vector<TriMesh> meshes;
  std::vector<std::pair<Vec3, Vec3>> bounds;
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Part& p : object.parts) {
    meshes.push_back(p.mesh ? *p.mesh : box_mesh(p.obb));
    Vec3 plo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 phi = -plo;
    for (const Vec3& v : meshes.back().vertices) {
      plo = plo.cwiseMin(v);
      phi = phi.cwiseMax(v);
    }
    bounds.emplace_back(plo - Vec3::Constant(1e-9), phi + Vec3::Constant(1e-9));
    lo = lo.cwiseMin(plo);
    hi = hi.cwiseMax(phi);
  }
  const Vec3 center = 0.5 * (lo + hi);
  const double radius = 0.5 * (hi - lo).norm();
  const double distance = options.distance_factor * radius;
  const double el = options.elevation_deg * std::numbers::pi / 180.0;
  const double focal = 0.5 * options.width / std::tan(0.5 * options.fov_deg * std::numbers::pi / 180.0);

  std::vector<RenderedView> out;
  for (int k = 0; k < options.views; ++k) {
    const double frac = options.views == 1 ? 0.0 : static_cast<double>(k) / (options.views - 1) - 0.5;
    const double az = (-90.0 + options.arc_deg * frac) * std::numbers::pi / 180.0;
    const Vec3 eye = center + distance * Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    RenderedView rv;
    CameraView& view = rv.view;
    view.intrinsics = {focal, focal, 0.5 * (options.width - 1), 0.5 * (options.height - 1), options.width, options.height};
    view.world_to_cam = look_at(eye, center);
    const Mat3 cam_to_world = view.world_to_cam.rotation.transpose();
    const std::size_t n_pixels = static_cast<std::size_t>(options.width) * options.height;
    view.depth.assign(n_pixels, 0.0f);
    rv.part_ids.assign(n_pixels, -1);
    for (int v = 0; v < options.height; ++v) {
      for (int u = 0; u < options.width; ++u) {
        const Vec3 d_cam((u - view.intrinsics.cx) / focal, (v - view.intrinsics.cy) / focal, 1.0);
        const Vec3 dir = cam_to_world * d_cam;
        double best = -1.0;
        int best_part = -1;
        for (std::size_t p = 0; p < meshes.size(); ++p) {
          if (!ray_hits_box(bounds[p].first, bounds[p].second, eye, dir)) continue;
          const double t = ray_mesh_hit(meshes[p], eye, dir);
          if (t > 0.0 && (best < 0.0 || t < best)) {
            best = t;
            best_part = static_cast<int>(p);
          }
        }
        if (best_part < 0) continue;
        const std::size_t idx = static_cast<std::size_t>(v) * options.width + u;
        view.depth[idx] = static_cast<float>(best);
        rv.part_ids[idx] = best_part;
      }
    }
    for (std::size_t p = 0; p < meshes.size(); ++p) {
      ScoredMask m;
      m.width = options.width;
      m.height = options.height;
      m.bits.assign(n_pixels, 0);
      for (std::size_t i = 0; i < n_pixels; ++i) m.bits[i] = rv.part_ids[i] == static_cast<int>(p) ? 1 : 0;
      if (m.area() == 0) continue;
      m.confidence = 0.95 - 0.01 * static_cast<double>(p);
      m.stability = 1.0;
      view.masks.push_back(std::move(m));
    }
    out.push_back(std::move(rv));
  }
  return out;
}

PointMap to_point_map(const RenderedView& rendered) {
  const CameraView& view = rendered.view;
  PointMap map;
  map.width = view.intrinsics.width;
  map.height = view.intrinsics.height;
  map.points.assign(static_cast<std::size_t>(map.width) * map.height, Vec3::Zero());
  map.valid.assign(map.points.size(), 0);
  for (int v = 0; v < map.height; ++v) {
    for (int u = 0; u < map.width; ++u) {
      const double d = view.depth_at(u, v);
      if (d <= 0.0) continue;
      const std::size_t idx = static_cast<std::size_t>(v) * map.width + u;
      map.points[idx] = unproject(view, u, v, d);
      map.valid[idx] = 1;
    }
  }
  map.masks = view.masks;
  return map;
}

void write_views(const fs::path& dir, const std::vector<RenderedView>& views) {
  for (std::size_t k = 0; k < views.size(); ++k) {
    const std::string name = k < 10 ? "view_0" + std::to_string(k) : "view_" + std::to_string(k);
    write_camera_view(dir / name, views[k].view);
  }
}

}  // namespace artrecon::fixtures
