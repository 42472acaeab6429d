#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>

#include "artrecon/artcode.hpp"
#include "artrecon/error.hpp"
#include "artrecon/ingest.hpp"
#include "artrecon/mesh_io.hpp"
#include "artrecon/rng.hpp"
#include "check.hpp"
#include "fixtures.hpp"

using namespace artrecon;
using artrecon::fixtures::error_code;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("artrecon_ingest_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Every mesh file is the same small box; "missing.obj" fails to load.
TriMesh stub_loader(const std::string& filename) {
  if (filename == "missing.obj") throw Error(ErrorCode::MissingMesh, filename);
  return box_mesh(Obb(Vec3::Zero(), Mat3::Identity(), Vec3(0.3, 0.2, 0.1)));
}

const char* kTwoLink = R"(<?xml version="1.0"?>
<robot name="box">
  <link name="base">
    <visual><geometry><mesh filename="base.obj"/></geometry></visual>
  </link>
  <link name="lid">
    <visual><origin xyz="0 0 0.1" rpy="0 0 0"/><geometry><mesh filename="lid.obj" scale="1 2 1"/></geometry></visual>
  </link>
  <joint name="hinge" type="revolute">
    <parent link="base"/>
    <child link="lid"/>
    <origin xyz="0 0.5 1" rpy="0 0 0"/>
    <axis xyz="1 0 0"/>
    <limit lower="-0.5" upper="1.25" effort="1" velocity="1"/>
  </joint>
</robot>
)";

std::string single_joint_urdf(const std::string& type, const std::string& rpy = "0 0 0", const std::string& axis = "1 0 0",
                              const std::string& child = "lid") {
  return R"(<robot name="r">
  <link name="base"><visual><geometry><mesh filename="base.obj"/></geometry></visual></link>
  <link name="lid"><visual><geometry><mesh filename="lid.obj"/></geometry></visual></link>
  <joint name="j" type=")" +
         type + R"(">
    <parent link="base"/><child link=")" +
         child + R"("/>
    <origin xyz="0 0 0" rpy=")" +
         rpy + R"("/>
    <axis xyz=")" +
         axis + R"("/>
  </joint>
</robot>)";
}

// Angle between undirected axes; atan2 stays accurate near zero where acos does not.
double axis_angle_between(const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), std::abs(a.dot(b))); }

}  // namespace

TEST_CASE("parse a minimal two-link URDF") {
  const UrdfModel m = parse_urdf(kTwoLink);
  CHECK(m.name == "box");
  CHECK(m.root == "base");
  REQUIRE(m.links.size() == 2);
  REQUIRE(m.joints.size() == 1);
  const UrdfJoint& j = m.joints[0];
  CHECK(j.type == UrdfJointType::Revolute);
  CHECK(j.parent == "base");
  CHECK(j.child == "lid");
  CHECK(j.axis == Vec3(1, 0, 0));
  CHECK(j.origin.translation == Vec3(0, 0.5, 1));
  REQUIRE(j.limit);
  CHECK(j.limit->lower == -0.5);
  CHECK(j.limit->upper == 1.25);
  REQUIRE(m.links[1].meshes.size() == 1);
  CHECK(m.links[1].meshes[0].filename == "lid.obj");
  CHECK(m.links[1].meshes[0].scale == Vec3(1, 2, 1));
  CHECK(m.links[1].meshes[0].origin.translation == Vec3(0, 0, 0.1));
}

TEST_CASE("unsupported and malformed URDFs") {
  CHECK(error_code([] { parse_urdf(single_joint_urdf("planar")); }) == ErrorCode::UnsupportedJoint);
  CHECK(error_code([] { parse_urdf(single_joint_urdf("floating")); }) == ErrorCode::UnsupportedJoint);
  CHECK(error_code([] { parse_urdf("<robot><link name=\"a\"></robot>"); }) == ErrorCode::SyntaxError);
  CHECK(error_code([] { parse_urdf(single_joint_urdf("revolute", "0 0 0", "1 0 0", "ghost")); }) == ErrorCode::UnresolvedLink);
  const UrdfModel cont = parse_urdf(single_joint_urdf("continuous"));
  CHECK(cont.joints[0].type == UrdfJointType::Continuous);
  CHECK_FALSE(cont.joints[0].limit);
}

TEST_CASE("joint origin rpy rotates the axis into the parent frame") {
  const UrdfModel m = parse_urdf(single_joint_urdf("revolute", "0 0 1.5707963267948966", "1 0 0"));
  const ObjectBundle b = urdf_to_bundle(m, stub_loader, "rpy");
  REQUIRE(b.rest.joints.size() == 1);
  // By hand: Rz(pi/2) maps x to y.
  CHECK((b.rest.joints[0].axis - Vec3(0, 1, 0)).norm() < 1e-12);
  CHECK(b.rest.joints[0].type == JointType::Revolute);
  CHECK_FALSE(b.ranges[0]);
}

TEST_CASE("rpy_to_matrix follows the fixed-axis convention") {
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const Vec3 rpy(rng.uniform(-3, 3), rng.uniform(-1.5, 1.5), rng.uniform(-3, 3));
    const Mat3 expected = axis_angle(Vec3::UnitZ(), rpy.z()) * axis_angle(Vec3::UnitY(), rpy.y()) * axis_angle(Vec3::UnitX(), rpy.x());
    CHECK((rpy_to_matrix(rpy) - expected).norm() < 1e-12);
  }
}

TEST_CASE("mesh grouping merges links and fixed children") {
  SUBCASE("five panels under one link") {
    const std::string xml = R"(<robot name="d">
  <link name="base"><visual><geometry><mesh filename="a.obj"/></geometry></visual></link>
  <link name="drawer">
    <visual><geometry><mesh filename="p0.obj"/></geometry></visual>
    <visual><geometry><mesh filename="p1.obj"/></geometry></visual>
    <visual><geometry><mesh filename="p2.obj"/></geometry></visual>
    <visual><geometry><mesh filename="p3.obj"/></geometry></visual>
    <visual><geometry><mesh filename="p4.obj"/></geometry></visual>
  </link>
  <joint name="slide" type="prismatic"><parent link="base"/><child link="drawer"/><axis xyz="0 1 0"/>
    <limit lower="0" upper="0.3"/></joint>
</robot>)";
    const auto parts = group_part_meshes(parse_urdf(xml), stub_loader);
    REQUIRE(parts.size() == 2);
    CHECK(parts[1].mesh->vertices.size() == 5 * stub_loader("x").vertices.size());
    CHECK(parts[1].mesh->faces.size() == 5 * stub_loader("x").faces.size());
  }
  SUBCASE("fixed link merges into the root, two movable links give three parts") {
    const std::string xml = R"(<robot name="c">
  <link name="base"><visual><geometry><mesh filename="a.obj"/></geometry></visual></link>
  <link name="top"><visual><geometry><mesh filename="b.obj"/></geometry></visual></link>
  <link name="door"><visual><geometry><mesh filename="c.obj"/></geometry></visual></link>
  <link name="drawer"><collision><geometry><mesh filename="d.obj"/></geometry></collision></link>
  <joint name="f" type="fixed"><parent link="base"/><child link="top"/><origin xyz="0 0 1"/></joint>
  <joint name="h" type="revolute"><parent link="base"/><child link="door"/><axis xyz="0 0 1"/></joint>
  <joint name="s" type="prismatic"><parent link="base"/><child link="drawer"/><axis xyz="0 -1 0"/></joint>
</robot>)";
    const auto parts = group_part_meshes(parse_urdf(xml), stub_loader);
    REQUIRE(parts.size() == 3);
    CHECK(parts[0].name == "base");
    CHECK(parts[0].mesh->vertices.size() == 2 * stub_loader("x").vertices.size());
    CHECK(parts[0].obb.half_lengths().maxCoeff() == doctest::Approx(0.6));
  }
  SUBCASE("missing meshes are reported") {
    const std::string xml = R"(<robot name="m">
  <link name="base"><visual><geometry><mesh filename="missing.obj"/></geometry></visual></link>
</robot>)";
    CHECK(error_code([&] { group_part_meshes(parse_urdf(xml), stub_loader); }) == ErrorCode::MissingMesh);
    const fs::path dir = temp_dir("nomesh");
    CHECK(error_code([&] { directory_mesh_loader(dir)("textured_objs/none.obj"); }) == ErrorCode::MissingMesh);
  }
}

TEST_CASE("URDF fixtures with rotated link frames reproduce the cuboid object") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const auto cuboids = fixtures::random_cuboid_object(seed, 2 + static_cast<int>(seed % 6), "urdf" + std::to_string(seed));
    const fs::path dir = temp_dir("urdf" + std::to_string(seed));
    fixtures::write_urdf_fixture(dir, cuboids, seed * 31);
    const ObjectBundle b = urdf_to_bundle(parse_urdf(read_text_file(dir / "mobility.urdf")), directory_mesh_loader(dir), cuboids.id);
    const ArticulatedObject expected = fixtures::to_articulated(cuboids);
    REQUIRE(b.rest.parts.size() == expected.parts.size());
    REQUIRE(b.rest.joints.size() == expected.joints.size());
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < expected.parts.size(); ++i) index[expected.parts[i].name] = static_cast<int>(i);
    for (const Part& p : b.rest.parts) {
      const Part& e = expected.parts[index.at(p.name)];
      CHECK((p.obb.center() - e.obb.center()).norm() < 1e-9);
      CHECK((p.obb.half_lengths() - e.obb.half_lengths()).norm() < 1e-9);
    }
    for (std::size_t k = 0; k < b.rest.joints.size(); ++k) {
      const Joint& j = b.rest.joints[k];
      const std::string child = b.rest.parts[j.child].name;
      const auto it = std::find_if(expected.joints.begin(), expected.joints.end(),
                                   [&](const Joint& x) { return expected.parts[x.child].name == child; });
      REQUIRE(it != expected.joints.end());
      CHECK(j.type == it->type);
      CHECK((j.axis - it->axis).norm() < 1e-9);
      if (j.type == JointType::Revolute) CHECK(point_line_distance(*j.pivot, *it->pivot, it->axis) < 1e-9);
      REQUIRE(b.ranges[k]);
      CHECK(b.ranges[k]->lower == cuboids.joints[it - expected.joints.begin()].lower);
      CHECK(b.ranges[k]->upper == cuboids.joints[it - expected.joints.begin()].upper);
    }
    fs::remove_all(dir);
  }
}

TEST_CASE("default joint ranges") {
  Joint rev;
  CHECK(default_range(rev, Obb()) == JointRange{0.0, std::numbers::pi / 2});
  Joint slide;
  slide.type = JointType::Prismatic;
  slide.axis = Vec3(0, -1, 0);
  const Obb box(Vec3::Zero(), Mat3::Identity(), Vec3(0.3, 0.25, 0.1));
  CHECK(default_range(slide, box).upper == doctest::Approx(0.4 * 0.5));
}

TEST_CASE("pose sampling is seeded and stays inside the range") {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    ObjectBundle b = fixtures::to_bundle(fixtures::random_cuboid_object(100 + trial, 2 + static_cast<int>(rng.index(9)), "p"));
    if (trial % 3 == 0) std::fill(b.ranges.begin(), b.ranges.end(), std::nullopt);
    const auto s1 = sample_joint_states(b, {}, 55);
    const auto s2 = sample_joint_states(b, {}, 55);
    CHECK(s1 == s2);
    CHECK(sample_joint_states(b, {}, 56) != s1);
    for (std::size_t j = 0; j < s1.size(); ++j) {
      const JointRange r = effective_range(b, j);
      CHECK(s1[j] >= r.lower + 0.25 * (r.upper - r.lower));
      CHECK(s1[j] <= r.lower + 0.75 * (r.upper - r.lower));
      CHECK(s1[j] > r.lower);
      CHECK(s1[j] < r.upper);
    }
  }
}

TEST_CASE("laptop lid at 45 degrees") {
  fixtures::CuboidObject laptop;
  laptop.id = "laptop";
  laptop.parts = {{"base", Vec3(0, 0, 0.01), Vec3(0.3, 0.2, 0.01)}, {"lid", Vec3(0, 0.005, 0.027), Vec3(0.29, 0.195, 0.007)}};
  laptop.extras.resize(2);
  const Vec3 pivot(0, 0.2, 0.02);
  laptop.joints = {{JointType::Revolute, 0, 1, Vec3(-1, 0, 0), pivot, 0.0, std::numbers::pi}};
  const ArticulatedObject rest = fixtures::to_articulated(laptop);
  const double theta = std::numbers::pi / 4;
  const ArticulatedObject posed = apply_pose(rest, std::vector<double>{theta});

  // Rotating by +theta about -x is rotating by -theta about +x.
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const Vec3 rel = laptop.parts[1].center - pivot;
  const Vec3 expected = pivot + Vec3(rel.x(), c * rel.y() + s * rel.z(), -s * rel.y() + c * rel.z());
  CHECK((posed.parts[1].obb.center() - expected).norm() < 1e-12);
  CHECK((posed.parts[0].obb.center() - laptop.parts[0].center).norm() < 1e-12);
  CHECK(posed.joints[0].state == 0.0);
  CHECK(point_line_distance(*posed.joints[0].pivot, pivot, Vec3::UnitX()) < 1e-12);
}

TEST_CASE("one object, one pose, one rotation round trips through the completion") {
  const auto cuboids = fixtures::random_cuboid_object(21, 5, "single");
  const std::vector<ObjectBundle> objects{fixtures::to_bundle(cuboids)};
  const Dataset ds = make_dataset(objects, 1, 1, 3);
  REQUIRE(ds.samples.size() == 1);
  CHECK(ds.skipped.empty());
  const DatasetSample& s = ds.samples[0];

  ArticulatedObject gt = pose_object(objects[0], {}, s.state_seed);
  gt = transform_object(gt, {rot_z(s.z_rotation), Vec3::Zero()});
  std::vector<Obb> boxes;
  for (const Part& p : gt.parts) boxes.push_back(p.obb);

  const ArtCodeDocument doc = parse_artcode(s.prompt + s.completion);
  REQUIRE(doc.joints.size() == gt.joints.size());
  for (std::size_t k = 0; k < gt.joints.size(); ++k) {
    const Joint j = resolve_joint(doc.joints[k], boxes[gt.joints[k].child]);
    CHECK(j.type == gt.joints[k].type);
    CHECK(j.parent == gt.joints[k].parent);
    CHECK(j.child == gt.joints[k].child);
    // Cuboid joints lie on box axes and edges, so dequantization is exact up to rounding.
    CHECK(axis_angle_between(j.axis, gt.joints[k].axis) < 1e-9);
    CHECK(j.axis.dot(gt.joints[k].axis) > 0.0);
    if (j.pivot) CHECK(point_line_distance(*j.pivot, *gt.joints[k].pivot, gt.joints[k].axis) < 1e-9);
  }
}

TEST_CASE("dataset samples are consistent with their ground truth") {
  std::vector<ObjectBundle> objects;
  for (std::uint64_t seed = 1; seed <= 12; ++seed)
    objects.push_back(fixtures::to_bundle(fixtures::random_cuboid_object(seed, 2 + static_cast<int>(seed % 9), "obj" + std::to_string(seed))));
  const Dataset ds = make_dataset(objects, 5, 2, 17, {}, 2);
  CHECK(ds.skipped.empty());
  REQUIRE(ds.samples.size() == objects.size() * 10);

  double worst_axis_full = 0.0, worst_pivot_full = 0.0, worst_axis_prompt = 0.0, worst_pivot_prompt = 0.0;
  for (const DatasetSample& s : ds.samples) {
    const auto& bundle = *std::find_if(objects.begin(), objects.end(), [&](const ObjectBundle& b) { return b.id == s.object_id; });
    ArticulatedObject gt = transform_object(pose_object(bundle, {}, s.state_seed), {rot_z(s.z_rotation), Vec3::Zero()});
    std::vector<Obb> full;
    for (const Part& p : gt.parts) full.push_back(p.obb);
    const ArtCodeDocument doc = parse_artcode(s.prompt + s.completion);
    const Execution with_full = execute(doc, full, {});
    const Execution with_prompt = execute(doc);
    for (std::size_t k = 0; k < gt.joints.size(); ++k) {
      const Joint& g = gt.joints[k];
      const Joint& a = with_full.object.joints[k];
      const Joint& b = with_prompt.object.joints[k];
      worst_axis_full = std::max(worst_axis_full, axis_angle_between(a.axis, g.axis));
      worst_axis_prompt = std::max(worst_axis_prompt, axis_angle_between(b.axis, g.axis));
      if (g.pivot) {
        worst_pivot_full = std::max(worst_pivot_full, point_line_distance(*a.pivot, *g.pivot, g.axis));
        worst_pivot_prompt = std::max(worst_pivot_prompt, point_line_distance(*b.pivot, *g.pivot, g.axis));
      }
    }
  }
  CHECK(worst_axis_full < 1e-9);
  CHECK(worst_pivot_full < 1e-6);
  // Prompt boxes carry 4 decimals: 5e-5 per value moves an edge by a few 1e-4.
  CHECK(worst_axis_prompt < 1e-3);
  CHECK(worst_pivot_prompt < 1e-3);
}

TEST_CASE("dataset sizes, determinism and augmentation invariants") {
  std::vector<ObjectBundle> objects;
  for (std::uint64_t seed = 1; seed <= 6; ++seed)
    objects.push_back(fixtures::to_bundle(fixtures::random_cuboid_object(seed, 3, "d" + std::to_string(seed))));
  const Dataset a = make_dataset(objects, 5, 5, 9, {}, 1);
  const Dataset b = make_dataset(objects, 5, 5, 9, {}, 3);
  CHECK(a.samples.size() == 6 * 5 * 5);
  CHECK(format_jsonl(a.samples) == format_jsonl(b.samples));
  CHECK(format_jsonl(make_dataset(objects, 5, 5, 10).samples) != format_jsonl(a.samples));

  // Joint types do not depend on the rotation copy.
  std::map<std::pair<std::string, int>, std::vector<JointType>> types;
  for (const auto& s : a.samples) {
    std::vector<JointType> t;
    for (const auto& line : parse_artcode(s.prompt + s.completion).joints) t.push_back(type_of(line));
    auto [it, inserted] = types.emplace(std::pair{s.object_id, s.pose_index}, t);
    if (!inserted) CHECK(it->second == t);
  }

  const std::string line = format_jsonl({a.samples[0]});
  CHECK(line.find("\"prompt\"") != std::string::npos);
  CHECK(line.find("\"meta\"") != std::string::npos);
  CHECK(std::count(line.begin(), line.end(), '\n') == 1);
  CHECK(error_code([&] { make_dataset(objects, 0, 1); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("z rotations keep a vertical hinge on the same box axis") {
  fixtures::CuboidObject obj = fixtures::two_part_cabinet();
  const ObjectBundle bundle = fixtures::to_bundle(obj);
  const ArticulatedObject posed = pose_object(bundle, {}, 3);
  const RelativeJoint base = quantize_joint(posed.joints[0], posed.parts[1].obb);
  Rng rng(100);
  for (int i = 0; i < 100; ++i) {
    const ArticulatedObject rotated = transform_object(posed, {rot_z(rng.uniform(0, 2 * std::numbers::pi)), Vec3::Zero()});
    const RelativeJoint q = quantize_joint(rotated.joints[0], rotated.parts[1].obb);
    CHECK(q.axis_idx == base.axis_idx);
    CHECK(std::abs(rotated.parts[1].obb.axis(q.axis_idx).z()) > 1.0 - 1e-9);
  }
}

TEST_CASE("bundles round trip through disk") {
  const fs::path dir = temp_dir("bundle");
  ObjectBundle b = fixtures::to_bundle(fixtures::random_cuboid_object(5, 6, "rt"));
  b.ranges[0].reset();
  b.pose_states = sample_joint_states(b, {}, 2);
  write_bundle(dir / "rt", b);
  const ObjectBundle back = read_bundle(dir / "rt");
  CHECK(back.id == b.id);
  CHECK(back.ranges == b.ranges);
  CHECK(back.pose_states == b.pose_states);
  REQUIRE(back.rest.parts.size() == b.rest.parts.size());
  for (std::size_t i = 0; i < b.rest.parts.size(); ++i) {
    CHECK(back.rest.parts[i].name == b.rest.parts[i].name);
    CHECK(back.rest.parts[i].mesh->vertices == b.rest.parts[i].mesh->vertices);
    CHECK(back.rest.parts[i].mesh->faces == b.rest.parts[i].mesh->faces);
    CHECK(back.rest.parts[i].obb.center() == b.rest.parts[i].obb.center());
  }
  REQUIRE(back.rest.joints.size() == b.rest.joints.size());
  for (std::size_t k = 0; k < b.rest.joints.size(); ++k) {
    CHECK(back.rest.joints[k].axis == b.rest.joints[k].axis);
    CHECK(back.rest.joints[k].pivot == b.rest.joints[k].pivot);
    CHECK(back.rest.joints[k].type == b.rest.joints[k].type);
  }
  CHECK(error_code([&] { read_bundle(dir / "nothing"); }) == ErrorCode::IoError);
  fs::remove_all(dir);
}
