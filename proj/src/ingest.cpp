#include "artrecon/ingest.hpp"

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cctype>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <numbers>
#include <set>
#include <sstream>

#include "artrecon/artcode.hpp"
#include "artrecon/error.hpp"
#include "artrecon/mesh_io.hpp"
#include "artrecon/numfmt.hpp"
#include "artrecon/parallel.hpp"
#include "artrecon/rng.hpp"

namespace artrecon {

namespace pt = boost::property_tree;
using nlohmann::json;

// ---------------------------------------------------------------------------
// URDF

Mat3 rpy_to_matrix(const Vec3& rpy) {
  return axis_angle(Vec3::UnitZ(), rpy.z()) * axis_angle(Vec3::UnitY(), rpy.y()) * axis_angle(Vec3::UnitX(), rpy.x());
}

namespace {

Vec3 parse_vec3(const std::string& text, const std::string& what) {
  std::istringstream in(text);
  std::vector<std::string> tokens;
  for (std::string t; in >> t;) tokens.push_back(t);
  if (tokens.size() != 3) throw Error(ErrorCode::ExternalFormatError, what + " needs three numbers, got '" + text + "'");
  Vec3 v;
  for (int i = 0; i < 3; ++i) v[i] = parse_real(tokens[i]);
  return v;
}

RigidTransform parse_origin(const pt::ptree& node) {
  RigidTransform t;
  const auto origin = node.get_child_optional("origin");
  if (!origin) return t;
  t.translation = parse_vec3(origin->get<std::string>("<xmlattr>.xyz", "0 0 0"), "origin xyz");
  t.rotation = rpy_to_matrix(parse_vec3(origin->get<std::string>("<xmlattr>.rpy", "0 0 0"), "origin rpy"));
  return t;
}

std::vector<UrdfMesh> parse_geometry(const pt::ptree& link, const char* kind, std::vector<std::string>& warnings,
                                     const std::string& link_name) {
  std::vector<UrdfMesh> out;
  for (const auto& [tag, node] : link) {
    if (tag != kind) continue;
    const auto geometry = node.get_child_optional("geometry");
    if (!geometry) continue;
    for (const auto& [gtag, gnode] : *geometry) {
      if (gtag == "mesh") {
        UrdfMesh m;
        m.filename = gnode.get<std::string>("<xmlattr>.filename", "");
        if (m.filename.empty()) throw Error(ErrorCode::ExternalFormatError, "mesh without filename in link " + link_name);
        if (const auto s = gnode.get_optional<std::string>("<xmlattr>.scale")) m.scale = parse_vec3(*s, "mesh scale");
        m.origin = parse_origin(node);
        out.push_back(std::move(m));
      } else if (gtag != "<xmlattr>") {
        warnings.push_back("link " + link_name + ": ignored " + gtag + " geometry");
      }
    }
  }
  return out;
}

}  // namespace

UrdfModel parse_urdf(std::string_view xml) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(xml)};
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw SyntaxError(static_cast<int>(e.line()), 0, e.message());
  }
  const auto robot = tree.get_child_optional("robot");
  if (!robot) throw SyntaxError(1, 0, "missing <robot> element");

  UrdfModel model;
  model.name = robot->get<std::string>("<xmlattr>.name", "");
  std::set<std::string> link_names;
  for (const auto& [tag, node] : *robot) {
    if (tag == "link") {
      UrdfLink link;
      link.name = node.get<std::string>("<xmlattr>.name", "");
      if (link.name.empty()) throw Error(ErrorCode::ExternalFormatError, "link without name");
      if (!link_names.insert(link.name).second) throw Error(ErrorCode::ExternalFormatError, "duplicate link " + link.name);
      link.meshes = parse_geometry(node, "visual", model.warnings, link.name);
      if (link.meshes.empty()) link.meshes = parse_geometry(node, "collision", model.warnings, link.name);
      for (const auto& [child_tag, child] : node) {
        (void)child;
        if (child_tag != "visual" && child_tag != "collision" && child_tag != "<xmlattr>") {
          model.warnings.push_back("link " + link.name + ": ignored <" + child_tag + ">");
        }
      }
      model.links.push_back(std::move(link));
    } else if (tag == "joint") {
      UrdfJoint joint;
      joint.name = node.get<std::string>("<xmlattr>.name", "");
      const std::string type = node.get<std::string>("<xmlattr>.type", "");
      if (type == "revolute") joint.type = UrdfJointType::Revolute;
      else if (type == "prismatic") joint.type = UrdfJointType::Prismatic;
      else if (type == "fixed") joint.type = UrdfJointType::Fixed;
      else if (type == "continuous") joint.type = UrdfJointType::Continuous;
      else if (type == "planar" || type == "floating" || type == "ball") {
        throw Error(ErrorCode::UnsupportedJoint, "joint " + joint.name + " has type " + type);
      } else {
        throw Error(ErrorCode::ExternalFormatError, "joint " + joint.name + " has unknown type '" + type + "'");
      }
      joint.parent = node.get<std::string>("parent.<xmlattr>.link", "");
      joint.child = node.get<std::string>("child.<xmlattr>.link", "");
      joint.origin = parse_origin(node);
      if (const auto axis = node.get_optional<std::string>("axis.<xmlattr>.xyz")) {
        joint.axis = parse_vec3(*axis, "joint axis");
        if (joint.axis.norm() < 1e-12) throw Error(ErrorCode::ExternalFormatError, "joint " + joint.name + " has a zero axis");
        joint.axis.normalize();
      }
      if (joint.type != UrdfJointType::Continuous && joint.type != UrdfJointType::Fixed) {
        if (const auto limit = node.get_child_optional("limit")) {
          const auto lower = limit->get_optional<std::string>("<xmlattr>.lower");
          const auto upper = limit->get_optional<std::string>("<xmlattr>.upper");
          if (lower && upper) joint.limit = UrdfLimit{parse_real(*lower), parse_real(*upper)};
        }
      }
      for (const auto& [child_tag, child] : node) {
        (void)child;
        static const std::set<std::string> known{"<xmlattr>", "origin", "axis", "parent", "child", "limit"};
        if (!known.count(child_tag)) model.warnings.push_back("joint " + joint.name + ": ignored <" + child_tag + ">");
      }
      model.joints.push_back(std::move(joint));
    } else if (tag != "<xmlattr>" && tag != "<xmlcomment>") {
      model.warnings.push_back("ignored <" + tag + ">");
    }
  }

  std::set<std::string> children;
  for (const auto& j : model.joints) {
    for (const auto* name : {&j.parent, &j.child}) {
      if (!link_names.count(*name)) throw Error(ErrorCode::UnresolvedLink, "joint " + j.name + " references unknown link '" + *name + "'");
    }
    if (!children.insert(j.child).second) throw Error(ErrorCode::UnresolvedLink, "link " + j.child + " has two parent joints");
  }
  std::vector<std::string> roots;
  for (const auto& l : model.links) {
    if (!children.count(l.name)) roots.push_back(l.name);
  }
  if (roots.size() != 1) throw Error(ErrorCode::UnresolvedLink, "expected exactly one root link, found " + std::to_string(roots.size()));
  model.root = roots.front();
  return model;
}

// ---------------------------------------------------------------------------
// Grouping

MeshLoader directory_mesh_loader(std::filesystem::path base_dir) {
  return [base = std::move(base_dir)](const std::string& filename) {
    std::string name = filename;
    if (name.rfind("package://", 0) == 0) name = name.substr(10);
    const auto path = base / name;
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::MissingMesh, path.string());
    return read_obj(path);
  };
}

namespace {

struct LinkLayout {
  std::map<std::string, RigidTransform> world;  // link frame at zero state
  std::map<std::string, int> part_of;           // link -> part index
  std::vector<std::string> part_links;          // part index -> owning link
  std::vector<int> joint_order;                 // URDF joints in traversal order
};

LinkLayout layout(const UrdfModel& model) {
  LinkLayout out;
  out.world[model.root] = RigidTransform::identity();
  out.part_of[model.root] = 0;
  out.part_links.push_back(model.root);
  std::vector<std::string> queue{model.root};
  for (std::size_t q = 0; q < queue.size(); ++q) {
    const std::string link = queue[q];
    for (std::size_t j = 0; j < model.joints.size(); ++j) {
      const UrdfJoint& joint = model.joints[j];
      if (joint.parent != link) continue;
      out.world[joint.child] = out.world[link] * joint.origin;
      if (joint.type == UrdfJointType::Fixed) {
        out.part_of[joint.child] = out.part_of[link];
      } else {
        out.part_of[joint.child] = static_cast<int>(out.part_links.size());
        out.part_links.push_back(joint.child);
        out.joint_order.push_back(static_cast<int>(j));
      }
      queue.push_back(joint.child);
    }
  }
  if (queue.size() != model.links.size()) throw Error(ErrorCode::UnresolvedLink, "links not reachable from the root");
  return out;
}

}  // namespace

std::vector<Part> group_part_meshes(const UrdfModel& model, const MeshLoader& loader) {
  const LinkLayout lay = layout(model);
  std::vector<Part> parts(lay.part_links.size());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    parts[i].name = lay.part_links[i];
    parts[i].mesh = TriMesh{};
  }
  for (const UrdfLink& link : model.links) {
    const int part = lay.part_of.at(link.name);
    for (const UrdfMesh& m : link.meshes) {
      TriMesh mesh = loader(m.filename);
      for (Vec3& v : mesh.vertices) v = v.cwiseProduct(m.scale);
      append_mesh(*parts[part].mesh, transform_mesh(lay.world.at(link.name) * m.origin, mesh));
    }
  }
  for (Part& p : parts) {
    if (p.mesh->vertices.empty()) throw Error(ErrorCode::MissingMesh, "part " + p.name + " has no mesh geometry");
    p.obb = fit_obb(p.mesh->vertices);
  }
  return parts;
}

ObjectBundle urdf_to_bundle(const UrdfModel& model, const MeshLoader& loader, std::string id) {
  ObjectBundle b;
  b.id = std::move(id);
  b.rest.parts = group_part_meshes(model, loader);
  b.rest.root = 0;
  const LinkLayout lay = layout(model);
  for (int j : lay.joint_order) {
    const UrdfJoint& u = model.joints[j];
    const RigidTransform frame = lay.world.at(u.child);
    Joint joint;
    joint.type = u.type == UrdfJointType::Prismatic ? JointType::Prismatic : JointType::Revolute;
    joint.axis = frame.apply_direction(u.axis).normalized();
    if (joint.type == JointType::Revolute) joint.pivot = frame.translation;
    joint.parent = lay.part_of.at(u.parent);
    joint.child = lay.part_of.at(u.child);
    b.rest.joints.push_back(joint);
    if (u.limit) b.ranges.emplace_back(JointRange{u.limit->lower, u.limit->upper});
    else b.ranges.emplace_back(std::nullopt);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Posing

JointRange default_range(const Joint& joint, const Obb& child_rest_box) {
  if (joint.type == JointType::Revolute) return {0.0, kDefaultRevoluteUpper};
  int best = 0;
  double best_dot = -1.0;
  for (int i = 0; i < 3; ++i) {
    const double d = std::abs(joint.axis.dot(child_rest_box.axis(i)));
    if (d > best_dot) {
      best_dot = d;
      best = i;
    }
  }
  return {0.0, kDefaultPrismaticDepthFraction * 2.0 * child_rest_box.half_lengths()[best]};
}

JointRange effective_range(const ObjectBundle& bundle, std::size_t joint) {
  if (joint < bundle.ranges.size() && bundle.ranges[joint]) return *bundle.ranges[joint];
  const Joint& j = bundle.rest.joints.at(joint);
  return default_range(j, bundle.rest.parts.at(j.child).obb);
}

std::vector<double> sample_joint_states(const ObjectBundle& bundle, const PoseSampler& sampler, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> states;
  for (std::size_t j = 0; j < bundle.rest.joints.size(); ++j) {
    const JointRange r = effective_range(bundle, j);
    const double f = rng.uniform(sampler.lo_fraction, sampler.hi_fraction);
    states.push_back(r.lower + f * (r.upper - r.lower));
  }
  return states;
}

namespace {

Part move_part(const Part& part, const RigidTransform& t) {
  Part out;
  out.name = part.name;
  if (part.mesh) out.mesh = transform_mesh(t, *part.mesh);
  if (part.cloud) out.cloud = transform_points(t, *part.cloud);
  if (out.mesh && !out.mesh->vertices.empty()) out.obb = fit_obb(out.mesh->vertices);
  else if (out.cloud && !out.cloud->empty()) out.obb = fit_obb(*out.cloud);
  else out.obb = part.obb.transformed(t);
  return out;
}

Joint move_joint(const Joint& joint, const RigidTransform& parent) {
  Joint out = joint;
  out.axis = parent.apply_direction(joint.axis).normalized();
  if (joint.pivot) out.pivot = parent.apply(*joint.pivot);
  out.state = 0.0;
  return out;
}

}  // namespace

ArticulatedObject apply_pose(const ArticulatedObject& rest, std::span<const double> states) {
  const auto transforms = forward_kinematics(rest, states);
  ArticulatedObject out;
  out.root = rest.root;
  for (std::size_t i = 0; i < rest.parts.size(); ++i) out.parts.push_back(move_part(rest.parts[i], transforms[i]));
  for (const Joint& j : rest.joints) out.joints.push_back(move_joint(j, transforms[j.parent]));
  return out;
}

ArticulatedObject ObjectBundle::posed() const {
  if (pose_states.empty()) return rest;
  return apply_pose(rest, pose_states);
}

ArticulatedObject pose_object(const ObjectBundle& bundle, const PoseSampler& sampler, std::uint64_t seed, std::vector<double>* states_out) {
  const auto states = sample_joint_states(bundle, sampler, seed);
  if (states_out) *states_out = states;
  return apply_pose(bundle.rest, states);
}

ArticulatedObject transform_object(const ArticulatedObject& object, const RigidTransform& t) {
  ArticulatedObject out;
  out.root = object.root;
  for (const Part& p : object.parts) out.parts.push_back(move_part(p, t));
  for (const Joint& j : object.joints) {
    Joint moved = move_joint(j, t);
    moved.state = j.state;
    out.joints.push_back(moved);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset make_dataset(std::span<const ObjectBundle> objects, int n_rotations, int n_poses, std::uint64_t seed, const PoseSampler& sampler,
                     int jobs) {
  if (n_rotations < 1 || n_poses < 1) throw Error(ErrorCode::InvalidArgument, "rotation and pose counts must be positive");
  std::vector<Dataset> per_object(objects.size());
  parallel_for(objects.size(), jobs, [&](std::size_t o) {
    const ObjectBundle& b = objects[o];
    Dataset& out = per_object[o];
    for (int p = 0; p < n_poses; ++p) {
      const std::uint64_t state_seed = derive_seed(seed, b.id + "/pose/" + std::to_string(p));
      const ArticulatedObject posed = pose_object(b, sampler, state_seed);
      for (int r = 0; r < n_rotations; ++r) {
        Rng rng(derive_seed(seed, b.id + "/rotation/" + std::to_string(p) + "/" + std::to_string(r)));
        const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const ArticulatedObject obj = transform_object(posed, {rot_z(angle), Vec3::Zero()});
        std::vector<Obb> boxes;
        for (const Part& part : obj.parts) boxes.push_back(part.obb);
        std::vector<RelativeJoint> relative;
        try {
          for (const Joint& j : obj.joints) relative.push_back(quantize_joint(j, boxes.at(j.child)));
        } catch (const Error& e) {
          out.skipped.push_back({b.id, p, r, e.what()});
          continue;
        }
        DatasetSample s;
        s.prompt = emit_prompt(boxes);
        s.completion = emit_completion(relative);
        s.object_id = b.id;
        s.pose_index = p;
        s.rotation_index = r;
        s.state_seed = state_seed;
        s.z_rotation = angle;
        out.samples.push_back(std::move(s));
      }
    }
  });
  Dataset all;
  for (auto& d : per_object) {
    std::move(d.samples.begin(), d.samples.end(), std::back_inserter(all.samples));
    std::move(d.skipped.begin(), d.skipped.end(), std::back_inserter(all.skipped));
  }
  return all;
}

std::string format_jsonl(const std::vector<DatasetSample>& samples) {
  std::string out;
  for (const auto& s : samples) {
    json j;
    j["prompt"] = s.prompt;
    j["completion"] = s.completion;
    j["meta"] = {{"object_id", s.object_id},
                 {"pose_index", s.pose_index},
                 {"rotation_index", s.rotation_index},
                 {"state_seed", s.state_seed},
                 {"z_rotation", s.z_rotation}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Bundles

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw Error(ErrorCode::ExternalFormatError, "expected 3 numbers");
  return {v[0], v[1], v[2]};
}

std::string file_stem(const std::string& name) {
  std::string out = name;
  for (char& c : out) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) c = '_';
  }
  return out.empty() ? "part" : out;
}

}  // namespace

void write_bundle(const std::filesystem::path& dir, const ObjectBundle& b) {
  json j;
  j["id"] = b.id;
  j["root"] = b.rest.root;
  json parts = json::array();
  std::set<std::string> used;
  for (std::size_t i = 0; i < b.rest.parts.size(); ++i) {
    const Part& p = b.rest.parts[i];
    json pj;
    pj["name"] = p.name;
    if (p.mesh) {
      std::string stem = file_stem(p.name);
      if (!used.insert(stem).second) stem += "_" + std::to_string(i);
      const std::string rel = "parts/" + stem + ".obj";
      write_obj(dir / rel, *p.mesh);
      pj["mesh"] = rel;
    } else {
      pj["mesh"] = nullptr;
    }
    std::vector<double> rot;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) rot.push_back(p.obb.rotation()(r, c));
    pj["obb"] = {{"center", vec_json(p.obb.center())}, {"rotation", rot}, {"half", vec_json(p.obb.half_lengths())}, {"degenerate", p.obb.degenerate()}};
    parts.push_back(pj);
  }
  j["parts"] = parts;
  json joints = json::array();
  for (std::size_t k = 0; k < b.rest.joints.size(); ++k) {
    const Joint& jt = b.rest.joints[k];
    json jj;
    jj["type"] = std::string(to_string(jt.type));
    jj["parent"] = jt.parent;
    jj["child"] = jt.child;
    jj["axis"] = vec_json(jt.axis);
    jj["pivot"] = jt.pivot ? vec_json(*jt.pivot) : json(nullptr);
    if (k < b.ranges.size() && b.ranges[k]) jj["range"] = {b.ranges[k]->lower, b.ranges[k]->upper};
    else jj["range"] = nullptr;
    joints.push_back(jj);
  }
  j["joints"] = joints;
  j["pose_states"] = b.pose_states;
  write_text_file(dir / "object.json", j.dump(2) + "\n");
}

ObjectBundle read_bundle(const std::filesystem::path& dir) {
  const auto path = dir / "object.json";
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::IoError, path.string() + ": no such file");
  try {
    const json j = json::parse(read_text_file(path));
    ObjectBundle b;
    b.id = j.at("id").get<std::string>();
    b.rest.root = j.at("root").get<int>();
    for (const auto& pj : j.at("parts")) {
      Part p;
      p.name = pj.at("name").get<std::string>();
      if (!pj.at("mesh").is_null()) {
        const auto mesh_path = dir / pj.at("mesh").get<std::string>();
        if (!std::filesystem::exists(mesh_path)) throw Error(ErrorCode::MissingMesh, mesh_path.string());
        p.mesh = read_obj(mesh_path);
      }
      const auto& o = pj.at("obb");
      const auto rot = o.at("rotation").get<std::vector<double>>();
      if (rot.size() != 9) throw Error(ErrorCode::ExternalFormatError, path.string() + ": rotation needs 9 numbers");
      Mat3 r;
      for (int a = 0; a < 3; ++a)
        for (int c = 0; c < 3; ++c) r(a, c) = rot[3 * a + c];
      p.obb = Obb(json_vec(o.at("center")), r, json_vec(o.at("half")), o.value("degenerate", false));
      b.rest.parts.push_back(std::move(p));
    }
    for (const auto& jj : j.at("joints")) {
      Joint jt;
      jt.type = joint_type_from_string(jj.at("type").get<std::string>());
      jt.parent = jj.at("parent").get<int>();
      jt.child = jj.at("child").get<int>();
      jt.axis = json_vec(jj.at("axis"));
      if (!jj.at("pivot").is_null()) jt.pivot = json_vec(jj.at("pivot"));
      b.rest.joints.push_back(jt);
      if (jj.contains("range") && !jj.at("range").is_null()) {
        const auto r = jj.at("range").get<std::vector<double>>();
        if (r.size() != 2) throw Error(ErrorCode::ExternalFormatError, path.string() + ": range needs 2 numbers");
        b.ranges.emplace_back(JointRange{r[0], r[1]});
      } else {
        b.ranges.emplace_back(std::nullopt);
      }
    }
    b.pose_states = j.value("pose_states", std::vector<double>{});
    if (!b.pose_states.empty() && b.pose_states.size() != b.rest.joints.size()) {
      throw Error(ErrorCode::StateLengthMismatch, path.string() + ": pose_states length differs from joint count");
    }
    require_tree(b.rest);
    return b;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ExternalFormatError, path.string() + ": " + e.what());
  }
}

}  // namespace artrecon
