#include "artrecon/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <map>

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <nlohmann/json.hpp>

#include "artrecon/geom.hpp"
#include "artrecon/mesh_io.hpp"
#include "artrecon/parallel.hpp"
#include "artrecon/rng.hpp"

namespace artrecon {

namespace fs = std::filesystem;
using json = nlohmann::json;

int exit_code_for(const Error& error) {
  if (const auto* stage = dynamic_cast<const StageError*>(&error)) {
    if (stage->stage() == "predict" || stage->stage() == "parse") return kExitPredictorError;
    if (stage->stage() == "load") return kExitInputError;
  }
  switch (error.code()) {
    case ErrorCode::PredictorUnavailable:
    case ErrorCode::MalformedResponse:
      return kExitPredictorError;
    case ErrorCode::IoError:
    case ErrorCode::ExternalFormatError:
    case ErrorCode::SyntaxError:
    case ErrorCode::MissingMesh:
    case ErrorCode::UnsupportedJoint:
    case ErrorCode::UnresolvedLink:
    case ErrorCode::InvalidArgument:
    case ErrorCode::StateLengthMismatch:
    case ErrorCode::InvalidPrompt:
    case ErrorCode::DialectMismatch:
      return kExitInputError;
    default:
      return kExitStageError;
  }
}

void PipelineConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::InvalidArgument, what);
  };
  require(!views_dir.empty(), "views directory is required");
  require(!out_dir.empty(), "output directory is required");
  require(fusion.iou_threshold > 0.0 && fusion.iou_threshold <= 1.0, "iou_threshold must be in (0, 1]");
  require(fusion.group_overlap > 0.0 && fusion.group_overlap <= 1.0, "group_overlap must be in (0, 1]");
  require(fusion.dist_threshold > 0.0, "dist_threshold must be positive");
  require(fusion.depth_tolerance > 0.0, "depth_tolerance must be positive");
  require(resolution >= 8 && resolution <= 512, "resolution must be in [8, 512]");
  require(padding >= 1.0 && padding <= 4.0, "padding must be in [1, 4]");
  require(dilation_cells >= 0.0, "dilation must be non-negative");
  require(completer == "identity" || completer.starts_with("external:"), "completer must be 'identity' or 'external:DIR'");
  require(match_samples > 0, "match_samples must be positive");
  require(min_part_points >= 4, "min_part_points must be at least 4");
  const PredictorSpec spec = PredictorSpec::parse(predictor);
  require(!gt_obbs || gt_dir, "--gt-obbs needs a ground-truth bundle");
  require(spec.kind != PredictorSpec::Kind::Oracle || gt_dir, "the oracle predictor needs a ground-truth bundle");
}

LoadedViews load_views(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, dir.string() + ": not a directory");
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) subdirs.push_back(entry.path());
  }
  std::sort(subdirs.begin(), subdirs.end());
  if (subdirs.empty()) throw Error(ErrorCode::EmptyInput, dir.string() + ": no view directories");
  LoadedViews views;
  for (const auto& sub : subdirs) {
    if (fs::exists(sub / "camera.json")) {
      views.cameras.push_back(read_camera_view(sub));
    } else if (fs::exists(sub / "pointmap.apm")) {
      views.point_maps.views.push_back(read_point_map_view(sub));
    } else {
      throw Error(ErrorCode::IoError, (sub / "camera.json").string() + ": no such file");
    }
  }
  if (!views.cameras.empty() && !views.point_maps.views.empty())
    throw Error(ErrorCode::InvalidArgument, dir.string() + ": mixes camera views and point maps");
  return views;
}

namespace {

PointCloud part_surface(const Part& part, std::size_t n, std::uint64_t seed) {
  return sample_surface(part.mesh ? *part.mesh : box_mesh(part.obb), n, seed);
}

}  // namespace

std::vector<int> match_to_ground_truth(const std::vector<TriMesh>& pred_meshes, const ArticulatedObject& gt,
                                       std::size_t samples, std::uint64_t seed) {
  std::vector<PointCloud> pred(pred_meshes.size());
  std::vector<PointCloud> truth(gt.parts.size());
  for (std::size_t i = 0; i < pred.size(); ++i)
    pred[i] = sample_surface(pred_meshes[i], samples, derive_seed(seed, "pred/" + std::to_string(i)));
  for (std::size_t g = 0; g < truth.size(); ++g)
    truth[g] = part_surface(gt.parts[g], samples, derive_seed(seed, "gt/" + std::to_string(g)));
  Eigen::MatrixXd cost(pred.size(), truth.size());
  for (std::size_t i = 0; i < pred.size(); ++i)
    for (std::size_t g = 0; g < truth.size(); ++g) cost(i, g) = chamfer(pred[i], truth[g]);
  const Assignment a = match_parts(cost);
  std::vector<int> gt_to_pred(truth.size(), -1);
  for (std::size_t i = 0; i < a.row_to_col.size(); ++i) {
    if (a.row_to_col[i] >= 0) gt_to_pred[a.row_to_col[i]] = static_cast<int>(i);
  }
  return gt_to_pred;
}

std::string oracle_completion(const ArticulatedObject& gt, const std::vector<int>& gt_to_pred,
                              std::span<const Obb> pred_boxes) {
  std::vector<RelativeJoint> joints;
  for (const Joint& j : gt.joints) {
    const int parent = gt_to_pred.at(j.parent);
    const int child = gt_to_pred.at(j.child);
    if (parent < 0 || child < 0) continue;
    RelativeJoint r = quantize_joint(j, pred_boxes[child]);
    r.parent = parent;
    r.child = child;
    joints.push_back(r);
  }
  return emit_completion(joints);
}

namespace {

class StageClock {
 public:
  explicit StageClock(std::vector<StageTiming>& timings) : timings_(timings) {}

  template <typename F>
  auto run(const std::string& stage, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    auto record = [&] {
      timings_.push_back({stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()});
    };
    try {
      if constexpr (std::is_void_v<decltype(body())>) {
        body();
        record();
      } else {
        auto result = body();
        record();
        return result;
      }
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      throw StageError(stage, e);
    }
  }

 private:
  std::vector<StageTiming>& timings_;
};

std::string part_name(std::size_t i) { return "part_" + std::to_string(i); }

}  // namespace

ReconstructResult reconstruct(const PipelineConfig& config) {
  config.validate();
  ReconstructResult result;
  StageClock clock(result.timings);
  const PredictorSpec predictor_spec = PredictorSpec::parse(config.predictor);

  const LoadedViews views = clock.run("load", [&] { return load_views(config.views_dir); });
  std::optional<ArticulatedObject> gt;
  if (config.gt_dir) gt = clock.run("load", [&] { return read_bundle(*config.gt_dir).posed(); });

  const PointCloud fused = clock.run("fuse", [&] {
    const auto seed = derive_seed(config.seed, "fuse");
    return views.cameras.empty() ? fuse_labels(views.point_maps, config.fusion_points, seed, config.fusion)
                                 : fuse_labels(views.cameras, config.fusion_points, seed, config.fusion);
  });

  std::vector<PointCloud> clouds = clock.run("split", [&] {
    int max_label = -1;
    for (int l : fused.labels) max_label = std::max(max_label, l);
    std::vector<PointCloud> by_label(static_cast<std::size_t>(max_label + 1));
    for (std::size_t p = 0; p < fused.size(); ++p) {
      if (fused.labels[p] >= 0) by_label[fused.labels[p]].points.push_back(fused.points[p]);
    }
    std::vector<PointCloud> kept;
    for (std::size_t l = 0; l < by_label.size(); ++l) {
      if (by_label[l].size() >= config.min_part_points) {
        kept.push_back(std::move(by_label[l]));
      } else {
        result.warnings.push_back("dropped label " + std::to_string(l) + " with " + std::to_string(by_label[l].size()) +
                                  " points");
      }
    }
    if (kept.empty()) throw Error(ErrorCode::EmptyInput, "no labelled part has enough points");
    return kept;
  });

  std::vector<TriMesh> meshes(clouds.size());
  clock.run("complete", [&] {
    const IdentityCompleter identity(config.dilation_cells);
    for (std::size_t i = 0; i < clouds.size(); ++i) {
      const CompletionRequest request = make_completion_request(
          clouds[i], derive_seed(config.seed, "complete/" + part_name(i)), config.resolution, config.padding);
      OccupancyGrid grid;
      if (config.completer == "identity") {
        grid = complete(request, identity);
      } else {
        const fs::path dir = config.completer.substr(std::strlen("external:"));
        grid = complete(request, ExternalCompleter(dir / (part_name(i) + ".aog")));
      }
      meshes[i] = marching_cubes(grid);
    }
  });

  std::vector<Obb> boxes = clock.run("boxes", [&] {
    std::vector<Obb> fitted;
    for (const TriMesh& m : meshes) fitted.push_back(fit_obb(m.vertices));
    return fitted;
  });

  std::vector<int> gt_to_pred;
  if (gt) {
    gt_to_pred = clock.run("match", [&] {
      return match_to_ground_truth(meshes, *gt, config.match_samples, derive_seed(config.seed, "match"));
    });
    if (config.gt_obbs) {
      for (std::size_t g = 0; g < gt_to_pred.size(); ++g) {
        if (gt_to_pred[g] >= 0) boxes[gt_to_pred[g]] = gt->parts[g].obb;
      }
    }
  }

  result.prompt = emit_prompt(boxes);
  const PredictorClient client(predictor_spec, config.predictor_options);
  result.completion = clock.run("predict", [&] {
    OracleFn oracle;
    if (gt) oracle = [&](const std::string&) { return oracle_completion(*gt, gt_to_pred, boxes); };
    return client.predict(result.prompt, oracle);
  });

  std::vector<BoxEntry> entries;
  for (const Obb& b : boxes) entries.push_back(BoxEntry::from_obb(b));
  result.document = clock.run("parse", [&] { return parse_artcode(result.completion, Dialect::EdgeAxis, entries); });
  result.document.boxes = entries;

  clock.run("execute", [&] {
    Execution ex = execute(result.document, boxes, {});
    result.object = std::move(ex.object);
    for (std::size_t i = 0; i < result.object.parts.size(); ++i) {
      result.object.parts[i].name = part_name(i);
      result.object.parts[i].mesh = meshes[i];
    }
  });

  clock.run("write", [&] {
    fs::create_directories(config.out_dir);
    ObjectBundle bundle;
    bundle.id = config.out_dir.filename().string();
    bundle.rest = result.object;
    bundle.ranges.assign(result.object.joints.size(), std::nullopt);
    write_bundle(config.out_dir, bundle);
    write_text_file(config.out_dir / "object.artcode", emit_document(result.document));
    MjcfOptions mjcf;
    mjcf.model_name = bundle.id.empty() ? "object" : bundle.id;
    mjcf.mesh_dir = "parts";
    write_text_file(config.out_dir / "object.mjcf.xml", export_mjcf(result.object, {}, mjcf));
    write_text_file(config.out_dir / "prompt.txt", result.prompt);
    write_text_file(config.out_dir / "completion.txt", result.completion);
  });

  json report;
  report["predictor"] = predictor_spec.to_string();
  report["seed"] = config.seed;
  report["parts"] = result.object.parts.size();
  report["joints"] = result.object.joints.size();
  report["gt_obbs"] = config.gt_obbs;
  report["warnings"] = result.warnings;
  json stages = json::array();
  for (const StageTiming& t : result.timings) stages.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
  report["timings"] = stages;
  write_text_file(config.out_dir / "report.json", report.dump(2) + "\n");
  return result;
}

namespace {

std::vector<fs::path> sorted_subdirs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, dir.string() + ": not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<EvalReport> evaluate_dirs(const fs::path& pred_dir, const fs::path& gt_dir, const EvalOptions& options,
                                      int jobs) {
  const auto gt_dirs = sorted_subdirs(gt_dir);
  if (gt_dirs.empty()) throw Error(ErrorCode::EmptyInput, gt_dir.string() + ": no ground-truth bundles");
  std::vector<EvalReport> reports(gt_dirs.size());
  parallel_for(gt_dirs.size(), jobs, [&](std::size_t i) {
    const std::string id = gt_dirs[i].filename().string();
    const ArticulatedObject gt = read_bundle(gt_dirs[i]).posed();
    const fs::path pred_path = pred_dir / id;
    if (!fs::exists(pred_path / "object.json")) {
      reports[i] = missing_prediction_report(gt, id);
      return;
    }
    reports[i] = evaluate_object(read_bundle(pred_path).posed(), gt, options, id);
  });
  return reports;
}

ExportFormat export_format_from_string(std::string_view text) {
  if (text == "mjcf") return ExportFormat::Mjcf;
  if (text == "obj") return ExportFormat::Obj;
  if (text == "gltf") return ExportFormat::Gltf;
  throw Error(ErrorCode::InvalidArgument, "export format must be mjcf, obj or gltf, got '" + std::string(text) + "'");
}

std::string export_document(const ArtCodeDocument& doc, std::span<const double> states, ExportFormat format,
                            const std::vector<std::optional<TriMesh>>& meshes, const std::string& mesh_dir) {
  Execution ex = execute(doc, states);
  ArticulatedObject& object = ex.object;
  for (std::size_t i = 0; i < object.parts.size(); ++i) {
    object.parts[i].name = part_name(i);
    if (i < meshes.size()) object.parts[i].mesh = meshes[i];
  }
  if (format == ExportFormat::Mjcf) {
    MjcfOptions options;
    if (!mesh_dir.empty()) options.mesh_dir = mesh_dir;
    return export_mjcf(object, states, options);
  }
  std::vector<TriMesh> posed;
  for (std::size_t i = 0; i < object.parts.size(); ++i) {
    const Part& p = object.parts[i];
    posed.push_back(transform_mesh(ex.transforms[i], p.mesh ? *p.mesh : box_mesh(p.obb)));
  }
  if (format == ExportFormat::Gltf) return export_gltf(posed);
  TriMesh merged;
  for (const TriMesh& m : posed) append_mesh(merged, m);
  return format_obj(merged);
}

namespace {

std::string base64(const std::string& bytes) {
  using namespace boost::archive::iterators;
  using It = base64_from_binary<transform_width<std::string::const_iterator, 6, 8>>;
  std::string out(It(bytes.begin()), It(bytes.end()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

template <typename T>
void append_bytes(std::string& buffer, T value) {
  char raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  buffer.append(raw, sizeof(T));
}

}  // namespace

std::string export_gltf(const std::vector<TriMesh>& part_meshes) {
  constexpr int kArrayBuffer = 34962;
  constexpr int kElementArrayBuffer = 34963;
  constexpr int kFloat = 5126;
  constexpr int kUnsignedInt = 5125;
  std::string buffer;
  json views = json::array();
  json accessors = json::array();
  json meshes = json::array();
  json nodes = json::array();
  json children = json::array();
  for (std::size_t i = 0; i < part_meshes.size(); ++i) {
    const TriMesh& m = part_meshes[i];
    if (m.vertices.empty() || m.faces.empty())
      throw Error(ErrorCode::EmptyInput, part_name(i) + " has no geometry to export");
    const std::size_t pos_offset = buffer.size();
    Eigen::Vector3f lo = Eigen::Vector3f::Constant(std::numeric_limits<float>::max());
    Eigen::Vector3f hi = -lo;
    for (const Vec3& v : m.vertices) {
      const Eigen::Vector3f f = v.cast<float>();
      lo = lo.cwiseMin(f);
      hi = hi.cwiseMax(f);
      for (int c = 0; c < 3; ++c) append_bytes(buffer, f[c]);
    }
    const std::size_t pos_length = buffer.size() - pos_offset;
    const std::size_t idx_offset = buffer.size();
    for (const Face& f : m.faces)
      for (int c = 0; c < 3; ++c) append_bytes(buffer, static_cast<std::uint32_t>(f[c]));
    const std::size_t idx_length = buffer.size() - idx_offset;

    const auto view = views.size();
    views.push_back({{"buffer", 0}, {"byteOffset", pos_offset}, {"byteLength", pos_length}, {"target", kArrayBuffer}});
    views.push_back(
        {{"buffer", 0}, {"byteOffset", idx_offset}, {"byteLength", idx_length}, {"target", kElementArrayBuffer}});
    const auto accessor = accessors.size();
    accessors.push_back({{"bufferView", view},
                         {"componentType", kFloat},
                         {"count", m.vertices.size()},
                         {"type", "VEC3"},
                         {"min", {lo.x(), lo.y(), lo.z()}},
                         {"max", {hi.x(), hi.y(), hi.z()}}});
    accessors.push_back(
        {{"bufferView", view + 1}, {"componentType", kUnsignedInt}, {"count", 3 * m.faces.size()}, {"type", "SCALAR"}});
    meshes.push_back({{"name", part_name(i)},
                      {"primitives", json::array({{{"attributes", {{"POSITION", accessor}}}, {"indices", accessor + 1}}})}});
    children.push_back(nodes.size() + 1);
    nodes.push_back({{"name", part_name(i)}, {"mesh", i}});
  }
  // Node 0 is the object; part nodes follow in part order.
  json all_nodes = json::array({{{"name", "object"}, {"children", children}}});
  for (auto& n : nodes) all_nodes.push_back(n);

  json doc;
  doc["asset"] = {{"version", "2.0"}, {"generator", "artrecon"}};
  doc["scene"] = 0;
  doc["scenes"] = json::array({{{"nodes", {0}}}});
  doc["nodes"] = all_nodes;
  doc["meshes"] = meshes;
  doc["accessors"] = accessors;
  doc["bufferViews"] = views;
  doc["buffers"] = json::array(
      {{{"byteLength", buffer.size()}, {"uri", "data:application/octet-stream;base64," + base64(buffer)}}});
  return doc.dump(2) + "\n";
}

IngestSummary ingest_dir(const fs::path& urdf_dir, const fs::path& out_dir, std::uint64_t seed,
                         const PoseSampler& sampler, int jobs) {
  std::vector<fs::path> objects;
  if (fs::exists(urdf_dir / "mobility.urdf")) {
    objects.push_back(urdf_dir);
  } else {
    for (const auto& sub : sorted_subdirs(urdf_dir)) {
      if (fs::exists(sub / "mobility.urdf")) objects.push_back(sub);
    }
  }
  if (objects.empty()) throw Error(ErrorCode::IoError, urdf_dir.string() + ": no mobility.urdf found");

  std::vector<std::optional<std::string>> errors(objects.size());
  parallel_for(objects.size(), jobs, [&](std::size_t i) {
    const std::string id = objects[i].filename().string();
    try {
      const UrdfModel model = parse_urdf(read_text_file(objects[i] / "mobility.urdf"));
      ObjectBundle bundle = urdf_to_bundle(model, directory_mesh_loader(objects[i]), id);
      bundle.pose_states = sample_joint_states(bundle, sampler, derive_seed(seed, "ingest/" + id));
      write_bundle(out_dir / id, bundle);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });
  IngestSummary summary;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const std::string id = objects[i].filename().string();
    if (errors[i]) summary.failed.emplace_back(id, *errors[i]);
    else summary.written.push_back(id);
  }
  return summary;
}

std::vector<ObjectBundle> read_bundles(const fs::path& dir, int jobs) {
  std::vector<fs::path> dirs;
  for (const auto& sub : sorted_subdirs(dir)) {
    if (fs::exists(sub / "object.json")) dirs.push_back(sub);
  }
  if (dirs.empty()) throw Error(ErrorCode::EmptyInput, dir.string() + ": no bundles (object.json) found");
  std::vector<ObjectBundle> bundles(dirs.size());
  parallel_for(dirs.size(), jobs, [&](std::size_t i) {
    try {
      bundles[i] = read_bundle(dirs[i]);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ExternalFormatError, (dirs[i] / "object.json").string() + ": " + e.what());
    }
  });
  return bundles;
}

}  // namespace artrecon
