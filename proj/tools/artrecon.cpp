// Command-line front end: one subcommand per pipeline step.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "artrecon/artcode.hpp"
#include "artrecon/error.hpp"
#include "artrecon/evalharness.hpp"
#include "artrecon/ingest.hpp"
#include "artrecon/mesh_io.hpp"
#include "artrecon/numfmt.hpp"
#include "artrecon/pipeline.hpp"
#include "artrecon/rng.hpp"
#include "artrecon/shape.hpp"

namespace fs = std::filesystem;
using namespace artrecon;

namespace {

struct Common {
  std::uint64_t seed = 0;
  int jobs = 1;
};

void warn(const std::string& message) { std::cerr << "warning: " << message << "\n"; }

// Writes to `path`, or stdout when it is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  write_text_file(path, text);
}

PointCloud read_cloud(const fs::path& path) {
  if (path.extension() == ".ply") return read_ply(path);
  if (path.extension() == ".obj") return PointCloud{read_obj(path).vertices, {}};
  throw Error(ErrorCode::InvalidArgument, path.string() + ": expected a .ply or .obj file");
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string urdf_dir;
  std::string out_dir;
  PoseSampler sampler;
};

int run_ingest(const IngestArgs& a, const Common& c) {
  const IngestSummary s = ingest_dir(a.urdf_dir, a.out_dir, c.seed, a.sampler, c.jobs);
  for (const auto& [id, message] : s.failed) std::cerr << "error: " << id << ": " << message << "\n";
  std::cerr << "ingested " << s.written.size() << " object(s), " << s.failed.size() << " failed\n";
  return s.failed.empty() ? kExitOk : kExitInputError;
}

struct DatasetArgs {
  std::string bundles;
  std::string out = "-";
  int rotations = 5;
  int poses = 5;
  PoseSampler sampler;
};

int run_gen_dataset(const DatasetArgs& a, const Common& c) {
  const auto bundles = read_bundles(a.bundles, c.jobs);
  const Dataset ds = make_dataset(bundles, a.rotations, a.poses, c.seed, a.sampler, c.jobs);
  for (const auto& s : ds.skipped)
    warn("skipped " + s.object_id + " pose " + std::to_string(s.pose_index) + " rotation " + std::to_string(s.rotation_index) + ": " +
         s.reason);
  emit(a.out, format_jsonl(ds.samples));
  std::cerr << "wrote " << ds.samples.size() << " sample(s) from " << bundles.size() << " object(s), " << ds.skipped.size()
            << " skipped\n";
  return kExitOk;
}

int run_reconstruct(PipelineConfig config, const std::string& gt, const Common& c) {
  if (!gt.empty()) config.gt_dir = gt;
  config.seed = c.seed;
  config.predictor_options.max_in_flight = c.jobs;
  const ReconstructResult r = reconstruct(config);
  for (const auto& w : r.warnings) warn(w);
  std::cerr << "reconstructed " << r.object.parts.size() << " part(s), " << r.object.joints.size() << " joint(s) into "
            << config.out_dir.string() << "\n";
  return kExitOk;
}

struct EvaluateArgs {
  std::string pred_dir;
  std::string gt_dir;
  std::string out_dir;
  EvalOptions options;
};

int run_evaluate(EvaluateArgs a, const Common& c) {
  a.options.seed = c.seed;
  const auto reports = evaluate_dirs(a.pred_dir, a.gt_dir, a.options, c.jobs);
  const ReportTables t = report_tables(reports, a.options);
  write_text_file(fs::path(a.out_dir) / "report.csv", t.csv);
  write_text_file(fs::path(a.out_dir) / "report.json", t.json);
  std::cout << t.csv;
  return kExitOk;
}

struct ExportArgs {
  std::string artcode;
  std::string format = "mjcf";
  std::vector<double> states;
  std::string dialect = "edge-axis";
  std::string meshes;
  std::string mesh_dir = "parts";
  std::string out = "-";
};

int run_export(const ExportArgs& a) {
  const ArtCodeDocument doc = parse_artcode(read_text_file(a.artcode), dialect_from_string(a.dialect));
  std::vector<std::optional<TriMesh>> meshes(doc.boxes.size());
  if (!a.meshes.empty()) {
    for (std::size_t i = 0; i < meshes.size(); ++i) {
      const fs::path p = fs::path(a.meshes) / ("part_" + std::to_string(i) + ".obj");
      if (fs::exists(p)) meshes[i] = read_obj(p);
    }
  }
  const ExportFormat format = export_format_from_string(a.format);
  emit(a.out, export_document(doc, a.states, format, meshes, a.meshes.empty() ? std::string() : a.mesh_dir));
  return kExitOk;
}

int run_fit_obb(const std::string& input, const std::string& out) {
  const Obb box = fit_obb(read_cloud(input));
  nlohmann::json j;
  j["center"] = {box.center().x(), box.center().y(), box.center().z()};
  j["rotation"] = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) j["rotation"].push_back({box.rotation()(r, 0), box.rotation()(r, 1), box.rotation()(r, 2)});
  j["half_lengths"] = {box.half_lengths().x(), box.half_lengths().y(), box.half_lengths().z()};
  j["degenerate"] = box.degenerate();
  const Obb boxes[] = {box};
  const std::string prompt = emit_prompt(boxes);
  j["artcode"] = prompt.substr(0, prompt.find('\n'));
  emit(out, j.dump(2) + "\n");
  return kExitOk;
}

int run_quantize(const std::string& bundle_dir, bool rest, const std::string& out) {
  const ObjectBundle b = read_bundle(bundle_dir);
  const ArticulatedObject obj = rest ? b.rest : b.posed();
  std::vector<Obb> boxes;
  for (const Part& p : obj.parts) boxes.push_back(p.obb);
  std::vector<RelativeJoint> joints;
  for (const Joint& j : obj.joints) joints.push_back(quantize_joint(j, boxes.at(j.child)));
  emit(out, emit_prompt(boxes) + emit_completion(joints));
  return kExitOk;
}

struct CompleteArgs {
  std::string input;
  std::string out = "-";
  std::string grid_out;
  std::string completer = "identity";
  int resolution = kDefaultGridResolution;
  double padding = kDefaultPadding;
  double dilation = 2.0;
};

int run_complete(const CompleteArgs& a, const Common& c) {
  const CompletionRequest request = make_completion_request(read_cloud(a.input), derive_seed(c.seed, "complete"), a.resolution, a.padding);
  OccupancyGrid grid;
  if (a.completer == "identity") {
    grid = complete(request, IdentityCompleter(a.dilation));
  } else if (a.completer.starts_with("external:")) {
    grid = complete(request, ExternalCompleter(a.completer.substr(9)));
  } else {
    throw Error(ErrorCode::InvalidArgument, "completer must be 'identity' or 'external:FILE'");
  }
  if (!a.grid_out.empty()) write_grid(a.grid_out, grid);
  emit(a.out, format_obj(marching_cubes(grid)));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Articulated object reconstruction toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option defaults; command-line flags take precedence");
  Common common;
  app.add_option("--seed", common.seed, "Seed for every random stage")->capture_default_str();
  app.add_option("--jobs", common.jobs, "Objects processed concurrently / HTTP requests in flight")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  std::function<int()> action;

  auto add_sampler = [](CLI::App* cmd, PoseSampler& s) {
    cmd->add_option("--open-lo", s.lo_fraction, "Lower fraction of the joint range for sampled states")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    cmd->add_option("--open-hi", s.hi_fraction, "Upper fraction of the joint range for sampled states")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
  };

  IngestArgs ingest;
  auto* cmd_ingest = app.add_subcommand("ingest", "Parse URDF objects and write object bundles");
  cmd_ingest->add_option("urdf_dir", ingest.urdf_dir, "Directory with mobility.urdf, or one subdirectory per object")
      ->required()
      ->check(CLI::ExistingDirectory);
  cmd_ingest->add_option("out_dir", ingest.out_dir, "Bundle output directory")->required();
  add_sampler(cmd_ingest, ingest.sampler);
  cmd_ingest->callback([&] { action = [&] { return run_ingest(ingest, common); }; });

  DatasetArgs dataset;
  auto* cmd_dataset = app.add_subcommand("gen-dataset", "Generate prompt/completion pairs from bundles");
  cmd_dataset->add_option("bundles", dataset.bundles, "Directory of object bundles")->required()->check(CLI::ExistingDirectory);
  cmd_dataset->add_option("out", dataset.out, "JSON-lines output ('-' for stdout)")->capture_default_str();
  cmd_dataset->add_option("--rotations", dataset.rotations, "Random z rotations per pose")->check(CLI::PositiveNumber)->capture_default_str();
  cmd_dataset->add_option("--poses", dataset.poses, "Sampled poses per object")->check(CLI::PositiveNumber)->capture_default_str();
  add_sampler(cmd_dataset, dataset.sampler);
  cmd_dataset->callback([&] { action = [&] { return run_gen_dataset(dataset, common); }; });

  PipelineConfig recon;
  std::string views_dir, out_dir, gt_dir;
  auto* cmd_recon = app.add_subcommand("reconstruct", "Views to an executable articulated object");
  cmd_recon->add_option("views_dir", views_dir, "One subdirectory per view")->required();
  cmd_recon->add_option("out_dir", out_dir, "Output directory")->required();
  cmd_recon->add_option("--gt", gt_dir, "Ground-truth bundle (oracle predictor, --gt-obbs)");
  cmd_recon->add_option("--predictor", recon.predictor, "oracle | file:PATH | http:URL")->capture_default_str();
  cmd_recon->add_flag("--gt-obbs", recon.gt_obbs, "Prompt with the matched ground-truth boxes");
  cmd_recon->add_option("--iou-threshold", recon.fusion.iou_threshold, "Mask NMS threshold")->capture_default_str();
  cmd_recon->add_option("--group-overlap", recon.fusion.group_overlap, "Cross-view mask grouping IoU")->capture_default_str();
  cmd_recon->add_option("--depth-tolerance", recon.fusion.depth_tolerance, "Visibility test tolerance")->capture_default_str();
  cmd_recon->add_option("--dist-threshold", recon.fusion.dist_threshold, "Point-map correspondence distance")->capture_default_str();
  cmd_recon->add_option("--fusion-points", recon.fusion_points, "Fused points kept (0 = all)")->capture_default_str();
  cmd_recon->add_option("--min-part-points", recon.min_part_points, "Smaller labels are dropped")->capture_default_str();
  cmd_recon->add_option("--resolution", recon.resolution, "Occupancy grid nodes per axis")->capture_default_str();
  cmd_recon->add_option("--padding", recon.padding, "Completion frame inflation")->capture_default_str();
  cmd_recon->add_option("--completer", recon.completer, "identity | external:DIR")->capture_default_str();
  cmd_recon->add_option("--dilation", recon.dilation_cells, "Identity completer dilation in cells")->capture_default_str();
  cmd_recon->add_option("--match-samples", recon.match_samples, "Samples per part for ground-truth matching")->capture_default_str();
  cmd_recon->add_option("--timeout", recon.predictor_options.timeout_seconds, "HTTP predictor timeout (s)")->capture_default_str();
  cmd_recon->add_option("--retries", recon.predictor_options.retries, "HTTP predictor retries")->capture_default_str();
  cmd_recon->callback([&] {
    recon.views_dir = views_dir;
    recon.out_dir = out_dir;
    action = [&] { return run_reconstruct(recon, gt_dir, common); };
  });

  EvaluateArgs eval;
  auto* cmd_eval = app.add_subcommand("evaluate", "Score predicted bundles against ground truth");
  cmd_eval->add_option("pred_dir", eval.pred_dir, "Predicted bundles, one subdirectory per object")->required();
  cmd_eval->add_option("gt_dir", eval.gt_dir, "Ground-truth bundles")->required()->check(CLI::ExistingDirectory);
  cmd_eval->add_option("out_dir", eval.out_dir, "Where report.csv and report.json go")->required();
  cmd_eval->add_option("--samples", eval.options.samples, "Chamfer samples")->capture_default_str();
  cmd_eval->add_option("--match-samples", eval.options.match_samples, "Samples per part for matching")->capture_default_str();
  cmd_eval->callback([&] { action = [&] { return run_evaluate(eval, common); }; });

  ExportArgs exp;
  auto* cmd_export = app.add_subcommand("export", "Execute an artcode document and export it");
  cmd_export->add_option("artcode", exp.artcode, "Document with boxes and joints")->required()->check(CLI::ExistingFile);
  cmd_export->add_option("--format", exp.format, "mjcf | obj | gltf")->capture_default_str();
  cmd_export->add_option("--states", exp.states, "Joint states, comma separated")->delimiter(',');
  cmd_export->add_option("--dialect", exp.dialect, "edge-axis | absolute | center-offset")->capture_default_str();
  cmd_export->add_option("--meshes", exp.meshes, "Directory with part_<i>.obj in rest-pose world coordinates");
  cmd_export->add_option("--mesh-dir", exp.mesh_dir, "Mesh directory written into MJCF")->capture_default_str();
  cmd_export->add_option("-o,--out", exp.out, "Output file ('-' for stdout)")->capture_default_str();
  cmd_export->callback([&] { action = [&] { return run_export(exp); }; });

  std::string fit_in, fit_out = "-";
  auto* cmd_fit = app.add_subcommand("fit-obb", "Fit an oriented box to a point cloud or mesh");
  cmd_fit->add_option("input", fit_in, ".ply or .obj")->required()->check(CLI::ExistingFile);
  cmd_fit->add_option("-o,--out", fit_out, "Output JSON")->capture_default_str();
  cmd_fit->callback([&] { action = [&] { return run_fit_obb(fit_in, fit_out); }; });

  std::string quant_in, quant_out = "-";
  bool quant_rest = false;
  auto* cmd_quant = app.add_subcommand("quantize", "Ground-truth artcode for a bundle");
  cmd_quant->add_option("bundle", quant_in, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  cmd_quant->add_flag("--rest", quant_rest, "Use the rest pose instead of the observed one");
  cmd_quant->add_option("-o,--out", quant_out, "Output file")->capture_default_str();
  cmd_quant->callback([&] { action = [&] { return run_quantize(quant_in, quant_rest, quant_out); }; });

  CompleteArgs comp;
  auto* cmd_comp = app.add_subcommand("complete", "Complete one part cloud and extract its surface");
  cmd_comp->add_option("input", comp.input, ".ply or .obj part cloud")->required()->check(CLI::ExistingFile);
  cmd_comp->add_option("-o,--out", comp.out, "Output OBJ")->capture_default_str();
  cmd_comp->add_option("--grid-out", comp.grid_out, "Also write the occupancy grid (AOG1)");
  cmd_comp->add_option("--completer", comp.completer, "identity | external:FILE")->capture_default_str();
  cmd_comp->add_option("--resolution", comp.resolution, "Grid nodes per axis")->check(CLI::Range(8, 512))->capture_default_str();
  cmd_comp->add_option("--padding", comp.padding, "Frame inflation")->check(CLI::Range(1.0, 4.0))->capture_default_str();
  cmd_comp->add_option("--dilation", comp.dilation, "Identity completer dilation in cells")->capture_default_str();
  cmd_comp->callback([&] { action = [&] { return run_complete(comp, common); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int status = app.exit(e);
    return status == 0 ? kExitOk : kExitInputError;
  }

  try {
    return action();
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStageError;
  }
}
