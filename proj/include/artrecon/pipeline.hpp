#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "artrecon/artcode.hpp"
#include "artrecon/error.hpp"
#include "artrecon/evalharness.hpp"
#include "artrecon/fusion.hpp"
#include "artrecon/ingest.hpp"
#include "artrecon/predictor.hpp"
#include "artrecon/shape.hpp"

namespace artrecon {

// Exit statuses of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitStageError = 2;
inline constexpr int kExitPredictorError = 3;

/// An error raised inside a named pipeline stage. Keeps the original code.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.code(), "stage '" + stage + "': " + cause.what()), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Predictor failures (including unparseable completions) -> 3, bad or
/// missing input -> 1, anything else -> 2.
int exit_code_for(const Error& error);

/// Per-stage seeds are derive_seed(seed, <stage name>); per-part seeds add
/// the part index, e.g. "complete/part_3".
struct PipelineConfig {
  std::filesystem::path views_dir;
  std::filesystem::path out_dir;
  /// Ground-truth bundle directory; needed by the oracle predictor and --gt-obbs.
  std::optional<std::filesystem::path> gt_dir;

  FusionOptions fusion;
  /// Fused points kept (0 = all).
  std::size_t fusion_points = 0;
  /// Labels with fewer points are dropped before completion.
  std::size_t min_part_points = 16;

  int resolution = kDefaultGridResolution;
  double padding = kDefaultPadding;
  /// "identity" or "external:DIR" (DIR/part_<i>.aog per part).
  std::string completer = "identity";
  double dilation_cells = 2.0;

  std::string predictor = "oracle";
  PredictorOptions predictor_options;
  /// Replace the fitted part boxes by the matched ground-truth boxes.
  bool gt_obbs = false;

  std::uint64_t seed = 0;
  /// Surface samples per part when matching parts to ground truth.
  std::size_t match_samples = 2000;

  /// Throws InvalidArgument naming the first out-of-range field.
  void validate() const;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct ReconstructResult {
  std::string prompt;
  std::string completion;
  ArtCodeDocument document;
  /// Parts named part_<i> with their meshes, joints resolved against the
  /// full-precision boxes.
  ArticulatedObject object;
  std::vector<StageTiming> timings;
  std::vector<std::string> warnings;
};

struct LoadedViews {
  std::vector<CameraView> cameras;
  PointMapSet point_maps;
};

/// Every subdirectory of `dir` in name order holds either camera.json (plus
/// depth.pfm and masks/) or pointmap.apm. Throws IoError naming the missing
/// file, InvalidArgument when both kinds are mixed, EmptyInput for no views.
LoadedViews load_views(const std::filesystem::path& dir);

/// Completion the oracle gives for predicted parts: every ground-truth joint
/// whose parent and child were matched, quantized against the predicted
/// child box. `gt_to_pred` maps ground-truth parts to predicted ones (-1 = none).
std::string oracle_completion(const ArticulatedObject& gt, const std::vector<int>& gt_to_pred,
                              std::span<const Obb> pred_boxes);

/// Ground-truth part g -> predicted part by minimum total Chamfer.
std::vector<int> match_to_ground_truth(const std::vector<TriMesh>& pred_meshes, const ArticulatedObject& gt,
                                       std::size_t samples, std::uint64_t seed);

/// Fuse -> per-part clouds -> complete -> marching cubes -> boxes -> prompt
/// -> predict -> parse -> execute, then writes parts/part_<i>.obj,
/// object.json, object.artcode, object.mjcf.xml, prompt.txt, completion.txt
/// and report.json (the only file with timings). Failures are StageErrors.
ReconstructResult reconstruct(const PipelineConfig& config);

/// Pairs `gt_dir/<id>` with `pred_dir/<id>` (bundle directories). A missing
/// prediction becomes a full-error entry.
std::vector<EvalReport> evaluate_dirs(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                                      const EvalOptions& options, int jobs = 1);

enum class ExportFormat { Mjcf, Obj, Gltf };
ExportFormat export_format_from_string(std::string_view text);

/// Executes `doc` at `states` and renders it. Part i uses `meshes[i]` when
/// present (rest-pose world coordinates), otherwise its box.
std::string export_document(const ArtCodeDocument& doc, std::span<const double> states, ExportFormat format,
                            const std::vector<std::optional<TriMesh>>& meshes, const std::string& mesh_dir = {});

/// glTF 2.0 JSON with one node and mesh per part and the buffer embedded as
/// a base64 data URI. Meshes are already posed.
std::string export_gltf(const std::vector<TriMesh>& part_meshes);

/// `urdf_dir` holds `mobility.urdf` or one subdirectory per object that
/// does. Objects are written to `out_dir/<id>` with sampled pose states.
struct IngestSummary {
  std::vector<std::string> written;
  /// (object id, error message)
  std::vector<std::pair<std::string, std::string>> failed;
};
IngestSummary ingest_dir(const std::filesystem::path& urdf_dir, const std::filesystem::path& out_dir,
                         std::uint64_t seed, const PoseSampler& sampler = {}, int jobs = 1);

/// Reads every bundle directory under `dir` in name order.
std::vector<ObjectBundle> read_bundles(const std::filesystem::path& dir, int jobs = 1);

}  // namespace artrecon
