// Acceptance run: one PASS/FAIL line per criterion, thresholds pinned below.
// Exit status is 0 only when every criterion passes.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <numbers>
#include <set>
#include <sstream>

#include "artrecon/artcode.hpp"
#include "artrecon/error.hpp"
#include "artrecon/evalharness.hpp"
#include "artrecon/fusion.hpp"
#include "artrecon/mesh_io.hpp"
#include "artrecon/pipeline.hpp"
#include "artrecon/rng.hpp"
#include "artrecon/shape.hpp"
#include "fixtures.hpp"
#include "generators.hpp"

namespace fs = std::filesystem;
using namespace artrecon;

namespace {

constexpr double kPi = std::numbers::pi;

// Criterion 1
constexpr int kOracleObjects = 10;
constexpr double kOracleRotTolDeg = 1e-6;
constexpr double kOraclePivotTol = 1e-6;
constexpr double kOracleSeconds = 10.0;
// Criterion 2
constexpr int kStubBundles = 468;
constexpr std::size_t kExpectedSamples = 11700;
constexpr double kDatasetSeconds = 60.0;
// Criterion 3
constexpr int kRoundTripDocs = 1000;
constexpr int kWrappedDocs = 50;
constexpr double kDslSeconds = 5.0;
// Criterion 4
constexpr int kChamferPairs = 100;
constexpr std::size_t kChamferMaxPoints = 1000;
constexpr double kChamferSeconds = 30.0;
// Criterion 5
constexpr int kMatchingMatrices = 200;
constexpr double kMatchingSeconds = 10.0;
// Criterion 6
constexpr int kSphereResolution = 96;
constexpr double kSphereRadius = 0.4;
constexpr std::size_t kSphereSamples = 10000;
constexpr double kSphereChamferMax = 0.05;
constexpr double kSphereSeconds = 30.0;
// Criterion 7
constexpr int kCubeResolution = 96;
constexpr double kCubeAgreement = 0.999;
constexpr double kCubeSeconds = 60.0;
// Criterion 8
constexpr double kFkTol = 1e-9;
constexpr int kFkChains = 100;
// Criterion 9
constexpr int kQuantTrials = 10000;
constexpr double kQuantSlack = 1e-9;
// Criterion 10
constexpr double kFusionAgreement = 0.99;
constexpr double kRoundTripPx = 1e-6;
constexpr double kFusionSeconds = 10.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("artrecon_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Outcome oracle_reproduction() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = scratch("oracle");

  std::vector<fixtures::CuboidObject> objects{fixtures::two_part_cabinet()};
  for (int n = 2; static_cast<int>(objects.size()) < kOracleObjects; ++n)
    objects.push_back(fixtures::random_cuboid_object(100 + n, std::min(n, 10), "object_" + std::to_string(n)));
  for (std::size_t i = 0; i < objects.size(); ++i)
    fixtures::write_urdf_fixture(dir / "urdf" / objects[i].id, objects[i], i + 1);

  const IngestSummary ingested = ingest_dir(dir / "urdf", dir / "gt", 1);
  if (!ingested.failed.empty()) return {false, "ingest failed for " + ingested.failed[0].first + ": " + ingested.failed[0].second};

  std::size_t joints = 0;
  std::size_t revolute = 0;
  std::size_t prismatic = 0;
  for (const std::string& id : ingested.written) {
    const ObjectBundle gt = read_bundle(dir / "gt" / id);
    fixtures::write_views(dir / "views" / id, fixtures::render_views(gt.posed()));
    PipelineConfig config;
    config.views_dir = dir / "views" / id;
    config.out_dir = dir / "pred" / id;
    config.gt_dir = dir / "gt" / id;
    config.gt_obbs = true;
    config.predictor = "oracle";
    config.resolution = 48;
    config.match_samples = 500;
    reconstruct(config);
    for (const Joint& j : gt.rest.joints) ++(j.type == JointType::Revolute ? revolute : prismatic);
    joints += gt.rest.joints.size();
  }

  EvalOptions options;
  options.samples = 4000;
  options.match_samples = 500;
  const auto reports = evaluate_dirs(dir / "pred", dir / "gt", options);
  const ReportTables tables = report_tables(reports, options);
  write_text_file(dir / "report.csv", tables.csv);

  double worst_rot = 0.0;
  double worst_pivot = 0.0;
  double worst_type = 1.0;
  std::size_t unmatched = 0;
  for (const EvalReport& r : reports) {
    for (const JointReport& j : r.joints) {
      worst_rot = std::max(worst_rot, j.metrics.rot_err_deg);
      if (j.metrics.pos_err) worst_pivot = std::max(worst_pivot, *j.metrics.pos_err);
    }
    worst_type = std::min(worst_type, r.type_accuracy.value_or(0.0));
    unmatched += r.unmatched_parts + r.unmatched_joints;
  }
  const double secs = seconds_since(t0);
  const bool pass = reports.size() >= static_cast<std::size_t>(kOracleObjects) && worst_rot <= kOracleRotTolDeg &&
                    worst_pivot < kOraclePivotTol && worst_type == 1.0 && unmatched == 0 && secs < kOracleSeconds;
  fs::remove_all(dir);
  return {pass, fmt("%zu objects, %zu joints (%zu revolute, %zu prismatic): max rot err %.3g deg (<= %g), max pivot dist %.3g (< %g), "
                    "min type acc %.3f, unmatched %zu, %.2f s (< %g s)",
                    reports.size(), joints, revolute, prismatic, worst_rot, kOracleRotTolDeg, worst_pivot, kOraclePivotTol,
                    worst_type, unmatched, secs, kOracleSeconds)};
}

// ---------------------------------------------------------------------------

int run_cli(const std::string& args, const fs::path& out, const fs::path& err) {
  const std::string cmd = std::string("'") + ARTRECON_CLI + "' " + args + " > '" + out.string() + "' 2> '" + err.string() + "'";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

Outcome dataset_count() {
  const fs::path dir = scratch("dataset");
  for (int i = 0; i < kStubBundles; ++i) {
    const std::string id = fmt("stub_%03d", i);
    write_bundle(dir / "bundles" / id, fixtures::to_bundle(fixtures::random_cuboid_object(i, 2 + i % 5, id)));
  }

  const auto t0 = std::chrono::steady_clock::now();
  const int status = run_cli("gen-dataset " + q(dir / "bundles") + " " + q(dir / "data.jsonl"), dir / "stdout.txt", dir / "stderr.txt");
  const double secs = seconds_since(t0);
  if (status != 0) return {false, "gen-dataset exited " + std::to_string(status) + ": " + slurp(dir / "stderr.txt")};

  std::ifstream in(dir / "data.jsonl");
  std::string line;
  std::size_t lines = 0;
  std::size_t broken = 0;
  std::string first_error;
  while (std::getline(in, line)) {
    ++lines;
    try {
      const auto j = nlohmann::json::parse(line);
      const ArtCodeDocument doc = parse_artcode(j.at("prompt").get<std::string>() + j.at("completion").get<std::string>());
      const std::vector<double> states(doc.joints.size(), 0.3);
      execute(doc, states);
    } catch (const std::exception& e) {
      if (broken++ == 0) first_error = e.what();
    }
  }
  fs::remove_all(dir);
  const bool pass = lines == kExpectedSamples && broken == 0 && secs < kDatasetSeconds;
  return {pass, fmt("%d bundles -> %zu samples (expected %zu), %zu failed to re-parse/execute%s%s, gen-dataset %.2f s (< %g s)",
                    kStubBundles, lines, kExpectedSamples, broken, broken ? ": " : "", first_error.c_str(), secs,
                    kDatasetSeconds)};
}

// ---------------------------------------------------------------------------

Outcome dsl_round_trip() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  const Dialect dialects[] = {Dialect::EdgeAxis, Dialect::AbsoluteNumeric, Dialect::RelativeToCenter};
  int exact = 0;
  for (int i = 0; i < kRoundTripDocs; ++i) {
    const Dialect d = dialects[i % 3];
    const ArtCodeDocument doc = fixtures::random_document(rng, d);
    try {
      exact += parse_artcode(emit_document(doc), d) == doc;
    } catch (const Error&) {
    }
  }
  int wrapped = 0;
  for (int v = 0; v < kWrappedDocs; ++v) {
    const std::string clean = emit_document(fixtures::random_document(rng, Dialect::EdgeAxis));
    try {
      wrapped += parse_artcode(fixtures::llm_wrap(clean, v, rng)) == parse_artcode(clean);
    } catch (const Error&) {
    }
  }
  const double secs = seconds_since(t0);
  return {exact == kRoundTripDocs && wrapped == kWrappedDocs && secs < kDslSeconds,
          fmt("%d/%d documents field-exact across 3 dialects, %d/%d wrapped completions identical, %.2f s (< %g s)", exact,
              kRoundTripDocs, wrapped, kWrappedDocs, secs, kDslSeconds)};
}

// ---------------------------------------------------------------------------

Outcome chamfer_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(4242);
  auto cloud = [&](std::size_t n) {
    std::vector<Vec3> pts;
    const double scale = rng.uniform(0.1, 10.0);
    for (std::size_t i = 0; i < n; ++i) pts.emplace_back(scale * rng.normal(), scale * rng.normal(), scale * rng.normal());
    return pts;
  };
  int equal = 0;
  int self_zero = 0;
  int symmetric = 0;
  for (int t = 0; t < kChamferPairs; ++t) {
    const auto a = cloud(1 + rng.index(kChamferMaxPoints));
    const auto b = cloud(1 + rng.index(kChamferMaxPoints));
    const double cd = chamfer(a, b);
    equal += cd == fixtures::brute_chamfer(a, b);
    symmetric += cd == chamfer(b, a);
    self_zero += chamfer(a, a) == 0.0;
  }
  const double secs = seconds_since(t0);
  return {equal == kChamferPairs && symmetric == kChamferPairs && self_zero == kChamferPairs && secs < kChamferSeconds,
          fmt("%d/%d pairs bit-identical to brute force, %d symmetric, %d with chamfer(a,a)=0, %.2f s (< %g s)", equal,
              kChamferPairs, symmetric, self_zero, secs, kChamferSeconds)};
}

// ---------------------------------------------------------------------------

// Total of the matched entries, summed in row order.
double matched_cost(const Eigen::MatrixXd& cost, const Assignment& a) {
  double total = 0.0;
  for (std::size_t r = 0; r < a.row_to_col.size(); ++r)
    if (a.row_to_col[r] >= 0) total += cost(static_cast<Eigen::Index>(r), a.row_to_col[r]);
  return total;
}

Outcome matching_optimality() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(777);
  int optimal = 0;
  double worst_gap = 0.0;
  for (int t = 0; t < kMatchingMatrices; ++t) {
    const int n = 2 + static_cast<int>(rng.index(7));
    Eigen::MatrixXd cost(n, n);
    // Every fourth matrix has small integer costs so ties are common.
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) cost(r, c) = t % 4 == 0 ? static_cast<double>(rng.index(4)) : rng.uniform(0.0, 100.0);
    const double h = matched_cost(cost, assign_hungarian(cost));
    const double b = matched_cost(cost, assign_brute_force(cost));
    worst_gap = std::max(worst_gap, std::abs(h - b));
    optimal += std::abs(h - b) <= 1e-9 * std::max(1.0, std::abs(b));
  }
  const double secs = seconds_since(t0);
  return {optimal == kMatchingMatrices && secs < kMatchingSeconds,
          fmt("%d/%d matrices (n in [2,8]) with Hungarian cost equal to brute force, max gap %.3g, %.2f s (< %g s)", optimal,
              kMatchingMatrices, worst_gap, secs, kMatchingSeconds)};
}

// ---------------------------------------------------------------------------

std::vector<Vec3> sphere_samples(const Vec3& c, double r, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec3> out;
  while (out.size() < n) out.push_back(c + r * fixtures::random_unit(rng));
  return out;
}

Outcome marching_cubes_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = kSphereResolution;
  GridSpec spec;
  spec.resolution = {n, n, n};
  spec.frame = GridFrame::axis_aligned(Vec3::Zero(), Vec3::Ones());
  OccupancyGrid grid = OccupancyGrid::zeros(spec);
  const Vec3 c = Vec3::Constant(0.5);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        if ((grid.node_world(i, j, k) - c).norm() < kSphereRadius) grid.set(i, j, k, 1.0f);
  const TriMesh mesh = marching_cubes(grid);
  const auto analytic = sphere_samples(c, kSphereRadius, kSphereSamples, 31);
  const double cd = chamfer(sample_surface(mesh, kSphereSamples, 32).points, analytic);
  // Two independent exact samplings of the same sphere: the distance that
  // remains with a perfect surface.
  const double floor = chamfer(sphere_samples(c, kSphereRadius, kSphereSamples, 33), analytic);

  bool no_surface = false;
  try {
    marching_cubes(OccupancyGrid::zeros(spec));
  } catch (const Error& e) {
    no_surface = e.code() == ErrorCode::NoSurface;
  }
  const double secs = seconds_since(t0);
  const bool pass = cd < kSphereChamferMax && no_surface && secs < kSphereSeconds;
  std::string detail = fmt("CD %.4f (< %g) at %d^3, empty grid -> NoSurface: %s, %.2f s (< %g s)", cd, kSphereChamferMax, n,
                           no_surface ? "yes" : "no", secs, kSphereSeconds);
  if (cd >= kSphereChamferMax)
    detail += fmt("; two exact %zu-point samplings of the same sphere already score %.4f, so the threshold is below the "
                  "sampling floor (extraction adds %.4f)",
                  kSphereSamples, floor, cd - floor);
  return {pass, detail};
}

// ---------------------------------------------------------------------------

Outcome occupancy_agreement() {
  const auto t0 = std::chrono::steady_clock::now();
  const int n = kCubeResolution;
  GridSpec spec;
  spec.resolution = {n, n, n};
  spec.frame = GridFrame::axis_aligned(Vec3::Constant(-1.0), Vec3::Constant(1.0));
  const OccupancyGrid grid = occupancy_from_mesh(box_mesh(Obb(Vec3::Zero(), Mat3::Identity(), Vec3::Constant(0.5))), spec);
  std::size_t agree = 0;
  std::size_t total = 0;
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const bool inside = (grid.node_world(i, j, k).cwiseAbs().array() < 0.5).all();
        agree += (grid.at(i, j, k) == 1.0f) == inside;
        ++total;
      }
  const double fraction = static_cast<double>(agree) / static_cast<double>(total);
  const double secs = seconds_since(t0);
  return {fraction >= kCubeAgreement && secs < kCubeSeconds,
          fmt("%.5f of %zu cells agree (>= %g), %.2f s (< %g s)", fraction, total, kCubeAgreement, secs, kCubeSeconds)};
}

// ---------------------------------------------------------------------------

Outcome fk_correctness() {
  ArticulatedObject hinge;
  hinge.parts.resize(2);
  Joint j;
  j.type = JointType::Revolute;
  j.axis = Vec3::UnitZ();
  j.pivot = Vec3(1, 0, 0);
  hinge.joints = {j};
  const double half_turn_err =
      (forward_kinematics(hinge, std::vector<double>{kPi})[1].apply(Vec3::Zero()) - Vec3(2, 0, 0)).norm();

  Rng rng(808);
  double worst = 0.0;
  bool identity = true;
  for (int t = 0; t < kFkChains; ++t) {
    const ArticulatedObject obj = fixtures::random_chain(rng, 2 + static_cast<int>(rng.index(6)));
    std::vector<double> states;
    for (std::size_t k = 0; k < obj.joints.size(); ++k) states.push_back(rng.uniform(-3, 3));
    const auto transforms = forward_kinematics(obj, states);
    for (std::size_t p = 0; p < obj.parts.size(); ++p) {
      const auto& v = obj.parts[p].mesh->vertices;
      for (std::size_t a = 0; a < v.size(); ++a)
        for (std::size_t b = a + 1; b < v.size(); ++b)
          worst = std::max(worst, std::abs((v[a] - v[b]).norm() -
                                           (transforms[p].apply(v[a]) - transforms[p].apply(v[b])).norm()));
    }
    for (const RigidTransform& tr : forward_kinematics(obj, std::vector<double>(obj.joints.size(), 0.0)))
      identity = identity && tr.rotation == Mat3::Identity() && tr.translation == Vec3::Zero();
  }
  return {half_turn_err < kFkTol && worst < kFkTol && identity,
          fmt("half-turn maps origin to (2,0,0) within %.3g (< %g), max distance change %.3g over %d chains (< %g), "
              "zero state exact identity: %s",
              half_turn_err, kFkTol, worst, kFkChains, kFkTol, identity ? "yes" : "no")};
}

// ---------------------------------------------------------------------------

Outcome quantization_bound() {
  Rng rng(909);
  const double bound = std::acos(1.0 / std::sqrt(3.0)) + kQuantSlack;
  double worst = 0.0;
  int exact = 0;
  for (int t = 0; t < kQuantTrials; ++t) {
    const Obb box(Vec3(rng.normal(), rng.normal(), rng.normal()), fixtures::random_rotation(rng),
                  Vec3(rng.uniform(0.05, 2), rng.uniform(0.05, 2), rng.uniform(0.05, 2)));
    Joint j;
    j.type = JointType::Prismatic;
    j.axis = fixtures::random_unit(rng);
    const Vec3 back = dequantize_joint(quantize_joint(j, box), box).axis;
    worst = std::max(worst, std::atan2(j.axis.cross(back).norm(), j.axis.dot(back)));

    j.axis = (rng.uniform() < 0.5 ? 1.0 : -1.0) * box.rotation().col(static_cast<Eigen::Index>(rng.index(3)));
    exact += dequantize_joint(quantize_joint(j, box), box).axis == j.axis;
  }
  return {worst <= bound && exact == kQuantTrials,
          fmt("max angle %.9f rad over %d axes (<= arccos(1/sqrt 3) + %g = %.9f), %d/%d box-parallel axes recovered exactly",
              worst, kQuantTrials, kQuantSlack, bound, exact, kQuantTrials)};
}

// ---------------------------------------------------------------------------

// Fraction of points whose label agrees with the truth under the best
// relabelling (brute force over permutations of the truth ids).
double best_agreement(const std::vector<int>& labels, const std::vector<int>& truth) {
  const std::set<int> ids(truth.begin(), truth.end());
  std::vector<int> order(ids.begin(), ids.end());
  std::map<std::pair<int, int>, std::size_t> table;
  for (std::size_t i = 0; i < labels.size(); ++i) ++table[{labels[i], truth[i]}];
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t k = 0; k < order.size(); ++k) hits += table[{static_cast<int>(k), order[k]}];
    best = std::max(best, hits);
  } while (std::next_permutation(order.begin(), order.end()));
  return static_cast<double>(best) / static_cast<double>(labels.size());
}

Outcome fusion_fixture() {
  const auto t0 = std::chrono::steady_clock::now();
  // A unit cube split into a base and a lid hinged on the back top edge.
  fixtures::CuboidObject cube;
  cube.id = "split_cube";
  cube.parts = {{"base", Vec3(0, 0, -0.25), Vec3(0.5, 0.5, 0.25)}, {"lid", Vec3(0, 0, 0.25), Vec3(0.5, 0.5, 0.25)}};
  cube.extras.resize(2);
  cube.joints = {{JointType::Revolute, 0, 1, Vec3::UnitX(), Vec3(0, 0.5, 0), 0.0, kPi / 2}};
  const auto rendered = fixtures::render_views(fixtures::to_articulated(cube), {.views = 2, .elevation_deg = 35.0});

  std::vector<CameraView> views;
  std::vector<int> truth;
  double worst_px = 0.0;
  std::size_t pixels = 0;
  for (const auto& r : rendered) {
    views.push_back(r.view);
    const CameraView& v = r.view;
    for (int y = 0; y < v.intrinsics.height; ++y)
      for (int x = 0; x < v.intrinsics.width; ++x) {
        const float d = v.depth_at(x, y);
        if (d <= 0.0f) continue;
        truth.push_back(r.part_ids[static_cast<std::size_t>(y) * v.intrinsics.width + x]);
        const Projection p = project(unproject(v, x, y, d), v);
        worst_px = std::max({worst_px, std::abs(p.u - x), std::abs(p.v - y)});
        ++pixels;
      }
  }
  const PointCloud fused = fuse_labels(views, 0, 1);
  const std::set<int> seen(truth.begin(), truth.end());
  const double agreement = fused.size() == truth.size() ? best_agreement(fused.labels, truth) : 0.0;
  const double secs = seconds_since(t0);
  return {agreement >= kFusionAgreement && worst_px < kRoundTripPx && seen.size() == 2 && secs < kFusionSeconds,
          fmt("%zu fused points from 2 views, %.4f labelled consistently with the renderer (>= %g), round trip max %.3g px "
              "over %zu pixels (< %g), %.2f s (< %g s)",
              fused.size(), agreement, kFusionAgreement, worst_px, pixels, kRoundTripPx, secs, kFusionSeconds)};
}

// ---------------------------------------------------------------------------

// Every file under `dir` by relative path; report.json loses its timings.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  if (!fs::exists(dir)) return files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string text = slurp(e.path());
    if (e.path().filename() == "report.json") {
      auto j = nlohmann::json::parse(text);
      j.erase("timings");
      text = j.dump();
    }
    files[fs::relative(e.path(), dir).string()] = text;
  }
  return files;
}

Outcome determinism() {
  const fs::path dir = scratch("determinism");
  const fixtures::CuboidObject object = fixtures::random_cuboid_object(55, 4, "det");
  fixtures::write_urdf_fixture(dir / "urdf" / "det", object, 9);
  fixtures::write_urdf_fixture(dir / "urdf" / "cabinet", fixtures::two_part_cabinet(), 0);
  {
    ObjectBundle gt = fixtures::to_bundle(object);
    gt.pose_states = sample_joint_states(gt, {}, 4);
    write_bundle(dir / "gt" / "det", gt);
    fixtures::write_views(dir / "views", fixtures::render_views(gt.posed()));
    write_obj(dir / "part.obj", *gt.rest.parts[1].mesh);
  }

  // Each command writes into run_<k>/; the same command runs twice.
  const std::vector<std::pair<std::string, std::string>> commands{
      {"ingest", "--seed 5 --jobs 2 ingest " + q(dir / "urdf") + " OUT/bundles"},
      {"gen-dataset", "--seed 5 gen-dataset " + q(dir / "gt") + " OUT/data.jsonl --rotations 3 --poses 2"},
      {"reconstruct", "--seed 5 reconstruct " + q(dir / "views") + " OUT/pred/det --gt " + q(dir / "gt" / "det") +
                          " --resolution 40 --match-samples 500 --fusion-points 6000"},
      {"evaluate", "--seed 5 evaluate " + q(dir / "gt") + " " + q(dir / "gt") + " OUT/report --samples 3000"},
      {"export", "export " + q(dir / "gt" / "det" / "object.artcode") + " --format gltf --states 0.2,0.1,0.3 -o OUT/x.gltf"},
      {"fit-obb", "fit-obb " + q(dir / "part.obj") + " -o OUT/obb.json"},
      {"quantize", "quantize " + q(dir / "gt" / "det") + " -o OUT/q.txt"},
      {"complete", "--seed 5 complete " + q(dir / "part.obj") + " --resolution 32 -o OUT/c.obj --grid-out OUT/c.aog"},
  };
  // The export input comes from quantizing the bundle.
  write_text_file(dir / "gt" / "det" / "object.artcode", "");
  if (run_cli("quantize " + q(dir / "gt" / "det") + " -o " + q(dir / "gt" / "det" / "object.artcode"), dir / "o.txt",
              dir / "e.txt") != 0)
    return {false, "quantize failed: " + slurp(dir / "e.txt")};

  std::vector<std::string> same;
  std::vector<std::string> differ;
  for (const auto& [name, args] : commands) {
    std::map<std::string, std::string> runs[2];
    for (int k = 0; k < 2; ++k) {
      const fs::path out = dir / ("run_" + std::to_string(k)) / name;
      fs::create_directories(out);
      std::string a = args;
      for (auto pos = a.find("OUT/"); pos != std::string::npos; pos = a.find("OUT/")) a.replace(pos, 4, out.string() + "/");
      const int status = run_cli(a, out / "stdout.txt", dir / "stderr.txt");
      if (status != 0) return {false, name + " exited " + std::to_string(status) + ": " + slurp(dir / "stderr.txt")};
      runs[k] = snapshot(out);
    }
    (runs[0] == runs[1] && runs[0].size() > 1 ? same : differ).push_back(name);
  }
  fs::remove_all(dir);
  std::string list;
  for (const auto& s : differ) list += (list.empty() ? "" : ", ") + s;
  return {differ.empty(), fmt("%zu/%zu commands byte-identical on rerun (report.json timings excluded)%s%s", same.size(),
                              commands.size(), differ.empty() ? "" : "; differing: ", list.c_str())};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"oracle reproduction with ground-truth boxes", oracle_reproduction},
      {"dataset count", dataset_count},
      {"DSL round trip", dsl_round_trip},
      {"Chamfer oracle equivalence", chamfer_equivalence},
      {"permutation matching optimality", matching_optimality},
      {"marching-cubes fidelity", marching_cubes_fidelity},
      {"occupancy oracle agreement", occupancy_agreement},
      {"FK correctness", fk_correctness},
      {"quantization bound", quantization_bound},
      {"fusion fixture", fusion_fixture},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
