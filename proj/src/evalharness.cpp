#include "artrecon/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>
#include <numeric>
#include <sstream>

#include "artrecon/error.hpp"
#include "artrecon/numfmt.hpp"
#include "artrecon/rng.hpp"

namespace artrecon {

using nlohmann::json;

double line_distance(const Vec3& p1, const Vec3& d1, const Vec3& p2, const Vec3& d2) {
  const Vec3 n = d1.cross(d2);
  const double norm = n.norm();
  if (norm < 1e-12 * d1.norm() * d2.norm()) return point_line_distance(p2, p1, d1);
  return std::abs((p2 - p1).dot(n)) / norm;
}

JointMetrics joint_error(const Joint& pred, const Joint& gt) {
  for (const Joint* j : {&pred, &gt}) {
    if (j->type == JointType::Revolute && !j->pivot) throw Error(ErrorCode::MissingPivot, "revolute joint without pivot");
  }
  const Vec3 a = pred.axis.normalized();
  const Vec3 b = gt.axis.normalized();
  JointMetrics m;
  // Same angle as arccos(|a.b|), without its loss of precision near zero.
  m.rot_err_deg = std::atan2(a.cross(b).norm(), std::abs(a.dot(b))) * 180.0 / std::numbers::pi;
  if (pred.type == JointType::Revolute && gt.type == JointType::Revolute) {
    m.pos_err = line_distance(*pred.pivot, a, *gt.pivot, b);
  }
  m.type_correct = pred.type == gt.type;
  return m;
}

// ---------------------------------------------------------------------------
// Assignment

namespace {

Eigen::MatrixXd pad_square(const Eigen::MatrixXd& cost) {
  const Eigen::Index n = std::max(cost.rows(), cost.cols());
  Eigen::MatrixXd out = Eigen::MatrixXd::Constant(n, n, kUnmatchedPenalty);
  out.topLeftCorner(cost.rows(), cost.cols()) = cost;
  return out;
}

Assignment finish(const Eigen::MatrixXd& cost, const std::vector<int>& perm) {
  const Eigen::MatrixXd square = pad_square(cost);
  Assignment a;
  a.row_to_col.assign(static_cast<std::size_t>(cost.rows()), -1);
  for (Eigen::Index r = 0; r < square.rows(); ++r) {
    a.cost += square(r, perm[r]);
    if (r < cost.rows() && perm[r] < cost.cols()) a.row_to_col[r] = perm[r];
  }
  return a;
}

}  // namespace

Assignment assign_brute_force(const Eigen::MatrixXd& cost) {
  const Eigen::MatrixXd square = pad_square(cost);
  const int n = static_cast<int>(square.rows());
  if (n > 10) throw Error(ErrorCode::InvalidArgument, "brute-force assignment limited to 10x10");
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int r = 0; r < n; ++r) c += square(r, perm[r]);
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return finish(cost, best);
}

Assignment assign_hungarian(const Eigen::MatrixXd& cost) {
  const Eigen::MatrixXd a = pad_square(cost);
  const int n = static_cast<int>(a.rows());
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; p[j] is the row assigned to column j.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> perm(n, 0);
  for (int j = 1; j <= n; ++j) perm[p[j] - 1] = j - 1;
  return finish(cost, perm);
}

Assignment match_parts(const Eigen::MatrixXd& cost) {
  if (std::max(cost.rows(), cost.cols()) <= 8) return assign_brute_force(cost);
  return assign_hungarian(cost);
}

// ---------------------------------------------------------------------------
// Object evaluation

std::string part_bucket(std::size_t n) {
  if (n == 2) return "2 Parts";
  if (n == 3) return "3 Parts";
  if (n >= 4 && n <= 5) return "4-5 Parts";
  if (n >= 6 && n <= 15) return "6-15 Parts";
  return "other";
}

namespace {

TriMesh part_surface(const Part& part) {
  if (part.mesh && !part.mesh->empty()) return *part.mesh;
  return box_mesh(part.obb);
}

std::vector<Vec3> part_samples(const Part& part, std::size_t n, std::uint64_t seed) {
  if ((!part.mesh || part.mesh->empty()) && part.cloud && !part.cloud->empty()) {
    const auto& pts = part.cloud->points;
    if (pts.size() <= n) return pts;
    Rng rng(seed);
    std::vector<Vec3> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(pts[rng.index(pts.size())]);
    return out;
  }
  return sample_surface(part_surface(part), n, seed).points;
}

std::vector<Vec3> whole_samples(const ArticulatedObject& obj, std::size_t n, std::uint64_t seed) {
  bool clouds_only = true;
  TriMesh merged;
  for (const Part& p : obj.parts) {
    if (p.mesh && !p.mesh->empty()) clouds_only = false;
    append_mesh(merged, part_surface(p));
  }
  if (clouds_only) {
    std::vector<Vec3> all;
    for (const Part& p : obj.parts) {
      if (p.cloud) all.insert(all.end(), p.cloud->points.begin(), p.cloud->points.end());
    }
    if (!all.empty()) {
      Rng rng(seed);
      std::vector<Vec3> out;
      for (std::size_t i = 0; i < std::min(n, all.size()); ++i) out.push_back(all[rng.index(all.size())]);
      return out;
    }
  }
  return sample_surface(merged, n, seed).points;
}

double bbox_diagonal(const ArticulatedObject& obj) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Part& p : obj.parts) {
    for (const Vec3& c : p.obb.corners()) {
      lo = lo.cwiseMin(c);
      hi = hi.cwiseMax(c);
    }
  }
  return (hi - lo).norm();
}

std::uint64_t part_seed(std::uint64_t seed, std::string_view what, std::size_t index) {
  return derive_seed(seed, std::string(what) + "/" + std::to_string(index));
}

void summarise_joints(EvalReport& r, const ArticulatedObject& gt) {
  if (r.joints.empty()) return;
  double rot = 0.0;
  double pos = 0.0;
  std::size_t n_pos = 0;
  std::size_t correct = 0;
  for (const auto& j : r.joints) {
    rot += j.metrics.rot_err_deg;
    correct += j.metrics.type_correct;
    if (gt.joints[j.gt_joint].type == JointType::Revolute && j.metrics.pos_err) {
      pos += *j.metrics.pos_err;
      ++n_pos;
    }
  }
  const double n = static_cast<double>(r.joints.size());
  r.rot_err_deg = rot / n;
  r.type_accuracy = static_cast<double>(correct) / n;
  if (n_pos > 0) r.pos_err = pos / static_cast<double>(n_pos);
}

JointReport missing_joint(const ArticulatedObject& gt, int g, double diagonal) {
  JointReport jr;
  jr.gt_joint = g;
  jr.metrics.rot_err_deg = kMissingJointRotationDeg;
  jr.metrics.type_correct = false;
  if (gt.joints[g].type == JointType::Revolute) jr.metrics.pos_err = diagonal;
  return jr;
}

}  // namespace

EvalReport missing_prediction_report(const ArticulatedObject& gt, std::string object_id) {
  EvalReport r;
  r.object_id = std::move(object_id);
  r.gt_part_count = gt.parts.size();
  r.bucket = part_bucket(gt.parts.size());
  r.gt_to_pred.assign(gt.parts.size(), -1);
  r.unmatched_parts = gt.parts.size();
  const double diagonal = bbox_diagonal(gt);
  for (std::size_t g = 0; g < gt.joints.size(); ++g) r.joints.push_back(missing_joint(gt, static_cast<int>(g), diagonal));
  summarise_joints(r, gt);
  return r;
}

EvalReport evaluate_object(const ArticulatedObject& pred, const ArticulatedObject& gt, const EvalOptions& options,
                           std::string object_id) {
  if (gt.parts.empty()) throw Error(ErrorCode::EmptyInput, "ground truth has no parts");
  if (pred.parts.empty()) return missing_prediction_report(gt, std::move(object_id));

  EvalReport r;
  r.object_id = std::move(object_id);
  r.gt_part_count = gt.parts.size();
  r.pred_part_count = pred.parts.size();
  r.bucket = part_bucket(gt.parts.size());

  const std::uint64_t seed = options.seed;
  r.whole_cd = chamfer(whole_samples(pred, options.samples, derive_seed(seed, "whole")),
                       whole_samples(gt, options.samples, derive_seed(seed, "whole")));

  const std::size_t np = pred.parts.size();
  const std::size_t ng = gt.parts.size();
  std::vector<std::vector<Vec3>> pred_small(np), gt_small(ng);
  for (std::size_t i = 0; i < np; ++i) pred_small[i] = part_samples(pred.parts[i], options.match_samples, part_seed(seed, "match", i));
  for (std::size_t j = 0; j < ng; ++j) gt_small[j] = part_samples(gt.parts[j], options.match_samples, part_seed(seed, "match", j));
  Eigen::MatrixXd cost(np, ng);
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t j = 0; j < ng; ++j) cost(i, j) = chamfer(pred_small[i], gt_small[j]);
  }
  const Assignment assignment = match_parts(cost);

  r.gt_to_pred.assign(ng, -1);
  double part_sum = 0.0;
  std::size_t matched = 0;
  for (std::size_t i = 0; i < np; ++i) {
    const int g = assignment.row_to_col[i];
    if (g < 0) continue;
    r.gt_to_pred[g] = static_cast<int>(i);
    const auto a = part_samples(pred.parts[i], options.samples, part_seed(seed, "part", i));
    const auto b = part_samples(gt.parts[g], options.samples, part_seed(seed, "part", static_cast<std::size_t>(g)));
    part_sum += chamfer(a, b);
    ++matched;
  }
  if (matched > 0) r.part_cd = part_sum / static_cast<double>(matched);
  r.unmatched_parts = (np - matched) + (ng - matched);

  const double diagonal = bbox_diagonal(gt);
  std::vector<char> pred_joint_used(pred.joints.size(), 0);
  for (std::size_t g = 0; g < gt.joints.size(); ++g) {
    const int pred_child = r.gt_to_pred[gt.joints[g].child];
    int found = -1;
    for (std::size_t k = 0; k < pred.joints.size() && pred_child >= 0; ++k) {
      if (pred.joints[k].child == pred_child) {
        found = static_cast<int>(k);
        break;
      }
    }
    if (found < 0) {
      r.joints.push_back(missing_joint(gt, static_cast<int>(g), diagonal));
      continue;
    }
    pred_joint_used[found] = 1;
    JointReport jr;
    jr.gt_joint = static_cast<int>(g);
    jr.pred_joint = found;
    jr.metrics = joint_error(pred.joints[found], gt.joints[g]);
    // A revolute ground truth scored against a prismatic prediction has no
    // line to compare; it takes the missing-joint position error.
    if (gt.joints[g].type == JointType::Revolute && !jr.metrics.pos_err) jr.metrics.pos_err = diagonal;
    r.joints.push_back(jr);
  }
  r.unmatched_joints = static_cast<std::size_t>(std::count(pred_joint_used.begin(), pred_joint_used.end(), 0)) +
                       static_cast<std::size_t>(std::count_if(r.joints.begin(), r.joints.end(), [](const JointReport& j) { return j.pred_joint < 0; }));
  summarise_joints(r, gt);
  return r;
}

// ---------------------------------------------------------------------------
// Tables

namespace {

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> get_opt(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

json report_to_json(const EvalReport& r) {
  json j;
  j["object_id"] = r.object_id;
  j["gt_part_count"] = r.gt_part_count;
  j["pred_part_count"] = r.pred_part_count;
  j["bucket"] = r.bucket;
  j["whole_cd"] = opt(r.whole_cd);
  j["part_cd"] = opt(r.part_cd);
  j["gt_to_pred"] = r.gt_to_pred;
  j["rot_err_deg"] = opt(r.rot_err_deg);
  j["pos_err"] = opt(r.pos_err);
  j["type_accuracy"] = opt(r.type_accuracy);
  j["unmatched_parts"] = r.unmatched_parts;
  j["unmatched_joints"] = r.unmatched_joints;
  json joints = json::array();
  for (const auto& jr : r.joints) {
    joints.push_back({{"gt_joint", jr.gt_joint},
                      {"pred_joint", jr.pred_joint},
                      {"rot_err_deg", jr.metrics.rot_err_deg},
                      {"pos_err", opt(jr.metrics.pos_err)},
                      {"type_correct", jr.metrics.type_correct}});
  }
  j["joints"] = joints;
  return j;
}

EvalReport report_from_json(const json& j) {
  EvalReport r;
  r.object_id = j.at("object_id").get<std::string>();
  r.gt_part_count = j.at("gt_part_count").get<std::size_t>();
  r.pred_part_count = j.at("pred_part_count").get<std::size_t>();
  r.bucket = j.at("bucket").get<std::string>();
  r.whole_cd = get_opt(j, "whole_cd");
  r.part_cd = get_opt(j, "part_cd");
  r.gt_to_pred = j.at("gt_to_pred").get<std::vector<int>>();
  r.rot_err_deg = get_opt(j, "rot_err_deg");
  r.pos_err = get_opt(j, "pos_err");
  r.type_accuracy = get_opt(j, "type_accuracy");
  r.unmatched_parts = j.at("unmatched_parts").get<std::size_t>();
  r.unmatched_joints = j.at("unmatched_joints").get<std::size_t>();
  for (const auto& jj : j.at("joints")) {
    JointReport jr;
    jr.gt_joint = jj.at("gt_joint").get<int>();
    jr.pred_joint = jj.at("pred_joint").get<int>();
    jr.metrics.rot_err_deg = jj.at("rot_err_deg").get<double>();
    jr.metrics.pos_err = get_opt(jj, "pos_err");
    jr.metrics.type_correct = jj.at("type_correct").get<bool>();
    r.joints.push_back(jr);
  }
  return r;
}

struct BucketRow {
  std::string bucket;
  std::size_t objects = 0;
  std::optional<double> whole_cd, part_cd, rot_err_deg, pos_err, type_accuracy;
};

std::optional<double> mean_of(const std::vector<const EvalReport*>& rs, std::optional<double> EvalReport::*field) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const EvalReport* r : rs) {
    if (r->*field) {
      sum += *(r->*field);
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

BucketRow bucket_row(const std::string& name, const std::vector<const EvalReport*>& rs) {
  BucketRow row;
  row.bucket = name;
  row.objects = rs.size();
  row.whole_cd = mean_of(rs, &EvalReport::whole_cd);
  row.part_cd = mean_of(rs, &EvalReport::part_cd);
  row.rot_err_deg = mean_of(rs, &EvalReport::rot_err_deg);
  row.pos_err = mean_of(rs, &EvalReport::pos_err);
  row.type_accuracy = mean_of(rs, &EvalReport::type_accuracy);
  return row;
}

std::string csv_cell(const std::optional<double>& v) { return v ? format_real(*v) : "N/A"; }

}  // namespace

ReportTables report_tables(const std::vector<EvalReport>& reports, const EvalOptions& options) {
  if (reports.empty()) throw Error(ErrorCode::EmptyInput, "no reports");
  std::vector<BucketRow> rows;
  std::vector<std::string> names = kBuckets;
  if (std::any_of(reports.begin(), reports.end(), [](const EvalReport& r) { return r.bucket == "other"; })) names.push_back("other");
  for (const auto& name : names) {
    std::vector<const EvalReport*> in;
    for (const auto& r : reports) {
      if (r.bucket == name) in.push_back(&r);
    }
    rows.push_back(bucket_row(name, in));
  }
  std::vector<const EvalReport*> all;
  for (const auto& r : reports) all.push_back(&r);
  rows.push_back(bucket_row("all", all));

  ReportTables out;
  std::ostringstream csv;
  csv << "bucket,objects,whole_cd,part_cd,rot_err_deg,pos_err,type_accuracy\n";
  for (const auto& row : rows) {
    csv << row.bucket << ',' << row.objects << ',' << csv_cell(row.whole_cd) << ',' << csv_cell(row.part_cd) << ','
        << csv_cell(row.rot_err_deg) << ',' << csv_cell(row.pos_err) << ',' << csv_cell(row.type_accuracy) << '\n';
  }
  out.csv = csv.str();

  json j;
  j["metadata"] = {{"chamfer_convention", kChamferConvention},
                   {"chamfer_scale", kChamferScale},
                   {"chamfer_samples", options.samples},
                   {"match_samples", options.match_samples},
                   {"unmatched_penalty", kUnmatchedPenalty},
                   {"missing_joint_rotation_deg", kMissingJointRotationDeg},
                   {"pos_units", kPositionUnits},
                   {"seed", options.seed}};
  json objects = json::array();
  for (const auto& r : reports) objects.push_back(report_to_json(r));
  j["objects"] = objects;
  json buckets = json::array();
  for (const auto& row : rows) {
    buckets.push_back({{"bucket", row.bucket},
                       {"objects", row.objects},
                       {"whole_cd", opt(row.whole_cd)},
                       {"part_cd", opt(row.part_cd)},
                       {"rot_err_deg", opt(row.rot_err_deg)},
                       {"pos_err", opt(row.pos_err)},
                       {"type_accuracy", opt(row.type_accuracy)}});
  }
  j["buckets"] = buckets;
  out.json = j.dump(2) + "\n";
  return out;
}

std::vector<EvalReport> reports_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    std::vector<EvalReport> out;
    for (const auto& o : j.at("objects")) out.push_back(report_from_json(o));
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ExternalFormatError, std::string("report json: ") + e.what());
  }
}

}  // namespace artrecon
