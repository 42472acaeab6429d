#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "artrecon/articulation.hpp"

namespace artrecon {

inline constexpr double kUnmatchedPenalty = 1e6;
inline constexpr double kMissingJointRotationDeg = 90.0;
inline constexpr const char* kPositionUnits = "object units, distance between joint lines";

struct JointMetrics {
  double rot_err_deg = 0.0;
  /// Present when both joints are revolute.
  std::optional<double> pos_err;
  bool type_correct = true;
};

/// Minimum distance between the lines (p1, d1) and (p2, d2); parallel
/// lines fall back to point-to-line distance.
double line_distance(const Vec3& p1, const Vec3& d1, const Vec3& p2, const Vec3& d2);

/// Angle between the undirected axes in degrees, line distance for two
/// revolute joints, type equality. Throws MissingPivot for a revolute joint
/// without a pivot.
JointMetrics joint_error(const Joint& pred, const Joint& gt);

struct Assignment {
  /// For every row (prediction) the matched column (ground truth), or -1.
  std::vector<int> row_to_col;
  /// Sum of matched costs plus kUnmatchedPenalty per unmatched row or column.
  double cost = 0.0;
};

/// Exact search over all permutations. Square size max(rows, cols) <= 10.
Assignment assign_brute_force(const Eigen::MatrixXd& cost);
/// Hungarian method (shortest augmenting path with potentials).
Assignment assign_hungarian(const Eigen::MatrixXd& cost);
/// Brute force up to 8, Hungarian above.
Assignment match_parts(const Eigen::MatrixXd& cost);

struct EvalOptions {
  std::size_t samples = 10000;
  /// Samples per part when building the matching cost matrix.
  std::size_t match_samples = 2000;
  std::uint64_t seed = 0;
};

/// "2 Parts", "3 Parts", "4-5 Parts", "6-15 Parts", or "other".
std::string part_bucket(std::size_t part_count);
inline const std::vector<std::string> kBuckets{"2 Parts", "3 Parts", "4-5 Parts", "6-15 Parts"};

struct JointReport {
  int gt_joint = -1;
  /// -1 when no predicted joint drives the matched child part.
  int pred_joint = -1;
  JointMetrics metrics;

  bool operator==(const JointReport& o) const {
    return gt_joint == o.gt_joint && pred_joint == o.pred_joint && metrics.rot_err_deg == o.metrics.rot_err_deg &&
           metrics.pos_err == o.metrics.pos_err && metrics.type_correct == o.metrics.type_correct;
  }
};

struct EvalReport {
  std::string object_id;
  std::size_t gt_part_count = 0;
  std::size_t pred_part_count = 0;
  std::string bucket;
  std::optional<double> whole_cd;
  std::optional<double> part_cd;
  /// gt_to_pred[g] = matched predicted part, or -1.
  std::vector<int> gt_to_pred;
  std::vector<JointReport> joints;
  std::optional<double> rot_err_deg;
  std::optional<double> pos_err;
  std::optional<double> type_accuracy;
  std::size_t unmatched_parts = 0;
  std::size_t unmatched_joints = 0;

  bool operator==(const EvalReport&) const = default;
};

/// Whole-surface Chamfer on the merged parts, part matching on per-part
/// Chamfer, joint metrics through the matched child parts. A ground-truth
/// joint without a predicted counterpart counts as wrong type, 90 degrees
/// and (revolute) a position error of the ground-truth bounding-box diagonal.
/// Parts without a mesh use their point cloud, or failing that their box.
EvalReport evaluate_object(const ArticulatedObject& pred, const ArticulatedObject& gt, const EvalOptions& options = {},
                           std::string object_id = {});

/// Report for an object with no prediction at all.
EvalReport missing_prediction_report(const ArticulatedObject& gt, std::string object_id);

struct ReportTables {
  std::string csv;
  std::string json;
};

/// CSV: one row per bucket (fixed order, then "all"), empty metrics as N/A.
/// JSON: metadata (Chamfer convention, penalty, units), per-object detail
/// and the bucket rows.
ReportTables report_tables(const std::vector<EvalReport>& reports, const EvalOptions& options = {});
std::vector<EvalReport> reports_from_json(std::string_view json_text);

}  // namespace artrecon
