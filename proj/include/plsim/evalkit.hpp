#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "plsim/geom.hpp"
#include "plsim/memory.hpp"
#include "plsim/scene.hpp"
#include "plsim/scoring.hpp"

namespace plsim::evalkit {

enum class IouMode { Bev, ThreeD };

struct EvalConfig {
  std::map<int, double> class_iou_threshold;  // per-class overlap required for a TP
  double default_iou_threshold = 0.5;
  IouMode tp_mode = IouMode::ThreeD;
  // Pairs for the ATE/ASE/AOE decomposition are matched at this lenient
  // overlap instead of the TP thresholds, so a systematic size or position
  // bias shows up as a large error rather than an empty metric.
  double error_match_iou = 0.1;

  double threshold_for(int class_id) const;
};

struct TpMatch {
  // (prediction index, ground-truth index) pairs.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::size_t> false_positives;  // prediction indices
  std::vector<std::size_t> false_negatives;  // ground-truth indices
};

// Greedy matching, highest-score predictions first (ties by input order):
// each prediction claims its best still-unclaimed same-class ground truth
// with IoU at or above the class threshold.
TpMatch match_tp(const std::vector<scoring::Detection>& predictions,
                 const std::vector<GtObject>& gt, const EvalConfig& config, IouMode mode);

// Predictions and ground truth for one scene; AP pools ranks across frames.
struct EvalFrame {
  std::vector<scoring::Detection> predictions;
  std::vector<GtObject> gt;
};

// 40-point interpolated average precision for one class. Empty result when
// the class has no ground truth anywhere.
std::optional<double> average_precision(const std::vector<EvalFrame>& frames, int class_id,
                                        double iou_threshold, IouMode mode);

struct ErrorDecomposition {
  std::optional<double> ate;  // mean ground-plane center distance
  std::optional<double> ase;  // mean 1 - IoU after aligning center and heading
  std::optional<double> aoe;  // mean absolute heading difference, in [0, pi]
  std::size_t tp_count = 0;
};

// Pooled over matched (prediction, ground truth) box pairs.
ErrorDecomposition error_decomposition(
    const std::vector<std::pair<geom::OrientedBox, geom::OrientedBox>>& matched_pairs);

struct ClassQuality {
  long tp = 0, fp = 0, fn = 0;
  std::optional<double> ap_bev, ap_3d;
  std::optional<double> ate, ase, aoe;
};

struct QualityReport {
  std::map<int, ClassQuality> per_class;
};

// Score the Positive entries of each scene's memory against that scene's
// ground truth. Scenes without a memory count as all-missed; memories
// without a scene are ignored. Counts and AP use the per-class thresholds;
// the error decomposition pools pairs matched at `error_match_iou`.
QualityReport quality_report(const std::vector<memory::SceneMemory>& memories,
                             const std::vector<Scene>& scenes, const EvalConfig& config);

}  // namespace plsim::evalkit
