#include "plsim/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>
#include <unordered_map>

#include "plsim/common.hpp"

namespace plsim::evalkit {

double EvalConfig::threshold_for(int class_id) const {
  auto it = class_iou_threshold.find(class_id);
  return it == class_iou_threshold.end() ? default_iou_threshold : it->second;
}

namespace {

double overlap(const geom::OrientedBox& a, const geom::OrientedBox& b, IouMode mode) {
  return mode == IouMode::Bev ? geom::iou_bev(a, b) : geom::iou_3d(a, b);
}

std::vector<std::size_t> rank_by_score(const std::vector<scoring::Detection>& preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].p > preds[b].p; });
  return order;
}

}  // namespace

TpMatch match_tp(const std::vector<scoring::Detection>& predictions,
                 const std::vector<GtObject>& gt, const EvalConfig& config, IouMode mode) {
  TpMatch r;
  std::vector<char> claimed(gt.size(), 0);
  std::vector<int> pred_to_gt(predictions.size(), -1);
  for (std::size_t pi : rank_by_score(predictions)) {
    const scoring::Detection& d = predictions[pi];
    const double need = config.threshold_for(d.class_id);
    int best = -1;
    double best_iou = 0.0;
    for (std::size_t gi = 0; gi < gt.size(); ++gi) {
      if (claimed[gi] || gt[gi].class_id != d.class_id) continue;
      const double iou = overlap(d.box, gt[gi].box, mode);
      if (iou >= need && iou > best_iou) {
        best = static_cast<int>(gi);
        best_iou = iou;
      }
    }
    if (best >= 0) {
      claimed[best] = 1;
      pred_to_gt[pi] = best;
    }
  }
  for (std::size_t pi = 0; pi < predictions.size(); ++pi) {
    if (pred_to_gt[pi] >= 0) {
      r.pairs.emplace_back(pi, static_cast<std::size_t>(pred_to_gt[pi]));
    } else {
      r.false_positives.push_back(pi);
    }
  }
  for (std::size_t gi = 0; gi < gt.size(); ++gi) {
    if (!claimed[gi]) r.false_negatives.push_back(gi);
  }
  return r;
}

std::optional<double> average_precision(const std::vector<EvalFrame>& frames, int class_id,
                                        double iou_threshold, IouMode mode) {
  std::size_t n_gt = 0;
  for (const EvalFrame& f : frames) {
    for (const GtObject& g : f.gt) n_gt += g.class_id == class_id;
  }
  if (n_gt == 0) return std::nullopt;

  struct Ranked {
    double score;
    std::size_t frame, idx;
  };
  std::vector<Ranked> ranked;
  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const auto& preds = frames[fi].predictions;
    for (std::size_t pi = 0; pi < preds.size(); ++pi) {
      if (preds[pi].class_id == class_id) ranked.push_back({preds[pi].p, fi, pi});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.score > b.score; });

  std::vector<std::vector<char>> claimed(frames.size());
  for (std::size_t fi = 0; fi < frames.size(); ++fi) claimed[fi].assign(frames[fi].gt.size(), 0);

  std::vector<char> is_tp(ranked.size(), 0);
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    const EvalFrame& f = frames[ranked[k].frame];
    const geom::OrientedBox& pbox = f.predictions[ranked[k].idx].box;
    int best = -1;
    double best_iou = 0.0;
    for (std::size_t gi = 0; gi < f.gt.size(); ++gi) {
      if (claimed[ranked[k].frame][gi] || f.gt[gi].class_id != class_id) continue;
      const double iou = overlap(pbox, f.gt[gi].box, mode);
      if (iou >= iou_threshold && iou > best_iou) {
        best = static_cast<int>(gi);
        best_iou = iou;
      }
    }
    if (best >= 0) {
      claimed[ranked[k].frame][best] = 1;
      is_tp[k] = 1;
    }
  }

  // Precision envelope over the ranked list, then 40 evenly spaced recall
  // positions (1/40 .. 1).
  const std::size_t n = ranked.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tp_cum = 0;
  for (std::size_t k = 0; k < n; ++k) {
    tp_cum += is_tp[k];
    precision[k] = static_cast<double>(tp_cum) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(tp_cum) / static_cast<double>(n_gt);
  }
  for (std::size_t k = n; k-- > 1;) {
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  }
  double sum = 0.0;
  std::size_t k = 0;
  for (int j = 1; j <= 40; ++j) {
    const double want = static_cast<double>(j) / 40.0;
    while (k < n && recall[k] < want - 1e-12) ++k;
    if (k < n) sum += precision[k];
  }
  return sum / 40.0;
}

ErrorDecomposition error_decomposition(
    const std::vector<std::pair<geom::OrientedBox, geom::OrientedBox>>& matched_pairs) {
  ErrorDecomposition r;
  r.tp_count = matched_pairs.size();
  if (matched_pairs.empty()) return r;
  double ate = 0.0, ase = 0.0, aoe = 0.0;
  for (const auto& [pred, gt] : matched_pairs) {
    ate += std::hypot(pred.cx - gt.cx, pred.cy - gt.cy);
    const geom::OrientedBox aligned(gt.cx, gt.cy, gt.cz, pred.l, pred.w, pred.h, gt.yaw);
    ase += 1.0 - geom::iou_3d(aligned, gt);
    aoe += std::abs(wrap_angle(pred.yaw - gt.yaw));
  }
  const double n = static_cast<double>(matched_pairs.size());
  r.ate = ate / n;
  r.ase = ase / n;
  r.aoe = aoe / n;
  return r;
}

QualityReport quality_report(const std::vector<memory::SceneMemory>& memories,
                             const std::vector<Scene>& scenes, const EvalConfig& config) {
  std::unordered_map<std::string, const memory::SceneMemory*> by_id;
  for (const auto& m : memories) by_id[m.scene_id] = &m;

  std::vector<EvalFrame> frames;
  frames.reserve(scenes.size());
  std::set<int> classes;
  std::map<int, ClassQuality> acc;
  std::map<int, std::vector<std::pair<geom::OrientedBox, geom::OrientedBox>>> pairs_by_class;

  // Error metrics stay measurable when a bias pushes boxes below the TP
  // thresholds: their pairs are matched at the lenient overlap instead.
  EvalConfig lenient = config;
  lenient.class_iou_threshold.clear();
  lenient.default_iou_threshold = config.error_match_iou;

  for (const Scene& scene : scenes) {
    EvalFrame frame;
    frame.gt = scene.gt;
    auto it = by_id.find(scene.scene_id);
    if (it != by_id.end()) {
      for (const auto& e : it->second->entries) {
        if (e.state == scoring::BoxState::Positive) {
          frame.predictions.push_back({e.box, e.class_id, e.score, std::nullopt});
        }
      }
    }
    for (const auto& g : frame.gt) classes.insert(g.class_id);
    for (const auto& p : frame.predictions) classes.insert(p.class_id);

    const TpMatch tpm = match_tp(frame.predictions, frame.gt, config, config.tp_mode);
    for (const auto& [pi, gi] : tpm.pairs) acc[frame.predictions[pi].class_id].tp += 1;
    for (std::size_t pi : tpm.false_positives) acc[frame.predictions[pi].class_id].fp += 1;
    for (std::size_t gi : tpm.false_negatives) acc[frame.gt[gi].class_id].fn += 1;

    const TpMatch epm = match_tp(frame.predictions, frame.gt, lenient, config.tp_mode);
    for (const auto& [pi, gi] : epm.pairs) {
      pairs_by_class[frame.predictions[pi].class_id].emplace_back(frame.predictions[pi].box,
                                                                  frame.gt[gi].box);
    }
    frames.push_back(std::move(frame));
  }

  QualityReport report;
  for (int c : classes) {
    ClassQuality q = acc.count(c) ? acc[c] : ClassQuality{};
    const double thr = config.threshold_for(c);
    q.ap_bev = average_precision(frames, c, thr, IouMode::Bev);
    q.ap_3d = average_precision(frames, c, thr, IouMode::ThreeD);
    const ErrorDecomposition ed = error_decomposition(pairs_by_class[c]);
    q.ate = ed.ate;
    q.ase = ed.ase;
    q.aoe = ed.aoe;
    report.per_class[c] = q;
  }
  return report;
}

}  // namespace plsim::evalkit
