#pragma once

#include <map>
#include <optional>
#include <vector>

#include "plsim/geom.hpp"

namespace plsim::scoring {

// One raw detector output. `p` is classification confidence; `u` is the
// detector's predicted IoU against ground truth (quality estimate). A
// detector without an IoU head leaves `u` empty and the quality-aware score
// falls back to `p` alone.
struct Detection {
  geom::OrientedBox box;
  int class_id = 0;
  double p = 0.0;
  std::optional<double> u;
};

enum class BoxState { Positive, Ignored };

// A pseudo label as stored in the scene memory: the box, its combined
// quality score, whether it supervises (Positive) or merely masks the
// background loss (Ignored), and the unmatched-generation counter used by
// memory voting.
struct PseudoLabelEntry {
  geom::OrientedBox box;
  int class_id = 0;
  double score = 0.0;
  BoxState state = BoxState::Positive;
  int cnt = 0;
};

struct TripletThresholds {
  double t_pos = 0.6;
  double t_neg = 0.25;
};

// Scoring configuration. `phi` blends confidence and quality; per-class
// overrides fall back to the defaults. `single_threshold` degenerates the
// partition to a plain confidence cut at t_pos with no ignored band (keeps
// everything >= t_pos, discards the rest) for ablation runs.
struct TripletConfig {
  TripletThresholds thresholds;
  double phi = 0.3;
  std::map<int, TripletThresholds> class_thresholds;
  std::map<int, double> class_phi;
  bool single_threshold = false;

  const TripletThresholds& thresholds_for(int class_id) const;
  double phi_for(int class_id) const;
  void validate() const;  // throws std::invalid_argument
};

// o = phi * p + (1 - phi) * u. Pre: all inputs in [0, 1].
double hybrid_score(double p, double u, double phi);

// Partition detections into Positive (o >= t_pos), Ignored
// (t_neg <= o < t_pos) and discarded (o < t_neg). Output preserves input
// order; entries carry the combined score and cnt = 0.
std::vector<PseudoLabelEntry> triplet_partition(const std::vector<Detection>& detections,
                                                const TripletConfig& config);

}  // namespace plsim::scoring
