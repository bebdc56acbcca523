#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "plsim/geom.hpp"
#include "plsim/scoring.hpp"

namespace plsim::memory {

using scoring::BoxState;
using scoring::PseudoLabelEntry;

// Per-scene label memory. `round` counts completed label-update passes;
// a freshly created memory has round 0 and no entries.
struct SceneMemory {
  std::string scene_id;
  int round = 0;
  std::vector<PseudoLabelEntry> entries;
};

// Current-round proxy labels for one scene (triplet partition output).
struct ProxySet {
  std::string scene_id;
  std::vector<PseudoLabelEntry> entries;
};

enum class EnsembleVariant { Consistency, Nms, Bipartite };

struct EnsembleConfig {
  EnsembleVariant variant = EnsembleVariant::Consistency;
  double match_iou_min = 0.1;  // below this, a pairing does not count as a match
  int t_ign = 2;               // cnt >= t_ign: entry stops supervising (Ignored)
  int t_rm = 3;                // cnt >= t_rm: entry is discarded
  bool voting = true;          // off: unmatched entries are cached unchanged

  void validate() const;  // throws std::invalid_argument
};

// Pairing between memory entries (first index) and proxy entries (second).
struct MatchResult {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<std::size_t> unmatched_memory;
  std::vector<std::size_t> unmatched_proxy;
};

// Each memory box grabs its highest-IoU proxy box; a proxy claimed by
// several memory boxes goes to the highest-IoU claimant (ties to the lowest
// index) and the losers stay unmatched. Pairs under `min_iou` don't count.
MatchResult match_consistency(const std::vector<geom::OrientedBox>& memory_boxes,
                              const std::vector<geom::OrientedBox>& proxy_boxes, double min_iou);

// Optimal one-to-one assignment maximizing total IoU (Hungarian algorithm);
// assignments under `min_iou` are dropped afterwards.
MatchResult match_bipartite(const std::vector<geom::OrientedBox>& memory_boxes,
                            const std::vector<geom::OrientedBox>& proxy_boxes, double min_iou);

// Exposed for testing against brute force: maximum-weight one-to-one
// assignment on an n x m matrix; result[i] is the column of row i or -1.
std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weight);

// Keep whichever entry scores higher (ties favor the current round's proxy)
// and reset its unmatched counter.
PseudoLabelEntry merge_matched(const PseudoLabelEntry& memory_entry,
                               const PseudoLabelEntry& proxy_entry);

struct VoteResult {
  std::vector<PseudoLabelEntry> cached;     // stay in memory as-is
  std::vector<PseudoLabelEntry> ignored;    // demoted to Ignored, stay in memory
  std::vector<PseudoLabelEntry> discarded;  // removed from memory
};

// Unmatched-memory-counting: unmatched proxies enter with cnt = 0; unmatched
// memory entries get cnt + 1 and are then discarded at cnt >= t_rm, demoted
// at cnt >= t_ign, cached otherwise.
VoteResult memory_vote(const std::vector<PseudoLabelEntry>& unmatched_memory,
                       const std::vector<PseudoLabelEntry>& unmatched_proxy,
                       const EnsembleConfig& config);

// NMS-style ensemble: pool memory and proxy entries per class, suppress by
// score, then route survivors through voting based on whether anything from
// the other generation overlaps them.
SceneMemory ensemble_nms(const SceneMemory& memory, const ProxySet& proxies,
                         const EnsembleConfig& config);

// One full memory update: match (per class, by the configured variant),
// merge matched pairs, vote on the rest, advance the round counter. A final
// per-class suppression pass guarantees no two stored boxes of one class
// overlap above match_iou_min.
SceneMemory update_memory(const SceneMemory& memory, const ProxySet& proxies,
                          const EnsembleConfig& config);

}  // namespace plsim::memory
