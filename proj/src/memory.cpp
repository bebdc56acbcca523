#include "plsim/memory.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace plsim::memory {

void EnsembleConfig::validate() const {
  if (!(match_iou_min > 0.0 && match_iou_min < 1.0)) {
    throw std::invalid_argument("ensemble: match_iou_min must lie in (0, 1)");
  }
  if (t_ign < 1 || t_rm <= t_ign) {
    throw std::invalid_argument("ensemble: need 0 < t_ign < t_rm");
  }
}

MatchResult match_consistency(const std::vector<geom::OrientedBox>& memory_boxes,
                              const std::vector<geom::OrientedBox>& proxy_boxes, double min_iou) {
  const std::size_t nm = memory_boxes.size(), np = proxy_boxes.size();
  std::vector<std::vector<double>> iou(nm, std::vector<double>(np, 0.0));
  for (std::size_t j = 0; j < nm; ++j) {
    for (std::size_t v = 0; v < np; ++v) iou[j][v] = geom::iou_3d(memory_boxes[j], proxy_boxes[v]);
  }

  // Every memory box picks its best proxy (ties to the lowest proxy index).
  std::vector<int> pick(nm, -1);
  for (std::size_t j = 0; j < nm; ++j) {
    int best = -1;
    for (std::size_t v = 0; v < np; ++v) {
      if (best < 0 || iou[j][v] > iou[j][best]) best = static_cast<int>(v);
    }
    if (best >= 0 && iou[j][best] >= min_iou) pick[j] = best;
  }

  // A proxy claimed more than once goes to the highest-IoU claimant
  // (ties to the lowest memory index); the losers stay unmatched.
  std::vector<int> winner(np, -1);
  for (std::size_t j = 0; j < nm; ++j) {
    const int v = pick[j];
    if (v < 0) continue;
    if (winner[v] < 0 || iou[j][v] > iou[winner[v]][v]) winner[v] = static_cast<int>(j);
  }

  MatchResult r;
  for (std::size_t j = 0; j < nm; ++j) {
    if (pick[j] >= 0 && winner[pick[j]] == static_cast<int>(j)) {
      r.pairs.emplace_back(j, static_cast<std::size_t>(pick[j]));
    } else {
      r.unmatched_memory.push_back(j);
    }
  }
  for (std::size_t v = 0; v < np; ++v) {
    if (winner[v] < 0) r.unmatched_proxy.push_back(v);
  }
  return r;
}

std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weight) {
  const int n = static_cast<int>(weight.size());
  const int m = n ? static_cast<int>(weight[0].size()) : 0;
  for (const auto& row : weight) {
    if (static_cast<int>(row.size()) != m) {
      throw std::invalid_argument("max_weight_assignment: ragged matrix");
    }
  }
  std::vector<int> result(n, -1);
  if (n == 0 || m == 0) return result;

  // Potentials method on the negated weights, padded square so a perfect
  // matching always exists; dummy cells cost 0.
  const int s = std::max(n, m);
  auto cost = [&](int i, int j) { return (i < n && j < m) ? -weight[i][j] : 0.0; };
  const double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(s + 1, 0.0), v(s + 1, 0.0), minv(s + 1);
  std::vector<int> p(s + 1, 0), way(s + 1, 0);
  for (int i = 1; i <= s; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::vector<char> used(s + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= s; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= s; ++j) {
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
    } while (j0);
  }
  for (int j = 1; j <= s; ++j) {
    if (p[j] >= 1 && p[j] <= n && j <= m) result[p[j] - 1] = j - 1;
  }
  return result;
}

MatchResult match_bipartite(const std::vector<geom::OrientedBox>& memory_boxes,
                            const std::vector<geom::OrientedBox>& proxy_boxes, double min_iou) {
  const std::size_t nm = memory_boxes.size(), np = proxy_boxes.size();
  std::vector<std::vector<double>> w(nm, std::vector<double>(np, 0.0));
  for (std::size_t j = 0; j < nm; ++j) {
    for (std::size_t v = 0; v < np; ++v) w[j][v] = geom::iou_3d(memory_boxes[j], proxy_boxes[v]);
  }
  const std::vector<int> assign = max_weight_assignment(w);

  MatchResult r;
  std::vector<char> proxy_taken(np, 0);
  for (std::size_t j = 0; j < nm; ++j) {
    const int v = j < assign.size() ? assign[j] : -1;
    if (v >= 0 && w[j][v] >= min_iou) {
      r.pairs.emplace_back(j, static_cast<std::size_t>(v));
      proxy_taken[v] = 1;
    } else {
      r.unmatched_memory.push_back(j);
    }
  }
  for (std::size_t v = 0; v < np; ++v) {
    if (!proxy_taken[v]) r.unmatched_proxy.push_back(v);
  }
  return r;
}

PseudoLabelEntry merge_matched(const PseudoLabelEntry& memory_entry,
                               const PseudoLabelEntry& proxy_entry) {
  if (memory_entry.class_id != proxy_entry.class_id) {
    throw std::invalid_argument("merge_matched: class mismatch");
  }
  PseudoLabelEntry out = memory_entry.score > proxy_entry.score ? memory_entry : proxy_entry;
  out.cnt = 0;
  return out;
}

VoteResult memory_vote(const std::vector<PseudoLabelEntry>& unmatched_memory,
                       const std::vector<PseudoLabelEntry>& unmatched_proxy,
                       const EnsembleConfig& config) {
  config.validate();
  VoteResult r;
  for (PseudoLabelEntry e : unmatched_proxy) {
    e.cnt = 0;  // fresh boxes start a new count
    r.cached.push_back(e);
  }
  if (!config.voting) {
    // Ablation mode: nothing ages out, unmatched history is kept verbatim.
    for (const PseudoLabelEntry& e : unmatched_memory) r.cached.push_back(e);
    return r;
  }
  for (PseudoLabelEntry e : unmatched_memory) {
    e.cnt += 1;
    if (e.cnt >= config.t_rm) {
      r.discarded.push_back(e);
    } else if (e.cnt >= config.t_ign) {
      e.state = BoxState::Ignored;
      r.ignored.push_back(e);
    } else {
      r.cached.push_back(e);
    }
  }
  return r;
}

namespace {

std::set<int> class_ids(const SceneMemory& memory, const ProxySet& proxies) {
  std::set<int> ids;
  for (const auto& e : memory.entries) ids.insert(e.class_id);
  for (const auto& e : proxies.entries) ids.insert(e.class_id);
  return ids;
}

// Per-class greedy suppression so no two stored boxes of one class overlap
// above the matching threshold. Survivor order follows the input.
void suppress_overlaps(std::vector<PseudoLabelEntry>& entries, double min_iou) {
  std::vector<char> drop(entries.size(), 0);
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return entries[a].score > entries[b].score;
  });
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (drop[i]) continue;
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (drop[j] || entries[i].class_id != entries[j].class_id) continue;
      if (geom::iou_3d(entries[i].box, entries[j].box) > min_iou) drop[j] = 1;
    }
  }
  std::vector<PseudoLabelEntry> kept;
  kept.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!drop[i]) kept.push_back(entries[i]);
  }
  entries = std::move(kept);
}

}  // namespace

SceneMemory ensemble_nms(const SceneMemory& memory, const ProxySet& proxies,
                         const EnsembleConfig& config) {
  config.validate();
  if (proxies.scene_id != memory.scene_id) {
    throw std::invalid_argument("ensemble_nms: scene_id mismatch");
  }
  SceneMemory out;
  out.scene_id = memory.scene_id;
  out.round = memory.round + 1;

  for (int c : class_ids(memory, proxies)) {
    // Pool proxies first so an exact score tie keeps the fresh label.
    struct Item {
      PseudoLabelEntry entry;
      bool from_memory;
    };
    std::vector<Item> items;
    for (const auto& e : proxies.entries) {
      if (e.class_id == c) items.push_back({e, false});
    }
    for (const auto& e : memory.entries) {
      if (e.class_id == c) items.push_back({e, true});
    }

    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return items[a].entry.score > items[b].entry.score;
    });

    // Suppression with attribution: a kept box that suppressed something
    // from the other generation counts as matched.
    std::vector<int> suppressed_by(items.size(), -1);
    std::vector<char> kept(items.size(), 0);
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
      const std::size_t i = order[oi];
      if (suppressed_by[i] >= 0) continue;
      kept[i] = 1;
      for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
        const std::size_t j = order[oj];
        if (suppressed_by[j] < 0 &&
            geom::iou_3d(items[i].entry.box, items[j].entry.box) > config.match_iou_min) {
          suppressed_by[j] = static_cast<int>(i);
        }
      }
    }
    std::vector<char> matched_other(items.size(), 0);
    for (std::size_t j = 0; j < items.size(); ++j) {
      const int k = suppressed_by[j];
      if (k >= 0 && items[k].from_memory != items[j].from_memory) matched_other[k] = 1;
    }

    std::vector<PseudoLabelEntry> vote_memory, vote_proxy;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (!kept[i]) continue;
      if (matched_other[i]) {
        PseudoLabelEntry e = items[i].entry;
        e.cnt = 0;
        out.entries.push_back(e);
      } else if (items[i].from_memory) {
        vote_memory.push_back(items[i].entry);
      } else {
        vote_proxy.push_back(items[i].entry);
      }
    }
    const VoteResult vr = memory_vote(vote_memory, vote_proxy, config);
    out.entries.insert(out.entries.end(), vr.cached.begin(), vr.cached.end());
    out.entries.insert(out.entries.end(), vr.ignored.begin(), vr.ignored.end());
  }
  return out;
}

SceneMemory update_memory(const SceneMemory& memory, const ProxySet& proxies,
                          const EnsembleConfig& config) {
  config.validate();
  if (proxies.scene_id != memory.scene_id) {
    throw std::invalid_argument("update_memory: scene_id mismatch");
  }

  SceneMemory out;
  if (config.variant == EnsembleVariant::Nms) {
    out = ensemble_nms(memory, proxies, config);
  } else {
    out.scene_id = memory.scene_id;
    out.round = memory.round + 1;
    for (int c : class_ids(memory, proxies)) {
      std::vector<std::size_t> mem_idx, prox_idx;
      std::vector<geom::OrientedBox> mem_boxes, prox_boxes;
      for (std::size_t i = 0; i < memory.entries.size(); ++i) {
        if (memory.entries[i].class_id == c) {
          mem_idx.push_back(i);
          mem_boxes.push_back(memory.entries[i].box);
        }
      }
      for (std::size_t i = 0; i < proxies.entries.size(); ++i) {
        if (proxies.entries[i].class_id == c) {
          prox_idx.push_back(i);
          prox_boxes.push_back(proxies.entries[i].box);
        }
      }
      const MatchResult mr = config.variant == EnsembleVariant::Consistency
                                 ? match_consistency(mem_boxes, prox_boxes, config.match_iou_min)
                                 : match_bipartite(mem_boxes, prox_boxes, config.match_iou_min);
      for (const auto& [j, v] : mr.pairs) {
        out.entries.push_back(
            merge_matched(memory.entries[mem_idx[j]], proxies.entries[prox_idx[v]]));
      }
      std::vector<PseudoLabelEntry> um, up;
      for (std::size_t j : mr.unmatched_memory) um.push_back(memory.entries[mem_idx[j]]);
      for (std::size_t v : mr.unmatched_proxy) up.push_back(proxies.entries[prox_idx[v]]);
      const VoteResult vr = memory_vote(um, up, config);
      out.entries.insert(out.entries.end(), vr.cached.begin(), vr.cached.end());
      out.entries.insert(out.entries.end(), vr.ignored.begin(), vr.ignored.end());
    }
  }
  suppress_overlaps(out.entries, config.match_iou_min);
  return out;
}

}  // namespace plsim::memory
