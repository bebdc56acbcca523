#include "plsim/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <tuple>

#include "plsim/common.hpp"

namespace plsim::pipeline {
namespace {

// Per-scene stream salts; one block of four per round.
constexpr std::uint64_t kPhaseDetectTarget = 0;
constexpr std::uint64_t kPhaseDetectSource = 1;
constexpr std::uint64_t kPhaseTrainTarget = 2;
constexpr std::uint64_t kPhaseTrainSource = 3;

std::uint64_t round_salt(int round, std::uint64_t phase) {
  return static_cast<std::uint64_t>(round) * 4 + phase;
}

using Fingerprint = std::tuple<int, double, double, double, double, double, double, double,
                               double, int, int>;

Fingerprint fingerprint(const scoring::PseudoLabelEntry& e) {
  return {e.class_id, e.box.cx,  e.box.cy, e.box.cz,
          e.box.l,    e.box.w,   e.box.h,  e.box.yaw,
          e.score,    static_cast<int>(e.state), e.cnt};
}

// Fraction of entries not common to both generations.
double entry_churn(const std::vector<scoring::PseudoLabelEntry>& before,
                   const std::vector<scoring::PseudoLabelEntry>& after, std::size_t* common_out) {
  std::map<Fingerprint, int> pool;
  for (const auto& e : before) pool[fingerprint(e)] += 1;
  std::size_t common = 0;
  for (const auto& e : after) {
    auto it = pool.find(fingerprint(e));
    if (it != pool.end() && it->second > 0) {
      it->second -= 1;
      ++common;
    }
  }
  if (common_out) *common_out = common;
  const std::size_t total = before.size() + after.size();
  if (total == 0) return 0.0;
  return static_cast<double>(total - 2 * common) / static_cast<double>(total);
}

std::optional<std::size_t> find_entry(const augment::AugSchedule& schedule,
                                      const std::string& name) {
  for (std::size_t i = 0; i < schedule.entries.size(); ++i) {
    if (schedule.entries[i].name == name) return i;
  }
  return std::nullopt;
}

// Round-robin window of diagnostic scene indices.
std::vector<std::size_t> diag_indices(std::size_t count, std::size_t n, int round) {
  std::vector<std::size_t> out;
  if (n == 0 || count == 0) return out;
  const std::size_t take = std::min(count, n);
  const std::size_t start = (static_cast<std::size_t>(round - 1) * take) % n;
  for (std::size_t i = 0; i < take; ++i) out.push_back((start + i) % n);
  return out;
}

struct LossAccum {
  double cls = 0.0, reg = 0.0, dir = 0.0, iou = 0.0;
  std::size_t n_cls = 0, n_matched = 0;

  losses::DetectionLossTerms terms() const {
    losses::DetectionLossTerms t;
    if (n_cls) t.cls = cls / static_cast<double>(n_cls);
    if (n_matched) {
      t.reg = reg / static_cast<double>(n_matched);
      t.dir = dir / static_cast<double>(n_matched);
      t.iou = iou / static_cast<double>(n_matched);
    }
    return t;
  }
};

void accumulate_losses(const std::vector<scoring::Detection>& dets,
                       const std::vector<GtObject>& targets, LossAccum& acc) {
  evalkit::EvalConfig diag_cfg;  // flat 0.5 3D-IoU association
  const evalkit::TpMatch m = evalkit::match_tp(dets, targets, diag_cfg, evalkit::IouMode::ThreeD);
  std::vector<char> matched(dets.size(), 0);
  for (const auto& [pi, gi] : m.pairs) {
    matched[pi] = 1;
    const geom::OrientedBox& db = dets[pi].box;
    const geom::OrientedBox& gb = targets[gi].box;
    const double dyaw = wrap_angle(db.yaw - gb.yaw);
    const double residuals[7] = {db.cx - gb.cx, db.cy - gb.cy, db.cz - gb.cz, db.l - gb.l,
                                 db.w - gb.w,   db.h - gb.h,   dyaw};
    double reg = 0.0;
    for (double r : residuals) reg += losses::smooth_l1(r);
    acc.reg += reg / 7.0;
    acc.dir += losses::bce(0.5 * (1.0 + std::cos(dyaw)), 1.0);
    acc.iou += losses::iou_bce(dets[pi].u.value_or(dets[pi].p), geom::iou_3d(db, gb));
    acc.n_matched += 1;
  }
  for (std::size_t pi = 0; pi < dets.size(); ++pi) {
    acc.cls += losses::focal(dets[pi].p, matched[pi] ? 1.0 : 0.0);
    acc.n_cls += 1;
  }
}

struct StageRanges {
  double world_rot = 0.0;
  double world_scale = 0.0;  // half-width around 1
  double object_rot = 0.0;
  double object_scale = 0.0;  // half-width around 1
};

StageRanges stage_ranges(const AugmentConfig& aug, int stage) {
  StageRanges r;
  auto intensity = [&](const char* name) -> double {
    const auto idx = find_entry(aug.schedule, name);
    return idx ? augment::cda_intensity(aug.schedule, *idx, stage) : 0.0;
  };
  r.world_rot = intensity("world_rotation");
  r.world_scale = intensity("world_scaling");
  r.object_rot = intensity("object_rotation");
  r.object_scale = intensity("object_scaling");
  return r;
}

// Build one augmented training view and append its point channels
// (x, y, z, range) to the batch.
void append_train_view(const Scene& scene, Rng& rng, const AugmentConfig& aug, int stage,
                       bool source_side, std::vector<double>& batch, std::size_t& rows) {
  Scene view = scene;
  if (aug.mode != AugMode::None) {
    const StageRanges sr = stage_ranges(aug, stage);
    augment::WorldAugment wa;
    wa.flip_x = rng.uniform01() < aug.flip_probability;
    wa.rotation = rng.uniform(-sr.world_rot, sr.world_rot);
    wa.scale = rng.uniform(1.0 - sr.world_scale, 1.0 + sr.world_scale);
    view = augment::apply_world_augment(view, wa);
    if (!source_side && (sr.object_rot > 0.0 || sr.object_scale > 0.0)) {
      augment::ObjectAugmentParams op;
      op.yaw_delta = sr.object_rot;
      op.scale_lo = 1.0 - sr.object_scale;
      op.scale_hi = 1.0 + sr.object_scale;
      view = augment::apply_object_augment(view, rng, op);
    }
  }
  if (source_side && aug.ros_enabled) {
    augment::ObjectAugmentParams op;
    op.scale_lo = aug.ros_lo;
    op.scale_hi = aug.ros_hi;
    view = augment::apply_object_augment(view, rng, op);
  }
  for (const geom::Point3& p : view.points) {
    batch.push_back(p.x);
    batch.push_back(p.y);
    batch.push_back(p.z);
    batch.push_back(std::hypot(p.x, p.y));
    ++rows;
  }
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

void PipelineConfig::validate() const {
  if (rounds < 1) throw std::invalid_argument("pipeline: rounds must be >= 1");
  if (refresh_interval < 1) throw std::invalid_argument("pipeline: refresh_interval must be >= 1");
  if (jobs < 1) throw std::invalid_argument("pipeline: jobs must be >= 1");
  if (diag_scenes < 0) throw std::invalid_argument("pipeline: diag_scenes must be >= 0");
  if (!(dsnorm_momentum > 0.0 && dsnorm_momentum <= 1.0)) {
    throw std::invalid_argument("pipeline: dsnorm_momentum must lie in (0, 1]");
  }
  if (early_stop_churn < 0.0) throw std::invalid_argument("pipeline: early_stop_churn must be >= 0");
  if (snapshot_interval < 0) throw std::invalid_argument("pipeline: snapshot_interval must be >= 0");
  if (!(aug.ros_lo > 0.0) || !(aug.ros_hi >= aug.ros_lo)) {
    throw std::invalid_argument("pipeline: need 0 < ros_lo <= ros_hi");
  }
  if (!(aug.ros_residual >= 0.0 && aug.ros_residual <= 1.0)) {
    throw std::invalid_argument("pipeline: ros_residual must lie in [0, 1]");
  }
  if (!(aug.flip_probability >= 0.0 && aug.flip_probability <= 1.0)) {
    throw std::invalid_argument("pipeline: flip_probability must lie in [0, 1]");
  }
  ensemble.validate();
  triplet.validate();
  noise.validate();
  aug.schedule.validate();
  if (!(improve.floor >= 0.0 && improve.floor <= 1.0)) {
    throw std::invalid_argument("pipeline: improve floor must lie in [0, 1]");
  }
}

simdet::NoiseModel pretrain_surrogate(const std::vector<Scene>& source,
                                      const PipelineConfig& config) {
  config.validate();
  if (source.empty()) {
    throw std::invalid_argument("pretrain_surrogate: need at least one source scene");
  }
  simdet::NoiseModel model = config.noise;
  if (config.aug.ros_enabled) {
    for (double& mu : model.size_mu) mu = 1.0 + (mu - 1.0) * config.aug.ros_residual;
  }
  return model;
}

RoundReport run_round(PipelineState& state, int round, const std::vector<Scene>& source,
                      const std::vector<Scene>& target, const PipelineConfig& config) {
  config.validate();
  if (round < 1) throw std::invalid_argument("run_round: round must be >= 1");
  if (state.memories.size() != target.size()) {
    throw std::invalid_argument("run_round: memory/scene count mismatch");
  }

  const simdet::NoiseModel model_k = state.model.at_round(round);
  const bool refresh = (round - 1) % config.refresh_interval == 0;
  const int stage =
      config.aug.mode == AugMode::Normal
          ? 1
          : (config.aug.mode == AugMode::Strong
                 ? config.aug.schedule.stages
                 : augment::cda_stage_for_round(round, config.rounds, config.aug.schedule.stages));

  // Label generation and memory update, parallelizable across scenes
  // because every stream is derived from (seed, scene_id, round).
  std::vector<memory::SceneMemory> updated(target.size());
  auto update_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const Scene& scene = target[i];
      const memory::SceneMemory& old = state.memories[i];
      if (!refresh) {
        updated[i] = old;
        updated[i].round = old.round + 1;
        continue;
      }
      Rng rng = scene_rng(config.seed, scene.scene_id, round_salt(round, kPhaseDetectTarget));
      const auto dets = simdet::detect(scene, model_k, rng);
      auto proxies = scoring::triplet_partition(dets, config.triplet);
      if (config.mev_enabled) {
        updated[i] = memory::update_memory(old, {scene.scene_id, std::move(proxies)},
                                           config.ensemble);
      } else {
        updated[i] = {scene.scene_id, old.round + 1, std::move(proxies)};
      }
    }
  };
  if (config.jobs <= 1 || target.size() < 2) {
    update_range(0, target.size());
  } else {
    const std::size_t n_jobs = std::min<std::size_t>(config.jobs, target.size());
    const std::size_t chunk = (target.size() + n_jobs - 1) / n_jobs;
    std::vector<std::future<void>> futs;
    for (std::size_t j = 0; j < n_jobs; ++j) {
      const std::size_t lo = j * chunk;
      const std::size_t hi = std::min(target.size(), lo + chunk);
      if (lo >= hi) break;
      futs.push_back(std::async(std::launch::async, update_range, lo, hi));
    }
    for (auto& f : futs) f.get();
  }

  RoundReport report;
  report.round = round;
  report.cda_stage = stage;

  std::size_t total_before = 0, total_after = 0, total_common = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    std::size_t common = 0;
    entry_churn(state.memories[i].entries, updated[i].entries, &common);
    total_before += state.memories[i].entries.size();
    total_after += updated[i].entries.size();
    total_common += common;
  }
  const std::size_t total = total_before + total_after;
  report.memory_churn =
      total == 0 ? 0.0 : static_cast<double>(total - 2 * total_common) / static_cast<double>(total);
  state.memories = std::move(updated);

  for (const auto& mem : state.memories) {
    for (const auto& e : mem.entries) {
      if (e.state == scoring::BoxState::Positive) {
        report.positive_count += 1;
      } else {
        report.ignored_count += 1;
      }
    }
  }

  report.quality = evalkit::quality_report(state.memories, target, config.eval);

  // Training diagnostics on a rotating window of scenes: detection losses
  // against this round's labels, and domain-normalized point statistics of
  // the augmented views.
  LossAccum tgt_acc, src_acc;
  std::vector<double> tgt_batch, src_batch;
  std::size_t tgt_rows = 0, src_rows = 0;
  for (std::size_t i : diag_indices(config.diag_scenes, target.size(), round)) {
    const Scene& scene = target[i];
    Rng det_rng = scene_rng(config.seed, scene.scene_id, round_salt(round, kPhaseDetectTarget));
    const auto dets = simdet::detect(scene, model_k, det_rng);
    std::vector<GtObject> labels;
    for (const auto& e : state.memories[i].entries) {
      if (e.state == scoring::BoxState::Positive) labels.push_back({e.box, e.class_id});
    }
    accumulate_losses(dets, labels, tgt_acc);
    Rng aug_rng = scene_rng(config.seed, scene.scene_id, round_salt(round, kPhaseTrainTarget));
    append_train_view(scene, aug_rng, config.aug, stage, false, tgt_batch, tgt_rows);
  }
  for (std::size_t i : diag_indices(config.diag_scenes, source.size(), round)) {
    const Scene& scene = source[i];
    Rng det_rng = scene_rng(config.seed, scene.scene_id, round_salt(round, kPhaseDetectSource));
    const auto dets = simdet::detect(scene, model_k.without_size_bias(), det_rng);
    accumulate_losses(dets, scene.gt, src_acc);
    Rng aug_rng = scene_rng(config.seed, scene.scene_id, round_salt(round, kPhaseTrainSource));
    append_train_view(scene, aug_rng, config.aug, stage, true, src_batch, src_rows);
  }

  const losses::DetectionLossTerms tgt_terms = tgt_acc.terms();
  report.loss.cls = tgt_terms.cls;
  report.loss.reg = tgt_terms.reg;
  report.loss.dir = tgt_terms.dir;
  report.loss.iou = tgt_terms.iou;
  report.loss.det_target = losses::detection_loss(tgt_terms, config.loss_weights);
  report.loss.det_source = losses::detection_loss(src_acc.terms(), config.loss_weights);
  report.loss.overall =
      losses::overall_loss(report.loss.det_source, report.loss.det_target, config.loss_weights);

  if (src_rows > 0) state.norm.forward_train(src_batch, src_rows, Domain::Source);
  if (tgt_rows > 0) state.norm.forward_train(tgt_batch, tgt_rows, Domain::Target);
  if (state.norm.has_stats(Domain::Source)) {
    report.norm.src_mean = mean_of(state.norm.running_mean(Domain::Source));
    report.norm.src_var = mean_of(state.norm.running_var(Domain::Source));
  }
  if (state.norm.has_stats(Domain::Target)) {
    report.norm.tgt_mean = mean_of(state.norm.running_mean(Domain::Target));
    report.norm.tgt_var = mean_of(state.norm.running_var(Domain::Target));
  }

  state.model = simdet::improve_model(state.model, report.quality, config.improve);
  return report;
}

RunResult run(const std::vector<Scene>& source, const std::vector<Scene>& target,
              const PipelineConfig& config, const RoundSink& sink) {
  config.validate();
  {
    std::set<std::string> ids;
    for (const Scene& s : target) {
      if (!ids.insert(s.scene_id).second) {
        throw std::invalid_argument("run: duplicate target scene_id " + s.scene_id);
      }
    }
  }

  PipelineState state;
  state.model = pretrain_surrogate(source, config);
  state.norm = dsnorm::DomainNorm(4, config.dsnorm_momentum);
  state.memories.reserve(target.size());
  for (const Scene& s : target) state.memories.push_back({s.scene_id, 0, {}});

  RunResult result;
  for (int k = 1; k <= config.rounds; ++k) {
    const RoundReport report = run_round(state, k, source, target, config);
    result.reports.push_back(report);
    if (sink) sink(report, state.memories);
    if (config.early_stop_churn > 0.0 && report.memory_churn < config.early_stop_churn) break;
  }
  result.final_memories = std::move(state.memories);
  return result;
}

}  // namespace plsim::pipeline
