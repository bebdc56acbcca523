#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "plsim/augment.hpp"
#include "plsim/dsnorm.hpp"
#include "plsim/evalkit.hpp"
#include "plsim/losses.hpp"
#include "plsim/memory.hpp"
#include "plsim/scene.hpp"
#include "plsim/scoring.hpp"
#include "plsim/simdet.hpp"

namespace plsim::pipeline {

enum class AugMode { None, Normal, Strong, Curriculum };

struct AugmentConfig {
  AugMode mode = AugMode::Curriculum;
  augment::AugSchedule schedule;  // world/object rotation+scaling entries
  double flip_probability = 0.5;

  // Object-scale augmentation used during pretraining and in every round.
  bool ros_enabled = true;
  double ros_lo = 0.7;
  double ros_hi = 1.1;
  // How much of the size bias survives pretraining with scaling enabled.
  double ros_residual = 0.25;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  int rounds = 10;
  int refresh_interval = 1;  // rounds between label regenerations
  int jobs = 1;

  bool mev_enabled = true;  // off: memory is replaced by the fresh proxies
  memory::EnsembleConfig ensemble;
  scoring::TripletConfig triplet;
  AugmentConfig aug;
  simdet::NoiseModel noise;
  simdet::ImproveKnobs improve;
  losses::LossWeights loss_weights;
  evalkit::EvalConfig eval;

  int diag_scenes = 8;           // scenes sampled per round for loss/norm diagnostics
  double dsnorm_momentum = 0.1;
  double early_stop_churn = 0.0;  // > 0: stop when churn falls below this
  int snapshot_interval = 0;      // > 0: emit memories every k rounds via the sink

  void validate() const;  // throws std::invalid_argument
};

struct LossDiag {
  double cls = 0.0, reg = 0.0, dir = 0.0, iou = 0.0;
  double det_source = 0.0, det_target = 0.0, overall = 0.0;
};

struct NormDiag {
  double src_mean = 0.0, src_var = 1.0;  // channel-averaged running stats
  double tgt_mean = 0.0, tgt_var = 1.0;
};

struct RoundReport {
  int round = 0;
  int cda_stage = 1;
  long positive_count = 0;
  long ignored_count = 0;
  double memory_churn = 0.0;  // fraction of entries that changed this round
  evalkit::QualityReport quality;
  LossDiag loss;
  NormDiag norm;
};

struct PipelineState {
  simdet::NoiseModel model;
  std::vector<memory::SceneMemory> memories;  // parallel to the target scene list
  dsnorm::DomainNorm norm{4};
};

// The simulator's stand-in for source-domain pretraining: the configured
// base noise model, with the size bias pulled toward 1 when object-scale
// augmentation is on. Requires at least one source scene.
simdet::NoiseModel pretrain_surrogate(const std::vector<Scene>& source,
                                      const PipelineConfig& config);

// One self-training round (1-based `round`): regenerate pseudo labels on
// schedule, update each scene's memory, score the memory against ground
// truth, run the training diagnostics, and let the detector improve.
RoundReport run_round(PipelineState& state, int round, const std::vector<Scene>& source,
                      const std::vector<Scene>& target, const PipelineConfig& config);

using RoundSink =
    std::function<void(const RoundReport&, const std::vector<memory::SceneMemory>&)>;

struct RunResult {
  std::vector<RoundReport> reports;
  std::vector<memory::SceneMemory> final_memories;
};

// Full loop: pretrain, then `rounds` rounds (or until the early-stop churn
// threshold). `sink`, if given, is called after every round.
RunResult run(const std::vector<Scene>& source, const std::vector<Scene>& target,
              const PipelineConfig& config, const RoundSink& sink = nullptr);

}  // namespace plsim::pipeline
