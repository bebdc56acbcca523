#pragma once

#include <array>
#include <string>
#include <vector>

#include "plsim/evalkit.hpp"
#include "plsim/rng.hpp"
#include "plsim/scene.hpp"
#include "plsim/scoring.hpp"

namespace plsim::simdet {

struct Region {
  double x_min = -40.0, x_max = 40.0;
  double y_min = -40.0, y_max = 40.0;
};

struct ClassSpec {
  std::string name;
  int count_min = 0;
  int count_max = 0;
  std::array<double, 3> size_mean{4.0, 1.8, 1.6};   // l, w, h
  std::array<double, 3> size_sigma{0.0, 0.0, 0.0};  // clamped to +-50% of the mean
  double points_ref = 200.0;  // surface points for an object at ref_range
  double ref_range = 10.0;    // beyond this, point count falls off as 1/r^2
};

struct SceneSpec {
  Region region;
  std::vector<ClassSpec> classes;
  int clutter_min = 50;
  int clutter_max = 150;
  double min_gap_iou = 0.1;    // max BEV overlap allowed between placed objects
  int max_place_retries = 100;
};

// Deterministic synthetic scene: boxes sit on the ground plane (z = 0),
// object points are sampled on box faces with a small inward margin so they
// stay strictly inside the box after 1 mm quantization, clutter points sit
// near the ground. Throws std::runtime_error if placement keeps colliding.
Scene generate_scene(Rng& rng, const SceneSpec& spec, const std::string& scene_id, Domain domain);

// Error model of the frozen detector on one domain. Score calibration is
// "honest plus noise": both confidence and the predicted IoU are the true
// post-perturbation IoU plus offset and Gaussian noise, clamped to [0, 1].
struct NoiseModel {
  std::array<double, 3> translation_sigma{0.0, 0.0, 0.0};
  std::array<double, 3> size_mu{1.0, 1.0, 1.0};  // multiplicative size bias (domain gap)
  std::array<double, 3> size_sigma{0.0, 0.0, 0.0};
  double yaw_sigma = 0.0;
  double score_sigma = 0.0;  // confidence noise
  double iou_sigma = 0.0;    // predicted-IoU noise
  double score_offset = 0.0;

  // Sinusoidal per-round offset added to both calibrations, modeling an
  // unstable detector whose output quality swings between rounds.
  double osc_amp = 0.0;
  int osc_period = 4;

  // Misses: p_miss = fn_scale / (1 + exp((points_in_box - fn_midpoint) / fn_slope)).
  double fn_scale = 0.0;
  double fn_midpoint = 8.0;
  double fn_slope = 3.0;

  // Hallucinations: Poisson count per scene, placed uniformly in fp_region.
  double fp_rate = 0.0;
  double fp_score_min = 0.1;
  double fp_score_max = 0.5;
  std::array<double, 3> fp_size_mean{4.0, 1.8, 1.6};
  std::array<double, 3> fp_size_sigma{0.8, 0.3, 0.25};
  Region fp_region;
  int n_classes = 1;

  double detector_nms_iou = 0.1;  // final suppression pass; <= 0 disables

  NoiseModel at_round(int round) const;  // applies the oscillation phase
  NoiseModel without_size_bias() const;  // the detector as seen on its own domain
  void validate() const;                 // throws std::invalid_argument
};

// Run the frozen detector on a scene: drop objects by the miss model,
// perturb survivors, append hallucinations, suppress overlaps. A zero-noise
// model reproduces the ground truth exactly with p = u = 1.
std::vector<scoring::Detection> detect(const Scene& scene, const NoiseModel& model, Rng& rng);

struct ImproveKnobs {
  double floor = 0.5;  // fraction of noise that remains at AP3D = 1
};

// Better pseudo labels shrink the noise: every sigma plus the FP/FN rates
// are multiplied by 1 - (1 - floor) * mean(AP3D). Size bias and oscillation
// are left alone — those model effects training alone does not fix.
NoiseModel improve_model(const NoiseModel& model, const evalkit::QualityReport& quality,
                         const ImproveKnobs& knobs);

}  // namespace plsim::simdet
