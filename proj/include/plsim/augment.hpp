#pragma once

#include <string>
#include <utility>
#include <vector>

#include "plsim/geom.hpp"
#include "plsim/rng.hpp"
#include "plsim/scene.hpp"

namespace plsim::augment {

struct ScaleFactors {
  double r_l = 1.0;
  double r_w = 1.0;
  double r_h = 1.0;
};

// Scale an object and the points on it about the box center, per-axis in the
// box frame: each point is mapped to local coordinates, multiplied by the
// factors, and mapped back with the original center and heading. Pre: every
// point lies inside the box (inclusive); factors positive. Relative position
// inside the box is preserved exactly.
std::pair<std::vector<geom::Point3>, geom::OrientedBox> scale_object(
    const std::vector<geom::Point3>& points, const geom::OrientedBox& box,
    const ScaleFactors& factors);

// Rotate an object and its points about the box center in the ground plane.
std::pair<std::vector<geom::Point3>, geom::OrientedBox> rotate_object(
    const std::vector<geom::Point3>& points, const geom::OrientedBox& box, double angle);

// Independent per-axis factors uniform in [lo, hi]. lo == hi is allowed and
// yields exact factors (lo = hi = 1 is the identity).
ScaleFactors sample_scale_factors(Rng& rng, double lo, double hi);

enum class AugKind { Rotation, Scaling };

struct AugEntry {
  std::string name;
  AugKind kind = AugKind::Rotation;
  double delta0 = 0.0;  // stage-1 intensity; must be >= 0 (> 0 to be useful)
};

// Curriculum schedule: intensity grows geometrically per stage,
// delta_s = delta0 * rho^(s-1), stages numbered 1..stages.
struct AugSchedule {
  std::vector<AugEntry> entries;
  double rho = 1.2;
  int stages = 1;

  void validate() const;  // throws std::invalid_argument
};

double cda_intensity(const AugSchedule& schedule, std::size_t aug_index, int stage);

// Sampling interval for one augmentation at one stage: rotations draw from
// [-delta, delta], scalings from [1 - delta, 1 + delta].
std::pair<double, double> cda_sampling_range(const AugSchedule& schedule, std::size_t aug_index,
                                             int stage);

// Map a 1-based pipeline round onto a 1-based stage, splitting `total_rounds`
// evenly; the last stage absorbs the remainder.
int cda_stage_for_round(int round, int total_rounds, int stages);

struct WorldAugment {
  bool flip_x = false;     // mirror across the x axis (y -> -y)
  double rotation = 0.0;   // about the origin, radians
  double scale = 1.0;      // global, must be > 0
};

// Apply flip, then rotation, then scaling to every point and box. Pairwise
// overlap relations between boxes are preserved.
Scene apply_world_augment(const Scene& scene, const WorldAugment& aug);

struct ObjectAugmentParams {
  double yaw_delta = 0.0;  // per-object rotation drawn from [-yaw_delta, yaw_delta]
  double scale_lo = 1.0;   // per-axis factors drawn from [scale_lo, scale_hi]
  double scale_hi = 1.0;
};

// Per-object rotation followed by per-object scaling. Each point belongs to
// at most one object (first containing box in gt order wins); points outside
// every box are untouched. Draw order per box: angle, then r_l, r_w, r_h.
Scene apply_object_augment(const Scene& scene, Rng& rng, const ObjectAugmentParams& params);

}  // namespace plsim::augment
