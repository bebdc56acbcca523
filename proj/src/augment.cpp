#include "plsim/augment.hpp"

#include <cmath>
#include <stdexcept>

#include "plsim/common.hpp"

namespace plsim::augment {

std::pair<std::vector<geom::Point3>, geom::OrientedBox> scale_object(
    const std::vector<geom::Point3>& points, const geom::OrientedBox& box,
    const ScaleFactors& f) {
  if (!(f.r_l > 0.0) || !(f.r_w > 0.0) || !(f.r_h > 0.0)) {
    throw std::invalid_argument("scale_object: factors must be positive");
  }
  const geom::OrientedBox scaled(box.cx, box.cy, box.cz, f.r_l * box.l, f.r_w * box.w,
                                 f.r_h * box.h, box.yaw);
  std::vector<geom::Point3> out;
  out.reserve(points.size());
  for (const geom::Point3& p : points) {
    if (!geom::contains(box, p)) {
      throw std::invalid_argument("scale_object: point outside box");
    }
    const geom::Point3 q = geom::world_to_object(p, box);
    out.push_back(geom::object_to_world({f.r_l * q.x, f.r_w * q.y, f.r_h * q.z}, scaled));
  }
  return {std::move(out), scaled};
}

std::pair<std::vector<geom::Point3>, geom::OrientedBox> rotate_object(
    const std::vector<geom::Point3>& points, const geom::OrientedBox& box, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  std::vector<geom::Point3> out;
  out.reserve(points.size());
  for (const geom::Point3& p : points) {
    const double dx = p.x - box.cx, dy = p.y - box.cy;
    out.push_back({box.cx + dx * c - dy * s, box.cy + dx * s + dy * c, p.z});
  }
  const geom::OrientedBox rotated(box.cx, box.cy, box.cz, box.l, box.w, box.h, box.yaw + angle);
  return {std::move(out), rotated};
}

ScaleFactors sample_scale_factors(Rng& rng, double lo, double hi) {
  if (!(lo > 0.0) || !(hi >= lo)) {
    throw std::invalid_argument("sample_scale_factors: need 0 < lo <= hi");
  }
  ScaleFactors f;
  f.r_l = rng.uniform(lo, hi);
  f.r_w = rng.uniform(lo, hi);
  f.r_h = rng.uniform(lo, hi);
  return f;
}

void AugSchedule::validate() const {
  if (!(rho > 0.0)) throw std::invalid_argument("schedule: rho must be positive");
  if (stages < 1) throw std::invalid_argument("schedule: need at least one stage");
  for (const AugEntry& e : entries) {
    if (e.delta0 < 0.0) throw std::invalid_argument("schedule: delta0 must be >= 0");
    if (e.kind == AugKind::Scaling && e.delta0 >= 1.0) {
      throw std::invalid_argument("schedule: scaling delta0 must be < 1");
    }
  }
}

double cda_intensity(const AugSchedule& schedule, std::size_t aug_index, int stage) {
  schedule.validate();
  if (aug_index >= schedule.entries.size()) {
    throw std::out_of_range("cda_intensity: augmentation index out of range");
  }
  if (stage < 1 || stage > schedule.stages) {
    throw std::out_of_range("cda_intensity: stage out of range");
  }
  return schedule.entries[aug_index].delta0 * std::pow(schedule.rho, stage - 1);
}

std::pair<double, double> cda_sampling_range(const AugSchedule& schedule, std::size_t aug_index,
                                             int stage) {
  const double d = cda_intensity(schedule, aug_index, stage);
  if (schedule.entries[aug_index].kind == AugKind::Rotation) return {-d, d};
  if (d >= 1.0) {
    throw std::domain_error("cda_sampling_range: scaling intensity reached 1; lower rho, delta0 or stages");
  }
  return {1.0 - d, 1.0 + d};
}

int cda_stage_for_round(int round, int total_rounds, int stages) {
  if (round < 1 || total_rounds < 1 || round > total_rounds) {
    throw std::out_of_range("cda_stage_for_round: round out of range");
  }
  if (stages < 1) throw std::invalid_argument("cda_stage_for_round: stages must be >= 1");
  const int base = std::max(1, total_rounds / stages);
  const int stage = (round - 1) / base + 1;
  return std::min(stage, stages);
}

namespace {

geom::Point3 transform_point(const geom::Point3& p, const WorldAugment& a, double c, double s) {
  double x = p.x, y = p.y, z = p.z;
  if (a.flip_x) y = -y;
  const double xr = x * c - y * s;
  const double yr = x * s + y * c;
  return {xr * a.scale, yr * a.scale, z * a.scale};
}

}  // namespace

Scene apply_world_augment(const Scene& scene, const WorldAugment& aug) {
  if (!(aug.scale > 0.0)) throw std::invalid_argument("apply_world_augment: scale must be > 0");
  const double c = std::cos(aug.rotation), s = std::sin(aug.rotation);
  Scene out;
  out.scene_id = scene.scene_id;
  out.domain = scene.domain;
  out.points.reserve(scene.points.size());
  for (const geom::Point3& p : scene.points) out.points.push_back(transform_point(p, aug, c, s));
  out.gt.reserve(scene.gt.size());
  for (const GtObject& g : scene.gt) {
    const geom::Point3 ctr =
        transform_point({g.box.cx, g.box.cy, g.box.cz}, aug, c, s);
    double yaw = aug.flip_x ? -g.box.yaw : g.box.yaw;
    yaw += aug.rotation;
    out.gt.push_back({geom::OrientedBox(ctr.x, ctr.y, ctr.z, g.box.l * aug.scale,
                                        g.box.w * aug.scale, g.box.h * aug.scale, yaw),
                      g.class_id});
  }
  return out;
}

Scene apply_object_augment(const Scene& scene, Rng& rng, const ObjectAugmentParams& params) {
  if (!(params.scale_lo > 0.0) || !(params.scale_hi >= params.scale_lo) ||
      params.yaw_delta < 0.0) {
    throw std::invalid_argument("apply_object_augment: bad parameter ranges");
  }
  Scene out = scene;
  std::vector<char> consumed(out.points.size(), 0);
  for (GtObject& g : out.gt) {
    std::vector<std::size_t> inside;
    std::vector<geom::Point3> pts;
    for (std::size_t i = 0; i < out.points.size(); ++i) {
      if (!consumed[i] && geom::contains(g.box, out.points[i])) {
        inside.push_back(i);
        pts.push_back(out.points[i]);
        consumed[i] = 1;
      }
    }
    const double angle = rng.uniform(-params.yaw_delta, params.yaw_delta);
    const ScaleFactors factors = sample_scale_factors(rng, params.scale_lo, params.scale_hi);
    auto [rot_pts, rot_box] = rotate_object(pts, g.box, angle);
    auto [fin_pts, fin_box] = scale_object(rot_pts, rot_box, factors);
    g.box = fin_box;
    for (std::size_t k = 0; k < inside.size(); ++k) out.points[inside[k]] = fin_pts[k];
  }
  return out;
}

}  // namespace plsim::augment
