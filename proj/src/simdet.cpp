#include "plsim/simdet.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "plsim/common.hpp"

namespace plsim::simdet {
namespace {

double quantize(double v, double step) { return std::round(v / step) * step; }

constexpr double kSurfaceMargin = 2e-3;  // keeps quantized surface points inside the box
constexpr double kPointStep = 1e-3;
constexpr double kBoxStep = 1e-6;

geom::Point3 quantize_point(const geom::Point3& p) {
  return {quantize(p.x, kPointStep), quantize(p.y, kPointStep), quantize(p.z, kPointStep)};
}

double clamp(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

// Draw a point on one of the six faces, area-weighted, pulled inward by the
// margin on every axis.
geom::Point3 sample_surface_point(Rng& rng, const geom::OrientedBox& box) {
  const double hl = 0.5 * box.l - kSurfaceMargin;
  const double hw = 0.5 * box.w - kSurfaceMargin;
  const double hh = 0.5 * box.h - kSurfaceMargin;
  const double a_lw = box.l * box.w, a_lh = box.l * box.h, a_wh = box.w * box.h;
  const double total = 2.0 * (a_lw + a_lh + a_wh);
  const double pick = rng.uniform(0.0, total);
  const double u = rng.uniform(-1.0, 1.0);
  const double v = rng.uniform(-1.0, 1.0);
  geom::Point3 local;
  if (pick < 2.0 * a_lw) {
    local = {u * hl, v * hw, pick < a_lw ? hh : -hh};
  } else if (pick < 2.0 * (a_lw + a_lh)) {
    local = {u * hl, pick < 2.0 * a_lw + a_lh ? hw : -hw, v * hh};
  } else {
    local = {pick < 2.0 * (a_lw + a_lh) + a_wh ? hl : -hl, u * hw, v * hh};
  }
  return geom::object_to_world(local, box);
}

double sampled_extent(Rng& rng, double mean, double sigma) {
  return clamp(rng.normal(mean, sigma), 0.5 * mean, 1.5 * mean);
}

}  // namespace

Scene generate_scene(Rng& rng, const SceneSpec& spec, const std::string& scene_id,
                     Domain domain) {
  for (const ClassSpec& cs : spec.classes) {
    if (cs.count_min < 0 || cs.count_max < cs.count_min) {
      throw std::invalid_argument("generate_scene: bad object count range");
    }
    for (double m : cs.size_mean) {
      if (!(m > 4.0 * kSurfaceMargin)) {
        throw std::invalid_argument("generate_scene: class extent too small");
      }
    }
  }
  if (spec.clutter_min < 0 || spec.clutter_max < spec.clutter_min) {
    throw std::invalid_argument("generate_scene: bad clutter range");
  }

  Scene scene;
  scene.scene_id = scene_id;
  scene.domain = domain;

  for (std::size_t ci = 0; ci < spec.classes.size(); ++ci) {
    const ClassSpec& cs = spec.classes[ci];
    const int count =
        cs.count_min + static_cast<int>(rng.bounded(
                           static_cast<std::uint64_t>(cs.count_max - cs.count_min + 1)));
    for (int k = 0; k < count; ++k) {
      bool placed = false;
      for (int attempt = 0; attempt < spec.max_place_retries && !placed; ++attempt) {
        const double cx = quantize(rng.uniform(spec.region.x_min, spec.region.x_max), kBoxStep);
        const double cy = quantize(rng.uniform(spec.region.y_min, spec.region.y_max), kBoxStep);
        const double yaw = rng.uniform(-kPi, kPi);
        const double l = quantize(sampled_extent(rng, cs.size_mean[0], cs.size_sigma[0]), kBoxStep);
        const double w = quantize(sampled_extent(rng, cs.size_mean[1], cs.size_sigma[1]), kBoxStep);
        const double h = quantize(sampled_extent(rng, cs.size_mean[2], cs.size_sigma[2]), kBoxStep);
        const geom::OrientedBox box(cx, cy, quantize(0.5 * h, kBoxStep), l, w, h, yaw);
        bool collides = false;
        for (const GtObject& g : scene.gt) {
          if (geom::iou_bev(box, g.box) >= spec.min_gap_iou) {
            collides = true;
            break;
          }
        }
        if (!collides) {
          scene.gt.push_back({box, static_cast<int>(ci)});
          placed = true;
        }
      }
      if (!placed) {
        throw std::runtime_error("generate_scene: could not place object; region too crowded");
      }
    }
  }

  // Surface points, density falling off with range.
  for (const GtObject& g : scene.gt) {
    const ClassSpec& cs = spec.classes[static_cast<std::size_t>(g.class_id)];
    const double r = std::hypot(g.box.cx, g.box.cy);
    const double fade = r <= cs.ref_range ? 1.0 : (cs.ref_range / r) * (cs.ref_range / r);
    const int n = static_cast<int>(std::llround(cs.points_ref * fade));
    for (int i = 0; i < n; ++i) {
      scene.points.push_back(quantize_point(sample_surface_point(rng, g.box)));
    }
  }

  const int clutter =
      spec.clutter_min + static_cast<int>(rng.bounded(
                             static_cast<std::uint64_t>(spec.clutter_max - spec.clutter_min + 1)));
  for (int i = 0; i < clutter; ++i) {
    scene.points.push_back(quantize_point({rng.uniform(spec.region.x_min, spec.region.x_max),
                                           rng.uniform(spec.region.y_min, spec.region.y_max),
                                           rng.uniform(0.0, 0.25)}));
  }
  return scene;
}

void NoiseModel::validate() const {
  for (double s : translation_sigma) {
    if (s < 0.0) throw std::invalid_argument("noise: translation_sigma must be >= 0");
  }
  for (double s : size_sigma) {
    if (s < 0.0) throw std::invalid_argument("noise: size_sigma must be >= 0");
  }
  for (double m : size_mu) {
    if (!(m > 0.0)) throw std::invalid_argument("noise: size_mu must be > 0");
  }
  if (yaw_sigma < 0.0 || score_sigma < 0.0 || iou_sigma < 0.0 || fn_scale < 0.0 ||
      fn_scale > 1.0 || fp_rate < 0.0 || osc_amp < 0.0) {
    throw std::invalid_argument("noise: negative rate or sigma");
  }
  if (osc_period < 1) throw std::invalid_argument("noise: osc_period must be >= 1");
  if (!(fn_slope > 0.0)) throw std::invalid_argument("noise: fn_slope must be > 0");
  if (!(fp_score_min <= fp_score_max) || fp_score_min < 0.0 || fp_score_max > 1.0) {
    throw std::invalid_argument("noise: bad fp score range");
  }
  if (n_classes < 1) throw std::invalid_argument("noise: n_classes must be >= 1");
}

NoiseModel NoiseModel::at_round(int round) const {
  NoiseModel m = *this;
  if (osc_amp > 0.0) {
    m.score_offset += osc_amp * std::sin(2.0 * kPi * round / osc_period);
  }
  m.osc_amp = 0.0;
  return m;
}

NoiseModel NoiseModel::without_size_bias() const {
  NoiseModel m = *this;
  m.size_mu = {1.0, 1.0, 1.0};
  return m;
}

std::vector<scoring::Detection> detect(const Scene& scene, const NoiseModel& model, Rng& rng) {
  model.validate();
  std::vector<scoring::Detection> dets;

  for (const GtObject& g : scene.gt) {
    int points_in = 0;
    for (const geom::Point3& p : scene.points) points_in += geom::contains(g.box, p);
    const double p_miss =
        model.fn_scale / (1.0 + std::exp((points_in - model.fn_midpoint) / model.fn_slope));
    const bool miss = rng.uniform01() < p_miss;
    const double dx = rng.normal(0.0, model.translation_sigma[0]);
    const double dy = rng.normal(0.0, model.translation_sigma[1]);
    const double dz = rng.normal(0.0, model.translation_sigma[2]);
    const double sl = model.size_mu[0] * (1.0 + rng.normal(0.0, model.size_sigma[0]));
    const double sw = model.size_mu[1] * (1.0 + rng.normal(0.0, model.size_sigma[1]));
    const double sh = model.size_mu[2] * (1.0 + rng.normal(0.0, model.size_sigma[2]));
    const double dyaw = rng.normal(0.0, model.yaw_sigma);
    const double ep = rng.normal(0.0, model.score_sigma);
    const double eu = rng.normal(0.0, model.iou_sigma);
    if (miss) continue;

    const geom::OrientedBox box(g.box.cx + dx, g.box.cy + dy, g.box.cz + dz,
                                std::max(0.05, g.box.l * sl), std::max(0.05, g.box.w * sw),
                                std::max(0.05, g.box.h * sh), g.box.yaw + dyaw);
    const double true_iou = geom::iou_3d(box, g.box);
    dets.push_back({box, g.class_id, clamp01(true_iou + model.score_offset + ep),
                    clamp01(true_iou + model.score_offset + eu)});
  }

  const int n_fp = rng.poisson(model.fp_rate);
  for (int i = 0; i < n_fp; ++i) {
    const double cx = rng.uniform(model.fp_region.x_min, model.fp_region.x_max);
    const double cy = rng.uniform(model.fp_region.y_min, model.fp_region.y_max);
    const double yaw = rng.uniform(-kPi, kPi);
    const double l = std::max(0.05, rng.normal(model.fp_size_mean[0], model.fp_size_sigma[0]));
    const double w = std::max(0.05, rng.normal(model.fp_size_mean[1], model.fp_size_sigma[1]));
    const double h = std::max(0.05, rng.normal(model.fp_size_mean[2], model.fp_size_sigma[2]));
    const int cls = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(model.n_classes)));
    const double s = rng.uniform(model.fp_score_min, model.fp_score_max);
    const double su = clamp01(s + rng.normal(0.0, model.iou_sigma));
    dets.push_back({geom::OrientedBox(cx, cy, 0.5 * h, l, w, h, yaw), cls, clamp01(s), su});
  }

  if (model.detector_nms_iou > 0.0 && dets.size() > 1) {
    std::vector<geom::OrientedBox> boxes;
    std::vector<double> scores;
    boxes.reserve(dets.size());
    scores.reserve(dets.size());
    for (const auto& d : dets) {
      boxes.push_back(d.box);
      scores.push_back(d.p);
    }
    std::vector<scoring::Detection> kept;
    for (std::size_t i : geom::nms_indices(boxes, scores, model.detector_nms_iou)) {
      kept.push_back(dets[i]);
    }
    dets = std::move(kept);
  }
  return dets;
}

NoiseModel improve_model(const NoiseModel& model, const evalkit::QualityReport& quality,
                         const ImproveKnobs& knobs) {
  if (!(knobs.floor >= 0.0 && knobs.floor <= 1.0)) {
    throw std::invalid_argument("improve_model: floor must lie in [0, 1]");
  }
  double ap_sum = 0.0;
  int ap_n = 0;
  for (const auto& [cls, q] : quality.per_class) {
    if (q.ap_3d) {
      ap_sum += *q.ap_3d;
      ++ap_n;
    }
  }
  const double ap = ap_n ? ap_sum / ap_n : 0.0;
  const double f = 1.0 - (1.0 - knobs.floor) * ap;

  NoiseModel out = model;
  for (double& s : out.translation_sigma) s *= f;
  for (double& s : out.size_sigma) s *= f;
  out.yaw_sigma *= f;
  out.score_sigma *= f;
  out.iou_sigma *= f;
  out.fn_scale *= f;
  out.fp_rate *= f;
  return out;
}

}  // namespace plsim::simdet
