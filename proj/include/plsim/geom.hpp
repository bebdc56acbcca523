#pragma once

#include <cstddef>
#include <vector>

namespace plsim::geom {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

// 7-DoF upright box: center, extents (length along heading, width lateral,
// height vertical), yaw about +z. Construction validates extents and wraps
// yaw to (-pi, pi]; every box in the system goes through this constructor.
struct OrientedBox {
  double cx = 0.0, cy = 0.0, cz = 0.0;
  double l = 1.0, w = 1.0, h = 1.0;
  double yaw = 0.0;

  OrientedBox() = default;
  OrientedBox(double cx, double cy, double cz, double l, double w, double h, double yaw);

  double bev_area() const { return l * w; }
  double volume() const { return l * w * h; }
};

// Box-local frame: axes along length/width/height, origin at the center.
Point3 world_to_object(const Point3& p, const OrientedBox& box);
Point3 object_to_world(const Point3& p, const OrientedBox& box);

// Inclusive: points exactly on a face count as inside.
bool contains(const OrientedBox& box, const Point3& p);

// Rotated-rectangle overlap in the ground plane, computed by
// Sutherland-Hodgman polygon clipping. Intersection areas below 1e-12 m^2
// are snapped to zero; results are clamped to [0, 1].
double iou_bev(const OrientedBox& a, const OrientedBox& b);

// BEV intersection times vertical overlap over the union of volumes.
double iou_3d(const OrientedBox& a, const OrientedBox& b);

// Greedy non-maximum suppression: highest score first, drop any box whose
// 3D IoU with an already kept box exceeds the threshold. Ties in score are
// broken by input position, and kept indices come back sorted by rank.
std::vector<std::size_t> nms_indices(const std::vector<OrientedBox>& boxes,
                                     const std::vector<double>& scores,
                                     double iou_threshold);

struct ScoredBox {
  OrientedBox box;
  double score = 0.0;
};

std::vector<ScoredBox> nms(const std::vector<ScoredBox>& boxes, double iou_threshold);

}  // namespace plsim::geom
