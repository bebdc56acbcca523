#include <doctest.h>

#include <cmath>
#include <vector>

#include "plsim/common.hpp"
#include "plsim/evalkit.hpp"

using namespace plsim;
using evalkit::EvalConfig;
using evalkit::EvalFrame;
using evalkit::IouMode;
using geom::OrientedBox;
using scoring::Detection;

namespace {

Detection pred(const OrientedBox& box, double p, int class_id = 0) {
  Detection d;
  d.box = box;
  d.class_id = class_id;
  d.p = p;
  return d;
}

OrientedBox cube_at(double x, double y = 0.0) { return OrientedBox(x, y, 0.5, 1, 1, 1, 0); }

}  // namespace

TEST_SUITE("evalkit") {

TEST_CASE("golden interpolated AP on two objects and three predictions") {
  // Ranked by score: hit, miss, hit. The precision envelope is 1 on the
  // first half of the recall axis and 2/3 on the second: AP = 5/6.
  EvalFrame frame;
  frame.gt = {{cube_at(0), 0}, {cube_at(10), 0}};
  frame.predictions = {pred(cube_at(0), 0.9), pred(cube_at(5), 0.8), pred(cube_at(10), 0.7)};
  const auto ap = evalkit::average_precision({frame}, 0, 0.5, IouMode::ThreeD);
  REQUIRE(ap.has_value());
  CHECK(*ap == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("perfect predictions give AP exactly 1") {
  EvalFrame frame;
  for (int i = 0; i < 5; ++i) {
    frame.gt.push_back({cube_at(3.0 * i), 0});
    frame.predictions.push_back(pred(cube_at(3.0 * i), 1.0 - 0.1 * i));
  }
  const auto ap = evalkit::average_precision({frame}, 0, 0.5, IouMode::ThreeD);
  REQUIRE(ap.has_value());
  CHECK(*ap == 1.0);
}

TEST_CASE("missing detections and missing ground truth") {
  EvalFrame frame;
  frame.gt = {{cube_at(0), 0}};
  CHECK(evalkit::average_precision({frame}, 0, 0.5, IouMode::ThreeD) == 0.0);
  // A class with predictions but no ground truth anywhere has no defined AP.
  frame.predictions = {pred(cube_at(0), 0.9, 1)};
  CHECK_FALSE(evalkit::average_precision({frame}, 1, 0.5, IouMode::ThreeD).has_value());
}

TEST_CASE("ranking pools across frames") {
  // A confident false positive in one frame dents precision for everything
  // ranked below it, which only pooled ranking captures.
  EvalFrame f1, f2;
  f1.gt = {{cube_at(0), 0}};
  f1.predictions = {pred(cube_at(50), 0.95)};  // confident miss
  f2.gt = {{cube_at(0), 0}};
  f2.predictions = {pred(cube_at(0), 0.9)};
  const auto ap = evalkit::average_precision({f1, f2}, 0, 0.5, IouMode::ThreeD);
  REQUIRE(ap.has_value());
  // Envelope: recall 0.5 reached at precision 1/2; nothing reaches recall 1.
  CHECK(*ap == doctest::Approx(0.5 * 20.0 / 40.0).epsilon(1e-12));
}

TEST_CASE("greedy matching respects score order and claims") {
  EvalConfig cfg;
  const std::vector<GtObject> gt = {{cube_at(0), 0}};
  const std::vector<Detection> preds = {pred(cube_at(0.05), 0.6), pred(cube_at(0.0), 0.9)};
  const auto m = evalkit::match_tp(preds, gt, cfg, IouMode::ThreeD);
  REQUIRE(m.pairs.size() == 1);
  CHECK(m.pairs[0].first == 1);  // the stronger prediction claimed it first
  REQUIRE(m.false_positives.size() == 1);
  CHECK(m.false_positives[0] == 0);
  CHECK(m.false_negatives.empty());
}

TEST_CASE("class confusion is a false positive plus a false negative") {
  EvalConfig cfg;
  const std::vector<GtObject> gt = {{cube_at(0), 0}};
  const auto m = evalkit::match_tp({pred(cube_at(0), 0.9, 1)}, gt, cfg, IouMode::ThreeD);
  CHECK(m.pairs.empty());
  CHECK(m.false_positives.size() == 1);
  CHECK(m.false_negatives.size() == 1);
}

TEST_CASE("per-class overlap thresholds are honored") {
  EvalConfig cfg;
  cfg.class_iou_threshold[0] = 0.7;
  // Offset 0.2: IoU (1-0.2)/(1+0.2) = 2/3, under the 0.7 bar.
  const std::vector<GtObject> gt = {{cube_at(0), 0}};
  const auto m = evalkit::match_tp({pred(cube_at(0.2), 0.9)}, gt, cfg, IouMode::ThreeD);
  CHECK(m.pairs.empty());
  cfg.class_iou_threshold[0] = 0.5;
  const auto m2 = evalkit::match_tp({pred(cube_at(0.2), 0.9)}, gt, cfg, IouMode::ThreeD);
  CHECK(m2.pairs.size() == 1);
}

TEST_CASE("BEV matching ignores vertical misses") {
  EvalConfig cfg;
  const std::vector<GtObject> gt = {{cube_at(0), 0}};
  const Detection floated = pred(OrientedBox(0, 0, 5.0, 1, 1, 1, 0), 0.9);
  CHECK(evalkit::match_tp({floated}, gt, cfg, IouMode::ThreeD).pairs.empty());
  CHECK(evalkit::match_tp({floated}, gt, cfg, IouMode::Bev).pairs.size() == 1);
}

TEST_CASE("error decomposition on a known offset") {
  const OrientedBox gt(0, 0, 0.85, 4, 2, 1.7, 0.5);
  const OrientedBox moved(0.3, 0.4, 0.85, 4, 2, 1.7, 0.7);
  const auto e = evalkit::error_decomposition({{moved, gt}});
  REQUIRE(e.ate.has_value());
  CHECK(*e.ate == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(*e.aoe == doctest::Approx(0.2).epsilon(1e-9));
  CHECK(*e.ase == doctest::Approx(0.0).scale(1).epsilon(1e-9));  // same size: no scale error
  CHECK(e.tp_count == 1);
}

TEST_CASE("orientation error wraps across the branch cut") {
  const OrientedBox a(0, 0, 0.5, 4, 2, 1, kPi - 0.1);
  const OrientedBox b(0, 0, 0.5, 4, 2, 1, -kPi + 0.1);
  const auto e = evalkit::error_decomposition({{a, b}});
  CHECK(*e.aoe == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("scale error for a uniformly inflated box") {
  // 1.2x in every dimension: aligned IoU is 1/1.728.
  const OrientedBox gt(3, 4, 0.85, 4.0, 2.0, 1.7, 0.3);
  const OrientedBox fat(3.3, 4.2, 0.9, 4.8, 2.4, 2.04, 0.5);  // offsets must not matter
  const auto e = evalkit::error_decomposition({{fat, gt}});
  CHECK(*e.ase == doctest::Approx(1.0 - 1.0 / 1.728).epsilon(1e-9));
}

TEST_CASE("empty matches decompose to nothing") {
  const auto e = evalkit::error_decomposition({});
  CHECK_FALSE(e.ate.has_value());
  CHECK_FALSE(e.ase.has_value());
  CHECK_FALSE(e.aoe.has_value());
  CHECK(e.tp_count == 0);
}

TEST_CASE("quality report counts unlabeled scenes as misses") {
  EvalConfig cfg;
  Scene with_labels, without_labels;
  with_labels.scene_id = "a";
  with_labels.gt = {{cube_at(0), 0}};
  without_labels.scene_id = "b";
  without_labels.gt = {{cube_at(0), 0}, {cube_at(5), 0}};

  memory::SceneMemory m;
  m.scene_id = "a";
  m.entries.push_back({cube_at(0), 0, 0.9, scoring::BoxState::Positive, 0});
  // Ignored entries must not be scored as predictions.
  m.entries.push_back({cube_at(5), 0, 0.4, scoring::BoxState::Ignored, 0});

  const auto q = evalkit::quality_report({m}, {with_labels, without_labels}, cfg);
  REQUIRE(q.per_class.count(0) == 1);
  const auto& c = q.per_class.at(0);
  CHECK(c.tp == 1);
  CHECK(c.fp == 0);
  CHECK(c.fn == 2);
  REQUIRE(c.ap_3d.has_value());
  // Single hit at recall 1/3: the 13 interpolation points at or below it
  // score precision 1, the rest score 0.
  CHECK(*c.ap_3d == doctest::Approx(13.0 / 40.0).epsilon(1e-9));
}

}  // TEST_SUITE
