#include "plsim/io.hpp"

#include <array>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <json.hpp>

#include "plsim/common.hpp"

namespace plsim::io {

using nlohmann::json;

ClassMap::ClassMap(std::vector<std::string> names) : names_(std::move(names)) {
  std::set<std::string> seen;
  for (const std::string& n : names_) {
    if (n.empty() || !seen.insert(n).second) {
      throw ConfigError("class names must be unique and non-empty");
    }
  }
}

int ClassMap::id_for(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return static_cast<int>(i);
  }
  throw std::out_of_range("unknown class '" + name + "'");
}

const std::string& ClassMap::name_for(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= names_.size()) {
    throw std::out_of_range("class id out of range");
  }
  return names_[static_cast<std::size_t>(id)];
}

bool ClassMap::has(const std::string& name) const {
  for (const std::string& n : names_) {
    if (n == name) return true;
  }
  return false;
}

namespace {

[[noreturn]] void cfg_fail(const std::string& msg) { throw ConfigError("config: " + msg); }

void check_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) cfg_fail(std::string(where) + " must be an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) cfg_fail("unknown key '" + item.key() + "' in " + where);
  }
}

template <typename T>
void read_field(const json& j, const char* where, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    cfg_fail(std::string("bad value for '") + key + "' in " + where);
  }
}

void read_vec3(const json& j, const char* where, const char* key, std::array<double, 3>& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_array() || it->size() != 3) {
    cfg_fail(std::string("'") + key + "' in " + where + " must be an array of 3 numbers");
  }
  for (std::size_t i = 0; i < 3; ++i) {
    if (!(*it)[i].is_number()) {
      cfg_fail(std::string("'") + key + "' in " + where + " must be an array of 3 numbers");
    }
    out[i] = (*it)[i].get<double>();
  }
}

// ---- data records -------------------------------------------------------

[[noreturn]] void data_fail(const std::string& path, std::size_t line, const std::string& msg) {
  throw DataError(path + ":" + std::to_string(line) + ": " + msg);
}

void data_check_keys(const json& j, const std::string& path, std::size_t line,
                     std::initializer_list<const char*> allowed) {
  if (!j.is_object()) data_fail(path, line, "record must be a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) data_fail(path, line, "unknown key '" + item.key() + "'");
  }
}

geom::OrientedBox parse_box(const json& jb, const std::string& path, std::size_t line) {
  if (!jb.is_array() || jb.size() != 7) {
    data_fail(path, line, "'box' must be an array of 7 numbers");
  }
  double v[7];
  for (std::size_t i = 0; i < 7; ++i) {
    if (!jb[i].is_number()) data_fail(path, line, "'box' must contain only numbers");
    v[i] = jb[i].get<double>();
  }
  if (v[6] < -kPi - 1e-9 || v[6] > kPi + 1e-9) {
    data_fail(path, line, "yaw must lie in (-pi, pi]");
  }
  try {
    return geom::OrientedBox(v[0], v[1], v[2], v[3], v[4], v[5], v[6]);
  } catch (const std::invalid_argument& e) {
    data_fail(path, line, e.what());
  }
}

int parse_class(const json& jc, const ClassMap& classes, const std::string& path,
                std::size_t line) {
  if (!jc.is_string()) data_fail(path, line, "'class' must be a string");
  try {
    return classes.id_for(jc.get<std::string>());
  } catch (const std::out_of_range& e) {
    data_fail(path, line, e.what());
  }
}

json box_to_json(const geom::OrientedBox& b) {
  return json::array({b.cx, b.cy, b.cz, b.l, b.w, b.h, b.yaw});
}

template <typename Fn>
void for_each_record(const std::string& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      data_fail(path, lineno, std::string("invalid JSON: ") + e.what());
    }
    fn(j, lineno);
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  return out;
}

const char* state_name(scoring::BoxState s) {
  return s == scoring::BoxState::Positive ? "positive" : "ignored";
}

}  // namespace

std::vector<Scene> read_scenes_jsonl(const std::string& path, const ClassMap& classes) {
  std::vector<Scene> scenes;
  std::set<std::string> seen;
  for_each_record(path, [&](const json& j, std::size_t line) {
    data_check_keys(j, path, line, {"scene_id", "domain", "points", "gt"});
    Scene s;
    if (!j.contains("scene_id") || !j["scene_id"].is_string()) {
      data_fail(path, line, "missing string 'scene_id'");
    }
    s.scene_id = j["scene_id"].get<std::string>();
    if (!seen.insert(s.scene_id).second) {
      data_fail(path, line, "duplicate scene_id '" + s.scene_id + "'");
    }
    if (!j.contains("domain") || !j["domain"].is_string()) {
      data_fail(path, line, "missing string 'domain'");
    }
    const std::string dom = j["domain"].get<std::string>();
    if (dom == "source") {
      s.domain = Domain::Source;
    } else if (dom == "target") {
      s.domain = Domain::Target;
    } else {
      data_fail(path, line, "'domain' must be \"source\" or \"target\"");
    }
    if (!j.contains("points") || !j["points"].is_array()) {
      data_fail(path, line, "missing array 'points'");
    }
    for (const json& jp : j["points"]) {
      if (!jp.is_array() || jp.size() != 3 || !jp[0].is_number() || !jp[1].is_number() ||
          !jp[2].is_number()) {
        data_fail(path, line, "each point must be an array of 3 numbers");
      }
      s.points.push_back({jp[0].get<double>(), jp[1].get<double>(), jp[2].get<double>()});
    }
    if (!j.contains("gt") || !j["gt"].is_array()) data_fail(path, line, "missing array 'gt'");
    for (const json& jg : j["gt"]) {
      data_check_keys(jg, path, line, {"class", "box"});
      if (!jg.contains("class") || !jg.contains("box")) {
        data_fail(path, line, "gt entries need 'class' and 'box'");
      }
      GtObject g;
      g.class_id = parse_class(jg["class"], classes, path, line);
      g.box = parse_box(jg["box"], path, line);
      s.gt.push_back(g);
    }
    scenes.push_back(std::move(s));
  });
  return scenes;
}

void write_scenes_jsonl(const std::string& path, const std::vector<Scene>& scenes,
                        const ClassMap& classes) {
  std::ofstream out = open_out(path);
  for (const Scene& s : scenes) {
    json j;
    j["scene_id"] = s.scene_id;
    j["domain"] = s.domain == Domain::Source ? "source" : "target";
    json pts = json::array();
    for (const geom::Point3& p : s.points) pts.push_back(json::array({p.x, p.y, p.z}));
    j["points"] = std::move(pts);
    json gts = json::array();
    for (const GtObject& g : s.gt) {
      gts.push_back({{"class", classes.name_for(g.class_id)}, {"box", box_to_json(g.box)}});
    }
    j["gt"] = std::move(gts);
    out << j.dump() << "\n";
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

std::vector<memory::SceneMemory> read_labels_jsonl(const std::string& path,
                                                   const ClassMap& classes) {
  std::vector<memory::SceneMemory> memories;
  std::set<std::string> seen;
  for_each_record(path, [&](const json& j, std::size_t line) {
    data_check_keys(j, path, line, {"scene_id", "round", "labels"});
    memory::SceneMemory m;
    if (!j.contains("scene_id") || !j["scene_id"].is_string()) {
      data_fail(path, line, "missing string 'scene_id'");
    }
    m.scene_id = j["scene_id"].get<std::string>();
    if (!seen.insert(m.scene_id).second) {
      data_fail(path, line, "duplicate scene_id '" + m.scene_id + "'");
    }
    if (!j.contains("round") || !j["round"].is_number_integer()) {
      data_fail(path, line, "missing integer 'round'");
    }
    m.round = j["round"].get<int>();
    if (m.round < 0) data_fail(path, line, "'round' must be >= 0");
    if (!j.contains("labels") || !j["labels"].is_array()) {
      data_fail(path, line, "missing array 'labels'");
    }
    for (const json& jl : j["labels"]) {
      data_check_keys(jl, path, line, {"class", "box", "score", "state", "cnt"});
      scoring::PseudoLabelEntry e;
      if (!jl.contains("class") || !jl.contains("box") || !jl.contains("score") ||
          !jl.contains("state")) {
        data_fail(path, line, "labels need 'class', 'box', 'score' and 'state'");
      }
      e.class_id = parse_class(jl["class"], classes, path, line);
      e.box = parse_box(jl["box"], path, line);
      if (!jl["score"].is_number()) data_fail(path, line, "'score' must be a number");
      e.score = jl["score"].get<double>();
      if (!(e.score >= 0.0 && e.score <= 1.0)) data_fail(path, line, "'score' must lie in [0, 1]");
      const std::string st = jl["state"].is_string() ? jl["state"].get<std::string>() : "";
      if (st == "positive") {
        e.state = scoring::BoxState::Positive;
      } else if (st == "ignored") {
        e.state = scoring::BoxState::Ignored;
      } else {
        data_fail(path, line, "'state' must be \"positive\" or \"ignored\"");
      }
      if (jl.contains("cnt")) {
        if (!jl["cnt"].is_number_integer()) data_fail(path, line, "'cnt' must be an integer");
        e.cnt = jl["cnt"].get<int>();
        if (e.cnt < 0) data_fail(path, line, "'cnt' must be >= 0");
      }
      m.entries.push_back(e);
    }
    memories.push_back(std::move(m));
  });
  return memories;
}

void write_labels_jsonl(const std::string& path, const std::vector<memory::SceneMemory>& memories,
                        const ClassMap& classes) {
  std::ofstream out = open_out(path);
  for (const memory::SceneMemory& m : memories) {
    json j;
    j["scene_id"] = m.scene_id;
    j["round"] = m.round;
    json labels = json::array();
    for (const scoring::PseudoLabelEntry& e : m.entries) {
      labels.push_back({{"class", classes.name_for(e.class_id)},
                        {"box", box_to_json(e.box)},
                        {"score", e.score},
                        {"state", state_name(e.state)},
                        {"cnt", e.cnt}});
    }
    j["labels"] = std::move(labels);
    out << j.dump() << "\n";
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

std::vector<std::pair<std::string, std::vector<scoring::Detection>>> read_predictions_jsonl(
    const std::string& path, const ClassMap& classes) {
  std::vector<std::pair<std::string, std::vector<scoring::Detection>>> out;
  std::set<std::string> seen;
  for_each_record(path, [&](const json& j, std::size_t line) {
    if (!j.is_object() || !j.contains("scene_id") || !j["scene_id"].is_string()) {
      data_fail(path, line, "record needs a string 'scene_id'");
    }
    const std::string id = j["scene_id"].get<std::string>();
    if (!seen.insert(id).second) data_fail(path, line, "duplicate scene_id '" + id + "'");
    std::vector<scoring::Detection> dets;
    if (j.contains("labels")) {
      for (const json& jl : j["labels"]) {
        data_check_keys(jl, path, line, {"class", "box", "score", "state", "cnt"});
        if (!jl.contains("state") || !jl["state"].is_string()) {
          data_fail(path, line, "labels need a string 'state'");
        }
        if (jl["state"].get<std::string>() != "positive") continue;
        scoring::Detection d;
        d.class_id = parse_class(jl["class"], classes, path, line);
        d.box = parse_box(jl["box"], path, line);
        if (!jl.contains("score") || !jl["score"].is_number()) {
          data_fail(path, line, "labels need a numeric 'score'");
        }
        d.p = jl["score"].get<double>();
        if (!(d.p >= 0.0 && d.p <= 1.0)) data_fail(path, line, "'score' must lie in [0, 1]");
        dets.push_back(d);
      }
    } else if (j.contains("gt")) {
      for (const json& jg : j["gt"]) {
        scoring::Detection d;
        if (!jg.contains("class") || !jg.contains("box")) {
          data_fail(path, line, "gt entries need 'class' and 'box'");
        }
        d.class_id = parse_class(jg["class"], classes, path, line);
        d.box = parse_box(jg["box"], path, line);
        d.p = 1.0;
        dets.push_back(d);
      }
    } else {
      data_fail(path, line, "record has neither 'labels' nor 'gt'");
    }
    out.emplace_back(id, std::move(dets));
  });
  return out;
}

// ---- configuration ------------------------------------------------------

RunConfig default_config() {
  RunConfig cfg;
  cfg.seed = 1;

  cfg.dataset.n_source = 100;
  cfg.dataset.n_target = 100;
  cfg.dataset.spec.region = {-40.0, 40.0, -40.0, 40.0};
  cfg.dataset.spec.clutter_min = 50;
  cfg.dataset.spec.clutter_max = 150;
  cfg.dataset.spec.min_gap_iou = 0.1;
  cfg.dataset.spec.max_place_retries = 100;
  cfg.dataset.spec.classes = {
      {"car", 2, 8, {4.7, 1.9, 1.7}, {0.25, 0.08, 0.08}, 220.0, 12.0},
      {"pedestrian", 0, 4, {0.8, 0.6, 1.73}, {0.06, 0.05, 0.08}, 70.0, 8.0},
      {"cyclist", 0, 3, {1.76, 0.6, 1.73}, {0.1, 0.05, 0.08}, 90.0, 8.0},
  };
  cfg.classes = ClassMap({"car", "pedestrian", "cyclist"});

  auto& p = cfg.pipeline;
  p.seed = cfg.seed;
  p.rounds = 10;
  p.refresh_interval = 1;
  p.jobs = 1;
  p.mev_enabled = true;
  p.diag_scenes = 8;
  p.dsnorm_momentum = 0.1;
  p.early_stop_churn = 0.0;
  p.snapshot_interval = 0;

  p.ensemble.variant = memory::EnsembleVariant::Consistency;
  p.ensemble.match_iou_min = 0.1;
  p.ensemble.t_ign = 2;
  p.ensemble.t_rm = 3;
  p.ensemble.voting = true;

  p.triplet.thresholds = {0.6, 0.25};
  p.triplet.phi = 0.3;
  p.triplet.single_threshold = false;

  p.aug.mode = pipeline::AugMode::Curriculum;
  p.aug.schedule.rho = 1.2;
  p.aug.schedule.stages = 3;
  p.aug.schedule.entries = {
      {"world_rotation", augment::AugKind::Rotation, kPi / 16.0},
      {"world_scaling", augment::AugKind::Scaling, 0.05},
      {"object_rotation", augment::AugKind::Rotation, kPi / 16.0},
      {"object_scaling", augment::AugKind::Scaling, 0.05},
  };
  p.aug.flip_probability = 0.5;
  p.aug.ros_enabled = true;
  p.aug.ros_lo = 0.7;
  p.aug.ros_hi = 1.1;
  p.aug.ros_residual = 0.25;

  p.noise.translation_sigma = {0.25, 0.25, 0.08};
  p.noise.size_mu = {1.2, 1.2, 1.2};
  p.noise.size_sigma = {0.04, 0.04, 0.04};
  p.noise.yaw_sigma = 0.06;
  p.noise.score_sigma = 0.08;
  p.noise.iou_sigma = 0.06;
  p.noise.score_offset = 0.0;
  p.noise.osc_amp = 0.0;
  p.noise.osc_period = 4;
  p.noise.fn_scale = 0.9;
  p.noise.fn_midpoint = 8.0;
  p.noise.fn_slope = 3.0;
  p.noise.fp_rate = 1.2;
  p.noise.fp_score_min = 0.15;
  p.noise.fp_score_max = 0.55;
  p.noise.fp_size_mean = {4.5, 1.8, 1.6};
  p.noise.fp_size_sigma = {0.8, 0.3, 0.25};
  p.noise.fp_region = cfg.dataset.spec.region;
  p.noise.n_classes = 3;
  p.noise.detector_nms_iou = 0.1;

  p.improve.floor = 0.5;

  p.loss_weights.alpha_reg = 2.0;
  p.loss_weights.alpha_dir = 0.2;
  p.loss_weights.lambda_src = 1.0;

  p.eval.default_iou_threshold = 0.5;
  p.eval.tp_mode = evalkit::IouMode::ThreeD;
  p.eval.class_iou_threshold = {{0, 0.7}, {1, 0.5}, {2, 0.5}};

  return cfg;
}

namespace {

void parse_dataset(const json& j, RunConfig& cfg) {
  check_keys(j, "dataset",
             {"n_source", "n_target", "region", "clutter", "min_gap_iou", "max_place_retries",
              "classes"});
  read_field(j, "dataset", "n_source", cfg.dataset.n_source);
  read_field(j, "dataset", "n_target", cfg.dataset.n_target);
  if (cfg.dataset.n_source < 0 || cfg.dataset.n_target < 0) {
    cfg_fail("dataset sizes must be >= 0");
  }
  if (auto it = j.find("region"); it != j.end()) {
    if (!it->is_array() || it->size() != 4) cfg_fail("'region' must be [x_min, x_max, y_min, y_max]");
    auto& r = cfg.dataset.spec.region;
    r.x_min = (*it)[0].get<double>();
    r.x_max = (*it)[1].get<double>();
    r.y_min = (*it)[2].get<double>();
    r.y_max = (*it)[3].get<double>();
    if (!(r.x_min < r.x_max) || !(r.y_min < r.y_max)) cfg_fail("'region' must be non-empty");
  }
  if (auto it = j.find("clutter"); it != j.end()) {
    if (!it->is_array() || it->size() != 2) cfg_fail("'clutter' must be [min, max]");
    cfg.dataset.spec.clutter_min = (*it)[0].get<int>();
    cfg.dataset.spec.clutter_max = (*it)[1].get<int>();
  }
  read_field(j, "dataset", "min_gap_iou", cfg.dataset.spec.min_gap_iou);
  if (!(cfg.dataset.spec.min_gap_iou > 0.0 && cfg.dataset.spec.min_gap_iou <= 1.0)) {
    cfg_fail("'min_gap_iou' must lie in (0, 1]");
  }
  read_field(j, "dataset", "max_place_retries", cfg.dataset.spec.max_place_retries);
  if (cfg.dataset.spec.max_place_retries < 1) cfg_fail("'max_place_retries' must be >= 1");

  if (auto it = j.find("classes"); it != j.end()) {
    if (!it->is_array() || it->empty()) cfg_fail("'classes' must be a non-empty array");
    std::vector<simdet::ClassSpec> specs;
    std::vector<std::string> names;
    for (const json& jc : *it) {
      check_keys(jc, "dataset.classes",
                 {"name", "count", "size_mean", "size_sigma", "points_ref", "ref_range"});
      simdet::ClassSpec cs;
      read_field(jc, "dataset.classes", "name", cs.name);
      if (cs.name.empty()) cfg_fail("class entries need a 'name'");
      if (auto ic = jc.find("count"); ic != jc.end()) {
        if (!ic->is_array() || ic->size() != 2) cfg_fail("class 'count' must be [min, max]");
        cs.count_min = (*ic)[0].get<int>();
        cs.count_max = (*ic)[1].get<int>();
      }
      read_vec3(jc, "dataset.classes", "size_mean", cs.size_mean);
      read_vec3(jc, "dataset.classes", "size_sigma", cs.size_sigma);
      read_field(jc, "dataset.classes", "points_ref", cs.points_ref);
      read_field(jc, "dataset.classes", "ref_range", cs.ref_range);
      if (!(cs.points_ref >= 0.0) || !(cs.ref_range > 0.0)) {
        cfg_fail("class 'points_ref' must be >= 0 and 'ref_range' > 0");
      }
      names.push_back(cs.name);
      specs.push_back(std::move(cs));
    }
    cfg.dataset.spec.classes = std::move(specs);
    cfg.classes = ClassMap(std::move(names));
  }
}

memory::EnsembleVariant parse_variant(const std::string& s) {
  if (s == "consistency") return memory::EnsembleVariant::Consistency;
  if (s == "nms") return memory::EnsembleVariant::Nms;
  if (s == "bipartite") return memory::EnsembleVariant::Bipartite;
  cfg_fail("'variant' must be one of consistency|nms|bipartite");
}

pipeline::AugMode parse_aug_mode(const std::string& s) {
  if (s == "none") return pipeline::AugMode::None;
  if (s == "normal") return pipeline::AugMode::Normal;
  if (s == "strong") return pipeline::AugMode::Strong;
  if (s == "curriculum") return pipeline::AugMode::Curriculum;
  cfg_fail("'mode' must be one of none|normal|strong|curriculum");
}

void parse_ensemble(const json& j, RunConfig& cfg) {
  check_keys(j, "ensemble", {"variant", "match_iou_min", "t_ign", "t_rm", "voting", "merge"});
  auto& e = cfg.pipeline.ensemble;
  if (auto it = j.find("variant"); it != j.end()) e.variant = parse_variant(it->get<std::string>());
  read_field(j, "ensemble", "match_iou_min", e.match_iou_min);
  read_field(j, "ensemble", "t_ign", e.t_ign);
  read_field(j, "ensemble", "t_rm", e.t_rm);
  read_field(j, "ensemble", "voting", e.voting);
  read_field(j, "ensemble", "merge", cfg.merge_rule);
  if (cfg.merge_rule != "max" && cfg.merge_rule != "avg") {
    cfg_fail("'merge' must be \"max\" or \"avg\"");
  }
}

void parse_triplet(const json& j, RunConfig& cfg) {
  check_keys(j, "triplet", {"t_pos", "t_neg", "phi", "single_threshold", "per_class"});
  auto& t = cfg.pipeline.triplet;
  read_field(j, "triplet", "t_pos", t.thresholds.t_pos);
  read_field(j, "triplet", "t_neg", t.thresholds.t_neg);
  read_field(j, "triplet", "phi", t.phi);
  read_field(j, "triplet", "single_threshold", t.single_threshold);
  if (auto it = j.find("per_class"); it != j.end()) {
    if (!it->is_object()) cfg_fail("'per_class' must be an object keyed by class name");
    for (const auto& item : it->items()) {
      if (!cfg.classes.has(item.key())) cfg_fail("per_class: unknown class '" + item.key() + "'");
      const int id = cfg.classes.id_for(item.key());
      check_keys(item.value(), "triplet.per_class", {"t_pos", "t_neg", "phi"});
      if (item.value().contains("t_pos") || item.value().contains("t_neg")) {
        scoring::TripletThresholds tt = t.thresholds;
        read_field(item.value(), "triplet.per_class", "t_pos", tt.t_pos);
        read_field(item.value(), "triplet.per_class", "t_neg", tt.t_neg);
        t.class_thresholds[id] = tt;
      }
      if (item.value().contains("phi")) {
        double phi = t.phi;
        read_field(item.value(), "triplet.per_class", "phi", phi);
        t.class_phi[id] = phi;
      }
    }
  }
}

void parse_augment(const json& j, RunConfig& cfg) {
  check_keys(j, "augment", {"mode", "rho", "stages", "flip_probability", "entries", "ros"});
  auto& a = cfg.pipeline.aug;
  if (auto it = j.find("mode"); it != j.end()) a.mode = parse_aug_mode(it->get<std::string>());
  read_field(j, "augment", "rho", a.schedule.rho);
  read_field(j, "augment", "stages", a.schedule.stages);
  read_field(j, "augment", "flip_probability", a.flip_probability);
  if (auto it = j.find("entries"); it != j.end()) {
    if (!it->is_array()) cfg_fail("'entries' must be an array");
    a.schedule.entries.clear();
    for (const json& je : *it) {
      check_keys(je, "augment.entries", {"name", "kind", "delta0"});
      augment::AugEntry e;
      read_field(je, "augment.entries", "name", e.name);
      std::string kind = "rotation";
      read_field(je, "augment.entries", "kind", kind);
      if (kind == "rotation") {
        e.kind = augment::AugKind::Rotation;
      } else if (kind == "scaling") {
        e.kind = augment::AugKind::Scaling;
      } else {
        cfg_fail("'kind' must be \"rotation\" or \"scaling\"");
      }
      read_field(je, "augment.entries", "delta0", e.delta0);
      if (e.name.empty()) cfg_fail("augment entries need a 'name'");
      a.schedule.entries.push_back(std::move(e));
    }
  }
  if (auto it = j.find("ros"); it != j.end()) {
    check_keys(*it, "augment.ros", {"enabled", "lo", "hi", "residual"});
    read_field(*it, "augment.ros", "enabled", a.ros_enabled);
    read_field(*it, "augment.ros", "lo", a.ros_lo);
    read_field(*it, "augment.ros", "hi", a.ros_hi);
    read_field(*it, "augment.ros", "residual", a.ros_residual);
  }
}

void parse_noise(const json& j, RunConfig& cfg) {
  check_keys(j, "noise",
             {"translation_sigma", "size_mu", "size_sigma", "yaw_sigma", "score_sigma",
              "iou_sigma", "score_offset", "oscillation", "fn", "fp", "detector_nms_iou"});
  auto& n = cfg.pipeline.noise;
  read_vec3(j, "noise", "translation_sigma", n.translation_sigma);
  read_vec3(j, "noise", "size_mu", n.size_mu);
  read_vec3(j, "noise", "size_sigma", n.size_sigma);
  read_field(j, "noise", "yaw_sigma", n.yaw_sigma);
  read_field(j, "noise", "score_sigma", n.score_sigma);
  read_field(j, "noise", "iou_sigma", n.iou_sigma);
  read_field(j, "noise", "score_offset", n.score_offset);
  if (auto it = j.find("oscillation"); it != j.end()) {
    check_keys(*it, "noise.oscillation", {"amp", "period"});
    read_field(*it, "noise.oscillation", "amp", n.osc_amp);
    read_field(*it, "noise.oscillation", "period", n.osc_period);
  }
  if (auto it = j.find("fn"); it != j.end()) {
    check_keys(*it, "noise.fn", {"scale", "midpoint", "slope"});
    read_field(*it, "noise.fn", "scale", n.fn_scale);
    read_field(*it, "noise.fn", "midpoint", n.fn_midpoint);
    read_field(*it, "noise.fn", "slope", n.fn_slope);
  }
  if (auto it = j.find("fp"); it != j.end()) {
    check_keys(*it, "noise.fp", {"rate", "score", "size_mean", "size_sigma"});
    read_field(*it, "noise.fp", "rate", n.fp_rate);
    if (auto is = it->find("score"); is != it->end()) {
      if (!is->is_array() || is->size() != 2) cfg_fail("fp 'score' must be [min, max]");
      n.fp_score_min = (*is)[0].get<double>();
      n.fp_score_max = (*is)[1].get<double>();
    }
    read_vec3(*it, "noise.fp", "size_mean", n.fp_size_mean);
    read_vec3(*it, "noise.fp", "size_sigma", n.fp_size_sigma);
  }
  read_field(j, "noise", "detector_nms_iou", n.detector_nms_iou);
}

void parse_eval(const json& j, RunConfig& cfg) {
  check_keys(j, "eval", {"default_iou", "mode", "class_iou", "error_match_iou"});
  auto& e = cfg.pipeline.eval;
  read_field(j, "eval", "default_iou", e.default_iou_threshold);
  read_field(j, "eval", "error_match_iou", e.error_match_iou);
  if (!(e.error_match_iou >= 0.0 && e.error_match_iou <= 1.0)) {
    cfg_fail("eval 'error_match_iou' must lie in [0, 1]");
  }
  if (auto it = j.find("mode"); it != j.end()) {
    const std::string m = it->get<std::string>();
    if (m == "3d") {
      e.tp_mode = evalkit::IouMode::ThreeD;
    } else if (m == "bev") {
      e.tp_mode = evalkit::IouMode::Bev;
    } else {
      cfg_fail("eval 'mode' must be \"3d\" or \"bev\"");
    }
  }
  if (auto it = j.find("class_iou"); it != j.end()) {
    if (!it->is_object()) cfg_fail("'class_iou' must be an object keyed by class name");
    e.class_iou_threshold.clear();
    for (const auto& item : it->items()) {
      if (!cfg.classes.has(item.key())) cfg_fail("class_iou: unknown class '" + item.key() + "'");
      if (!item.value().is_number()) cfg_fail("class_iou values must be numbers");
      e.class_iou_threshold[cfg.classes.id_for(item.key())] = item.value().get<double>();
    }
  }
}

RunConfig parse_config(const json& j) {
  check_keys(j, "config",
             {"seed", "dataset", "data", "pipeline", "ensemble", "triplet", "augment", "noise",
              "improve", "loss", "eval"});
  RunConfig cfg = default_config();
  read_field(j, "config", "seed", cfg.seed);

  // Dataset first: the class list scopes every per-class key below. The
  // default per-class eval thresholds only make sense for the default class
  // list, so a custom list resets them.
  if (auto it = j.find("dataset"); it != j.end()) {
    const bool custom_classes = it->contains("classes");
    parse_dataset(*it, cfg);
    if (custom_classes) {
      cfg.pipeline.eval.class_iou_threshold.clear();
      cfg.pipeline.triplet.class_thresholds.clear();
      cfg.pipeline.triplet.class_phi.clear();
    }
  }
  if (auto it = j.find("data"); it != j.end()) {
    check_keys(*it, "data", {"source", "target"});
    read_field(*it, "data", "source", cfg.data_source);
    read_field(*it, "data", "target", cfg.data_target);
  }
  if (auto it = j.find("pipeline"); it != j.end()) {
    check_keys(*it, "pipeline",
               {"rounds", "refresh_interval", "jobs", "mev_enabled", "diag_scenes",
                "dsnorm_momentum", "early_stop_churn", "snapshot_interval"});
    auto& p = cfg.pipeline;
    read_field(*it, "pipeline", "rounds", p.rounds);
    read_field(*it, "pipeline", "refresh_interval", p.refresh_interval);
    read_field(*it, "pipeline", "jobs", p.jobs);
    read_field(*it, "pipeline", "mev_enabled", p.mev_enabled);
    read_field(*it, "pipeline", "diag_scenes", p.diag_scenes);
    read_field(*it, "pipeline", "dsnorm_momentum", p.dsnorm_momentum);
    read_field(*it, "pipeline", "early_stop_churn", p.early_stop_churn);
    read_field(*it, "pipeline", "snapshot_interval", p.snapshot_interval);
  }
  if (auto it = j.find("ensemble"); it != j.end()) parse_ensemble(*it, cfg);
  if (auto it = j.find("triplet"); it != j.end()) parse_triplet(*it, cfg);
  if (auto it = j.find("augment"); it != j.end()) parse_augment(*it, cfg);
  if (auto it = j.find("noise"); it != j.end()) parse_noise(*it, cfg);
  if (auto it = j.find("improve"); it != j.end()) {
    check_keys(*it, "improve", {"floor"});
    read_field(*it, "improve", "floor", cfg.pipeline.improve.floor);
  }
  if (auto it = j.find("loss"); it != j.end()) {
    check_keys(*it, "loss", {"alpha_reg", "alpha_dir", "lambda_src"});
    read_field(*it, "loss", "alpha_reg", cfg.pipeline.loss_weights.alpha_reg);
    read_field(*it, "loss", "alpha_dir", cfg.pipeline.loss_weights.alpha_dir);
    read_field(*it, "loss", "lambda_src", cfg.pipeline.loss_weights.lambda_src);
  }
  if (auto it = j.find("eval"); it != j.end()) parse_eval(*it, cfg);

  cfg.pipeline.seed = cfg.seed;
  cfg.pipeline.noise.n_classes = static_cast<int>(cfg.classes.size());
  cfg.pipeline.noise.fp_region = cfg.dataset.spec.region;
  try {
    cfg.pipeline.validate();
  } catch (const std::invalid_argument& e) {
    cfg_fail(e.what());
  }
  return cfg;
}

}  // namespace

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return parse_config(j);
}

std::string config_to_json(const RunConfig& cfg) {
  const auto& p = cfg.pipeline;
  json j;
  j["seed"] = cfg.seed;

  json classes = json::array();
  for (const simdet::ClassSpec& cs : cfg.dataset.spec.classes) {
    classes.push_back({{"name", cs.name},
                       {"count", {cs.count_min, cs.count_max}},
                       {"size_mean", cs.size_mean},
                       {"size_sigma", cs.size_sigma},
                       {"points_ref", cs.points_ref},
                       {"ref_range", cs.ref_range}});
  }
  j["dataset"] = {{"n_source", cfg.dataset.n_source},
                  {"n_target", cfg.dataset.n_target},
                  {"region",
                   {cfg.dataset.spec.region.x_min, cfg.dataset.spec.region.x_max,
                    cfg.dataset.spec.region.y_min, cfg.dataset.spec.region.y_max}},
                  {"clutter", {cfg.dataset.spec.clutter_min, cfg.dataset.spec.clutter_max}},
                  {"min_gap_iou", cfg.dataset.spec.min_gap_iou},
                  {"max_place_retries", cfg.dataset.spec.max_place_retries},
                  {"classes", std::move(classes)}};
  j["data"] = {{"source", cfg.data_source}, {"target", cfg.data_target}};
  j["pipeline"] = {{"rounds", p.rounds},
                   {"refresh_interval", p.refresh_interval},
                   {"jobs", p.jobs},
                   {"mev_enabled", p.mev_enabled},
                   {"diag_scenes", p.diag_scenes},
                   {"dsnorm_momentum", p.dsnorm_momentum},
                   {"early_stop_churn", p.early_stop_churn},
                   {"snapshot_interval", p.snapshot_interval}};

  const char* variant = p.ensemble.variant == memory::EnsembleVariant::Consistency
                            ? "consistency"
                            : (p.ensemble.variant == memory::EnsembleVariant::Nms ? "nms"
                                                                                  : "bipartite");
  j["ensemble"] = {{"variant", variant},
                   {"match_iou_min", p.ensemble.match_iou_min},
                   {"t_ign", p.ensemble.t_ign},
                   {"t_rm", p.ensemble.t_rm},
                   {"voting", p.ensemble.voting},
                   {"merge", cfg.merge_rule}};

  json per_class = json::object();
  {
    std::set<int> ids;
    for (const auto& [id, v] : p.triplet.class_thresholds) ids.insert(id);
    for (const auto& [id, v] : p.triplet.class_phi) ids.insert(id);
    for (int id : ids) {
      json e = json::object();
      if (auto it = p.triplet.class_thresholds.find(id); it != p.triplet.class_thresholds.end()) {
        e["t_pos"] = it->second.t_pos;
        e["t_neg"] = it->second.t_neg;
      }
      if (auto it = p.triplet.class_phi.find(id); it != p.triplet.class_phi.end()) {
        e["phi"] = it->second;
      }
      per_class[cfg.classes.name_for(id)] = std::move(e);
    }
  }
  j["triplet"] = {{"t_pos", p.triplet.thresholds.t_pos},
                  {"t_neg", p.triplet.thresholds.t_neg},
                  {"phi", p.triplet.phi},
                  {"single_threshold", p.triplet.single_threshold},
                  {"per_class", std::move(per_class)}};

  const char* mode = p.aug.mode == pipeline::AugMode::None
                         ? "none"
                         : (p.aug.mode == pipeline::AugMode::Normal
                                ? "normal"
                                : (p.aug.mode == pipeline::AugMode::Strong ? "strong"
                                                                           : "curriculum"));
  json entries = json::array();
  for (const augment::AugEntry& e : p.aug.schedule.entries) {
    entries.push_back({{"name", e.name},
                       {"kind", e.kind == augment::AugKind::Rotation ? "rotation" : "scaling"},
                       {"delta0", e.delta0}});
  }
  j["augment"] = {{"mode", mode},
                  {"rho", p.aug.schedule.rho},
                  {"stages", p.aug.schedule.stages},
                  {"flip_probability", p.aug.flip_probability},
                  {"entries", std::move(entries)},
                  {"ros",
                   {{"enabled", p.aug.ros_enabled},
                    {"lo", p.aug.ros_lo},
                    {"hi", p.aug.ros_hi},
                    {"residual", p.aug.ros_residual}}}};

  j["noise"] = {{"translation_sigma", p.noise.translation_sigma},
                {"size_mu", p.noise.size_mu},
                {"size_sigma", p.noise.size_sigma},
                {"yaw_sigma", p.noise.yaw_sigma},
                {"score_sigma", p.noise.score_sigma},
                {"iou_sigma", p.noise.iou_sigma},
                {"score_offset", p.noise.score_offset},
                {"oscillation", {{"amp", p.noise.osc_amp}, {"period", p.noise.osc_period}}},
                {"fn",
                 {{"scale", p.noise.fn_scale},
                  {"midpoint", p.noise.fn_midpoint},
                  {"slope", p.noise.fn_slope}}},
                {"fp",
                 {{"rate", p.noise.fp_rate},
                  {"score", {p.noise.fp_score_min, p.noise.fp_score_max}},
                  {"size_mean", p.noise.fp_size_mean},
                  {"size_sigma", p.noise.fp_size_sigma}}},
                {"detector_nms_iou", p.noise.detector_nms_iou}};

  j["improve"] = {{"floor", p.improve.floor}};
  j["loss"] = {{"alpha_reg", p.loss_weights.alpha_reg},
               {"alpha_dir", p.loss_weights.alpha_dir},
               {"lambda_src", p.loss_weights.lambda_src}};

  json class_iou = json::object();
  for (const auto& [id, thr] : p.eval.class_iou_threshold) {
    class_iou[cfg.classes.name_for(id)] = thr;
  }
  j["eval"] = {{"default_iou", p.eval.default_iou_threshold},
               {"mode", p.eval.tp_mode == evalkit::IouMode::ThreeD ? "3d" : "bev"},
               {"error_match_iou", p.eval.error_match_iou},
               {"class_iou", std::move(class_iou)}};

  return j.dump(2) + "\n";
}

}  // namespace plsim::io
