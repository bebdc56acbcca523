#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "plsim/io.hpp"
#include "plsim/rng.hpp"
#include "plsim/simdet.hpp"

using namespace plsim;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("plsim_io_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::vector<Scene> sample_scenes(int n, Domain domain, const char* prefix) {
  io::RunConfig cfg = io::default_config();
  std::vector<Scene> scenes;
  for (int i = 0; i < n; ++i) {
    Rng rng = scene_rng(99, prefix + std::to_string(i), 0);
    scenes.push_back(
        simdet::generate_scene(rng, cfg.dataset.spec, prefix + std::to_string(i), domain));
  }
  return scenes;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("scene files round-trip bit-exactly") {
  TempDir tmp;
  const io::ClassMap classes = io::default_config().classes;
  const auto scenes = sample_scenes(3, Domain::Target, "t");
  const std::string path = tmp.file("scenes.jsonl");
  io::write_scenes_jsonl(path, scenes, classes);
  const auto back = io::read_scenes_jsonl(path, classes);
  REQUIRE(back.size() == scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    CHECK(back[i].scene_id == scenes[i].scene_id);
    CHECK(back[i].domain == scenes[i].domain);
    REQUIRE(back[i].points.size() == scenes[i].points.size());
    REQUIRE(back[i].gt.size() == scenes[i].gt.size());
    for (std::size_t k = 0; k < scenes[i].points.size(); ++k) {
      CHECK(back[i].points[k].x == scenes[i].points[k].x);
      CHECK(back[i].points[k].y == scenes[i].points[k].y);
      CHECK(back[i].points[k].z == scenes[i].points[k].z);
    }
    for (std::size_t k = 0; k < scenes[i].gt.size(); ++k) {
      CHECK(back[i].gt[k].box.cx == scenes[i].gt[k].box.cx);
      CHECK(back[i].gt[k].box.yaw == scenes[i].gt[k].box.yaw);
      CHECK(back[i].gt[k].class_id == scenes[i].gt[k].class_id);
    }
  }
  // Writing what was read reproduces the file byte for byte.
  const std::string path2 = tmp.file("scenes2.jsonl");
  io::write_scenes_jsonl(path2, back, classes);
  CHECK(read_text(path) == read_text(path2));
}

TEST_CASE("an empty dataset file is zero scenes") {
  TempDir tmp;
  const io::ClassMap classes({"car"});
  const std::string path = tmp.file("empty.jsonl");
  write_text(path, "");
  CHECK(io::read_scenes_jsonl(path, classes).empty());
  io::write_scenes_jsonl(path, {}, classes);
  CHECK(io::read_scenes_jsonl(path, classes).empty());
}

TEST_CASE("label files round-trip with states and counters") {
  TempDir tmp;
  const io::ClassMap classes({"car", "pedestrian"});
  std::vector<memory::SceneMemory> mems(2);
  mems[0].scene_id = "t0";
  mems[0].round = 3;
  mems[0].entries.push_back(
      {geom::OrientedBox(1, 2, 0.5, 4, 2, 1, 0.25), 0, 0.8, scoring::BoxState::Positive, 0});
  mems[0].entries.push_back(
      {geom::OrientedBox(5, -2, 0.5, 1, 1, 1.7, -0.5), 1, 0.4, scoring::BoxState::Ignored, 2});
  mems[1].scene_id = "t1";
  mems[1].round = 3;

  const std::string path = tmp.file("labels.jsonl");
  io::write_labels_jsonl(path, mems, classes);
  const auto back = io::read_labels_jsonl(path, classes);
  REQUIRE(back.size() == 2);
  CHECK(back[0].round == 3);
  REQUIRE(back[0].entries.size() == 2);
  CHECK(back[0].entries[0].score == 0.8);
  CHECK(back[0].entries[0].state == scoring::BoxState::Positive);
  CHECK(back[0].entries[1].state == scoring::BoxState::Ignored);
  CHECK(back[0].entries[1].cnt == 2);
  CHECK(back[0].entries[1].box.yaw == -0.5);
  CHECK(back[1].entries.empty());
}

TEST_CASE("malformed records are rejected with the offending line") {
  TempDir tmp;
  const io::ClassMap classes({"car"});
  const std::string path = tmp.file("bad.jsonl");

  write_text(path, "not json\n");
  CHECK_THROWS_AS(io::read_scenes_jsonl(path, classes), io::DataError);

  write_text(path, R"({"scene_id":"a","domain":"source","points":[],"gt":[],"extra":1})"
                   "\n");
  CHECK_THROWS_AS(io::read_scenes_jsonl(path, classes), io::DataError);

  write_text(path, R"({"scene_id":"a","domain":"west","points":[],"gt":[]})"
                   "\n");
  CHECK_THROWS_AS(io::read_scenes_jsonl(path, classes), io::DataError);

  // Box with six entries instead of seven.
  write_text(path,
             R"({"scene_id":"a","domain":"source","points":[],"gt":[{"class":"car","box":[0,0,0,1,1,1]}]})"
             "\n");
  CHECK_THROWS_AS(io::read_scenes_jsonl(path, classes), io::DataError);

  // Unknown class name.
  write_text(path,
             R"({"scene_id":"a","domain":"source","points":[],"gt":[{"class":"bike","box":[0,0,0,1,1,1,0]}]})"
             "\n");
  CHECK_THROWS_AS(io::read_scenes_jsonl(path, classes), io::DataError);

  // Heading outside the canonical interval.
  write_text(path,
             R"({"scene_id":"a","domain":"source","points":[],"gt":[{"class":"car","box":[0,0,0,1,1,1,4.0]}]})"
             "\n");
  CHECK_THROWS_AS(io::read_scenes_jsonl(path, classes), io::DataError);

  // Duplicate scene ids.
  write_text(path, R"({"scene_id":"a","domain":"source","points":[],"gt":[]})"
                   "\n"
                   R"({"scene_id":"a","domain":"source","points":[],"gt":[]})"
                   "\n");
  CHECK_THROWS_AS(io::read_scenes_jsonl(path, classes), io::DataError);

  CHECK_THROWS_AS(io::read_scenes_jsonl(tmp.file("missing.jsonl"), classes), io::DataError);
}

TEST_CASE("prediction reader accepts labels and datasets alike") {
  TempDir tmp;
  const io::ClassMap classes = io::default_config().classes;
  const auto scenes = sample_scenes(2, Domain::Target, "p");
  const std::string scene_path = tmp.file("scenes.jsonl");
  io::write_scenes_jsonl(scene_path, scenes, classes);

  // Dataset records: ground truth becomes full-confidence predictions.
  const auto from_gt = io::read_predictions_jsonl(scene_path, classes);
  REQUIRE(from_gt.size() == 2);
  CHECK(from_gt[0].first == scenes[0].scene_id);
  REQUIRE(from_gt[0].second.size() == scenes[0].gt.size());
  CHECK(from_gt[0].second[0].p == 1.0);

  // Label records: positives keep their score, ignored entries drop out.
  std::vector<memory::SceneMemory> mems(1);
  mems[0].scene_id = "p0";
  mems[0].round = 1;
  mems[0].entries.push_back(
      {geom::OrientedBox(0, 0, 0.5, 4, 2, 1, 0), 0, 0.7, scoring::BoxState::Positive, 0});
  mems[0].entries.push_back(
      {geom::OrientedBox(9, 0, 0.5, 4, 2, 1, 0), 0, 0.3, scoring::BoxState::Ignored, 1});
  const std::string label_path = tmp.file("labels.jsonl");
  io::write_labels_jsonl(label_path, mems, classes);
  const auto from_labels = io::read_predictions_jsonl(label_path, classes);
  REQUIRE(from_labels.size() == 1);
  REQUIRE(from_labels[0].second.size() == 1);
  CHECK(from_labels[0].second[0].p == 0.7);
}

TEST_CASE("class map basics") {
  const io::ClassMap classes({"car", "pedestrian"});
  CHECK(classes.id_for("car") == 0);
  CHECK(classes.id_for("pedestrian") == 1);
  CHECK(classes.name_for(1) == "pedestrian");
  CHECK(classes.has("car"));
  CHECK_FALSE(classes.has("tree"));
  CHECK_THROWS_AS(classes.id_for("tree"), std::out_of_range);
  CHECK_THROWS_AS(classes.name_for(2), std::out_of_range);
  CHECK_THROWS_AS(io::ClassMap({"car", "car"}), io::ConfigError);
  CHECK_THROWS_AS(io::ClassMap({""}), io::ConfigError);
}

TEST_CASE("an empty config file resolves to the built-in defaults") {
  TempDir tmp;
  const std::string path = tmp.file("empty.json");
  write_text(path, "{}\n");
  const io::RunConfig loaded = io::load_config(path);
  CHECK(io::config_to_json(loaded) == io::config_to_json(io::default_config()));
}

TEST_CASE("the resolved config round-trips through its own JSON") {
  TempDir tmp;
  const std::string path = tmp.file("cfg.json");
  write_text(path, R"({
    "seed": 99,
    "dataset": {"n_source": 5, "n_target": 7},
    "pipeline": {"rounds": 4, "jobs": 2},
    "ensemble": {"variant": "bipartite", "voting": false, "merge": "avg"},
    "triplet": {"phi": 0.4, "t_pos": 0.7, "per_class": {"car": {"t_pos": 0.75, "t_neg": 0.3}}},
    "noise": {"size_mu": [1.1, 1.1, 1.1], "oscillation": {"amp": 0.2, "period": 3}},
    "augment": {"stages": 2, "ros": {"enabled": false}}
  })");
  const io::RunConfig cfg = io::load_config(path);
  CHECK(cfg.seed == 99);
  CHECK(cfg.pipeline.seed == 99);
  CHECK(cfg.dataset.n_source == 5);
  CHECK(cfg.pipeline.rounds == 4);
  CHECK(cfg.pipeline.ensemble.variant == memory::EnsembleVariant::Bipartite);
  CHECK_FALSE(cfg.pipeline.ensemble.voting);
  CHECK(cfg.merge_rule == "avg");
  CHECK(cfg.pipeline.triplet.phi == 0.4);
  CHECK(cfg.pipeline.triplet.thresholds.t_pos == 0.7);
  CHECK(cfg.pipeline.triplet.class_thresholds.at(0).t_pos == 0.75);
  CHECK(cfg.pipeline.noise.size_mu[0] == 1.1);
  CHECK(cfg.pipeline.noise.osc_amp == 0.2);
  CHECK(cfg.pipeline.aug.schedule.stages == 2);
  CHECK_FALSE(cfg.pipeline.aug.ros_enabled);

  // Serialize, reload, serialize again: a fixed point.
  const std::string dumped = io::config_to_json(cfg);
  const std::string path2 = tmp.file("cfg2.json");
  write_text(path2, dumped);
  CHECK(io::config_to_json(io::load_config(path2)) == dumped);
}

TEST_CASE("unknown keys fail loudly at every level") {
  TempDir tmp;
  const std::string path = tmp.file("bad.json");
  for (const char* text : {
           R"({"sed": 1})",
           R"({"pipeline": {"round": 3}})",
           R"({"noise": {"sigma": 0.1}})",
           R"({"ensemble": {"merge_rule": "max"}})",
           R"({"triplet": {"per_class": {"car": {"tpos": 0.7}}}})",
           R"({"dataset": {"classes": [{"name": "car", "points": 10}]}})",
       }) {
    write_text(path, text);
    CHECK_THROWS_AS(io::load_config(path), io::ConfigError);
  }
}

TEST_CASE("bad values are config errors, not crashes") {
  TempDir tmp;
  const std::string path = tmp.file("bad.json");
  for (const char* text : {
           R"({"pipeline": {"rounds": 0}})",
           R"({"triplet": {"phi": 1.5}})",
           R"({"triplet": {"t_pos": 0.2, "t_neg": 0.4}})",
           R"({"ensemble": {"merge": "median"}})",
           R"({"ensemble": {"variant": "greedy"}})",
           R"({"noise": {"score_sigma": -0.5}})",
           R"({"dataset": {"n_source": -1}})",
           R"(not json at all)",
       }) {
    write_text(path, text);
    CHECK_THROWS_AS(io::load_config(path), io::ConfigError);
  }
  CHECK_THROWS_AS(io::load_config(tmp.file("nope.json")), io::ConfigError);
}

TEST_CASE("custom class lists rebuild the per-class tables") {
  TempDir tmp;
  const std::string path = tmp.file("classes.json");
  write_text(path, R"({
    "dataset": {"classes": [
      {"name": "truck", "count": [1, 3], "size_mean": [7.0, 2.5, 3.0],
       "size_sigma": [0.3, 0.1, 0.1], "points_ref": 300, "ref_range": 15}
    ]},
    "eval": {"class_iou": {"truck": 0.6}}
  })");
  const io::RunConfig cfg = io::load_config(path);
  REQUIRE(cfg.classes.size() == 1);
  CHECK(cfg.classes.name_for(0) == "truck");
  CHECK(cfg.pipeline.eval.class_iou_threshold.at(0) == 0.6);
  CHECK(cfg.pipeline.noise.n_classes == 1);
  CHECK(cfg.dataset.spec.classes[0].size_mean[0] == 7.0);
  // The car/pedestrian/cyclist thresholds from the defaults are gone.
  CHECK(cfg.pipeline.eval.class_iou_threshold.size() == 1);
}

}  // TEST_SUITE
