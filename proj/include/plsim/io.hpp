#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "plsim/memory.hpp"
#include "plsim/pipeline.hpp"
#include "plsim/scene.hpp"
#include "plsim/scoring.hpp"
#include "plsim/simdet.hpp"

namespace plsim::io {

// Configuration problems (bad schema, unknown keys, invalid values, missing
// paths). The CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Data problems (unreadable files, malformed records). Exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Class names <-> contiguous ids, in declaration order.
class ClassMap {
 public:
  ClassMap() = default;
  explicit ClassMap(std::vector<std::string> names);

  int id_for(const std::string& name) const;  // throws std::out_of_range
  const std::string& name_for(int id) const;  // throws std::out_of_range
  bool has(const std::string& name) const;
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
};

// One JSON object per line:
//   {"scene_id": ..., "domain": "source"|"target", "points": [[x,y,z],...],
//    "gt": [{"class": ..., "box": [cx,cy,cz,l,w,h,yaw]}, ...]}
// Unknown keys, malformed boxes, unknown class names, duplicate scene ids
// and yaw outside (-pi, pi] are all rejected.
std::vector<Scene> read_scenes_jsonl(const std::string& path, const ClassMap& classes);
void write_scenes_jsonl(const std::string& path, const std::vector<Scene>& scenes,
                        const ClassMap& classes);

// Pseudo-label snapshots, one scene per line:
//   {"scene_id": ..., "round": k, "labels": [{"class": ..., "box": [...],
//    "score": ..., "state": "positive"|"ignored", "cnt": n}, ...]}
std::vector<memory::SceneMemory> read_labels_jsonl(const std::string& path,
                                                   const ClassMap& classes);
void write_labels_jsonl(const std::string& path,
                        const std::vector<memory::SceneMemory>& memories,
                        const ClassMap& classes);

// Predictions for evaluation: accepts either a label file (positive entries
// become predictions with their stored score) or a dataset file (ground
// truth becomes predictions with score 1), detected per record.
std::vector<std::pair<std::string, std::vector<scoring::Detection>>> read_predictions_jsonl(
    const std::string& path, const ClassMap& classes);

struct DatasetConfig {
  int n_source = 100;
  int n_target = 100;
  simdet::SceneSpec spec;  // class list defines the id order
};

struct RunConfig {
  std::uint64_t seed = 1;
  DatasetConfig dataset;
  std::string data_source;  // dataset JSONL paths used by cmd_run
  std::string data_target;
  pipeline::PipelineConfig pipeline;
  std::string merge_rule = "max";  // "max" | "avg"; avg resolves to max
  ClassMap classes;
};

// Built-in defaults (same values as configs/default.json).
RunConfig default_config();

// Parse a config file over the defaults. Unknown keys anywhere are a
// ConfigError; class-keyed maps use names from dataset.classes.
RunConfig load_config(const std::string& path);

// The fully resolved config as canonical JSON (round-trips via load).
std::string config_to_json(const RunConfig& config);

}  // namespace plsim::io
