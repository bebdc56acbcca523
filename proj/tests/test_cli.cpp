#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>
#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("plsim_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Run the installed binary and return its exit code; stdout/stderr land in
// capture files inside the scratch directory.
int run_cli(const std::string& args) {
  const std::string cmd = std::string(PLSIM_CLI_PATH) + " " + args + " > " +
                          (work_dir() / "stdout.txt").string() + " 2> " +
                          (work_dir() / "stderr.txt").string();
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("run --help") == 0);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("") == 2);                       // a subcommand is required
  CHECK(run_cli("gen-dataset") == 2);            // --out is required
  CHECK(run_cli("run --out x --config /does/not/exist.json") == 2);
}

TEST_CASE("config validation paths") {
  const fs::path dir = work_dir();
  write_file(dir / "empty.json", "{}\n");
  CHECK(run_cli("run --config " + q(dir / "empty.json") + " --dry-run") == 0);

  write_file(dir / "unknown.json", R"({"pipeline": {"bogus": 1}})");
  CHECK(run_cli("run --config " + q(dir / "unknown.json") + " --dry-run") == 2);

  write_file(dir / "badval.json", R"({"triplet": {"t_pos": 0.2, "t_neg": 0.4}})");
  CHECK(run_cli("run --config " + q(dir / "badval.json") + " --dry-run") == 2);

  // A runnable config without dataset paths is still a config error.
  CHECK(run_cli("run --config " + q(dir / "empty.json") + " --out " + q(dir / "nowhere")) == 2);
}

TEST_CASE("data errors are distinct from config errors") {
  const fs::path dir = work_dir();
  write_file(dir / "missing_data.json",
             R"({"data": {"source": ")" + (dir / "no_src.jsonl").string() +
                 R"(", "target": ")" + (dir / "no_tgt.jsonl").string() + R"("}})");
  CHECK(run_cli("run --config " + q(dir / "missing_data.json") + " --out " + q(dir / "out0")) ==
        3);

  write_file(dir / "corrupt.jsonl", "definitely not json\n");
  write_file(dir / "ok.json", "{}\n");
  CHECK(run_cli("eval " + q(dir / "corrupt.jsonl") + " " + q(dir / "corrupt.jsonl")) == 3);
  CHECK(run_cli("report " + q(dir / "does_not_exist")) == 3);
}

TEST_CASE("the full loop runs and reproduces itself byte for byte") {
  const fs::path dir = work_dir();
  const fs::path data = dir / "data";
  const std::string cfg_text = R"({
    "seed": 21,
    "dataset": {"n_source": 5, "n_target": 5},
    "data": {"source": ")" + (data / "source.jsonl").string() +
                               R"(", "target": ")" + (data / "target.jsonl").string() + R"("},
    "pipeline": {"rounds": 3, "diag_scenes": 2, "snapshot_interval": 2}
  })";
  write_file(dir / "run.json", cfg_text);

  REQUIRE(run_cli("gen-dataset --config " + q(dir / "run.json") + " --out " + q(data)) == 0);
  REQUIRE(fs::exists(data / "source.jsonl"));
  REQUIRE(fs::exists(data / "target.jsonl"));

  // The dataset itself must be reproducible.
  REQUIRE(run_cli("gen-dataset --config " + q(dir / "run.json") + " --out " + q(dir / "data2")) ==
          0);
  CHECK(read_file(data / "target.jsonl") == read_file(dir / "data2" / "target.jsonl"));

  REQUIRE(run_cli("run --config " + q(dir / "run.json") + " --out " + q(dir / "out1")) == 0);
  REQUIRE(run_cli("run --config " + q(dir / "run.json") + " --jobs 3 --out " + q(dir / "out2")) ==
          0);
  // config.resolved.json records the effective job count, so it is the one
  // artifact allowed to differ between these two runs.
  for (const char* name : {"quality.csv", "rounds.csv", "labels_final.jsonl", "report.json"}) {
    CAPTURE(name);
    REQUIRE(fs::exists(dir / "out1" / name));
    CHECK(read_file(dir / "out1" / name) == read_file(dir / "out2" / name));
  }
  REQUIRE(fs::exists(dir / "out1" / "config.resolved.json"));
  CHECK(fs::exists(dir / "out1" / "snapshots" / "round_002.jsonl"));
  CHECK_FALSE(fs::exists(dir / "out1" / "snapshots" / "round_003.jsonl"));

  // A different seed must actually change the outputs.
  REQUIRE(run_cli("run --config " + q(dir / "run.json") + " --seed 99 --out " +
                  q(dir / "out3")) == 0);
  CHECK(read_file(dir / "out1" / "quality.csv") != read_file(dir / "out3" / "quality.csv"));

  CHECK(run_cli("report " + q(dir / "out1")) == 0);
  const std::string table = read_file(work_dir() / "stdout.txt");
  CHECK(table.find("round") != std::string::npos);
  CHECK(table.find("3") != std::string::npos);
}

TEST_CASE("evaluating the truth against itself is perfect") {
  const fs::path dir = work_dir();
  const fs::path gt = dir / "data" / "target.jsonl";
  REQUIRE(fs::exists(gt));  // produced by the previous test case
  const fs::path out = dir / "selfeval.json";
  REQUIRE(run_cli("eval " + q(gt) + " " + q(gt) + " --out " + q(out)) == 0);
  const json j = json::parse(read_file(out));
  REQUIRE(j.contains("car"));
  CHECK(j["car"]["ap_3d"].get<double>() == 1.0);
  CHECK(j["car"]["fp"].get<long>() == 0);
  CHECK(j["car"]["fn"].get<long>() == 0);

  // Final labels against the truth: plausible but imperfect.
  const fs::path labels = dir / "out1" / "labels_final.jsonl";
  REQUIRE(run_cli("eval " + q(labels) + " " + q(gt) + " --out " + q(dir / "labeleval.json")) ==
          0);
  const json je = json::parse(read_file(dir / "labeleval.json"));
  REQUIRE(je.contains("car"));
  CHECK(je["car"]["tp"].get<long>() > 0);
}

TEST_CASE("the ablation grid emits every cell") {
  const fs::path dir = work_dir();
  write_file(dir / "abl.json", R"({
    "seed": 4,
    "dataset": {"n_source": 3, "n_target": 3},
    "data": {"source": ")" + (dir / "data" / "source.jsonl").string() +
                              R"(", "target": ")" + (dir / "data" / "target.jsonl").string() +
                              R"("},
    "pipeline": {"rounds": 2, "diag_scenes": 1}
  })");
  REQUIRE(run_cli("ablate --config " + q(dir / "abl.json") + " --out " + q(dir / "abl")) == 0);
  const std::string csv = read_file(dir / "abl" / "ablation.csv");
  std::size_t rows = 0;
  for (char c : csv) rows += c == '\n';
  CHECK(rows == 13);  // header + 3 variants x 2 merges x 2 voting modes
  CHECK(csv.find("bipartite,avg,off") != std::string::npos);
  CHECK(csv.find("nms,max,on") != std::string::npos);
}
