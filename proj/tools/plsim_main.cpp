#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "plsim/io.hpp"
#include "plsim/pipeline.hpp"
#include "plsim/rng.hpp"
#include "plsim/simdet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace plsim;

namespace {

// Scene-generation stream salt; label rounds use 4k+phase, far below this.
constexpr std::uint64_t kGenSalt = 0xDA7A;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

io::RunConfig load_or_default(const std::string& config_path) {
  return config_path.empty() ? io::default_config() : io::load_config(config_path);
}

void apply_overrides(io::RunConfig& cfg, const std::optional<std::uint64_t>& seed,
                     const std::optional<int>& jobs) {
  if (seed) {
    cfg.seed = *seed;
    cfg.pipeline.seed = *seed;
  }
  if (jobs) {
    if (*jobs < 1) throw io::ConfigError("config: --jobs must be >= 1");
    cfg.pipeline.jobs = *jobs;
  }
}

std::vector<Scene> generate_domain(const io::RunConfig& cfg, int count, Domain domain,
                                   const char* prefix) {
  std::vector<Scene> scenes;
  scenes.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "%s%06d", prefix, i);
    Rng rng = scene_rng(cfg.seed, id, kGenSalt);
    scenes.push_back(simdet::generate_scene(rng, cfg.dataset.spec, id, domain));
  }
  return scenes;
}

int cmd_gen_dataset(const std::string& config_path, const std::string& out_dir,
                    const std::optional<std::uint64_t>& seed) {
  io::RunConfig cfg = load_or_default(config_path);
  apply_overrides(cfg, seed, std::nullopt);
  fs::create_directories(out_dir);
  const auto source = generate_domain(cfg, cfg.dataset.n_source, Domain::Source, "s");
  const auto target = generate_domain(cfg, cfg.dataset.n_target, Domain::Target, "t");
  io::write_scenes_jsonl((fs::path(out_dir) / "source.jsonl").string(), source, cfg.classes);
  io::write_scenes_jsonl((fs::path(out_dir) / "target.jsonl").string(), target, cfg.classes);
  std::cout << "wrote " << source.size() << " source and " << target.size()
            << " target scenes to " << out_dir << "\n";
  return 0;
}

void write_quality_csv(const std::string& path, const std::vector<pipeline::RoundReport>& reports,
                       const io::ClassMap& classes) {
  std::ofstream out(path);
  if (!out) throw io::DataError("cannot open '" + path + "' for writing");
  out << "round,stage,class,tp,fp,fn,ap_bev,ap_3d,ate,ase,aoe\n";
  for (const auto& r : reports) {
    for (const auto& [cls, q] : r.quality.per_class) {
      out << r.round << ',' << r.cda_stage << ',' << classes.name_for(cls) << ',' << q.tp << ','
          << q.fp << ',' << q.fn << ',' << fmt_opt(q.ap_bev) << ',' << fmt_opt(q.ap_3d) << ','
          << fmt_opt(q.ate) << ',' << fmt_opt(q.ase) << ',' << fmt_opt(q.aoe) << "\n";
    }
  }
}

void write_rounds_csv(const std::string& path, const std::vector<pipeline::RoundReport>& reports) {
  std::ofstream out(path);
  if (!out) throw io::DataError("cannot open '" + path + "' for writing");
  out << "round,stage,positives,ignored,churn,loss_cls,loss_reg,loss_dir,loss_iou,"
         "loss_source,loss_target,loss_overall,norm_src_mean,norm_src_var,norm_tgt_mean,"
         "norm_tgt_var\n";
  for (const auto& r : reports) {
    out << r.round << ',' << r.cda_stage << ',' << r.positive_count << ',' << r.ignored_count
        << ',' << fmt(r.memory_churn) << ',' << fmt(r.loss.cls) << ',' << fmt(r.loss.reg) << ','
        << fmt(r.loss.dir) << ',' << fmt(r.loss.iou) << ',' << fmt(r.loss.det_source) << ','
        << fmt(r.loss.det_target) << ',' << fmt(r.loss.overall) << ',' << fmt(r.norm.src_mean)
        << ',' << fmt(r.norm.src_var) << ',' << fmt(r.norm.tgt_mean) << ','
        << fmt(r.norm.tgt_var) << "\n";
  }
}

json quality_to_json(const evalkit::QualityReport& q, const io::ClassMap& classes) {
  json per_class = json::object();
  for (const auto& [cls, cq] : q.per_class) {
    json e = {{"tp", cq.tp}, {"fp", cq.fp}, {"fn", cq.fn}};
    if (cq.ap_bev) e["ap_bev"] = *cq.ap_bev;
    if (cq.ap_3d) e["ap_3d"] = *cq.ap_3d;
    if (cq.ate) e["ate"] = *cq.ate;
    if (cq.ase) e["ase"] = *cq.ase;
    if (cq.aoe) e["aoe"] = *cq.aoe;
    per_class[classes.name_for(cls)] = std::move(e);
  }
  return per_class;
}

json report_to_json(const pipeline::RoundReport& r, const io::ClassMap& classes) {
  return {{"round", r.round},
          {"stage", r.cda_stage},
          {"positives", r.positive_count},
          {"ignored", r.ignored_count},
          {"churn", r.memory_churn},
          {"loss",
           {{"cls", r.loss.cls},
            {"reg", r.loss.reg},
            {"dir", r.loss.dir},
            {"iou", r.loss.iou},
            {"source", r.loss.det_source},
            {"target", r.loss.det_target},
            {"overall", r.loss.overall}}},
          {"norm",
           {{"src_mean", r.norm.src_mean},
            {"src_var", r.norm.src_var},
            {"tgt_mean", r.norm.tgt_mean},
            {"tgt_var", r.norm.tgt_var}}},
          {"quality", quality_to_json(r.quality, classes)}};
}

void print_round_summary(const pipeline::RoundReport& r, const io::ClassMap& classes) {
  std::cout << "round " << r.round << " stage " << r.cda_stage << " positives "
            << r.positive_count << " ignored " << r.ignored_count << " churn "
            << fmt(r.memory_churn);
  for (const auto& [cls, q] : r.quality.per_class) {
    std::cout << " " << classes.name_for(cls) << ":ap3d=" << (q.ap_3d ? fmt(*q.ap_3d) : "-");
  }
  std::cout << "\n";
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            const std::optional<std::uint64_t>& seed, const std::optional<int>& jobs,
            bool dry_run) {
  io::RunConfig cfg = load_or_default(config_path);
  apply_overrides(cfg, seed, jobs);
  if (dry_run) {
    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      std::ofstream out(fs::path(out_dir) / "config.resolved.json");
      out << io::config_to_json(cfg);
    } else {
      std::cout << io::config_to_json(cfg);
    }
    std::cerr << "config OK\n";
    return 0;
  }
  if (out_dir.empty()) throw io::ConfigError("config: run needs --out");
  if (cfg.data_source.empty() || cfg.data_target.empty()) {
    throw io::ConfigError("config: data.source and data.target must point to dataset files");
  }
  const auto source = io::read_scenes_jsonl(cfg.data_source, cfg.classes);
  const auto target = io::read_scenes_jsonl(cfg.data_target, cfg.classes);

  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "config.resolved.json");
    out << io::config_to_json(cfg);
  }
  if (cfg.pipeline.snapshot_interval > 0) {
    fs::create_directories(fs::path(out_dir) / "snapshots");
  }

  pipeline::RoundSink sink = [&](const pipeline::RoundReport& r,
                                 const std::vector<memory::SceneMemory>& memories) {
    print_round_summary(r, cfg.classes);
    if (cfg.pipeline.snapshot_interval > 0 && r.round % cfg.pipeline.snapshot_interval == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "round_%03d.jsonl", r.round);
      io::write_labels_jsonl((fs::path(out_dir) / "snapshots" / name).string(), memories,
                             cfg.classes);
    }
  };
  const pipeline::RunResult result = pipeline::run(source, target, cfg.pipeline, sink);

  write_quality_csv((fs::path(out_dir) / "quality.csv").string(), result.reports, cfg.classes);
  write_rounds_csv((fs::path(out_dir) / "rounds.csv").string(), result.reports);
  io::write_labels_jsonl((fs::path(out_dir) / "labels_final.jsonl").string(),
                         result.final_memories, cfg.classes);
  json rounds = json::array();
  for (const auto& r : result.reports) rounds.push_back(report_to_json(r, cfg.classes));
  {
    std::ofstream out(fs::path(out_dir) / "report.json");
    out << json({{"rounds", std::move(rounds)}}).dump(2) << "\n";
  }
  std::cout << "done: " << result.reports.size() << " rounds, outputs in " << out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& preds_path, const std::string& gt_path,
             const std::string& config_path, const std::string& out_path) {
  io::RunConfig cfg = load_or_default(config_path);
  const auto gt_scenes = io::read_scenes_jsonl(gt_path, cfg.classes);
  const auto preds = io::read_predictions_jsonl(preds_path, cfg.classes);

  std::vector<memory::SceneMemory> memories;
  memories.reserve(preds.size());
  for (const auto& [id, dets] : preds) {
    memory::SceneMemory m;
    m.scene_id = id;
    for (const auto& d : dets) {
      m.entries.push_back({d.box, d.class_id, d.p, scoring::BoxState::Positive, 0});
    }
    memories.push_back(std::move(m));
  }
  const evalkit::QualityReport q =
      evalkit::quality_report(memories, gt_scenes, cfg.pipeline.eval);

  std::printf("%-12s %6s %6s %6s %9s %9s %9s %9s %9s\n", "class", "tp", "fp", "fn", "ap_bev",
              "ap_3d", "ate", "ase", "aoe");
  for (const auto& [cls, cq] : q.per_class) {
    std::printf("%-12s %6ld %6ld %6ld %9s %9s %9s %9s %9s\n",
                cfg.classes.name_for(cls).c_str(), cq.tp, cq.fp, cq.fn,
                fmt_opt(cq.ap_bev).c_str(), fmt_opt(cq.ap_3d).c_str(), fmt_opt(cq.ate).c_str(),
                fmt_opt(cq.ase).c_str(), fmt_opt(cq.aoe).c_str());
  }
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw io::DataError("cannot open '" + out_path + "' for writing");
    out << quality_to_json(q, cfg.classes).dump(2) << "\n";
  }
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& out_dir,
               const std::optional<std::uint64_t>& seed, const std::optional<int>& jobs) {
  io::RunConfig cfg = load_or_default(config_path);
  apply_overrides(cfg, seed, jobs);
  if (out_dir.empty()) throw io::ConfigError("config: ablate needs --out");
  if (cfg.data_source.empty() || cfg.data_target.empty()) {
    throw io::ConfigError("config: data.source and data.target must point to dataset files");
  }
  const auto source = io::read_scenes_jsonl(cfg.data_source, cfg.classes);
  const auto target = io::read_scenes_jsonl(cfg.data_target, cfg.classes);
  fs::create_directories(out_dir);

  const std::pair<const char*, memory::EnsembleVariant> variants[] = {
      {"consistency", memory::EnsembleVariant::Consistency},
      {"nms", memory::EnsembleVariant::Nms},
      {"bipartite", memory::EnsembleVariant::Bipartite},
  };
  // "avg" merging resolves to the max-score rule; both rows are emitted so
  // the grid shape stays 3 x 2 x 2.
  const char* merges[] = {"max", "avg"};
  const bool votings[] = {true, false};

  const std::string csv_path = (fs::path(out_dir) / "ablation.csv").string();
  std::ofstream out(csv_path);
  if (!out) throw io::DataError("cannot open '" + csv_path + "' for writing");
  out << "variant,merge,voting,final_round,positives,ignored,ap_3d_mean,ap_bev_mean,"
         "ate_mean,ase_mean,aoe_mean\n";
  for (const auto& [vname, variant] : variants) {
    for (const char* merge : merges) {
      for (bool voting : votings) {
        pipeline::PipelineConfig pc = cfg.pipeline;
        pc.ensemble.variant = variant;
        pc.ensemble.voting = voting;
        const pipeline::RunResult res = pipeline::run(source, target, pc);
        const pipeline::RoundReport& last = res.reports.back();
        double ap3 = 0.0, apb = 0.0, ate = 0.0, ase = 0.0, aoe = 0.0;
        int n3 = 0, nb = 0, ne = 0;
        for (const auto& [cls, q] : last.quality.per_class) {
          if (q.ap_3d) {
            ap3 += *q.ap_3d;
            ++n3;
          }
          if (q.ap_bev) {
            apb += *q.ap_bev;
            ++nb;
          }
          if (q.ate) {
            ate += *q.ate;
            ase += *q.ase;
            aoe += *q.aoe;
            ++ne;
          }
        }
        out << vname << ',' << merge << ',' << (voting ? "on" : "off") << ',' << last.round
            << ',' << last.positive_count << ',' << last.ignored_count << ','
            << (n3 ? fmt(ap3 / n3) : "") << ',' << (nb ? fmt(apb / nb) : "") << ','
            << (ne ? fmt(ate / ne) : "") << ',' << (ne ? fmt(ase / ne) : "") << ','
            << (ne ? fmt(aoe / ne) : "") << "\n";
        std::cout << "ablate " << vname << "/" << merge << "/" << (voting ? "on" : "off")
                  << ": positives " << last.positive_count << "\n";
      }
    }
  }
  std::cout << "wrote " << csv_path << "\n";
  return 0;
}

int cmd_report(const std::string& run_dir) {
  const fs::path path = fs::path(run_dir) / "report.json";
  std::ifstream in(path);
  if (!in) throw io::DataError("cannot open '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw io::DataError("invalid report JSON: " + std::string(e.what()));
  }
  if (!j.contains("rounds") || !j["rounds"].is_array()) {
    throw io::DataError("report JSON has no 'rounds' array");
  }
  std::printf("%5s %5s %9s %8s %8s  %s\n", "round", "stage", "positives", "ignored", "churn",
              "per-class ap_3d");
  for (const json& r : j["rounds"]) {
    std::string aps;
    if (r.contains("quality")) {
      for (const auto& item : r["quality"].items()) {
        if (item.value().contains("ap_3d")) {
          aps += item.key() + "=" + fmt(item.value()["ap_3d"].get<double>()) + " ";
        }
      }
    }
    std::printf("%5d %5d %9ld %8ld %8s  %s\n", r.value("round", 0), r.value("stage", 0),
                static_cast<long>(r.value("positives", 0)),
                static_cast<long>(r.value("ignored", 0)), fmt(r.value("churn", 0.0)).c_str(),
                aps.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pseudo-label denoising simulator for 3D object detection"};
  app.require_subcommand(1);

  std::string config_path, out_dir, preds_path, gt_path, out_path, run_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  bool dry_run = false;

  CLI::App* gen = app.add_subcommand("gen-dataset", "generate synthetic source/target datasets");
  gen->add_option("--config", config_path, "config file (JSON)");
  gen->add_option("--out", out_dir, "output directory")->required();
  gen->add_option("--seed", seed, "override the config seed");

  CLI::App* runc = app.add_subcommand("run", "run the self-training loop");
  runc->add_option("--config", config_path, "config file (JSON)");
  runc->add_option("--out", out_dir, "output directory");
  runc->add_option("--seed", seed, "override the config seed");
  runc->add_option("--jobs", jobs, "worker threads for the per-scene phase");
  runc->add_flag("--dry-run", dry_run, "validate the config and exit");

  CLI::App* evalc = app.add_subcommand("eval", "score predictions against ground truth");
  evalc->add_option("preds", preds_path, "predictions (labels or dataset JSONL)")->required();
  evalc->add_option("gt", gt_path, "ground truth dataset JSONL")->required();
  evalc->add_option("--config", config_path, "config file (JSON)");
  evalc->add_option("--out", out_path, "also write the metrics as JSON");

  CLI::App* ablc = app.add_subcommand("ablate", "run the ensemble/merge/voting grid");
  ablc->add_option("--config", config_path, "config file (JSON)");
  ablc->add_option("--out", out_dir, "output directory")->required();
  ablc->add_option("--seed", seed, "override the config seed");
  ablc->add_option("--jobs", jobs, "worker threads for the per-scene phase");

  CLI::App* repc = app.add_subcommand("report", "print the per-round table of a finished run");
  repc->add_option("run_dir", run_dir, "output directory of a previous run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_dataset(config_path, out_dir, seed);
    if (runc->parsed()) return cmd_run(config_path, out_dir, seed, jobs, dry_run);
    if (evalc->parsed()) return cmd_eval(preds_path, gt_path, config_path, out_path);
    if (ablc->parsed()) return cmd_ablate(config_path, out_dir, seed, jobs);
    if (repc->parsed()) return cmd_report(run_dir);
  } catch (const io::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const io::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
