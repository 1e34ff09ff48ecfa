// conetrack: generate tracks, run the pipeline, replay snapshot logs, evaluate outputs.

#include "conetrack/eval/eval.hpp"
#include "conetrack/io/json_io.hpp"
#include "conetrack/pipeline/config.hpp"
#include "conetrack/pipeline/pipeline.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>
#include <sstream>

namespace {

using namespace conetrack;

constexpr int kOk = 0;
constexpr int kRunFailure = 1;
constexpr int kConfigError = 2;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> profiles;
  std::string mode_schedule;
  std::string scenario;
  bool closed_loop{false};
  bool verbose_candidates{false};
  // replay / eval
  std::string log_path;
  std::string baseline;
  std::string track;
  std::string map;
  std::string planner_log;
};

pipeline::RunConfig load_config(const Options& o) {
  pipeline::RunConfig c;
  if (!o.config_path.empty()) {
    io::Json j;
    try {
      j = io::read_json_file(o.config_path);
    } catch (const std::exception& e) {
      throw pipeline::ConfigError(e.what());
    }
    if (!o.scenario.empty()) j["scenario"] = o.scenario;
    c = io::config_from_json(j);
  } else {
    c = pipeline::scenario_preset(o.scenario.empty() ? "custom" : o.scenario);
  }
  if (o.seed) c.seed = *o.seed;
  for (const std::string& path : o.profiles) {
    try {
      const sim::SensorProfile p = io::profile_from_json(io::read_json_file(path));
      c.profiles[static_cast<std::size_t>(p.mode)] = p;
    } catch (const std::exception& e) {
      throw pipeline::ConfigError("profile " + path + ": " + e.what());
    }
  }
  if (!o.mode_schedule.empty()) c.mode_schedule = pipeline::parse_mode_schedule(o.mode_schedule);
  if (o.closed_loop) c.closed_loop.enabled = true;
  if (o.verbose_candidates) c.verbose_candidates = true;
  if (!o.out.empty()) c.out_dir = o.out;
  c.validate();
  return c;
}

int cmd_generate(const Options& o) {
  pipeline::RunConfig c = load_config(Options{o.config_path, std::nullopt, "", {}, "", o.scenario});
  if (o.seed) c.track_seed = *o.seed;
  if (o.out.empty()) throw pipeline::ConfigError("generate needs --out");
  c.track_file.reset();
  const sim::TrackDefinition track = pipeline::load_track(c);
  io::write_json_file(o.out, io::to_json(track));
  std::cout << "track: " << track.cones.size() << " cones, " << track.total_length << " m -> " << o.out << "\n";
  return kOk;
}

int cmd_run(const Options& o) {
  const pipeline::RunConfig c = load_config(o);
  const pipeline::RunOutputs outputs = pipeline::run_pipeline(c);
  pipeline::write_outputs(outputs, c.out_dir);
  const eval::Report report = io::report_from_json(io::read_json_file(c.out_dir + "/report.json"));
  std::cout << "status: " << outputs.status << ", frames: " << outputs.snapshots.size()
            << ", distance: " << outputs.driven_distance << " m\n";
  if (report.has_map) {
    std::cout << "map rmse: " << report.map.rmse_m << " m (" << report.map.matched << " matched, "
              << report.map.unmatched_estimated << " unmatched estimated, " << report.map.unmatched_truth
              << " unmatched truth)\n";
  }
  if (report.has_dead_reckoning) std::cout << "dead-reckoning rmse: " << report.dead_reckoning.rmse_m << " m\n";
  std::cout << "paths in 15 m bin: " << report.planning.max_bin_fraction()
            << ", out of track within 5 m: " << report.planning.out_of_track_within(5.0) << "\n";
  if (!outputs.completed) {
    std::cerr << "run failed: " << outputs.status << "\n";
    return kRunFailure;
  }
  return kOk;
}

int cmd_replay(const Options& o) {
  pipeline::RunConfig c = load_config(o);
  const io::SnapshotLog log = io::read_snapshot_log(o.log_path);
  std::filesystem::create_directories(c.out_dir);
  const std::filesystem::path d(c.out_dir);

  pipeline::Backend backend(c, log.header.world_origin);
  for (const io::SnapshotLogEntry& e : log.entries) backend.consume(e.snapshot, e.true_pose);
  backend.finish();

  io::write_text_file((d / "planner.ndjson").string(), io::planner_log(backend.plans()));
  io::write_json_file((d / "graph.json").string(), io::graph_dump(backend.final_solve().graph, &backend.final_solve()));
  io::write_json_file((d / "map.json").string(), io::to_json(backend.map()));

  if (!o.track.empty()) {
    const sim::TrackDefinition track = io::track_from_json(io::read_json_file(o.track));
    eval::Report r;
    r.scenario = c.scenario;
    r.seed = c.seed;
    r.completed = !log.truncated;
    r.status = log.truncated ? "truncated_log" : "replayed";
    r.frames = static_cast<int>(log.entries.size());
    r.simulated_time_s = log.entries.empty() ? 0.0 : log.entries.back().snapshot.timestamp;
    if (const auto m = pipeline::evaluate_map(backend.map(), track)) {
      r.has_map = true;
      r.map = *m;
    }
    if (const auto m = pipeline::evaluate_map(backend.dead_reckoning_map(), track)) {
      r.has_dead_reckoning = true;
      r.dead_reckoning = *m;
    }
    r.planning = eval::planning_stats(backend.plans(), track, log.header.world_origin);
    for (const auto& [stage, samples] : backend.times()) r.timing[stage] = eval::summarize_timing(samples);
    io::write_json_file((d / "report.json").string(), io::to_json(r));
    io::write_text_file((d / "histograms.csv").string(), eval::histogram_csv(r.planning));
  }

  if (!o.baseline.empty()) {
    const std::vector<planner::PlanRecord> base = io::read_planner_log(o.baseline);
    std::ostringstream deltas;
    deltas << "timestamp_s,baseline_log_posterior,log_posterior,delta_log_posterior,baseline_path_length_m,"
              "path_length_m,selection_changed\n";
    int changed = 0;
    const auto& now = backend.plans();
    for (std::size_t i = 0; i < std::min(base.size(), now.size()); ++i) {
      const bool diff = base[i].has_path != now[i].has_path || base[i].waypoints != now[i].waypoints;
      changed += diff ? 1 : 0;
      deltas << now[i].timestamp << ',' << base[i].log_posterior << ',' << now[i].log_posterior << ','
             << now[i].log_posterior - base[i].log_posterior << ',' << base[i].length << ',' << now[i].length
             << ',' << (diff ? 1 : 0) << '\n';
    }
    io::write_text_file((d / "score_deltas.csv").string(), deltas.str());
    std::cout << "selections changed: " << changed << " of " << std::min(base.size(), now.size()) << "\n";
  }

  std::cout << "replayed " << log.entries.size() << " snapshots -> " << c.out_dir << "\n";
  if (log.truncated) {
    std::cerr << "log truncated: " << log.error << "\n";
    return kRunFailure;
  }
  return kOk;
}

int cmd_eval(const Options& o) {
  if (o.track.empty()) throw pipeline::ConfigError("eval needs --track");
  const sim::TrackDefinition track = io::track_from_json(io::read_json_file(o.track));
  eval::Report r;
  r.scenario = "eval";
  r.completed = true;
  r.status = "evaluated";
  if (!o.map.empty()) {
    if (const auto m = pipeline::evaluate_map(io::map_from_json(io::read_json_file(o.map)), track)) {
      r.has_map = true;
      r.map = *m;
    }
  }
  if (!o.planner_log.empty()) {
    const auto records = io::read_planner_log(o.planner_log);
    r.frames = static_cast<int>(records.size());
    r.planning = eval::planning_stats(records, track, sim::start_pose(track));
  }
  const std::string out = o.out.empty() ? "report.json" : o.out;
  io::write_json_file(out, io::to_json(r));
  const std::filesystem::path csv = std::filesystem::path(out).replace_extension(".csv");
  io::write_text_file(csv.string(), eval::histogram_csv(r.planning));
  if (r.has_map) std::cout << "map rmse: " << r.map.rmse_m << " m\n";
  std::cout << "report -> " << out << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cone mapping and planning pipeline"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config_path, "Run configuration JSON");
    cmd->add_option("--seed", o.seed, "Seed");
    cmd->add_option("--out", o.out, "Output path");
    cmd->add_option("--scenario", o.scenario, "Named scenario preset");
  };

  CLI::App* generate = app.add_subcommand("generate", "Generate a track file");
  add_common(generate);

  CLI::App* run = app.add_subcommand("run", "Run the full pipeline");
  add_common(run);
  run->add_option("--profile", o.profiles, "Sensor profile JSON (repeatable)");
  run->add_option("--mode-schedule", o.mode_schedule, "Pipeline failures, e.g. camera@10 or lidar@0-20");
  run->add_flag("--closed-loop", o.closed_loop, "Steer along the planned path");
  run->add_flag("--verbose-candidates", o.verbose_candidates, "Log every candidate's scores");

  CLI::App* replay = app.add_subcommand("replay", "Re-run planner and global map on a snapshot log");
  add_common(replay);
  replay->add_option("log", o.log_path, "Snapshot log (NDJSON)")->required();
  replay->add_flag("--verbose-candidates", o.verbose_candidates, "Log every candidate's scores");
  replay->add_option("--baseline", o.baseline, "Planner log to compare selections against");
  replay->add_option("--track", o.track, "Ground-truth track for the report");

  CLI::App* evaluate = app.add_subcommand("eval", "Evaluate a map and planner log against a track");
  evaluate->add_option("--track", o.track, "Ground-truth track JSON")->required();
  evaluate->add_option("--map", o.map, "Exported map JSON");
  evaluate->add_option("--planner-log", o.planner_log, "Planner log (NDJSON)");
  evaluate->add_option("--out", o.out, "Report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (generate->parsed()) return cmd_generate(o);
    if (run->parsed()) return cmd_run(o);
    if (replay->parsed()) return cmd_replay(o);
    if (evaluate->parsed()) return cmd_eval(o);
  } catch (const pipeline::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const io::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRunFailure;
  }
  return kConfigError;
}
