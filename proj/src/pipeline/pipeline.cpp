#include "conetrack/pipeline/pipeline.hpp"

#include "conetrack/io/json_io.hpp"
#include "conetrack/sim/scenario.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <sstream>

namespace conetrack::pipeline {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

const std::array<SensorSource, 3> kSources{SensorSource::kFusion, SensorSource::kLidarOnly, SensorSource::kCameraOnly};

}  // namespace

sim::TrackDefinition load_track(const RunConfig& config) {
  if (config.track_file) {
    try {
      return io::track_from_json(io::read_json_file(*config.track_file));
    } catch (const std::exception& e) {
      throw ConfigError("track file: " + std::string(e.what()));
    }
  }
  try {
    return sim::generate_track(config.track_spec, config.track_seed);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

bool pipeline_alive(const std::vector<ModeWindow>& schedule, SensorSource source, double t) {
  for (const ModeWindow& w : schedule) {
    if (t < w.start_s || t >= w.end_s) continue;
    if (w.pipeline == source) return false;
    if (source == SensorSource::kFusion) return false;  // camera or LiDAR down
  }
  return true;
}

Backend::Backend(const RunConfig& config, const Pose2d& world_origin)
    : config_(config), builder_([&] {
        global_map::GraphConfig g = config.graph;
        g.world_origin = world_origin;
        return g;
      }()) {}

const planner::PlanRecord& Backend::consume(const local_map::LocalMapSnapshot& snapshot,
                                            const std::optional<Pose2d>& true_pose) {
  auto start = Clock::now();
  last_plan_ = planner::plan(snapshot, config_.planner);
  plans_.push_back(planner::make_record(last_plan_, snapshot.timestamp, config_.verbose_candidates, true_pose));
  times_["planner"].push_back(seconds_since(start));

  start = Clock::now();
  builder_.add_snapshot(snapshot);
  if (builder_.snapshot_count() % static_cast<std::size_t>(config_.optimize_every) == 0) {
    const global_map::OptimizeResult solved = global_map::optimize(builder_.graph(), config_.solver);
    global_map::merge_estimates(builder_.mutable_graph(), solved.graph);
  }
  times_["global_map"].push_back(seconds_since(start));
  return plans_.back();
}

void Backend::finish() {
  const auto start = Clock::now();
  final_solve_ = global_map::optimize(builder_.graph(), config_.solver);
  map_ = global_map::export_map(final_solve_.graph);
  dead_reckoning_map_ = global_map::export_map(global_map::dead_reckoning_map(builder_.graph()));
  times_["global_map_final"].push_back(seconds_since(start));
}

namespace {

/// Body-frame motion along a circular arc of the given curvature.
Pose2d arc_motion(double curvature, double distance) {
  const double dtheta = curvature * distance;
  if (std::abs(curvature) < 1e-9) return Pose2d(distance, 0.0, 0.0);
  return Pose2d(std::sin(dtheta) / curvature, (1.0 - std::cos(dtheta)) / curvature, dtheta);
}

/// Pure-pursuit curvature toward the selected path, or nullopt without one.
std::optional<double> pursuit_curvature(const planner::PlanRecord& plan, double lookahead) {
  if (!plan.has_path || plan.waypoints.empty()) return std::nullopt;
  Vector2d target = to_body(plan.ego, plan.waypoints.back());
  for (const Vector2d& w : plan.waypoints) {
    const Vector2d b = to_body(plan.ego, w);
    if (b.norm() >= lookahead) {
      target = b;
      break;
    }
  }
  const double d2 = target.squaredNorm();
  if (d2 < 1e-9) return std::nullopt;
  return 2.0 * target.y() / d2;
}

}  // namespace

RunOutputs run_pipeline(const RunConfig& config) {
  config.validate();
  RunOutputs out;
  out.config = config;
  out.track = load_track(config);
  out.world_origin = sim::start_pose(out.track);

  sim::SimRun run;
  run.track = out.track;
  const sim::Centerline centerline(out.track.centerline);
  run.speed_profile = config.speed.curvature_limited
                          ? sim::SpeedProfile::curvature_limited(centerline, config.speed.max_speed_mps,
                                                                 config.speed.lateral_accel_mps2)
                          : sim::SpeedProfile::constant(config.speed.max_speed_mps);
  run.frame_rate = config.frame_rate_hz;
  run.seed = config.seed;
  run.velocity_noise = config.noise_free ? sim::VelocityNoise::none() : config.velocity_noise;
  run.laps = config.laps;
  run.extra_distance = config.extra_distance_m;
  try {
    run.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  std::array<sim::SensorProfile, 3> profiles;
  for (SensorSource s : kSources) profiles[static_cast<std::size_t>(s)] = effective_profile(config, s);

  sim::Simulator simulator(run);
  local_map::LocalMap local(config.local_map);
  Backend backend(out.config, out.world_origin);
  const double half_width = 0.5 * config.track_spec.width;
  double curvature = 0.0;
  out.completed = true;
  out.status = "completed";

  while (true) {
    auto start = Clock::now();
    const bool degraded = !out.snapshots.empty() && out.snapshots.back().mode != local_map::Mode::kFusion;
    const double cap = degraded ? config.speed.degraded_speed_mps : std::numeric_limits<double>::infinity();
    sim::TruthStep step;
    if (!config.closed_loop.enabled) {
      const auto next = simulator.advance(cap);
      if (!next) break;
      step = *next;
    } else {
      Pose2d pose = out.world_origin;
      if (!out.snapshots.empty()) {
        if (const auto k = pursuit_curvature(backend.plans().back(), config.closed_loop.lookahead_m)) curvature = *k;
        const double s = std::fmod(simulator.current().progress, centerline.length());
        const double v = std::min(cap, run.speed_profile.at(s < 0.0 ? s + centerline.length() : s));
        pose = compose(simulator.current().pose, arc_motion(curvature, v / config.frame_rate_hz));
      }
      step = simulator.advance_to(pose);
      if (simulator.finished()) break;
      if (centerline.distance_to(step.pose.translation()) > half_width + config.closed_loop.divergence_margin_m) {
        out.completed = false;
        out.status = "diverged";
        break;
      }
    }

    local_map::Frame frame;
    frame.timestamp = step.timestamp;
    frame.dt = step.dt;
    frame.velocity = simulator.measure_velocity();
    for (SensorSource s : kSources) {
      if (!pipeline_alive(config.mode_schedule, s, step.timestamp)) continue;
      frame.batches.push_back({s, simulator.observe(profiles[static_cast<std::size_t>(s)])});
    }
    out.times["simulation"].push_back(seconds_since(start));

    start = Clock::now();
    if (frame.batches.empty() && !local.select_mode(step.timestamp)) {
      out.completed = false;
      out.status = "no_perception";
      break;
    }
    local_map::LocalMapSnapshot snapshot = local.ingest_frame(frame);
    out.times["local_map"].push_back(seconds_since(start));

    backend.consume(snapshot, step.pose);
    out.snapshots.push_back(std::move(snapshot));
    out.true_poses.push_back(step.pose);
    out.driven_distance = step.progress;
    out.simulated_time = step.timestamp;
  }
  backend.finish();
  out.plans = backend.plans();
  out.final_solve = backend.final_solve();
  out.graph = out.final_solve.graph;
  out.map = backend.map();
  out.dead_reckoning_map = backend.dead_reckoning_map();
  for (const auto& [stage, samples] : backend.times()) out.times[stage] = samples;
  return out;
}

std::optional<eval::MapMetrics> evaluate_map(const std::vector<global_map::MapCone>& map,
                                             const sim::TrackDefinition& truth, const eval::IcpConfig& icp) {
  if (map.empty() || truth.cones.empty()) return std::nullopt;
  std::vector<Vector2d> est;
  std::vector<std::int64_t> ids;
  for (const global_map::MapCone& c : map) {
    est.push_back(c.position);
    ids.push_back(c.id);
  }
  std::vector<Vector2d> gt;
  for (const sim::TrackCone& c : truth.cones) gt.push_back(c.position);
  return eval::map_metrics(eval::icp_align(est, gt, Pose2d(), icp, ids));
}

eval::Report make_report(const RunOutputs& o) {
  eval::Report r;
  r.scenario = o.config.scenario;
  r.seed = o.config.seed;
  r.completed = o.completed;
  r.status = o.status;
  r.driven_distance_m = o.driven_distance;
  r.simulated_time_s = o.simulated_time;
  r.frames = static_cast<int>(o.snapshots.size());
  if (const auto m = evaluate_map(o.map, o.track)) {
    r.has_map = true;
    r.map = *m;
  }
  if (const auto m = evaluate_map(o.dead_reckoning_map, o.track)) {
    r.has_dead_reckoning = true;
    r.dead_reckoning = *m;
  }
  r.planning = eval::planning_stats(o.plans, o.track, o.world_origin);
  for (const auto& [stage, samples] : o.times) r.timing[stage] = eval::summarize_timing(samples);
  return r;
}

void write_outputs(const RunOutputs& o, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path d(dir);
  io::write_json_file((d / "config.json").string(), io::to_json(o.config));
  io::write_json_file((d / "track.json").string(), io::to_json(o.track));

  std::string snapshots = io::snapshot_log_header({o.world_origin, o.config.frame_rate_hz}) + "\n";
  for (std::size_t i = 0; i < o.snapshots.size(); ++i) {
    snapshots += io::snapshot_log_line(o.snapshots[i], o.true_poses[i]) + "\n";
  }
  io::write_text_file((d / "snapshots.ndjson").string(), snapshots);
  io::write_text_file((d / "planner.ndjson").string(), io::planner_log(o.plans));
  io::write_json_file((d / "graph.json").string(), io::graph_dump(o.graph, &o.final_solve));
  io::write_json_file((d / "map.json").string(), io::to_json(o.map));
  io::write_json_file((d / "map_dead_reckoning.json").string(), io::to_json(o.dead_reckoning_map));

  const eval::Report report = make_report(o);
  io::write_json_file((d / "report.json").string(), io::to_json(report));
  io::write_text_file((d / "histograms.csv").string(), eval::histogram_csv(report.planning));

  std::ostringstream timing;
  timing << "stage,frame,seconds\n";
  for (const auto& [stage, samples] : o.times) {
    for (std::size_t i = 0; i < samples.size(); ++i) timing << stage << ',' << i << ',' << samples[i] << '\n';
  }
  io::write_text_file((d / "timing.csv").string(), timing.str());
}

}  // namespace conetrack::pipeline
