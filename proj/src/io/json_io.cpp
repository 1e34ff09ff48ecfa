#include "conetrack/io/json_io.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>

namespace conetrack::io {

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

void write_json_file(const std::string& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

namespace {

template <typename T>
T required(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw SchemaError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw SchemaError(std::string("field '") + key + "': " + e.what());
  }
}

/// Infinite values are written as null.
Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
double number_or_inf(const Json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

Json point(const Vector2d& p) { return {{"x_m", p.x()}, {"y_m", p.y()}}; }

Vector2d point_from(const Json& j) {
  if (j.contains("x_m")) return {required<double>(j, "x_m"), required<double>(j, "y_m")};
  return {required<double>(j, "x"), required<double>(j, "y")};
}

Json curve(const sim::RangeCurve& c) {
  Json a = Json::array();
  for (const auto& [upper, value] : c.bins) a.push_back({{"upper_m", upper}, {"value", value}});
  return a;
}

sim::RangeCurve curve_from(const Json& j) {
  sim::RangeCurve c;
  for (const Json& b : j) c.bins.emplace_back(required<double>(b, "upper_m"), required<double>(b, "value"));
  return c;
}

Json color_json(const ColorDistribution& c) { return Json::array({c.p_blue, c.p_yellow, c.p_unknown}); }

ColorDistribution color_from(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw SchemaError("colour must be [p_blue, p_yellow, p_unknown]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::string color_name(const ColorDistribution& c) {
  switch (c.argmax()) {
    case ColorClass::kBlue:
      return "blue";
    case ColorClass::kYellow:
      return "yellow";
    case ColorClass::kUnknown:
      break;
  }
  return "unknown";
}

ColorDistribution color_from_name(const std::string& s) {
  if (s == "blue") return ColorDistribution::certain(ColorClass::kBlue);
  if (s == "yellow") return ColorDistribution::certain(ColorClass::kYellow);
  if (s == "unknown" || s == "orange") return ColorDistribution::certain(ColorClass::kUnknown);
  throw SchemaError("unknown colour '" + s + "'");
}

void check_schema(const Json& j, const char* schema) {
  const std::string found = j.is_object() ? j.value("schema", std::string()) : std::string();
  if (found != schema) {
    throw SchemaError("schema mismatch: expected '" + std::string(schema) + "', found '" + found + "'");
  }
}

}  // namespace

Json to_json(const Pose2d& p) { return {{"x_m", p.x}, {"y_m", p.y}, {"theta_rad", p.theta}}; }

Pose2d pose_from_json(const Json& j) {
  return Pose2d(required<double>(j, "x_m"), required<double>(j, "y_m"), required<double>(j, "theta_rad"));
}

Json to_json(const sim::TrackDefinition& track) {
  Json cones = Json::array();
  for (const sim::TrackCone& c : track.cones) {
    cones.push_back({{"x_m", c.position.x()}, {"y_m", c.position.y()}, {"color", to_string(c.color)}});
  }
  Json centerline = Json::array();
  for (const Vector2d& p : track.centerline) centerline.push_back(point(p));
  return {{"schema", kTrackSchema},
          {"total_length_m", track.total_length},
          {"cones", cones},
          {"centerline", centerline}};
}

sim::TrackDefinition track_from_json(const Json& j) {
  check_schema(j, kTrackSchema);
  sim::TrackDefinition t;
  t.total_length = required<double>(j, "total_length_m");
  try {
    for (const Json& c : j.at("cones")) {
      t.cones.push_back({point_from(c), cone_color_from_string(required<std::string>(c, "color"))});
    }
    for (const Json& p : j.at("centerline")) t.centerline.push_back(point_from(p));
  } catch (const std::invalid_argument& e) {
    throw SchemaError(e.what());
  } catch (const Json::exception& e) {
    throw SchemaError(e.what());
  }
  if (t.centerline.size() < 3) throw SchemaError("track centerline needs at least three points");
  return t;
}

Json to_json(const sim::SensorProfile& p) {
  return {{"mode", to_string(p.mode)},
          {"max_range_m", p.max_range},
          {"fov_half_angle_rad", p.fov_half_angle},
          {"sigma_base_m", p.sigma_base},
          {"sigma_range_coeff_per_m", p.sigma_range_coeff},
          {"radial_scale", p.radial_scale},
          {"color_accuracy", curve(p.color_accuracy)},
          {"recall", curve(p.recall)},
          {"false_positives_per_frame", p.false_positive_rate}};
}

sim::SensorProfile profile_from_json(const Json& j) {
  sim::SensorProfile p;
  try {
    p.mode = sensor_source_from_string(required<std::string>(j, "mode"));
  } catch (const std::invalid_argument& e) {
    throw SchemaError(e.what());
  }
  p = sim::default_profile(p.mode);
  if (j.contains("max_range_m")) p.max_range = j["max_range_m"].get<double>();
  if (j.contains("fov_half_angle_rad")) p.fov_half_angle = j["fov_half_angle_rad"].get<double>();
  if (j.contains("sigma_base_m")) p.sigma_base = j["sigma_base_m"].get<double>();
  if (j.contains("sigma_range_coeff_per_m")) p.sigma_range_coeff = j["sigma_range_coeff_per_m"].get<double>();
  if (j.contains("radial_scale")) p.radial_scale = j["radial_scale"].get<double>();
  if (j.contains("color_accuracy")) p.color_accuracy = curve_from(j["color_accuracy"]);
  if (j.contains("recall")) p.recall = curve_from(j["recall"]);
  if (j.contains("false_positives_per_frame")) p.false_positive_rate = j["false_positives_per_frame"].get<double>();
  return p;
}

Json to_json(const local_map::LocalMapSnapshot& s, const std::optional<Pose2d>& true_pose) {
  Json cones = Json::array();
  for (const ConeEstimate& c : s.cones) {
    const Matrix2d& P = c.position.cov;
    cones.push_back({{"id", c.id},
                     {"x_m", c.position.mean.x()},
                     {"y_m", c.position.mean.y()},
                     {"cov_m2", {P(0, 0), P(0, 1), P(1, 1)}},
                     {"color", color_json(c.color)},
                     {"evidence", {c.color_evidence.x(), c.color_evidence.y(), c.color_evidence.z()}},
                     {"existence", c.existence},
                     {"last_seen_s", c.last_seen}});
  }
  Json j = {{"timestamp_s", s.timestamp}, {"mode", local_map::to_string(s.mode)}, {"ego", to_json(s.ego)},
            {"cones", cones}};
  if (true_pose) j["true_pose"] = to_json(*true_pose);
  return j;
}

local_map::LocalMapSnapshot snapshot_from_json(const Json& j, std::optional<Pose2d>* true_pose) {
  local_map::LocalMapSnapshot s;
  s.timestamp = required<double>(j, "timestamp_s");
  try {
    s.mode = local_map::mode_from_string(required<std::string>(j, "mode"));
  } catch (const std::invalid_argument& e) {
    throw SchemaError(e.what());
  }
  s.ego = pose_from_json(j.at("ego"));
  for (const Json& c : j.at("cones")) {
    ConeEstimate e;
    e.id = required<std::int64_t>(c, "id");
    e.position.mean = {required<double>(c, "x_m"), required<double>(c, "y_m")};
    const auto cov = required<std::vector<double>>(c, "cov_m2");
    if (cov.size() != 3) throw SchemaError("cov_m2 must hold [xx, xy, yy]");
    e.position.cov << cov[0], cov[1], cov[1], cov[2];
    e.color = color_from(c.at("color"));
    const auto ev = required<std::vector<double>>(c, "evidence");
    if (ev.size() != 3) throw SchemaError("evidence must have three entries");
    e.color_evidence = {ev[0], ev[1], ev[2]};
    e.existence = required<double>(c, "existence");
    e.last_seen = required<double>(c, "last_seen_s");
    s.cones.push_back(e);
  }
  if (true_pose) {
    *true_pose = j.contains("true_pose") ? std::optional<Pose2d>(pose_from_json(j["true_pose"])) : std::nullopt;
  }
  return s;
}

std::string snapshot_log_header(const SnapshotLogHeader& header) {
  return Json{{"schema", kSnapshotSchema},
              {"world_origin", to_json(header.world_origin)},
              {"frame_rate_hz", header.frame_rate_hz}}
      .dump();
}

std::string snapshot_log_line(const local_map::LocalMapSnapshot& snapshot,
                              const std::optional<Pose2d>& true_pose) {
  return to_json(snapshot, true_pose).dump();
}

SnapshotLog read_snapshot_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  SnapshotLog log;
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path + ": empty snapshot log");
  Json header;
  try {
    header = Json::parse(line);
  } catch (const Json::exception& e) {
    throw SchemaError(path + ": unreadable header: " + e.what());
  }
  check_schema(header, kSnapshotSchema);
  log.header.world_origin = pose_from_json(header.at("world_origin"));
  log.header.frame_rate_hz = required<double>(header, "frame_rate_hz");
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      SnapshotLogEntry e;
      e.snapshot = snapshot_from_json(Json::parse(line), &e.true_pose);
      if (!log.entries.empty() && e.snapshot.timestamp < log.entries.back().snapshot.timestamp) {
        throw SchemaError("timestamps go backwards");
      }
      log.entries.push_back(std::move(e));
    } catch (const std::exception& e) {
      log.truncated = true;
      log.error = path + ":" + std::to_string(line_no) + ": " + e.what();
      break;
    }
  }
  return log;
}

Json to_json(const planner::PlanRecord& r) {
  Json waypoints = Json::array();
  for (const Vector2d& w : r.waypoints) waypoints.push_back(point(w));
  Json j = {{"timestamp_s", r.timestamp},
            {"ego", to_json(r.ego)},
            {"has_path", r.has_path},
            {"waypoints", waypoints},
            {"left_cone_ids", r.left_ids},
            {"right_cone_ids", r.right_ids},
            {"log_prior", r.log_prior},
            {"log_likelihood", r.log_likelihood},
            {"log_posterior", r.log_posterior},
            {"path_length_m", r.length},
            {"candidate_count", r.candidate_count}};
  if (r.true_pose) j["true_pose"] = to_json(*r.true_pose);
  if (!r.candidates.empty()) {
    Json cands = Json::array();
    for (const planner::CandidateScore& c : r.candidates) {
      cands.push_back({{"log_prior", c.log_prior},
                       {"log_likelihood", c.log_likelihood},
                       {"log_posterior", c.log_posterior},
                       {"path_length_m", c.length},
                       {"crossed_edges", c.crossed_edges},
                       {"maximal", c.maximal}});
    }
    j["candidates"] = cands;
  }
  return j;
}

planner::PlanRecord plan_record_from_json(const Json& j) {
  planner::PlanRecord r;
  r.timestamp = required<double>(j, "timestamp_s");
  r.ego = pose_from_json(j.at("ego"));
  if (j.contains("true_pose")) r.true_pose = pose_from_json(j["true_pose"]);
  r.has_path = required<bool>(j, "has_path");
  for (const Json& w : j.at("waypoints")) r.waypoints.push_back(point_from(w));
  r.left_ids = required<std::vector<std::int64_t>>(j, "left_cone_ids");
  r.right_ids = required<std::vector<std::int64_t>>(j, "right_cone_ids");
  r.log_prior = required<double>(j, "log_prior");
  r.log_likelihood = required<double>(j, "log_likelihood");
  r.log_posterior = required<double>(j, "log_posterior");
  r.length = required<double>(j, "path_length_m");
  r.candidate_count = required<int>(j, "candidate_count");
  if (j.contains("candidates")) {
    for (const Json& c : j["candidates"]) {
      r.candidates.push_back({required<double>(c, "log_prior"), required<double>(c, "log_likelihood"),
                              required<double>(c, "log_posterior"), required<double>(c, "path_length_m"),
                              required<int>(c, "crossed_edges"), required<bool>(c, "maximal")});
    }
  }
  return r;
}

std::string planner_log(const std::vector<planner::PlanRecord>& records) {
  std::string out = Json{{"schema", kPlannerSchema}}.dump() + "\n";
  for (const planner::PlanRecord& r : records) out += to_json(r).dump() + "\n";
  return out;
}

std::vector<planner::PlanRecord> read_planner_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path + ": empty planner log");
  try {
    check_schema(Json::parse(line), kPlannerSchema);
  } catch (const Json::exception& e) {
    throw SchemaError(path + ": unreadable header: " + e.what());
  }
  std::vector<planner::PlanRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      records.push_back(plan_record_from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw SchemaError(path + ": " + e.what());
    }
  }
  return records;
}

Json to_json(const global_map::Graph& g) {
  Json poses = Json::array();
  for (const global_map::PoseNode& p : g.poses) {
    poses.push_back({{"id", p.id}, {"x_m", p.pose.x}, {"y_m", p.pose.y}, {"theta_rad", p.pose.theta},
                     {"timestamp_s", p.timestamp}});
  }
  Json landmarks = Json::array();
  for (const global_map::LandmarkNode& l : g.landmarks) {
    Json evidence = Json::array();
    for (const auto& [id, ev] : l.local_evidence) evidence.push_back({{"local_id", id}, {"evidence", {ev.x(), ev.y(), ev.z()}}});
    landmarks.push_back({{"id", l.id},
                         {"x_m", l.position.x()},
                         {"y_m", l.position.y()},
                         {"local_ids", std::vector<std::int64_t>(l.local_id_links.begin(), l.local_id_links.end())},
                         {"local_evidence", evidence}});
  }
  Json odometry = Json::array();
  for (const global_map::OdometryEdge& e : g.odometry) {
    odometry.push_back({{"from", e.from},
                        {"to", e.to},
                        {"dx_m", e.relative.x},
                        {"dy_m", e.relative.y},
                        {"dtheta_rad", e.relative.theta},
                        {"information", std::vector<double>(e.information.data(), e.information.data() + 9)}});
  }
  Json observations = Json::array();
  for (const global_map::ObservationEdge& e : g.observations) {
    observations.push_back({{"pose", e.pose},
                            {"landmark", e.landmark},
                            {"x_m", e.measurement.x()},
                            {"y_m", e.measurement.y()},
                            {"information", std::vector<double>(e.information.data(), e.information.data() + 4)}});
  }
  return {{"schema", kGraphSchema},
          {"poses", poses},
          {"landmarks", landmarks},
          {"odometry_edges", odometry},
          {"observation_edges", observations}};
}

global_map::Graph graph_from_json(const Json& j) {
  check_schema(j, kGraphSchema);
  global_map::Graph g;
  try {
    for (const Json& p : j.at("poses")) {
      g.poses.push_back({required<int>(p, "id"), pose_from_json(p), required<double>(p, "timestamp_s")});
    }
    for (const Json& l : j.at("landmarks")) {
      global_map::LandmarkNode n;
      n.id = required<int>(l, "id");
      n.position = point_from(l);
      for (std::int64_t id : required<std::vector<std::int64_t>>(l, "local_ids")) n.local_id_links.insert(id);
      for (const Json& ev : l.at("local_evidence")) {
        const auto v = required<std::vector<double>>(ev, "evidence");
        if (v.size() != 3) throw SchemaError("landmark evidence must have three entries");
        n.local_evidence[required<std::int64_t>(ev, "local_id")] = Vector3d(v[0], v[1], v[2]);
      }
      g.landmarks.push_back(std::move(n));
    }
    for (const Json& e : j.at("odometry_edges")) {
      global_map::OdometryEdge o;
      o.from = required<int>(e, "from");
      o.to = required<int>(e, "to");
      o.relative = Pose2d(required<double>(e, "dx_m"), required<double>(e, "dy_m"), required<double>(e, "dtheta_rad"));
      const auto info = required<std::vector<double>>(e, "information");
      if (info.size() != 9) throw SchemaError("odometry information must have 9 entries");
      o.information = Eigen::Map<const Matrix3d>(info.data());
      g.odometry.push_back(o);
    }
    for (const Json& e : j.at("observation_edges")) {
      global_map::ObservationEdge o;
      o.pose = required<int>(e, "pose");
      o.landmark = required<int>(e, "landmark");
      o.measurement = point_from(e);
      const auto info = required<std::vector<double>>(e, "information");
      if (info.size() != 4) throw SchemaError("observation information must have 4 entries");
      o.information = Eigen::Map<const Matrix2d>(info.data());
      g.observations.push_back(o);
    }
  } catch (const Json::exception& e) {
    throw SchemaError(e.what());
  }
  if (!g.well_formed()) throw SchemaError("graph is not well formed");
  return g;
}

Json graph_dump(const global_map::Graph& graph, const global_map::OptimizeResult* solve) {
  Json j = to_json(graph);
  if (solve) {
    j["solver"] = {{"status", global_map::to_string(solve->status)},
                   {"initial_cost", solve->initial_cost},
                   {"final_cost", solve->final_cost},
                   {"iterations", solve->iterations}};
  }
  return j;
}

Json to_json(const std::vector<global_map::MapCone>& map) {
  Json a = Json::array();
  for (const global_map::MapCone& c : map) {
    a.push_back({{"id", c.id},
                 {"x_m", c.position.x()},
                 {"y_m", c.position.y()},
                 {"color", color_name(c.color)},
                 {"color_probabilities", color_json(c.color)}});
  }
  return a;
}

std::vector<global_map::MapCone> map_from_json(const Json& j) {
  if (!j.is_array()) throw SchemaError("map must be a JSON array");
  std::vector<global_map::MapCone> out;
  for (const Json& c : j) {
    global_map::MapCone m;
    m.id = required<int>(c, "id");
    m.position = point_from(c);
    m.color = c.contains("color_probabilities") ? color_from(c["color_probabilities"])
                                                 : color_from_name(required<std::string>(c, "color"));
    out.push_back(m);
  }
  return out;
}

namespace {

Json metrics_json(const eval::MapMetrics& m) {
  return {{"rmse_m", m.rmse_m},
          {"matched", m.matched},
          {"unmatched_estimated", m.unmatched_estimated},
          {"unmatched_truth", m.unmatched_truth},
          {"rotation_rad", m.rotation_rad},
          {"translation_x_m", m.translation_x_m},
          {"translation_y_m", m.translation_y_m},
          {"degenerate", m.degenerate}};
}

eval::MapMetrics metrics_from(const Json& j) {
  eval::MapMetrics m;
  m.rmse_m = required<double>(j, "rmse_m");
  m.matched = required<int>(j, "matched");
  m.unmatched_estimated = required<int>(j, "unmatched_estimated");
  m.unmatched_truth = required<int>(j, "unmatched_truth");
  m.rotation_rad = required<double>(j, "rotation_rad");
  m.translation_x_m = required<double>(j, "translation_x_m");
  m.translation_y_m = required<double>(j, "translation_y_m");
  m.degenerate = required<bool>(j, "degenerate");
  return m;
}

}  // namespace

Json to_json(const eval::Report& r) {
  Json timing = Json::object();
  for (const auto& [stage, t] : r.timing) {
    timing[stage] = {{"count", t.count}, {"mean_s", t.mean_s}, {"p50_s", t.p50_s},
                     {"p90_s", t.p90_s}, {"p99_s", t.p99_s},   {"max_s", t.max_s}};
  }
  Json j = {{"schema", kReportSchema},
            {"scenario", r.scenario},
            {"seed", r.seed},
            {"completed", r.completed},
            {"status", r.status},
            {"driven_distance_m", r.driven_distance_m},
            {"simulated_time_s", r.simulated_time_s},
            {"frames", r.frames},
            {"planning",
             {{"paths", r.planning.paths},
              {"out_of_track_paths", r.planning.out_of_track_paths},
              {"bin_width_m", 1.0},
              {"path_length_histogram", r.planning.path_length_histogram},
              {"out_of_track_histogram", r.planning.out_of_track_histogram},
              {"max_length_bin_fraction", r.planning.max_bin_fraction()},
              {"out_of_track_within_5m_fraction", r.planning.out_of_track_within(5.0)}}},
            {"timing", timing}};
  j["map"] = r.has_map ? metrics_json(r.map) : Json(nullptr);
  j["dead_reckoning_map"] = r.has_dead_reckoning ? metrics_json(r.dead_reckoning) : Json(nullptr);
  return j;
}

eval::Report report_from_json(const Json& j) {
  check_schema(j, kReportSchema);
  eval::Report r;
  try {
    r.scenario = required<std::string>(j, "scenario");
    r.seed = required<std::uint64_t>(j, "seed");
    r.completed = required<bool>(j, "completed");
    r.status = required<std::string>(j, "status");
    r.driven_distance_m = required<double>(j, "driven_distance_m");
    r.simulated_time_s = required<double>(j, "simulated_time_s");
    r.frames = required<int>(j, "frames");
    const Json& p = j.at("planning");
    r.planning.paths = required<int>(p, "paths");
    r.planning.out_of_track_paths = required<int>(p, "out_of_track_paths");
    r.planning.path_length_histogram = required<eval::Histogram>(p, "path_length_histogram");
    r.planning.out_of_track_histogram = required<eval::Histogram>(p, "out_of_track_histogram");
    for (const auto& [stage, t] : j.at("timing").items()) {
      r.timing[stage] = {required<int>(t, "count"),  required<double>(t, "mean_s"), required<double>(t, "p50_s"),
                         required<double>(t, "p90_s"), required<double>(t, "p99_s"), required<double>(t, "max_s")};
    }
    r.has_map = !j.at("map").is_null();
    if (r.has_map) r.map = metrics_from(j["map"]);
    r.has_dead_reckoning = !j.at("dead_reckoning_map").is_null();
    if (r.has_dead_reckoning) r.dead_reckoning = metrics_from(j["dead_reckoning_map"]);
  } catch (const Json::exception& e) {
    throw SchemaError(e.what());
  }
  return r;
}

// ---- run configuration ----

namespace {

/// Applies present keys and rejects unknown ones.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw pipeline::ConfigError(path_ + ": expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <typename T>
  void operator()(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception& e) {
      throw pipeline::ConfigError(path_ + key + ": " + e.what());
    }
  }

  void object(const char* key, const std::function<void(Reader&)>& fn) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    Reader sub(j_.at(key), path_ + key + ".");
    fn(sub);
    sub.finish();
  }

  const Json* raw(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw pipeline::ConfigError("unknown config key '" + path_ + key + "'");
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

const char* kind_name(sim::TrackSpec::Kind k) { return k == sim::TrackSpec::Kind::kCircle ? "circle" : "random"; }

Json frustum_json(const local_map::Frustum& f) {
  return {{"max_range_m", f.max_range}, {"fov_half_angle_rad", f.fov_half_angle}};
}

Json weighting_json(const local_map::SourceWeighting& w) {
  return {{"position_cov_scale", w.position_cov_scale},
          {"color_weight", w.color_weight},
          {"creates_cones", w.creates_cones}};
}

const std::array<SensorSource, 3> kSources{SensorSource::kFusion, SensorSource::kLidarOnly, SensorSource::kCameraOnly};

}  // namespace

Json to_json(const pipeline::RunConfig& c) {
  const sim::TrackSpec& t = c.track_spec;
  Json profiles = Json::object();
  Json negative = Json::object();
  for (SensorSource s : kSources) {
    profiles[std::string(to_string(s))] = to_json(c.profiles[static_cast<std::size_t>(s)]);
    negative[std::string(to_string(s))] = frustum_json(c.local_map.negative_region[static_cast<std::size_t>(s)]);
  }
  Json schedule = Json::array();
  for (const pipeline::ModeWindow& w : c.mode_schedule) {
    schedule.push_back({{"pipeline", to_string(w.pipeline)}, {"start_s", w.start_s}, {"end_s", finite_or_null(w.end_s)}});
  }
  Json terms = Json::array();
  for (const planner::FeatureTerm& f : c.planner.prior.terms) {
    terms.push_back({{"weight", f.weight}, {"setpoint", f.setpoint}, {"scale", f.scale}});
  }
  const Matrix2d& Q = c.local_map.odometry_noise;
  const Vector3d& odo = c.graph.odometry_variance_rate;
  return {
      {"scenario", c.scenario},
      {"seed", c.seed},
      {"track_seed", c.track_seed},
      {"track_file", c.track_file ? Json(*c.track_file) : Json(nullptr)},
      {"track_spec",
       {{"kind", kind_name(t.kind)},
        {"radius_m", t.radius},
        {"target_length_m", t.target_length},
        {"length_tolerance", t.length_tolerance},
        {"width_m", t.width},
        {"cone_spacing_m", t.cone_spacing},
        {"min_radius_m", t.min_radius},
        {"hairpins", t.hairpins},
        {"orange_start", t.orange_start},
        {"centerline_step_m", t.centerline_step},
        {"rules",
         {{"min_width_m", t.rules.min_width},
          {"max_width_m", t.rules.max_width},
          {"max_cone_spacing_m", t.rules.max_cone_spacing}}}}},
      {"profiles", profiles},
      {"noise_free", c.noise_free},
      {"speed",
       {{"max_speed_mps", c.speed.max_speed_mps},
        {"lateral_accel_mps2", c.speed.lateral_accel_mps2},
        {"curvature_limited", c.speed.curvature_limited},
        {"degraded_speed_mps", c.speed.degraded_speed_mps}}},
      {"frame_rate_hz", c.frame_rate_hz},
      {"velocity_noise",
       {{"sigma_vx_mps", c.velocity_noise.sigma_vx},
        {"sigma_vy_mps", c.velocity_noise.sigma_vy},
        {"sigma_yaw_rate_radps", c.velocity_noise.sigma_yaw_rate},
        {"yaw_rate_bias_sigma_radps", c.velocity_noise.yaw_rate_bias_sigma}}},
      {"laps", c.laps},
      {"extra_distance_m", c.extra_distance_m},
      {"mode_schedule", schedule},
      {"local_map",
       {{"odometry_noise_m2ps", {Q(0, 0), Q(0, 1), Q(1, 0), Q(1, 1)}},
        {"gate", c.local_map.gate},
        {"existence_initial", c.local_map.existence_initial},
        {"existence_gain", c.local_map.existence_gain},
        {"existence_decay", c.local_map.existence_decay},
        {"existence_floor", c.local_map.existence_floor},
        {"max_unseen_s", c.local_map.max_unseen},
        {"staleness_s", c.local_map.staleness},
        {"negative_region", negative},
        {"degraded_lidar", weighting_json(c.local_map.degraded_lidar)},
        {"degraded_camera", weighting_json(c.local_map.degraded_camera)}}},
      {"graph",
       {{"add_radius_m", c.graph.add_radius},
        {"assoc_radius_m", c.graph.assoc_radius},
        {"odometry_variance_rate_m2ps_m2ps_rad2ps", {odo.x(), odo.y(), odo.z()}},
        {"min_observation_variance_m2", c.graph.min_observation_variance}}},
      {"solver",
       {{"relative_tolerance", c.solver.relative_tolerance},
        {"max_iterations", c.solver.max_iterations},
        {"initial_damping", c.solver.initial_damping},
        {"max_damping", c.solver.max_damping}}},
      {"optimize_every", c.optimize_every},
      {"planner",
       {{"limits",
         {{"max_length_m", c.planner.limits.max_length},
          {"max_edges", c.planner.limits.max_edges},
          {"beam_width", c.planner.limits.beam_width},
          {"max_edge_length_m", c.planner.limits.max_edge_length},
          {"probe_distance_m", c.planner.limits.probe_distance},
          {"max_initial_turn_rad", c.planner.limits.max_initial_turn}}},
        {"prior", {{"w_prior", c.planner.prior.w_prior}, {"terms", terms}}},
        {"desired_edges", c.planner.desired_edges},
        {"likelihood_floor", c.planner.likelihood_floor},
        {"input_radius_m", c.planner.input_radius},
        {"min_existence", c.planner.min_existence}}},
      {"verbose_candidates", c.verbose_candidates},
      {"closed_loop",
       {{"enabled", c.closed_loop.enabled},
        {"lookahead_m", c.closed_loop.lookahead_m},
        {"divergence_margin_m", c.closed_loop.divergence_margin_m}}},
      {"out_dir", c.out_dir}};
}

pipeline::RunConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw pipeline::ConfigError("config must be a JSON object");
  const std::string scenario = j.value("scenario", std::string("custom"));
  pipeline::RunConfig c = pipeline::scenario_preset(scenario);
  Reader r(j, "");
  r("scenario", c.scenario);
  r("seed", c.seed);
  r("track_seed", c.track_seed);
  if (const Json* tf = r.raw("track_file"); tf && !tf->is_null()) c.track_file = tf->get<std::string>();
  r.object("track_spec", [&](Reader& t) {
    std::string kind = kind_name(c.track_spec.kind);
    t("kind", kind);
    if (kind == "circle") {
      c.track_spec.kind = sim::TrackSpec::Kind::kCircle;
    } else if (kind == "random") {
      c.track_spec.kind = sim::TrackSpec::Kind::kRandom;
    } else {
      throw pipeline::ConfigError("track_spec.kind must be 'circle' or 'random'");
    }
    t("radius_m", c.track_spec.radius);
    t("target_length_m", c.track_spec.target_length);
    t("length_tolerance", c.track_spec.length_tolerance);
    t("width_m", c.track_spec.width);
    t("cone_spacing_m", c.track_spec.cone_spacing);
    t("min_radius_m", c.track_spec.min_radius);
    t("hairpins", c.track_spec.hairpins);
    t("orange_start", c.track_spec.orange_start);
    t("centerline_step_m", c.track_spec.centerline_step);
    t.object("rules", [&](Reader& rr) {
      rr("min_width_m", c.track_spec.rules.min_width);
      rr("max_width_m", c.track_spec.rules.max_width);
      rr("max_cone_spacing_m", c.track_spec.rules.max_cone_spacing);
    });
  });
  if (const Json* profiles = r.raw("profiles")) {
    if (!profiles->is_object()) throw pipeline::ConfigError("profiles must be an object");
    for (const auto& [name, p] : profiles->items()) {
      try {
        const SensorSource s = sensor_source_from_string(name);
        Json with_mode = p;
        with_mode["mode"] = std::string(to_string(s));
        c.profiles[static_cast<std::size_t>(s)] = profile_from_json(with_mode);
      } catch (const std::exception& e) {
        throw pipeline::ConfigError(std::string("profiles: ") + e.what());
      }
    }
  }
  r("noise_free", c.noise_free);
  r.object("speed", [&](Reader& s) {
    s("max_speed_mps", c.speed.max_speed_mps);
    s("lateral_accel_mps2", c.speed.lateral_accel_mps2);
    s("curvature_limited", c.speed.curvature_limited);
    s("degraded_speed_mps", c.speed.degraded_speed_mps);
  });
  r("frame_rate_hz", c.frame_rate_hz);
  r.object("velocity_noise", [&](Reader& v) {
    v("sigma_vx_mps", c.velocity_noise.sigma_vx);
    v("sigma_vy_mps", c.velocity_noise.sigma_vy);
    v("sigma_yaw_rate_radps", c.velocity_noise.sigma_yaw_rate);
    v("yaw_rate_bias_sigma_radps", c.velocity_noise.yaw_rate_bias_sigma);
  });
  r("laps", c.laps);
  r("extra_distance_m", c.extra_distance_m);
  if (const Json* schedule = r.raw("mode_schedule")) {
    c.mode_schedule.clear();
    if (schedule->is_string()) {
      c.mode_schedule = pipeline::parse_mode_schedule(schedule->get<std::string>());
    } else {
      for (const Json& w : *schedule) {
        pipeline::ModeWindow mw;
        try {
          mw.pipeline = sensor_source_from_string(w.at("pipeline").get<std::string>());
          mw.start_s = w.value("start_s", 0.0);
          mw.end_s = w.contains("end_s") ? number_or_inf(w["end_s"]) : std::numeric_limits<double>::infinity();
        } catch (const std::exception& e) {
          throw pipeline::ConfigError(std::string("mode_schedule: ") + e.what());
        }
        c.mode_schedule.push_back(mw);
      }
    }
  }
  bool decay_given = false;
  r.object("local_map", [&](Reader& l) {
    if (const Json* q = l.raw("odometry_noise_m2ps")) {
      const auto v = q->get<std::vector<double>>();
      if (v.size() != 4) throw pipeline::ConfigError("local_map.odometry_noise_m2ps needs 4 entries");
      c.local_map.odometry_noise << v[0], v[1], v[2], v[3];
    }
    l("gate", c.local_map.gate);
    l("existence_initial", c.local_map.existence_initial);
    l("existence_gain", c.local_map.existence_gain);
    decay_given = l.has("existence_decay");
    l("existence_decay", c.local_map.existence_decay);
    l("existence_floor", c.local_map.existence_floor);
    l("max_unseen_s", c.local_map.max_unseen);
    l("staleness_s", c.local_map.staleness);
    l.object("negative_region", [&](Reader& n) {
      for (SensorSource s : kSources) {
        n.object(std::string(to_string(s)).c_str(), [&](Reader& f) {
          f("max_range_m", c.local_map.negative_region[static_cast<std::size_t>(s)].max_range);
          f("fov_half_angle_rad", c.local_map.negative_region[static_cast<std::size_t>(s)].fov_half_angle);
        });
      }
    });
    l.object("degraded_lidar", [&](Reader& w) {
      w("position_cov_scale", c.local_map.degraded_lidar.position_cov_scale);
      w("color_weight", c.local_map.degraded_lidar.color_weight);
      w("creates_cones", c.local_map.degraded_lidar.creates_cones);
    });
    l.object("degraded_camera", [&](Reader& w) {
      w("position_cov_scale", c.local_map.degraded_camera.position_cov_scale);
      w("color_weight", c.local_map.degraded_camera.color_weight);
      w("creates_cones", c.local_map.degraded_camera.creates_cones);
    });
  });
  if (!decay_given && c.frame_rate_hz > 0.0) {
    c.local_map.existence_decay =
        local_map::LocalMapConfig::decay_for(c.local_map.existence_floor, 0.4, c.frame_rate_hz);
  }
  r.object("graph", [&](Reader& g) {
    g("add_radius_m", c.graph.add_radius);
    g("assoc_radius_m", c.graph.assoc_radius);
    if (const Json* o = g.raw("odometry_variance_rate_m2ps_m2ps_rad2ps")) {
      const auto v = o->get<std::vector<double>>();
      if (v.size() != 3) throw pipeline::ConfigError("graph odometry variance rate needs 3 entries");
      c.graph.odometry_variance_rate = {v[0], v[1], v[2]};
    }
    g("min_observation_variance_m2", c.graph.min_observation_variance);
  });
  r.object("solver", [&](Reader& s) {
    s("relative_tolerance", c.solver.relative_tolerance);
    s("max_iterations", c.solver.max_iterations);
    s("initial_damping", c.solver.initial_damping);
    s("max_damping", c.solver.max_damping);
  });
  r("optimize_every", c.optimize_every);
  bool terms_given = false;
  r.object("planner", [&](Reader& p) {
    p.object("limits", [&](Reader& l) {
      l("max_length_m", c.planner.limits.max_length);
      l("max_edges", c.planner.limits.max_edges);
      l("beam_width", c.planner.limits.beam_width);
      l("max_edge_length_m", c.planner.limits.max_edge_length);
      l("probe_distance_m", c.planner.limits.probe_distance);
      l("max_initial_turn_rad", c.planner.limits.max_initial_turn);
    });
    p.object("prior", [&](Reader& pr) {
      pr("w_prior", c.planner.prior.w_prior);
      if (const Json* terms = pr.raw("terms")) {
        terms_given = true;
        if (!terms->is_array() || terms->size() != planner::kFeatureCount) {
          throw pipeline::ConfigError("planner.prior.terms needs 6 entries");
        }
        for (std::size_t i = 0; i < terms->size(); ++i) {
          Reader tr((*terms)[i], "planner.prior.terms[" + std::to_string(i) + "].");
          tr("weight", c.planner.prior.terms[i].weight);
          tr("setpoint", c.planner.prior.terms[i].setpoint);
          tr("scale", c.planner.prior.terms[i].scale);
          tr.finish();
        }
      }
    });
    p("desired_edges", c.planner.desired_edges);
    p("likelihood_floor", c.planner.likelihood_floor);
    p("input_radius_m", c.planner.input_radius);
    p("min_existence", c.planner.min_existence);
  });
  if (!terms_given) {
    const double w_prior = c.planner.prior.w_prior;
    c.planner.prior = planner::PriorConfig::defaults(c.planner.desired_edges, c.planner.limits.max_length);
    c.planner.prior.w_prior = w_prior;
  }
  r("verbose_candidates", c.verbose_candidates);
  r.object("closed_loop", [&](Reader& cl) {
    cl("enabled", c.closed_loop.enabled);
    cl("lookahead_m", c.closed_loop.lookahead_m);
    cl("divergence_margin_m", c.closed_loop.divergence_margin_m);
  });
  r("out_dir", c.out_dir);
  r.finish();
  return c;
}

}  // namespace conetrack::io
