#include "conetrack/local_map/local_map.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_set>

namespace conetrack::local_map {

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::kFusion:
      return "fusion";
    case Mode::kLidarOnly:
      return "lidar_only";
    case Mode::kCameraOnly:
      return "camera_only";
    case Mode::kDegraded:
      return "degraded";
  }
  return "fusion";
}

Mode mode_from_string(std::string_view s) {
  if (s == "fusion") return Mode::kFusion;
  if (s == "lidar_only") return Mode::kLidarOnly;
  if (s == "camera_only") return Mode::kCameraOnly;
  if (s == "degraded") return Mode::kDegraded;
  throw std::invalid_argument("unknown local map mode: " + std::string(s));
}

bool Frustum::contains(const Vector2d& body_point) const {
  return body_point.norm() <= max_range &&
         std::abs(std::atan2(body_point.y(), body_point.x())) <= fov_half_angle;
}

double LocalMapConfig::decay_for(double existence_floor, double rejection_time, double frame_rate) {
  const double misses = std::max(1.0, std::floor(rejection_time * frame_rate + 1e-9));
  return std::pow(existence_floor, 1.0 / misses) * 0.999;
}

LocalMapConfig LocalMapConfig::for_frame_rate(double frame_rate, double rejection_time) {
  LocalMapConfig c;
  c.existence_decay = decay_for(c.existence_floor, rejection_time, frame_rate);
  return c;
}

const ConeEstimate* LocalMapState::find(std::int64_t id) const {
  auto it = std::lower_bound(cones.begin(), cones.end(), id,
                             [](const ConeEstimate& c, std::int64_t v) { return c.id < v; });
  return it != cones.end() && it->id == id ? &*it : nullptr;
}

LocalMapState predict(LocalMapState state, const Velocity2d& vel, double dt,
                      const Matrix2d& odometry_noise) {
  if (dt == 0.0) return state;
  state.ego = integrate_velocity(state.ego, vel, dt);
  for (ConeEstimate& cone : state.cones) {
    cone.position.cov = make_spd<double>(cone.position.cov + odometry_noise * dt);
  }
  state.time += dt;
  return state;
}

AssociationResult associate(const LocalMapState& state, std::span<const Gaussian2d> observations,
                            const Frustum& negative_region, double gate) {
  struct Candidate {
    double distance;
    std::int64_t cone_id;
    double obs_x;
    double obs_y;
    std::size_t obs_index;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    for (const ConeEstimate& cone : state.cones) {
      const double d = bhattacharyya_distance(observations[i], cone.position);
      if (d < gate) {
        candidates.push_back({d, cone.id, observations[i].mean.x(), observations[i].mean.y(), i});
      }
    }
  }
  // observation coordinates break remaining ties so the result does not
  // depend on observation order
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.distance, a.cone_id, a.obs_x, a.obs_y, a.obs_index) <
           std::tie(b.distance, b.cone_id, b.obs_x, b.obs_y, b.obs_index);
  });

  AssociationResult result;
  std::vector<bool> obs_used(observations.size(), false);
  std::unordered_set<std::int64_t> cone_used;
  for (const Candidate& c : candidates) {
    if (obs_used[c.obs_index] || cone_used.contains(c.cone_id)) continue;
    obs_used[c.obs_index] = true;
    cone_used.insert(c.cone_id);
    result.pairs.emplace_back(c.obs_index, c.cone_id);
  }
  std::sort(result.pairs.begin(), result.pairs.end());
  for (std::size_t i = 0; i < observations.size(); ++i) {
    if (!obs_used[i]) result.new_observations.push_back(i);
  }
  for (const ConeEstimate& cone : state.cones) {
    if (cone_used.contains(cone.id)) continue;
    if (negative_region.contains(to_body(state.ego, cone.position.mean))) {
      result.unmatched_cones_in_fov.push_back(cone.id);
    }
  }
  return result;
}

ConeEstimate update_position(ConeEstimate cone, const Gaussian2d& observation) {
  const Matrix2d& p = cone.position.cov;
  const Matrix2d s = p + observation.cov;
  if (!(std::abs(s.determinant()) > 0.0)) {
    throw std::invalid_argument("update_position: singular innovation covariance");
  }
  const Matrix2d k = p * s.inverse();
  cone.position.mean += k * (observation.mean - cone.position.mean);
  cone.position.cov = make_spd<double>((Matrix2d::Identity() - k) * p);
  return cone;
}

ConeEstimate update_color(ConeEstimate cone, const ColorDistribution& observed, double weight) {
  cone.color_evidence += weight * observed.vector().cwiseMax(0.0);
  cone.color = ColorDistribution::from_evidence(cone.color_evidence);
  return cone;
}

LocalMapState apply_negative_observations(LocalMapState state, const AssociationResult& result,
                                          const LocalMapConfig& config) {
  std::unordered_set<std::int64_t> hit;
  for (const auto& [obs, id] : result.pairs) hit.insert(id);
  const std::unordered_set<std::int64_t> miss(result.unmatched_cones_in_fov.begin(),
                                              result.unmatched_cones_in_fov.end());
  for (ConeEstimate& cone : state.cones) {
    if (hit.contains(cone.id)) {
      cone.existence += config.existence_gain * (1.0 - cone.existence);
    } else if (miss.contains(cone.id)) {
      cone.existence *= config.existence_decay;
    }
    cone.existence = std::clamp(cone.existence, 0.0, 1.0);
  }
  std::erase_if(state.cones, [&](const ConeEstimate& c) {
    return c.existence < config.existence_floor || state.time - c.last_seen > config.max_unseen;
  });
  return state;
}

LocalMap::LocalMap(LocalMapConfig config) : config_(std::move(config)) {}

std::optional<Mode> LocalMap::select_mode(double now) const {
  auto alive = [&](SensorSource s) {
    const auto& last = last_message_[static_cast<std::size_t>(s)];
    return last && now - *last <= config_.staleness;
  };
  if (alive(SensorSource::kFusion)) return Mode::kFusion;
  const bool lidar = alive(SensorSource::kLidarOnly);
  const bool camera = alive(SensorSource::kCameraOnly);
  if (lidar && camera) return Mode::kDegraded;
  if (lidar) return Mode::kLidarOnly;
  if (camera) return Mode::kCameraOnly;
  return std::nullopt;
}

bool LocalMap::uses(Mode mode, SensorSource source) const {
  switch (mode) {
    case Mode::kFusion:
      return source == SensorSource::kFusion;
    case Mode::kLidarOnly:
      return source == SensorSource::kLidarOnly;
    case Mode::kCameraOnly:
      return source == SensorSource::kCameraOnly;
    case Mode::kDegraded:
      return source != SensorSource::kFusion;
  }
  return false;
}

SourceWeighting LocalMap::weighting(Mode mode, SensorSource source) const {
  if (mode != Mode::kDegraded) return {};
  return source == SensorSource::kLidarOnly ? config_.degraded_lidar : config_.degraded_camera;
}

std::int64_t LocalMap::insert_cone(ConeEstimate cone) {
  cone.id = state_.next_id++;
  cone.position.cov = make_spd<double>(cone.position.cov);
  cone.color = ColorDistribution::from_evidence(cone.color_evidence);
  state_.cones.push_back(cone);
  return cone.id;
}

LocalMapSnapshot LocalMap::ingest_frame(const Frame& frame) {
  if (frame.timestamp < state_.time) {
    throw std::invalid_argument("ingest_frame: frames must arrive in timestamp order");
  }
  for (const ObservationBatch& batch : frame.batches) {
    last_message_[static_cast<std::size_t>(batch.source)] = frame.timestamp;
  }
  if (auto mode = select_mode(frame.timestamp)) state_.mode = *mode;

  state_ = predict(std::move(state_), frame.velocity, frame.dt, config_.odometry_noise);
  state_.time = frame.timestamp;

  // sources processed in a fixed order so degraded mode is deterministic
  std::vector<const ObservationBatch*> used;
  for (SensorSource src : {SensorSource::kFusion, SensorSource::kLidarOnly, SensorSource::kCameraOnly}) {
    if (!uses(state_.mode, src)) continue;
    for (const ObservationBatch& batch : frame.batches) {
      if (batch.source == src) used.push_back(&batch);
    }
  }

  AssociationResult combined;
  std::unordered_set<std::int64_t> matched;
  std::unordered_set<std::int64_t> created;
  for (const ObservationBatch* batch : used) {
    const SourceWeighting w = weighting(state_.mode, batch->source);
    std::vector<Gaussian2d> local;
    local.reserve(batch->observations.size());
    for (const ConeObservation& obs : batch->observations) {
      Gaussian2d g = transform_gaussian(state_.ego, obs.position);
      g.cov = make_spd<double>(g.cov * w.position_cov_scale);
      local.push_back(g);
    }
    const Frustum& region = config_.negative_region[static_cast<std::size_t>(batch->source)];
    const AssociationResult res = associate(state_, local, region, config_.gate);
    for (const auto& [obs_index, id] : res.pairs) {
      auto it = std::lower_bound(state_.cones.begin(), state_.cones.end(), id,
                                 [](const ConeEstimate& c, std::int64_t v) { return c.id < v; });
      *it = update_position(std::move(*it), local[obs_index]);
      *it = update_color(std::move(*it), batch->observations[obs_index].color, w.color_weight);
      it->last_seen = frame.timestamp;
      if (!created.contains(id) && matched.insert(id).second) {
        combined.pairs.emplace_back(obs_index, id);
      }
    }
    for (std::size_t obs_index : res.new_observations) {
      if (!w.creates_cones) continue;
      ConeEstimate cone;
      cone.id = state_.next_id++;
      cone.position = local[obs_index];
      cone = update_color(std::move(cone), batch->observations[obs_index].color, w.color_weight);
      cone.existence = config_.existence_initial;
      cone.last_seen = frame.timestamp;
      created.insert(cone.id);
      state_.cones.push_back(std::move(cone));
    }
  }

  for (const ObservationBatch* batch : used) {
    const Frustum& region = config_.negative_region[static_cast<std::size_t>(batch->source)];
    for (const ConeEstimate& cone : state_.cones) {
      if (matched.contains(cone.id) || created.contains(cone.id)) continue;
      if (region.contains(to_body(state_.ego, cone.position.mean))) {
        combined.unmatched_cones_in_fov.push_back(cone.id);
      }
    }
  }
  std::sort(combined.unmatched_cones_in_fov.begin(), combined.unmatched_cones_in_fov.end());
  combined.unmatched_cones_in_fov.erase(
      std::unique(combined.unmatched_cones_in_fov.begin(), combined.unmatched_cones_in_fov.end()),
      combined.unmatched_cones_in_fov.end());
  state_ = apply_negative_observations(std::move(state_), combined, config_);

  return {frame.timestamp, state_.ego, state_.cones, state_.mode};
}

}  // namespace conetrack::local_map
