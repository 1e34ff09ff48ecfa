#pragma once

#include "conetrack/core/geometry.hpp"

#include <array>
#include <cstdint>
#include <string_view>

namespace conetrack {

/// Colour classes used by mapping and planning.
enum class ColorClass : int { kBlue = 0, kYellow = 1, kUnknown = 2 };

/// Ground-truth cone colours. Orange marks the start line.
enum class ConeColor : int { kBlue = 0, kYellow = 1, kOrange = 2 };

/// Which perception pipeline produced an observation.
enum class SensorSource : int { kFusion = 0, kLidarOnly = 1, kCameraOnly = 2 };

std::string_view to_string(ConeColor c);
std::string_view to_string(SensorSource s);
ConeColor cone_color_from_string(std::string_view s);
SensorSource sensor_source_from_string(std::string_view s);

/// Categorical distribution over {blue, yellow, unknown}.
struct ColorDistribution {
  double p_blue{0.0};
  double p_yellow{0.0};
  double p_unknown{1.0};

  static ColorDistribution certain(ColorClass c);
  static ColorDistribution uniform() { return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}; }
  /// Normalizes non-negative evidence. All-zero evidence maps to "unknown".
  static ColorDistribution from_evidence(const Vector3d& evidence);

  Vector3d vector() const { return {p_blue, p_yellow, p_unknown}; }
  double operator[](ColorClass c) const;
  ColorClass argmax() const;
  bool valid(double tol = 1e-9) const;
};

ColorDistribution normalize(const ColorDistribution& c);

struct ConeObservation {
  Gaussian2d position;  // car frame
  ColorDistribution color;
  double timestamp{0.0};
  SensorSource source{SensorSource::kFusion};
};

/// Filtered landmark held by the local map.
struct ConeEstimate {
  std::int64_t id{0};
  Gaussian2d position;  // local-map frame
  ColorDistribution color;
  Vector3d color_evidence{Vector3d::Zero()};
  double existence{0.5};
  double last_seen{0.0};
};

}  // namespace conetrack
