#include "conetrack/core/types.hpp"

#include <stdexcept>
#include <string>

namespace conetrack {

std::string_view to_string(ConeColor c) {
  switch (c) {
    case ConeColor::kBlue:
      return "blue";
    case ConeColor::kYellow:
      return "yellow";
    case ConeColor::kOrange:
      return "orange";
  }
  return "unknown";
}

std::string_view to_string(SensorSource s) {
  switch (s) {
    case SensorSource::kFusion:
      return "fusion";
    case SensorSource::kLidarOnly:
      return "lidar_only";
    case SensorSource::kCameraOnly:
      return "camera_only";
  }
  return "fusion";
}

ConeColor cone_color_from_string(std::string_view s) {
  if (s == "blue") return ConeColor::kBlue;
  if (s == "yellow") return ConeColor::kYellow;
  if (s == "orange") return ConeColor::kOrange;
  throw std::invalid_argument("unknown cone color: " + std::string(s));
}

SensorSource sensor_source_from_string(std::string_view s) {
  if (s == "fusion") return SensorSource::kFusion;
  if (s == "lidar_only" || s == "lidar") return SensorSource::kLidarOnly;
  if (s == "camera_only" || s == "camera") return SensorSource::kCameraOnly;
  throw std::invalid_argument("unknown sensor source: " + std::string(s));
}

ColorDistribution ColorDistribution::certain(ColorClass c) {
  ColorDistribution d{0.0, 0.0, 0.0};
  switch (c) {
    case ColorClass::kBlue:
      d.p_blue = 1.0;
      break;
    case ColorClass::kYellow:
      d.p_yellow = 1.0;
      break;
    case ColorClass::kUnknown:
      d.p_unknown = 1.0;
      break;
  }
  return d;
}

ColorDistribution ColorDistribution::from_evidence(const Vector3d& evidence) {
  const double total = evidence.sum();
  if (!(total > 0.0)) {
    return {0.0, 0.0, 1.0};
  }
  return {evidence[0] / total, evidence[1] / total, evidence[2] / total};
}

double ColorDistribution::operator[](ColorClass c) const {
  switch (c) {
    case ColorClass::kBlue:
      return p_blue;
    case ColorClass::kYellow:
      return p_yellow;
    case ColorClass::kUnknown:
      return p_unknown;
  }
  return 0.0;
}

ColorClass ColorDistribution::argmax() const {
  // ties resolve in class order blue, yellow, unknown
  if (p_blue >= p_yellow && p_blue >= p_unknown) return ColorClass::kBlue;
  if (p_yellow >= p_unknown) return ColorClass::kYellow;
  return ColorClass::kUnknown;
}

bool ColorDistribution::valid(double tol) const {
  for (double p : {p_blue, p_yellow, p_unknown}) {
    if (!(p >= 0.0 && p <= 1.0)) return false;
  }
  return std::abs(p_blue + p_yellow + p_unknown - 1.0) <= tol;
}

ColorDistribution normalize(const ColorDistribution& c) {
  return ColorDistribution::from_evidence(c.vector().cwiseMax(0.0));
}

}  // namespace conetrack
