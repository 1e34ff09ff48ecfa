#pragma once

#include "conetrack/core/geometry.hpp"

namespace conetrack::global_map {

/// Odometry residual between two poses given the measured relative pose:
/// the (x, y, theta) coordinates of measured⁻¹ ⊕ (from⁻¹ ⊕ to).
template <typename Scalar>
Vector3<Scalar> odometry_residual(const Pose2<Scalar>& from, const Pose2<Scalar>& to,
                                  const Pose2<Scalar>& measured) {
  const Pose2<Scalar> err = compose(inverse(measured), between(from, to));
  return {err.x, err.y, err.theta};
}

template <typename Scalar>
struct OdometryJacobians {
  Matrix3<Scalar> d_from;
  Matrix3<Scalar> d_to;
};

template <typename Scalar>
OdometryJacobians<Scalar> odometry_jacobians(const Pose2<Scalar>& from, const Pose2<Scalar>& to,
                                             const Pose2<Scalar>& measured) {
  const Matrix2<Scalar> rm_t = measured.rotation_matrix().transpose();
  const Matrix2<Scalar> ri_t = from.rotation_matrix().transpose();
  const Scalar c = std::cos(from.theta);
  const Scalar s = std::sin(from.theta);
  Matrix2<Scalar> dri_t;  // d(R_from^T)/d(theta_from)
  dri_t << -s, c, -c, -s;
  const Vector2<Scalar> dt = to.translation() - from.translation();

  OdometryJacobians<Scalar> j;
  j.d_from.setZero();
  j.d_to.setZero();
  j.d_from.template block<2, 2>(0, 0) = -rm_t * ri_t;
  j.d_from.template block<2, 1>(0, 2) = rm_t * dri_t * dt;
  j.d_from(2, 2) = Scalar(-1);
  j.d_to.template block<2, 2>(0, 0) = rm_t * ri_t;
  j.d_to(2, 2) = Scalar(1);
  return j;
}

/// Landmark expressed in the pose's body frame minus the measurement.
template <typename Scalar>
Vector2<Scalar> observation_residual(const Pose2<Scalar>& pose, const Vector2<Scalar>& landmark,
                                     const Vector2<Scalar>& measured) {
  return to_body(pose, landmark) - measured;
}

template <typename Scalar>
struct ObservationJacobians {
  Eigen::Matrix<Scalar, 2, 3> d_pose;
  Matrix2<Scalar> d_landmark;
};

template <typename Scalar>
ObservationJacobians<Scalar> observation_jacobians(const Pose2<Scalar>& pose,
                                                   const Vector2<Scalar>& landmark) {
  const Scalar c = std::cos(pose.theta);
  const Scalar s = std::sin(pose.theta);
  Matrix2<Scalar> r_t;
  r_t << c, s, -s, c;
  Matrix2<Scalar> dr_t;
  dr_t << -s, c, -c, -s;
  ObservationJacobians<Scalar> j;
  j.d_pose.template block<2, 2>(0, 0) = -r_t;
  j.d_pose.template block<2, 1>(0, 2) = dr_t * (landmark - pose.translation());
  j.d_landmark = r_t;
  return j;
}

}  // namespace conetrack::global_map
