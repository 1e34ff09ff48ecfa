#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace conetrack {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Matrix2 = Eigen::Matrix<Scalar, 2, 2>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

using Vector2d = Vector2<double>;
using Matrix2d = Matrix2<double>;
using Vector3d = Vector3<double>;
using Matrix3d = Matrix3<double>;

/// Wraps an angle into (-pi, pi].
template <typename Scalar>
Scalar normalize_angle(Scalar angle) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  Scalar wrapped = std::remainder(angle, Scalar(2) * pi);
  if (wrapped <= -pi) {
    wrapped += Scalar(2) * pi;
  }
  return wrapped;
}

template <typename Scalar>
Matrix2<Scalar> rotation(Scalar theta) {
  const Scalar c = std::cos(theta);
  const Scalar s = std::sin(theta);
  Matrix2<Scalar> r;
  r << c, -s, s, c;
  return r;
}

/// Planar rigid transform. theta is kept in (-pi, pi].
template <typename Scalar>
struct Pose2 {
  Scalar x{0};
  Scalar y{0};
  Scalar theta{0};

  Pose2() = default;
  Pose2(Scalar x_in, Scalar y_in, Scalar theta_in)
      : x(x_in), y(y_in), theta(normalize_angle(theta_in)) {}

  static Pose2 identity() { return Pose2(); }

  Vector2<Scalar> translation() const { return Vector2<Scalar>(x, y); }
  Matrix2<Scalar> rotation_matrix() const { return rotation(theta); }
  Vector3<Scalar> vector() const { return Vector3<Scalar>(x, y, theta); }

  template <typename Other>
  Pose2<Other> cast() const {
    return Pose2<Other>(Other(x), Other(y), Other(theta));
  }
};

using Pose2d = Pose2<double>;

/// a ⊕ b: b expressed in a's frame, mapped to a's parent frame.
template <typename Scalar>
Pose2<Scalar> compose(const Pose2<Scalar>& a, const Pose2<Scalar>& b) {
  const Vector2<Scalar> t = a.translation() + a.rotation_matrix() * b.translation();
  return Pose2<Scalar>(t.x(), t.y(), a.theta + b.theta);
}

template <typename Scalar>
Pose2<Scalar> inverse(const Pose2<Scalar>& p) {
  const Vector2<Scalar> t = -(p.rotation_matrix().transpose() * p.translation());
  return Pose2<Scalar>(t.x(), t.y(), -p.theta);
}

/// a⁻¹ ⊕ b, the pose of b seen from a.
template <typename Scalar>
Pose2<Scalar> between(const Pose2<Scalar>& a, const Pose2<Scalar>& b) {
  return compose(inverse(a), b);
}

template <typename Scalar>
Vector2<Scalar> transform_point(const Pose2<Scalar>& pose, const Vector2<Scalar>& p) {
  return pose.translation() + pose.rotation_matrix() * p;
}

/// Expresses a parent-frame point in the pose's body frame.
template <typename Scalar>
Vector2<Scalar> to_body(const Pose2<Scalar>& pose, const Vector2<Scalar>& p) {
  return pose.rotation_matrix().transpose() * (p - pose.translation());
}

/// Body-frame velocity: longitudinal, lateral, yaw rate.
template <typename Scalar>
struct Velocity2 {
  Scalar vx{0};
  Scalar vy{0};
  Scalar yaw_rate{0};

  bool finite() const {
    return std::isfinite(vx) && std::isfinite(vy) && std::isfinite(yaw_rate);
  }
};

using Velocity2d = Velocity2<double>;

/// Single explicit Euler step: the body velocity is rotated by the pose heading
/// at the start of the step.
template <typename Scalar>
Pose2<Scalar> integrate_velocity(const Pose2<Scalar>& pose, const Velocity2<Scalar>& vel,
                                 Scalar dt) {
  if (!(dt >= Scalar(0))) {
    throw std::invalid_argument("integrate_velocity: dt must be non-negative");
  }
  const Vector2<Scalar> step = pose.rotation_matrix() * Vector2<Scalar>(vel.vx, vel.vy) * dt;
  return Pose2<Scalar>(pose.x + step.x(), pose.y + step.y(), pose.theta + vel.yaw_rate * dt);
}

inline constexpr double kMinCovarianceEigenvalue = 1e-9;

/// Symmetrizes and floors the eigenvalues of a 2x2 covariance.
template <typename Scalar>
Matrix2<Scalar> make_spd(const Matrix2<Scalar>& cov,
                         Scalar floor = Scalar(kMinCovarianceEigenvalue)) {
  const Matrix2<Scalar> sym = Scalar(0.5) * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix2<Scalar>> solver(sym);
  const Vector2<Scalar> ev = solver.eigenvalues();
  if (ev.minCoeff() >= floor) {
    return sym;
  }
  const Vector2<Scalar> clamped = ev.cwiseMax(floor);
  const Matrix2<Scalar> v = solver.eigenvectors();
  Matrix2<Scalar> out = v * clamped.asDiagonal() * v.transpose();
  return Scalar(0.5) * (out + out.transpose());
}

template <typename Scalar>
bool is_spd(const Matrix2<Scalar>& cov, Scalar sym_tol = Scalar(1e-12)) {
  if (!cov.allFinite() || std::abs(cov(0, 1) - cov(1, 0)) > sym_tol) {
    return false;
  }
  return cov(0, 0) > Scalar(0) && cov.determinant() > Scalar(0);
}

/// Bivariate normal.
template <typename Scalar>
struct Gaussian2 {
  Vector2<Scalar> mean{Vector2<Scalar>::Zero()};
  Matrix2<Scalar> cov{Matrix2<Scalar>::Identity()};
};

using Gaussian2d = Gaussian2<double>;

/// Pushes a body-frame Gaussian through a rigid transform.
template <typename Scalar>
Gaussian2<Scalar> transform_gaussian(const Pose2<Scalar>& pose, const Gaussian2<Scalar>& g) {
  const Matrix2<Scalar> r = pose.rotation_matrix();
  return {transform_point(pose, g.mean), make_spd<Scalar>(r * g.cov * r.transpose())};
}

/// Bhattacharyya distance between two bivariate normals.
template <typename Scalar>
Scalar bhattacharyya_distance(const Gaussian2<Scalar>& a, const Gaussian2<Scalar>& b) {
  if (!is_spd(a.cov) || !is_spd(b.cov)) {
    throw std::invalid_argument("bhattacharyya_distance: covariance is not SPD");
  }
  const Matrix2<Scalar> avg = Scalar(0.5) * (a.cov + b.cov);
  const Vector2<Scalar> d = a.mean - b.mean;
  const Scalar mahalanobis = d.dot(avg.inverse() * d);
  const Scalar log_det_ratio =
      std::log(avg.determinant()) -
      Scalar(0.5) * (std::log(a.cov.determinant()) + std::log(b.cov.determinant()));
  const Scalar value = mahalanobis / Scalar(8) + Scalar(0.5) * log_det_ratio;
  // round-off can push the identical-distribution case slightly negative
  return value < Scalar(0) ? Scalar(0) : value;
}

}  // namespace conetrack
