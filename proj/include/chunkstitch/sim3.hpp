#pragma once

#include <Eigen/Core>

namespace chunkstitch {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec7 = Eigen::Matrix<double, 7, 1>;

Mat3 skew(const Vec3& v);

/// SO(3) exponential (Rodrigues).
Mat3 so3_exp(const Vec3& phi);

/// SO(3) logarithm. Throws AngleAtPi when the angle is within 1e-6 of pi.
Vec3 so3_log(const Mat3& rotation);

/// Closest rotation in the Frobenius sense (SVD projection, det +1).
Mat3 project_to_rotation(const Mat3& m);

/// Largest entry of |R^T R - I|.
double orthogonality_error(const Mat3& rotation);

/// Element of the Lie algebra sim(3). The 7-vector layout used everywhere
/// (residuals, Jacobians, LM steps) is [rho, phi, sigma].
struct Sim3Tangent {
  Vec3 rho = Vec3::Zero();
  Vec3 phi = Vec3::Zero();
  double sigma = 0.0;

  static Sim3Tangent from_vector(const Vec7& v);
  Vec7 vector() const;
  double norm() const { return vector().norm(); }
};

/// x -> scale * R * x + t.
class Sim3 {
 public:
  Sim3() = default;
  /// Rotation must be orthonormal with det +1 and scale positive and finite;
  /// both are checked with assertions only.
  Sim3(double scale, const Mat3& rotation, const Vec3& translation);

  static Sim3 identity() { return {}; }
  static Sim3 from_scale(double scale);
  static Sim3 from_translation(const Vec3& t);
  static Sim3 from_rotation(const Mat3& r);
  /// Homogeneous 4x4 [sR t; 0 1]. The upper-left block is split into scale
  /// (cube root of its determinant) and the projected rotation.
  static Sim3 from_matrix(const Mat4& m);

  double scale() const { return scale_; }
  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Mat4 matrix() const;

  Vec3 apply(const Vec3& p) const { return scale_ * (rotation_ * p) + translation_; }
  Vec3 operator*(const Vec3& p) const { return apply(p); }

  /// (this * other)(x) == this(other(x)).
  Sim3 compose(const Sim3& other) const;
  Sim3 operator*(const Sim3& other) const { return compose(other); }

  Sim3 inverse() const;

  static Sim3 exp(const Sim3Tangent& tau);
  Sim3Tangent log() const;

  bool is_valid(double tol = 1e-9) const;

 private:
  double scale_ = 1.0;
  Mat3 rotation_ = Mat3::Identity();
  Vec3 translation_ = Vec3::Zero();
};

/// Coupled translation Jacobian of exp: t = W(sigma, phi) * rho.
Mat3 sim3_translation_jacobian(double sigma, const Vec3& phi);

inline Sim3 compose(const Sim3& a, const Sim3& b) { return a.compose(b); }
inline Sim3 inverse(const Sim3& s) { return s.inverse(); }
inline Vec3 apply(const Sim3& s, const Vec3& p) { return s.apply(p); }
inline Sim3 exp_map(const Sim3Tangent& tau) { return Sim3::exp(tau); }
inline Sim3Tangent log_map(const Sim3& s) { return s.log(); }

}  // namespace chunkstitch
