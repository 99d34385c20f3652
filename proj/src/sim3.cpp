#include "chunkstitch/sim3.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <cassert>
#include <cmath>
#include <numbers>
#include <sstream>

#include "chunkstitch/error.hpp"

namespace chunkstitch {

namespace {

constexpr double kSeriesThreshold = 1e-6;
constexpr double kPiTolerance = 1e-6;
constexpr double kReorthoThreshold = 1e-7;

struct WCoefficients {
  double a;
  double b;
  double c;
};

// W = a*I + b*Omega + c*Omega^2, Omega = skew(phi), is the integral of
// exp(u * (sigma*I + Omega)) over u in [0, 1]. With z = sigma + i*theta:
//   a = (e^sigma - 1) / sigma
//   b = Im[(e^z - 1)/z] / theta
//   c = (a - Re[(e^z - 1)/z]) / theta^2
WCoefficients w_coefficients(double sigma, double theta) {
  if (std::abs(sigma) < kSeriesThreshold || theta < kSeriesThreshold) {
    // Power series of (e^z - 1)/z = sum z^n/(n+1)!, with Re/Im of z^n tracked
    // as polynomials so that both theta -> 0 and sigma -> 0 are exact limits.
    //   re_n = Re z^n, im_n = Im z^n / theta, dr_n = (sigma^n - Re z^n) / theta^2
    const double theta2 = theta * theta;
    double re = 1.0, im = 0.0, dr = 0.0, sigma_pow = 1.0;
    double inv_fact = 1.0;  // 1/(n+1)!
    WCoefficients w{0.0, 0.0, 0.0};
    for (int n = 0; n < 120; ++n) {
      w.a += sigma_pow * inv_fact;
      w.b += im * inv_fact;
      w.c += dr * inv_fact;
      const double re_next = re * sigma - im * theta2;
      const double im_next = re + im * sigma;
      const double dr_next = sigma * dr + im;
      re = re_next;
      im = im_next;
      dr = dr_next;
      sigma_pow *= sigma;
      inv_fact /= static_cast<double>(n + 2);
      const double magnitude = std::abs(sigma_pow) + std::abs(im) + std::abs(dr) + std::abs(re);
      if (n > 4 && magnitude * inv_fact < 1e-20) break;
    }
    return w;
  }

  const double a = std::expm1(sigma) / sigma;
  const double half_sin = std::sin(0.5 * theta);
  const double re_num = std::expm1(sigma) * std::cos(theta) - 2.0 * half_sin * half_sin;
  const double im_num = std::exp(sigma) * std::sin(theta);
  const double mod2 = sigma * sigma + theta * theta;
  const double re_phi = (re_num * sigma + im_num * theta) / mod2;
  const double im_phi = (im_num * sigma - re_num * theta) / mod2;
  return {a, im_phi / theta, (a - re_phi) / (theta * theta)};
}

}  // namespace

Mat3 skew(const Vec3& v) {
  Mat3 s;
  // clang-format off
  s <<   0.0, -v.z(),  v.y(),
       v.z(),    0.0, -v.x(),
      -v.y(),  v.x(),    0.0;
  // clang-format on
  return s;
}

Mat3 so3_exp(const Vec3& phi) {
  const double theta = phi.norm();
  if (theta < kSeriesThreshold) {
    const Mat3 omega = skew(phi);
    return Mat3::Identity() + omega + 0.5 * omega * omega;
  }
  return Eigen::AngleAxisd(theta, phi / theta).toRotationMatrix();
}

Vec3 so3_log(const Mat3& rotation) {
  Eigen::Quaterniond q(rotation);
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  const Vec3 v = q.vec();
  const double vn = v.norm();
  const double angle = 2.0 * std::atan2(vn, q.w());
  if (std::abs(angle - std::numbers::pi) < kPiTolerance) {
    std::ostringstream msg;
    msg << "rotation angle " << angle << " is within " << kPiTolerance << " of pi";
    throw Error(ErrorCode::AngleAtPi, msg.str());
  }
  if (vn < 1e-12) return 2.0 * v / q.w();
  return (angle / vn) * v;
}

Mat3 project_to_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

double orthogonality_error(const Mat3& rotation) {
  return (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
}

Sim3Tangent Sim3Tangent::from_vector(const Vec7& v) {
  return {v.segment<3>(0), v.segment<3>(3), v(6)};
}

Vec7 Sim3Tangent::vector() const {
  Vec7 v;
  v << rho, phi, sigma;
  return v;
}

Sim3::Sim3(double scale, const Mat3& rotation, const Vec3& translation)
    : scale_(scale), rotation_(rotation), translation_(translation) {
  assert(scale > 0.0 && std::isfinite(scale));
}

Sim3 Sim3::from_scale(double scale) { return {scale, Mat3::Identity(), Vec3::Zero()}; }

Sim3 Sim3::from_translation(const Vec3& t) { return {1.0, Mat3::Identity(), t}; }

Sim3 Sim3::from_rotation(const Mat3& r) { return {1.0, r, Vec3::Zero()}; }

Sim3 Sim3::from_matrix(const Mat4& m) {
  const Mat3 sr = m.topLeftCorner<3, 3>();
  const double scale = std::cbrt(sr.determinant());
  return {scale, project_to_rotation(sr / scale), m.topRightCorner<3, 1>()};
}

Mat4 Sim3::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = scale_ * rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Sim3 Sim3::compose(const Sim3& other) const {
  Mat3 r = rotation_ * other.rotation_;
  if (orthogonality_error(r) > kReorthoThreshold) r = project_to_rotation(r);
  return {scale_ * other.scale_, r, scale_ * (rotation_ * other.translation_) + translation_};
}

Sim3 Sim3::inverse() const {
  const double inv_scale = 1.0 / scale_;
  const Mat3 rt = rotation_.transpose();
  return {inv_scale, rt, -inv_scale * (rt * translation_)};
}

Mat3 sim3_translation_jacobian(double sigma, const Vec3& phi) {
  const WCoefficients w = w_coefficients(sigma, phi.norm());
  const Mat3 omega = skew(phi);
  return w.a * Mat3::Identity() + w.b * omega + w.c * omega * omega;
}

Sim3 Sim3::exp(const Sim3Tangent& tau) {
  return {std::exp(tau.sigma), so3_exp(tau.phi),
          sim3_translation_jacobian(tau.sigma, tau.phi) * tau.rho};
}

Sim3Tangent Sim3::log() const {
  Sim3Tangent tau;
  tau.sigma = std::log(scale_);
  tau.phi = so3_log(rotation_);
  tau.rho = sim3_translation_jacobian(tau.sigma, tau.phi).partialPivLu().solve(translation_);
  return tau;
}

bool Sim3::is_valid(double tol) const {
  return std::isfinite(scale_) && scale_ > 0.0 && rotation_.allFinite() &&
         translation_.allFinite() && orthogonality_error(rotation_) <= tol &&
         std::abs(rotation_.determinant() - 1.0) <= tol;
}

}  // namespace chunkstitch
