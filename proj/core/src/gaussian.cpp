#include "gsocc/gaussian.hpp"

#include <algorithm>
#include <utility>

#include "gsocc/errors.hpp"

namespace gsocc {

namespace {

Quat normalized(const Quat& q) {
  const double n = q.norm();
  if (!(n >= kMinQuaternionNorm)) {
    throw DegenerateRotationError("quaternion norm " + std::to_string(n) + " is below 1e-12");
  }
  return q / n;
}

void check_scale(const Vec3& s) {
  for (int a = 0; a < 3; ++a) {
    if (!(s[a] > 0.0) || !std::isfinite(s[a])) {
      throw InvalidScaleError("scale component " + std::to_string(a) + " = " +
                              std::to_string(s[a]) + " must be positive and finite");
    }
  }
}

// Rotation matrix of a unit quaternion.
Mat3 rotation_of_unit(const Quat& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

// Partial derivatives of rotation_of_unit() w.r.t. w, x, y, z.
std::array<Mat3, 4> rotation_partials(const Quat& q) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  std::array<Mat3, 4> d;
  d[0] << 0, -2 * z, 2 * y,
          2 * z, 0, -2 * x,
          -2 * y, 2 * x, 0;
  d[1] << 0, 2 * y, 2 * z,
          2 * y, -4 * x, -2 * w,
          2 * z, 2 * w, -4 * x;
  d[2] << -4 * y, 2 * x, 2 * w,
          2 * x, 0, 2 * z,
          -2 * w, 2 * z, -4 * y;
  d[3] << -4 * z, -2 * w, 2 * x,
          2 * w, -4 * z, 2 * y,
          2 * x, 2 * y, 0;
  return d;
}

}  // namespace

SemanticGaussian make_gaussian(const Eigen::Vector3f& mean, const Eigen::Vector3f& scale,
                               const Eigen::Vector4f& rotation, std::vector<float> logits,
                               float scale_max) {
  check_scale(scale.cast<double>());
  for (int a = 0; a < 3; ++a) {
    if (scale[a] > scale_max) {
      throw InvalidScaleError("scale component " + std::to_string(a) + " = " +
                              std::to_string(scale[a]) + " exceeds max scale " +
                              std::to_string(scale_max));
    }
  }
  const Quat q = normalized(rotation.cast<double>());
  SemanticGaussian g;
  g.mean = mean;
  g.scale = scale;
  g.rotation = q.cast<float>();
  g.logits = std::move(logits);
  return g;
}

GaussianGeometry GaussianGeometry::from(const SemanticGaussian& g) {
  return {g.mean.cast<double>(), g.scale.cast<double>(), g.rotation.cast<double>()};
}

GaussianScene::GaussianScene(std::size_t class_count, std::vector<std::string> class_names)
    : class_count_(class_count), class_names_(std::move(class_names)) {
  if (class_count_ == 0) {
    throw InvalidArgumentError("class count must be positive");
  }
  if (!class_names_.empty() && class_names_.size() != class_count_) {
    throw InvalidArgumentError("expected " + std::to_string(class_count_) + " class names, got " +
                               std::to_string(class_names_.size()));
  }
}

void GaussianScene::add(SemanticGaussian g) {
  if (g.logits.size() != class_count_) {
    throw ShapeError("gaussian has " + std::to_string(g.logits.size()) +
                     " logits, scene has " + std::to_string(class_count_) + " classes");
  }
  gaussians_.push_back(std::move(g));
}

Mat3 quat_to_rotation(const Quat& q) { return rotation_of_unit(normalized(q)); }

Covariance covariance(const Vec3& scale, const Quat& rotation) {
  check_scale(scale);
  const Mat3 r = quat_to_rotation(rotation);
  const Mat3 rs = r * scale.asDiagonal();
  Mat3 sigma = rs * rs.transpose();
  // Exact symmetry regardless of rounding in the product.
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  return {sigma};
}

Mat3 inverse_covariance(const Vec3& scale, const Quat& rotation) {
  check_scale(scale);
  const Mat3 r = quat_to_rotation(rotation);
  const Vec3 inv_var = scale.array().square().inverse();
  Mat3 a = r * inv_var.asDiagonal() * r.transpose();
  a = 0.5 * (a + a.transpose()).eval();
  return a;
}

double mahalanobis_squared(const GaussianGeometry& g, const Vec3& p) {
  const Vec3 d = p - g.mean;
  return d.dot(inverse_covariance(g.scale, g.rotation) * d);
}

PreparedGaussian::PreparedGaussian(const SemanticGaussian& g)
    : mean_(g.mean.cast<double>()), semantics_(g.logits) {
  const Mat3 a = inverse_covariance(g.scale.cast<double>(), g.rotation.cast<double>());
  a00_ = a(0, 0);
  a01_ = a(0, 1);
  a02_ = a(0, 2);
  a11_ = a(1, 1);
  a12_ = a(1, 2);
  a22_ = a(2, 2);
}

double gaussian_weight(const SemanticGaussian& g, const Vec3& p) {
  return PreparedGaussian(g).weight(p);
}

std::vector<double> evaluate(const SemanticGaussian& g, const Vec3& p) {
  const double w = gaussian_weight(g, p);
  std::vector<double> out(g.logits.size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c] = w * static_cast<double>(g.logits[c]);
  }
  return out;
}

WeightGradientEvaluator::WeightGradientEvaluator(const GaussianGeometry& g)
    : mean_(g.mean), scale_(g.scale) {
  check_scale(g.scale);
  qnorm_ = g.rotation.norm();
  qhat_ = normalized(g.rotation);
  rotation_ = rotation_of_unit(qhat_);
  inv_var_ = g.scale.array().square().inverse();
  const auto partials = rotation_partials(qhat_);
  for (int j = 0; j < 4; ++j) partials_t_[j] = partials[j].transpose();
}

WeightGradient WeightGradientEvaluator::operator()(const Vec3& p) const {
  const Vec3 d = p - mean_;
  const Vec3 u = rotation_.transpose() * d;  // local coordinates
  const double q = (u.array().square() * inv_var_.array()).sum();

  WeightGradient out;
  out.weight = std::exp(-0.5 * q);
  const double w = out.weight;

  // dq/dm = -2 A d with A = R diag(1/s^2) R^T
  out.d_mean = w * (rotation_ * (inv_var_.asDiagonal() * u));
  // dq/ds_i = -2 u_i^2 / s_i^3
  for (int i = 0; i < 3; ++i) {
    out.d_scale[i] = w * u[i] * u[i] * inv_var_[i] / scale_[i];
  }
  // dq/du = 2 u / s^2, du/dqhat_j = (dR/dqhat_j)^T d
  const Vec3 dq_du = 2.0 * (inv_var_.array() * u.array()).matrix();
  Quat d_qhat;
  for (int j = 0; j < 4; ++j) {
    d_qhat[j] = -0.5 * w * dq_du.dot(partials_t_[j] * d);
  }
  // Through q / |q|: project out the radial component.
  out.d_rotation = (d_qhat - qhat_ * qhat_.dot(d_qhat)) / qnorm_;
  return out;
}

WeightGradient evaluate_weight_grad(const GaussianGeometry& g, const Vec3& p) {
  return WeightGradientEvaluator(g)(p);
}

WeightGradient evaluate_weight_grad(const SemanticGaussian& g, const Vec3& p) {
  return evaluate_weight_grad(GaussianGeometry::from(g), p);
}

std::vector<Vec3> reference_points(const SemanticGaussian& g, int count_per_axis) {
  if (count_per_axis < 0) {
    throw InvalidArgumentError("count_per_axis must be non-negative");
  }
  const GaussianGeometry geo = GaussianGeometry::from(g);
  const Mat3 r = quat_to_rotation(geo.rotation);
  std::vector<Vec3> pts;
  pts.reserve(1 + 6 * static_cast<std::size_t>(count_per_axis));
  pts.push_back(geo.mean);
  for (int a = 0; a < 3; ++a) {
    const Vec3 step = geo.scale[a] * r.col(a);
    for (int k = 1; k <= count_per_axis; ++k) {
      pts.push_back(geo.mean + k * step);
      pts.push_back(geo.mean - k * step);
    }
  }
  return pts;
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

ActivatedProperties activate(const Vec3& raw_scale, std::span<const double> raw_logits,
                             double s_min, double s_max) {
  if (!(s_min > 0.0) || !(s_min < s_max)) {
    throw InvalidArgumentError("activate requires 0 < s_min < s_max");
  }
  ActivatedProperties out;
  for (int a = 0; a < 3; ++a) {
    out.scale[a] = s_min + sigmoid(raw_scale[a]) * (s_max - s_min);
  }
  out.semantics = softmax(raw_logits);
  return out;
}

}  // namespace gsocc
