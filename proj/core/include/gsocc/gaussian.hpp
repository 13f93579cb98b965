#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace gsocc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
// Quaternion stored as (w, x, y, z). Eigen::Quaternion uses (x, y, z, w) in
// memory, so plain 4-vectors are used everywhere to keep the order explicit.
using Quat = Eigen::Vector4d;

inline constexpr float kDefaultScaleMin = 0.01f;
inline constexpr float kDefaultScaleMax = 0.3f;  // nuScenes setting
inline constexpr float kKitti360ScaleMax = 0.5f;
inline constexpr double kMinQuaternionNorm = 1e-12;

// One scene primitive: mean, per-axis standard deviation, rotation and one
// semantic value per class. Stored values are 32-bit; all evaluation happens
// in double.
struct SemanticGaussian {
  Eigen::Vector3f mean = Eigen::Vector3f::Zero();
  Eigen::Vector3f scale = Eigen::Vector3f::Ones();
  Eigen::Vector4f rotation{1.0f, 0.0f, 0.0f, 0.0f};  // (w, x, y, z), unit norm
  std::vector<float> logits;
};

// Validating constructor: normalizes the rotation, rejects non-positive or
// non-finite scales and, when scale_max is finite, scales above it.
SemanticGaussian make_gaussian(const Eigen::Vector3f& mean, const Eigen::Vector3f& scale,
                               const Eigen::Vector4f& rotation, std::vector<float> logits,
                               float scale_max = std::numeric_limits<float>::infinity());

// Geometry of a Gaussian in double precision. Used by the gradient code and
// by the fitter, which keeps its parameters in double.
struct GaussianGeometry {
  Vec3 mean = Vec3::Zero();
  Vec3 scale = Vec3::Ones();
  Quat rotation{1.0, 0.0, 0.0, 0.0};

  static GaussianGeometry from(const SemanticGaussian& g);
};

struct Covariance {
  Mat3 matrix;
};

// Ordered set of Gaussians sharing one class count. Class 0 is the empty class.
class GaussianScene {
 public:
  explicit GaussianScene(std::size_t class_count, std::vector<std::string> class_names = {});

  void add(SemanticGaussian g);
  void reserve(std::size_t n) { gaussians_.reserve(n); }

  std::size_t size() const noexcept { return gaussians_.size(); }
  bool empty() const noexcept { return gaussians_.empty(); }
  std::size_t class_count() const noexcept { return class_count_; }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }

  const SemanticGaussian& operator[](std::size_t i) const { return gaussians_[i]; }
  SemanticGaussian& operator[](std::size_t i) { return gaussians_[i]; }
  const std::vector<SemanticGaussian>& gaussians() const noexcept { return gaussians_; }

  auto begin() const { return gaussians_.begin(); }
  auto end() const { return gaussians_.end(); }

 private:
  std::size_t class_count_;
  std::vector<std::string> class_names_;
  std::vector<SemanticGaussian> gaussians_;
};

// Rotation matrix of a (w, x, y, z) quaternion, normalized internally.
// Throws DegenerateRotationError when the norm is below 1e-12.
Mat3 quat_to_rotation(const Quat& q);

// Sigma = R diag(s) diag(s)^T R^T. Throws InvalidScaleError for s <= 0.
Covariance covariance(const Vec3& scale, const Quat& rotation);

// Closed-form inverse R diag(1/s^2) R^T.
Mat3 inverse_covariance(const Vec3& scale, const Quat& rotation);

// Squared Mahalanobis distance of p from the Gaussian.
double mahalanobis_squared(const GaussianGeometry& g, const Vec3& p);

// exp(-d^2/2) in (0, 1].
double gaussian_weight(const SemanticGaussian& g, const Vec3& p);

// weight(p) * c, one entry per class.
std::vector<double> evaluate(const SemanticGaussian& g, const Vec3& p);

struct WeightGradient {
  double weight = 0.0;
  Vec3 d_mean = Vec3::Zero();
  Vec3 d_scale = Vec3::Zero();
  // Gradient w.r.t. the raw quaternion through normalization, i.e. projected
  // onto the tangent space of the unit sphere and divided by |q|.
  Quat d_rotation = Quat::Zero();
};

// Precomputes rotation, its partials and inverse variances of one Gaussian
// for repeated gradient evaluation.
class WeightGradientEvaluator {
 public:
  explicit WeightGradientEvaluator(const GaussianGeometry& g);
  WeightGradient operator()(const Vec3& p) const;

 private:
  Vec3 mean_;
  Vec3 scale_;
  Vec3 inv_var_;
  Quat qhat_;
  double qnorm_ = 1.0;
  Mat3 rotation_;
  std::array<Mat3, 4> partials_t_;  // transposed dR/dq_j
};

WeightGradient evaluate_weight_grad(const GaussianGeometry& g, const Vec3& p);
WeightGradient evaluate_weight_grad(const SemanticGaussian& g, const Vec3& p);

// The mean followed by m + k sigma_a u_a and m - k sigma_a u_a for every
// principal axis a (columns of R, sigma = s) and k = 1..count_per_axis.
// Returns 1 + 6 * count_per_axis points.
std::vector<Vec3> reference_points(const SemanticGaussian& g, int count_per_axis);

double sigmoid(double x);

// Numerically stable softmax; output sums to one.
std::vector<double> softmax(std::span<const double> logits);

struct ActivatedProperties {
  Vec3 scale;
  std::vector<double> semantics;
};

// scale = s_min + sigmoid(raw_scale) (s_max - s_min), semantics = softmax(raw_logits).
ActivatedProperties activate(const Vec3& raw_scale, std::span<const double> raw_logits,
                             double s_min, double s_max);

// Per-Gaussian data precomputed for repeated weight evaluation. Both the
// splatter and the brute-force oracle go through weight() so their per-pair
// contributions are bitwise identical.
class PreparedGaussian {
 public:
  PreparedGaussian() = default;
  explicit PreparedGaussian(const SemanticGaussian& g);

  double weight(const Vec3& p) const {
    const double dx = p.x() - mean_.x();
    const double dy = p.y() - mean_.y();
    const double dz = p.z() - mean_.z();
    const double q = a00_ * dx * dx + a11_ * dy * dy + a22_ * dz * dz +
                     2.0 * (a01_ * dx * dy + a02_ * dx * dz + a12_ * dy * dz);
    return std::exp(-0.5 * q);
  }

  const Vec3& mean() const noexcept { return mean_; }
  std::span<const float> semantics() const noexcept { return semantics_; }

 private:
  Vec3 mean_ = Vec3::Zero();
  double a00_ = 1, a01_ = 0, a02_ = 0, a11_ = 1, a12_ = 0, a22_ = 1;
  std::span<const float> semantics_;
};

// out[c] += float(w * c[c]) for every class. The one accumulation rule shared
// by every float32 splatting path.
inline void accumulate_contribution(double w, std::span<const float> semantics, float* out) {
  for (std::size_t c = 0; c < semantics.size(); ++c) {
    out[c] += static_cast<float>(w * static_cast<double>(semantics[c]));
  }
}

}  // namespace gsocc
