#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>

namespace atrophy {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// 4x4 homogeneous transform. The last row is exactly (0,0,0,1) and the
/// upper-left 3x3 block is invertible; both are checked on construction.
class Affine4 {
 public:
  Affine4() : m_(Mat4::Identity()) {}
  explicit Affine4(const Mat4& m);

  static Affine4 identity() { return Affine4(); }
  static Affine4 translation(const Vec3& t);
  static Affine4 from_parts(const Mat3& linear, const Vec3& offset);

  const Mat4& matrix() const noexcept { return m_; }
  Mat3 linear() const { return m_.topLeftCorner<3, 3>(); }
  Vec3 offset() const { return m_.topRightCorner<3, 1>(); }

  Vec3 apply(const Vec3& p) const { return linear() * p + offset(); }
  Affine4 inverse() const;
  Affine4 operator*(const Affine4& rhs) const;

  /// Largest absolute entry-wise difference.
  double max_abs_diff(const Affine4& other) const;

 private:
  Mat4 m_;
};

/// Sidecar text form: 16 whitespace-separated numbers, row-major.
void write_affine_text(const Affine4& t, const std::filesystem::path& path);
Affine4 read_affine_text(const std::filesystem::path& path);
std::string affine_to_text(const Affine4& t);

}  // namespace atrophy
