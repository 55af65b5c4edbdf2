#include "atrophy/imgvol/affine.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "atrophy/error.hpp"

namespace atrophy {

Affine4::Affine4(const Mat4& m) : m_(m) {
  if (!m_.allFinite()) throw Error("affine has non-finite entries");
  if (m_(3, 0) != 0.0 || m_(3, 1) != 0.0 || m_(3, 2) != 0.0 || m_(3, 3) != 1.0) {
    throw Error("affine last row must be exactly (0, 0, 0, 1)");
  }
  const double det = m_.topLeftCorner<3, 3>().determinant();
  if (!(std::abs(det) > 1e-12)) throw Error("affine linear part is singular");
}

Affine4 Affine4::translation(const Vec3& t) {
  Mat4 m = Mat4::Identity();
  m.topRightCorner<3, 1>() = t;
  return Affine4(m);
}

Affine4 Affine4::from_parts(const Mat3& linear, const Vec3& offset) {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = linear;
  m.topRightCorner<3, 1>() = offset;
  return Affine4(m);
}

Affine4 Affine4::inverse() const {
  const Mat3 inv = linear().inverse();
  return from_parts(inv, -(inv * offset()));
}

Affine4 Affine4::operator*(const Affine4& rhs) const {
  Mat4 m = m_ * rhs.m_;
  m.row(3) << 0.0, 0.0, 0.0, 1.0;
  return Affine4(m);
}

double Affine4::max_abs_diff(const Affine4& other) const {
  return (m_ - other.m_).cwiseAbs().maxCoeff();
}

std::string affine_to_text(const Affine4& t) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) os << t.matrix()(r, c) << (c == 3 ? '\n' : ' ');
  }
  return os.str();
}

void write_affine_text(const Affine4& t, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write transform file " + path.string());
  os << affine_to_text(t);
  if (!os) throw Error("I/O failure writing " + path.string());
}

Affine4 read_affine_text(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read transform file " + path.string());
  Mat4 m;
  for (int i = 0; i < 16; ++i) {
    if (!(is >> m(i / 4, i % 4))) {
      throw Error("transform file " + path.string() + " must hold 16 numbers");
    }
  }
  std::string extra;
  if (is >> extra) throw Error("transform file " + path.string() + " has trailing data");
  return Affine4(m);
}

}  // namespace atrophy
