#include <cmath>

#include <algorithm>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "atrophy/error.hpp"
#include "atrophy/register/register.hpp"

namespace atrophy {

double& AffineParams::operator[](int i) {
  Vec3* groups[4] = {&t, &r, &s, &k};
  return (*groups[i / 3])[i % 3];
}

double AffineParams::operator[](int i) const {
  const Vec3* groups[4] = {&t, &r, &s, &k};
  return (*groups[i / 3])[i % 3];
}

namespace {

Mat3 rotation(const Vec3& r) {
  const double cx = std::cos(r[0]), sx = std::sin(r[0]);
  const double cy = std::cos(r[1]), sy = std::sin(r[1]);
  const double cz = std::cos(r[2]), sz = std::sin(r[2]);
  Mat3 rx, ry, rz;
  rx << 1, 0, 0, 0, cx, -sx, 0, sx, cx;
  ry << cy, 0, sy, 0, 1, 0, -sy, 0, cy;
  rz << cz, -sz, 0, sz, cz, 0, 0, 0, 1;
  return rz * ry * rx;
}

}  // namespace

Affine4 AffineParams::to_matrix() const {
  Mat3 shear;
  shear << 1, k[0], k[1], 0, 1, k[2], 0, 0, 1;
  const Vec3 scale(std::exp(s[0]), std::exp(s[1]), std::exp(s[2]));
  const Mat3 m = rotation(r) * scale.asDiagonal() * shear;
  return Affine4::from_parts(m, center + t - m * center);
}

AffineParams AffineParams::from_matrix(const Affine4& a, const Vec3& center) {
  const Mat3 l = a.linear();
  if (!(l.determinant() > 0.0)) throw Error("from_matrix: determinant must be positive");
  Eigen::HouseholderQR<Mat3> qr(l);
  Mat3 q = qr.householderQ();
  Mat3 u = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < 3; ++i) {
    if (u(i, i) < 0) {
      u.row(i) *= -1.0;
      q.col(i) *= -1.0;
    }
  }
  AffineParams p;
  p.center = center;
  for (int i = 0; i < 3; ++i) p.s[i] = std::log(u(i, i));
  p.k = Vec3(u(0, 1) / u(0, 0), u(0, 2) / u(0, 0), u(1, 2) / u(1, 1));
  p.r[1] = std::asin(std::clamp(-q(2, 0), -1.0, 1.0));
  p.r[0] = std::atan2(q(2, 1), q(2, 2));
  p.r[2] = std::atan2(q(1, 0), q(0, 0));
  p.t = a.offset() - center + l * center;
  return p;
}

Affine4 sqrt_affine(const Affine4& t) {
  const Mat3 l = t.linear();
  if (!(l.determinant() > 0.0)) throw Error("sqrt_affine: determinant must be positive");
  Eigen::EigenSolver<Mat3> es(l, false);
  for (int i = 0; i < 3; ++i) {
    const auto ev = es.eigenvalues()[i];
    if (std::abs(ev.imag()) <= 1e-12 * std::abs(ev.real()) && ev.real() <= 0.0) {
      throw Error("sqrt_affine: negative real eigenvalue, no principal root");
    }
  }
  // Denman-Beavers iteration for the linear block.
  Mat3 y = l;
  Mat3 z = Mat3::Identity();
  bool converged = false;
  for (int it = 0; it < 100; ++it) {
    const Mat3 yi = y.inverse();
    const Mat3 zi = z.inverse();
    const Mat3 yn = 0.5 * (y + zi);
    const Mat3 zn = 0.5 * (z + yi);
    const double delta = (yn - y).cwiseAbs().maxCoeff();
    y = yn;
    z = zn;
    if (!y.allFinite()) break;
    if (delta < 1e-12 * std::max(1.0, y.cwiseAbs().maxCoeff())) {
      converged = true;
      break;
    }
  }
  if (!converged) throw Error("sqrt_affine: iteration did not converge");
  // One Newton refinement, then the translation from (S + I) u = b.
  y = 0.5 * (y + y.inverse() * l);
  const Vec3 u = (y + Mat3::Identity()).partialPivLu().solve(t.offset());
  return Affine4::from_parts(y, u);
}

}  // namespace atrophy
