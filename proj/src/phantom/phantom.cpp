#include "atrophy/phantom/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/SVD>

#include "atrophy/error.hpp"
#include "atrophy/imgvol/bspline.hpp"
#include "atrophy/imgvol/sampling.hpp"

namespace atrophy {

Grid PhantomSpec::grid() const { return Grid(dims, spacing); }

Vec3 PhantomSpec::center() const {
  const Grid g = grid();
  return g.vox_to_world().apply(Vec3(static_cast<double>(dims[0] - 1) / 2.0,
                                     static_cast<double>(dims[1] - 1) / 2.0,
                                     static_cast<double>(dims[2] - 1) / 2.0));
}

void PhantomSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 8) throw Error("phantom: dims must be at least 8");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
      throw Error("phantom: spacing must be positive");
    }
    if (!(axis_ratios[a] > 0.0)) throw Error("phantom: axis ratios must be positive");
  }
  if (!(brain_radius_mm > 0.0)) throw Error("phantom: brain radius must be positive");
  if (!(shape_modulation >= 0.0 && shape_modulation <= 0.2)) {
    throw Error("phantom: shape modulation must lie in [0, 0.2]");
  }
  double sum = 0.0;
  for (double f : layer_fracs) {
    if (!(f > 0.0)) throw Error("phantom: layer fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error("phantom: layer fractions must sum to 1");
  if (!(skull_inner_offset_mm >= 0.0) || !(skull_thickness_mm > 0.0) ||
      !(scalp_thickness_mm > 0.0)) {
    throw Error("phantom: shell thicknesses must be positive");
  }
  const double outer =
      brain_radius_mm + skull_inner_offset_mm + skull_thickness_mm + scalp_thickness_mm;
  for (int a = 0; a < 3; ++a) {
    const double half_fov = static_cast<double>(dims[a] - 1) / 2.0 * spacing[a];
    if (outer * (1.0 + shape_modulation) * axis_ratios[a] + 3.0 * spacing[a] > half_fov) {
      throw Error("phantom: head does not fit inside the grid with a 3-voxel margin");
    }
  }
  const auto& i = intensities;
  if (!(i.background < i.csf && i.csf < i.skull && i.skull < i.gm && i.gm < i.wm &&
        i.scalp > i.skull)) {
    throw Error("phantom: intensities must satisfy background < CSF < skull < GM < WM "
                "and scalp > skull");
  }
}

namespace {

struct Radii {
  double wm, gm, brain, skull_in, skull_out, scalp_out;
};

Radii radii(const PhantomSpec& s, double brain_scale) {
  const double r = s.brain_radius_mm * brain_scale;
  Radii out{};
  out.wm = r * s.layer_fracs[2];
  out.gm = r * (s.layer_fracs[2] + s.layer_fracs[1]);
  out.brain = r;
  out.skull_in = s.brain_radius_mm + s.skull_inner_offset_mm;
  out.skull_out = out.skull_in + s.skull_thickness_mm;
  out.scalp_out = out.skull_out + s.scalp_thickness_mm;
  return out;
}

// Three-fold harmonics in each coordinate plane plus xyz, each bounded by 1 on
// the unit sphere and mutually orthogonal by parity.
constexpr double kProfileW[4] = {0.3, 0.3, 0.3, 0.1};
constexpr double kProfileE2[4] = {8.0 / 35.0, 8.0 / 35.0, 8.0 / 35.0, 27.0 / 105.0};

double shape_profile(const Vec3& d) {
  const double x = d[0], y = d[1], z = d[2];
  return kProfileW[0] * (x * x * x - 3.0 * x * y * y) + kProfileW[1] * (y * y * y - 3.0 * y * z * z) +
         kProfileW[2] * (z * z * z - 3.0 * z * x * x) + kProfileW[3] * 3.0 * std::sqrt(3.0) * x * y * z;
}

double shape_rho(const Vec3& p, const Vec3& c, const Vec3& ratios, double a) {
  const Vec3 u = ((p - c).array() / ratios.array()).matrix();
  const double n = u.norm();
  if (a == 0.0 || n == 0.0) return n;
  return n / (1.0 + a * shape_profile(u / n));
}

HeadClass class_at(double r, const Radii& rr) {
  if (r < rr.wm) return HeadClass::Wm;
  if (r < rr.gm) return HeadClass::Gm;
  if (r < rr.brain) return HeadClass::Csf;
  if (r < rr.skull_in) return HeadClass::Gap;
  if (r < rr.skull_out) return HeadClass::Skull;
  if (r < rr.scalp_out) return HeadClass::Scalp;
  return HeadClass::Background;
}

double intensity_of(HeadClass c, const PhantomIntensities& i) {
  switch (c) {
    case HeadClass::Csf: return i.csf;
    case HeadClass::Gm: return i.gm;
    case HeadClass::Wm: return i.wm;
    case HeadClass::Skull: return i.skull;
    case HeadClass::Scalp: return i.scalp;
    case HeadClass::Gap:
    case HeadClass::Background: return i.background;
  }
  return i.background;
}

bool is_brain(HeadClass c) {
  return c == HeadClass::Csf || c == HeadClass::Gm || c == HeadClass::Wm;
}

std::uint8_t tissue_of(HeadClass c) {
  switch (c) {
    case HeadClass::Csf: return kCSF;
    case HeadClass::Gm: return kGM;
    case HeadClass::Wm: return kWM;
    default: return kBG;
  }
}

}  // namespace

double PhantomSpec::rho(const Vec3& p_world) const {
  return shape_rho(p_world, center(), axis_ratios, shape_modulation);
}

HeadClass classify_point(const PhantomSpec& spec, const Vec3& p_world, double brain_scale) {
  return class_at(spec.rho(p_world), radii(spec, brain_scale));
}

Phantom make_head_phantom(const PhantomSpec& spec, double brain_scale, const Affine4& pose) {
  if (!is_rigid(pose)) throw Error("phantom: pose is not rigid");
  const Affine4 to_head = pose.inverse();
  spec.validate();
  const Radii rr = radii(spec, brain_scale);
  if (rr.brain > rr.skull_in) {
    throw Error("phantom: scaled brain surface would cross the inner skull");
  }
  const Grid g = spec.grid();
  const Vec3 c = spec.center();
  const Vec3& ratios = spec.axis_ratios;
  const Mat3 lin = g.vox_to_world().linear();
  const double sub_reach = (lin.col(0).norm() + lin.col(1).norm() + lin.col(2).norm()) / 3.0;
  // Lipschitz bound of rho: |grad rho| <= (1 + 4a) / (1 - a)^2 / min ratio.
  const double a = spec.shape_modulation;
  const double lip = (1.0 + 4.0 * a) / ((1.0 - a) * (1.0 - a)) / ratios.minCoeff();
  const double rho_reach = sub_reach * lip + 1e-9;
  const double interfaces[6] = {rr.wm, rr.gm, rr.brain, rr.skull_in, rr.skull_out, rr.scalp_out};

  std::vector<double> image(g.size());
  std::vector<std::uint8_t> mask(g.size(), 0);
  std::vector<std::uint8_t> labels(g.size(), kBG);
  std::vector<HeadClass> classes(g.size(), HeadClass::Background);

  for (std::int64_t k = 0; k < g.nz(); ++k) {
    for (std::int64_t j = 0; j < g.ny(); ++j) {
      for (std::int64_t i = 0; i < g.nx(); ++i) {
        const std::size_t idx = g.index(i, j, k);
        const Vec3 p = to_head.apply(g.world(i, j, k));
        const double r0 = shape_rho(p, c, ratios, a);
        bool near = false;
        for (double r : interfaces) near = near || std::abs(r0 - r) <= rho_reach;
        if (!near) {
          const HeadClass hc = class_at(r0, rr);
          image[idx] = intensity_of(hc, spec.intensities);
          classes[idx] = hc;
          mask[idx] = is_brain(hc) ? 1 : 0;
          labels[idx] = tissue_of(hc);
          continue;
        }
        int counts[7] = {0, 0, 0, 0, 0, 0, 0};
        double sum = 0.0;
        for (int dz = -1; dz <= 1; ++dz) {
          for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
              const Vec3 q = to_head.apply(g.vox_to_world().apply(Vec3(static_cast<double>(i) + dx / 3.0,
                                                         static_cast<double>(j) + dy / 3.0,
                                                         static_cast<double>(k) + dz / 3.0)));
              const HeadClass hc = class_at(shape_rho(q, c, ratios, a), rr);
              ++counts[static_cast<int>(hc)];
              sum += intensity_of(hc, spec.intensities);
            }
          }
        }
        image[idx] = sum / 27.0;
        int best = 0;
        for (int cl = 1; cl < 7; ++cl) {
          if (counts[cl] > counts[best]) best = cl;
        }
        classes[idx] = static_cast<HeadClass>(best);
        const int n_brain = counts[1] + counts[2] + counts[3];
        if (n_brain >= 14) {
          mask[idx] = 1;
          int t = 1;
          for (int cl = 2; cl <= 3; ++cl) {
            if (counts[cl] > counts[t]) t = cl;
          }
          labels[idx] = static_cast<std::uint8_t>(t);
        }
      }
    }
  }

  Phantom out;
  out.image = Volume(g, std::move(image));
  out.brain_mask = BinaryMask(g, std::move(mask));
  out.labels = TissueSegmentation(g, std::move(labels));
  out.classes = std::move(classes);
  return out;
}

double analytic_brain_volume(const PhantomSpec& spec, double brain_scale) {
  // Sphere means of the odd profile powers vanish.
  const double a = spec.shape_modulation;
  double e_p2 = 0.0;
  for (int i = 0; i < 4; ++i) e_p2 += kProfileW[i] * kProfileW[i] * kProfileE2[i];
  const double r = spec.brain_radius_mm * brain_scale;
  return 4.0 / 3.0 * std::numbers::pi * r * r * r * spec.axis_ratios.prod() *
         (1.0 + 3.0 * a * a * e_p2);
}

AtrophyPair apply_atrophy(const PhantomSpec& spec, double s) {
  if (!(s >= 0.9 && s <= 1.1)) throw Error("apply_atrophy: scale must lie in [0.9, 1.1]");
  AtrophyPair pair;
  pair.t0 = make_head_phantom(spec, 1.0);
  pair.t1 = s == 1.0 ? pair.t0 : make_head_phantom(spec, s);
  pair.truth.brain_volume_mm3 = analytic_brain_volume(spec, 1.0);
  pair.truth.pbvc_true_percent = 100.0 * (s * s * s - 1.0);
  pair.truth.applied_scale = s;
  return pair;
}

bool is_rigid(const Affine4& t, double tol) {
  const Mat3 l = t.linear();
  if (!(l.determinant() > 0.0)) return false;
  Eigen::JacobiSVD<Mat3> svd(l);
  const Vec3 sv = svd.singularValues();
  return (sv.array() - 1.0).abs().maxCoeff() <= tol;
}

Affine4 rigid_transform(const Vec3& r, const Vec3& t, const Vec3& center) {
  const Mat3 rot = (Eigen::AngleAxisd(r[2], Vec3::UnitZ()) *
                    Eigen::AngleAxisd(r[1], Vec3::UnitY()) *
                    Eigen::AngleAxisd(r[0], Vec3::UnitX()))
                       .toRotationMatrix();
  return Affine4::from_parts(rot, center - rot * center + t);
}

NormalSource::NormalSource(std::uint64_t seed) : engine_(seed) {}

double NormalSource::uniform_open() {
  // 53 random bits mapped to the open interval (0, 1).
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double NormalSource::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform_open();
  const double u2 = uniform_open();
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * std::numbers::pi * u2;
  spare_ = rad * std::sin(ang);
  has_spare_ = true;
  return rad * std::cos(ang);
}

Volume apply_acquisition(const Volume& v, double noise_sigma, double bias_amp,
                         const Affine4& rigid, std::uint64_t seed) {
  if (!(noise_sigma >= 0.0)) throw Error("apply_acquisition: noise sigma must be >= 0");
  if (!(bias_amp >= 0.0)) throw Error("apply_acquisition: bias amplitude must be >= 0");
  if (!is_rigid(rigid)) {
    throw Error("apply_acquisition: transform is not rigid (scale or shear detected)");
  }
  const Grid& g = v.grid();
  Volume out =
      rigid.max_abs_diff(Affine4::identity()) == 0.0 ? v : resample_cubic(v, rigid, g);
  auto d = out.data();
  if (bias_amp > 0.0) {
    auto norm = [](std::int64_t i, std::int64_t n) {
      return 2.0 * static_cast<double>(i) / static_cast<double>(n - 1) - 1.0;
    };
    for (std::int64_t k = 0; k < g.nz(); ++k) {
      const double gz = std::cos(std::numbers::pi * norm(k, g.nz()));
      for (std::int64_t j = 0; j < g.ny(); ++j) {
        const double gy = std::cos(std::numbers::pi * norm(j, g.ny()));
        for (std::int64_t i = 0; i < g.nx(); ++i) {
          const double gx = std::cos(std::numbers::pi * norm(i, g.nx()));
          d[g.index(i, j, k)] *= 1.0 + bias_amp * gx * gy * gz;
        }
      }
    }
  }
  if (noise_sigma > 0.0) {
    NormalSource rng(seed);
    for (auto& x : d) x += noise_sigma * rng.next();
  }
  return out;
}

}  // namespace atrophy
