#include <algorithm>
#include <cmath>
#include <limits>

#include "atrophy/error.hpp"
#include "atrophy/imgvol/sampling.hpp"
#include "atrophy/pbvc/pbvc.hpp"

namespace atrophy {

namespace {

struct Ncc {
  bool valid = false;
  double r = 0.0;
};

Ncc profile_ncc(const std::vector<double>& x, const std::vector<double>& y) {
  double n = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) continue;
    n += 1;
    sx += x[i];
    sy += y[i];
  }
  if (n < 0.5 * static_cast<double>(x.size()) || n < 3) return {};
  const double mx = sx / n, my = sy / n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) continue;
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  const double scale = std::max(mx * mx + my * my, 1.0) * n;
  if (!(sxx > 1e-12 * scale) || !(syy > 1e-12 * scale)) return {};
  return {true, sxy / std::sqrt(sxx * syy)};
}

}  // namespace

ProfileSampler::ProfileSampler(const Volume& v, ProfileInterpolation interp) : volume_(&v) {
  if (interp == ProfileInterpolation::CubicBSpline) spline_ = std::make_shared<CubicBSpline>(v);
}

void ProfileSampler::sample_many(std::span<const double> wx, std::span<const double> wy,
                                 std::span<const double> wz, std::span<double> out,
                                 double oob) const {
  if (spline_) {
    spline_->sample_many(wx, wy, wz, out, oob);
  } else {
    trilinear_sample_many(*volume_, wx, wy, wz, out, oob);
  }
}

EdgeSample edge_displacement(const Volume& a_h, const Volume& b_h, const Vec3& point,
                             const Vec3& normal, const EdgeOptions& o) {
  return edge_displacement(ProfileSampler(a_h, o.interpolation),
                           ProfileSampler(b_h, o.interpolation), point, normal, o);
}

EdgeSample edge_displacement(const ProfileSampler& a_h, const ProfileSampler& b_h,
                             const Vec3& point, const Vec3& normal, const EdgeOptions& o) {
  if (!(o.step_mm > 0 && o.shift_step_mm > 0 && o.half_length_mm > 0 && o.search_limit_mm >= 0)) {
    throw Error("edge displacement: invalid profile options");
  }
  EdgeSample s;
  s.point = point;
  s.normal = normal;
  const int n_half = static_cast<int>(std::llround(o.half_length_mm / o.step_mm));
  const int m_half = static_cast<int>(std::llround(o.search_limit_mm / o.shift_step_mm));
  const auto np = static_cast<std::size_t>(2 * n_half + 1);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::vector<double> ax(np), ay(np), az(np), bx(np), by(np), bz(np);
  std::vector<double> pa(np), pb(np);
  auto ncc_at = [&](double delta) {
    const double half = 0.5 * delta;
    for (int j = -n_half; j <= n_half; ++j) {
      const auto jj = static_cast<std::size_t>(j + n_half);
      const double t = j * o.step_mm;
      const Vec3 qa = point + (t - half) * normal;
      const Vec3 qb = point + (t + half) * normal;
      ax[jj] = qa[0];
      ay[jj] = qa[1];
      az[jj] = qa[2];
      bx[jj] = qb[0];
      by[jj] = qb[1];
      bz[jj] = qb[2];
    }
    a_h.sample_many(ax, ay, az, pa, nan);
    b_h.sample_many(bx, by, bz, pb, nan);
    return profile_ncc(pa, pb);
  };

  std::vector<Ncc> score(static_cast<std::size_t>(2 * m_half + 1));
  for (int m = -m_half; m <= m_half; ++m) {
    score[static_cast<std::size_t>(m + m_half)] = ncc_at(m * o.shift_step_mm);
  }

  int best = 0;
  bool any = false;
  double best_r = -2.0;
  for (int m = -m_half; m <= m_half; ++m) {
    const Ncc& c = score[static_cast<std::size_t>(m + m_half)];
    if (!c.valid) continue;
    // On exact ties prefer the smaller |shift|, so the choice is mirror-symmetric.
    if (!any || c.r > best_r || (c.r == best_r && std::abs(m) < std::abs(best))) {
      best = m;
      best_r = c.r;
      any = true;
    }
  }
  if (!any) return s;

  double delta = best * o.shift_step_mm;
  if (best > -m_half && best < m_half) {
    const Ncc& lo = score[static_cast<std::size_t>(best - 1 + m_half)];
    const Ncc& hi = score[static_cast<std::size_t>(best + 1 + m_half)];
    if (lo.valid && hi.valid) {
      // Golden-section search between the neighbours of the grid peak. A
      // parabola through three grid values is biased whenever the correlation
      // peak is asymmetric, which is the norm for windowed edge profiles.
      // Negation is exact, so the mirrored problem visits mirrored points.
      const double g = 0.3819660112501051;
      double a = delta - o.shift_step_mm, b = delta + o.shift_step_mm;
      double x1 = a + g * (b - a), x2 = b - g * (b - a);
      auto eval = [&](double x) {
        const Ncc c = ncc_at(x);
        return c.valid ? c.r : -2.0;
      };
      double f1 = eval(x1), f2 = eval(x2);
      for (int it = 0; it < o.refine_iterations; ++it) {
        if (f1 < f2) {
          a = x1;
          x1 = x2;
          f1 = f2;
          x2 = b - g * (b - a);
          f2 = eval(x2);
        } else if (f2 < f1) {
          b = x2;
          x2 = x1;
          f2 = f1;
          x1 = a + g * (b - a);
          f1 = eval(x1);
        } else {
          a = x1;
          b = x2;
          x1 = a + g * (b - a);
          x2 = b - g * (b - a);
          f1 = eval(x1);
          f2 = eval(x2);
        }
      }
      const double xm = 0.5 * (a + b);
      const double fm = eval(xm);
      if (fm >= best_r) {
        delta = xm;
        best_r = fm;
      }
    }
  }
  s.displacement_mm = delta;
  s.quality = best_r;
  s.accepted = best_r >= o.quality_floor;
  return s;
}

}  // namespace atrophy
