#include <algorithm>
#include <cmath>
#include <limits>

#include "atrophy/error.hpp"
#include "atrophy/imgvol/bspline.hpp"
#include "atrophy/imgvol/filters.hpp"
#include "atrophy/imgvol/sampling.hpp"
#include "atrophy/register/register.hpp"

namespace atrophy {

double weighted_ncc(const kernels::Moments& m) {
  if (!(m.sw > 0.0)) throw Error("masked NCC: weight is identically zero");
  const double ma = m.sa / m.sw;
  const double mb = m.sb / m.sw;
  const double va = m.saa / m.sw - ma * ma;
  const double vb = m.sbb / m.sw - mb * mb;
  const double cov = m.sab / m.sw - ma * mb;
  const double scale = std::max({std::abs(m.saa), std::abs(m.sbb), 1.0}) / m.sw;
  if (!(va > 1e-12 * scale) || !(vb > 1e-12 * scale)) {
    throw Error("masked NCC: zero variance under the weight");
  }
  return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

double masked_ncc(const Volume& a, const Volume& b, const Volume& weight) {
  if (!a.grid().matches(b.grid()) || !a.grid().matches(weight.grid())) {
    throw Error("masked NCC: images must share a grid");
  }
  for (double w : weight.data()) {
    if (w < 0.0) throw Error("masked NCC: negative weight");
  }
  const auto m = kernels::active().moments(a.data().data(), b.data().data(),
                                           weight.data().data(), a.size());
  return -weighted_ncc(m);
}

namespace {

Grid level_grid(const Grid& g, int f) {
  Index3 d;
  for (int a = 0; a < 3; ++a) d[a] = (g.dims()[a] - 1) / f + 1;
  Mat4 s = Mat4::Identity();
  s(0, 0) = s(1, 1) = s(2, 2) = f;
  return Grid(d, Affine4(g.vox_to_world().matrix() * s));
}

Volume level_image(const Volume& v, int f, double min_sigma) {
  const double sigma = std::max(0.5 * f, min_sigma);
  const Volume sm = gaussian_smooth_vox(v, Vec3(sigma, sigma, sigma));
  if (f == 1) return sm;
  const Grid lg = level_grid(v.grid(), f);
  std::vector<double> out(lg.size());
  for (std::int64_t k = 0; k < lg.nz(); ++k) {
    for (std::int64_t j = 0; j < lg.ny(); ++j) {
      for (std::int64_t i = 0; i < lg.nx(); ++i) {
        out[lg.index(i, j, k)] = sm.at(i * f, j * f, k * f);
      }
    }
  }
  return Volume(lg, std::move(out));
}

// Block maximum so thin masks survive subsampling.
BinaryMask level_mask(const BinaryMask& m, int f) {
  if (f == 1) return m;
  const Grid& g = m.grid();
  const Grid lg = level_grid(g, f);
  BinaryMask out(lg);
  const int h = f / 2;
  for (std::int64_t k = 0; k < lg.nz(); ++k) {
    for (std::int64_t j = 0; j < lg.ny(); ++j) {
      for (std::int64_t i = 0; i < lg.nx(); ++i) {
        bool any = false;
        for (std::int64_t z = k * f - h; z <= k * f + h && !any; ++z) {
          for (std::int64_t y = j * f - h; y <= j * f + h && !any; ++y) {
            for (std::int64_t x = i * f - h; x <= i * f + h && !any; ++x) {
              any = g.contains(x, y, z) && m[g.index(x, y, z)];
            }
          }
        }
        out.set(lg.index(i, j, k), any);
      }
    }
  }
  return out;
}

class CostFunction {
 public:
  CostFunction(const Volume& fixed, const BinaryMask& wb, const BinaryMask* ws,
               const Volume& moving, double brain_weight, double skull_weight)
      : moving_(moving), fixed_v2w_(fixed.grid().vox_to_world()),
        brain_w_(brain_weight), skull_w_(ws != nullptr ? skull_weight : 0.0) {
    const Grid& g = fixed.grid();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const bool b = wb[i];
      const bool s = ws != nullptr && (*ws)[i];
      if (!b && !s) continue;
      const Index3 c = g.coords(i);
      x_.push_back(static_cast<double>(c[0]));
      y_.push_back(static_cast<double>(c[1]));
      z_.push_back(static_cast<double>(c[2]));
      a_.push_back(fixed[i]);
      wb_.push_back(b ? 1.0 : 0.0);
      ws_.push_back(s ? 1.0 : 0.0);
    }
    if (x_.empty()) throw Error("registration: empty cost support");
    if (!(brain_w_ + skull_w_ > 0.0)) throw Error("registration: cost weights sum to zero");
    bv_.resize(x_.size());
    wbe_.resize(x_.size());
    wse_.resize(x_.size());
  }

  double operator()(const AffineParams& p) {
    ++evaluations_;
    const Affine4 f = p.to_matrix();
    if (!(f.linear().determinant() > 0.0)) return kInf;
    const Mat4 m = moving_.grid().world_to_vox().matrix() * f.matrix() * fixed_v2w_.matrix();
    kernels::Affine34 map{};
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) map[static_cast<std::size_t>(4 * r + c)] = m(r, c);
    }
    const auto& k = kernels::active();
    const std::size_t n = x_.size();
    k.sample(sample_source(moving_), map, x_.data(), y_.data(), z_.data(), n,
             std::numeric_limits<double>::quiet_NaN(), bv_.data());
    for (std::size_t i = 0; i < n; ++i) {
      if (std::isnan(bv_[i])) {
        bv_[i] = 0.0;
        wbe_[i] = 0.0;
        wse_[i] = 0.0;
      } else {
        wbe_[i] = wb_[i];
        wse_[i] = ws_[i];
      }
    }
    double cost = 0.0;
    try {
      if (brain_w_ > 0.0) {
        cost += -brain_w_ * weighted_ncc(k.moments(a_.data(), bv_.data(), wbe_.data(), n));
      }
      if (skull_w_ > 0.0) {
        cost += -skull_w_ * weighted_ncc(k.moments(a_.data(), bv_.data(), wse_.data(), n));
      }
    } catch (const Error&) {
      return kInf;
    }
    return cost / (brain_w_ + skull_w_);
  }

  int evaluations() const { return evaluations_; }

  static constexpr double kInf = std::numeric_limits<double>::infinity();

 private:
  const Volume& moving_;
  Affine4 fixed_v2w_;
  double brain_w_, skull_w_;
  std::vector<double> x_, y_, z_, a_, wb_, ws_;
  std::vector<double> bv_, wbe_, wse_;
  int evaluations_ = 0;
};

struct LineResult {
  double x;
  double f;
};

template <typename F>
LineResult golden_section(F&& f, double lo, double hi, int iterations) {
  constexpr double kPhi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - kPhi * (b - a);
  double d = a + kPhi * (b - a);
  double fc = f(c), fd = f(d);
  LineResult best = fc <= fd ? LineResult{c, fc} : LineResult{d, fd};
  for (int it = 0; it < iterations; ++it) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kPhi * (b - a);
      fc = f(c);
      if (fc < best.f) best = {c, fc};
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kPhi * (b - a);
      fd = f(d);
      if (fd < best.f) best = {d, fd};
    }
  }
  return best;
}

}  // namespace

RegistrationResult register_affine(const RegistrationInput& fixed, const RegistrationInput& moving,
                                   const RegistrationOptions& opts) {
  if (fixed.image == nullptr || fixed.brain == nullptr || moving.image == nullptr ||
      moving.brain == nullptr) {
    throw Error("registration: image and brain mask are required");
  }
  if (!fixed.image->grid().matches(fixed.brain->grid()) ||
      !moving.image->grid().matches(moving.brain->grid()) ||
      (fixed.skull != nullptr && !fixed.image->grid().matches(fixed.skull->grid()))) {
    throw Error("registration: masks must lie on their image grids");
  }
  if (opts.pyramid.empty()) throw Error("registration: empty pyramid");

  const BinaryMask wb = dilate(*fixed.brain, 1);
  const bool use_skull = fixed.skull != nullptr && opts.skull_weight > 0.0 && !fixed.skull->empty();
  BinaryMask ws = use_skull ? dilate(*fixed.skull, 1) : BinaryMask();
  if (use_skull && opts.skull_brain_clearance > 0) {
    const BinaryMask near = dilate(*fixed.brain, opts.skull_brain_clearance);
    for (std::size_t i = 0; i < ws.size(); ++i) {
      if (near[i]) ws.set(i, false);
    }
    if (ws.empty()) throw Error("registration: skull weight is empty after brain clearance");
  }

  AffineParams p;
  p.center = fixed.brain->centroid();
  if (opts.initial) {
    p = AffineParams::from_matrix(*opts.initial, p.center);
  } else {
    p.t = moving.brain->centroid() - p.center;
  }

  RegistrationResult res;
  int level_index = 0;
  for (int f : opts.pyramid) {
    if (f < 1) throw Error("registration: pyramid factors must be >= 1");
    const Grid lg = level_grid(fixed.image->grid(), f);
    const Grid mg = level_grid(moving.image->grid(), f);
    if (f != opts.pyramid.back() &&
        (lg.nx() < 8 || lg.ny() < 8 || lg.nz() < 8 || mg.nx() < 8 || mg.ny() < 8 || mg.nz() < 8)) {
      ++level_index;
      continue;
    }
    const Volume fi = level_image(*fixed.image, f, opts.min_sigma_vox);
    const Volume mi = level_image(*moving.image, f, opts.min_sigma_vox);
    const BinaryMask lwb = level_mask(wb, f);
    const BinaryMask lws = use_skull ? level_mask(ws, f) : BinaryMask();
    CostFunction cost(fi, lwb, use_skull ? &lws : nullptr, mi, opts.brain_weight,
                      opts.skull_weight);

    const double scale = std::ldexp(1.0, -level_index);
    std::array<double, AffineParams::kCount> step{};
    std::array<double, AffineParams::kCount> tol{};
    for (int i = 0; i < AffineParams::kCount; ++i) {
      step[static_cast<std::size_t>(i)] = opts.initial_steps[static_cast<std::size_t>(i / 3)] * scale;
      tol[static_cast<std::size_t>(i)] = opts.tolerances[static_cast<std::size_t>(i / 3)];
    }

    LevelTrace trace;
    trace.factor = f;
    double cur = cost(p);
    if (!std::isfinite(cur)) {
      throw Error("registration: cost evaluation failed at the initial estimate");
    }
    trace.cost_initial = cur;
    int sweep = 0;
    for (; sweep < opts.max_sweeps; ++sweep) {
      bool active = false;
      for (int i = 0; i < AffineParams::kCount; ++i) {
        const auto si = static_cast<std::size_t>(i);
        if (step[si] < tol[si]) continue;
        active = true;
        const double x0 = p[i];
        AffineParams trial = p;
        const LineResult lr = golden_section(
            [&](double x) {
              trial[i] = x;
              return cost(trial);
            },
            x0 - step[si], x0 + step[si], opts.golden_iterations);
        double moved = 0.0;
        if (lr.f < cur) {
          p[i] = lr.x;
          cur = lr.f;
          moved = std::abs(lr.x - x0);
        }
        if (moved <= 0.5 * step[si]) step[si] *= 0.5;
      }
      if (!active) break;
    }
    trace.cost_final = cur;
    trace.sweeps = sweep;
    trace.evaluations = cost.evaluations();
    res.iterations += sweep;
    res.cost_final = cur;
    res.pyramid_trace.push_back(trace);
    ++level_index;
  }
  res.params = p;
  res.forward = p.to_matrix();
  return res;
}

SymmetricRegistration register_symmetric(const RegistrationInput& a, const RegistrationInput& b,
                                         const RegistrationOptions& opts) {
  SymmetricRegistration out;
  out.a_to_b = register_affine(a, b, opts);
  out.b_to_a = register_affine(b, a, opts);
  out.forward = sqrt_affine(out.a_to_b.forward * out.b_to_a.forward.inverse());
  return out;
}

Halfway to_halfway(const Volume& a, const Volume& b, const Affine4& forward, const Grid& target) {
  Halfway h;
  h.half = sqrt_affine(forward);
  h.push_a = h.half;
  h.push_b = h.half * forward.inverse();
  h.a = resample_cubic(a, h.push_a, target);
  h.b = resample_cubic(b, h.push_b, target);
  return h;
}

}  // namespace atrophy
