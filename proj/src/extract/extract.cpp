#include "atrophy/extract/extract.hpp"

#include <cmath>

#include "atrophy/error.hpp"
#include "atrophy/imgvol/filters.hpp"
#include "atrophy/imgvol/nifti.hpp"
#include "atrophy/imgvol/percentile.hpp"
#include "atrophy/imgvol/sampling.hpp"

namespace atrophy {

BinaryMask threshold_brain_extract(const Volume& v, double frac) {
  if (!(frac > 0.0 && frac < 1.0)) throw Error("threshold extraction: frac must lie in (0, 1)");
  std::vector<double> nonzero;
  nonzero.reserve(v.size());
  for (double x : v.data()) {
    if (x != 0.0) nonzero.push_back(x);
  }
  if (nonzero.empty()) throw Error("empty extraction");
  const double thr = frac * percentile(std::move(nonzero), 98.0);
  BinaryMask m = threshold_mask(v, thr);
  if (m.empty()) throw Error("empty extraction");
  m = largest_component(m).mask;
  m = erode(dilate(m, 1), 1);
  m = fill_holes(m);
  m = largest_component(m).mask;
  if (m.empty()) throw Error("empty extraction");
  return m;
}

ExternalMask load_external_mask(const std::filesystem::path& path, const Grid& expected) {
  const Volume v = read_nifti(path).volume;
  const Grid& g = v.grid();
  bool ok = g.dims() == expected.dims();
  for (int a = 0; a < 3 && ok; ++a) ok = std::abs(g.spacing()[a] - expected.spacing()[a]) <= 1e-3;
  if (!ok) throw Error("grid mismatch: " + path.string() + " does not match the scan grid");
  std::vector<std::uint8_t> bits(v.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = v[i] != 0.0 ? 1 : 0;
  // The mask comes from a tool run on the same scan; adopt the scan's affine.
  BinaryMask m(expected, std::move(bits));
  const std::size_t total = m.count();
  if (total == 0) throw Error("empty mask: " + path.string());
  ComponentResult cr = largest_component(m);
  ExternalMask out;
  out.mask = std::move(cr.mask);
  out.discarded_fraction = static_cast<double>(cr.discarded) / static_cast<double>(total);
  return out;
}

SurfacePointSet mask_boundary(const BinaryMask& mask) {
  SurfacePointSet out;
  for (std::size_t idx : boundary_voxels(mask)) {
    out.points.push_back({idx, mask.grid().world(idx), Vec3::Zero()});
  }
  return out;
}

SurfacePointSet estimate_normals(const BinaryMask& mask, const SurfacePointSet& pts,
                                 double sigma_mm) {
  const Volume smooth = gaussian_smooth(mask.to_volume(), sigma_mm);
  const Grid& g = mask.grid();
  SurfacePointSet out;
  out.dropped = pts.dropped;
  out.points.reserve(pts.points.size());
  for (const auto& p : pts.points) {
    const Index3 c = g.coords(p.index);
    const Vec3 grad = gradient_at(smooth, c[0], c[1], c[2]);
    const double n = grad.norm();
    if (!(n >= 1e-6)) {
      ++out.dropped;
      continue;
    }
    out.points.push_back({p.index, p.position, -grad / n});
  }
  if (out.points.empty() && !pts.points.empty()) {
    throw Error("normal estimation failed: every gradient vanished");
  }
  return out;
}

std::vector<double> ray_offsets(const SkullOptions& opts) {
  if (!(opts.step_mm > 0.0) || !(opts.max_distance_mm > 0.0)) {
    throw Error("ray offsets: step and distance must be positive");
  }
  const auto n = static_cast<std::size_t>(std::llround(opts.max_distance_mm / opts.step_mm));
  std::vector<double> t(n + 1);
  for (std::size_t k = 0; k <= n; ++k) t[k] = static_cast<double>(k) * opts.step_mm;
  return t;
}

namespace {

bool nearest_in(const BinaryMask& m, const Vec3& world, std::size_t* idx) {
  const Grid& g = m.grid();
  const Vec3 p = g.to_voxel(world);
  const auto i = static_cast<std::int64_t>(std::floor(p[0] + 0.5));
  const auto j = static_cast<std::int64_t>(std::floor(p[1] + 0.5));
  const auto k = static_cast<std::int64_t>(std::floor(p[2] + 0.5));
  if (!g.contains(i, j, k)) return false;
  *idx = g.index(i, j, k);
  return true;
}

}  // namespace

SkullResult derive_skull_mask(const Volume& v, const BinaryMask& brain, const SkullOptions& opts) {
  if (!v.grid().matches(brain.grid())) throw Error("skull detection: brain mask grid mismatch");
  if (brain.empty()) throw Error("skull detection: empty brain mask");
  const Grid& g = v.grid();

  std::vector<double> inside;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (brain[i]) inside.push_back(v[i]);
  }
  const double floor_val = opts.floor_fraction * percentile(std::move(inside), 98.0);

  const SurfacePointSet pts = estimate_normals(brain, mask_boundary(brain), opts.normal_sigma_mm);
  const std::vector<double> t = ray_offsets(opts);
  const std::size_t n = t.size();
  std::vector<double> xs(n), ys(n), zs(n), prof(n);

  SkullResult out;
  out.n_rays = pts.points.size();
  BinaryMask marked(g);
  for (const auto& p : pts.points) {
    for (std::size_t k = 0; k < n; ++k) {
      const Vec3 q = p.position + t[k] * p.normal;
      xs[k] = q[0];
      ys[k] = q[1];
      zs[k] = q[2];
    }
    trilinear_sample_many(v, xs, ys, zs, prof, 0.0);

    std::size_t edge = n;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t idx = 0;
      if (!nearest_in(brain, Vec3(xs[k], ys[k], zs[k]), &idx) || !brain[idx]) {
        edge = k;
        break;
      }
    }
    if (edge + 1 >= n) continue;

    std::size_t hi = edge;
    for (std::size_t k = edge; k < n; ++k) {
      if (prof[k] > prof[hi]) hi = k;
    }
    std::size_t lo = edge;
    for (std::size_t k = edge; k <= hi; ++k) {
      if (prof[k] <= prof[lo]) lo = k;
    }
    if (!(prof[hi] >= opts.rise_ratio * std::max(prof[lo], floor_val))) continue;

    std::size_t best = n;
    double best_d = 0.0;
    for (std::size_t k = lo; k < hi; ++k) {
      const double d = prof[k + 1] - prof[k];
      if (d > best_d) {
        best_d = d;
        best = k;
      }
    }
    if (best == n) continue;
    const double off = 0.5 * (t[best] + t[best + 1]);
    const Vec3 q = p.position + off * p.normal;
    std::size_t idx = 0;
    if (!nearest_in(marked, q, &idx)) continue;
    marked.set(idx, true);
    out.points.push_back(q);
  }

  if (out.points.size() < opts.min_points) {
    throw Error("skull detection failed: " + std::to_string(out.points.size()) +
                " points accepted, " + std::to_string(opts.min_points) + " required");
  }
  BinaryMask mask = dilate(marked, 1);
  const BinaryMask core = erode(brain, 1);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (core[i]) mask.set(i, false);
  }
  out.mask = std::move(mask);
  return out;
}

}  // namespace atrophy
