#include <cmath>

#include "atrophy/error.hpp"
#include "atrophy/imgvol/filters.hpp"
#include "atrophy/pbvc/pbvc.hpp"

namespace atrophy {

SurfacePointSet tissue_boundary(const TissueSegmentation& seg, double sigma_mm) {
  const Grid& g = seg.grid();
  const auto lab = seg.labels();
  SurfacePointSet pts;
  for (std::int64_t k = 0; k < g.nz(); ++k) {
    for (std::int64_t j = 0; j < g.ny(); ++j) {
      for (std::int64_t i = 0; i < g.nx(); ++i) {
        const std::size_t idx = g.index(i, j, k);
        if (!is_brain_tissue(lab[idx])) continue;
        bool edge = false;
        const std::int64_t nb[6][3] = {{i - 1, j, k}, {i + 1, j, k}, {i, j - 1, k},
                                       {i, j + 1, k}, {i, j, k - 1}, {i, j, k + 1}};
        for (const auto& n : nb) {
          if (!g.contains(n[0], n[1], n[2]) || !is_brain_tissue(lab[g.index(n[0], n[1], n[2])])) {
            edge = true;
            break;
          }
        }
        if (edge) pts.points.push_back({idx, g.world(idx), Vec3::Zero()});
      }
    }
  }
  if (pts.points.empty()) throw Error("empty boundary");
  return estimate_normals(seg.brain_tissue(), pts, sigma_mm);
}

double boundary_area_element(const Grid& g, const Vec3& n) {
  const Mat3 l = g.vox_to_world().linear();
  double proj = 0.0;
  for (int a = 0; a < 3; ++a) proj = std::max(proj, std::abs(n.dot(l.col(a))));
  return g.voxel_volume() / proj;
}

DirectionalPBVC pbvc_directional(const Volume& src_h, const Volume& other_h,
                                 const TissueSegmentation& seg_src, const PbvcOptions& opts,
                                 std::vector<EdgeSample>* edges) {
  if (!src_h.grid().matches(other_h.grid()) || !src_h.grid().matches(seg_src.grid())) {
    throw Error("pbvc: halfway images and segmentation must share a grid");
  }
  const Grid& g = seg_src.grid();
  const SurfacePointSet pts = tissue_boundary(seg_src, opts.normal_sigma_mm);
  DirectionalPBVC d;
  d.n_boundary = pts.points.size();
  d.brain_volume_mm3 =
      static_cast<double>(seg_src.count(kGM) + seg_src.count(kWM)) * g.voxel_volume();
  if (edges != nullptr) {
    edges->clear();
    edges->reserve(pts.points.size());
  }
  const Volume src_s = gaussian_smooth(src_h, opts.profile_sigma_mm);
  const Volume other_s = gaussian_smooth(other_h, opts.profile_sigma_mm);
  const ProfileSampler src_p(src_s, opts.edge.interpolation);
  const ProfileSampler other_p(other_s, opts.edge.interpolation);
  double dv = 0.0, sum_d = 0.0;
  for (const auto& p : pts.points) {
    const EdgeSample e = edge_displacement(src_p, other_p, p.position, p.normal, opts.edge);
    if (e.accepted) {
      ++d.n_accepted;
      dv += e.displacement_mm * boundary_area_element(g, p.normal);
      sum_d += e.displacement_mm;
    }
    if (edges != nullptr) edges->push_back(e);
  }
  if (static_cast<double>(d.n_accepted) < opts.min_accept_fraction * static_cast<double>(d.n_boundary)) {
    throw Error("insufficient reliable edges: " + std::to_string(d.n_accepted) + " of " +
                std::to_string(d.n_boundary) + " accepted");
  }
  d.delta_volume_mm3 = dv;
  d.mean_disp_mm = d.n_accepted > 0 ? sum_d / static_cast<double>(d.n_accepted) : 0.0;
  d.pbvc_percent = 100.0 * dv / d.brain_volume_mm3;
  return d;
}

double combine_pbvc(double forward, double backward, double factor) {
  return factor * (forward - backward) / 2.0;
}

}  // namespace atrophy
