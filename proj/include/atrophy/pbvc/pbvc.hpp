#pragma once

#include <memory>
#include <vector>

#include "atrophy/extract/extract.hpp"
#include "atrophy/imgvol/bspline.hpp"
#include "atrophy/segment/tissue.hpp"

namespace atrophy {

enum class ProfileInterpolation { Trilinear, CubicBSpline };

struct EdgeOptions {
  double half_length_mm = 6.0;
  double step_mm = 0.5;
  double search_limit_mm = 3.0;
  double shift_step_mm = 0.25;
  double quality_floor = 0.5;
  int refine_iterations = 16;
  ProfileInterpolation interpolation = ProfileInterpolation::CubicBSpline;
};

/// Samples one image along profiles with the configured interpolation.
class ProfileSampler {
 public:
  ProfileSampler(const Volume& v, ProfileInterpolation interp);
  const Grid& grid() const noexcept { return volume_->grid(); }
  void sample_many(std::span<const double> wx, std::span<const double> wy,
                   std::span<const double> wz, std::span<double> out, double oob) const;

 private:
  const Volume* volume_;
  std::shared_ptr<const CubicBSpline> spline_;
};

struct EdgeSample {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::Zero();
  double displacement_mm = 0.0;  // > 0: B's edge lies outward of A's
  double quality = -1.0;         // peak profile NCC
  bool accepted = false;
};

/// Profiles of A and B along the normal, compared at relative shift delta
/// (A sampled at t - delta/2, B at t + delta/2), so the estimate is exactly
/// antisymmetric in (A, B). Samples falling outside either grid are dropped
/// from the correlation.
EdgeSample edge_displacement(const Volume& a_h, const Volume& b_h, const Vec3& point,
                             const Vec3& normal, const EdgeOptions& opts = {});
EdgeSample edge_displacement(const ProfileSampler& a_h, const ProfileSampler& b_h,
                             const Vec3& point, const Vec3& normal, const EdgeOptions& opts = {});

/// GM or WM voxels with a 6-neighbor in {BG, CSF}, with normals from the
/// smoothed brain-tissue indicator.
SurfacePointSet tissue_boundary(const TissueSegmentation& seg, double sigma_mm = 1.0);

/// Surface area represented by one boundary voxel with unit normal n:
/// voxel volume over the largest projection of a voxel axis onto n.
double boundary_area_element(const Grid& g, const Vec3& n);

struct PbvcOptions {
  EdgeOptions edge;
  double normal_sigma_mm = 1.0;
  /// Gaussian pre-smoothing of both images before profiles are sampled; 0 disables.
  double profile_sigma_mm = 1.5;
  double min_accept_fraction = 0.2;
};

struct DirectionalPBVC {
  double pbvc_percent = 0.0;
  std::size_t n_boundary = 0;
  std::size_t n_accepted = 0;
  double mean_disp_mm = 0.0;
  double brain_volume_mm3 = 0.0;  // GM + WM of the source segmentation
  double delta_volume_mm3 = 0.0;
};

/// Edge motion of `other_h` relative to `src_h`, measured on the boundary of
/// `seg_src`. `edges`, when given, receives every sample in boundary order.
DirectionalPBVC pbvc_directional(const Volume& src_h, const Volume& other_h,
                                 const TissueSegmentation& seg_src, const PbvcOptions& opts = {},
                                 std::vector<EdgeSample>* edges = nullptr);

struct PBVCResult {
  DirectionalPBVC forward;   // edges from A, B relative to A
  DirectionalPBVC backward;  // edges from B, A relative to B
  double final_percent = 0.0;
  double calibration_factor = 1.0;
};

/// factor * (forward - backward) / 2.
double combine_pbvc(double forward, double backward, double factor);

}  // namespace atrophy
