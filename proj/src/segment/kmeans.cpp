#include <algorithm>
#include <cmath>

#include "atrophy/error.hpp"
#include "atrophy/imgvol/percentile.hpp"
#include "atrophy/segment/segment.hpp"

namespace atrophy {

KMeansResult intensity_segment3(const Volume& v, const BinaryMask& brain) {
  if (!v.grid().matches(brain.grid())) throw Error("segmentation: brain mask grid mismatch");
  std::vector<double> x;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (brain[i]) {
      x.push_back(v[i]);
      where.push_back(i);
    }
  }
  if (x.empty()) throw Error("segmentation: empty brain mask");

  std::vector<double> distinct = x;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 3) {
    throw Error("degenerate intensity distribution: fewer than 3 distinct in-mask values");
  }

  std::array<double, 3> c{percentile(x, 10.0), percentile(x, 50.0), percentile(x, 90.0)};
  if (!(c[0] < c[1] && c[1] < c[2])) {
    c = {percentile(distinct, 10.0), percentile(distinct, 50.0), percentile(distinct, 90.0)};
  }

  std::vector<std::uint8_t> assign(x.size());
  int it = 0;
  for (; it < 100; ++it) {
    std::array<double, 3> sum{0, 0, 0};
    std::array<std::size_t, 3> n{0, 0, 0};
    const double t01 = 0.5 * (c[0] + c[1]);
    const double t12 = 0.5 * (c[1] + c[2]);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const std::uint8_t k = x[i] <= t01 ? 0 : (x[i] <= t12 ? 1 : 2);
      assign[i] = k;
      sum[k] += x[i];
      ++n[k];
    }
    double shift = 0.0;
    for (int k = 0; k < 3; ++k) {
      if (n[k] == 0) continue;
      const double nc = sum[k] / static_cast<double>(n[k]);
      shift = std::max(shift, std::abs(nc - c[k]));
      c[k] = nc;
    }
    std::sort(c.begin(), c.end());
    if (shift < 1e-6) {
      ++it;
      break;
    }
  }
  if (!(c[0] < c[1] && c[1] < c[2])) {
    throw Error("degenerate intensity distribution: clusters collapsed");
  }
  // Final assignment against the converged centroids.
  std::vector<std::uint8_t> labels(v.size(), kBG);
  const double t01 = 0.5 * (c[0] + c[1]);
  const double t12 = 0.5 * (c[1] + c[2]);
  for (std::size_t i = 0; i < x.size(); ++i) {
    labels[where[i]] = x[i] <= t01 ? kCSF : (x[i] <= t12 ? kGM : kWM);
  }
  KMeansResult r;
  r.seg = TissueSegmentation(v.grid(), std::move(labels));
  r.centroids = c;
  r.iterations = it;
  return r;
}

}  // namespace atrophy
