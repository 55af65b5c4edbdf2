#pragma once

#include <vector>

namespace atrophy {

/// Linear-interpolation percentile (q in [0, 100]) of a non-empty sample,
/// matching the common "linear" definition: position q/100 * (n - 1).
double percentile(std::vector<double> values, double q);

}  // namespace atrophy
