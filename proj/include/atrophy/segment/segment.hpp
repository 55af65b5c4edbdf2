#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "atrophy/segment/tissue.hpp"

namespace atrophy {

struct KMeansResult {
  TissueSegmentation seg;
  std::array<double, 3> centroids{};  // CSF, GM, WM; strictly increasing
  int iterations = 0;
};

/// 1-D three-cluster k-means on the in-mask intensities, seeded at the
/// 10th/50th/90th percentiles. Throws when fewer than 3 distinct values are
/// present.
KMeansResult intensity_segment3(const Volume& v, const BinaryMask& brain);

/// Integer label volume plus code -> structure names.
struct AnatomicalLabelMap {
  Grid grid;
  std::vector<std::int32_t> labels;
  std::map<std::int32_t, std::string> code_names;
};

struct AggregationResult {
  TissueSegmentation seg;
  std::vector<std::int32_t> unmapped_codes;  // nonzero codes present in data, ascending
};

/// Lowercase, '-' and '_' to spaces, runs of whitespace collapsed.
std::string normalize_structure_name(std::string_view name);

/// Tissue for a structure name (any hemisphere prefix), or nullopt when the
/// name is outside the canonical table.
std::optional<Tissue> tissue_for_structure(std::string_view name);

/// Canonical structure names (without hemisphere) and their tissue class.
const std::vector<std::pair<std::string, Tissue>>& canonical_structures();

/// Code 0 and codes without a canonical name map to BG. When `brain` is
/// given, voxels outside it are BG as well.
AggregationResult aggregate_labels(const AnatomicalLabelMap& a, const BinaryMask* brain = nullptr);

/// Two-column CSV `code,name` with a header row.
std::map<std::int32_t, std::string> read_codebook(const std::filesystem::path& path);

/// Label volume must use an integer datatype.
AnatomicalLabelMap load_external_labelmap(const std::filesystem::path& path,
                                          const std::filesystem::path& codebook);

}  // namespace atrophy
