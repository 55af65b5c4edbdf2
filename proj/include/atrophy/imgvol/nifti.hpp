#pragma once

#include <cstdint>
#include <filesystem>

#include "atrophy/imgvol/volume.hpp"

namespace atrophy {

/// On-disk NIfTI-1 datatype codes accepted by this reader.
enum class NiftiType : std::int16_t { UInt8 = 2, Int16 = 4, Float32 = 16 };

struct NiftiImage {
  Volume volume;
  NiftiType datatype = NiftiType::Float32;
};

/// Single-file little-endian NIfTI-1 (".nii", or ".nii.gz" through zlib).
/// Affine precedence: sform (sform_code > 0), then qform, then the spacing
/// diagonal. Extensions, more than one frame, other datatypes, and
/// non-finite voxels are rejected.
NiftiImage read_nifti(const std::filesystem::path& path);
Volume load_volume(const std::filesystem::path& path);

/// Writes with sform_code = 2 and qform_code = 0. Values are converted to
/// `type` (rounded for integer types).
void save_volume(const Volume& v, const std::filesystem::path& path,
                 NiftiType type = NiftiType::Float32);

}  // namespace atrophy
