// Copyright 2026 The volprep Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// NIfTI-1 single-file (.nii / .nii.gz) and header/image pair reading,
// single-file writing. All supported datatypes decode to 64-bit reals.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "volprep/grid.hpp"

namespace volprep::nifti {

inline constexpr std::int32_t kHeaderSize = 348;
inline constexpr std::int32_t kNifti2HeaderSize = 540;
inline constexpr std::int32_t kDefaultVoxOffset = 352;

enum class Datatype : std::int16_t {
  UInt8 = 2,
  Int16 = 4,
  Int32 = 8,
  Float32 = 16,
  Float64 = 64,
};

/// Bits per voxel for a supported datatype code; nullopt when unsupported.
std::optional<std::int16_t> bitpix_for(std::int16_t datatype_code) noexcept;

struct NiftiHeader {
  std::int32_t sizeof_hdr = kHeaderSize;
  std::array<std::int16_t, 8> dim{3, 1, 1, 1, 1, 1, 1, 1};
  std::int16_t datatype_code = static_cast<std::int16_t>(Datatype::Float32);
  std::int16_t bitpix = 32;
  std::array<float, 8> pixdim{1.0F, 1.0F, 1.0F, 1.0F, 0.0F, 0.0F, 0.0F, 0.0F};
  float vox_offset = static_cast<float>(kDefaultVoxOffset);
  float scl_slope = 1.0F;
  float scl_inter = 0.0F;
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 1;
  float quatern_b = 0.0F;
  float quatern_c = 0.0F;
  float quatern_d = 0.0F;
  float qoffset_x = 0.0F;
  float qoffset_y = 0.0F;
  float qoffset_z = 0.0F;
  std::array<float, 4> srow_x{1.0F, 0.0F, 0.0F, 0.0F};
  std::array<float, 4> srow_y{0.0F, 1.0F, 0.0F, 0.0F};
  std::array<float, 4> srow_z{0.0F, 0.0F, 1.0F, 0.0F};
  std::array<char, 4> magic{'n', '+', '1', '\0'};
  std::uint8_t xyzt_units = 2;  // mm

  /// Byte order the header was decoded from; written back the same way.
  bool big_endian = false;

  Datatype datatype() const noexcept { return static_cast<Datatype>(datatype_code); }
  Extents extents() const noexcept;
  Vec3 spacing() const noexcept;
  bool single_file() const noexcept { return magic[1] == '+'; }

  bool operator==(const NiftiHeader&) const = default;
};

/// Decodes and validates a 348-byte header; byte order is detected from sizeof_hdr.
NiftiHeader parse_header(std::span<const std::uint8_t> bytes);

/// Encodes a header into its 348-byte on-disk form in header.big_endian order.
std::array<std::uint8_t, kHeaderSize> encode_header(const NiftiHeader& header);

/// Affine chosen the standard way: sform when sform_code > 0, else qform when
/// qform_code > 0, else diagonal(pixdim).
Affine header_affine(const NiftiHeader& header);

/// Fresh single-file header describing `geometry`, affine stored as sform.
NiftiHeader make_header(const Geometry& geometry, Datatype datatype);

struct LoadedVolume {
  Volume3D volume;
  NiftiHeader header;
};

/// Reads .nii, .nii.gz (gzip sniffed from the 1F 8B prefix) or .hdr/.img pairs.
LoadedVolume read_volume(const std::filesystem::path& path, Modality modality = Modality::Unknown);

/// Reads a file and binarizes it (nonzero -> 1).
Mask3D read_mask(const std::filesystem::path& path);

/// Writes `vol` using the template's datatype, scaling, orientation codes and
/// byte order. Integer datatypes are rounded (and clamped) through the
/// template's scl_slope / scl_inter. Gzip is used when the path ends in ".gz".
void write_volume(const Grid3<double>& vol, const NiftiHeader& header_template, const std::filesystem::path& path);

/// Writes a mask as uint8 with slope 1, intercept 0.
void write_mask(const Mask3D& mask, const std::filesystem::path& path);
void write_mask(const Mask3D& mask, const NiftiHeader& header_template, const std::filesystem::path& path);

// Exposed for tests.
std::vector<std::uint8_t> gzip_compress(std::span<const std::uint8_t> raw);
std::vector<std::uint8_t> gzip_decompress(std::span<const std::uint8_t> compressed);

}  // namespace volprep::nifti
