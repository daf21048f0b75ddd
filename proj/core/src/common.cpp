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

#include <algorithm>
#include <cctype>
#include <string>

#include "volprep/error.hpp"
#include "volprep/grid.hpp"

namespace volprep {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::TruncatedHeader: return "TruncatedHeader";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorCode::InconsistentBitpix: return "InconsistentBitpix";
    case ErrorCode::Nifti2Unsupported: return "Nifti2Unsupported";
    case ErrorCode::InvalidHeader: return "InvalidHeader";
    case ErrorCode::NonFiniteData: return "NonFiniteData";
    case ErrorCode::ExtentMismatch: return "ExtentMismatch";
    case ErrorCode::DegenerateVolume: return "DegenerateVolume";
    case ErrorCode::IndexOutOfBounds: return "IndexOutOfBounds";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::EmptyForeground: return "EmptyForeground";
    case ErrorCode::EmptyHeadMask: return "EmptyHeadMask";
    case ErrorCode::AmbiguousOrientation: return "AmbiguousOrientation";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::AllUndefined: return "AllUndefined";
    case ErrorCode::SamplingExhausted: return "SamplingExhausted";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Affine diagonal_affine(const Vec3& spacing) {
  Affine a{};
  for (std::size_t i = 0; i < 3; ++i) a[i][i] = spacing[i];
  a[3][3] = 1.0;
  return a;
}

Geometry::Geometry(Extents e, Vec3 s) : Geometry(e, s, diagonal_affine(s)) {}

Geometry::Geometry(Extents e, Vec3 s, const Affine& a) : extents(e), spacing(s), affine(a) {
  for (double v : spacing)
    if (!(v > 0.0)) throw Error(ErrorCode::InvalidArgument, "voxel spacing must be positive");
  if (affine[3][0] != 0.0 || affine[3][1] != 0.0 || affine[3][2] != 0.0 || affine[3][3] != 1.0)
    throw Error(ErrorCode::InvalidArgument, "affine last row must be (0,0,0,1)");
}

Modality parse_modality(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "ct") return Modality::CT;
  if (lower == "mr" || lower == "mri") return Modality::MR;
  if (lower.empty() || lower == "unknown") return Modality::Unknown;
  throw Error(ErrorCode::InvalidArgument, "unknown modality '" + std::string(text) + "'");
}

std::string_view to_string(Modality m) noexcept {
  switch (m) {
    case Modality::CT: return "CT";
    case Modality::MR: return "MR";
    case Modality::Unknown: return "Unknown";
  }
  return "Unknown";
}

}  // namespace volprep
