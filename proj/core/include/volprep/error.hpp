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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace volprep {

enum class ErrorCode {
  IoError,
  TruncatedHeader,
  BadMagic,
  UnsupportedDatatype,
  InconsistentBitpix,
  Nifti2Unsupported,
  InvalidHeader,
  NonFiniteData,
  ExtentMismatch,
  DegenerateVolume,
  IndexOutOfBounds,
  EmptyMask,
  EmptyForeground,
  EmptyHeadMask,
  AmbiguousOrientation,
  GridMismatch,
  EmptyInput,
  AllUndefined,
  SamplingExhausted,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure in the library is reported as an Error carrying a code,
/// so callers (the CLI in particular) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace volprep
