// Copyright 2026 The fodloc Authors
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

namespace fodloc {

/// Error categories surfaced by the library. The C API maps each one to a
/// stable status code, so the numeric values must not be reordered.
enum class ErrorKind : int {
  kIo = 1,
  kFormat = 2,
  kSize = 3,
  kParse = 4,
  kValidation = 5,
  kDimension = 6,
  kConfig = 7,
  kCheckpoint = 8,
  kData = 9,
  kNumeric = 10,
  kBounds = 11,
  kCompleteness = 12,
  kInvalidArgument = 13,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define FODLOC_DEFINE_ERROR(Name, Kind)                               \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(Kind, what) {}     \
  };

FODLOC_DEFINE_ERROR(IoError, ErrorKind::kIo)
FODLOC_DEFINE_ERROR(FormatError, ErrorKind::kFormat)
FODLOC_DEFINE_ERROR(SizeError, ErrorKind::kSize)
FODLOC_DEFINE_ERROR(ParseError, ErrorKind::kParse)
FODLOC_DEFINE_ERROR(ValidationError, ErrorKind::kValidation)
FODLOC_DEFINE_ERROR(DimensionError, ErrorKind::kDimension)
FODLOC_DEFINE_ERROR(ConfigError, ErrorKind::kConfig)
FODLOC_DEFINE_ERROR(CheckpointError, ErrorKind::kCheckpoint)
FODLOC_DEFINE_ERROR(DataError, ErrorKind::kData)
FODLOC_DEFINE_ERROR(NumericError, ErrorKind::kNumeric)
FODLOC_DEFINE_ERROR(BoundsError, ErrorKind::kBounds)
FODLOC_DEFINE_ERROR(CompletenessError, ErrorKind::kCompleteness)
FODLOC_DEFINE_ERROR(InvalidArgument, ErrorKind::kInvalidArgument)

#undef FODLOC_DEFINE_ERROR

}  // namespace fodloc
