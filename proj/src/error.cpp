// Copyright 2026 The mbem Authors.
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

#include "mbem/error.hpp"

namespace mbem {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid input";
    case ErrorCode::kNumericDomain: return "numeric domain";
    case ErrorCode::kDegeneratePoint: return "degenerate point";
    case ErrorCode::kEmptyComponent: return "empty component";
    case ErrorCode::kDegenerateCovariance: return "degenerate covariance";
    case ErrorCode::kUnrecoverableTruncation: return "unrecoverable truncation";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kInitializationFailure: return "initialization failure";
    case ErrorCode::kIo: return "i/o error";
  }
  return "unknown error";
}

}  // namespace mbem
