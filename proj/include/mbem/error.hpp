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

#ifndef MBEM_ERROR_HPP_
#define MBEM_ERROR_HPP_

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mbem {

enum class ErrorCode {
  kInvalidInput,
  kNumericDomain,
  kDegeneratePoint,
  kEmptyComponent,
  kDegenerateCovariance,
  kUnrecoverableTruncation,
  kParse,
  kInitializationFailure,
  kIo,
};

std::string_view to_string(ErrorCode code);

// Every library failure is reported as an Error carrying a machine-checkable
// code; callers that need to react to a specific condition (the truncated
// engine, for one) switch on code() instead of parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ParseError : public Error {
 public:
  ParseError(std::uint64_t offset, const std::string& what)
      : Error(ErrorCode::kParse,
              what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

// Engine failure annotated with the iterate index at which it happened.
class IterationError : public Error {
 public:
  IterationError(const Error& cause, std::int64_t iteration)
      : Error(cause.code(), std::string(cause.what()) + " [iteration " +
                                std::to_string(iteration) + "]"),
        iteration_(iteration) {}

  std::int64_t iteration() const noexcept { return iteration_; }

 private:
  std::int64_t iteration_;
};

}  // namespace mbem

#endif  // MBEM_ERROR_HPP_
