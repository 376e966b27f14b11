// Copyright 2026 The certiplan Authors
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

namespace certiplan {

/// Category attached to every library exception so callers can react to the
/// failure class without parsing messages.
enum class ErrorCode {
  InvalidModel,
  DimensionMismatch,
  InsufficientData,
  RankDeficient,
  SingularMap,
  Precondition,
  NoPath,
  PartialFailure,
  Numerical,
  Schema,
  Io,
  Internal,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidModel: return "invalid-model";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::InsufficientData: return "insufficient-data";
    case ErrorCode::RankDeficient: return "rank-deficient";
    case ErrorCode::SingularMap: return "singular-map";
    case ErrorCode::Precondition: return "precondition";
    case ErrorCode::NoPath: return "no-path";
    case ErrorCode::PartialFailure: return "partial-failure";
    case ErrorCode::Numerical: return "numerical";
    case ErrorCode::Schema: return "schema";
    case ErrorCode::Io: return "io";
    case ErrorCode::Internal: return "internal";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace certiplan
