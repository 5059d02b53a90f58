// Copyright 2026 The latconf Authors.
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

namespace latconf {

enum class ErrorCode {
  // graph
  kCycle,
  kEmptyCN,
  kInvalidGraph,
  // corpusio
  kSyntax,
  kUndefinedNode,
  kCountMismatch,
  kNegativeDuration,
  kDimensionMismatch,
  kVersionMismatch,
  kShapeMismatch,
  kFeatureLayoutMismatch,
  kIo,
  // tagging
  kInvalidInterval,
  kMissingTimings,
  // nn / propagate
  kEmptyMergeSet,
  kLengthMismatch,
  // calibrate / metrics
  kEmptyTrainingSet,
  kDegenerateTargets,
  kNoPositives,
  // train / synth
  kEmptyCorpus,
  kZeroPartition,
  kDivergence,
  kConfig,
};

inline std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kCycle: return "CycleError";
    case ErrorCode::kEmptyCN: return "EmptyCN";
    case ErrorCode::kInvalidGraph: return "InvalidGraph";
    case ErrorCode::kSyntax: return "SyntaxError";
    case ErrorCode::kUndefinedNode: return "ReferenceToUndefinedNode";
    case ErrorCode::kCountMismatch: return "CountMismatch";
    case ErrorCode::kNegativeDuration: return "NegativeDuration";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kFeatureLayoutMismatch: return "FeatureLayoutMismatch";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kInvalidInterval: return "InvalidInterval";
    case ErrorCode::kMissingTimings: return "MissingTimings";
    case ErrorCode::kEmptyMergeSet: return "EmptyMergeSet";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::kDegenerateTargets: return "DegenerateTargets";
    case ErrorCode::kNoPositives: return "NoPositives";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kZeroPartition: return "ZeroPartition";
    case ErrorCode::kDivergence: return "DivergenceError";
    case ErrorCode::kConfig: return "ConfigError";
  }
  return "Error";
}

// All library failures are reported through this exception; `code()` tells
// callers (and tests) which contract was broken.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Syntax errors carry the 1-based line number of the offending input line.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t line, const std::string& what)
      : Error(ErrorCode::kSyntax, "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace latconf
