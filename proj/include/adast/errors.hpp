// Copyright 2026 The AdaST-cpp Authors.
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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace adast {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or length disagreement between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameter or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data violates a documented precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Caller broke an API contract (e.g. backward on a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

class DeterminismError : public Error {
 public:
  using Error::Error;
};

class InputTooShortError : public ValidationError {
 public:
  InputTooShortError(std::size_t length, std::size_t minimum)
      : ValidationError("input of length " + std::to_string(length) +
                        " is too short; minimum length is " + std::to_string(minimum)),
        minimum_(minimum) {}
  std::size_t minimum() const { return minimum_; }

 private:
  std::size_t minimum_;
};

// Malformed binary or text input. Carries the byte offset where parsing failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};
class CorruptCheckpointError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class ShapeMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class VersionMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class NonFiniteGradientError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Missing, unreadable or unwritable files.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace adast
