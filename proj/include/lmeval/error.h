// Copyright 2026 The lmeval Authors.
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

#ifndef LMEVAL_ERROR_H_
#define LMEVAL_ERROR_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lmeval {

// Root of every exception thrown by the library. Callers that only want to
// report a failure can catch this; callers that branch on the cause catch the
// concrete subclass.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RecipeError : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class RunError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed newline-delimited input. line() is 1-based; 0 means the error is
// not tied to a particular line.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class BackendErrorKind {
  kTimeout,
  kProtocol,
  kUnavailable,
  kCapability,
};

const char* ToString(BackendErrorKind kind);

class BackendError : public Error {
 public:
  BackendError(BackendErrorKind kind, const std::string& what)
      : Error(std::string(ToString(kind)) + ": " + what), kind_(kind) {}

  BackendErrorKind kind() const { return kind_; }

 private:
  BackendErrorKind kind_;
};

}  // namespace lmeval

#endif  // LMEVAL_ERROR_H_
