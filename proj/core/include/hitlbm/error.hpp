// Copyright 2026 The hitlbm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace hitlbm {

// Base for every error raised by the library. The CLI maps subclasses to
// exit codes (see pipeline/stages.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column = 0)
      : Error(what), line_(line), column_(column) {}
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A stage was asked to run before the stage producing its inputs.
class UpstreamMissing : public Error {
 public:
  UpstreamMissing(const std::string& artifact, const std::string& producer)
      : Error("missing upstream artifact '" + artifact + "'; run stage '" + producer + "' first"),
        producer_(producer) {}
  const std::string& producer() const { return producer_; }

 private:
  std::string producer_;
};

class TransportError : public Error {
 public:
  TransportError(const std::string& what, int attempts)
      : Error(what + " (after " + std::to_string(attempts) + " attempts)"), attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

// AUC is undefined when only one class is present.
class UndefinedAuc : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace hitlbm
