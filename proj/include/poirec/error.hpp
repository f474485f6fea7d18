// Copyright 2026 The poirec Authors.
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

#ifndef POIREC_ERROR_HPP_
#define POIREC_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace poirec {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or precondition supplied by the caller. The CLI maps
// this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A key (point, postal code, image id, venue id) not present in a table.
class LookupMiss : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  TransportError(const std::string& what, int retries)
      : Error(what + " (after " + std::to_string(retries) + " retries)"),
        retries_(retries) {}

  int retries() const { return retries_; }

 private:
  int retries_;
};

// Numerical failure during training (NaN/Inf loss or gradient).
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Malformed model input (token id out of range, sequence too long).
class InputError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace poirec

#endif  // POIREC_ERROR_HPP_
