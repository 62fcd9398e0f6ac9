/* Copyright 2026 The bdrrn Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bdrrn {

// Root of every error the library throws. The CLI maps InputError (and its
// subclasses) to exit code 2 and anything else to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad data coming from outside the process: files, flags, configs.
class InputError : public Error {
 public:
  using Error::Error;
};

// Tensor shape contract violated by a caller.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Text format problem, carries the 1-based line number when known.
class ParseError : public InputError {
 public:
  ParseError(const std::string& what, int line)
      : InputError(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class IoError : public InputError {
 public:
  using InputError::InputError;
};

}  // namespace bdrrn
