// Copyright 2026 The fmr Authors
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

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace fmr {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes that do not fit together (grid vs grid, kernel vs grid, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, or an inverse transform that left a real imaginary part.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid user configuration (bad ranges, unknown keys, too-small images).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File and stream failures, including malformed file headers.
class IoError : public Error {
 public:
  using Error::Error;
};

// Training loss blew past the divergence guard.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long iteration)
      : Error(what), iteration_(iteration) {}
  long iteration() const noexcept { return iteration_; }

 private:
  long iteration_;
};

namespace detail {

template <typename... Args>
std::string concat(Args&&... args) {
  std::ostringstream oss;
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

}  // namespace detail

}  // namespace fmr
