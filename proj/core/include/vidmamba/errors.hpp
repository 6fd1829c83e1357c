// Copyright 2026 The vidmamba Authors.
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

namespace vidmamba {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Extents of operands do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, failed convergence, overflow.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Caller passed an out-of-domain argument (index, probability, step).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Parameter sets or config files that do not fit together.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace vidmamba
