// Copyright 2026 The qkdrate Authors
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

namespace qkdrate {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the mathematical domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An eigendecomposition or other numerical kernel failed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A constraint set admits no (strictly) feasible state.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver failed to produce a usable result.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A problem description loaded from a file is malformed.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace qkdrate
