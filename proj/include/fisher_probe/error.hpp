// Copyright 2026 The Fisher Probe Authors
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

namespace fisher_probe {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced by a computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A caller-supplied value outside its documented domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Text that tokenizes to nothing.
class EmptyInputError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Malformed input file or record.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver exceeded its iteration cap.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace fisher_probe
