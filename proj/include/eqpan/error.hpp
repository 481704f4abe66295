/* Copyright 2026 The Eqpan Authors. All Rights Reserved.

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

#include <stdexcept>
#include <string>

namespace eqpan {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An object is not in a state that permits the requested operation.
class InvalidState : public Error {
 public:
  using Error::Error;
};

/// A direction has no horizontal component, so no rotation anchor is defined.
/// Callers decide the fallback (typically anchor 0 with the point excluded
/// from rotation-classification losses).
class DegenerateDirection : public Error {
 public:
  using Error::Error;
};

/// Input bytes, files, or configs do not match the documented schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Filesystem-level failure (open/read/write).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values encountered during numeric computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace eqpan
