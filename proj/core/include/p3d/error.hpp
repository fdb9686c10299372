/*
 * Copyright 2026 The p3d Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <stdexcept>
#include <string>

namespace p3d {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Extents disagree, are non-positive, or a named tensor has the wrong shape.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A kernel, block or architecture description is internally inconsistent.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// Malformed file: bad magic, version, checksum or truncation.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Input data cannot satisfy a request (too few frames, unreadable file).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or a failed numerical verification.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace p3d
