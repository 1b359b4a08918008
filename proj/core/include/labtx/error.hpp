// Copyright 2026 The labtx Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef LABTX_ERROR_HPP_
#define LABTX_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace labtx {

// Every failure raised by the library derives from Error. The subclass names
// the category so callers (and the CLI) can map them to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor extents do not line up for an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameter or option combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data violates a value-level contract (NaN, out-of-range, empty).
class DataError : public Error {
 public:
  using Error::Error;
};

// Caller broke a precondition of an operation.
class ContractError : public Error {
 public:
  using Error::Error;
};

class VocabError : public Error {
 public:
  using Error::Error;
};

// Malformed on-disk data. Messages carry the byte offset or record index.
class FormatError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace labtx

#endif  // LABTX_ERROR_HPP_
