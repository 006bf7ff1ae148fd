/* Copyright 2026 The qcep authors. All Rights Reserved.

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

#ifndef QCEP_ERROR_HPP_
#define QCEP_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace qcep {

// Base class for all qcep failures. The CLI maps the subclasses below onto
// process exit codes: usage 1, data 2, divergence 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad command line / configuration.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (files, shapes, preconditions).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values produced by a numerical procedure.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace qcep

#endif  // QCEP_ERROR_HPP_
