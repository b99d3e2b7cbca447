// Copyright 2026 The sadrec Authors.
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

#ifndef SADREC_ERROR_HPP_
#define SADREC_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace sadrec {

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kData = 2,
  kDivergence = 3,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const { return ExitCode::kData; }
};

// An index fell outside [0, n).
class IndexError : public Error {
 public:
  using Error::Error;
};

// A caller broke a documented precondition (i >= j in a likelihood term,
// repeated items in a ternary, and so on).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed input files, empty datasets, impossible splits.
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite parameters during training or sampling.
class DivergenceError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::kDivergence; }
};

class UsageError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::kUsage; }
};

}  // namespace sadrec

#endif  // SADREC_ERROR_HPP_
