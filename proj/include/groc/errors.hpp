// Copyright 2026 The groc-lm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef GROC_ERRORS_HPP
#define GROC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace groc {

/// Operand shapes do not conform for a primitive.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller broke an API precondition (non-scalar loss, state drift, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Bad or missing input data: files, corpora, configs.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN/Inf where a finite number is required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace groc

#endif  // GROC_ERRORS_HPP
