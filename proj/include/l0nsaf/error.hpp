/*
 * Copyright 2026 The l0nsaf Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef L0NSAF_ERROR_HPP_
#define L0NSAF_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace l0nsaf {

// Invalid argument or configuration value. `field()` names the offending
// parameter when one is known.
class ParameterError : public std::invalid_argument {
 public:
  explicit ParameterError(const std::string& what, std::string field = {})
      : std::invalid_argument(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Malformed input file (IR text, WAV, bank matrix, config, CSV).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace l0nsaf

#endif  // L0NSAF_ERROR_HPP_
