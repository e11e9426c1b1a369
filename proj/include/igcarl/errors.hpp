/*
 * Copyright 2026 The igcarl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef IGCARL_ERRORS_HPP
#define IGCARL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace igcarl {

/// Invalid or inconsistent configuration (bad ranges, missing snapshots).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// API misuse: dimension mismatches, stepping a finished episode.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed checkpoint or CSV artifact.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A loss or parameter became non-finite during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The action gradient vanished, so the gradient/orthogonal probe is undefined.
class DegenerateGradientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace igcarl

#endif  // IGCARL_ERRORS_HPP
