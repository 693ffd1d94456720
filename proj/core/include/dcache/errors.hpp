/*
 * Copyright 2026 The dcache Authors
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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dcache {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed filter text, trace record, or document. `position` is a byte
/// offset into the input when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, size_t position)
      : Error(message + " (at offset " + std::to_string(position) + ")"),
        position_(position) {}
  explicit ParseError(const std::string& message) : Error(message), position_(npos) {}

  static constexpr size_t npos = static_cast<size_t>(-1);
  size_t position() const { return position_; }

 private:
  size_t position_;
};

class TypeError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class CorruptionError : public Error {
 public:
  using Error::Error;
};

// Raised by the executor when a planned cache element disappeared between
// planning and execution. Callers re-plan.
class ElementEvicted : public Error {
 public:
  using Error::Error;
};

}  // namespace dcache
