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

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dcache {

enum class ColumnType : uint8_t { kInt64, kFloat64, kString, kDate, kTimestamp };

std::string_view TypeName(ColumnType type);
ColumnType ParseTypeName(std::string_view name);

// Integer-backed types have a successor function, so [a, b] and [b+1, c]
// describe contiguous row sets.
constexpr bool IsDiscrete(ColumnType type) {
  return type == ColumnType::kInt64 || type == ColumnType::kDate ||
         type == ColumnType::kTimestamp;
}

// Physical representation: int64 for int64/date/timestamp, double, string.
constexpr bool IsIntegerBacked(ColumnType type) { return IsDiscrete(type); }

// Dates are days since 1970-01-01, timestamps microseconds since the epoch.
int64_t ParseDate(std::string_view text);
std::string FormatDate(int64_t days);
int64_t ParseTimestamp(std::string_view text);
std::string FormatTimestamp(int64_t micros);
bool LooksLikeDate(std::string_view text);
bool LooksLikeTimestamp(std::string_view text);

class Scalar {
 public:
  static Scalar Int64(int64_t v) { return Scalar(ColumnType::kInt64, v); }
  static Scalar Float64(double v);
  static Scalar String(std::string v) { return Scalar(ColumnType::kString, std::move(v)); }
  static Scalar Date(int64_t days) { return Scalar(ColumnType::kDate, days); }
  static Scalar Timestamp(int64_t micros) { return Scalar(ColumnType::kTimestamp, micros); }

  // Parses the display form (as written by ToString) for the given type.
  static Scalar Parse(std::string_view text, ColumnType type);

  ColumnType type() const { return type_; }
  int64_t AsInt() const;
  double AsDouble() const;
  const std::string& AsString() const;

  // Successor / predecessor for discrete types; nullopt at the numeric limits.
  std::optional<Scalar> Next() const;
  std::optional<Scalar> Prev() const;

  // Literal in filter-expression syntax: 42, 1.5, 'it''s', 2023-01-01, ...
  std::string ToLiteral() const;
  // Plain display form: strings unquoted, dates ISO.
  std::string ToString() const;

  // Throws TypeError when the types differ.
  friend std::strong_ordering Compare(const Scalar& a, const Scalar& b);

  bool operator==(const Scalar& other) const = default;

 private:
  template <typename T>
  Scalar(ColumnType type, T v) : type_(type), value_(std::move(v)) {}

  ColumnType type_;
  std::variant<int64_t, double, std::string> value_;
};

inline bool operator<(const Scalar& a, const Scalar& b) { return Compare(a, b) < 0; }

struct Field {
  std::string name;
  ColumnType type;

  bool operator==(const Field&) const = default;
};

using Schema = std::vector<Field>;

const Field* FindField(const Schema& schema, std::string_view name);
const Field& GetField(const Schema& schema, std::string_view name);

}  // namespace dcache
