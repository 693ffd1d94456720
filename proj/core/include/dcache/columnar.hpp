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

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dcache/predicate.hpp"
#include "dcache/types.hpp"

namespace dcache {

// int64, date and timestamp share the int64 representation.
using ColumnData =
    std::variant<std::vector<int64_t>, std::vector<double>, std::vector<std::string>>;

ColumnData MakeColumnData(ColumnType type);
size_t ColumnSize(const ColumnData& data);

// Encoded size of a column chunk: 8 bytes per fixed-width value, 4 bytes per
// string length prefix plus the string bytes.
uint64_t EncodedColumnBytes(const ColumnData& data);

// In-memory columnar table fragment. Immutable once shared.
class ColumnarBatch {
 public:
  ColumnarBatch() = default;
  explicit ColumnarBatch(Schema schema);
  ColumnarBatch(Schema schema, std::vector<ColumnData> columns);

  const Schema& schema() const { return schema_; }
  size_t num_rows() const { return num_rows_; }
  size_t num_columns() const { return columns_.size(); }

  int FieldIndex(std::string_view name) const;
  const ColumnData& column(size_t i) const { return columns_[i]; }
  const ColumnData& column(std::string_view name) const;

  Scalar Value(size_t row, size_t col) const;
  Row RowAt(size_t row) const;

  void AppendRow(std::span<const Scalar> values);
  // Appends rows of `other`, matching columns by name.
  void Append(const ColumnarBatch& other);

  ColumnarBatch Project(std::span<const std::string> names) const;
  ColumnarBatch Filter(const std::vector<uint8_t>& mask) const;

  uint64_t EncodedBytes() const;

  // One string per row, sorted; equal vectors mean equal row multisets.
  std::vector<std::string> CanonicalRows() const;

 private:
  Schema schema_;
  std::vector<ColumnData> columns_;
  size_t num_rows_ = 0;
};

// Selection vector of rows satisfying `p`. Throws for opaque predicates or
// when `p` references a column the batch does not carry.
std::vector<uint8_t> FilterMask(const Predicate& p, const ColumnarBatch& batch);

// Multiset fingerprint over CanonicalRows (FNV-1a).
uint64_t RowsDigest(const ColumnarBatch& batch);

}  // namespace dcache
