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

#include "dcache/columnar.hpp"

#include <algorithm>
#include <numeric>

#include "dcache/errors.hpp"

namespace dcache {
namespace {

template <typename T>
bool InInterval(const T& v, const Interval& iv) {
  auto raw = [](const Scalar& s) -> T {
    if constexpr (std::is_same_v<T, int64_t>) {
      return s.AsInt();
    } else if constexpr (std::is_same_v<T, double>) {
      return s.AsDouble();
    } else {
      return s.AsString();
    }
  };
  if (iv.lower()) {
    const T lo = raw(iv.lower()->value);
    if (iv.lower()->closed ? v < lo : !(lo < v)) return false;
  }
  if (iv.upper()) {
    const T hi = raw(iv.upper()->value);
    if (iv.upper()->closed ? hi < v : !(v < hi)) return false;
  }
  return true;
}

// Clears mask entries whose value falls outside every interval of `set`.
void RestrictMask(const ColumnData& data, const IntervalSet& set, std::vector<uint8_t>& mask) {
  std::visit(
      [&](const auto& values) {
        for (size_t i = 0; i < values.size(); ++i) {
          if (!mask[i]) continue;
          bool hit = false;
          for (const Interval& iv : set) {
            if (InInterval(values[i], iv)) {
              hit = true;
              break;
            }
          }
          if (!hit) mask[i] = 0;
        }
      },
      data);
}

void PushScalar(ColumnData& data, const Scalar& v) {
  std::visit(
      [&](auto& values) {
        using T = typename std::decay_t<decltype(values)>::value_type;
        if constexpr (std::is_same_v<T, int64_t>) {
          values.push_back(v.AsInt());
        } else if constexpr (std::is_same_v<T, double>) {
          values.push_back(v.AsDouble());
        } else {
          values.push_back(v.AsString());
        }
      },
      data);
}

}  // namespace

ColumnData MakeColumnData(ColumnType type) {
  switch (type) {
    case ColumnType::kFloat64:
      return std::vector<double>{};
    case ColumnType::kString:
      return std::vector<std::string>{};
    default:
      return std::vector<int64_t>{};
  }
}

size_t ColumnSize(const ColumnData& data) {
  return std::visit([](const auto& v) { return v.size(); }, data);
}

uint64_t EncodedColumnBytes(const ColumnData& data) {
  if (const auto* s = std::get_if<std::vector<std::string>>(&data)) {
    uint64_t total = 4 * s->size();
    for (const auto& v : *s) total += v.size();
    return total;
  }
  return 8 * ColumnSize(data);
}

ColumnarBatch::ColumnarBatch(Schema schema) : schema_(std::move(schema)) {
  columns_.reserve(schema_.size());
  for (const Field& f : schema_) columns_.push_back(MakeColumnData(f.type));
}

ColumnarBatch::ColumnarBatch(Schema schema, std::vector<ColumnData> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {
  if (schema_.size() != columns_.size()) {
    throw InvalidArgument("batch has " + std::to_string(columns_.size()) + " columns, schema " +
                          std::to_string(schema_.size()));
  }
  for (size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].index() != MakeColumnData(schema_[i].type).index()) {
      throw TypeError("column '" + schema_[i].name + "' does not match its declared type");
    }
    const size_t n = ColumnSize(columns_[i]);
    if (i == 0) {
      num_rows_ = n;
    } else if (n != num_rows_) {
      throw InvalidArgument("column '" + schema_[i].name + "' has " + std::to_string(n) +
                            " values, expected " + std::to_string(num_rows_));
    }
  }
}

int ColumnarBatch::FieldIndex(std::string_view name) const {
  for (size_t i = 0; i < schema_.size(); ++i) {
    if (schema_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

const ColumnData& ColumnarBatch::column(std::string_view name) const {
  const int i = FieldIndex(name);
  if (i < 0) throw NotFoundError("batch has no column '" + std::string(name) + "'");
  return columns_[static_cast<size_t>(i)];
}

Scalar ColumnarBatch::Value(size_t row, size_t col) const {
  const ColumnType type = schema_[col].type;
  switch (type) {
    case ColumnType::kInt64:
      return Scalar::Int64(std::get<0>(columns_[col])[row]);
    case ColumnType::kDate:
      return Scalar::Date(std::get<0>(columns_[col])[row]);
    case ColumnType::kTimestamp:
      return Scalar::Timestamp(std::get<0>(columns_[col])[row]);
    case ColumnType::kFloat64:
      return Scalar::Float64(std::get<1>(columns_[col])[row]);
    case ColumnType::kString:
      return Scalar::String(std::get<2>(columns_[col])[row]);
  }
  throw TypeError("bad column type");
}

Row ColumnarBatch::RowAt(size_t row) const {
  Row out;
  for (size_t c = 0; c < schema_.size(); ++c) out.emplace(schema_[c].name, Value(row, c));
  return out;
}

void ColumnarBatch::AppendRow(std::span<const Scalar> values) {
  if (values.size() != schema_.size()) throw InvalidArgument("row width does not match schema");
  for (size_t c = 0; c < values.size(); ++c) {
    if (values[c].type() != schema_[c].type) {
      throw TypeError("value for '" + schema_[c].name + "' has type " +
                      std::string(TypeName(values[c].type())));
    }
  }
  for (size_t c = 0; c < values.size(); ++c) PushScalar(columns_[c], values[c]);
  ++num_rows_;
}

void ColumnarBatch::Append(const ColumnarBatch& other) {
  if (other.num_rows_ == 0) return;
  for (size_t c = 0; c < schema_.size(); ++c) {
    const int j = other.FieldIndex(schema_[c].name);
    if (j < 0 || other.schema_[static_cast<size_t>(j)].type != schema_[c].type) {
      throw InvalidArgument("cannot append batch: column '" + schema_[c].name + "' missing");
    }
    std::visit(
        [&](auto& dst) {
          using V = std::decay_t<decltype(dst)>;
          const auto& src = std::get<V>(other.columns_[static_cast<size_t>(j)]);
          dst.insert(dst.end(), src.begin(), src.end());
        },
        columns_[c]);
  }
  num_rows_ += other.num_rows_;
}

ColumnarBatch ColumnarBatch::Project(std::span<const std::string> names) const {
  Schema schema;
  std::vector<ColumnData> cols;
  for (const std::string& name : names) {
    const int i = FieldIndex(name);
    if (i < 0) throw NotFoundError("batch has no column '" + name + "'");
    schema.push_back(schema_[static_cast<size_t>(i)]);
    cols.push_back(columns_[static_cast<size_t>(i)]);
  }
  ColumnarBatch out(std::move(schema), std::move(cols));
  out.num_rows_ = num_rows_;
  return out;
}

ColumnarBatch ColumnarBatch::Filter(const std::vector<uint8_t>& mask) const {
  if (mask.size() != num_rows_) throw InvalidArgument("mask length does not match row count");
  const size_t kept = static_cast<size_t>(std::count(mask.begin(), mask.end(), uint8_t{1}));
  ColumnarBatch out(schema_);
  for (size_t c = 0; c < columns_.size(); ++c) {
    std::visit(
        [&](const auto& src) {
          using V = std::decay_t<decltype(src)>;
          auto& dst = std::get<V>(out.columns_[c]);
          dst.reserve(kept);
          for (size_t i = 0; i < src.size(); ++i) {
            if (mask[i]) dst.push_back(src[i]);
          }
        },
        columns_[c]);
  }
  out.num_rows_ = kept;
  return out;
}

uint64_t ColumnarBatch::EncodedBytes() const {
  uint64_t total = 0;
  for (const auto& c : columns_) total += EncodedColumnBytes(c);
  return total;
}

std::vector<std::string> ColumnarBatch::CanonicalRows() const {
  std::vector<size_t> order(schema_.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return schema_[a].name < schema_[b].name; });
  std::vector<std::string> rows;
  rows.reserve(num_rows_);
  for (size_t r = 0; r < num_rows_; ++r) {
    std::string line;
    for (size_t c : order) {
      line += schema_[c].name;
      line += '=';
      line += Value(r, c).ToLiteral();
      line += '\x1f';
    }
    rows.push_back(std::move(line));
  }
  std::sort(rows.begin(), rows.end());
  return rows;
}

std::vector<uint8_t> FilterMask(const Predicate& p, const ColumnarBatch& batch) {
  if (p.opaque()) throw InvalidArgument("cannot evaluate an opaque filter");
  const size_t n = batch.num_rows();
  std::vector<uint8_t> result(n, 0);
  std::vector<uint8_t> mask;
  for (const Box& box : p.boxes()) {
    mask.assign(n, 1);
    for (const auto& [col, set] : box.constraints) {
      const int i = batch.FieldIndex(col);
      if (i < 0) throw NotFoundError("filter column '" + col + "' not present in batch");
      RestrictMask(batch.column(static_cast<size_t>(i)), set, mask);
    }
    for (size_t r = 0; r < n; ++r) result[r] |= mask[r];
  }
  return result;
}

uint64_t RowsDigest(const ColumnarBatch& batch) {
  uint64_t h = 1469598103934665603ULL;
  for (const std::string& row : batch.CanonicalRows()) {
    for (unsigned char ch : row) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
    h ^= 0xff;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace dcache
