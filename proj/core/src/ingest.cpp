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

#include "dcache/ingest.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "dcache/errors.hpp"
#include "dcache/random.hpp"

namespace dcache {
namespace {

using nlohmann::json;

std::optional<std::string> OptText(const json& doc, const char* key) {
  if (!doc.contains(key)) return std::nullopt;
  const json& v = doc.at(key);
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

PartitionSpec ParsePartition(const json& doc) {
  PartitionSpec p;
  if (doc.is_null()) return p;
  p.column = doc.value("column", "");
  p.by = doc.value("by", p.column.empty() ? "" : "month");
  p.rows_per_file = doc.value("rows_per_file", uint64_t{0});
  if (!p.column.empty() && p.by != "month" && p.by != "year") {
    throw InvalidArgument("unsupported partition granularity '" + p.by + "'");
  }
  return p;
}

Scalar RangeEnd(const ColumnGenSpec& c, bool upper) {
  const auto& text = upper ? c.max : c.min;
  if (text) return Scalar::Parse(*text, c.type);
  switch (c.type) {
    case ColumnType::kInt64:
      return Scalar::Int64(upper ? 1000000 : 0);
    case ColumnType::kFloat64:
      return Scalar::Float64(upper ? 1000.0 : 0.0);
    case ColumnType::kDate:
      return Scalar::Date(ParseDate(upper ? "2023-12-31" : "2023-01-01"));
    case ColumnType::kTimestamp:
      return Scalar::Timestamp(ParseTimestamp(upper ? "2023-12-31T23:59:59" : "2023-01-01T00:00:00"));
    case ColumnType::kString:
      break;
  }
  throw InvalidArgument("string columns take a cardinality, not a range");
}

std::vector<std::string> SplitRecord(const std::string& line, char delim, size_t line_no) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"' && cur.empty()) {
      quoted = true;
    } else if (ch == delim) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (quoted) throw ParseError("unterminated quote on line " + std::to_string(line_no));
  out.push_back(std::move(cur));
  return out;
}

std::string PartitionKey(const ColumnarBatch& rows, size_t row, size_t col, const std::string& by) {
  const Scalar v = rows.Value(row, col);
  const std::string text = v.type() == ColumnType::kDate ? FormatDate(v.AsInt())
                                                         : FormatTimestamp(v.AsInt());
  return text.substr(0, by == "year" ? 4 : 7);
}

}  // namespace

TableSpec TableSpec::FromJson(const json& doc, const std::filesystem::path& base_dir) {
  try {
    TableSpec spec;
    spec.namespace_name = doc.at("namespace").get<std::string>();
    spec.table = doc.at("table").get<std::string>();
    spec.seed = doc.value("seed", uint64_t{0});
    spec.partition = ParsePartition(doc.value("partition", json()));
    if (doc.contains("source")) {
      std::filesystem::path src = doc.at("source").get<std::string>();
      if (src.is_relative() && !base_dir.empty()) src = base_dir / src;
      spec.source = src;
      const std::string delim = doc.value("delimiter", ",");
      if (delim.size() != 1) throw InvalidArgument("delimiter must be a single character");
      spec.delimiter = delim[0];
      for (const auto& f : doc.at("schema")) {
        spec.schema.push_back({f.at("name").get<std::string>(),
                               ParseTypeName(f.at("type").get<std::string>())});
      }
    } else {
      spec.rows = doc.at("rows").get<uint64_t>();
      for (const auto& c : doc.at("columns")) {
        ColumnGenSpec g;
        g.name = c.at("name").get<std::string>();
        g.type = ParseTypeName(c.at("type").get<std::string>());
        g.min = OptText(c, "min");
        g.max = OptText(c, "max");
        g.cardinality = c.value("cardinality", int64_t{100});
        g.sequential = c.value("sequential", false);
        spec.columns.push_back(std::move(g));
        spec.schema.push_back({spec.columns.back().name, spec.columns.back().type});
      }
    }
    if (!spec.partition.column.empty()) {
      const ColumnType t = GetField(spec.schema, spec.partition.column).type;
      if (t != ColumnType::kDate && t != ColumnType::kTimestamp) {
        throw InvalidArgument("partition column '" + spec.partition.column +
                              "' must be a date or timestamp");
      }
    }
    return spec;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed table spec: ") + e.what());
  }
}

ColumnarBatch GenerateRows(const TableSpec& spec) {
  Rng rng(spec.seed);
  const uint64_t n = spec.rows;
  std::vector<ColumnData> cols;
  for (const ColumnGenSpec& c : spec.columns) {
    ColumnData data = MakeColumnData(c.type);
    if (c.type == ColumnType::kString) {
      if (c.cardinality <= 0) throw InvalidArgument("cardinality must be positive for " + c.name);
      auto& v = std::get<std::vector<std::string>>(data);
      v.reserve(n);
      char buf[32];
      for (uint64_t i = 0; i < n; ++i) {
        const int64_t k = c.sequential ? static_cast<int64_t>(i % static_cast<uint64_t>(c.cardinality))
                                       : rng.UniformInt(0, c.cardinality - 1);
        std::snprintf(buf, sizeof(buf), "s%05lld", static_cast<long long>(k));
        v.emplace_back(buf);
      }
    } else if (c.type == ColumnType::kFloat64) {
      const double lo = RangeEnd(c, false).AsDouble();
      const double hi = RangeEnd(c, true).AsDouble();
      if (hi < lo) throw InvalidArgument("empty range for " + c.name);
      auto& v = std::get<std::vector<double>>(data);
      v.reserve(n);
      for (uint64_t i = 0; i < n; ++i) {
        const double u = c.sequential ? (n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0)
                                      : rng.UniformDouble();
        v.push_back(std::round((lo + u * (hi - lo)) * 1e4) / 1e4 + 0.0);
      }
    } else {
      const int64_t lo = RangeEnd(c, false).AsInt();
      const int64_t hi = RangeEnd(c, true).AsInt();
      if (hi < lo) throw InvalidArgument("empty range for " + c.name);
      auto& v = std::get<std::vector<int64_t>>(data);
      v.reserve(n);
      const double span = static_cast<double>(hi - lo) + 1.0;
      for (uint64_t i = 0; i < n; ++i) {
        if (c.sequential) {
          const auto off = static_cast<int64_t>(std::floor(static_cast<double>(i) * span / static_cast<double>(n)));
          v.push_back(std::min(hi, lo + off));
        } else {
          v.push_back(rng.UniformInt(lo, hi));
        }
      }
    }
    cols.push_back(std::move(data));
  }
  return ColumnarBatch(spec.schema, std::move(cols));
}

ColumnarBatch ReadDelimited(const std::filesystem::path& path, const Schema& schema,
                            char delimiter) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = SplitRecord(line, delimiter, 1);
  std::vector<size_t> source_index;
  for (const Field& f : schema) {
    auto it = std::find(header.begin(), header.end(), f.name);
    if (it == header.end()) throw ParseError(path.string() + ": header lacks column '" + f.name + "'");
    source_index.push_back(static_cast<size_t>(it - header.begin()));
  }
  ColumnarBatch batch(schema);
  std::vector<Scalar> row;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = SplitRecord(line, delimiter, line_no);
    if (fields.size() != header.size()) {
      throw ParseError(path.string() + ": line " + std::to_string(line_no) + " has " +
                       std::to_string(fields.size()) + " fields, expected " +
                       std::to_string(header.size()));
    }
    row.clear();
    for (size_t c = 0; c < schema.size(); ++c) {
      try {
        row.push_back(Scalar::Parse(fields[source_index[c]], schema[c].type));
      } catch (const Error& e) {
        throw TypeError(path.string() + ": line " + std::to_string(line_no) + ", column '" +
                        schema[c].name + "': " + e.what());
      }
    }
    batch.AppendRow(row);
  }
  return batch;
}

std::vector<ColumnarBatch> Partition(const ColumnarBatch& rows, const PartitionSpec& partition) {
  std::vector<ColumnarBatch> out;
  if (rows.num_rows() == 0) return out;
  if (!partition.column.empty()) {
    const int col = rows.FieldIndex(partition.column);
    if (col < 0) throw NotFoundError("unknown partition column '" + partition.column + "'");
    std::map<std::string, std::vector<uint8_t>> masks;
    for (size_t r = 0; r < rows.num_rows(); ++r) {
      auto& mask = masks[PartitionKey(rows, r, static_cast<size_t>(col), partition.by)];
      mask.resize(rows.num_rows(), 0);
      mask[r] = 1;
    }
    for (const auto& [key, mask] : masks) out.push_back(rows.Filter(mask));
    return out;
  }
  const uint64_t chunk = partition.rows_per_file ? partition.rows_per_file : rows.num_rows();
  for (uint64_t start = 0; start < rows.num_rows(); start += chunk) {
    std::vector<uint8_t> mask(rows.num_rows(), 0);
    const uint64_t end = std::min<uint64_t>(rows.num_rows(), start + chunk);
    std::fill(mask.begin() + static_cast<std::ptrdiff_t>(start),
              mask.begin() + static_cast<std::ptrdiff_t>(end), 1);
    out.push_back(rows.Filter(mask));
  }
  return out;
}

std::shared_ptr<const TableManifest> IngestTable(Catalog& catalog, const TableSpec& spec) {
  const ColumnarBatch rows = spec.source ? ReadDelimited(*spec.source, spec.schema, spec.delimiter)
                                         : GenerateRows(spec);
  const std::vector<ColumnarBatch> files = Partition(rows, spec.partition);
  return catalog.CreateTable(spec.namespace_name, spec.table, spec.schema, files, spec.seed);
}

TableSpec MonthlyEventsSpec(std::string namespace_name, std::string table, uint64_t rows,
                            uint64_t seed) {
  TableSpec spec;
  spec.namespace_name = std::move(namespace_name);
  spec.table = std::move(table);
  spec.rows = rows;
  spec.seed = seed;
  spec.columns = {
      {"c1", ColumnType::kInt64, "0", "99999", 100, false},
      {"c2", ColumnType::kFloat64, "0", "1000", 100, false},
      {"c3", ColumnType::kString, std::nullopt, std::nullopt, 500, false},
      {"eventTime", ColumnType::kDate, "2023-01-01", "2023-12-31", 100, true},
  };
  for (const auto& c : spec.columns) spec.schema.push_back({c.name, c.type});
  spec.partition.column = "eventTime";
  spec.partition.by = "month";
  return spec;
}

}  // namespace dcache
