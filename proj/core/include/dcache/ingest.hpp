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

// Table ingestion from a JSON spec document. Two sources are supported:
//
//   synthetic: {"namespace", "table", "rows", "seed",
//               "columns": [{"name", "type", "min"?, "max"?, "cardinality"?,
//                            "sequential"?}],
//               "partition": {"column", "by": "month"|"year"} | {"rows_per_file"}}
//   csv:       {"namespace", "table", "source": "<path>", "delimiter"?,
//               "schema": [{"name", "type"}], "partition": ...}
//
// Relative csv paths resolve against `base_dir`.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dcache/catalog.hpp"

namespace dcache {

struct ColumnGenSpec {
  std::string name;
  ColumnType type = ColumnType::kInt64;
  // Inclusive range in display form; defaults depend on the type.
  std::optional<std::string> min;
  std::optional<std::string> max;
  // String columns draw from this many distinct values.
  int64_t cardinality = 100;
  // Spread values evenly over [min, max] in row order instead of sampling.
  bool sequential = false;
};

struct PartitionSpec {
  // Either a calendar granularity on a date/timestamp column...
  std::string column;
  std::string by;  // "month" or "year"
  // ...or fixed-size row chunks. Zero with no column means a single file.
  uint64_t rows_per_file = 0;
};

struct TableSpec {
  std::string namespace_name;
  std::string table;
  uint64_t seed = 0;
  PartitionSpec partition;

  // Synthetic source.
  uint64_t rows = 0;
  std::vector<ColumnGenSpec> columns;

  // Delimited-text source.
  std::optional<std::filesystem::path> source;
  char delimiter = ',';
  Schema schema;

  static TableSpec FromJson(const nlohmann::json& doc,
                            const std::filesystem::path& base_dir = {});
};

ColumnarBatch GenerateRows(const TableSpec& spec);
// Parses a delimited text file with a header row naming the schema columns.
ColumnarBatch ReadDelimited(const std::filesystem::path& path, const Schema& schema,
                            char delimiter = ',');
std::vector<ColumnarBatch> Partition(const ColumnarBatch& rows, const PartitionSpec& partition);

std::shared_ptr<const TableManifest> IngestTable(Catalog& catalog, const TableSpec& spec);

// The four-column, month-partitioned table used throughout the examples:
// c1 int64, c2 float64, c3 string, eventTime date over 2023.
TableSpec MonthlyEventsSpec(std::string namespace_name, std::string table, uint64_t rows,
                            uint64_t seed);

}  // namespace dcache
