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

// Snapshot-versioned table metadata over a local directory that stands in for
// an object store:
//
//   <root>/<namespace>/<table>/manifest.json
//   <root>/<namespace>/<table>/data/<file_id>.dcol
//
// Data files are immutable once published. A commit writes new files and a
// new manifest that appends one snapshot; older snapshots stay readable.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dcache/columnar.hpp"
#include "dcache/predicate.hpp"
#include "dcache/types.hpp"

namespace dcache {

struct ColumnStats {
  std::string name;
  Scalar min;
  Scalar max;
  uint64_t chunk_bytes = 0;
};

struct DataFileMeta {
  std::string file_id;
  std::string path;  // relative to the table directory
  uint64_t row_count = 0;
  uint64_t total_bytes = 0;
  std::vector<ColumnStats> columns;

  const ColumnStats& Stats(std::string_view column) const;
  // Checksum part of the file id; equal for files with identical content.
  std::string ContentHash() const;
};

struct SnapshotEntry {
  std::string snapshot_id;
  std::vector<std::string> file_ids;  // manifest order
};

struct TableManifest {
  std::string namespace_name;
  std::string table;
  Schema schema;
  std::vector<SnapshotEntry> snapshots;
  std::vector<DataFileMeta> files;
  uint64_t seed = 0;

  std::string QualifiedName() const { return namespace_name + "." + table; }
  const std::string& LatestSnapshotId() const;
  // An empty id resolves to the latest snapshot. Throws NotFoundError.
  const SnapshotEntry& Snapshot(std::string_view snapshot_id) const;
  const DataFileMeta& File(std::string_view file_id) const;
  std::vector<const DataFileMeta*> LiveFiles(std::string_view snapshot_id) const;
  bool IsLive(std::string_view snapshot_id, std::string_view file_id) const;

  nlohmann::json ToJson() const;
  static TableManifest FromJson(const nlohmann::json& doc);
};

// File-level zone-map test: can any row of `file` satisfy `p`? Opaque
// predicates match every file.
bool FileMayMatch(const DataFileMeta& file, const Predicate& p);

// Files of the snapshot whose min/max ranges intersect at least one box of p.
std::vector<const DataFileMeta*> PruneFiles(const TableManifest& manifest,
                                            std::string_view snapshot_id, const Predicate& p);

// Sum of the projected column chunk bytes over the files that survive pruning.
uint64_t EstimateScanBytes(const TableManifest& manifest, std::string_view snapshot_id,
                           std::span<const std::string> projections, const Predicate& p);

struct ScanStats {
  uint64_t files_scanned = 0;
  // Chunk bytes of the projected columns.
  uint64_t bytes_read = 0;
  // Chunk bytes of columns read only to evaluate the filter or to keep them
  // alongside the result; reported separately from bytes_read.
  uint64_t filter_bytes_read = 0;
  uint64_t rows_returned = 0;
  // False when the filter is opaque and every row of every file was returned.
  bool filter_applied = true;
  std::vector<std::string> file_ids;
};

struct ScanResult {
  ColumnarBatch batch;
  ScanStats stats;
};

class Catalog {
 public:
  explicit Catalog(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path TableDir(std::string_view ns, std::string_view table) const;

  bool HasTable(std::string_view ns, std::string_view table) const;
  // Cached, shared snapshot of the manifest document. Throws NotFoundError.
  std::shared_ptr<const TableManifest> Load(std::string_view ns, std::string_view table) const;

  // Writes one data file per batch and a manifest with a single snapshot.
  // Replaces any existing table of the same name.
  std::shared_ptr<const TableManifest> CreateTable(std::string_view ns, std::string_view table,
                                                   const Schema& schema,
                                                   std::span<const ColumnarBatch> files,
                                                   uint64_t seed);

  // Appends a snapshot equal to the latest one minus `remove` plus one new
  // file per batch in `add`. Returns the new snapshot id.
  std::string CommitSnapshot(std::string_view ns, std::string_view table,
                             std::span<const ColumnarBatch> add,
                             std::span<const std::string> remove);

  // Rows of the snapshot satisfying p, projected to `projections` followed by
  // any `extra_columns` not already projected. Files in manifest order, rows
  // in storage order.
  ScanResult ReadScan(const TableManifest& manifest, std::string_view snapshot_id,
                      std::span<const std::string> projections, const Predicate& p,
                      std::span<const std::string> extra_columns = {}) const;

  std::filesystem::path DataPath(const TableManifest& manifest, const DataFileMeta& file) const;

 private:
  std::shared_ptr<const TableManifest> Publish(TableManifest manifest);
  DataFileMeta WriteDataFile(const TableManifest& manifest, const ColumnarBatch& batch,
                             size_t seq) const;

  std::filesystem::path root_;
  mutable std::shared_mutex cache_mu_;
  mutable std::map<std::string, std::shared_ptr<const TableManifest>, std::less<>> cache_;
  std::mutex commit_mu_;
};

// Per-column statistics of a batch. Requires at least one row.
std::vector<ColumnStats> ComputeStats(const ColumnarBatch& batch);

}  // namespace dcache
