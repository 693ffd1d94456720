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

#include "dcache/catalog.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "dcache/column_file.hpp"
#include "dcache/errors.hpp"

namespace dcache {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json ScalarToJson(const Scalar& v) {
  switch (v.type()) {
    case ColumnType::kInt64:
      return v.AsInt();
    case ColumnType::kFloat64:
      return v.AsDouble();
    default:
      return v.ToString();
  }
}

Scalar ScalarFromJson(const json& j, ColumnType type) {
  switch (type) {
    case ColumnType::kInt64:
      return Scalar::Int64(j.get<int64_t>());
    case ColumnType::kFloat64:
      return Scalar::Float64(j.get<double>());
    case ColumnType::kString:
      return Scalar::String(j.get<std::string>());
    default:
      return Scalar::Parse(j.get<std::string>(), type);
  }
}

std::string Key(std::string_view ns, std::string_view table) {
  return std::string(ns) + "." + std::string(table);
}

void WriteFileAtomically(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << content;
    if (!out) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

template <typename T>
std::pair<T, T> Extrema(const std::vector<T>& values) {
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return {*lo, *hi};
}

}  // namespace

const ColumnStats& DataFileMeta::Stats(std::string_view column) const {
  for (const auto& s : columns) {
    if (s.name == column) return s;
  }
  throw NotFoundError("file " + file_id + " has no column '" + std::string(column) + "'");
}

std::string DataFileMeta::ContentHash() const {
  const size_t dash = file_id.rfind('-');
  return dash == std::string::npos ? file_id : file_id.substr(dash + 1);
}

const std::string& TableManifest::LatestSnapshotId() const {
  if (snapshots.empty()) throw NotFoundError(QualifiedName() + " has no snapshots");
  return snapshots.back().snapshot_id;
}

const SnapshotEntry& TableManifest::Snapshot(std::string_view snapshot_id) const {
  if (snapshot_id.empty()) {
    if (snapshots.empty()) throw NotFoundError(QualifiedName() + " has no snapshots");
    return snapshots.back();
  }
  for (const auto& s : snapshots) {
    if (s.snapshot_id == snapshot_id) return s;
  }
  throw NotFoundError("unknown snapshot '" + std::string(snapshot_id) + "' of " + QualifiedName());
}

const DataFileMeta& TableManifest::File(std::string_view file_id) const {
  for (const auto& f : files) {
    if (f.file_id == file_id) return f;
  }
  throw NotFoundError("unknown file '" + std::string(file_id) + "' in " + QualifiedName());
}

std::vector<const DataFileMeta*> TableManifest::LiveFiles(std::string_view snapshot_id) const {
  std::vector<const DataFileMeta*> out;
  for (const auto& id : Snapshot(snapshot_id).file_ids) out.push_back(&File(id));
  return out;
}

bool TableManifest::IsLive(std::string_view snapshot_id, std::string_view file_id) const {
  const auto& ids = Snapshot(snapshot_id).file_ids;
  return std::find(ids.begin(), ids.end(), file_id) != ids.end();
}

json TableManifest::ToJson() const {
  json doc;
  doc["namespace"] = namespace_name;
  doc["table"] = table;
  json schema_doc = json::array();
  for (const Field& f : schema) schema_doc.push_back({{"name", f.name}, {"type", TypeName(f.type)}});
  doc["schema"] = std::move(schema_doc);
  json snaps = json::array();
  for (const auto& s : snapshots) {
    snaps.push_back({{"snapshot_id", s.snapshot_id}, {"file_ids", s.file_ids}});
  }
  doc["snapshots"] = std::move(snaps);
  json files_doc = json::array();
  for (const auto& f : files) {
    json cols = json::array();
    for (const auto& c : f.columns) {
      cols.push_back({{"name", c.name},
                      {"min", ScalarToJson(c.min)},
                      {"max", ScalarToJson(c.max)},
                      {"chunk_bytes", c.chunk_bytes}});
    }
    files_doc.push_back({{"file_id", f.file_id},
                         {"path", f.path},
                         {"row_count", f.row_count},
                         {"total_bytes", f.total_bytes},
                         {"columns", std::move(cols)}});
  }
  doc["files"] = std::move(files_doc);
  doc["seed"] = seed;
  return doc;
}

TableManifest TableManifest::FromJson(const json& doc) {
  try {
    TableManifest m;
    m.namespace_name = doc.at("namespace").get<std::string>();
    m.table = doc.at("table").get<std::string>();
    for (const auto& f : doc.at("schema")) {
      m.schema.push_back({f.at("name").get<std::string>(),
                          ParseTypeName(f.at("type").get<std::string>())});
    }
    for (const auto& s : doc.at("snapshots")) {
      m.snapshots.push_back({s.at("snapshot_id").get<std::string>(),
                             s.at("file_ids").get<std::vector<std::string>>()});
    }
    for (const auto& f : doc.at("files")) {
      DataFileMeta meta;
      meta.file_id = f.at("file_id").get<std::string>();
      meta.path = f.at("path").get<std::string>();
      meta.row_count = f.at("row_count").get<uint64_t>();
      meta.total_bytes = f.at("total_bytes").get<uint64_t>();
      for (const auto& c : f.at("columns")) {
        const std::string name = c.at("name").get<std::string>();
        const ColumnType type = GetField(m.schema, name).type;
        meta.columns.push_back({name, ScalarFromJson(c.at("min"), type),
                                ScalarFromJson(c.at("max"), type),
                                c.at("chunk_bytes").get<uint64_t>()});
      }
      m.files.push_back(std::move(meta));
    }
    m.seed = doc.value("seed", uint64_t{0});
    for (const auto& s : m.snapshots) {
      for (const auto& id : s.file_ids) m.File(id);
    }
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed manifest: ") + e.what());
  }
}

std::vector<ColumnStats> ComputeStats(const ColumnarBatch& batch) {
  if (batch.num_rows() == 0) throw InvalidArgument("cannot compute statistics of an empty batch");
  std::vector<ColumnStats> out;
  for (size_t c = 0; c < batch.num_columns(); ++c) {
    const Field& f = batch.schema()[c];
    ColumnStats s{f.name, Scalar::Int64(0), Scalar::Int64(0), EncodedColumnBytes(batch.column(c))};
    std::visit(
        [&](const auto& values) {
          auto [lo, hi] = Extrema(values);
          auto idx_lo = static_cast<size_t>(std::find(values.begin(), values.end(), lo) - values.begin());
          auto idx_hi = static_cast<size_t>(std::find(values.begin(), values.end(), hi) - values.begin());
          s.min = batch.Value(idx_lo, c);
          s.max = batch.Value(idx_hi, c);
        },
        batch.column(c));
    out.push_back(std::move(s));
  }
  return out;
}

bool FileMayMatch(const DataFileMeta& file, const Predicate& p) {
  if (p.opaque()) return true;
  for (const Box& box : p.boxes()) {
    bool ok = true;
    for (const auto& [col, set] : box.constraints) {
      const ColumnStats& s = file.Stats(col);
      auto range = Interval::Make(Bound{s.min, true}, Bound{s.max, true});
      if (!range || !intervals::Overlaps(set, *range)) {
        ok = false;
        break;
      }
    }
    if (ok) return true;
  }
  return false;
}

std::vector<const DataFileMeta*> PruneFiles(const TableManifest& manifest,
                                            std::string_view snapshot_id, const Predicate& p) {
  std::vector<const DataFileMeta*> out;
  for (const DataFileMeta* f : manifest.LiveFiles(snapshot_id)) {
    if (f->row_count > 0 && FileMayMatch(*f, p)) out.push_back(f);
  }
  return out;
}

uint64_t EstimateScanBytes(const TableManifest& manifest, std::string_view snapshot_id,
                           std::span<const std::string> projections, const Predicate& p) {
  for (const auto& col : projections) GetField(manifest.schema, col);
  uint64_t total = 0;
  for (const DataFileMeta* f : PruneFiles(manifest, snapshot_id, p)) {
    for (const auto& col : projections) total += f->Stats(col).chunk_bytes;
  }
  return total;
}

Catalog::Catalog(fs::path root) : root_(std::move(root)) {}

fs::path Catalog::TableDir(std::string_view ns, std::string_view table) const {
  return root_ / std::string(ns) / std::string(table);
}

bool Catalog::HasTable(std::string_view ns, std::string_view table) const {
  return fs::exists(TableDir(ns, table) / "manifest.json");
}

std::shared_ptr<const TableManifest> Catalog::Load(std::string_view ns,
                                                   std::string_view table) const {
  const std::string key = Key(ns, table);
  {
    std::shared_lock lock(cache_mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  const fs::path path = TableDir(ns, table) / "manifest.json";
  std::ifstream in(path);
  if (!in) throw NotFoundError("unknown table " + key);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  auto manifest = std::make_shared<const TableManifest>(TableManifest::FromJson(doc));
  std::unique_lock lock(cache_mu_);
  return cache_.try_emplace(key, std::move(manifest)).first->second;
}

std::shared_ptr<const TableManifest> Catalog::Publish(TableManifest manifest) {
  const fs::path path = TableDir(manifest.namespace_name, manifest.table) / "manifest.json";
  WriteFileAtomically(path, manifest.ToJson().dump(2) + "\n");
  auto shared = std::make_shared<const TableManifest>(std::move(manifest));
  std::unique_lock lock(cache_mu_);
  cache_[shared->QualifiedName()] = shared;
  return shared;
}

DataFileMeta Catalog::WriteDataFile(const TableManifest& manifest, const ColumnarBatch& batch,
                                    size_t seq) const {
  if (batch.num_rows() == 0) throw InvalidArgument("refusing to write an empty data file");
  if (batch.schema() != manifest.schema) {
    throw TypeError("batch schema does not match table " + manifest.QualifiedName());
  }
  const std::string bytes = EncodeColumnFile(batch);
  char id[32];
  std::snprintf(id, sizeof(id), "f%06zu-%08x", seq, Crc32(bytes));
  DataFileMeta meta;
  meta.file_id = id;
  meta.path = "data/" + meta.file_id + std::string(kColumnFileExtension);
  const ColumnFileLayout layout =
      WriteEncodedColumnFile(TableDir(manifest.namespace_name, manifest.table) / meta.path, bytes);
  meta.row_count = layout.rows;
  meta.total_bytes = layout.file_bytes;
  meta.columns = ComputeStats(batch);
  return meta;
}

std::shared_ptr<const TableManifest> Catalog::CreateTable(std::string_view ns,
                                                          std::string_view table,
                                                          const Schema& schema,
                                                          std::span<const ColumnarBatch> files,
                                                          uint64_t seed) {
  std::lock_guard commit(commit_mu_);
  const fs::path dir = TableDir(ns, table);
  std::error_code ec;
  fs::remove_all(dir, ec);
  fs::create_directories(dir / "data", ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  TableManifest m;
  m.namespace_name = std::string(ns);
  m.table = std::string(table);
  m.schema = schema;
  m.seed = seed;
  SnapshotEntry snap{"snap-0001", {}};
  for (const ColumnarBatch& batch : files) {
    if (batch.num_rows() == 0) continue;
    m.files.push_back(WriteDataFile(m, batch, m.files.size() + 1));
    snap.file_ids.push_back(m.files.back().file_id);
  }
  m.snapshots.push_back(std::move(snap));
  return Publish(std::move(m));
}

std::string Catalog::CommitSnapshot(std::string_view ns, std::string_view table,
                                    std::span<const ColumnarBatch> add,
                                    std::span<const std::string> remove) {
  std::lock_guard commit(commit_mu_);
  {
    // Re-read so commits from other Catalog instances are not lost.
    std::unique_lock lock(cache_mu_);
    cache_.erase(Key(ns, table));
  }
  TableManifest m = *Load(ns, table);
  std::vector<std::string> ids = m.snapshots.back().file_ids;
  for (const std::string& id : remove) {
    auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) {
      throw NotFoundError("cannot remove '" + id + "': not in the latest snapshot");
    }
    ids.erase(it);
  }
  for (const ColumnarBatch& batch : add) {
    m.files.push_back(WriteDataFile(m, batch, m.files.size() + 1));
    ids.push_back(m.files.back().file_id);
  }
  char sid[32];
  std::snprintf(sid, sizeof(sid), "snap-%04zu", m.snapshots.size() + 1);
  m.snapshots.push_back({sid, std::move(ids)});
  Publish(std::move(m));
  return sid;
}

fs::path Catalog::DataPath(const TableManifest& manifest, const DataFileMeta& file) const {
  return TableDir(manifest.namespace_name, manifest.table) / file.path;
}

ScanResult Catalog::ReadScan(const TableManifest& manifest, std::string_view snapshot_id,
                             std::span<const std::string> projections, const Predicate& p,
                             std::span<const std::string> extra_columns) const {
  std::vector<std::string> out_cols;
  std::set<std::string, std::less<>> projected;
  for (const auto& c : projections) {
    GetField(manifest.schema, c);
    if (projected.insert(c).second) out_cols.push_back(c);
  }
  for (const auto& c : extra_columns) {
    GetField(manifest.schema, c);
    if (std::find(out_cols.begin(), out_cols.end(), c) == out_cols.end()) out_cols.push_back(c);
  }
  std::vector<std::string> read_cols = out_cols;
  if (!p.opaque()) {
    for (const auto& c : p.Columns()) {
      GetField(manifest.schema, c);
      if (std::find(read_cols.begin(), read_cols.end(), c) == read_cols.end()) {
        read_cols.push_back(c);
      }
    }
  }

  Schema out_schema;
  for (const auto& c : out_cols) out_schema.push_back(GetField(manifest.schema, c));
  ScanResult result{ColumnarBatch(std::move(out_schema)), {}};
  result.stats.filter_applied = !p.opaque();
  for (const DataFileMeta* f : PruneFiles(manifest, snapshot_id, p)) {
    ColumnarBatch data = ReadColumnFile(DataPath(manifest, *f), read_cols);
    if (data.num_rows() != f->row_count) {
      throw CorruptionError(f->file_id + ": row count differs from manifest");
    }
    for (const auto& c : read_cols) {
      const uint64_t bytes = f->Stats(c).chunk_bytes;
      (projected.count(c) ? result.stats.bytes_read : result.stats.filter_bytes_read) += bytes;
    }
    ++result.stats.files_scanned;
    result.stats.file_ids.push_back(f->file_id);
    if (!p.opaque() && !p.IsTrue()) data = data.Filter(FilterMask(p, data));
    result.batch.Append(data.Project(out_cols));
  }
  result.stats.rows_returned = result.batch.num_rows();
  return result;
}

}  // namespace dcache
