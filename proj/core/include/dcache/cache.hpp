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

// Differential scan cache.
//
// Each element is the materialized result of one earlier scan: the rows
// satisfying `filter`, holding the requested projections plus any filter
// columns needed to re-filter the fragment later. Elements are immutable once
// published and shared by handle.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

#include "dcache/catalog.hpp"
#include "dcache/columnar.hpp"
#include "dcache/predicate.hpp"

namespace dcache {

struct CacheElement {
  std::string element_id;
  std::string namespace_name;
  std::string table;
  // Columns the element may serve, sorted.
  std::vector<std::string> projections;
  // Columns physically held by the fragment (projections plus filter
  // columns), sorted; the fragment holds them in this order.
  std::vector<std::string> stored_columns;
  Predicate filter = Predicate::False();
  // Snapshot the creating scan read, and the files it read after pruning.
  std::string snapshot_id;
  std::vector<std::string> source_file_ids;
  std::shared_ptr<const ColumnarBatch> fragment;
  uint64_t fragment_bytes = 0;
  uint64_t created_at = 0;
  // Relaxed: concurrent readers may observe a slightly stale order.
  mutable std::atomic<uint64_t> last_used{0};

  bool Stores(const std::set<std::string>& columns) const;
};

using ElementPtr = std::shared_ptr<const CacheElement>;

struct CachePlanStep {
  std::string element_id;
  ElementPtr element;
  Predicate refilter = Predicate::False();
  std::vector<std::string> serve_projections;
};

struct CachePlan {
  std::vector<CachePlanStep> steps;
  Predicate residual_filter = Predicate::False();
  uint64_t residual_cost = 0;
  // Estimated residual cost before any element was applied, then after each
  // selected element.
  std::vector<uint64_t> cost_trace;
};

using CostFn = std::function<uint64_t(const Predicate&)>;

// Greedy cache application. Candidates are considered in the given order,
// which breaks ties between equal costs. Elements whose subtraction exceeds
// `max_boxes` or whose fragment lacks a refilter column are skipped.
CachePlan ApplyCache(const Predicate& scan_filter, const std::vector<ElementPtr>& candidates,
                     const CostFn& cost_fn, std::span<const std::string> projections = {},
                     size_t max_boxes = 64);

// True iff every source file is live in the snapshot and no other live file
// could hold rows matching the element's filter.
bool IsValid(const CacheElement& element, const TableManifest& manifest,
             std::string_view snapshot_id);

enum class MergeTrigger { kOnInsert, kManual };

struct CacheConfig {
  uint64_t byte_budget = uint64_t{1} << 30;
  MergeTrigger merge_trigger = MergeTrigger::kOnInsert;
  std::string eviction_policy = "lru";
  size_t max_subtract_boxes = 64;
};

class EvictionPolicy {
 public:
  virtual ~EvictionPolicy() = default;
  virtual std::string_view name() const = 0;
  // Orders eviction candidates, first victim first.
  virtual std::vector<ElementPtr> Rank(std::vector<ElementPtr> elements) const = 0;
};

// Known names: "lru".
std::unique_ptr<EvictionPolicy> MakeEvictionPolicy(std::string_view name);

struct InsertReport {
  std::vector<std::string> evicted;
  size_t merges = 0;
};

class CacheStore {
 public:
  explicit CacheStore(CacheConfig config = {});

  const CacheConfig& config() const { return config_; }

  // Assembles an element with a fresh id. Every fragment column is stored;
  // the fragment must hold all projections.
  std::shared_ptr<CacheElement> MakeElement(std::string namespace_name, std::string table,
                                            std::vector<std::string> projections,
                                            Predicate filter, std::string snapshot_id,
                                            std::vector<std::string> source_file_ids,
                                            ColumnarBatch fragment);

  // Throws InvalidArgument on a duplicate element id.
  InsertReport Insert(std::shared_ptr<CacheElement> element);

  // Valid elements of the table whose projections cover `projections`, most
  // recently used first, then by element id.
  std::vector<ElementPtr> Candidates(std::string_view namespace_name, std::string_view table,
                                     std::string_view snapshot_id,
                                     std::span<const std::string> projections,
                                     const TableManifest& manifest) const;

  ElementPtr Find(std::string_view element_id) const;
  void Touch(const CacheElement& element);

  size_t MergePass(std::string_view namespace_name, std::string_view table);
  std::vector<std::string> InvalidateStale(const TableManifest& manifest,
                                           std::string_view snapshot_id);
  std::vector<std::string> Evict(std::span<const std::string> element_ids);

  std::vector<ElementPtr> Elements() const;
  size_t size() const;
  uint64_t total_bytes() const;

  // <root>/_cache/cache_index.json plus one column file per fragment.
  void Save(const std::filesystem::path& root) const;
  // Replaces the store contents with a saved index. Filters are re-parsed
  // against the catalog's table schemas.
  void Load(const std::filesystem::path& root, const Catalog& catalog);

 private:
  size_t MergePassLocked(std::string_view namespace_name, std::string_view table);
  void EnforceBudgetLocked(const std::string& incoming, InsertReport& report);
  std::string NextIdLocked();

  CacheConfig config_;
  std::unique_ptr<EvictionPolicy> policy_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<const CacheElement>, std::less<>> elements_;
  uint64_t total_bytes_ = 0;
  uint64_t next_id_ = 1;
  std::atomic<uint64_t> clock_{0};
};

}  // namespace dcache
