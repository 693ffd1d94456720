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
#include <string>
#include <vector>

#include "dcache/cache.hpp"
#include "dcache/catalog.hpp"
#include "dcache/planner.hpp"

namespace dcache {

struct ExecutionMetrics {
  // Projected column chunk bytes read from storage by the residual scan.
  uint64_t storage_bytes_read = 0;
  // Filter-only column chunk bytes read alongside.
  uint64_t filter_bytes_read = 0;
  // Fragment bytes of every element the plan touched, before refiltering.
  uint64_t cache_bytes_served = 0;
  size_t cache_elements_used = 0;
  bool residual_was_empty = true;
  uint64_t files_scanned = 0;
  uint64_t rows_out = 0;
  // Element stored for this scan, if any, and what its insertion evicted.
  std::string stored_element_id;
  std::vector<std::string> evicted;
};

struct ExecutionResult {
  ColumnarBatch batch;
  ExecutionMetrics metrics;
};

struct ExecutorOptions {
  bool store_results = true;
};

// Serves the cache steps, runs the residual scan, and concatenates the parts
// in plan order. Output row order is deterministic but not part of the
// contract. Unless disabled, the full result of a scan that touched storage
// or combined several elements becomes a new cache element.
// Throws ElementEvicted when a planned element is no longer in the store.
ExecutionResult Execute(const ScanPlan& plan, CacheStore& store, const Catalog& catalog,
                        const ExecutorOptions& options = {});

// Plans and executes, re-planning when an element is evicted in between.
ExecutionResult ExecuteRequest(const ScanRequest& request, CacheStore& store,
                               const Catalog& catalog, ScanPlan* plan_out = nullptr,
                               const ExecutorOptions& options = {});

// Filter-then-project over every row of the snapshot, bypassing the cache.
// Opaque filters return all rows.
ColumnarBatch OracleScan(const ScanRequest& request, const Catalog& catalog);

}  // namespace dcache
