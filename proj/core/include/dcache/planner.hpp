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

#include <optional>
#include <string>
#include <vector>

#include "dcache/cache.hpp"
#include "dcache/catalog.hpp"
#include "dcache/predicate.hpp"

namespace dcache {

struct ScanRequest {
  std::string namespace_name;
  std::string table;
  // Empty binds to the latest snapshot at plan time.
  std::string snapshot_id;
  std::vector<std::string> projections;
  Predicate filter = Predicate::True();
  // Request exactly as submitted; the result-cache baseline keys on it.
  std::string raw_text;

  // Parses `filter_text` (empty means TRUE) against `schema` and checks the
  // projections. Throws on unknown columns or an empty projection list.
  static ScanRequest Make(std::string namespace_name, std::string table,
                          std::string snapshot_id, std::vector<std::string> projections,
                          std::string_view filter_text, const Schema& schema);

  std::string QualifiedName() const { return namespace_name + "." + table; }
  // Normalized scan identity: sorted projections and canonical filter text.
  std::string ScanKey(std::string_view resolved_snapshot) const;
};

struct ResidualScan {
  std::vector<std::string> projections;
  Predicate filter = Predicate::False();
};

struct ScanPlan {
  // Snapshot always resolved.
  ScanRequest request;
  std::vector<CachePlanStep> cache_steps;
  std::optional<ResidualScan> residual;
  uint64_t estimated_residual_bytes = 0;
  std::vector<uint64_t> cost_trace;
};

// Consults the cache store for the request and leaves the uncovered part as
// the residual storage scan. A residual that prunes to no files is dropped.
ScanPlan PlanScan(const ScanRequest& request, const CacheStore& store,
                  const TableManifest& manifest);

// Line-oriented rendering:
//
//   scan <ns>.<table>@<snapshot> [<col>, ...]
//     filter   <predicate>
//     cache    <element_id> refilter <predicate>      (one per step)
//     residual <predicate> (est <n> bytes)             or: residual none (est 0 bytes)
std::string Explain(const ScanPlan& plan);

}  // namespace dcache
