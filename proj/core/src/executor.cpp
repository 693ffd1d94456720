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

#include "dcache/executor.hpp"

#include <algorithm>
#include <set>

#include "dcache/errors.hpp"

namespace dcache {
namespace {

constexpr int kMaxReplans = 8;

std::vector<std::string> ToVector(const std::set<std::string>& s) { return {s.begin(), s.end()}; }

}  // namespace

ExecutionResult Execute(const ScanPlan& plan, CacheStore& store, const Catalog& catalog,
                        const ExecutorOptions& options) {
  const ScanRequest& req = plan.request;
  const auto manifest = catalog.Load(req.namespace_name, req.table);
  const std::string& snap = manifest->Snapshot(req.snapshot_id).snapshot_id;

  // Columns a stored element keeps: projections plus request filter columns.
  std::set<std::string> keep(req.projections.begin(), req.projections.end());
  if (!req.filter.opaque()) {
    for (const auto& c : req.filter.Columns()) keep.insert(c);
  }
  const std::vector<std::string> keep_cols = ToVector(keep);

  ExecutionResult result;
  ExecutionMetrics& m = result.metrics;
  Schema out_schema;
  for (const auto& c : req.projections) out_schema.push_back(GetField(manifest->schema, c));
  result.batch = ColumnarBatch(out_schema);

  std::vector<ColumnarBatch> parts;
  bool parts_hold_keep = true;
  for (const CachePlanStep& step : plan.cache_steps) {
    ElementPtr e = store.Find(step.element_id);
    if (!e) throw ElementEvicted("cache element " + step.element_id + " was evicted");
    store.Touch(*e);
    const ColumnarBatch& frag = *e->fragment;
    ColumnarBatch part = step.refilter.IsTrue() ? frag : frag.Filter(FilterMask(step.refilter, frag));
    m.cache_bytes_served += e->fragment_bytes;
    ++m.cache_elements_used;
    result.batch.Append(part.Project(req.projections));
    if (e->Stores(keep)) {
      parts.push_back(part.Project(keep_cols));
    } else {
      parts_hold_keep = false;
    }
  }

  std::optional<ScanResult> residual;
  if (plan.residual) {
    std::set<std::string> extra = keep;
    if (!plan.residual->filter.opaque()) {
      for (const auto& c : plan.residual->filter.Columns()) extra.insert(c);
    }
    const std::vector<std::string> extra_cols = ToVector(extra);
    residual = catalog.ReadScan(*manifest, snap, plan.residual->projections,
                                plan.residual->filter, extra_cols);
    m.storage_bytes_read = residual->stats.bytes_read;
    m.filter_bytes_read = residual->stats.filter_bytes_read;
    m.files_scanned = residual->stats.files_scanned;
    m.residual_was_empty = residual->stats.files_scanned == 0;
    result.batch.Append(residual->batch.Project(req.projections));
  }
  m.rows_out = result.batch.num_rows();

  if (!options.store_results) return result;
  if (!plan.residual && plan.cache_steps.size() <= 1) return result;

  std::shared_ptr<CacheElement> element;
  if (parts_hold_keep && !req.filter.opaque()) {
    // Whole result under the request filter.
    Schema keep_schema;
    for (const auto& c : keep_cols) keep_schema.push_back(GetField(manifest->schema, c));
    ColumnarBatch combined(std::move(keep_schema));
    for (const auto& p : parts) combined.Append(p);
    if (residual) combined.Append(residual->batch.Project(keep_cols));
    std::vector<std::string> files;
    for (const DataFileMeta* f : PruneFiles(*manifest, snap, req.filter)) files.push_back(f->file_id);
    element = store.MakeElement(req.namespace_name, req.table, req.projections, req.filter, snap,
                                std::move(files), std::move(combined));
  } else if (residual) {
    element = store.MakeElement(req.namespace_name, req.table, req.projections,
                                plan.residual->filter, snap, residual->stats.file_ids,
                                residual->batch);
  }
  if (element) {
    m.stored_element_id = element->element_id;
    InsertReport report = store.Insert(std::move(element));
    m.evicted = std::move(report.evicted);
  }
  return result;
}

ExecutionResult ExecuteRequest(const ScanRequest& request, CacheStore& store,
                               const Catalog& catalog, ScanPlan* plan_out,
                               const ExecutorOptions& options) {
  for (int attempt = 0;; ++attempt) {
    const auto manifest = catalog.Load(request.namespace_name, request.table);
    ScanPlan plan = PlanScan(request, store, *manifest);
    try {
      ExecutionResult r = Execute(plan, store, catalog, options);
      if (plan_out) *plan_out = std::move(plan);
      return r;
    } catch (const ElementEvicted&) {
      if (attempt + 1 >= kMaxReplans) throw;
    }
  }
}

ColumnarBatch OracleScan(const ScanRequest& request, const Catalog& catalog) {
  const auto manifest = catalog.Load(request.namespace_name, request.table);
  std::vector<std::string> all;
  for (const Field& f : manifest->schema) all.push_back(f.name);
  ColumnarBatch table =
      catalog.ReadScan(*manifest, request.snapshot_id, all, Predicate::True()).batch;
  if (!request.filter.opaque()) table = table.Filter(FilterMask(request.filter, table));
  return table.Project(request.projections);
}

}  // namespace dcache
