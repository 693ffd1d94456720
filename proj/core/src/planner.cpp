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

#include "dcache/planner.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "dcache/errors.hpp"

namespace dcache {
namespace {

std::string Join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace

ScanRequest ScanRequest::Make(std::string namespace_name, std::string table,
                              std::string snapshot_id, std::vector<std::string> projections,
                              std::string_view filter_text, const Schema& schema) {
  if (projections.empty()) throw InvalidArgument("a scan needs at least one projected column");
  std::set<std::string> seen;
  for (const auto& c : projections) {
    GetField(schema, c);
    if (!seen.insert(c).second) throw InvalidArgument("column '" + c + "' projected twice");
  }
  ScanRequest r;
  r.namespace_name = std::move(namespace_name);
  r.table = std::move(table);
  r.snapshot_id = std::move(snapshot_id);
  r.projections = std::move(projections);
  r.filter = filter_text.empty() ? Predicate::True() : ParsePredicate(filter_text, schema);
  r.raw_text = r.QualifiedName() + "@" + r.snapshot_id + "|" + Join(r.projections, ",") + "|" +
               std::string(filter_text);
  return r;
}

std::string ScanRequest::ScanKey(std::string_view resolved_snapshot) const {
  std::vector<std::string> cols = projections;
  std::sort(cols.begin(), cols.end());
  return QualifiedName() + "@" + std::string(resolved_snapshot) + "|" + Join(cols, ",") + "|" +
         filter.ToString();
}

ScanPlan PlanScan(const ScanRequest& request, const CacheStore& store,
                  const TableManifest& manifest) {
  if (manifest.namespace_name != request.namespace_name || manifest.table != request.table) {
    throw InvalidArgument("manifest of " + manifest.QualifiedName() + " does not match " +
                          request.QualifiedName());
  }
  if (request.projections.empty()) throw InvalidArgument("a scan needs at least one projected column");
  for (const auto& c : request.projections) GetField(manifest.schema, c);

  ScanPlan plan;
  plan.request = request;
  plan.request.snapshot_id = manifest.Snapshot(request.snapshot_id).snapshot_id;
  const std::string& snap = plan.request.snapshot_id;

  const auto candidates = store.Candidates(request.namespace_name, request.table, snap,
                                           request.projections, manifest);
  const CostFn cost = [&](const Predicate& p) {
    return EstimateScanBytes(manifest, snap, request.projections, p);
  };
  CachePlan cache_plan = ApplyCache(request.filter, candidates, cost, request.projections,
                                    store.config().max_subtract_boxes);
  plan.cache_steps = std::move(cache_plan.steps);
  plan.cost_trace = std::move(cache_plan.cost_trace);
  const Predicate& rest = cache_plan.residual_filter;
  if (!rest.IsFalse() && !PruneFiles(manifest, snap, rest).empty()) {
    plan.residual = ResidualScan{request.projections, rest};
    plan.estimated_residual_bytes = cache_plan.residual_cost;
  }
  return plan;
}

std::string Explain(const ScanPlan& plan) {
  std::ostringstream out;
  out << "scan " << plan.request.QualifiedName() << "@" << plan.request.snapshot_id << " ["
      << Join(plan.request.projections, ", ") << "]\n";
  out << "  filter   " << plan.request.filter.ToString() << "\n";
  for (const auto& step : plan.cache_steps) {
    out << "  cache    " << step.element_id << " refilter " << step.refilter.ToString() << "\n";
  }
  if (plan.residual) {
    out << "  residual " << plan.residual->filter.ToString() << " (est "
        << plan.estimated_residual_bytes << " bytes)\n";
  } else {
    out << "  residual none (est 0 bytes)\n";
  }
  return out.str();
}

}  // namespace dcache
