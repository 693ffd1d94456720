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

#include "dcache/cache.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>

#include <nlohmann/json.hpp>

#include "dcache/column_file.hpp"
#include "dcache/errors.hpp"

namespace dcache {
namespace {

using nlohmann::json;

bool Covers(const std::vector<std::string>& sorted_superset, std::span<const std::string> items) {
  for (const auto& c : items) {
    if (!std::binary_search(sorted_superset.begin(), sorted_superset.end(), c)) return false;
  }
  return true;
}

std::vector<std::string> SortedUnique(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

bool Mergeable(const CacheElement& a, const CacheElement& b) {
  return a.namespace_name == b.namespace_name && a.table == b.table &&
         a.projections == b.projections && a.stored_columns == b.stored_columns &&
         a.snapshot_id == b.snapshot_id && !a.filter.opaque() && !b.filter.opaque();
}

class LruPolicy : public EvictionPolicy {
 public:
  std::string_view name() const override { return "lru"; }
  std::vector<ElementPtr> Rank(std::vector<ElementPtr> elements) const override {
    std::sort(elements.begin(), elements.end(), [](const ElementPtr& a, const ElementPtr& b) {
      const uint64_t ua = a->last_used.load(std::memory_order_relaxed);
      const uint64_t ub = b->last_used.load(std::memory_order_relaxed);
      return ua != ub ? ua < ub : a->element_id < b->element_id;
    });
    return elements;
  }
};

}  // namespace

bool CacheElement::Stores(const std::set<std::string>& columns) const {
  for (const auto& c : columns) {
    if (!std::binary_search(stored_columns.begin(), stored_columns.end(), c)) return false;
  }
  return true;
}

CachePlan ApplyCache(const Predicate& scan_filter, const std::vector<ElementPtr>& candidates,
                     const CostFn& cost_fn, std::span<const std::string> projections,
                     size_t max_boxes) {
  CachePlan plan;
  const std::vector<std::string> serve(projections.begin(), projections.end());
  plan.residual_filter = scan_filter;
  plan.residual_cost = cost_fn(scan_filter);
  plan.cost_trace.push_back(plan.residual_cost);

  if (scan_filter.opaque()) {
    for (const ElementPtr& e : candidates) {
      if (e->filter.opaque() && e->filter == scan_filter) {
        plan.steps.push_back({e->element_id, e, Predicate::True(), serve});
        plan.residual_filter = Predicate::False();
        plan.residual_cost = 0;
        plan.cost_trace.push_back(0);
        break;
      }
    }
    return plan;
  }

  std::vector<bool> used(candidates.size(), false);
  while (!plan.residual_filter.IsFalse()) {
    size_t best = candidates.size();
    uint64_t best_cost = plan.residual_cost;
    Predicate best_residual = Predicate::False();
    Predicate best_refilter = Predicate::False();
    for (size_t i = 0; i < candidates.size(); ++i) {
      const CacheElement& e = *candidates[i];
      if (used[i] || e.filter.opaque() || !Intersects(plan.residual_filter, e.filter)) continue;
      Predicate refilter = Intersect(plan.residual_filter, e.filter);
      if (!e.Stores(refilter.Columns())) continue;
      std::optional<Predicate> residual = SubtractBounded(plan.residual_filter, e.filter, max_boxes);
      if (!residual) continue;
      const uint64_t cost = cost_fn(*residual);
      if (cost < best_cost) {
        best = i;
        best_cost = cost;
        best_residual = std::move(*residual);
        best_refilter = std::move(refilter);
      }
    }
    if (best == candidates.size()) break;
    used[best] = true;
    plan.steps.push_back(
        {candidates[best]->element_id, candidates[best], std::move(best_refilter), serve});
    plan.residual_filter = std::move(best_residual);
    plan.residual_cost = best_cost;
    plan.cost_trace.push_back(best_cost);
  }
  return plan;
}

bool IsValid(const CacheElement& element, const TableManifest& manifest,
             std::string_view snapshot_id) {
  const SnapshotEntry& snap = manifest.Snapshot(snapshot_id);
  const std::set<std::string_view> live(snap.file_ids.begin(), snap.file_ids.end());
  for (const auto& id : element.source_file_ids) {
    if (!live.count(id)) return false;
  }
  for (const DataFileMeta* f : PruneFiles(manifest, snap.snapshot_id, element.filter)) {
    if (!std::binary_search(element.source_file_ids.begin(), element.source_file_ids.end(),
                            f->file_id)) {
      return false;
    }
  }
  return true;
}

std::unique_ptr<EvictionPolicy> MakeEvictionPolicy(std::string_view name) {
  if (name == "lru") return std::make_unique<LruPolicy>();
  throw InvalidArgument("unknown eviction policy '" + std::string(name) + "'");
}

CacheStore::CacheStore(CacheConfig config)
    : config_(std::move(config)), policy_(MakeEvictionPolicy(config_.eviction_policy)) {}

std::string CacheStore::NextIdLocked() {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "e%06llu", static_cast<unsigned long long>(next_id_++));
  return buf;
}

std::shared_ptr<CacheElement> CacheStore::MakeElement(std::string namespace_name,
                                                      std::string table,
                                                      std::vector<std::string> projections,
                                                      Predicate filter, std::string snapshot_id,
                                                      std::vector<std::string> source_file_ids,
                                                      ColumnarBatch fragment) {
  auto e = std::make_shared<CacheElement>();
  {
    std::unique_lock lock(mu_);
    e->element_id = NextIdLocked();
  }
  e->namespace_name = std::move(namespace_name);
  e->table = std::move(table);
  e->projections = SortedUnique(std::move(projections));
  std::vector<std::string> stored;
  for (const Field& f : fragment.schema()) stored.push_back(f.name);
  e->stored_columns = SortedUnique(stored);
  if (e->stored_columns.size() != stored.size()) {
    throw InvalidArgument("fragment has duplicate columns");
  }
  if (!Covers(e->stored_columns, e->projections)) {
    throw InvalidArgument("fragment does not hold every projected column");
  }
  e->filter = std::move(filter);
  e->snapshot_id = std::move(snapshot_id);
  e->source_file_ids = SortedUnique(std::move(source_file_ids));
  e->fragment = std::make_shared<const ColumnarBatch>(fragment.Project(e->stored_columns));
  e->fragment_bytes = e->fragment->EncodedBytes();
  return e;
}

InsertReport CacheStore::Insert(std::shared_ptr<CacheElement> element) {
  InsertReport report;
  std::unique_lock lock(mu_);
  if (elements_.count(element->element_id)) {
    throw InvalidArgument("duplicate element id " + element->element_id);
  }
  const uint64_t now = clock_.fetch_add(1) + 1;
  element->created_at = now;
  element->last_used.store(now, std::memory_order_relaxed);
  const std::string id = element->element_id;
  const std::string ns = element->namespace_name;
  const std::string table = element->table;
  total_bytes_ += element->fragment_bytes;
  elements_.emplace(id, std::move(element));
  EnforceBudgetLocked(id, report);
  if (config_.merge_trigger == MergeTrigger::kOnInsert && elements_.count(id)) {
    report.merges = MergePassLocked(ns, table);
  }
  return report;
}

void CacheStore::EnforceBudgetLocked(const std::string& incoming, InsertReport& report) {
  if (total_bytes_ <= config_.byte_budget) return;
  std::vector<ElementPtr> others;
  for (const auto& [id, e] : elements_) {
    if (id != incoming) others.push_back(e);
  }
  for (const ElementPtr& victim : policy_->Rank(std::move(others))) {
    if (total_bytes_ <= config_.byte_budget) return;
    total_bytes_ -= victim->fragment_bytes;
    report.evicted.push_back(victim->element_id);
    elements_.erase(victim->element_id);
  }
  if (total_bytes_ > config_.byte_budget) {
    total_bytes_ -= elements_.at(incoming)->fragment_bytes;
    elements_.erase(incoming);
    report.evicted.push_back(incoming);
  }
}

std::vector<ElementPtr> CacheStore::Candidates(std::string_view namespace_name,
                                               std::string_view table,
                                               std::string_view snapshot_id,
                                               std::span<const std::string> projections,
                                               const TableManifest& manifest) const {
  std::vector<ElementPtr> out;
  {
    std::shared_lock lock(mu_);
    for (const auto& [id, e] : elements_) {
      if (e->namespace_name != namespace_name || e->table != table) continue;
      if (!Covers(e->projections, projections)) continue;
      out.push_back(e);
    }
  }
  std::erase_if(out, [&](const ElementPtr& e) { return !IsValid(*e, manifest, snapshot_id); });
  std::sort(out.begin(), out.end(), [](const ElementPtr& a, const ElementPtr& b) {
    const uint64_t ua = a->last_used.load(std::memory_order_relaxed);
    const uint64_t ub = b->last_used.load(std::memory_order_relaxed);
    return ua != ub ? ua > ub : a->element_id < b->element_id;
  });
  return out;
}

ElementPtr CacheStore::Find(std::string_view element_id) const {
  std::shared_lock lock(mu_);
  auto it = elements_.find(element_id);
  return it == elements_.end() ? nullptr : it->second;
}

void CacheStore::Touch(const CacheElement& element) {
  element.last_used.store(clock_.fetch_add(1) + 1, std::memory_order_relaxed);
}

size_t CacheStore::MergePass(std::string_view namespace_name, std::string_view table) {
  std::unique_lock lock(mu_);
  return MergePassLocked(namespace_name, table);
}

size_t CacheStore::MergePassLocked(std::string_view namespace_name, std::string_view table) {
  size_t merges = 0;
  for (bool changed = true; changed;) {
    changed = false;
    std::vector<ElementPtr> group;
    for (const auto& [id, e] : elements_) {
      if (e->namespace_name == namespace_name && e->table == table && !e->filter.opaque()) {
        group.push_back(e);
      }
    }
    for (size_t i = 0; i < group.size() && !changed; ++i) {
      for (size_t j = i + 1; j < group.size() && !changed; ++j) {
        const CacheElement& a = *group[i];
        const CacheElement& b = *group[j];
        if (!Mergeable(a, b)) continue;
        std::optional<Predicate> merged = TryMerge(a.filter, b.filter);
        if (!merged) continue;
        const Predicate b_only = Subtract(b.filter, a.filter);
        if (!a.Stores(b_only.Columns())) continue;

        ColumnarBatch fragment = *a.fragment;
        fragment.Append(b.fragment->Filter(FilterMask(b_only, *b.fragment)));
        std::vector<std::string> files = a.source_file_ids;
        files.insert(files.end(), b.source_file_ids.begin(), b.source_file_ids.end());

        auto e = std::make_shared<CacheElement>();
        e->element_id = NextIdLocked();
        e->namespace_name = a.namespace_name;
        e->table = a.table;
        e->projections = a.projections;
        e->stored_columns = a.stored_columns;
        e->filter = std::move(*merged);
        e->snapshot_id = a.snapshot_id;
        e->source_file_ids = SortedUnique(std::move(files));
        e->fragment = std::make_shared<const ColumnarBatch>(std::move(fragment));
        e->fragment_bytes = e->fragment->EncodedBytes();
        e->created_at = clock_.fetch_add(1) + 1;
        e->last_used.store(std::max(a.last_used.load(std::memory_order_relaxed),
                                    b.last_used.load(std::memory_order_relaxed)),
                           std::memory_order_relaxed);

        total_bytes_ = total_bytes_ - a.fragment_bytes - b.fragment_bytes + e->fragment_bytes;
        const std::string ida = a.element_id, idb = b.element_id;
        elements_.erase(ida);
        elements_.erase(idb);
        elements_.emplace(e->element_id, std::move(e));
        ++merges;
        changed = true;
      }
    }
  }
  return merges;
}

std::vector<std::string> CacheStore::InvalidateStale(const TableManifest& manifest,
                                                     std::string_view snapshot_id) {
  std::unique_lock lock(mu_);
  std::vector<std::string> removed;
  for (auto it = elements_.begin(); it != elements_.end();) {
    const CacheElement& e = *it->second;
    if (e.namespace_name == manifest.namespace_name && e.table == manifest.table &&
        !IsValid(e, manifest, snapshot_id)) {
      removed.push_back(e.element_id);
      total_bytes_ -= e.fragment_bytes;
      it = elements_.erase(it);
    } else {
      ++it;
    }
  }
  return removed;
}

std::vector<std::string> CacheStore::Evict(std::span<const std::string> element_ids) {
  std::unique_lock lock(mu_);
  std::vector<std::string> removed;
  for (const auto& id : element_ids) {
    auto it = elements_.find(id);
    if (it == elements_.end()) continue;
    total_bytes_ -= it->second->fragment_bytes;
    elements_.erase(it);
    removed.push_back(id);
  }
  return removed;
}

std::vector<ElementPtr> CacheStore::Elements() const {
  std::shared_lock lock(mu_);
  std::vector<ElementPtr> out;
  for (const auto& [id, e] : elements_) out.push_back(e);
  return out;
}

size_t CacheStore::size() const {
  std::shared_lock lock(mu_);
  return elements_.size();
}

uint64_t CacheStore::total_bytes() const {
  std::shared_lock lock(mu_);
  return total_bytes_;
}

void CacheStore::Save(const std::filesystem::path& root) const {
  namespace fs = std::filesystem;
  const fs::path dir = root / "_cache";
  fs::create_directories(dir / "fragments");
  json index = json::array();
  std::set<std::string> keep;
  for (const ElementPtr& e : Elements()) {
    const std::string rel = "fragments/" + e->element_id + std::string(kColumnFileExtension);
    const fs::path path = dir / rel;
    if (!fs::exists(path)) WriteColumnFile(path, *e->fragment);
    keep.insert(path.filename().string());
    index.push_back({{"element_id", e->element_id},
                     {"namespace", e->namespace_name},
                     {"table", e->table},
                     {"projections", e->projections},
                     {"stored_columns", e->stored_columns},
                     {"filter_text", e->filter.ToString()},
                     {"snapshot_id", e->snapshot_id},
                     {"source_file_ids", e->source_file_ids},
                     {"fragment_path", rel},
                     {"fragment_bytes", e->fragment_bytes},
                     {"created_at", e->created_at},
                     {"last_used", e->last_used.load(std::memory_order_relaxed)}});
  }
  for (const auto& entry : fs::directory_iterator(dir / "fragments")) {
    if (!keep.count(entry.path().filename().string())) fs::remove(entry.path());
  }
  const fs::path tmp = dir / "cache_index.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << index.dump(2) << "\n";
  }
  fs::rename(tmp, dir / "cache_index.json");
}

void CacheStore::Load(const std::filesystem::path& root, const Catalog& catalog) {
  const std::filesystem::path dir = root / "_cache";
  std::ifstream in(dir / "cache_index.json");
  if (!in) {
    std::unique_lock lock(mu_);
    elements_.clear();
    total_bytes_ = 0;
    return;
  }
  json index;
  try {
    index = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed cache index: ") + e.what());
  }
  std::map<std::string, std::shared_ptr<const CacheElement>, std::less<>> loaded;
  uint64_t bytes = 0, max_id = 0, max_clock = 0;
  try {
    for (const auto& j : index) {
      auto e = std::make_shared<CacheElement>();
      e->element_id = j.at("element_id").get<std::string>();
      e->namespace_name = j.at("namespace").get<std::string>();
      e->table = j.at("table").get<std::string>();
      e->projections = j.at("projections").get<std::vector<std::string>>();
      e->stored_columns = j.value("stored_columns", e->projections);
      const auto manifest = catalog.Load(e->namespace_name, e->table);
      e->filter = ParsePredicate(j.at("filter_text").get<std::string>(), manifest->schema);
      e->snapshot_id = j.value("snapshot_id", "");
      e->source_file_ids = j.at("source_file_ids").get<std::vector<std::string>>();
      e->fragment = std::make_shared<const ColumnarBatch>(
          ReadColumnFile(dir / j.at("fragment_path").get<std::string>(), e->stored_columns));
      e->fragment_bytes = j.at("fragment_bytes").get<uint64_t>();
      if (e->fragment->EncodedBytes() != e->fragment_bytes) {
        throw CorruptionError("fragment size mismatch for " + e->element_id);
      }
      e->created_at = j.at("created_at").get<uint64_t>();
      e->last_used.store(j.at("last_used").get<uint64_t>());
      bytes += e->fragment_bytes;
      max_clock = std::max({max_clock, e->created_at, e->last_used.load()});
      if (e->element_id.size() > 1) {
        max_id = std::max<uint64_t>(max_id, std::stoull(e->element_id.substr(1)));
      }
      loaded.emplace(e->element_id, std::move(e));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed cache index: ") + e.what());
  }
  std::unique_lock lock(mu_);
  elements_ = std::move(loaded);
  total_bytes_ = bytes;
  next_id_ = max_id + 1;
  clock_.store(max_clock);
}

}  // namespace dcache
