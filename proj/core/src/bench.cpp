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

#include "dcache/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dcache/column_file.hpp"
#include "dcache/errors.hpp"
#include "dcache/executor.hpp"
#include "dcache/random.hpp"

namespace dcache {
namespace {

using nlohmann::json;

const std::vector<std::string> kValueColumns = {"c1", "c2", "c3"};

struct DayRange {
  int64_t lo;
  int64_t hi;
};

std::string BetweenText(const DayRange& r) {
  return "eventTime BETWEEN " + FormatDate(r.lo) + " AND " + FormatDate(r.hi);
}

std::vector<std::string> RandomSubset(Rng& rng) {
  std::vector<std::string> out;
  while (out.empty()) {
    for (const auto& c : kValueColumns) {
      if (rng.Bernoulli(0.5)) out.push_back(c);
    }
  }
  return out;
}

std::vector<TraceEntry> Motivating(const WorkloadParams& p) {
  const std::string y = std::to_string(p.year);
  auto entry = [&](uint64_t seq, std::vector<std::string> cols, std::string filter) {
    TraceEntry e;
    e.seq = seq;
    e.namespace_name = p.namespace_name;
    e.table = p.table;
    e.projections = std::move(cols);
    e.filter = std::move(filter);
    return e;
  };
  return {
      entry(1, {"c1", "c2", "c3"}, "eventTime BETWEEN " + y + "-01-01 AND " + y + "-02-01"),
      entry(2, {"c1", "c3"}, "eventTime BETWEEN " + y + "-01-01 AND " + y + "-03-01"),
      entry(3, {"c2"}, "eventTime BETWEEN " + y + "-01-01 AND " + y + "-01-02"),
  };
}

std::vector<TraceEntry> RandomOverlap(const WorkloadParams& p, Rng& rng) {
  const int64_t first = ParseDate(std::to_string(p.year) + "-01-01");
  const int64_t last = ParseDate(std::to_string(p.year) + "-12-31");
  std::vector<TraceEntry> out;
  std::vector<DayRange> ranges;
  for (size_t k = 0; k < p.entries; ++k) {
    TraceEntry e;
    e.seq = k + 1;
    e.namespace_name = p.namespace_name;
    e.table = p.table;
    if (k > 0 && rng.Bernoulli(p.overlap * 0.25)) {
      // Exact repeat of an earlier request.
      const size_t j = rng.Index(k);
      e.projections = out[j].projections;
      e.filter = out[j].filter;
      ranges.push_back(ranges[j]);
      out.push_back(std::move(e));
      continue;
    }
    if (k > 0 && rng.Bernoulli(p.overlap * 0.15)) {
      // Same scan spelled differently: reversed projections, padded filter.
      const size_t j = rng.Index(k);
      e.projections.assign(out[j].projections.rbegin(), out[j].projections.rend());
      e.filter = "  " + out[j].filter + " ";
      if (e.projections == out[j].projections) e.filter = "(" + out[j].filter + ")";
      ranges.push_back(ranges[j]);
      out.push_back(std::move(e));
      continue;
    }
    DayRange r{};
    if (k > 0 && rng.Bernoulli(p.overlap)) {
      const DayRange base = ranges[rng.Index(k)];
      const int64_t len = base.hi - base.lo;
      switch (rng.UniformInt(0, 2)) {
        case 0:  // inside
          r.lo = base.lo + rng.UniformInt(0, len);
          r.hi = r.lo + rng.UniformInt(0, base.hi - r.lo);
          break;
        case 1:  // around
          r = {base.lo - rng.UniformInt(0, 45), base.hi + rng.UniformInt(0, 45)};
          break;
        default: {  // shifted
          const int64_t shift = rng.UniformInt(-len / 2 - 1, len / 2 + 1);
          r = {base.lo + shift, base.hi + shift};
        }
      }
    } else {
      r.lo = rng.UniformInt(first, last);
      r.hi = r.lo + rng.UniformInt(4, 120);
    }
    r.lo = std::clamp(r.lo, first, last);
    r.hi = std::clamp(r.hi, r.lo, last);
    e.projections = RandomSubset(rng);
    rng.Shuffle(e.projections);
    e.filter = BetweenText(r);
    if (rng.Bernoulli(0.15)) e.filter += " AND c1 < " + std::to_string(rng.UniformInt(20000, 99999));
    ranges.push_back(r);
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<TraceEntry> Nested(const WorkloadParams& p, Rng& rng) {
  const int64_t first = ParseDate(std::to_string(p.year) + "-01-01");
  const int64_t last = ParseDate(std::to_string(p.year) + "-12-31");
  const std::vector<std::string> cols = RandomSubset(rng);
  std::vector<TraceEntry> out;
  DayRange u{};
  for (size_t k = 0; k < p.entries; ++k) {
    DayRange r{};
    if (k == 0) {
      r.lo = rng.UniformInt(first, last - 10);
      r.hi = std::min(last, r.lo + rng.UniformInt(10, 90));
      u = r;
    } else if (rng.Bernoulli(0.5)) {
      r.lo = rng.UniformInt(u.lo, u.hi);
      r.hi = rng.UniformInt(r.lo, u.hi);
    } else {
      r = {std::max(first, u.lo - rng.UniformInt(0, 60)), std::min(last, u.hi + rng.UniformInt(0, 60))};
      u = r;
    }
    TraceEntry e;
    e.seq = k + 1;
    e.namespace_name = p.namespace_name;
    e.table = p.table;
    e.projections = cols;
    e.filter = BetweenText(r);
    out.push_back(std::move(e));
  }
  return out;
}

std::string Pad(const std::string& s, size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace

json TraceEntry::ToJson() const {
  json j = {{"seq", seq},
            {"namespace", namespace_name},
            {"table", table},
            {"projections", projections},
            {"filter", filter}};
  if (!snapshot_id.empty()) j["snapshot"] = snapshot_id;
  if (expected_rows) j["expected_rows"] = *expected_rows;
  return j;
}

TraceEntry TraceEntry::FromJson(const json& j) {
  TraceEntry e;
  e.seq = j.at("seq").get<uint64_t>();
  e.namespace_name = j.at("namespace").get<std::string>();
  e.table = j.at("table").get<std::string>();
  e.snapshot_id = j.value("snapshot", std::string());
  e.projections = j.at("projections").get<std::vector<std::string>>();
  e.filter = j.value("filter", std::string());
  if (j.contains("expected_rows")) e.expected_rows = j["expected_rows"].get<uint64_t>();
  return e;
}

ScanRequest TraceEntry::ToRequest(const Catalog& catalog) const {
  const auto manifest = catalog.Load(namespace_name, table);
  return ScanRequest::Make(namespace_name, table, snapshot_id, projections, filter, manifest->schema);
}

std::vector<TraceEntry> ParseTrace(std::string_view text) {
  std::vector<TraceEntry> out;
  std::set<uint64_t> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  for (size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    TraceEntry e;
    try {
      e = TraceEntry::FromJson(json::parse(line));
    } catch (const json::exception& ex) {
      throw ParseError("trace line " + std::to_string(lineno) + ": " + ex.what());
    }
    if (!seen.insert(e.seq).second) {
      throw ParseError("trace line " + std::to_string(lineno) + ": duplicate seq " +
                       std::to_string(e.seq));
    }
    out.push_back(std::move(e));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const TraceEntry& a, const TraceEntry& b) { return a.seq < b.seq; });
  return out;
}

std::string SerializeTrace(const std::vector<TraceEntry>& trace) {
  std::string out;
  for (const auto& e : trace) out += e.ToJson().dump() + "\n";
  return out;
}

std::vector<TraceEntry> ReadTraceFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trace " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseTrace(ss.str());
}

void WriteTraceFile(const std::filesystem::path& path, const std::vector<TraceEntry>& trace) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write trace " + path.string());
  out << SerializeTrace(trace);
  if (!out) throw IoError("write failed for " + path.string());
}

std::string_view ModeName(CacheMode mode) {
  switch (mode) {
    case CacheMode::kNone:
      return "none";
    case CacheMode::kResult:
      return "result";
    case CacheMode::kScan:
      return "scan";
    case CacheMode::kDiff:
      return "diff";
  }
  return "none";
}

CacheMode ParseMode(std::string_view name) {
  for (CacheMode m : {CacheMode::kNone, CacheMode::kResult, CacheMode::kScan, CacheMode::kDiff}) {
    if (ModeName(m) == name) return m;
  }
  throw InvalidArgument("unknown cache mode '" + std::string(name) + "'");
}

std::shared_ptr<const ColumnarBatch> ExactMatchCache::Lookup(const std::string& key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) return nullptr;
  lru_.splice(lru_.begin(), lru_, it->second.lru);
  return it->second.batch;
}

void ExactMatchCache::Insert(const std::string& key, std::shared_ptr<const ColumnarBatch> batch) {
  const uint64_t bytes = batch->EncodedBytes();
  if (auto it = entries_.find(key); it != entries_.end()) {
    bytes_ -= it->second.bytes;
    lru_.erase(it->second.lru);
    entries_.erase(it);
  }
  if (bytes > budget_) return;
  while (bytes_ + bytes > budget_) {
    auto victim = entries_.find(lru_.back());
    bytes_ -= victim->second.bytes;
    entries_.erase(victim);
    lru_.pop_back();
  }
  lru_.push_front(key);
  entries_[key] = Slot{std::move(batch), bytes, lru_.begin()};
  bytes_ += bytes;
}

json BenchReport::ToJson() const {
  json entries_json = json::array();
  for (const auto& e : entries) {
    json j = {{"seq", e.seq},
              {"storage_bytes", e.storage_bytes},
              {"cache_bytes", e.cache_bytes},
              {"hit_kind", e.hit_kind},
              {"rows", e.rows}};
    if (!e.cost_trace.empty()) j["cost_trace"] = e.cost_trace;
    entries_json.push_back(std::move(j));
  }
  json j = {{"mode", ModeName(mode)},
            {"totals",
             {{"storage_bytes", totals.storage_bytes},
              {"cache_bytes", totals.cache_bytes},
              {"hits", totals.hits},
              {"partial_hits", totals.partial_hits},
              {"misses", totals.misses}}},
            {"entries", std::move(entries_json)}};
  if (savings_vs) {
    j["savings_vs"] = {
        {"mode", savings_vs->mode}, {"pct", savings_vs->pct}, {"fraction", savings_vs->fraction}};
  }
  return j;
}

BenchReport BenchReport::FromJson(const json& j) {
  BenchReport r;
  try {
    r.mode = ParseMode(j.at("mode").get<std::string>());
    const json& t = j.at("totals");
    r.totals.storage_bytes = t.at("storage_bytes").get<uint64_t>();
    r.totals.cache_bytes = t.at("cache_bytes").get<uint64_t>();
    r.totals.hits = t.at("hits").get<uint64_t>();
    r.totals.partial_hits = t.value("partial_hits", uint64_t{0});
    r.totals.misses = t.at("misses").get<uint64_t>();
    for (const json& e : j.at("entries")) {
      EntryReport er;
      er.seq = e.at("seq").get<uint64_t>();
      er.storage_bytes = e.at("storage_bytes").get<uint64_t>();
      er.cache_bytes = e.at("cache_bytes").get<uint64_t>();
      er.hit_kind = e.at("hit_kind").get<std::string>();
      er.rows = e.value("rows", uint64_t{0});
      if (e.contains("cost_trace")) er.cost_trace = e["cost_trace"].get<std::vector<uint64_t>>();
      r.entries.push_back(std::move(er));
    }
    if (j.contains("savings_vs")) {
      const json& s = j["savings_vs"];
      r.savings_vs = Savings{s.at("mode").get<std::string>(), s.value("fraction", 0.0),
                             s.at("pct").get<double>()};
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string BenchReport::ToTable() const {
  std::ostringstream out;
  out << "mode " << ModeName(mode) << "\n";
  out << Pad("seq", 6) << Pad("storage_bytes", 16) << Pad("cache_bytes", 16) << "  hit_kind\n";
  for (const auto& e : entries) {
    out << Pad(std::to_string(e.seq), 6) << Pad(std::to_string(e.storage_bytes), 16)
        << Pad(std::to_string(e.cache_bytes), 16) << "  " << e.hit_kind << "\n";
  }
  out << Pad("total", 6) << Pad(std::to_string(totals.storage_bytes), 16)
      << Pad(std::to_string(totals.cache_bytes), 16) << "  hits=" << totals.hits
      << " partial=" << totals.partial_hits << " misses=" << totals.misses << "\n";
  if (savings_vs) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f%%", savings_vs->pct);
    out << "savings vs " << savings_vs->mode << ": " << buf << "\n";
  }
  return out.str();
}

BenchReport Replay(const std::vector<TraceEntry>& trace, CacheMode mode, const Catalog& catalog,
                   const CacheConfig& cache_config) {
  BenchReport report;
  report.mode = mode;
  CacheStore store(cache_config);
  ExactMatchCache exact(cache_config.byte_budget);

  std::vector<const TraceEntry*> order;
  for (const auto& e : trace) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(),
                   [](const TraceEntry* a, const TraceEntry* b) { return a->seq < b->seq; });

  for (const TraceEntry* entry : order) {
    const ScanRequest req = entry->ToRequest(catalog);
    const auto manifest = catalog.Load(req.namespace_name, req.table);
    const std::string snap = manifest->Snapshot(req.snapshot_id).snapshot_id;
    EntryReport er;
    er.seq = entry->seq;
    std::shared_ptr<const ColumnarBatch> batch;

    if (mode == CacheMode::kDiff) {
      ScanPlan plan;
      ExecutionResult r = ExecuteRequest(req, store, catalog, &plan);
      er.storage_bytes = r.metrics.storage_bytes_read;
      er.cache_bytes = r.metrics.cache_bytes_served;
      if (r.metrics.cache_elements_used > 0) er.hit_kind = plan.residual ? "partial" : "hit";
      er.cost_trace = plan.cost_trace;
      batch = std::make_shared<const ColumnarBatch>(std::move(r.batch));
    } else {
      std::string key;
      if (mode == CacheMode::kResult) key = req.raw_text + "#" + snap;
      if (mode == CacheMode::kScan) key = req.QualifiedName() + "#" + req.ScanKey(snap);
      if (mode != CacheMode::kNone) batch = exact.Lookup(key);
      if (batch) {
        er.hit_kind = "hit";
        er.cache_bytes = batch->EncodedBytes();
        // A scan-cache hit may come from a request with another column order.
        std::vector<std::string> names;
        for (const Field& f : batch->schema()) names.push_back(f.name);
        if (names != req.projections) {
          batch = std::make_shared<const ColumnarBatch>(batch->Project(req.projections));
        }
      } else {
        ScanResult r = catalog.ReadScan(*manifest, snap, req.projections, req.filter);
        er.storage_bytes = r.stats.bytes_read;
        batch = std::make_shared<const ColumnarBatch>(std::move(r.batch));
        if (mode != CacheMode::kNone) exact.Insert(key, batch);
      }
    }

    er.rows = batch->num_rows();
    er.digest = RowsDigest(*batch);
    if (entry->expected_rows && *entry->expected_rows != er.rows) {
      throw InvalidArgument("trace entry " + std::to_string(entry->seq) + " returned " +
                            std::to_string(er.rows) + " rows, expected " +
                            std::to_string(*entry->expected_rows));
    }
    report.totals.storage_bytes += er.storage_bytes;
    report.totals.cache_bytes += er.cache_bytes;
    if (er.hit_kind == "hit") ++report.totals.hits;
    if (er.hit_kind == "partial") ++report.totals.partial_hits;
    if (er.hit_kind == "miss") ++report.totals.misses;
    report.entries.push_back(std::move(er));
  }
  return report;
}

void AttachSavings(BenchReport& report, const BenchReport& baseline) {
  Savings s;
  s.mode = std::string(ModeName(baseline.mode));
  if (baseline.totals.storage_bytes > 0) {
    const double base = static_cast<double>(baseline.totals.storage_bytes);
    s.fraction = (base - static_cast<double>(report.totals.storage_bytes)) / base;
    s.pct = 100.0 * s.fraction;
  }
  report.savings_vs = s;
}

std::vector<TraceEntry> GenerateWorkload(std::string_view kind, const WorkloadParams& params,
                                         uint64_t seed) {
  Rng rng(seed);
  if (kind == "motivating") return Motivating(params);
  if (kind == "random-overlap") return RandomOverlap(params, rng);
  if (kind == "nested") return Nested(params, rng);
  throw InvalidArgument("unknown workload kind '" + std::string(kind) + "'");
}

double PairwiseOverlap(const std::vector<TraceEntry>& trace, const Catalog& catalog) {
  if (trace.size() < 2) return 0;
  std::vector<Predicate> filters;
  for (const auto& e : trace) filters.push_back(e.ToRequest(catalog).filter);
  size_t pairs = 0, overlapping = 0;
  for (size_t i = 0; i < filters.size(); ++i) {
    for (size_t j = i + 1; j < filters.size(); ++j) {
      ++pairs;
      const bool opaque = filters[i].opaque() || filters[j].opaque();
      overlapping += opaque || Intersects(filters[i], filters[j]);
    }
  }
  return static_cast<double>(overlapping) / static_cast<double>(pairs);
}

OptimalityResult VerifyOptimal(const std::vector<TraceEntry>& trace, const BenchReport& report,
                               const Catalog& catalog) {
  if (trace.size() > kMaxOptimalityEntries) {
    throw InvalidArgument("trace has " + std::to_string(trace.size()) +
                          " entries; optimality check supports at most " +
                          std::to_string(kMaxOptimalityEntries));
  }
  if (report.mode != CacheMode::kDiff) {
    throw InvalidArgument("optimality check needs a diff-mode report");
  }

  // Rows each earlier entry selected, per (table, file, column).
  std::map<std::string, std::vector<uint8_t>> covered;
  std::map<std::string, ColumnarBatch> files;
  OptimalityResult result;

  std::vector<const TraceEntry*> order;
  for (const auto& e : trace) order.push_back(&e);
  std::stable_sort(order.begin(), order.end(),
                   [](const TraceEntry* a, const TraceEntry* b) { return a->seq < b->seq; });

  for (const TraceEntry* entry : order) {
    const ScanRequest req = entry->ToRequest(catalog);
    const auto manifest = catalog.Load(req.namespace_name, req.table);
    uint64_t bytes = 0;
    for (const DataFileMeta* f : manifest->LiveFiles(req.snapshot_id)) {
      const std::string file_key = manifest->QualifiedName() + "/" + f->file_id;
      auto it = files.find(file_key);
      if (it == files.end()) {
        std::vector<std::string> all;
        for (const Field& field : manifest->schema) all.push_back(field.name);
        it = files.emplace(file_key, ReadColumnFile(catalog.DataPath(*manifest, *f), all)).first;
      }
      const ColumnarBatch& data = it->second;
      const std::vector<uint8_t> need = req.filter.opaque()
                                            ? std::vector<uint8_t>(data.num_rows(), 1)
                                            : FilterMask(req.filter, data);
      if (std::find(need.begin(), need.end(), 1) == need.end()) continue;
      for (const auto& col : req.projections) {
        std::vector<uint8_t>& have = covered[file_key + "/" + col];
        have.resize(data.num_rows(), 0);
        bool missing = false;
        for (size_t r = 0; r < need.size(); ++r) {
          if (need[r] && !have[r]) {
            missing = true;
            have[r] = 1;
          }
        }
        if (missing) bytes += f->Stats(col).chunk_bytes;
      }
    }
    result.per_entry_optimal.push_back(bytes);
    result.optimal_bytes += bytes;
  }
  result.diff_bytes = report.totals.storage_bytes;
  result.pass = result.diff_bytes == result.optimal_bytes;
  return result;
}

}  // namespace dcache
