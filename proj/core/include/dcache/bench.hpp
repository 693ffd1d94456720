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

// Trace replay harness: the differential cache against a no-cache baseline
// and two exact-match caches, with byte accounting per entry.

#include <cstdint>
#include <list>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dcache/cache.hpp"
#include "dcache/catalog.hpp"
#include "dcache/planner.hpp"

namespace dcache {

// One line of a trace file:
//   {"seq": 1, "namespace": "lake", "table": "raw_data", "snapshot": "snap-0001",
//    "projections": ["c1"], "filter": "c1 < 10", "expected_rows": 42}
// snapshot and expected_rows are optional.
struct TraceEntry {
  uint64_t seq = 0;
  std::string namespace_name;
  std::string table;
  std::string snapshot_id;
  std::vector<std::string> projections;
  std::string filter;
  std::optional<uint64_t> expected_rows;

  nlohmann::json ToJson() const;
  static TraceEntry FromJson(const nlohmann::json& j);

  ScanRequest ToRequest(const Catalog& catalog) const;
};

// Line-delimited JSON. Entries come back sorted by seq; duplicate seq numbers
// and malformed lines raise ParseError naming the line.
std::vector<TraceEntry> ParseTrace(std::string_view text);
std::string SerializeTrace(const std::vector<TraceEntry>& trace);
std::vector<TraceEntry> ReadTraceFile(const std::filesystem::path& path);
void WriteTraceFile(const std::filesystem::path& path, const std::vector<TraceEntry>& trace);

enum class CacheMode { kNone, kResult, kScan, kDiff };

std::string_view ModeName(CacheMode mode);
// Accepts none | result | scan | diff. Throws InvalidArgument otherwise.
CacheMode ParseMode(std::string_view name);

// Byte-budgeted LRU map from a request key to a materialized result. Backs
// the result-cache and scan-cache baselines.
class ExactMatchCache {
 public:
  explicit ExactMatchCache(uint64_t byte_budget) : budget_(byte_budget) {}

  // Returns null on a miss; a hit becomes most recently used.
  std::shared_ptr<const ColumnarBatch> Lookup(const std::string& key);
  // Entries larger than the whole budget are not kept.
  void Insert(const std::string& key, std::shared_ptr<const ColumnarBatch> batch);

  size_t size() const { return entries_.size(); }
  uint64_t total_bytes() const { return bytes_; }

 private:
  struct Slot {
    std::shared_ptr<const ColumnarBatch> batch;
    uint64_t bytes = 0;
    std::list<std::string>::iterator lru;
  };

  uint64_t budget_;
  uint64_t bytes_ = 0;
  std::list<std::string> lru_;  // front = most recent
  std::map<std::string, Slot> entries_;
};

struct EntryReport {
  uint64_t seq = 0;
  uint64_t storage_bytes = 0;
  uint64_t cache_bytes = 0;
  // "miss", "hit" (no storage read), or "partial" (diff mode only).
  std::string hit_kind = "miss";
  uint64_t rows = 0;
  uint64_t digest = 0;
  // Residual cost before and after each selected element (diff mode).
  std::vector<uint64_t> cost_trace;
};

struct ModeTotals {
  uint64_t storage_bytes = 0;
  uint64_t cache_bytes = 0;
  uint64_t hits = 0;
  uint64_t partial_hits = 0;
  uint64_t misses = 0;
};

struct Savings {
  std::string mode;
  // (baseline - this) / baseline, as a fraction and as a percentage.
  double fraction = 0;
  double pct = 0;
};

struct BenchReport {
  CacheMode mode = CacheMode::kNone;
  ModeTotals totals;
  std::vector<EntryReport> entries;
  std::optional<Savings> savings_vs;

  nlohmann::json ToJson() const;
  static BenchReport FromJson(const nlohmann::json& j);
  // Fixed-width text table with one row per entry and a totals row.
  std::string ToTable() const;
};

// Replays the trace in seq order against fresh cache state. `cache_config`
// sets the byte budget for every caching mode. Throws NotFoundError for
// unknown tables and InvalidArgument when an entry's row count differs from
// expected_rows.
BenchReport Replay(const std::vector<TraceEntry>& trace, CacheMode mode, const Catalog& catalog,
                   const CacheConfig& cache_config = {});

// Fills report.savings_vs relative to `baseline`. A zero-byte baseline yields
// zero savings.
void AttachSavings(BenchReport& report, const BenchReport& baseline);

struct WorkloadParams {
  std::string namespace_name = "lake";
  std::string table = "raw_data";
  size_t entries = 50;
  // Chance that an entry's interval is derived from an earlier entry.
  double overlap = 0.5;
  int year = 2023;
};

// Kinds:
//   motivating      the three January/February/c2 scans; ignores entries
//   random-overlap  random projections over derived or fresh date intervals,
//                   with some exact and reordered repeats
//   nested          one projection set; each interval contains or lies
//                   within the union of all earlier ones
// Deterministic for a given seed. Throws InvalidArgument for other kinds.
std::vector<TraceEntry> GenerateWorkload(std::string_view kind, const WorkloadParams& params,
                                         uint64_t seed);

// Fraction of entry pairs whose filters can select a common row.
double PairwiseOverlap(const std::vector<TraceEntry>& trace, const Catalog& catalog);

struct OptimalityResult {
  bool pass = false;
  uint64_t optimal_bytes = 0;
  uint64_t diff_bytes = 0;
  std::vector<uint64_t> per_entry_optimal;
};

constexpr size_t kMaxOptimalityEntries = 16;

// Lower bound on storage bytes for the trace: an entry pays for a (file,
// column) chunk of its projection unless every row it selects from that file
// was selected, with that column, by an earlier entry. Passes iff the diff
// report's storage bytes equal the bound. Throws InvalidArgument for traces
// over kMaxOptimalityEntries or a report that is not from diff mode.
OptimalityResult VerifyOptimal(const std::vector<TraceEntry>& trace, const BenchReport& report,
                               const Catalog& catalog);

}  // namespace dcache
