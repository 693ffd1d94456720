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

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "dcache/errors.hpp"
#include "dcache/ingest.hpp"
#include "support/temp_dir.hpp"

namespace dcache {
namespace {

using testing::TempDir;

constexpr CacheMode kModes[] = {CacheMode::kNone, CacheMode::kResult, CacheMode::kScan,
                                CacheMode::kDiff};

class BenchTest : public ::testing::Test {
 protected:
  void SetUp() override {
    catalog_ = std::make_unique<Catalog>(dir_.path());
    IngestTable(*catalog_, MonthlyEventsSpec("lake", "raw_data", 10000, 17));
  }

  std::shared_ptr<const TableManifest> Manifest() { return catalog_->Load("lake", "raw_data"); }

  // Chunk bytes of `cols` over files whose eventTime range meets [lo, hi],
  // straight from the manifest statistics.
  uint64_t ManifestBytes(std::string_view lo, std::string_view hi,
                         const std::vector<std::string>& cols) {
    const int64_t a = ParseDate(lo), b = ParseDate(hi);
    uint64_t total = 0;
    for (const DataFileMeta* f : Manifest()->LiveFiles("")) {
      const ColumnStats& s = f->Stats("eventTime");
      if (s.max.AsInt() < a || s.min.AsInt() > b) continue;
      for (const auto& c : cols) total += f->Stats(c).chunk_bytes;
    }
    return total;
  }

  TraceEntry Entry(uint64_t seq, std::vector<std::string> cols, std::string filter) {
    TraceEntry e;
    e.seq = seq;
    e.namespace_name = "lake";
    e.table = "raw_data";
    e.projections = std::move(cols);
    e.filter = std::move(filter);
    return e;
  }

  TempDir dir_;
  std::unique_ptr<Catalog> catalog_;
};

TEST(TraceFormat, RoundTripAndErrors) {
  TraceEntry a;
  a.seq = 2;
  a.namespace_name = "lake";
  a.table = "t";
  a.projections = {"c1", "c2"};
  a.filter = "c1 < 'x''y'";
  TraceEntry b = a;
  b.seq = 1;
  b.snapshot_id = "snap-0003";
  b.expected_rows = 7;
  const std::string text = SerializeTrace({a, b});
  const auto parsed = ParseTrace(text);
  ASSERT_EQ(parsed.size(), 2u);
  EXPECT_EQ(parsed[0].seq, 1u);
  EXPECT_EQ(parsed[0].snapshot_id, "snap-0003");
  EXPECT_EQ(parsed[0].expected_rows, 7u);
  EXPECT_EQ(parsed[1].filter, a.filter);
  EXPECT_FALSE(parsed[1].expected_rows);
  EXPECT_EQ(SerializeTrace(parsed), SerializeTrace({b, a}));

  EXPECT_TRUE(ParseTrace("\n  \n").empty());
  EXPECT_THROW(ParseTrace("{\"seq\": 1}"), ParseError);
  EXPECT_THROW(ParseTrace("not json"), ParseError);
  const std::string line = a.ToJson().dump();
  try {
    ParseTrace(line + "\n" + line + "\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(TraceFormat, Modes) {
  for (CacheMode m : kModes) EXPECT_EQ(ParseMode(ModeName(m)), m);
  EXPECT_THROW(ParseMode("lru"), InvalidArgument);
}

TEST(ExactMatchCacheTest, LruWithinBudget) {
  auto batch = [](int rows) {
    ColumnarBatch b({{"x", ColumnType::kInt64}});
    for (int i = 0; i < rows; ++i) {
      const Scalar v = Scalar::Int64(i);
      b.AppendRow(std::span(&v, 1));
    }
    return std::make_shared<const ColumnarBatch>(std::move(b));
  };
  ExactMatchCache cache(200);  // 8 bytes per row
  cache.Insert("a", batch(10));
  cache.Insert("b", batch(10));
  EXPECT_EQ(cache.total_bytes(), 160u);
  ASSERT_TRUE(cache.Lookup("a"));
  cache.Insert("c", batch(6));  // evicts b, the least recent
  EXPECT_TRUE(cache.Lookup("a"));
  EXPECT_FALSE(cache.Lookup("b"));
  EXPECT_TRUE(cache.Lookup("c"));
  EXPECT_EQ(cache.total_bytes(), 128u);
  cache.Insert("huge", batch(100));
  EXPECT_FALSE(cache.Lookup("huge"));
  EXPECT_EQ(cache.size(), 2u);
  cache.Insert("a", batch(1));
  EXPECT_EQ(cache.total_bytes(), 56u);
}

TEST_F(BenchTest, MotivatingTraceDiffBytes) {
  const auto trace = GenerateWorkload("motivating", {}, 0);
  ASSERT_EQ(trace.size(), 3u);
  const BenchReport r = Replay(trace, CacheMode::kDiff, *catalog_);
  const uint64_t first = ManifestBytes("2023-01-01", "2023-02-01", {"c1", "c2", "c3"});
  const uint64_t second = ManifestBytes("2023-02-02", "2023-03-01", {"c1", "c3"});
  EXPECT_EQ(r.entries[0].storage_bytes, first);
  EXPECT_EQ(r.entries[1].storage_bytes, second);
  EXPECT_EQ(r.entries[2].storage_bytes, 0u);
  EXPECT_EQ(r.totals.storage_bytes, first + second);
  EXPECT_EQ(r.entries[0].hit_kind, "miss");
  EXPECT_EQ(r.entries[1].hit_kind, "partial");
  EXPECT_EQ(r.entries[2].hit_kind, "hit");
}

TEST_F(BenchTest, MotivatingTraceMissesInExactModes) {
  const auto trace = GenerateWorkload("motivating", {}, 0);
  const BenchReport none = Replay(trace, CacheMode::kNone, *catalog_);
  for (CacheMode m : {CacheMode::kResult, CacheMode::kScan}) {
    const BenchReport r = Replay(trace, m, *catalog_);
    EXPECT_EQ(r.totals.misses, 3u);
    EXPECT_EQ(r.totals.storage_bytes, none.totals.storage_bytes);
  }
  EXPECT_EQ(none.totals.storage_bytes,
            ManifestBytes("2023-01-01", "2023-02-01", {"c1", "c2", "c3"}) +
                ManifestBytes("2023-01-01", "2023-03-01", {"c1", "c3"}) +
                ManifestBytes("2023-01-01", "2023-01-02", {"c2"}));
}

TEST_F(BenchTest, ExactAndNormalizedRepeats) {
  const std::vector<TraceEntry> trace = {
      Entry(1, {"c1", "c2"}, "c1 < 5000"),
      Entry(2, {"c1", "c2"}, "c1 < 5000"),
      Entry(3, {"c2", "c1"}, "c1<5000"),
  };
  const BenchReport result = Replay(trace, CacheMode::kResult, *catalog_);
  EXPECT_GT(result.entries[0].storage_bytes, 0u);
  EXPECT_EQ(result.entries[1].storage_bytes, 0u);
  EXPECT_EQ(result.entries[1].hit_kind, "hit");
  EXPECT_GT(result.entries[2].storage_bytes, 0u);

  const BenchReport scan = Replay(trace, CacheMode::kScan, *catalog_);
  EXPECT_EQ(scan.totals.hits, 2u);
  EXPECT_EQ(scan.entries[2].storage_bytes, 0u);
  EXPECT_EQ(scan.entries[2].digest, result.entries[2].digest);
}

TEST_F(BenchTest, DominanceAndAnswerEquality) {
  for (uint64_t seed = 1; seed <= 6; ++seed) {
    const auto trace =
        GenerateWorkload("random-overlap", {.entries = 30, .overlap = 0.15 * double(seed)}, seed);
    std::vector<BenchReport> reports;
    for (CacheMode m : kModes) reports.push_back(Replay(trace, m, *catalog_));
    EXPECT_LE(reports[3].totals.storage_bytes, reports[2].totals.storage_bytes) << seed;
    EXPECT_LE(reports[2].totals.storage_bytes, reports[1].totals.storage_bytes) << seed;
    EXPECT_LE(reports[1].totals.storage_bytes, reports[0].totals.storage_bytes) << seed;
    for (size_t i = 0; i < trace.size(); ++i) {
      for (const auto& r : reports) {
        ASSERT_EQ(r.entries[i].digest, reports[0].entries[i].digest) << ModeName(r.mode);
        ASSERT_EQ(r.entries[i].rows, reports[0].entries[i].rows);
      }
    }
  }
}

TEST_F(BenchTest, ReportArithmetic) {
  const auto trace = GenerateWorkload("random-overlap", {.entries = 25, .overlap = 0.6}, 5);
  const BenchReport none = Replay(trace, CacheMode::kNone, *catalog_);
  for (CacheMode m : kModes) {
    BenchReport r = Replay(trace, m, *catalog_);
    uint64_t storage = 0, cache = 0, hits = 0, partial = 0, misses = 0;
    for (const auto& e : r.entries) {
      storage += e.storage_bytes;
      cache += e.cache_bytes;
      hits += e.hit_kind == "hit";
      partial += e.hit_kind == "partial";
      misses += e.hit_kind == "miss";
    }
    EXPECT_EQ(storage, r.totals.storage_bytes);
    EXPECT_EQ(cache, r.totals.cache_bytes);
    EXPECT_EQ(hits, r.totals.hits);
    EXPECT_EQ(partial, r.totals.partial_hits);
    EXPECT_EQ(misses, r.totals.misses);
    EXPECT_EQ(hits + partial + misses, trace.size());

    AttachSavings(r, none);
    const double base = static_cast<double>(none.totals.storage_bytes);
    const double want = (base - static_cast<double>(r.totals.storage_bytes)) / base;
    ASSERT_TRUE(r.savings_vs);
    EXPECT_EQ(r.savings_vs->mode, "none");
    EXPECT_NEAR(r.savings_vs->fraction, want, 1e-9 * std::max(1.0, std::abs(want)));
    EXPECT_NEAR(r.savings_vs->pct, 100 * want, 1e-7);

    const BenchReport back = BenchReport::FromJson(nlohmann::json::parse(r.ToJson().dump()));
    EXPECT_EQ(back.ToJson(), r.ToJson());
    EXPECT_NE(r.ToTable().find("total"), std::string::npos);
  }
  BenchReport empty;
  AttachSavings(empty, empty);
  EXPECT_EQ(empty.savings_vs->pct, 0.0);
}

TEST_F(BenchTest, GeneratorDeterminism) {
  for (const char* kind : {"motivating", "random-overlap", "nested"}) {
    EXPECT_EQ(SerializeTrace(GenerateWorkload(kind, {}, 42)),
              SerializeTrace(GenerateWorkload(kind, {}, 42)))
        << kind;
  }
  EXPECT_NE(SerializeTrace(GenerateWorkload("random-overlap", {}, 1)),
            SerializeTrace(GenerateWorkload("random-overlap", {}, 2)));
  EXPECT_TRUE(GenerateWorkload("random-overlap", {.entries = 0}, 3).empty());
  EXPECT_EQ(GenerateWorkload("nested", {.entries = 5}, 3).size(), 5u);
  EXPECT_THROW(GenerateWorkload("tpch", {}, 1), InvalidArgument);

  // Every generated entry parses against the table.
  for (const auto& e : GenerateWorkload("random-overlap", {.entries = 200}, 9)) {
    EXPECT_NO_THROW(e.ToRequest(*catalog_)) << e.filter;
  }
}

TEST_F(BenchTest, OverlapKnobRaisesPairwiseOverlap) {
  double low = 0, high = 0;
  for (uint64_t s = 0; s < 5; ++s) {
    low += PairwiseOverlap(GenerateWorkload("random-overlap", {.overlap = 0.0}, s), *catalog_);
    high += PairwiseOverlap(GenerateWorkload("random-overlap", {.overlap = 0.9}, s), *catalog_);
  }
  EXPECT_LT(low, high);
  EXPECT_EQ(PairwiseOverlap({Entry(1, {"c1"}, "")}, *catalog_), 0.0);
  EXPECT_EQ(PairwiseOverlap({Entry(1, {"c1"}, "c1 < 5"), Entry(2, {"c1"}, "c1 > 9")}, *catalog_),
            0.0);
}

TEST_F(BenchTest, VerifyOptimal) {
  const auto motivating = GenerateWorkload("motivating", {}, 0);
  const OptimalityResult m =
      VerifyOptimal(motivating, Replay(motivating, CacheMode::kDiff, *catalog_), *catalog_);
  EXPECT_TRUE(m.pass) << m.optimal_bytes << " vs " << m.diff_bytes;
  EXPECT_EQ(m.per_entry_optimal.back(), 0u);

  const std::vector<TraceEntry> single = {Entry(1, {"c1", "c3"}, "eventTime >= 2023-06-15")};
  const uint64_t full = EstimateScanBytes(*Manifest(), "", single[0].projections,
                                          single[0].ToRequest(*catalog_).filter);
  for (CacheMode mode : kModes) {
    const BenchReport r = Replay(single, mode, *catalog_);
    EXPECT_EQ(r.totals.storage_bytes, full);
  }
  const OptimalityResult s =
      VerifyOptimal(single, Replay(single, CacheMode::kDiff, *catalog_), *catalog_);
  EXPECT_TRUE(s.pass);
  EXPECT_EQ(s.optimal_bytes, full);

  for (uint64_t seed = 100; seed < 110; ++seed) {
    const auto trace = GenerateWorkload("nested", {.entries = 5}, seed);
    const OptimalityResult r =
        VerifyOptimal(trace, Replay(trace, CacheMode::kDiff, *catalog_), *catalog_);
    EXPECT_TRUE(r.pass) << "seed " << seed << ": " << r.diff_bytes << " vs " << r.optimal_bytes
                        << "\n" << SerializeTrace(trace);
  }

  // The bound is a lower bound for every mode.
  const auto random = GenerateWorkload("random-overlap", {.entries = 16, .overlap = 0.8}, 4);
  const OptimalityResult r = VerifyOptimal(random, Replay(random, CacheMode::kDiff, *catalog_), *catalog_);
  EXPECT_LE(r.optimal_bytes, r.diff_bytes);

  const auto big = GenerateWorkload("random-overlap", {.entries = 17}, 1);
  EXPECT_THROW(VerifyOptimal(big, Replay(big, CacheMode::kDiff, *catalog_), *catalog_),
               InvalidArgument);
  EXPECT_THROW(VerifyOptimal(single, Replay(single, CacheMode::kScan, *catalog_), *catalog_),
               InvalidArgument);
}

TEST_F(BenchTest, ReplayErrors) {
  TraceEntry bad = Entry(1, {"c1"}, "");
  bad.table = "missing";
  EXPECT_THROW(Replay({bad}, CacheMode::kDiff, *catalog_), NotFoundError);
  TraceEntry wrong = Entry(1, {"c1"}, "");
  wrong.expected_rows = 3;
  EXPECT_THROW(Replay({wrong}, CacheMode::kNone, *catalog_), InvalidArgument);
  wrong.expected_rows = 10000;
  EXPECT_NO_THROW(Replay({wrong}, CacheMode::kNone, *catalog_));
}

}  // namespace
}  // namespace dcache
