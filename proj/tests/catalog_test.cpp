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

#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "dcache/errors.hpp"
#include "dcache/ingest.hpp"
#include "support/table_oracle.hpp"
#include "support/temp_dir.hpp"

namespace dcache {
namespace {

using testing::BruteForceRows;
using testing::RandomEventFilter;
using testing::RandomProjection;
using testing::ReadWholeFile;
using testing::TempDir;

std::string ReadText(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CatalogTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir();
    catalog_ = new Catalog(dir_->path());
    IngestTable(*catalog_, MonthlyEventsSpec("lake", "raw_data", 6000, 7));
  }
  static void TearDownTestSuite() {
    delete catalog_;
    delete dir_;
  }

  std::shared_ptr<const TableManifest> Manifest() { return catalog_->Load("lake", "raw_data"); }
  Predicate P(std::string_view text) { return ParsePredicate(text, Manifest()->schema); }

  static TempDir* dir_;
  static Catalog* catalog_;
};

TempDir* CatalogTest::dir_ = nullptr;
Catalog* CatalogTest::catalog_ = nullptr;

TEST_F(CatalogTest, MonthlyFilesWithExactStats) {
  auto m = Manifest();
  ASSERT_EQ(m->snapshots.size(), 1u);
  const auto files = m->LiveFiles("");
  ASSERT_EQ(files.size(), 12u);
  for (size_t i = 0; i < files.size(); ++i) {
    const auto& ts = files[i]->Stats("eventTime");
    char first[16];
    std::snprintf(first, sizeof(first), "2023-%02zu-01", i + 1);
    EXPECT_EQ(FormatDate(ts.min.AsInt()), first);
    EXPECT_EQ(FormatDate(ts.max.AsInt()).substr(0, 7), std::string(first).substr(0, 7));
    EXPECT_EQ(FormatDate(ts.max.AsInt() + 1).substr(8), "01");

    // Stats fidelity against the file content.
    const ColumnarBatch all = ReadWholeFile(*catalog_, *m, *files[i]);
    ASSERT_EQ(all.num_rows(), files[i]->row_count);
    uint64_t chunk_sum = 0;
    for (size_t c = 0; c < all.num_columns(); ++c) {
      Scalar lo = all.Value(0, c), hi = all.Value(0, c);
      for (size_t r = 1; r < all.num_rows(); ++r) {
        const Scalar v = all.Value(r, c);
        if (v < lo) lo = v;
        if (hi < v) hi = v;
      }
      const ColumnStats& s = files[i]->Stats(all.schema()[c].name);
      EXPECT_EQ(s.min, lo);
      EXPECT_EQ(s.max, hi);
      chunk_sum += s.chunk_bytes;
    }
    EXPECT_LE(chunk_sum, files[i]->total_bytes);
  }
}

TEST_F(CatalogTest, ManifestDocumentFieldNames) {
  const auto doc = nlohmann::json::parse(ReadText(dir_->path() / "lake/raw_data/manifest.json"));
  for (const char* key : {"namespace", "table", "schema", "snapshots", "files", "seed"}) {
    EXPECT_TRUE(doc.contains(key)) << key;
  }
  EXPECT_EQ(doc["schema"][3]["type"], "date");
  EXPECT_TRUE(doc["snapshots"][0].contains("file_ids"));
  const auto& file = doc["files"][0];
  for (const char* key : {"file_id", "path", "row_count", "total_bytes", "columns"}) {
    EXPECT_TRUE(file.contains(key)) << key;
  }
  for (const char* key : {"name", "min", "max", "chunk_bytes"}) {
    EXPECT_TRUE(file["columns"][0].contains(key)) << key;
  }
  EXPECT_EQ(TableManifest::FromJson(doc).ToJson(), doc);
}

TEST_F(CatalogTest, PruneAlignedAndTrivial) {
  auto m = Manifest();
  const auto feb = PruneFiles(*m, "", P("eventTime BETWEEN 2023-02-01 AND 2023-02-28"));
  ASSERT_EQ(feb.size(), 1u);
  EXPECT_EQ(feb[0]->file_id, m->LiveFiles("")[1]->file_id);
  EXPECT_EQ(PruneFiles(*m, "", P("TRUE")).size(), 12u);
  EXPECT_TRUE(PruneFiles(*m, "", P("FALSE")).empty());
  EXPECT_EQ(PruneFiles(*m, "", P("c3 LIKE 'x%'")).size(), 12u);
  EXPECT_THROW(PruneFiles(*m, "snap-0042", P("TRUE")), NotFoundError);
}

TEST_F(CatalogTest, PruningIsSound) {
  auto m = Manifest();
  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const Predicate p = P(RandomEventFilter(rng));
    std::set<std::string> kept;
    for (const auto* f : PruneFiles(*m, "", p)) kept.insert(f->file_id);
    for (const auto* f : m->LiveFiles("")) {
      const ColumnarBatch all = ReadWholeFile(*catalog_, *m, *f);
      bool any = false;
      for (size_t r = 0; r < all.num_rows() && !any; ++r) any = Evaluate(p, all.RowAt(r));
      if (any) EXPECT_TRUE(kept.count(f->file_id)) << p.ToString() << " dropped " << f->file_id;
    }
  }
}

TEST_F(CatalogTest, EstimateScanBytes) {
  auto m = Manifest();
  const std::vector<std::string> c13 = {"c1", "c3"};
  EXPECT_EQ(EstimateScanBytes(*m, "", c13, P("FALSE")), 0u);
  EXPECT_EQ(EstimateScanBytes(*m, "", {}, P("TRUE")), 0u);
  const DataFileMeta& feb = *m->LiveFiles("")[1];
  EXPECT_EQ(EstimateScanBytes(*m, "", c13, P("eventTime BETWEEN 2023-02-01 AND 2023-02-28")),
            feb.Stats("c1").chunk_bytes + feb.Stats("c3").chunk_bytes);
  uint64_t all_bytes = 0;
  for (const auto* f : m->LiveFiles("")) {
    for (const auto& c : f->columns) all_bytes += c.chunk_bytes;
  }
  const std::vector<std::string> every = {"c1", "c2", "c3", "eventTime"};
  EXPECT_EQ(EstimateScanBytes(*m, "", every, P("TRUE")), all_bytes);
  const std::vector<std::string> bad = {"c1", "c4"};
  EXPECT_THROW(EstimateScanBytes(*m, "", bad, P("TRUE")), NotFoundError);
}

TEST_F(CatalogTest, EstimateIsMonotone) {
  auto m = Manifest();
  Rng rng(5);
  const std::vector<std::string> cols = {"c2", "c3"};
  for (int i = 0; i < 100; ++i) {
    const Predicate p = P(RandomEventFilter(rng));
    const Predicate sub = Intersect(p, P(RandomEventFilter(rng)));
    EXPECT_LE(EstimateScanBytes(*m, "", cols, sub), EstimateScanBytes(*m, "", cols, p));
  }
}

TEST_F(CatalogTest, ReadScanJanuary) {
  auto m = Manifest();
  const std::vector<std::string> cols = {"c1", "c2", "c3"};
  const Predicate jan = P("eventTime BETWEEN 2023-01-01 AND 2023-01-31");
  const ScanResult r = catalog_->ReadScan(*m, "", cols, jan);
  const DataFileMeta& f = *m->LiveFiles("")[0];
  EXPECT_EQ(r.stats.bytes_read,
            f.Stats("c1").chunk_bytes + f.Stats("c2").chunk_bytes + f.Stats("c3").chunk_bytes);
  EXPECT_EQ(r.stats.filter_bytes_read, f.Stats("eventTime").chunk_bytes);
  EXPECT_EQ(r.stats.files_scanned, 1u);
  EXPECT_EQ(r.batch.num_rows(), f.row_count);
  EXPECT_EQ(r.batch.CanonicalRows(), BruteForceRows(*catalog_, *m, "", cols, jan));

  const ScanResult none = catalog_->ReadScan(*m, "", cols, P("FALSE"));
  EXPECT_EQ(none.batch.num_rows(), 0u);
  EXPECT_EQ(none.stats.bytes_read, 0u);
}

TEST_F(CatalogTest, RandomScansMatchOracleAndEstimate) {
  auto m = Manifest();
  Rng rng(23);
  for (int i = 0; i < 50; ++i) {
    const auto cols = RandomProjection(rng);
    const Predicate p = P(RandomEventFilter(rng));
    const ScanResult r = catalog_->ReadScan(*m, "", cols, p);
    EXPECT_EQ(r.batch.CanonicalRows(), BruteForceRows(*catalog_, *m, "", cols, p)) << p.ToString();
    EXPECT_EQ(r.stats.bytes_read, EstimateScanBytes(*m, "", cols, p));
    EXPECT_EQ(r.stats.rows_returned, r.batch.num_rows());
  }
}

TEST_F(CatalogTest, ExtraColumnsTravelWithTheResult) {
  auto m = Manifest();
  const std::vector<std::string> cols = {"c2"};
  const std::vector<std::string> extra = {"eventTime", "c2"};
  const ScanResult r =
      catalog_->ReadScan(*m, "", cols, P("eventTime BETWEEN 2023-03-03 AND 2023-03-04"), extra);
  ASSERT_EQ(r.batch.num_columns(), 2u);
  EXPECT_EQ(r.batch.schema()[1].name, "eventTime");
  EXPECT_EQ(r.stats.bytes_read, m->LiveFiles("")[2]->Stats("c2").chunk_bytes);
}

TEST(CatalogIngestTest, DelimitedImport) {
  TempDir dir;
  std::ofstream(dir.path() / "t.csv") << "b,a,when\n"
                                         "x,3,2023-05-01\n"
                                         "\"y,z\",-1,2023-04-30\n"
                                         "w,7,2023-05-02\n";
  const auto doc = nlohmann::json::parse(R"({
    "namespace": "ns", "table": "t", "source": "t.csv",
    "schema": [{"name": "a", "type": "int64"}, {"name": "b", "type": "string"},
               {"name": "when", "type": "date"}]})");
  Catalog catalog(dir.path() / "store");
  auto m = IngestTable(catalog, TableSpec::FromJson(doc, dir.path()));
  ASSERT_EQ(m->files.size(), 1u);
  const DataFileMeta& f = m->files[0];
  EXPECT_EQ(f.row_count, 3u);
  EXPECT_EQ(f.Stats("a").min, Scalar::Int64(-1));
  EXPECT_EQ(f.Stats("a").max, Scalar::Int64(7));
  EXPECT_EQ(f.Stats("b").min, Scalar::String("w"));
  EXPECT_EQ(f.Stats("b").max, Scalar::String("y,z"));
  EXPECT_EQ(f.Stats("when").min, Scalar::Date(ParseDate("2023-04-30")));

  std::ofstream(dir.path() / "bad.csv") << "a,b,when\nnope,x,2023-01-01\n";
  auto bad = doc;
  bad["source"] = "bad.csv";
  EXPECT_THROW(IngestTable(catalog, TableSpec::FromJson(bad, dir.path())), TypeError);
}

TEST(CatalogIngestTest, SyntheticIngestIsDeterministic) {
  TempDir a, b;
  Catalog ca(a.path()), cb(b.path());
  IngestTable(ca, MonthlyEventsSpec("lake", "raw_data", 3000, 99));
  IngestTable(cb, MonthlyEventsSpec("lake", "raw_data", 3000, 99));
  EXPECT_EQ(ReadText(a.path() / "lake/raw_data/manifest.json"),
            ReadText(b.path() / "lake/raw_data/manifest.json"));
  Catalog cc(b.path() / "other");
  IngestTable(cc, MonthlyEventsSpec("lake", "raw_data", 3000, 100));
  EXPECT_NE(ReadText(a.path() / "lake/raw_data/manifest.json"),
            ReadText(b.path() / "other/lake/raw_data/manifest.json"));
}

TEST(CatalogIngestTest, FullSizeMonthlyTable) {
  TempDir dir;
  Catalog catalog(dir.path());
  auto m = IngestTable(catalog, MonthlyEventsSpec("lake", "raw_data", 120000, 1));
  EXPECT_EQ(m->files.size(), 12u);
  uint64_t rows = 0;
  for (const auto& f : m->files) rows += f.row_count;
  EXPECT_EQ(rows, 120000u);
}

TEST(CatalogCommitTest, SnapshotsAndIsolation) {
  TempDir dir;
  Catalog catalog(dir.path());
  auto m0 = IngestTable(catalog, MonthlyEventsSpec("lake", "raw_data", 2400, 3));
  const std::string s1 = m0->LatestSnapshotId();
  const Predicate jan = ParsePredicate("eventTime < 2023-02-01", m0->schema);
  const std::vector<std::string> cols = {"c1", "c3", "eventTime"};
  const auto jan_rows = catalog.ReadScan(*m0, s1, cols, jan).batch.CanonicalRows();
  ASSERT_FALSE(jan_rows.empty());

  // Add one file overlapping March.
  TableSpec extra = MonthlyEventsSpec("lake", "raw_data", 50, 4);
  extra.columns[3].min = "2023-03-10";
  extra.columns[3].max = "2023-04-10";
  extra.partition = {};
  const ColumnarBatch added = GenerateRows(extra);
  const std::string s2 = catalog.CommitSnapshot("lake", "raw_data", std::span(&added, 1), {});
  auto m1 = catalog.Load("lake", "raw_data");
  EXPECT_EQ(m1->LiveFiles(s2).size(), 13u);
  EXPECT_EQ(m1->LiveFiles(s1).size(), 12u);

  // Remove January; the old snapshot still serves it.
  const std::vector<std::string> remove = {m1->LiveFiles(s1)[0]->file_id};
  const std::string s3 = catalog.CommitSnapshot("lake", "raw_data", {}, remove);
  auto m2 = catalog.Load("lake", "raw_data");
  EXPECT_EQ(m2->LiveFiles(s3).size(), 12u);
  EXPECT_TRUE(catalog.ReadScan(*m2, s3, cols, jan).batch.num_rows() == 0);
  EXPECT_EQ(catalog.ReadScan(*m2, s1, cols, jan).batch.CanonicalRows(), jan_rows);

  const std::vector<std::string> unknown = {"f999999-00000000"};
  EXPECT_THROW(catalog.CommitSnapshot("lake", "raw_data", {}, unknown), NotFoundError);

  // Re-adding the removed file's rows and dropping the extra file restores
  // the original content set.
  const ColumnarBatch jan_file = ReadWholeFile(catalog, *m2, *m2->LiveFiles(s1)[0]);
  const std::vector<std::string> drop = {m2->LiveFiles(s2).back()->file_id};
  const std::string s4 = catalog.CommitSnapshot("lake", "raw_data", std::span(&jan_file, 1), drop);
  auto m3 = catalog.Load("lake", "raw_data");
  std::multiset<std::string> before, after;
  for (const auto* f : m3->LiveFiles(s1)) before.insert(f->ContentHash());
  for (const auto* f : m3->LiveFiles(s4)) after.insert(f->ContentHash());
  EXPECT_EQ(before, after);

  // A fresh catalog over the same root sees every snapshot.
  Catalog reopened(dir.path());
  EXPECT_EQ(reopened.Load("lake", "raw_data")->snapshots.size(), 4u);
}

}  // namespace
}  // namespace dcache
