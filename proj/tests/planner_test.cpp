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

#include <gtest/gtest.h>

#include "dcache/errors.hpp"
#include "dcache/executor.hpp"
#include "dcache/ingest.hpp"
#include "support/plan_text.hpp"
#include "support/table_oracle.hpp"
#include "support/temp_dir.hpp"

namespace dcache {
namespace {

using testing::TempDir;

class PlannerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    catalog_ = std::make_unique<Catalog>(dir_.path());
    IngestTable(*catalog_, MonthlyEventsSpec("lake", "raw_data", 3600, 31));
  }

  std::shared_ptr<const TableManifest> Manifest() { return catalog_->Load("lake", "raw_data"); }

  ScanRequest Req(std::vector<std::string> cols, std::string_view filter) {
    return ScanRequest::Make("lake", "raw_data", "", std::move(cols), filter, Manifest()->schema);
  }

  size_t CountLines(const std::string& text, std::string_view prefix) {
    size_t n = 0, pos = 0;
    while ((pos = text.find(prefix, pos)) != std::string::npos) {
      ++n;
      pos += prefix.size();
    }
    return n;
  }

  TempDir dir_;
  std::unique_ptr<Catalog> catalog_;
};

TEST_F(PlannerTest, RequestValidation) {
  const Schema& s = Manifest()->schema;
  EXPECT_THROW(ScanRequest::Make("lake", "raw_data", "", {}, "", s), InvalidArgument);
  EXPECT_THROW(ScanRequest::Make("lake", "raw_data", "", {"c9"}, "", s), NotFoundError);
  EXPECT_THROW(ScanRequest::Make("lake", "raw_data", "", {"c1", "c1"}, "", s), InvalidArgument);
  EXPECT_TRUE(Req({"c1"}, "").filter.IsTrue());

  const ScanRequest a = Req({"c3", "c1"}, "c1 <  5");
  const ScanRequest b = Req({"c1", "c3"}, "c1<5");
  EXPECT_NE(a.raw_text, b.raw_text);
  EXPECT_EQ(a.ScanKey("snap-0001"), b.ScanKey("snap-0001"));
  EXPECT_NE(a.ScanKey("snap-0001"), a.ScanKey("snap-0002"));

  CacheStore store;
  ScanRequest bad = Req({"c1"}, "");
  bad.snapshot_id = "snap-0404";
  EXPECT_THROW(PlanScan(bad, store, *Manifest()), NotFoundError);
  EXPECT_THROW(catalog_->Load("lake", "missing"), NotFoundError);
}

TEST_F(PlannerTest, ColdCacheIsPureResidual) {
  CacheStore store;
  const ScanRequest r = Req({"c1", "c2"}, "c1 BETWEEN 10 AND 20000");
  const ScanPlan plan = PlanScan(r, store, *Manifest());
  EXPECT_TRUE(plan.cache_steps.empty());
  ASSERT_TRUE(plan.residual.has_value());
  EXPECT_EQ(plan.residual->filter, r.filter);
  EXPECT_EQ(plan.residual->projections, r.projections);
  EXPECT_EQ(plan.request.snapshot_id, "snap-0001");
  const std::string text = Explain(plan);
  EXPECT_EQ(CountLines(text, "  residual "), 1u);
  EXPECT_EQ(CountLines(text, "  cache "), 0u);
}

TEST_F(PlannerTest, MotivatingSequence) {
  CacheStore store;
  const std::vector<ScanRequest> reqs = {
      Req({"c1", "c2", "c3"}, "eventTime BETWEEN 2023-01-01 AND 2023-02-01"),
      Req({"c1", "c3"}, "eventTime BETWEEN 2023-01-01 AND 2023-03-01"),
      Req({"c2"}, "eventTime BETWEEN 2023-01-01 AND 2023-01-02"),
  };
  std::vector<ScanPlan> plans;
  for (const auto& r : reqs) {
    plans.push_back(PlanScan(r, store, *Manifest()));
    Execute(plans.back(), store, *catalog_);
  }
  ASSERT_TRUE(plans[0].residual);
  EXPECT_EQ(plans[0].residual->filter, reqs[0].filter);
  ASSERT_TRUE(plans[1].residual);
  EXPECT_EQ(plans[1].residual->filter.ToString(), "eventTime BETWEEN 2023-02-02 AND 2023-03-01");
  EXPECT_FALSE(plans[2].residual);
  EXPECT_EQ(plans[2].estimated_residual_bytes, 0u);

  const std::string text = Explain(plans[1]);
  EXPECT_EQ(CountLines(text, "  cache    e000001 refilter eventTime BETWEEN 2023-01-01 AND 2023-02-01"), 1u);
  EXPECT_NE(text.find("residual eventTime BETWEEN 2023-02-02 AND 2023-03-01 (est "), std::string::npos);
}

TEST_F(PlannerTest, ResidualPrunedToNothingIsDropped) {
  CacheStore store;
  const ScanPlan plan = PlanScan(Req({"c1"}, "eventTime > 2024-06-01"), store, *Manifest());
  EXPECT_FALSE(plan.residual);
  EXPECT_EQ(plan.estimated_residual_bytes, 0u);
}

TEST_F(PlannerTest, RandomPlansPartitionTheRequest) {
  CacheStore store({.byte_budget = 200000});
  auto m = Manifest();
  std::vector<std::string> all;
  for (const Field& f : m->schema) all.push_back(f.name);
  const ColumnarBatch table = catalog_->ReadScan(*m, "", all, Predicate::True()).batch;
  std::vector<Row> rows;
  for (size_t r = 0; r < table.num_rows(); ++r) rows.push_back(table.RowAt(r));

  Rng rng(77);
  size_t with_steps = 0;
  for (int i = 0; i < 200; ++i) {
    const ScanRequest req =
        Req(testing::RandomProjection(rng), testing::RandomEventFilter(rng));
    const ScanPlan plan = PlanScan(req, store, *m);
    with_steps += !plan.cache_steps.empty();

    // Determinism and cost consistency.
    EXPECT_EQ(Explain(PlanScan(req, store, *m)), Explain(plan));
    const uint64_t est =
        plan.residual ? EstimateScanBytes(*m, "", req.projections, plan.residual->filter) : 0;
    EXPECT_EQ(plan.estimated_residual_bytes, est);
    EXPECT_EQ(plan.estimated_residual_bytes == 0, !plan.residual);
    for (size_t k = 1; k < plan.cost_trace.size(); ++k) {
      EXPECT_LT(plan.cost_trace[k], plan.cost_trace[k - 1]);
    }

    for (const Row& row : rows) {
      int hits = plan.residual && Evaluate(plan.residual->filter, row);
      for (const auto& s : plan.cache_steps) hits += Evaluate(s.refilter, row);
      ASSERT_EQ(hits, Evaluate(req.filter, row) ? 1 : 0) << Explain(plan);
    }
    Execute(plan, store, *catalog_);
  }
  EXPECT_GT(with_steps, 20u);
}

TEST_F(PlannerTest, ExplainRoundTrip) {
  CacheStore store;
  auto m = Manifest();
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    const ScanRequest req = Req(testing::RandomProjection(rng), testing::RandomEventFilter(rng));
    const ScanPlan plan = PlanScan(req, store, *m);
    const std::string text = Explain(plan);
    EXPECT_EQ(Explain(testing::ParsePlanText(text, m->schema)), text);
    Execute(plan, store, *catalog_);
  }
}

}  // namespace
}  // namespace dcache
