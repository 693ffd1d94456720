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

#include "dcache/dag.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <nlohmann/json.hpp>

#include "dcache/ingest.hpp"
#include "dcache/planner.hpp"
#include "support/table_oracle.hpp"
#include "support/temp_dir.hpp"

namespace dcache {
namespace {

using nlohmann::json;
using testing::TempDir;

constexpr const char* kThreeNodes = R"({"nodes": [
  {"name": "training_data", "inputs": [{"model": "final_data"}]},
  {"name": "cleaned_data",
   "inputs": [{"model": "lake.raw_data", "columns": ["c1", "c2", "c3"],
               "filter": "eventTime BETWEEN 2023-01-01 AND 2023-02-01"}],
   "transform": {"op": "identity"}},
  {"name": "final_data", "inputs": [{"model": "cleaned_data"}],
   "transform": {"op": "filter", "args": {"filter": "c2 > 250"}}}
]})";

std::vector<std::string> Names(const std::vector<NodeSpec>& nodes) {
  std::vector<std::string> out;
  for (const auto& n : nodes) out.push_back(n.name);
  return out;
}

// Row-at-a-time filter, independent of FilterMask.
ColumnarBatch RowFilter(const ColumnarBatch& b, const Predicate& p) {
  std::vector<uint8_t> keep(b.num_rows());
  for (size_t r = 0; r < b.num_rows(); ++r) keep[r] = Evaluate(p, b.RowAt(r));
  return b.Filter(keep);
}

class DagTest : public ::testing::Test {
 protected:
  void SetUp() override {
    catalog_ = std::make_unique<Catalog>(dir_.path());
    IngestTable(*catalog_, MonthlyEventsSpec("lake", "raw_data", 6000, 3));
  }

  // Reference interpreter: oracle scans plus row-level transforms, no cache.
  ColumnarBatch Reference(const std::vector<NodeSpec>& nodes, const std::string& name,
                          std::map<std::string, ColumnarBatch>& memo) {
    if (auto it = memo.find(name); it != memo.end()) return it->second;
    const NodeSpec& n = *std::find_if(nodes.begin(), nodes.end(),
                                      [&](const NodeSpec& s) { return s.name == name; });
    std::optional<ColumnarBatch> input;
    for (const NodeInput& in : n.inputs) {
      ColumnarBatch b;
      if (in.IsTable()) {
        const Schema& s = catalog_->Load("lake", "raw_data")->schema;
        std::vector<std::string> cols;
        for (const Field& f : s) cols.push_back(f.name);
        b = OracleScan(ScanRequest::Make("lake", "raw_data", "", in.columns.value_or(cols),
                                         in.filter_text.value_or(""), s),
                       *catalog_);
      } else {
        b = Reference(nodes, in.model, memo);
        if (in.filter_text) b = RowFilter(b, in.filter);
        if (in.columns) b = b.Project(*in.columns);
      }
      if (!input) {
        input = std::move(b);
      } else {
        input->Append(b);
      }
    }
    ColumnarBatch out;
    switch (n.transform.op) {
      case TransformOp::kIdentity:
        out = *input;
        break;
      case TransformOp::kProject:
        out = input->Project(n.transform.columns);
        break;
      case TransformOp::kFilter:
        out = RowFilter(*input, n.transform.filter);
        break;
      case TransformOp::kCount: {
        out = ColumnarBatch(n.output_schema);
        const Scalar v = Scalar::Int64(static_cast<int64_t>(input->num_rows()));
        out.AppendRow(std::span(&v, 1));
      }
    }
    memo[name] = out;
    return out;
  }

  // Random DAG over the events table. Every node keeps the full table
  // columns except sinks, so multi-input nodes always line up.
  json RandomDag(Rng& rng, int size) {
    std::vector<std::string> names;
    while (names.size() < static_cast<size_t>(size)) {
      std::string s;
      for (int i = 0; i < 5; ++i) s += static_cast<char>('a' + rng.UniformInt(0, 25));
      if (std::find(names.begin(), names.end(), s) == names.end()) names.push_back(s);
    }
    json nodes = json::array();
    for (int i = 0; i < size; ++i) {
      json inputs = json::array();
      const int parents = i == 0 ? 0 : static_cast<int>(rng.UniformInt(0, 2));
      std::set<int> used;
      for (int k = 0; k < parents; ++k) {
        const int p = static_cast<int>(rng.UniformInt(0, i - 1));
        if (!used.insert(p).second) continue;
        json in = {{"model", names[p]}};
        if (rng.Bernoulli(0.3)) in["filter"] = "c1 < " + std::to_string(rng.UniformInt(0, 99999));
        inputs.push_back(in);
      }
      if (inputs.empty() || rng.Bernoulli(0.2)) {
        json in = {{"model", "lake.raw_data"}};
        if (rng.Bernoulli(0.8)) in["filter"] = testing::RandomEventFilter(rng);
        inputs.push_back(in);
      }
      json transform = {{"op", "identity"}};
      if (rng.Bernoulli(0.4)) {
        transform = {{"op", "filter"},
                     {"args", {{"filter", "c2 <= " + std::to_string(rng.UniformInt(100, 1000))}}}};
      }
      nodes.push_back({{"name", names[i]}, {"inputs", inputs}, {"transform", transform}});
    }
    return {{"nodes", nodes}};
  }

  TempDir dir_;
  std::unique_ptr<Catalog> catalog_;
};

TEST_F(DagTest, ThreeNodeOrder) {
  const auto nodes = ParseDag(std::string_view(kThreeNodes), *catalog_);
  EXPECT_EQ(Names(nodes), (std::vector<std::string>{"cleaned_data", "final_data", "training_data"}));
  EXPECT_EQ(nodes[0].output_schema.size(), 3u);
  EXPECT_EQ(nodes[2].output_schema, nodes[0].output_schema);
}

TEST_F(DagTest, SingleNode) {
  const auto nodes = ParseDag(
      std::string_view(R"({"nodes": [{"name": "only", "inputs": [{"model": "lake.raw_data"}]}]})"),
      *catalog_);
  ASSERT_EQ(nodes.size(), 1u);
  EXPECT_EQ(nodes[0].output_schema, catalog_->Load("lake", "raw_data")->schema);
}

TEST_F(DagTest, ShuffledDeclarationsGiveSameOrder) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    json doc = RandomDag(rng, 20);
    const auto order = Names(ParseDag(doc, *catalog_));
    ASSERT_EQ(order.size(), 20u);
    // Parents precede children.
    const auto nodes = ParseDag(doc, *catalog_);
    for (size_t i = 0; i < nodes.size(); ++i) {
      for (const auto& in : nodes[i].inputs) {
        if (in.IsTable()) continue;
        const auto pos = std::find(order.begin(), order.end(), in.model) - order.begin();
        EXPECT_LT(static_cast<size_t>(pos), i);
      }
    }
    std::vector<json> list(doc["nodes"].begin(), doc["nodes"].end());
    rng.Shuffle(list);
    doc["nodes"] = list;
    EXPECT_EQ(Names(ParseDag(doc, *catalog_)), order);
  }
}

TEST_F(DagTest, ValidationErrors) {
  auto parse = [&](std::string_view text) { return ParseDag(text, *catalog_); };
  try {
    parse(R"({"nodes": [{"name": "a", "inputs": [{"model": "c"}]},
                        {"name": "b", "inputs": [{"model": "a"}]},
                        {"name": "c", "inputs": [{"model": "b"}, {"model": "lake.raw_data"}]},
                        {"name": "d", "inputs": [{"model": "lake.raw_data"}]}]})");
    FAIL() << "expected a cycle";
  } catch (const CycleError& e) {
    EXPECT_EQ(e.cycle(), (std::vector<std::string>{"a", "b", "c", "a"}));
    EXPECT_NE(std::string(e.what()).find("a -> b -> c -> a"), std::string::npos);
  }
  try {
    parse(R"({"nodes": [{"name": "a", "inputs": [{"model": "a"}]}]})");
    FAIL() << "expected a cycle";
  } catch (const CycleError& e) {
    EXPECT_EQ(e.cycle(), (std::vector<std::string>{"a", "a"}));
  }

  EXPECT_THROW(parse(R"({"nodes": [{"name": "a", "inputs": [{"model": "zzz"}]}]})"), NotFoundError);
  EXPECT_THROW(parse(R"({"nodes": [{"name": "a", "inputs": [{"model": "lake.nope"}]}]})"),
               NotFoundError);
  EXPECT_THROW(parse(R"({"nodes": [{"name": "a", "inputs": [{"model": "lake.raw_data"}]},
                                   {"name": "a", "inputs": [{"model": "lake.raw_data"}]}]})"),
               InvalidArgument);
  EXPECT_THROW(parse(R"({"nodes": [{"name": "a", "inputs": [{"model": "lake.raw_data",
                                                             "columns": ["c7"]}]}]})"),
               NotFoundError);
  EXPECT_THROW(parse(R"({"nodes": [{"name": "a", "inputs": [{"model": "lake.raw_data",
                                                             "filter": "c1 <"}]}]})"),
               ParseError);
  EXPECT_THROW(parse(R"({"nodes": [{"name": "a", "inputs": [{"model": "lake.raw_data"}],
                                    "transform": {"op": "explode"}}]})"),
               ParseError);
  EXPECT_THROW(parse(R"({"nodes": [{"name": "a", "inputs": [{"model": "lake.raw_data",
                                                             "columns": ["c1"]},
                                                            {"model": "lake.raw_data",
                                                             "columns": ["c2"]}]}]})"),
               InvalidArgument);
  // In-memory filters must be evaluable.
  EXPECT_THROW(parse(R"({"nodes": [{"name": "a", "inputs": [{"model": "lake.raw_data"}],
                                    "transform": {"op": "filter", "args": {"filter": "c3 LIKE 'x%'"}}}]})"),
               InvalidArgument);
  EXPECT_THROW(parse(R"({"nodes": [{"name": "a", "inputs": [{"model": "lake.raw_data",
                                                             "columns": ["c1"]}]},
                                   {"name": "b", "inputs": [{"model": "a", "filter": "c2 > 1"}]}]})"),
               NotFoundError);
  EXPECT_THROW(parse("{\"nodes\": ["), ParseError);
  EXPECT_THROW(parse(R"({"nodes": [{"inputs": []}]})"), ParseError);
}

TEST_F(DagTest, RepeatedRunIsServedFromCache) {
  const auto nodes = ParseDag(std::string_view(kThreeNodes), *catalog_);
  CacheStore store;
  const DagResult first = RunDag(nodes, store, *catalog_);
  ASSERT_EQ(first.nodes.size(), 3u);
  EXPECT_GT(first.nodes[0].storage_bytes_read, 0u);
  EXPECT_EQ(first.nodes[0].scans.size(), 1u);
  // Node-to-node edges never scan.
  EXPECT_TRUE(first.nodes[1].scans.empty());
  EXPECT_TRUE(first.nodes[2].scans.empty());
  // Identity passes the parent output by reference.
  EXPECT_EQ(first.outputs.at("training_data").get(), first.outputs.at("final_data").get());

  const DagResult second = RunDag(nodes, store, *catalog_);
  EXPECT_EQ(second.nodes[0].storage_bytes_read, 0u);
  EXPECT_GT(second.nodes[0].cache_bytes_served, 0u);
  EXPECT_EQ(second.final_output->CanonicalRows(), first.final_output->CanonicalRows());
}

TEST_F(DagTest, IdentityNodeMatchesOracle) {
  const auto nodes = ParseDag(std::string_view(R"({"nodes": [{"name": "n",
      "inputs": [{"model": "lake.raw_data", "columns": ["c3", "eventTime"],
                  "filter": "c1 BETWEEN 500 AND 60000 AND eventTime >= 2023-05-01"}]}]})"),
                              *catalog_);
  CacheStore store;
  const DagResult r = RunDag(nodes, store, *catalog_);
  const Schema& s = catalog_->Load("lake", "raw_data")->schema;
  const ScanRequest req = ScanRequest::Make("lake", "raw_data", "", {"c3", "eventTime"},
                                            "c1 BETWEEN 500 AND 60000 AND eventTime >= 2023-05-01", s);
  EXPECT_EQ(r.final_output->CanonicalRows(), OracleScan(req, *catalog_).CanonicalRows());
}

TEST_F(DagTest, RandomDagsMatchReferenceWithAndWithoutCache) {
  Rng rng(99);
  CacheStore store({.byte_budget = 2'000'000});
  for (int trial = 0; trial < 15; ++trial) {
    json doc = RandomDag(rng, 8);
    // A sink that counts and one that projects.
    const std::string last = doc["nodes"].back()["name"];
    doc["nodes"].push_back({{"name", "zz_count"}, {"inputs", {{{"model", last}}}},
                            {"transform", {{"op", "count"}}}});
    doc["nodes"].push_back({{"name", "zz_proj"}, {"inputs", {{{"model", last}, {"columns", {"c3", "c1"}}}}},
                            {"transform", {{"op", "project"}, {"args", {{"columns", {"c1"}}}}}}});
    const auto nodes = ParseDag(doc, *catalog_);

    const DagResult cached = RunDag(nodes, store, *catalog_);
    const DagResult direct = RunDag(nodes, store, *catalog_, {.use_cache = false});
    std::map<std::string, ColumnarBatch> memo;
    for (const NodeSpec& n : nodes) {
      const auto want = Reference(nodes, n.name, memo).CanonicalRows();
      ASSERT_EQ(cached.outputs.at(n.name)->CanonicalRows(), want) << n.name << "\n" << doc.dump();
      ASSERT_EQ(direct.outputs.at(n.name)->CanonicalRows(), want) << n.name;
    }
    for (const NodeRun& run : direct.nodes) EXPECT_EQ(run.cache_bytes_served, 0u);
  }
}

TEST_F(DagTest, RuntimeErrorsNameTheNode) {
  const auto nodes = ParseDag(std::string_view(kThreeNodes), *catalog_);
  const auto m = catalog_->Load("lake", "raw_data");
  for (const DataFileMeta* f : m->LiveFiles("")) std::filesystem::remove(catalog_->DataPath(*m, *f));
  CacheStore store;
  try {
    RunDag(nodes, store, *catalog_);
    FAIL() << "expected a node error";
  } catch (const NodeError& e) {
    EXPECT_EQ(e.node(), "cleaned_data");
    EXPECT_EQ(std::string(e.what()).rfind("node 'cleaned_data': ", 0), 0u);
  }
}

}  // namespace
}  // namespace dcache
