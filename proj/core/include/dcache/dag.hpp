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

// Declarative pipeline front end. A node names its inputs (catalog tables or
// other nodes, each with optional columns and filter) and one built-in
// transform. Table inputs become scan requests served through the cache;
// node-to-node edges stay in memory.
//
// Document format (JSON):
//
//   {"nodes": [{"name": "cleaned_data",
//               "inputs": [{"model": "lake.raw_data", "columns": ["c1"],
//                           "filter": "eventTime BETWEEN 2023-01-01 AND 2023-02-01"}],
//               "transform": {"op": "identity"}}]}
//
// `model` of the form ns.table is a table; a bare name is a node. Ops:
// identity, project {"columns": [...]}, filter {"filter": "..."}, count.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dcache/cache.hpp"
#include "dcache/catalog.hpp"
#include "dcache/errors.hpp"
#include "dcache/executor.hpp"

namespace dcache {

struct NodeInput {
  std::string model;
  std::optional<std::vector<std::string>> columns;
  std::optional<std::string> filter_text;
  // Parsed filter_text; TRUE when absent.
  Predicate filter = Predicate::True();

  bool IsTable() const { return model.find('.') != std::string::npos; }
};

enum class TransformOp { kIdentity, kProject, kFilter, kCount };

struct Transform {
  TransformOp op = TransformOp::kIdentity;
  std::vector<std::string> columns;  // kProject
  std::string filter_text;           // kFilter
  Predicate filter = Predicate::True();
};

struct NodeSpec {
  std::string name;
  std::vector<NodeInput> inputs;
  Transform transform;
  // Columns the node produces, derived during validation.
  Schema output_schema;
};

class CycleError : public InvalidArgument {
 public:
  explicit CycleError(std::vector<std::string> cycle);
  // Node names along the cycle, first name repeated at the end.
  const std::vector<std::string>& cycle() const { return cycle_; }

 private:
  std::vector<std::string> cycle_;
};

// Error raised while running a node; the message is prefixed with the node.
class NodeError : public Error {
 public:
  NodeError(std::string node, const std::string& message);
  const std::string& node() const { return node_; }

 private:
  std::string node_;
};

// Validates the document against the catalog and returns nodes in
// topological order, ties broken by name. Several inputs to one node are
// concatenated and must produce the same columns. Throws ParseError on a
// malformed document, InvalidArgument on duplicate names, NotFoundError on
// unknown references, CycleError on cycles.
std::vector<NodeSpec> ParseDag(const nlohmann::json& doc, const Catalog& catalog);
std::vector<NodeSpec> ParseDag(std::string_view text, const Catalog& catalog);

struct NodeRun {
  std::string node;
  // One entry per table input, in input order.
  std::vector<ExecutionMetrics> scans;
  uint64_t storage_bytes_read = 0;
  uint64_t cache_bytes_served = 0;
  uint64_t rows_out = 0;
};

struct DagResult {
  std::vector<NodeRun> nodes;
  std::map<std::string, std::shared_ptr<const ColumnarBatch>> outputs;
  // Output of the last node in topological order.
  std::shared_ptr<const ColumnarBatch> final_output;
};

struct DagOptions {
  // When false, table inputs bypass the cache entirely.
  bool use_cache = true;
};

// Runs nodes sequentially in the given (topological) order.
DagResult RunDag(const std::vector<NodeSpec>& nodes, CacheStore& store, const Catalog& catalog,
                 const DagOptions& options = {});

}  // namespace dcache
