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

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "dcache/planner.hpp"

namespace dcache {
namespace {

using nlohmann::json;

std::pair<std::string, std::string> SplitTable(const std::string& model) {
  const size_t dot = model.find('.');
  return {model.substr(0, dot), model.substr(dot + 1)};
}

std::vector<std::string> ColumnNames(const Schema& schema) {
  std::vector<std::string> out;
  for (const Field& f : schema) out.push_back(f.name);
  return out;
}

Schema ProjectSchema(const Schema& schema, const std::vector<std::string>& columns,
                     const std::string& where) {
  if (columns.empty()) throw InvalidArgument(where + ": empty column list");
  Schema out;
  std::set<std::string> seen;
  for (const auto& c : columns) {
    const Field* f = FindField(schema, c);
    if (!f) throw NotFoundError(where + ": unknown column '" + c + "'");
    if (!seen.insert(c).second) throw InvalidArgument(where + ": duplicate column '" + c + "'");
    out.push_back(*f);
  }
  return out;
}

bool SameColumns(const Schema& a, const Schema& b) {
  if (a.size() != b.size()) return false;
  for (const Field& f : a) {
    const Field* g = FindField(b, f.name);
    if (!g || g->type != f.type) return false;
  }
  return true;
}

Predicate ParseInMemoryFilter(const std::string& text, const Schema& schema,
                              const std::string& where) {
  Predicate p = ParsePredicate(text, schema);
  if (p.opaque()) throw InvalidArgument(where + ": unsupported filter '" + text + "'");
  return p;
}

NodeSpec ReadNode(const json& j) {
  if (!j.is_object()) throw ParseError("node must be an object");
  NodeSpec n;
  n.name = j.at("name").get<std::string>();
  if (n.name.empty() || n.name.find('.') != std::string::npos) {
    throw ParseError("invalid node name '" + n.name + "'");
  }
  for (const json& in : j.at("inputs")) {
    NodeInput input;
    input.model = in.at("model").get<std::string>();
    if (in.contains("columns")) input.columns = in["columns"].get<std::vector<std::string>>();
    if (in.contains("filter")) input.filter_text = in["filter"].get<std::string>();
    n.inputs.push_back(std::move(input));
  }
  if (n.inputs.empty()) throw ParseError("node '" + n.name + "' has no inputs");

  const json& t = j.value("transform", json{{"op", "identity"}});
  const std::string op = t.at("op").get<std::string>();
  const json args = t.value("args", json::object());
  if (op == "identity") {
    n.transform.op = TransformOp::kIdentity;
  } else if (op == "project") {
    n.transform.op = TransformOp::kProject;
    n.transform.columns = args.at("columns").get<std::vector<std::string>>();
  } else if (op == "filter") {
    n.transform.op = TransformOp::kFilter;
    n.transform.filter_text = args.at("filter").get<std::string>();
  } else if (op == "count") {
    n.transform.op = TransformOp::kCount;
  } else {
    throw ParseError("node '" + n.name + "': unknown transform '" + op + "'");
  }
  return n;
}

// Some cycle among `remaining`, walking parent edges from the smallest name.
std::vector<std::string> FindCycle(const std::set<std::string>& remaining,
                                   const std::map<std::string, std::set<std::string>>& parents) {
  std::vector<std::string> path;
  std::map<std::string, size_t> pos;
  std::string cur = *remaining.begin();
  while (!pos.contains(cur)) {
    pos[cur] = path.size();
    path.push_back(cur);
    for (const auto& p : parents.at(cur)) {
      if (remaining.contains(p)) {
        cur = p;
        break;
      }
    }
  }
  std::vector<std::string> cycle(path.begin() + static_cast<std::ptrdiff_t>(pos[cur]), path.end());
  // Parent edges were followed backwards; report in data-flow order.
  std::reverse(cycle.begin(), cycle.end());
  std::rotate(cycle.begin(), std::min_element(cycle.begin(), cycle.end()), cycle.end());
  cycle.push_back(cycle.front());
  return cycle;
}

std::string JoinCycle(const std::vector<std::string>& cycle) {
  std::string s;
  for (const auto& n : cycle) s += (s.empty() ? "" : " -> ") + n;
  return s;
}

}  // namespace

CycleError::CycleError(std::vector<std::string> cycle)
    : InvalidArgument("cycle detected: " + JoinCycle(cycle)), cycle_(std::move(cycle)) {}

NodeError::NodeError(std::string node, const std::string& message)
    : Error("node '" + node + "': " + message), node_(std::move(node)) {}

std::vector<NodeSpec> ParseDag(const json& doc, const Catalog& catalog) {
  std::map<std::string, NodeSpec> by_name;
  try {
    for (const json& j : doc.at("nodes")) {
      NodeSpec n = ReadNode(j);
      const std::string name = n.name;
      if (!by_name.emplace(name, std::move(n)).second) {
        throw InvalidArgument("duplicate node name '" + name + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed pipeline document: ") + e.what());
  }

  std::map<std::string, std::set<std::string>> parents, children;
  for (const auto& [name, n] : by_name) {
    parents[name];
    for (const NodeInput& in : n.inputs) {
      if (in.IsTable()) {
        const auto [ns, table] = SplitTable(in.model);
        if (!catalog.HasTable(ns, table)) {
          throw NotFoundError("node '" + name + "': unknown table '" + in.model + "'");
        }
      } else if (!by_name.contains(in.model)) {
        throw NotFoundError("node '" + name + "': unknown input '" + in.model + "'");
      } else {
        parents[name].insert(in.model);
        children[in.model].insert(name);
      }
    }
  }

  // Kahn's algorithm; the ready set is ordered by name.
  std::map<std::string, size_t> indegree;
  std::set<std::string> ready;
  for (const auto& [name, ps] : parents) {
    indegree[name] = ps.size();
    if (ps.empty()) ready.insert(name);
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    const std::string cur = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(cur);
    for (const auto& c : children[cur]) {
      if (--indegree[c] == 0) ready.insert(c);
    }
  }
  if (order.size() != by_name.size()) {
    std::set<std::string> remaining;
    for (const auto& [name, d] : indegree) {
      if (d > 0) remaining.insert(name);
    }
    throw CycleError(FindCycle(remaining, parents));
  }

  std::vector<NodeSpec> out;
  for (const auto& name : order) {
    NodeSpec n = std::move(by_name.at(name));
    std::optional<Schema> input_schema;
    for (NodeInput& in : n.inputs) {
      const std::string where = "node '" + name + "' input '" + in.model + "'";
      Schema base;
      if (in.IsTable()) {
        const auto [ns, table] = SplitTable(in.model);
        base = catalog.Load(ns, table)->schema;
        if (in.filter_text) in.filter = ParsePredicate(*in.filter_text, base);
      } else {
        base = std::find_if(out.begin(), out.end(), [&](const NodeSpec& s) {
                 return s.name == in.model;
               })->output_schema;
        if (in.filter_text) in.filter = ParseInMemoryFilter(*in.filter_text, base, where);
      }
      Schema s = in.columns ? ProjectSchema(base, *in.columns, where) : base;
      if (!input_schema) {
        input_schema = std::move(s);
      } else if (!SameColumns(*input_schema, s)) {
        throw InvalidArgument("node '" + name + "': inputs produce different columns");
      }
    }

    const std::string where = "node '" + name + "' transform";
    switch (n.transform.op) {
      case TransformOp::kIdentity:
        n.output_schema = *input_schema;
        break;
      case TransformOp::kProject:
        n.output_schema = ProjectSchema(*input_schema, n.transform.columns, where);
        break;
      case TransformOp::kFilter:
        n.transform.filter = ParseInMemoryFilter(n.transform.filter_text, *input_schema, where);
        n.output_schema = *input_schema;
        break;
      case TransformOp::kCount:
        n.output_schema = {{"count", ColumnType::kInt64}};
        break;
    }
    out.push_back(std::move(n));
  }
  return out;
}

std::vector<NodeSpec> ParseDag(std::string_view text, const Catalog& catalog) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed pipeline document: ") + e.what());
  }
  return ParseDag(doc, catalog);
}

DagResult RunDag(const std::vector<NodeSpec>& nodes, CacheStore& store, const Catalog& catalog,
                 const DagOptions& options) {
  DagResult result;
  CacheStore bypass;
  for (const NodeSpec& n : nodes) {
    NodeRun run;
    run.node = n.name;
    try {
      std::vector<std::shared_ptr<const ColumnarBatch>> inputs;
      for (const NodeInput& in : n.inputs) {
        if (in.IsTable()) {
          const auto [ns, table] = SplitTable(in.model);
          const auto manifest = catalog.Load(ns, table);
          const ScanRequest req = ScanRequest::Make(
              ns, table, "", in.columns.value_or(ColumnNames(manifest->schema)),
              in.filter_text.value_or(""), manifest->schema);
          ExecutionResult r;
          if (options.use_cache) {
            r = ExecuteRequest(req, store, catalog);
          } else {
            r = Execute(PlanScan(req, bypass, *manifest), bypass, catalog, {.store_results = false});
          }
          run.storage_bytes_read += r.metrics.storage_bytes_read;
          run.cache_bytes_served += r.metrics.cache_bytes_served;
          run.scans.push_back(r.metrics);
          inputs.push_back(std::make_shared<const ColumnarBatch>(std::move(r.batch)));
          continue;
        }
        const auto it = result.outputs.find(in.model);
        if (it == result.outputs.end()) {
          throw InvalidArgument("input '" + in.model + "' has not run yet");
        }
        std::shared_ptr<const ColumnarBatch> batch = it->second;
        if (in.filter_text) {
          batch = std::make_shared<const ColumnarBatch>(batch->Filter(FilterMask(in.filter, *batch)));
        }
        if (in.columns) batch = std::make_shared<const ColumnarBatch>(batch->Project(*in.columns));
        inputs.push_back(std::move(batch));
      }

      std::shared_ptr<const ColumnarBatch> input = inputs.front();
      if (inputs.size() > 1) {
        ColumnarBatch all(input->schema());
        for (const auto& b : inputs) all.Append(*b);
        input = std::make_shared<const ColumnarBatch>(std::move(all));
      }

      std::shared_ptr<const ColumnarBatch> output;
      switch (n.transform.op) {
        case TransformOp::kIdentity:
          output = input;
          break;
        case TransformOp::kProject:
          output = std::make_shared<const ColumnarBatch>(input->Project(n.transform.columns));
          break;
        case TransformOp::kFilter:
          output = std::make_shared<const ColumnarBatch>(
              input->Filter(FilterMask(n.transform.filter, *input)));
          break;
        case TransformOp::kCount: {
          ColumnarBatch count(n.output_schema);
          const Scalar v = Scalar::Int64(static_cast<int64_t>(input->num_rows()));
          count.AppendRow(std::span(&v, 1));
          output = std::make_shared<const ColumnarBatch>(std::move(count));
          break;
        }
      }
      run.rows_out = output->num_rows();
      result.outputs[n.name] = output;
      result.final_output = output;
    } catch (const NodeError&) {
      throw;
    } catch (const std::exception& e) {
      throw NodeError(n.name, e.what());
    }
    result.nodes.push_back(std::move(run));
  }
  return result;
}

}  // namespace dcache
