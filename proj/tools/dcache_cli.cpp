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

// dcache command line: table ingestion, workload generation, trace replay
// under the four cache modes, plan inspection and pipeline runs.
//
// Exit codes: 0 success, 1 usage or input error, 2 verification failure.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dcache/bench.hpp"
#include "dcache/dag.hpp"
#include "dcache/errors.hpp"
#include "dcache/executor.hpp"
#include "dcache/ingest.hpp"
#include "dcache/planner.hpp"

namespace {

using nlohmann::json;
using namespace dcache;

constexpr int kUsageError = 1;
constexpr int kVerificationFailure = 2;

json ReadJsonFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

CacheConfig MakeCacheConfig(uint64_t cache_bytes) {
  CacheConfig config;
  if (cache_bytes > 0) config.byte_budget = cache_bytes;
  return config;
}

int Ingest(const std::string& spec_path, const std::string& root) {
  const json doc = ReadJsonFile(spec_path);
  const TableSpec spec =
      TableSpec::FromJson(doc, std::filesystem::path(spec_path).parent_path());
  Catalog catalog(root);
  const auto m = IngestTable(catalog, spec);
  uint64_t rows = 0, bytes = 0;
  for (const auto& f : m->files) {
    rows += f.row_count;
    bytes += f.total_bytes;
  }
  std::cout << m->QualifiedName() << "@" << m->LatestSnapshotId() << ": " << m->files.size()
            << " files, " << rows << " rows, " << bytes << " bytes\n";
  return 0;
}

int Gen(const std::string& kind, uint64_t seed, const std::string& out, const WorkloadParams& p) {
  const auto trace = GenerateWorkload(kind, p, seed);
  WriteTraceFile(out, trace);
  std::cout << "wrote " << trace.size() << " entries to " << out << "\n";
  return 0;
}

int Replay(const std::string& trace_path, const std::string& mode_name, const std::string& root,
           uint64_t cache_bytes, const std::string& report_path, const std::string& baseline,
           bool verify) {
  const CacheMode mode = ParseMode(mode_name);
  if (verify && mode != CacheMode::kDiff) {
    std::cerr << "--verify-optimal requires --mode diff\n";
    return kUsageError;
  }
  const auto trace = ReadTraceFile(trace_path);
  Catalog catalog(root);
  const CacheConfig config = MakeCacheConfig(cache_bytes);
  BenchReport report = dcache::Replay(trace, mode, catalog, config);
  if (!baseline.empty()) {
    const CacheMode base_mode = ParseMode(baseline);
    AttachSavings(report, base_mode == mode ? report : dcache::Replay(trace, base_mode, catalog, config));
  }
  if (!report_path.empty()) WriteText(report_path, report.ToJson().dump(2) + "\n");
  std::cout << report.ToTable();

  if (verify) {
    const OptimalityResult r = VerifyOptimal(trace, report, catalog);
    std::cout << "optimal bytes " << r.optimal_bytes << ", diff bytes " << r.diff_bytes << ": "
              << (r.pass ? "optimal" : "NOT optimal") << "\n";
    if (!r.pass) return kVerificationFailure;
  }
  return 0;
}

int Compare(const std::string& trace_path, const std::string& root, uint64_t cache_bytes,
            const std::string& report_path) {
  const auto trace = ReadTraceFile(trace_path);
  Catalog catalog(root);
  const CacheConfig config = MakeCacheConfig(cache_bytes);
  std::vector<BenchReport> reports;
  for (CacheMode m : {CacheMode::kNone, CacheMode::kResult, CacheMode::kScan, CacheMode::kDiff}) {
    reports.push_back(dcache::Replay(trace, m, catalog, config));
    AttachSavings(reports.back(), reports.front());
  }
  json doc = json::array();
  std::printf("%-8s %16s %16s %6s %8s %7s %10s\n", "mode", "storage_bytes", "cache_bytes", "hits",
              "partial", "misses", "savings");
  for (const auto& r : reports) {
    std::printf("%-8s %16llu %16llu %6llu %8llu %7llu %9.2f%%\n",
                std::string(ModeName(r.mode)).c_str(),
                static_cast<unsigned long long>(r.totals.storage_bytes),
                static_cast<unsigned long long>(r.totals.cache_bytes),
                static_cast<unsigned long long>(r.totals.hits),
                static_cast<unsigned long long>(r.totals.partial_hits),
                static_cast<unsigned long long>(r.totals.misses), r.savings_vs->pct);
    doc.push_back(r.ToJson());
  }
  if (!report_path.empty()) WriteText(report_path, doc.dump(2) + "\n");

  bool ordered = true;
  for (size_t i = 1; i < reports.size(); ++i) {
    ordered = ordered && reports[i].totals.storage_bytes <= reports[i - 1].totals.storage_bytes;
  }
  for (size_t e = 0; e < trace.size(); ++e) {
    for (const auto& r : reports) ordered = ordered && r.entries[e].digest == reports[0].entries[e].digest;
  }
  std::cout << (ordered ? "dominance holds: diff <= scan <= result <= none\n"
                        : "dominance VIOLATED or answers differ\n");
  return ordered ? 0 : kVerificationFailure;
}

int ExplainEntry(const std::string& trace_path, uint64_t seq, const std::string& root,
                 uint64_t cache_bytes) {
  const auto trace = ReadTraceFile(trace_path);
  Catalog catalog(root);
  CacheStore store(MakeCacheConfig(cache_bytes));
  for (const auto& e : trace) {
    const ScanRequest req = e.ToRequest(catalog);
    if (e.seq == seq) {
      const auto manifest = catalog.Load(req.namespace_name, req.table);
      std::cout << Explain(PlanScan(req, store, *manifest));
      return 0;
    }
    ExecuteRequest(req, store, catalog);
  }
  std::cerr << "no trace entry with seq " << seq << "\n";
  return kUsageError;
}

std::vector<std::string> SplitColumns(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string c; std::getline(ss, c, ',');) {
    if (!c.empty()) out.push_back(c);
  }
  return out;
}

int Scan(const std::string& root, const std::string& table, const std::string& snapshot,
         const std::string& columns, const std::string& filter, size_t limit) {
  const size_t dot = table.find('.');
  if (dot == std::string::npos) {
    std::cerr << "--table must be namespace.table\n";
    return kUsageError;
  }
  Catalog catalog(root);
  const std::string ns = table.substr(0, dot), name = table.substr(dot + 1);
  const auto manifest = catalog.Load(ns, name);
  std::vector<std::string> cols = SplitColumns(columns);
  if (cols.empty()) {
    for (const Field& f : manifest->schema) cols.push_back(f.name);
  }
  const ScanRequest req = ScanRequest::Make(ns, name, snapshot, cols, filter, manifest->schema);
  const ScanResult r = catalog.ReadScan(*manifest, snapshot, req.projections, req.filter);
  for (size_t i = 0; i < cols.size(); ++i) std::cout << (i ? "\t" : "") << cols[i];
  std::cout << "\n";
  for (size_t row = 0; row < std::min(limit, r.batch.num_rows()); ++row) {
    for (size_t c = 0; c < r.batch.num_columns(); ++c) {
      std::cout << (c ? "\t" : "") << r.batch.Value(row, c).ToString();
    }
    std::cout << "\n";
  }
  std::cout << "-- " << r.stats.rows_returned << " rows, " << r.stats.files_scanned
            << " files, " << r.stats.bytes_read << " bytes (estimate "
            << EstimateScanBytes(*manifest, snapshot, req.projections, req.filter) << ")\n";
  return 0;
}

int RunPipeline(const std::string& path, const std::string& root, uint64_t cache_bytes,
                int runs) {
  Catalog catalog(root);
  const auto nodes = ParseDag(ReadJsonFile(path), catalog);
  CacheStore store(MakeCacheConfig(cache_bytes));
  for (int run = 1; run <= runs; ++run) {
    const DagResult r = RunDag(nodes, store, catalog);
    std::cout << "run " << run << "\n";
    for (const NodeRun& n : r.nodes) {
      std::cout << "  " << n.node << ": rows " << n.rows_out << ", storage " << n.storage_bytes_read
                << " bytes, cache " << n.cache_bytes_served << " bytes\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dcache: differential scan cache over a local table catalog"};
  app.require_subcommand(1);
  std::function<int()> action;

  std::string root = ".";
  uint64_t cache_bytes = 0;

  auto* ingest = app.add_subcommand("ingest", "Create a table from a JSON table spec");
  std::string spec_path;
  ingest->add_option("--spec", spec_path, "Table spec file")->required()->check(CLI::ExistingFile);
  ingest->add_option("--root", root, "Catalog root directory")->required();
  ingest->callback([&] { action = [&] { return Ingest(spec_path, root); }; });

  auto* gen = app.add_subcommand("gen", "Generate a scan trace");
  std::string kind, out;
  uint64_t seed = 0;
  WorkloadParams params;
  gen->add_option("--kind", kind, "motivating | random-overlap | nested")->required();
  gen->add_option("--seed", seed, "Random seed")->required();
  gen->add_option("--out", out, "Output trace file")->required();
  gen->add_option("--entries", params.entries, "Number of entries");
  gen->add_option("--overlap", params.overlap, "Chance an interval derives from an earlier one")
      ->check(CLI::Range(0.0, 1.0));
  gen->add_option("--namespace", params.namespace_name, "Namespace of the target table");
  gen->add_option("--table", params.table, "Target table");
  gen->callback([&] { action = [&] { return Gen(kind, seed, out, params); }; });

  auto* replay = app.add_subcommand("replay", "Replay a trace under one cache mode");
  std::string trace_path, mode, report_path, baseline;
  bool verify = false;
  replay->add_option("--trace", trace_path, "Trace file")->required()->check(CLI::ExistingFile);
  replay->add_option("--mode", mode, "none | result | scan | diff")->required();
  replay->add_option("--root", root, "Catalog root directory")->required();
  replay->add_option("--cache-bytes", cache_bytes, "Cache byte budget (default 1 GiB)");
  replay->add_option("--report", report_path, "Write the JSON report here");
  replay->add_option("--baseline", baseline, "Mode to compute savings against");
  replay->add_flag("--verify-optimal", verify, "Check diff-mode bytes against the lower bound");
  replay->callback([&] {
    action = [&] {
      return Replay(trace_path, mode, root, cache_bytes, report_path, baseline, verify);
    };
  });

  auto* compare = app.add_subcommand("compare", "Replay a trace under all four modes");
  compare->add_option("--trace", trace_path, "Trace file")->required()->check(CLI::ExistingFile);
  compare->add_option("--root", root, "Catalog root directory")->required();
  compare->add_option("--cache-bytes", cache_bytes, "Cache byte budget (default 1 GiB)");
  compare->add_option("--report", report_path, "Write all four JSON reports here");
  compare->callback(
      [&] { action = [&] { return Compare(trace_path, root, cache_bytes, report_path); }; });

  auto* explain = app.add_subcommand("explain", "Show the plan for one trace entry");
  uint64_t entry = 0;
  explain->add_option("--trace", trace_path, "Trace file")->required()->check(CLI::ExistingFile);
  explain->add_option("--entry", entry, "Entry seq; earlier entries warm the cache")->required();
  explain->add_option("--root", root, "Catalog root directory")->required();
  explain->add_option("--cache-bytes", cache_bytes, "Cache byte budget (default 1 GiB)");
  explain->callback(
      [&] { action = [&] { return ExplainEntry(trace_path, entry, root, cache_bytes); }; });

  auto* scan = app.add_subcommand("scan", "Run one scan against storage and print rows");
  std::string table, snapshot, columns, filter;
  size_t limit = 20;
  scan->add_option("--root", root, "Catalog root directory")->required();
  scan->add_option("--table", table, "namespace.table")->required();
  scan->add_option("--snapshot", snapshot, "Snapshot id (default latest)");
  scan->add_option("--columns", columns, "Comma-separated projections (default all)");
  scan->add_option("--filter", filter, "Filter expression (default TRUE)");
  scan->add_option("--limit", limit, "Rows to print");
  scan->callback([&] {
    action = [&] { return Scan(root, table, snapshot, columns, filter, limit); };
  });

  auto* run_dag = app.add_subcommand("run-dag", "Run a pipeline document through the cache");
  std::string pipeline;
  int runs = 1;
  run_dag->add_option("--pipeline", pipeline, "Pipeline file")->required()->check(CLI::ExistingFile);
  run_dag->add_option("--root", root, "Catalog root directory")->required();
  run_dag->add_option("--cache-bytes", cache_bytes, "Cache byte budget (default 1 GiB)");
  run_dag->add_option("--runs", runs, "Run the pipeline this many times")->check(CLI::PositiveNumber);
  run_dag->callback([&] { action = [&] { return RunPipeline(pipeline, root, cache_bytes, runs); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }
  try {
    return action();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  }
}
