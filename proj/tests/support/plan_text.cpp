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

#include "support/plan_text.hpp"

#include <sstream>

#include "dcache/errors.hpp"

namespace dcache::testing {
namespace {

std::string_view Strip(std::string_view s, std::string_view prefix) {
  if (s.substr(0, prefix.size()) != prefix) {
    throw ParseError("expected '" + std::string(prefix) + "' in: " + std::string(s));
  }
  return s.substr(prefix.size());
}

}  // namespace

ScanPlan ParsePlanText(std::string_view text, const Schema& schema) {
  std::istringstream in{std::string(text)};
  std::string line;
  ScanPlan plan;

  std::getline(in, line);
  std::string_view head = Strip(line, "scan ");
  const size_t dot = head.find('.');
  const size_t at = head.find('@');
  const size_t open = head.find(" [");
  if (dot == std::string_view::npos || at == std::string_view::npos || open == std::string_view::npos ||
      head.back() != ']') {
    throw ParseError("bad header: " + line);
  }
  plan.request.namespace_name = std::string(head.substr(0, dot));
  plan.request.table = std::string(head.substr(dot + 1, at - dot - 1));
  plan.request.snapshot_id = std::string(head.substr(at + 1, open - at - 1));
  std::string_view cols = head.substr(open + 2, head.size() - open - 3);
  while (!cols.empty()) {
    const size_t comma = cols.find(", ");
    plan.request.projections.emplace_back(cols.substr(0, comma));
    cols = comma == std::string_view::npos ? std::string_view{} : cols.substr(comma + 2);
  }

  std::getline(in, line);
  plan.request.filter = ParsePredicate(Strip(line, "  filter   "), schema);

  while (std::getline(in, line)) {
    if (line.rfind("  cache    ", 0) == 0) {
      std::string_view rest = Strip(line, "  cache    ");
      const size_t sp = rest.find(" refilter ");
      if (sp == std::string_view::npos) throw ParseError("bad cache line: " + line);
      CachePlanStep step;
      step.element_id = std::string(rest.substr(0, sp));
      step.refilter = ParsePredicate(rest.substr(sp + 10), schema);
      step.serve_projections = plan.request.projections;
      plan.cache_steps.push_back(std::move(step));
      continue;
    }
    std::string_view rest = Strip(line, "  residual ");
    const size_t est = rest.rfind(" (est ");
    if (est == std::string_view::npos || rest.substr(rest.size() - 7) != " bytes)") {
      throw ParseError("bad residual line: " + line);
    }
    const std::string_view body = rest.substr(0, est);
    plan.estimated_residual_bytes =
        std::stoull(std::string(rest.substr(est + 6, rest.size() - est - 13)));
    if (body != "none") {
      plan.residual = ResidualScan{plan.request.projections, ParsePredicate(body, schema)};
    }
  }
  return plan;
}

}  // namespace dcache::testing
