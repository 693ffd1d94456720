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

// Filter-expression algebra.
//
// A non-opaque Predicate is kept in a canonical disjunctive normal form: a
// list of Boxes, each box a conjunction of per-column interval lists. The
// canonical form is unique per row set, so two predicates select the same
// rows iff they compare equal (and render to the same text). Discrete
// columns (int64, date, timestamp) always carry closed bounds.

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dcache/types.hpp"

namespace dcache {

struct Bound {
  Scalar value;
  bool closed = true;

  bool operator==(const Bound&) const = default;
};

class Interval {
 public:
  // Returns nullopt when the bounds describe the empty set. Discrete bounds
  // are normalized to closed form. Both bounds absent is the full line.
  static std::optional<Interval> Make(std::optional<Bound> lower, std::optional<Bound> upper);
  static Interval Point(const Scalar& v);
  static Interval All() { return Interval(); }

  const std::optional<Bound>& lower() const { return lower_; }
  const std::optional<Bound>& upper() const { return upper_; }
  bool IsAll() const { return !lower_ && !upper_; }
  bool IsPoint() const;

  bool Contains(const Scalar& v) const;
  bool Covers(const Interval& inner) const;

  bool operator==(const Interval&) const = default;

 private:
  Interval() = default;

  std::optional<Bound> lower_;
  std::optional<Bound> upper_;
};

// Sorted, pairwise-disjoint, non-adjacent, non-empty list of intervals.
using IntervalSet = std::vector<Interval>;

namespace intervals {

IntervalSet Normalize(std::vector<Interval> items);
IntervalSet Intersect(const IntervalSet& a, const IntervalSet& b);
IntervalSet Complement(const IntervalSet& a);
bool Contains(const IntervalSet& set, const Scalar& v);
bool Overlaps(const IntervalSet& a, const Interval& b);
bool IsAll(const IntervalSet& set);

}  // namespace intervals

struct Box {
  // Absent columns are unconstrained.
  std::map<std::string, IntervalSet, std::less<>> constraints;

  bool operator==(const Box&) const = default;
};

class Predicate {
 public:
  static Predicate True();
  static Predicate False() { return Predicate(); }
  // Whitespace-normalized text of a filter the algebra cannot represent.
  static Predicate Opaque(std::string text);
  // Canonicalizes an arbitrary box list.
  static Predicate FromBoxes(std::vector<Box> boxes);

  bool opaque() const { return opaque_; }
  const std::vector<Box>& boxes() const { return boxes_; }
  bool IsFalse() const { return !opaque_ && boxes_.empty(); }
  bool IsTrue() const { return !opaque_ && boxes_.size() == 1 && boxes_[0].constraints.empty(); }

  // Number of single-interval boxes this predicate expands to.
  size_t Complexity() const;
  std::set<std::string> Columns() const;

  // Canonical text; always valid input for ParsePredicate.
  std::string ToString() const;

  bool operator==(const Predicate&) const = default;

 private:
  Predicate() = default;

  std::vector<Box> boxes_;
  bool opaque_ = false;
  std::string opaque_text_;
};

// Row view used by Evaluate: column name -> value.
using Row = std::map<std::string, Scalar, std::less<>>;

Predicate ParsePredicate(std::string_view text, const Schema& schema);

// Throws on opaque predicates and on columns missing from the row.
bool Evaluate(const Predicate& p, const Row& row);

// f AND NOT g. Throws InvalidArgument for opaque inputs.
Predicate Subtract(const Predicate& f, const Predicate& g);
// As Subtract, but gives up (nullopt) once the result exceeds max_boxes.
std::optional<Predicate> SubtractBounded(const Predicate& f, const Predicate& g,
                                         size_t max_boxes);
Predicate Intersect(const Predicate& f, const Predicate& g);
Predicate Union(const Predicate& f, const Predicate& g);
Predicate Complement(const Predicate& p);
bool IsEmpty(const Predicate& p);
bool Intersects(const Predicate& f, const Predicate& g);

// f OR g, but only when the union is no more complex than the larger input.
std::optional<Predicate> TryMerge(const Predicate& f, const Predicate& g);

}  // namespace dcache
