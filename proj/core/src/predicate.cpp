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

#include "dcache/predicate.hpp"

#include <algorithm>
#include <limits>
#include <utility>

#include "dcache/errors.hpp"

namespace dcache {

namespace {

// Bound drops that make the interval representation unique at the edges of a
// type's domain.
bool IsDomainMin(const Scalar& v) {
  if (v.type() == ColumnType::kString) return v.AsString().empty();
  if (IsDiscrete(v.type())) return v.AsInt() == std::numeric_limits<int64_t>::min();
  return false;
}

bool IsDomainMax(const Scalar& v) {
  if (IsDiscrete(v.type())) return v.AsInt() == std::numeric_limits<int64_t>::max();
  return false;
}

// Lower bounds: absent < present; smaller value first; closed before open.
int CompareLower(const std::optional<Bound>& a, const std::optional<Bound>& b) {
  if (!a || !b) return (a ? 1 : 0) - (b ? 1 : 0);
  auto c = Compare(a->value, b->value);
  if (c != 0) return c < 0 ? -1 : 1;
  if (a->closed == b->closed) return 0;
  return a->closed ? -1 : 1;
}

// Upper bounds: smaller value first; open before closed; absent last.
int CompareUpper(const std::optional<Bound>& a, const std::optional<Bound>& b) {
  if (!a || !b) return (a ? 0 : 1) - (b ? 0 : 1);
  auto c = Compare(a->value, b->value);
  if (c != 0) return c < 0 ? -1 : 1;
  if (a->closed == b->closed) return 0;
  return a->closed ? 1 : -1;
}

int CompareInterval(const Interval& a, const Interval& b) {
  if (int c = CompareLower(a.lower(), b.lower()); c != 0) return c;
  return CompareUpper(a.upper(), b.upper());
}

int CompareSets(const IntervalSet& a, const IntervalSet& b) {
  size_t n = std::min(a.size(), b.size());
  for (size_t i = 0; i < n; ++i) {
    if (int c = CompareInterval(a[i], b[i]); c != 0) return c;
  }
  if (a.size() == b.size()) return 0;
  return a.size() < b.size() ? -1 : 1;
}

bool BoxLess(const Box& a, const Box& b) {
  auto ia = a.constraints.begin();
  auto ib = b.constraints.begin();
  for (; ia != a.constraints.end() && ib != b.constraints.end(); ++ia, ++ib) {
    if (ia->first != ib->first) return ia->first < ib->first;
    if (int c = CompareSets(ia->second, ib->second); c != 0) return c < 0;
  }
  return ia == a.constraints.end() && ib != b.constraints.end();
}

// True when `next` (whose lower bound is >= cur's) overlaps or abuts `cur`
// with no value in between.
bool Touches(const Interval& cur, const Interval& next) {
  if (!cur.upper() || !next.lower()) return true;
  auto c = Compare(next.lower()->value, cur.upper()->value);
  if (c < 0) return true;
  if (c == 0) return next.lower()->closed || cur.upper()->closed;
  if (IsDiscrete(cur.upper()->value.type())) {
    auto succ = cur.upper()->value.Next();
    return succ && *succ == next.lower()->value;
  }
  return false;
}

const std::optional<Bound>& MaxUpper(const std::optional<Bound>& a, const std::optional<Bound>& b) {
  return CompareUpper(a, b) >= 0 ? a : b;
}

const std::optional<Bound>& MinUpper(const std::optional<Bound>& a, const std::optional<Bound>& b) {
  return CompareUpper(a, b) <= 0 ? a : b;
}

const std::optional<Bound>& MaxLower(const std::optional<Bound>& a, const std::optional<Bound>& b) {
  return CompareLower(a, b) >= 0 ? a : b;
}

std::optional<Interval> IntersectOne(const Interval& a, const Interval& b) {
  return Interval::Make(MaxLower(a.lower(), b.lower()), MinUpper(a.upper(), b.upper()));
}

std::optional<Bound> Flip(const std::optional<Bound>& b) {
  if (!b) return std::nullopt;
  return Bound{b->value, !b->closed};
}

std::optional<Box> IntersectBoxes(const Box& a, const Box& b) {
  Box out = a;
  for (const auto& [col, set] : b.constraints) {
    auto it = out.constraints.find(col);
    if (it == out.constraints.end()) {
      out.constraints.emplace(col, set);
      continue;
    }
    IntervalSet merged = intervals::Intersect(it->second, set);
    if (merged.empty()) return std::nullopt;
    it->second = std::move(merged);
  }
  return out;
}

bool BoxesIntersect(const Box& a, const Box& b) {
  for (const auto& [col, set] : a.constraints) {
    auto it = b.constraints.find(col);
    if (it == b.constraints.end()) continue;
    if (intervals::Intersect(set, it->second).empty()) return false;
  }
  return true;
}

// Disjoint decomposition of p \ q.
void AppendBoxDifference(const Box& p, const Box& q, std::vector<Box>& out) {
  if (!BoxesIntersect(p, q)) {
    out.push_back(p);
    return;
  }
  Box rest = p;
  for (const auto& [col, set] : q.constraints) {
    IntervalSet comp = intervals::Complement(set);
    if (!comp.empty()) {
      Box piece = rest;
      auto it = piece.constraints.find(col);
      IntervalSet restricted =
          it == piece.constraints.end() ? comp : intervals::Intersect(it->second, comp);
      if (!restricted.empty()) {
        piece.constraints[col] = std::move(restricted);
        out.push_back(std::move(piece));
      }
    }
    auto it = rest.constraints.find(col);
    IntervalSet inside = it == rest.constraints.end() ? set : intervals::Intersect(it->second, set);
    if (inside.empty()) return;
    rest.constraints[col] = std::move(inside);
  }
  // `rest` is now p AND q, which is removed.
}

// Canonical form: columns are split in name order into elementary cells;
// cells whose remaining-column slices are equal are grouped, and slices are
// canonicalized recursively. The output depends only on the row set.
class Canonicalizer {
 public:
  explicit Canonicalizer(const std::vector<Box>& boxes) : boxes_(boxes) {
    std::set<std::string> cols;
    for (const auto& b : boxes_) {
      for (const auto& [col, set] : b.constraints) cols.insert(col);
    }
    columns_.assign(cols.begin(), cols.end());
  }

  std::vector<Box> Run() {
    std::vector<size_t> all(boxes_.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    return Rec(all, 0);
  }

 private:
  std::vector<Box> Rec(const std::vector<size_t>& members, size_t k) {
    if (members.empty()) return {};
    while (k < columns_.size() && !AnyConstrains(members, columns_[k])) ++k;
    if (k == columns_.size()) return {Box{}};

    auto key = std::make_pair(k, members);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;

    const std::string& col = columns_[k];
    std::vector<Interval> cells = Cells(members, col);

    std::vector<std::pair<std::vector<Box>, std::vector<Interval>>> groups;
    std::vector<size_t> inside;
    for (const auto& cell : cells) {
      inside.clear();
      for (size_t m : members) {
        auto it = boxes_[m].constraints.find(col);
        if (it == boxes_[m].constraints.end() || CellInside(it->second, cell)) inside.push_back(m);
      }
      if (inside.empty()) continue;
      std::vector<Box> sub = Rec(inside, k + 1);
      if (sub.empty()) continue;
      auto g = std::find_if(groups.begin(), groups.end(),
                            [&](const auto& grp) { return grp.first == sub; });
      if (g == groups.end()) {
        groups.emplace_back(std::move(sub), std::vector<Interval>{cell});
      } else {
        g->second.push_back(cell);
      }
    }

    std::vector<Box> out;
    for (auto& [sub, group_cells] : groups) {
      IntervalSet set = intervals::Normalize(std::move(group_cells));
      bool all = intervals::IsAll(set);
      for (auto& b : sub) {
        Box box = std::move(b);
        if (!all) box.constraints.emplace(col, set);
        out.push_back(std::move(box));
      }
    }
    std::sort(out.begin(), out.end(), BoxLess);
    memo_.emplace(std::move(key), out);
    return out;
  }

  bool AnyConstrains(const std::vector<size_t>& members, const std::string& col) const {
    for (size_t m : members) {
      if (boxes_[m].constraints.count(col)) return true;
    }
    return false;
  }

  static bool CellInside(const IntervalSet& set, const Interval& cell) {
    for (const auto& iv : set) {
      if (iv.Covers(cell)) return true;
    }
    return false;
  }

  std::vector<Interval> Cells(const std::vector<size_t>& members, const std::string& col) const {
    std::vector<Scalar> points;
    for (size_t m : members) {
      auto it = boxes_[m].constraints.find(col);
      if (it == boxes_[m].constraints.end()) continue;
      for (const auto& iv : it->second) {
        if (iv.lower()) points.push_back(iv.lower()->value);
        if (iv.upper()) points.push_back(iv.upper()->value);
      }
    }
    std::sort(points.begin(), points.end());
    points.erase(std::unique(points.begin(), points.end()), points.end());

    std::vector<Interval> cells;
    if (points.empty()) {
      cells.push_back(Interval::All());
      return cells;
    }
    auto add = [&](std::optional<Interval> iv) {
      if (iv) cells.push_back(std::move(*iv));
    };
    add(Interval::Make(std::nullopt, Bound{points.front(), false}));
    for (size_t i = 0; i < points.size(); ++i) {
      cells.push_back(Interval::Point(points[i]));
      if (i + 1 < points.size()) {
        add(Interval::Make(Bound{points[i], false}, Bound{points[i + 1], false}));
      }
    }
    add(Interval::Make(Bound{points.back(), false}, std::nullopt));
    return cells;
  }

  const std::vector<Box>& boxes_;
  std::vector<std::string> columns_;
  std::map<std::pair<size_t, std::vector<size_t>>, std::vector<Box>> memo_;
};

std::vector<Box> Canonicalize(std::vector<Box> boxes) {
  std::erase_if(boxes, [](const Box& b) {
    return std::any_of(b.constraints.begin(), b.constraints.end(),
                       [](const auto& kv) { return kv.second.empty(); });
  });
  if (boxes.empty()) return {};
  for (const auto& b : boxes) {
    if (b.constraints.empty()) return {Box{}};
  }
  return Canonicalizer(boxes).Run();
}

void RequireTransparent(const Predicate& p, const char* op) {
  if (p.opaque()) {
    throw InvalidArgument(std::string(op) + " is not defined for opaque predicate '" +
                          p.ToString() + "'");
  }
}

std::string IntervalText(const std::string& col, const Interval& iv, bool grouped) {
  if (iv.IsPoint()) return col + " = " + iv.lower()->value.ToLiteral();
  const auto& lo = iv.lower();
  const auto& hi = iv.upper();
  if (lo && hi && lo->closed && hi->closed) {
    return col + " BETWEEN " + lo->value.ToLiteral() + " AND " + hi->value.ToLiteral();
  }
  std::string lower_text;
  std::string upper_text;
  if (lo) lower_text = col + (lo->closed ? " >= " : " > ") + lo->value.ToLiteral();
  if (hi) upper_text = col + (hi->closed ? " <= " : " < ") + hi->value.ToLiteral();
  if (!lo) return upper_text;
  if (!hi) return lower_text;
  std::string both = lower_text + " AND " + upper_text;
  return grouped ? "(" + both + ")" : both;
}

std::string BoxText(const Box& box, bool grouped) {
  std::vector<std::string> terms;
  for (const auto& [col, set] : box.constraints) {
    if (set.size() == 1) {
      terms.push_back(IntervalText(col, set[0], grouped || box.constraints.size() > 1));
      continue;
    }
    std::string t = "(";
    for (size_t i = 0; i < set.size(); ++i) {
      if (i) t += " OR ";
      t += IntervalText(col, set[i], true);
    }
    terms.push_back(t + ")");
  }
  if (terms.size() == 1) return terms[0];
  std::string out;
  for (size_t i = 0; i < terms.size(); ++i) {
    if (i) out += " AND ";
    out += terms[i];
  }
  return grouped ? "(" + out + ")" : out;
}

}  // namespace

// --- Interval --------------------------------------------------------------

std::optional<Interval> Interval::Make(std::optional<Bound> lower, std::optional<Bound> upper) {
  if (lower && IsDiscrete(lower->value.type()) && !lower->closed) {
    auto next = lower->value.Next();
    if (!next) return std::nullopt;
    lower = Bound{*next, true};
  }
  if (upper && IsDiscrete(upper->value.type()) && !upper->closed) {
    auto prev = upper->value.Prev();
    if (!prev) return std::nullopt;
    upper = Bound{*prev, true};
  }
  if (upper && upper->value.type() == ColumnType::kString && !upper->closed &&
      IsDomainMin(upper->value)) {
    return std::nullopt;
  }
  if (lower && upper) {
    auto c = Compare(lower->value, upper->value);
    if (c > 0) return std::nullopt;
    if (c == 0 && !(lower->closed && upper->closed)) return std::nullopt;
  }
  if (lower && lower->closed && IsDomainMin(lower->value)) lower.reset();
  if (upper && upper->closed && IsDomainMax(upper->value)) upper.reset();
  Interval iv;
  iv.lower_ = std::move(lower);
  iv.upper_ = std::move(upper);
  return iv;
}

Interval Interval::Point(const Scalar& v) {
  auto iv = Make(Bound{v, true}, Bound{v, true});
  return *iv;
}

bool Interval::IsPoint() const {
  return lower_ && upper_ && lower_->closed && upper_->closed && lower_->value == upper_->value;
}

bool Interval::Contains(const Scalar& v) const {
  if (lower_) {
    auto c = Compare(lower_->value, v);
    if (c > 0 || (c == 0 && !lower_->closed)) return false;
  }
  if (upper_) {
    auto c = Compare(v, upper_->value);
    if (c > 0 || (c == 0 && !upper_->closed)) return false;
  }
  return true;
}

bool Interval::Covers(const Interval& inner) const {
  if (lower_) {
    if (!inner.lower_) return false;
    auto c = Compare(lower_->value, inner.lower_->value);
    if (c > 0 || (c == 0 && !lower_->closed && inner.lower_->closed)) return false;
  }
  if (upper_) {
    if (!inner.upper_) return false;
    auto c = Compare(inner.upper_->value, upper_->value);
    if (c > 0 || (c == 0 && !upper_->closed && inner.upper_->closed)) return false;
  }
  return true;
}

// --- IntervalSet -----------------------------------------------------------

namespace intervals {

IntervalSet Normalize(std::vector<Interval> items) {
  if (items.size() <= 1) return items;
  std::sort(items.begin(), items.end(), [](const Interval& a, const Interval& b) {
    return CompareInterval(a, b) < 0;
  });
  IntervalSet out;
  out.reserve(items.size());
  Interval cur = items[0];
  for (size_t i = 1; i < items.size(); ++i) {
    if (Touches(cur, items[i])) {
      cur = *Interval::Make(cur.lower(), MaxUpper(cur.upper(), items[i].upper()));
    } else {
      out.push_back(std::move(cur));
      cur = items[i];
    }
  }
  out.push_back(std::move(cur));
  return out;
}

IntervalSet Intersect(const IntervalSet& a, const IntervalSet& b) {
  std::vector<Interval> parts;
  for (const auto& x : a) {
    for (const auto& y : b) {
      if (auto iv = IntersectOne(x, y)) parts.push_back(std::move(*iv));
    }
  }
  return Normalize(std::move(parts));
}

IntervalSet Complement(const IntervalSet& a) {
  if (a.empty()) return {Interval::All()};
  std::vector<Interval> parts;
  std::optional<Bound> prev_upper;
  bool first = true;
  for (const auto& iv : a) {
    if (first) {
      if (iv.lower()) {
        if (auto gap = Interval::Make(std::nullopt, Flip(iv.lower()))) parts.push_back(*gap);
      }
      first = false;
    } else if (auto gap = Interval::Make(Flip(prev_upper), Flip(iv.lower()))) {
      parts.push_back(*gap);
    }
    prev_upper = iv.upper();
  }
  if (prev_upper) {
    if (auto gap = Interval::Make(Flip(prev_upper), std::nullopt)) parts.push_back(*gap);
  }
  return Normalize(std::move(parts));
}

bool Contains(const IntervalSet& set, const Scalar& v) {
  for (const auto& iv : set) {
    if (iv.Contains(v)) return true;
  }
  return false;
}

bool Overlaps(const IntervalSet& a, const Interval& b) {
  for (const auto& iv : a) {
    if (IntersectOne(iv, b)) return true;
  }
  return false;
}

bool IsAll(const IntervalSet& set) { return set.size() == 1 && set[0].IsAll(); }

}  // namespace intervals

// --- Predicate -------------------------------------------------------------

Predicate Predicate::True() {
  Predicate p;
  p.boxes_.push_back(Box{});
  return p;
}

Predicate Predicate::Opaque(std::string text) {
  Predicate p;
  p.opaque_ = true;
  p.opaque_text_ = std::move(text);
  return p;
}

Predicate Predicate::FromBoxes(std::vector<Box> boxes) {
  Predicate p;
  p.boxes_ = Canonicalize(std::move(boxes));
  return p;
}

size_t Predicate::Complexity() const {
  if (opaque_) return 1;
  size_t total = 0;
  for (const auto& b : boxes_) {
    size_t n = 1;
    for (const auto& [col, set] : b.constraints) n *= set.size();
    total += n;
  }
  return total;
}

std::set<std::string> Predicate::Columns() const {
  std::set<std::string> cols;
  for (const auto& b : boxes_) {
    for (const auto& [col, set] : b.constraints) cols.insert(col);
  }
  return cols;
}

std::string Predicate::ToString() const {
  if (opaque_) return opaque_text_;
  if (boxes_.empty()) return "FALSE";
  if (IsTrue()) return "TRUE";
  if (boxes_.size() == 1) return BoxText(boxes_[0], false);
  std::string out;
  for (size_t i = 0; i < boxes_.size(); ++i) {
    if (i) out += " OR ";
    out += BoxText(boxes_[i], true);
  }
  return out;
}

bool Evaluate(const Predicate& p, const Row& row) {
  RequireTransparent(p, "evaluate");
  for (const auto& box : p.boxes()) {
    bool ok = true;
    for (const auto& [col, set] : box.constraints) {
      auto it = row.find(col);
      if (it == row.end()) throw NotFoundError("row has no column '" + col + "'");
      if (!intervals::Contains(set, it->second)) {
        ok = false;
        break;
      }
    }
    if (ok) return true;
  }
  return false;
}

std::optional<Predicate> SubtractBounded(const Predicate& f, const Predicate& g,
                                         size_t max_boxes) {
  RequireTransparent(f, "subtract");
  RequireTransparent(g, "subtract");
  // Raw pieces are re-canonicalized when they pile up; the cap only bounds
  // intermediate work.
  const size_t work_cap = max_boxes == std::numeric_limits<size_t>::max()
                              ? max_boxes
                              : std::max<size_t>(4096, max_boxes * 64);
  std::vector<Box> pieces = f.boxes();
  for (const auto& gb : g.boxes()) {
    std::vector<Box> next;
    for (const auto& p : pieces) AppendBoxDifference(p, gb, next);
    if (next.size() > 32) next = Canonicalize(std::move(next));
    if (next.size() > work_cap) return std::nullopt;
    pieces = std::move(next);
    if (pieces.empty()) break;
  }
  Predicate out = Predicate::FromBoxes(std::move(pieces));
  if (out.boxes().size() > max_boxes) return std::nullopt;
  return out;
}

Predicate Subtract(const Predicate& f, const Predicate& g) {
  return *SubtractBounded(f, g, std::numeric_limits<size_t>::max());
}

Predicate Intersect(const Predicate& f, const Predicate& g) {
  RequireTransparent(f, "intersect");
  RequireTransparent(g, "intersect");
  std::vector<Box> out;
  for (const auto& a : f.boxes()) {
    for (const auto& b : g.boxes()) {
      if (auto box = IntersectBoxes(a, b)) out.push_back(std::move(*box));
    }
  }
  return Predicate::FromBoxes(std::move(out));
}

Predicate Union(const Predicate& f, const Predicate& g) {
  RequireTransparent(f, "union");
  RequireTransparent(g, "union");
  std::vector<Box> all = f.boxes();
  all.insert(all.end(), g.boxes().begin(), g.boxes().end());
  return Predicate::FromBoxes(std::move(all));
}

Predicate Complement(const Predicate& p) { return Subtract(Predicate::True(), p); }

bool IsEmpty(const Predicate& p) {
  RequireTransparent(p, "is_empty");
  return p.boxes().empty();
}

bool Intersects(const Predicate& f, const Predicate& g) {
  RequireTransparent(f, "intersects");
  RequireTransparent(g, "intersects");
  for (const auto& a : f.boxes()) {
    for (const auto& b : g.boxes()) {
      if (BoxesIntersect(a, b)) return true;
    }
  }
  return false;
}

std::optional<Predicate> TryMerge(const Predicate& f, const Predicate& g) {
  if (f.opaque() || g.opaque()) return std::nullopt;
  Predicate u = Union(f, g);
  if (u.Complexity() > std::max(f.Complexity(), g.Complexity())) return std::nullopt;
  return u;
}

}  // namespace dcache
