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

#include "dcache/types.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "dcache/errors.hpp"

namespace dcache {

namespace {

using namespace std::chrono;

bool AllDigits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  return true;
}

int ToInt(std::string_view s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ParseError("invalid number '" + std::string(s) + "'");
  }
  return v;
}

constexpr int64_t kMicrosPerDay = 86'400'000'000LL;

}  // namespace

std::string_view TypeName(ColumnType type) {
  switch (type) {
    case ColumnType::kInt64:
      return "int64";
    case ColumnType::kFloat64:
      return "float64";
    case ColumnType::kString:
      return "string";
    case ColumnType::kDate:
      return "date";
    case ColumnType::kTimestamp:
      return "timestamp";
  }
  return "unknown";
}

ColumnType ParseTypeName(std::string_view name) {
  if (name == "int64") return ColumnType::kInt64;
  if (name == "float64") return ColumnType::kFloat64;
  if (name == "string") return ColumnType::kString;
  if (name == "date") return ColumnType::kDate;
  if (name == "timestamp") return ColumnType::kTimestamp;
  throw ParseError("unknown column type '" + std::string(name) + "'");
}

bool LooksLikeDate(std::string_view t) {
  return t.size() == 10 && AllDigits(t.substr(0, 4)) && t[4] == '-' &&
         AllDigits(t.substr(5, 2)) && t[7] == '-' && AllDigits(t.substr(8, 2));
}

bool LooksLikeTimestamp(std::string_view t) {
  if (t.size() < 19 || !LooksLikeDate(t.substr(0, 10))) return false;
  if (t[10] != 'T' && t[10] != ' ') return false;
  if (!AllDigits(t.substr(11, 2)) || t[13] != ':' || !AllDigits(t.substr(14, 2)) ||
      t[16] != ':' || !AllDigits(t.substr(17, 2))) {
    return false;
  }
  if (t.size() == 19) return true;
  return t[19] == '.' && t.size() >= 21 && t.size() <= 26 && AllDigits(t.substr(20));
}

int64_t ParseDate(std::string_view text) {
  if (!LooksLikeDate(text)) throw ParseError("invalid date '" + std::string(text) + "'");
  year_month_day ymd{year{ToInt(text.substr(0, 4))},
                     month{static_cast<unsigned>(ToInt(text.substr(5, 2)))},
                     day{static_cast<unsigned>(ToInt(text.substr(8, 2)))}};
  if (!ymd.ok()) throw ParseError("invalid date '" + std::string(text) + "'");
  return sys_days{ymd}.time_since_epoch().count();
}

std::string FormatDate(int64_t days) {
  year_month_day ymd{sys_days{std::chrono::days{days}}};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

int64_t ParseTimestamp(std::string_view text) {
  if (LooksLikeDate(text)) return ParseDate(text) * kMicrosPerDay;
  if (!LooksLikeTimestamp(text)) {
    throw ParseError("invalid timestamp '" + std::string(text) + "'");
  }
  int64_t days = ParseDate(text.substr(0, 10));
  int hh = ToInt(text.substr(11, 2));
  int mm = ToInt(text.substr(14, 2));
  int ss = ToInt(text.substr(17, 2));
  if (hh > 23 || mm > 59 || ss > 59) {
    throw ParseError("invalid timestamp '" + std::string(text) + "'");
  }
  int64_t frac = 0;
  if (text.size() > 19) {
    std::string digits(text.substr(20));
    digits.resize(6, '0');
    frac = ToInt(digits);
  }
  return days * kMicrosPerDay + (hh * 3600LL + mm * 60LL + ss) * 1'000'000LL + frac;
}

std::string FormatTimestamp(int64_t micros) {
  int64_t days = micros / kMicrosPerDay;
  int64_t rem = micros % kMicrosPerDay;
  if (rem < 0) {
    rem += kMicrosPerDay;
    --days;
  }
  int64_t secs = rem / 1'000'000;
  int64_t frac = rem % 1'000'000;
  char buf[48];
  std::snprintf(buf, sizeof(buf), "T%02lld:%02lld:%02lld", static_cast<long long>(secs / 3600),
                static_cast<long long>((secs / 60) % 60), static_cast<long long>(secs % 60));
  std::string out = FormatDate(days) + buf;
  if (frac != 0) {
    std::snprintf(buf, sizeof(buf), ".%06lld", static_cast<long long>(frac));
    out += buf;
  }
  return out;
}

Scalar Scalar::Float64(double v) {
  if (!std::isfinite(v)) throw TypeError("float64 values must be finite");
  if (v == 0.0) v = 0.0;  // fold -0.0
  return Scalar(ColumnType::kFloat64, v);
}

Scalar Scalar::Parse(std::string_view text, ColumnType type) {
  switch (type) {
    case ColumnType::kInt64: {
      int64_t v = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || p != text.data() + text.size()) {
        throw TypeError("invalid int64 value '" + std::string(text) + "'");
      }
      return Int64(v);
    }
    case ColumnType::kFloat64: {
      double v = 0;
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
      if (ec != std::errc() || p != text.data() + text.size() || !std::isfinite(v)) {
        throw TypeError("invalid float64 value '" + std::string(text) + "'");
      }
      return Float64(v);
    }
    case ColumnType::kString:
      return String(std::string(text));
    case ColumnType::kDate:
      try {
        return Date(ParseDate(text));
      } catch (const ParseError& e) {
        throw TypeError(e.what());
      }
    case ColumnType::kTimestamp:
      try {
        return Timestamp(ParseTimestamp(text));
      } catch (const ParseError& e) {
        throw TypeError(e.what());
      }
  }
  throw TypeError("unknown column type");
}

int64_t Scalar::AsInt() const {
  if (!IsIntegerBacked(type_)) {
    throw TypeError("scalar of type " + std::string(TypeName(type_)) + " is not integer-backed");
  }
  return std::get<int64_t>(value_);
}

double Scalar::AsDouble() const {
  if (type_ != ColumnType::kFloat64) throw TypeError("scalar is not float64");
  return std::get<double>(value_);
}

const std::string& Scalar::AsString() const {
  if (type_ != ColumnType::kString) throw TypeError("scalar is not a string");
  return std::get<std::string>(value_);
}

std::optional<Scalar> Scalar::Next() const {
  if (!IsDiscrete(type_)) return std::nullopt;
  int64_t v = std::get<int64_t>(value_);
  if (v == std::numeric_limits<int64_t>::max()) return std::nullopt;
  return Scalar(type_, v + 1);
}

std::optional<Scalar> Scalar::Prev() const {
  if (!IsDiscrete(type_)) return std::nullopt;
  int64_t v = std::get<int64_t>(value_);
  if (v == std::numeric_limits<int64_t>::min()) return std::nullopt;
  return Scalar(type_, v - 1);
}

std::string Scalar::ToLiteral() const {
  switch (type_) {
    case ColumnType::kString: {
      std::string out = "'";
      for (char c : std::get<std::string>(value_)) {
        if (c == '\'') out += '\'';
        out += c;
      }
      out += '\'';
      return out;
    }
    case ColumnType::kFloat64: {
      std::string s = ToString();
      if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
      return s;
    }
    default:
      return ToString();
  }
}

std::string Scalar::ToString() const {
  switch (type_) {
    case ColumnType::kInt64:
      return std::to_string(std::get<int64_t>(value_));
    case ColumnType::kFloat64: {
      char buf[64];
      auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), std::get<double>(value_));
      return std::string(buf, p);
    }
    case ColumnType::kString:
      return std::get<std::string>(value_);
    case ColumnType::kDate:
      return FormatDate(std::get<int64_t>(value_));
    case ColumnType::kTimestamp:
      return FormatTimestamp(std::get<int64_t>(value_));
  }
  return {};
}

std::strong_ordering Compare(const Scalar& a, const Scalar& b) {
  if (a.type_ != b.type_) {
    throw TypeError("cannot compare " + std::string(TypeName(a.type_)) + " with " +
                    std::string(TypeName(b.type_)));
  }
  switch (a.type_) {
    case ColumnType::kFloat64: {
      double x = std::get<double>(a.value_);
      double y = std::get<double>(b.value_);
      if (x < y) return std::strong_ordering::less;
      if (x > y) return std::strong_ordering::greater;
      return std::strong_ordering::equal;
    }
    case ColumnType::kString:
      return std::get<std::string>(a.value_).compare(std::get<std::string>(b.value_)) <=> 0;
    default:
      return std::get<int64_t>(a.value_) <=> std::get<int64_t>(b.value_);
  }
}

const Field* FindField(const Schema& schema, std::string_view name) {
  for (const auto& f : schema) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

const Field& GetField(const Schema& schema, std::string_view name) {
  if (const Field* f = FindField(schema, name)) return *f;
  throw NotFoundError("unknown column '" + std::string(name) + "'");
}

}  // namespace dcache
